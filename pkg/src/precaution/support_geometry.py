"""Finite convex geometry of payoff sets.

A payoff set is a finite list of state-indexed payoff vectors, one per
feasible second-stage decision.  Its support function over the simplex is
the maximal expected payoff, which is exactly the second-stage value as a
function of the belief.  Because beliefs are nonnegative, the support value
of a set and of its downward (componentwise-domination) closure coincide,
so the closure is never materialized: all membership questions reduce to
domination queries against the finite vertex list.

The star-difference of two downward-closed sets is the maximal translate
set {k | k + set0 inside set1}; when the support-function gap between two
payoff sets coincides with the support function of their star-difference,
the gap is convex in the belief, which is what the decomposition
certificate reports.

Pure functions over immutable values; probe trials draw from per-trial
split seeds, so evaluation order cannot change any verdict.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, EmptyStarDifference
from .prob import sample_simplex

#: tolerance for exact arithmetic identities (sums, domination queries)
ARITH_TOL = 1e-12
#: tolerance for sampled verdicts, looser to absorb inner-product error
VERDICT_TOL = 1e-9


@dataclass(frozen=True)
class PayoffSet:
    """A finite set of m-dimensional payoff vectors."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if v.size == 0:
            raise ValueError("a payoff set must contain at least one vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("payoff vectors must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def as_dict(self) -> dict:
        return {"m": self.m, "vectors": self.vectors.tolist()}

    @staticmethod
    def from_dict(doc: dict) -> "PayoffSet":
        ps = PayoffSet(np.asarray(doc["vectors"], dtype=float))
        if "m" in doc and int(doc["m"]) != ps.m:
            raise DimensionMismatch(f"declared m={doc['m']} but vectors have dimension {ps.m}")
        return ps


@dataclass(frozen=True)
class ConvexityWitness:
    """A probe triple and the signed convexity defect it produced."""

    rho1: np.ndarray
    rho2: np.ndarray
    t: float
    violation: float

    def as_dict(self) -> dict:
        return {
            "rho1": np.asarray(self.rho1).tolist(),
            "rho2": np.asarray(self.rho2).tolist(),
            "t": self.t,
            "violation": self.violation,
        }


@dataclass(frozen=True)
class ConvexityVerdict:
    """Outcome of a sampled convexity probe.

    ``kind`` is one of Convex, Concave, Affine, Neither.  The witnesses
    record the largest defect in each direction; a Neither verdict always
    carries both, each exceeding the tolerance.
    """

    kind: str
    worst_above: ConvexityWitness | None
    worst_below: ConvexityWitness | None
    tolerance: float = VERDICT_TOL

    @property
    def is_convex_or_affine(self) -> bool:
        return self.kind in ("Convex", "Affine")

    @property
    def is_concave_or_affine(self) -> bool:
        return self.kind in ("Concave", "Affine")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tolerance": self.tolerance,
            "worst_above": self.worst_above.as_dict() if self.worst_above else None,
            "worst_below": self.worst_below.as_dict() if self.worst_below else None,
        }


@dataclass(frozen=True)
class CertificateReport:
    """Result of checking the support-function decomposition on sampled beliefs."""

    passed: bool
    max_gap: float
    worst_rho: np.ndarray
    k_star: PayoffSet
    samples: int
    tolerance: float = VERDICT_TOL

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_gap": self.max_gap,
            "worst_rho": np.asarray(self.worst_rho).tolist(),
            "k_star": self.k_star.as_dict(),
            "samples": self.samples,
            "tolerance": self.tolerance,
        }


def support_value(payoffs: PayoffSet, rho) -> float:
    """max over payoff vectors of the expectation under ``rho``.

    ``rho`` may be a Dist or a bare weight vector.  For nonnegative weights
    this equals the support value of the downward closure.
    """
    weights = np.asarray(getattr(rho, "probs", rho), dtype=float)
    if weights.shape != (payoffs.m,):
        raise DimensionMismatch(
            f"belief has shape {weights.shape}, payoff vectors have dimension {payoffs.m}"
        )
    return float(np.max(payoffs.vectors @ weights))


def support_values(payoffs: PayoffSet, rhos: np.ndarray) -> np.ndarray:
    """Vectorized ``support_value`` over the rows of ``rhos``."""
    rhos = np.atleast_2d(np.asarray(rhos, dtype=float))
    if rhos.shape[1] != payoffs.m:
        raise DimensionMismatch(
            f"beliefs have dimension {rhos.shape[1]}, payoff vectors have dimension {payoffs.m}"
        )
    return (payoffs.vectors @ rhos.T).max(axis=0)


def minkowski_sum(set1: PayoffSet, set2: PayoffSet) -> PayoffSet:
    """All pairwise vector sums (exact duplicates removed)."""
    if set1.m != set2.m:
        raise DimensionMismatch(f"dimensions differ: {set1.m} vs {set2.m}")
    sums = (set1.vectors[:, None, :] + set2.vectors[None, :, :]).reshape(-1, set1.m)
    return PayoffSet(np.unique(sums, axis=0))


def dominated_in(point: np.ndarray, vectors: np.ndarray, tol: float = ARITH_TOL) -> bool:
    """True if some row of ``vectors`` dominates ``point`` componentwise (up to tol)."""
    return bool(np.any(np.all(vectors >= point - tol, axis=1)))


def maximal_elements(vectors: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Rows not dominated by another row (duplicates removed).

    Processes rows in decreasing-sum order so a candidate can only be
    dominated by rows already kept.  A positive ``tol`` treats rows
    dominated up to ``tol`` in every coordinate as dominated, which absorbs
    the one-ulp ties float arithmetic introduces between rebuilt vectors.
    """
    v = np.unique(np.atleast_2d(np.asarray(vectors, dtype=float)), axis=0)
    order = np.argsort(-v.sum(axis=1), kind="stable")
    kept: list[np.ndarray] = []
    for idx in order:
        cand = v[idx]
        if kept and np.any(np.all(np.asarray(kept) >= cand - tol, axis=1)):
            continue
        kept.append(cand)
    out = np.asarray(kept)
    return out[np.lexsort(out.T[::-1])]


def star_difference(set1: PayoffSet, set0: PayoffSet, tol: float = ARITH_TOL) -> PayoffSet:
    """Maximal elements of {k | k + set0 lies in the downward closure of set1}.

    Candidates are componentwise minima of vertex differences, one choice of
    set1-vertex per set0-vertex; intersecting one set0-vertex at a time and
    pruning dominated candidates keeps the enumeration exact without walking
    the full selection product.  A final domination query against set1
    filters the survivors; the final pruning runs at ``tol`` to drop
    candidates that only survive by float noise.
    """
    if set1.m != set0.m:
        raise DimensionMismatch(f"dimensions differ: {set1.m} vs {set0.m}")
    p1 = maximal_elements(set1.vectors)
    p0 = maximal_elements(set0.vectors)

    apexes = p1 - p0[0]
    apexes = maximal_elements(apexes)
    for lam0 in p0[1:]:
        branch = p1 - lam0
        merged = np.minimum(apexes[:, None, :], branch[None, :, :]).reshape(-1, set1.m)
        apexes = maximal_elements(merged)

    member = [k for k in apexes if all(dominated_in(k + lam0, p1, tol) for lam0 in p0)]
    if not member:
        raise EmptyStarDifference("no translate of set0 fits inside set1")
    return PayoffSet(maximal_elements(np.asarray(member), tol))


def decomposition_certificate(
    set1: PayoffSet,
    set0: PayoffSet,
    samples: int,
    seed: int,
    tolerance: float = VERDICT_TOL,
) -> CertificateReport:
    """Check whether the support gap of (set1, set0) is the support function
    of their star-difference, on sampled beliefs plus all simplex vertices.

    PASS means the gap coincides with a support function on the probe set,
    hence is convex there.  FAIL reports the belief with the worst gap; it
    signals that no exact translate decomposition exists at this resolution,
    not that convexity fails.
    """
    if set1.m != set0.m:
        raise DimensionMismatch(f"dimensions differ: {set1.m} vs {set0.m}")
    k_star = star_difference(set1, set0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    probes = np.vstack([np.eye(set1.m), sample_simplex(set1.m, samples, rng)])
    gaps = support_values(set1, probes) - support_values(set0, probes) - support_values(k_star, probes)
    worst = int(np.argmax(np.abs(gaps)))
    max_gap = float(np.abs(gaps[worst]))
    return CertificateReport(
        passed=max_gap <= tolerance,
        max_gap=max_gap,
        worst_rho=probes[worst],
        k_star=k_star,
        samples=samples,
        tolerance=tolerance,
    )


def _deterministic_probe_points(m: int) -> np.ndarray:
    """Simplex vertices plus all edge midpoints, so kinks on low-dimensional
    faces are always visited."""
    points = [np.eye(m)[i] for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            points.append((np.eye(m)[i] + np.eye(m)[j]) / 2.0)
    return np.asarray(points)


def convexity_probe(
    f: Callable[[np.ndarray], float],
    m: int,
    trials: int,
    seed: int,
    tolerance: float = VERDICT_TOL,
) -> ConvexityVerdict:
    """Sampled midpoint-convexity classification of ``f`` on the simplex.

    Evaluates d = f(t*rho1 + (1-t)*rho2) - t*f(rho1) - (1-t)*f(rho2) on all
    pairs of deterministic probe points (vertices and edge midpoints, at
    t = 1/2) and on ``trials`` random triples with uniform-simplex endpoints
    and uniform t.  Convex means d never exceeds the tolerance, Concave
    means d never falls below its negative, Affine means both.  The seed is
    split per trial so parallel and serial runs agree bit-for-bit.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")

    worst_above: ConvexityWitness | None = None
    worst_below: ConvexityWitness | None = None

    def record(rho1: np.ndarray, rho2: np.ndarray, t: float) -> None:
        nonlocal worst_above, worst_below
        d = float(f(t * rho1 + (1.0 - t) * rho2)) - t * float(f(rho1)) - (1.0 - t) * float(f(rho2))
        if d > 0 and (worst_above is None or d > worst_above.violation):
            worst_above = ConvexityWitness(rho1, rho2, t, d)
        if d < 0 and (worst_below is None or d < worst_below.violation):
            worst_below = ConvexityWitness(rho1, rho2, t, d)

    fixed = _deterministic_probe_points(m)
    for i in range(len(fixed)):
        for j in range(i + 1, len(fixed)):
            record(fixed[i], fixed[j], 0.5)

    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        rho1, rho2 = sample_simplex(m, 2, rng)
        record(rho1, rho2, float(rng.uniform()))

    above = worst_above.violation if worst_above else 0.0
    below = -worst_below.violation if worst_below else 0.0
    if above <= tolerance and below <= tolerance:
        kind = "Affine"
    elif above <= tolerance:
        kind = "Convex"
    elif below <= tolerance:
        kind = "Concave"
    else:
        kind = "Neither"
    return ConvexityVerdict(kind, worst_above, worst_below, tolerance)
