"""Finite probability machinery for two-stage decision analysis.

States are a finite, strictly increasing list of reals.  Signals are finite
and described jointly with the state, so posteriors are exact Bayes ratios
and every expectation is a finite sum.  Coarsening a signal (merging signal
atoms through a deterministic index map) produces a weakly less informative
signal; ``blackwell_sample_test`` checks the defining inequality
``E[phi(posterior)]`` under the fine signal >= under the coarse one for
randomly sampled convex ``phi``.

All values are immutable after construction and every operation is a pure
function, so concurrent evaluation needs no locking.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, PriorMismatch, ZeroMarginal

#: tolerance for probability normalization checks
NORMALIZATION_TOL = 1e-9
#: tolerance for exact structural identities (marginalization, averaging)
STRUCTURAL_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dist:
    """A point of the probability simplex: one weight per state."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        p = self.probs
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < 0):
            raise ValueError(f"negative probability at index {int(np.argmin(p))}")
        if abs(float(p.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {float(p.sum())!r}, not 1")

    @property
    def m(self) -> int:
        return self.probs.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Dist) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True)
class StateSpace:
    """The realizations the uncertain quantity can take, strictly increasing."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        v = self.values
        if v.ndim != 1 or v.size < 1:
            raise ValueError("state values must be a nonempty vector")
        if np.any(np.diff(v) <= 0):
            raise ValueError("state values must be strictly increasing")

    @property
    def m(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        return isinstance(other, StateSpace) and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class JointSignalModel:
    """Joint distribution of (signal, state); row j is P(Y=y_j, X=.)."""

    joint: np.ndarray
    states: StateSpace

    def __post_init__(self):
        object.__setattr__(self, "joint", _frozen(self.joint))
        j = self.joint
        if j.ndim != 2:
            raise ValueError("joint must be a 2-d matrix (signals x states)")
        if j.shape[1] != self.states.m:
            raise ValueError(
                f"joint has {j.shape[1]} state columns but the state space has {self.states.m}"
            )
        rows, cols = np.where(j < 0)
        if rows.size:
            raise ValueError(f"negative joint entry at row {int(rows[0])}, column {int(cols[0])}")
        if abs(float(j.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"joint entries sum to {float(j.sum())!r}, not 1")

    @property
    def n(self) -> int:
        """Number of signal atoms (including zero-probability rows)."""
        return self.joint.shape[0]

    @property
    def marginals(self) -> np.ndarray:
        """Signal marginal nu_j = sum_i joint[j, i]."""
        return self.joint.sum(axis=1)


@dataclass(frozen=True)
class Garbling:
    """A deterministic coarsening: fine signal index -> coarse signal index.

    Indices are 0-based.  ``n_coarse`` defaults to ``max(map)+1``.
    """

    map: tuple[int, ...]
    n_coarse: int = 0

    def __post_init__(self):
        object.__setattr__(self, "map", tuple(int(x) for x in self.map))
        if not self.map:
            raise ValueError("garbling map must cover at least one signal")
        n_coarse = self.n_coarse or max(self.map) + 1
        object.__setattr__(self, "n_coarse", n_coarse)
        for j, target in enumerate(self.map):
            if not 0 <= target < n_coarse:
                raise ValueError(f"garbling maps signal {j} to {target}, outside 0..{n_coarse - 1}")

    @property
    def n_fine(self) -> int:
        return len(self.map)


@dataclass(frozen=True)
class TestReport:
    """Outcome of a sampled informativeness test.

    ``min_gap`` is the most adverse observed value of
    E_fine[phi(posterior)] - E_coarse[phi(posterior)]; ``witness`` holds the
    affine-piece coefficient matrix of the worst phi when the test fails.
    """

    passed: bool
    trials: int
    min_gap: float
    witness: np.ndarray | None = None
    tolerance: float = NORMALIZATION_TOL

    def as_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "trials": self.trials,
            "min_gap": self.min_gap,
            "tolerance": self.tolerance,
        }
        if self.witness is not None:
            out["witness_pieces"] = np.asarray(self.witness).tolist()
        return out


def posterior(model: JointSignalModel, j: int) -> Dist:
    """Bayes posterior over states given signal ``j``.

    Raises ZeroMarginal for a signal of probability zero: such signals carry
    no posterior and are skipped by every expectation in this package.
    """
    nu = model.marginals
    if not 0 <= j < model.n:
        raise IndexError(f"signal index {j} outside 0..{model.n - 1}")
    if nu[j] <= 0.0:
        raise ZeroMarginal(f"signal {j} has zero probability")
    return Dist(model.joint[j] / nu[j])


def prior_of(model: JointSignalModel) -> Dist:
    """Marginal distribution of the state (column sums of the joint)."""
    return Dist(model.joint.sum(axis=0))


def garble(model: JointSignalModel, g: Garbling) -> JointSignalModel:
    """Merge signal atoms according to ``g``; the prior is unchanged.

    Row j' of the result is the sum of all fine rows mapped to j'.
    """
    if g.n_fine != model.n:
        raise DimensionMismatch(f"garbling covers {g.n_fine} signals, model has {model.n}")
    coarse = np.zeros((g.n_coarse, model.states.m))
    for j, target in enumerate(g.map):
        coarse[target] += model.joint[j]
    return JointSignalModel(coarse, model.states)


def no_info(model: JointSignalModel) -> JointSignalModel:
    """The uninformative signal: a single atom whose posterior is the prior."""
    return JointSignalModel(prior_of(model).probs[None, :], model.states)


def full_info(prior: Dist, states: StateSpace) -> JointSignalModel:
    """The perfectly informative signal: one atom per state, Y = X."""
    if prior.m != states.m:
        raise DimensionMismatch(f"prior has {prior.m} entries, state space has {states.m}")
    return JointSignalModel(np.diag(prior.probs), states)


def _check_same_prior(model_a: JointSignalModel, model_b: JointSignalModel) -> None:
    if model_a.states != model_b.states:
        raise PriorMismatch("signal models are defined over different state spaces")
    pa, pb = prior_of(model_a).probs, prior_of(model_b).probs
    gap = float(np.max(np.abs(pa - pb)))
    if gap > NORMALIZATION_TOL:
        raise PriorMismatch(f"priors differ by {gap!r}")


def posterior_expectation(model: JointSignalModel, phi: Callable[[np.ndarray], float]) -> float:
    """E over signals of phi(posterior), skipping zero-probability atoms."""
    nu = model.marginals
    total = 0.0
    for j in np.flatnonzero(nu > 0.0):
        total += nu[j] * float(phi(model.joint[j] / nu[j]))
    return total


def informativeness_gap(
    model_fine: JointSignalModel, model_coarse: JointSignalModel, pieces: np.ndarray
) -> float:
    """E_fine[phi(posterior)] - E_coarse[phi(posterior)] for one piecewise phi.

    ``pieces`` is a (k, m) matrix; phi(rho) = max_k <pieces[k], rho>.  Any
    affine functional on the simplex can be written this way because constant
    offsets fold into the coefficients (the weights sum to one).
    """
    pieces = np.asarray(pieces, dtype=float)
    if pieces.ndim != 2 or pieces.shape[1] != model_fine.states.m:
        raise DimensionMismatch("pieces must be a (k, m) coefficient matrix")
    _check_same_prior(model_fine, model_coarse)

    def phi(rho: np.ndarray) -> float:
        return float(np.max(pieces @ rho))

    return posterior_expectation(model_fine, phi) - posterior_expectation(model_coarse, phi)


def blackwell_sample_test(
    model_fine: JointSignalModel,
    model_coarse: JointSignalModel,
    trials: int,
    pieces: int,
    seed: int,
    tolerance: float = NORMALIZATION_TOL,
) -> TestReport:
    """Sampled check that ``model_fine`` is at least as informative as ``model_coarse``.

    Draws ``trials`` random convex functions on the simplex, each the
    pointwise maximum of ``pieces`` affine functionals with coefficients
    uniform on [-1, 1], and checks the expectation inequality up to
    ``tolerance``.  Every convex function on the simplex is a supremum of
    affine functionals, so maxima of random pieces probe the full cone.

    Seeding is split per trial, so results do not depend on evaluation order.
    """
    if trials < 1 or pieces < 1:
        raise ValueError("trials and pieces must be >= 1")
    _check_same_prior(model_fine, model_coarse)
    m = model_fine.states.m
    children = np.random.SeedSequence(seed).spawn(trials)
    min_gap = np.inf
    witness = None
    for child in children:
        rng = np.random.default_rng(child)
        coeffs = rng.uniform(-1.0, 1.0, size=(pieces, m))
        gap = informativeness_gap(model_fine, model_coarse, coeffs)
        if gap < min_gap:
            min_gap = gap
            if gap < -tolerance:
                witness = coeffs
    return TestReport(
        passed=min_gap >= -tolerance,
        trials=trials,
        min_gap=float(min_gap),
        witness=witness,
        tolerance=tolerance,
    )


def load_joint_model(source: str | Path | dict) -> JointSignalModel:
    """Build a JointSignalModel from a JSON document or parsed dict.

    Expected shape: {"states": [x1, ..., xm], "joint": [[...], ...]} with one
    row per signal.  Validation errors name the offending row and column.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = source
    if not isinstance(doc, dict) or "states" not in doc or "joint" not in doc:
        raise ValueError('joint model document must have "states" and "joint" keys')
    states = StateSpace(np.asarray(doc["states"], dtype=float))
    rows = doc["joint"]
    if not isinstance(rows, list) or not rows:
        raise ValueError('"joint" must be a nonempty list of rows')
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"joint row {r} has {len(row)} entries, expected {width}")
        for c, entry in enumerate(row):
            if not isinstance(entry, (int, float)) or entry < 0:
                raise ValueError(f"joint row {r} column {c}: invalid entry {entry!r}")
    return JointSignalModel(np.asarray(rows, dtype=float), states)


def dump_joint_model(model: JointSignalModel) -> dict:
    return {"states": model.states.values.tolist(), "joint": model.joint.tolist()}


def sample_simplex(m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform (Dirichlet(1,...,1)) samples from the m-state simplex, (count, m)."""
    g = rng.exponential(scale=1.0, size=(count, m))
    return g / g.sum(axis=1, keepdims=True)
