"""The decision layer: two-stage models, second-stage values, and the
precautionary comparison of first-stage optimizers under two signals.

The second-stage value — the maximal expected payoff given the first
decision and a belief — is computed exactly by enumeration when the
feasible set is a finite menu, and by a grid scan followed by coordinatewise
golden-section refinement when it is a box.  The value of a signal is the
signal-marginal average of that value over Bayes posteriors, so the value of
information as a function of the first decision can be scanned for
monotonicity: a non-increasing scan predicts that the better-informed
agent's optimal first decision is no larger.

Optimizer sets are never assumed to be singletons: OptResult carries every
candidate within ``value_tol`` of the best, and rankings compare suprema of
these sets.  Tie-breaking is deterministic (leftmost first), so repeated
runs agree exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasibleFirstDecision,
    PriorMismatch,
    StateMismatch,
)
from .prob import JointSignalModel, StateSpace, prior_of
from .support_geometry import PayoffSet, support_value

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class FiniteFeasible:
    """An explicit finite menu of second decisions, one row per decision."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("a feasible menu must contain at least one decision")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class BoxFeasible:
    """A per-coordinate interval box of second decisions.

    ``eval_margin`` shrinks the box for evaluation only, keeping payoff
    functions with open domains (logs, negative powers) strictly interior
    while the declared feasible set stays exact.
    """

    lows: np.ndarray
    highs: np.ndarray
    eval_margin: float = 0.0

    def __post_init__(self):
        lows = np.atleast_1d(np.asarray(self.lows, dtype=float))
        highs = np.atleast_1d(np.asarray(self.highs, dtype=float))
        if lows.shape != highs.shape:
            raise ValueError("box bounds must have matching shapes")
        if np.any(highs < lows):
            raise ValueError("box has high < low")
        lows = lows.copy()
        highs = highs.copy()
        lows.setflags(write=False)
        highs.setflags(write=False)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    @property
    def n(self) -> int:
        return self.lows.size

    def eval_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lows + self.eval_margin
        hi = self.highs - self.eval_margin
        mid = (self.lows + self.highs) / 2.0
        return np.minimum(lo, mid), np.maximum(hi, mid)


FeasibleSet = FiniteFeasible | BoxFeasible


@dataclass(frozen=True)
class DecisionModel:
    """A two-stage utility model.

    ``utility(a, b, x)`` takes a scalar first decision, a second decision of
    shape (..., n), and states broadcastable against the leading shape of
    ``b``; when ``vectorized`` is False it is called pointwise instead.
    ``inner_unimodal`` declares per-coordinate unimodality of expected
    utility in the second decision; golden-section refinement is applied
    only when it is set, otherwise box values stay at the grid bound.
    """

    utility: Callable[..., np.ndarray]
    first_interval: tuple[float, float]
    second_feasible: Callable[[float], FeasibleSet]
    b_dim: int
    states: StateSpace
    vectorized: bool = True
    inner_unimodal: bool = True

    def __post_init__(self):
        lo, hi = self.first_interval
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueError(f"invalid first-decision interval [{lo}, {hi}]")

    def contains_first(self, a: float, tol: float = 1e-12) -> bool:
        lo, hi = self.first_interval
        return lo - tol <= a <= hi + tol


@dataclass(frozen=True)
class SolverConfig:
    """Grid sizes and tolerances for the nested maximization."""

    a_grid: int = 81
    b_grid: int = 65
    refine_iters: int = 60
    value_tol: float = 1e-9
    arg_tol: float | None = None

    def __post_init__(self):
        if self.a_grid < 2 or self.b_grid < 2:
            raise ValueError("grids must have at least 2 points")
        if self.value_tol <= 0 or (self.arg_tol is not None and self.arg_tol <= 0):
            raise ValueError("tolerances must be positive")

    def arg_tolerance(self, interval: tuple[float, float]) -> float:
        if self.arg_tol is not None:
            return self.arg_tol
        lo, hi = interval
        return (hi - lo) / (self.a_grid - 1) if hi > lo else 1e-12


@dataclass(frozen=True)
class OptResult:
    """All first decisions within ``value_tol`` of the best value found.

    ``inner_grid_only`` flags values computed without inner refinement
    because the model declined to declare per-coordinate unimodality; such
    values are grid lower bounds, not refined maxima.
    """

    maximizers: tuple[float, ...]
    value: float
    refined: bool = True
    inner_grid_only: bool = False

    def __post_init__(self):
        if not self.maximizers:
            raise ValueError("an optimization result needs at least one maximizer")
        object.__setattr__(self, "maximizers", tuple(sorted(set(self.maximizers))))

    @property
    def sup(self) -> float:
        return self.maximizers[-1]

    @property
    def inf(self) -> float:
        return self.maximizers[0]

    def as_dict(self) -> dict:
        return {
            "maximizers": list(self.maximizers),
            "value": self.value,
            "refined": self.refined,
            "inner_grid_only": self.inner_grid_only,
        }


@dataclass(frozen=True)
class MonotonicityVerdict:
    """Direction of a sequence over the first-decision grid.

    ``kind`` is NonIncreasing, NonDecreasing, Constant, or NonMonotone.
    ``strict`` is set when every step moves in the monotone direction by
    more than the tolerance.  NonMonotone carries one index pair violating
    each direction.
    """

    kind: str
    strict: bool = False
    rise_witness: tuple[int, int] | None = None
    fall_witness: tuple[int, int] | None = None
    tolerance: float = 1e-9

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strict": self.strict,
            "rise_witness": list(self.rise_witness) if self.rise_witness else None,
            "fall_witness": list(self.fall_witness) if self.fall_witness else None,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class PrecautionReport:
    """Optimizers under two signals and the value-of-information scan.

    ``ranking_holds`` is the sup-argmax comparison: the better-informed
    optimizer set tops out no higher than the coarser one, up to the
    argument tolerance.  ``consistent`` is set when the scan verdict makes a
    prediction (NonIncreasing or Constant) and records whether the ranking
    agreed with it; it is None when the scan predicts nothing.
    """

    a_star_fine: OptResult
    a_star_coarse: OptResult
    delta_scan: MonotonicityVerdict
    ranking_holds: bool
    arg_tol: float
    a_values: np.ndarray
    value_fine: np.ndarray
    value_coarse: np.ndarray
    consistent: bool | None = None

    def as_dict(self) -> dict:
        return {
            "a_star_fine": self.a_star_fine.as_dict(),
            "a_star_coarse": self.a_star_coarse.as_dict(),
            "delta_scan": self.delta_scan.as_dict(),
            "ranking_holds": self.ranking_holds,
            "arg_tol": self.arg_tol,
            "consistent": self.consistent,
        }

    def grid_rows(self) -> list[tuple[float, float, float, float]]:
        """Rows (a, V_fine, V_coarse, delta) over the scan grid."""
        delta = self.value_fine - self.value_coarse
        return [
            (float(a), float(vf), float(vc), float(d))
            for a, vf, vc, d in zip(self.a_values, self.value_fine, self.value_coarse, delta)
        ]


def _eval_utility(model: DecisionModel, a: float, b_points: np.ndarray) -> np.ndarray:
    """Utility matrix of shape (len(b_points), m) at first decision ``a``."""
    xs = model.states.values
    if model.vectorized:
        return np.asarray(model.utility(a, b_points[:, None, :], xs[None, :]), dtype=float)
    out = np.empty((len(b_points), xs.size))
    for i, b in enumerate(b_points):
        for k, x in enumerate(xs):
            out[i, k] = float(model.utility(a, b, float(x)))
    return out


def _box_grid(box: BoxFeasible, per_coord: int) -> np.ndarray:
    lo, hi = box.eval_bounds()
    axes = [np.linspace(lo[i], hi[i], per_coord) for i in range(box.n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _golden_max(f: Callable[[float], float], lo: float, hi: float, iters: int) -> tuple[float, float]:
    """Golden-section maximization on [lo, hi]; returns the best probed point."""
    if hi <= lo:
        return lo, f(lo)
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_v = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        if fc >= fd and fc > best_v:
            best_x, best_v = c, fc
        elif fd > fc and fd > best_v:
            best_x, best_v = d, fd
    return best_x, best_v


def payoff_set(model: DecisionModel, a: float, cfg: SolverConfig) -> PayoffSet:
    """Payoff vectors attainable at first decision ``a``: one per menu item,
    or one per grid point for box feasible sets."""
    if not model.contains_first(a):
        raise InfeasibleFirstDecision(f"a={a} outside {model.first_interval}")
    feas = model.second_feasible(a)
    pts = feas.points if isinstance(feas, FiniteFeasible) else _box_grid(feas, cfg.b_grid)
    return PayoffSet(_eval_utility(model, a, pts))


def _check_belief(model: DecisionModel, rho) -> np.ndarray:
    weights = np.asarray(getattr(rho, "probs", rho), dtype=float)
    if weights.shape != (model.states.m,):
        raise DimensionMismatch(
            f"belief has shape {weights.shape}, model has {model.states.m} states"
        )
    return weights


def second_stage_value(model: DecisionModel, a: float, rho, cfg: SolverConfig) -> float:
    """Maximal expected second-stage payoff at first decision ``a`` under
    belief ``rho``.

    Exact enumeration for finite menus.  For boxes: a per-coordinate grid
    scan, then rounds of coordinatewise golden-section refinement around
    the incumbent (``refine_iters`` iterations per coordinate, repeated
    until the value converges for coupled coordinates), provided the model
    declares inner unimodality.  The result never falls below the value at
    any probed decision.
    """
    if not model.contains_first(a):
        raise InfeasibleFirstDecision(f"a={a} outside {model.first_interval}")
    weights = _check_belief(model, rho)
    feas = model.second_feasible(a)

    if isinstance(feas, FiniteFeasible):
        # shares the support-value code path so the menu value equals
        # support_value(payoff_set(a), rho) bit-for-bit
        return support_value(PayoffSet(_eval_utility(model, a, feas.points)), weights)

    grid = _box_grid(feas, cfg.b_grid)
    values = _eval_utility(model, a, grid) @ weights
    best_idx = int(np.argmax(values))
    best_b = grid[best_idx].copy()
    best_v = float(values[best_idx])
    if not model.inner_unimodal or cfg.refine_iters <= 0:
        return best_v

    lo, hi = feas.eval_bounds()
    step = (hi - lo) / (cfg.b_grid - 1)
    xs = model.states.values

    def value_at(b: np.ndarray) -> float:
        if model.vectorized:
            u = np.asarray(model.utility(a, b[None, None, :], xs[None, :]), dtype=float)
            return float(u[0] @ weights)
        return float(sum(w * model.utility(a, b, float(x)) for w, x in zip(weights, xs)))

    # one golden pass solves a 1-d box; coupled coordinates iterate until the
    # value stops improving (declared unimodality justifies the descent)
    max_passes = 1 if feas.n == 1 else 60
    for _ in range(max_passes):
        before = best_v
        for coord in range(feas.n):
            c_lo = max(lo[coord], best_b[coord] - step[coord])
            c_hi = min(hi[coord], best_b[coord] + step[coord])

            def line(t: float, coord=coord) -> float:
                probe = best_b.copy()
                probe[coord] = t
                return value_at(probe)

            x_ref, v_ref = _golden_max(line, c_lo, c_hi, cfg.refine_iters)
            if v_ref > best_v:
                best_v = v_ref
                best_b[coord] = x_ref
        if best_v - before <= 1e-13 * max(1.0, abs(best_v)):
            break
    return best_v


def signal_value(model: DecisionModel, a: float, sig: JointSignalModel, cfg: SolverConfig) -> float:
    """Expected second-stage value after observing the signal: the
    marginal-weighted average of the second-stage value over Bayes
    posteriors, skipping zero-probability signal atoms."""
    if sig.states != model.states:
        raise StateMismatch("signal and model use different state spaces")
    if not model.contains_first(a):
        raise InfeasibleFirstDecision(f"a={a} outside {model.first_interval}")
    nu = sig.marginals
    total = 0.0
    for j in np.flatnonzero(nu > 0.0):
        total += float(nu[j]) * second_stage_value(model, a, sig.joint[j] / nu[j], cfg)
    return total


def delta_value(
    model: DecisionModel,
    a: float,
    sig_fine: JointSignalModel,
    sig_coarse: JointSignalModel,
    cfg: SolverConfig,
) -> float:
    """Second-period value of information: fine-signal value minus coarse."""
    _require_same_prior(sig_fine, sig_coarse)
    return signal_value(model, a, sig_fine, cfg) - signal_value(model, a, sig_coarse, cfg)


def _require_same_prior(sig_a: JointSignalModel, sig_b: JointSignalModel) -> None:
    if sig_a.states != sig_b.states:
        raise PriorMismatch("signals are defined over different state spaces")
    gap = float(np.max(np.abs(prior_of(sig_a).probs - prior_of(sig_b).probs)))
    if gap > 1e-9:
        raise PriorMismatch(f"signal priors differ by {gap!r}")


def _first_grid(model: DecisionModel, cfg: SolverConfig) -> np.ndarray:
    lo, hi = model.first_interval
    return np.linspace(lo, hi, cfg.a_grid)


def optimize_first(
    model: DecisionModel,
    sig: JointSignalModel,
    cfg: SolverConfig,
    _grid_values: tuple[np.ndarray, np.ndarray] | None = None,
) -> OptResult:
    """Maximize the signal value over the first-decision interval.

    Scans the grid, then polishes around the (leftmost) incumbent with
    golden section restricted to one grid step on each side.  Returns every
    probed decision within ``value_tol`` of the best value.
    """
    if _grid_values is None:
        a_vals = _first_grid(model, cfg)
        v_vals = np.array([signal_value(model, float(a), sig, cfg) for a in a_vals])
    else:
        a_vals, v_vals = _grid_values

    lo, hi = model.first_interval
    best_idx = int(np.argmax(v_vals))
    candidates = list(zip(a_vals.tolist(), v_vals.tolist()))

    refined = False
    if cfg.refine_iters > 0 and hi > lo:
        step = (hi - lo) / (cfg.a_grid - 1)
        b_lo = max(lo, a_vals[best_idx] - step)
        b_hi = min(hi, a_vals[best_idx] + step)
        a_ref, v_ref = _golden_max(
            lambda a: signal_value(model, float(a), sig, cfg), b_lo, b_hi, cfg.refine_iters
        )
        candidates.append((float(a_ref), float(v_ref)))
        refined = True

    best_value = max(v for _, v in candidates)
    maximizers = tuple(a for a, v in candidates if v >= best_value - cfg.value_tol)
    grid_only = not model.inner_unimodal and any(
        isinstance(model.second_feasible(float(a)), BoxFeasible) for a in (lo, hi)
    )
    return OptResult(
        maximizers=maximizers, value=best_value, refined=refined, inner_grid_only=grid_only
    )


def monotonicity_scan(values: Sequence[float], tol: float = 1e-9) -> MonotonicityVerdict:
    """Classify a sequence as NonIncreasing / NonDecreasing / Constant /
    NonMonotone over its index grid.

    Constant means total variation at most ``tol``.  ``strict`` marks every
    step exceeding ``tol`` in the monotone direction.  A NonMonotone verdict
    carries one index pair rising and one falling beyond the tolerance.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        raise ValueError("monotonicity needs at least 2 points")
    diffs = np.diff(vals)
    if float(np.sum(np.abs(diffs))) <= tol:
        return MonotonicityVerdict("Constant", strict=False, tolerance=tol)
    rises = np.flatnonzero(diffs > tol)
    falls = np.flatnonzero(diffs < -tol)
    if rises.size and falls.size:
        i, j = int(rises[0]), int(falls[0])
        return MonotonicityVerdict(
            "NonMonotone",
            rise_witness=(i, i + 1),
            fall_witness=(j, j + 1),
            tolerance=tol,
        )
    if falls.size:
        return MonotonicityVerdict("NonIncreasing", strict=bool(np.all(diffs < -tol)), tolerance=tol)
    return MonotonicityVerdict("NonDecreasing", strict=bool(np.all(diffs > tol)), tolerance=tol)


def precautionary_compare(
    model: DecisionModel,
    sig_fine: JointSignalModel,
    sig_coarse: JointSignalModel,
    cfg: SolverConfig,
) -> PrecautionReport:
    """Compare optimal first decisions under a finer and a coarser signal.

    Computes both optimizer sets, the value-of-information curve over the
    shared first-decision grid, its monotonicity verdict, and whether the
    sup-argmax ranking (fine at most coarse, up to ``arg_tol``) holds.  The
    caller asserts the informativeness ordering, e.g. by building the coarse
    signal with ``garble``.
    """
    _require_same_prior(sig_fine, sig_coarse)
    a_vals = _first_grid(model, cfg)
    v_fine = np.array([signal_value(model, float(a), sig_fine, cfg) for a in a_vals])
    v_coarse = np.array([signal_value(model, float(a), sig_coarse, cfg) for a in a_vals])

    opt_fine = optimize_first(model, sig_fine, cfg, _grid_values=(a_vals, v_fine))
    opt_coarse = optimize_first(model, sig_coarse, cfg, _grid_values=(a_vals, v_coarse))

    scan = monotonicity_scan(v_fine - v_coarse, tol=cfg.value_tol)
    arg_tol = cfg.arg_tolerance(model.first_interval)
    ranking_holds = opt_fine.sup <= opt_coarse.sup + arg_tol
    consistent = None
    if scan.kind in ("NonIncreasing", "Constant"):
        consistent = ranking_holds
    return PrecautionReport(
        a_star_fine=opt_fine,
        a_star_coarse=opt_coarse,
        delta_scan=scan,
        ranking_holds=ranking_holds,
        arg_tol=arg_tol,
        a_values=a_vals,
        value_fine=v_fine,
        value_coarse=v_coarse,
        consistent=consistent,
    )
