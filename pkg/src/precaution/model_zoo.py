"""Literature model families and their first-order certificates.

Five two-stage utility shapes are provided behind a single FamilySpec:

* additive: U = u(a) + s*a*x + v(b - k*x), separable between stages;
* risk_neutral: U = u(a,b) + sum_i v_i(a,b) * x^i, linear in state features;
* consumption_savings: U = u1(w-a) + beta*u2(r*a-b) + beta^2*u3(b*x) with the
  resource constraint B(a) = [0, r*a] coupling the stages;
* global_warming: U = u(a) + v(b - x*(a+b)) with the shifted-isoelastic v;
* cake_eating: U = u(a) + v(b) + w(x - a - b).

Component functions come from a closed catalog (power, isoelastic, exponential,
quadratic, log), so every derivative used by the certificates is an exact
closed form; finite differences appear only in tests.

A first-order certificate for a pair of first decisions a1 > a0 and a probed
second decision b1 is a matrix M and a decision b0 solving

    M dU/db(a1, b1, x) - dU/db(a0, b0, x) = 0   for every state x,

together with a numeric classification of b0 as a simultaneous minimizer or
maximizer of b -> U(a1, b1 + M^T (b-b0), x) - U(a0, b, x) across states
(that direction decides whether the value-of-information gap is convex or
concave in the belief), and a neighborhood containment check that only
matters when the probed decision sits on the feasible boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .decision_core import BoxFeasible, DecisionModel, FiniteFeasible
from .errors import DomainViolation, NoCertificate
from .prob import StateSpace

#: residual tolerance for a passing first-order certificate
FOC_RESIDUAL_TOL = 1e-8
#: margin for strictly interior evaluation of open-domain payoff functions
INTERIOR_MARGIN = 1e-6

FAMILIES = ("additive", "risk_neutral", "consumption_savings", "global_warming", "cake_eating")


# ---------------------------------------------------------------------------
# function catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Power:
    """y -> y^theta on y > 0, concave for theta in (0, 1]."""

    theta: float

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise DomainViolation(f"power exponent theta={self.theta} must be in (0, 1]")

    def value(self, y):
        return np.asarray(y, dtype=float) ** self.theta

    def deriv(self, y):
        return self.theta * np.asarray(y, dtype=float) ** (self.theta - 1.0)

    needs_positive = True

    def as_dict(self):
        return {"kind": "power", "theta": self.theta}


@dataclass(frozen=True)
class Crra:
    """Isoelastic y -> y^(1-gamma)/(1-gamma) on y > 0 (gamma > 0, gamma != 1)."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0 or self.gamma == 1.0:
            raise DomainViolation(f"isoelastic gamma={self.gamma} must be positive and != 1")

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return y ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def deriv(self, y):
        return np.asarray(y, dtype=float) ** (-self.gamma)

    needs_positive = True

    def as_dict(self):
        return {"kind": "crra", "gamma": self.gamma}


@dataclass(frozen=True)
class Exp:
    """y -> -exp(-eta*y), defined everywhere, concave for eta > 0."""

    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise DomainViolation(f"exponential eta={self.eta} must be > 0")

    def value(self, y):
        return -np.exp(-self.eta * np.asarray(y, dtype=float))

    def deriv(self, y):
        return self.eta * np.exp(-self.eta * np.asarray(y, dtype=float))

    needs_positive = False

    def as_dict(self):
        return {"kind": "exp", "eta": self.eta}


@dataclass(frozen=True)
class Quadratic:
    """y -> -(y - center)^2."""

    center: float = 0.0

    def value(self, y):
        return -((np.asarray(y, dtype=float) - self.center) ** 2)

    def deriv(self, y):
        return -2.0 * (np.asarray(y, dtype=float) - self.center)

    needs_positive = False

    def as_dict(self):
        return {"kind": "quadratic", "center": self.center}


@dataclass(frozen=True)
class LogFn:
    """y -> ln(y) on y > 0."""

    def value(self, y):
        return np.log(np.asarray(y, dtype=float))

    def deriv(self, y):
        return 1.0 / np.asarray(y, dtype=float)

    needs_positive = True

    def as_dict(self):
        return {"kind": "log"}


@dataclass(frozen=True)
class ShiftedIsoelastic:
    """The shifted-isoelastic benefit y -> gamma/(1-gamma) * (eta + y/gamma)^(1-gamma).

    Its derivative (eta + y/gamma)^(-gamma) satisfies the exact scaling
    relation deriv(alpha*y + gamma*eta*(alpha-1)) = alpha^(-gamma) * deriv(y),
    which is what makes the emissions family certifiable.
    """

    gamma: float
    eta: float

    def __post_init__(self):
        if self.gamma <= 0 or self.gamma == 1.0:
            raise DomainViolation(f"gamma={self.gamma} must be positive and != 1")
        if self.eta <= 0:
            raise DomainViolation(f"eta={self.eta} must be > 0")

    def value(self, y):
        base = self.eta + np.asarray(y, dtype=float) / self.gamma
        return self.gamma / (1.0 - self.gamma) * base ** (1.0 - self.gamma)

    def deriv(self, y):
        base = self.eta + np.asarray(y, dtype=float) / self.gamma
        return base ** (-self.gamma)

    needs_positive = False  # domain is y > -gamma*eta, validated separately

    def domain_low(self) -> float:
        return -self.gamma * self.eta


CatalogFn = Power | Crra | Exp | Quadratic | LogFn

_CATALOG = {"power": Power, "crra": Crra, "exp": Exp, "quadratic": Quadratic, "log": LogFn}


def catalog_from_dict(doc: dict) -> CatalogFn:
    kind = doc.get("kind")
    if kind not in _CATALOG:
        raise DomainViolation(f"unknown catalog function kind {kind!r}")
    args = {k: v for k, v in doc.items() if k != "kind"}
    return _CATALOG[kind](**args)


# ---------------------------------------------------------------------------
# family specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """A named family plus its parameters and catalog components."""

    family: str
    params: dict
    functions: dict[str, CatalogFn] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainViolation(f"unknown family {self.family!r}; expected one of {FAMILIES}")

    @staticmethod
    def from_dict(doc: dict) -> "FamilySpec":
        funcs = {name: catalog_from_dict(fn) for name, fn in doc.get("functions", {}).items()}
        return FamilySpec(doc["family"], dict(doc.get("params", {})), funcs)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "params": {
                k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()
            },
            "functions": {name: fn.as_dict() for name, fn in self.functions.items()},
        }

    def states(self) -> StateSpace:
        if "states" not in self.params:
            raise DomainViolation("params must list the state values under 'states'")
        return StateSpace(np.asarray(self.params["states"], dtype=float))

    def first_interval(self) -> tuple[float, float]:
        try:
            lo, hi = float(self.params["a_lo"]), float(self.params["a_hi"])
        except KeyError as exc:
            raise DomainViolation(f"missing first-interval parameter {exc}") from exc
        if not lo <= hi:
            raise DomainViolation(f"a_lo={lo} exceeds a_hi={hi}")
        return lo, hi


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainViolation(message)


def _fn(spec: FamilySpec, name: str) -> CatalogFn:
    if name not in spec.functions:
        raise DomainViolation(f"family {spec.family!r} needs a component function {name!r}")
    return spec.functions[name]


def _check_domain(fn, values: np.ndarray, label: str, margin: float = INTERIOR_MARGIN) -> None:
    low = fn.domain_low() if hasattr(fn, "domain_low") else (0.0 if fn.needs_positive else -np.inf)
    if low > -np.inf and float(np.min(values)) < low + margin:
        raise DomainViolation(
            f"{label}: argument reaches {float(np.min(values))!r}, below the open domain bound {low}"
        )


def _benefit(spec: FamilySpec) -> ShiftedIsoelastic:
    return ShiftedIsoelastic(float(spec.params["gamma"]), float(spec.params["eta"]))


def _scalar_feasible(spec: FamilySpec, margin: float = 0.0) -> Callable[[float], FiniteFeasible | BoxFeasible]:
    p = spec.params
    if "b_points" in p:
        pts = np.asarray(p["b_points"], dtype=float).reshape(-1, 1)
        feas = FiniteFeasible(pts)
        return lambda a: feas
    try:
        box = BoxFeasible(
            np.atleast_1d(np.asarray(p["b_lo"], dtype=float)),
            np.atleast_1d(np.asarray(p["b_hi"], dtype=float)),
            eval_margin=margin,
        )
    except KeyError as exc:
        raise DomainViolation(f"missing feasible-set parameter {exc}") from exc
    return lambda a: box


def _feasible_corners(spec: FamilySpec) -> np.ndarray:
    p = spec.params
    if "b_points" in p:
        return np.asarray(p["b_points"], dtype=float).reshape(-1)
    return np.asarray([p["b_lo"], p["b_hi"]], dtype=float).reshape(-1)


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------


def build_model(spec: FamilySpec) -> DecisionModel:
    """Instantiate the family as a DecisionModel with a vectorized utility.

    Parameters are validated against each family's domain guards; violations
    raise DomainViolation naming the offending parameter.  Only the
    consumption-savings family couples the second-stage feasible set to the
    first decision.
    """
    builder = {
        "additive": _build_additive,
        "risk_neutral": _build_risk_neutral,
        "consumption_savings": _build_consumption_savings,
        "global_warming": _build_global_warming,
        "cake_eating": _build_cake_eating,
    }[spec.family]
    return builder(spec)


def _build_additive(spec: FamilySpec) -> DecisionModel:
    states = spec.states()
    lo, hi = spec.first_interval()
    u, v = _fn(spec, "u"), _fn(spec, "v")
    slope_x = float(spec.params.get("slope_x", 0.0))
    track = float(spec.params.get("track", 1.0))
    _check_domain(u, np.asarray([lo, hi]), "u(a) over the first interval")
    corners = _feasible_corners(spec)
    args = corners[:, None] - track * states.values[None, :]
    _check_domain(v, args, "v(b - track*x) over feasible corners")

    def utility(a, b, x):
        b0 = np.asarray(b, dtype=float)[..., 0]
        return u.value(a) + slope_x * a * np.asarray(x, dtype=float) + v.value(b0 - track * np.asarray(x))

    margin = INTERIOR_MARGIN if v.needs_positive else 0.0
    return DecisionModel(
        utility=utility,
        first_interval=(lo, hi),
        second_feasible=_scalar_feasible(spec, margin),
        b_dim=1,
        states=states,
    )


def _risk_neutral_arrays(spec: FamilySpec):
    p = spec.params
    n, pdim = int(p["n"]), int(p["p"])
    _require(n >= 1 and pdim >= 0, "risk_neutral needs n >= 1 and p >= 0")
    g_u = np.asarray(p["G_u"], dtype=float).reshape(n)
    h_u = np.asarray(p["h_u"], dtype=float).reshape(n)
    q_u = np.asarray(p["Q_u"], dtype=float).reshape(n, n)
    _require(np.allclose(q_u, q_u.T, atol=1e-12), "Q_u must be symmetric")
    _require(float(np.min(np.linalg.eigvalsh(q_u))) >= -1e-10, "Q_u must be positive semidefinite")
    g = np.asarray(p["G"], dtype=float).reshape(pdim, n) if pdim else np.zeros((0, n))
    h = np.asarray(p["h"], dtype=float).reshape(pdim, n) if pdim else np.zeros((0, n))
    w = np.asarray(p["w"], dtype=float).reshape(pdim) if pdim else np.zeros(0)
    return n, pdim, g_u, h_u, q_u, g, h, w


def _build_risk_neutral(spec: FamilySpec) -> DecisionModel:
    states = spec.states()
    lo, hi = spec.first_interval()
    n, pdim, g_u, h_u, q_u, g, h, w = _risk_neutral_arrays(spec)
    fu = spec.functions.get("u")
    if fu is not None:
        _check_domain(fu, np.asarray([lo, hi]), "u(a) over the first interval")

    def utility(a, b, x):
        b = np.asarray(b, dtype=float)
        x = np.asarray(x, dtype=float)
        base = b @ (g_u * a + h_u) - 0.5 * np.einsum("...i,ij,...j->...", b, q_u, b)
        if fu is not None:
            base = base + fu.value(a)
        total = base * np.ones_like(x * base)
        for i in range(pdim):
            total = total + (w[i] * a + b @ (g[i] * a + h[i])) * x ** (i + 1)
        return total

    p = spec.params
    if "b_points" in p:
        feas = FiniteFeasible(np.asarray(p["b_points"], dtype=float).reshape(-1, n))
        second = lambda a: feas
    else:
        box = BoxFeasible(
            np.asarray(p["b_lo"], dtype=float).reshape(n),
            np.asarray(p["b_hi"], dtype=float).reshape(n),
        )
        second = lambda a: box
    return DecisionModel(
        utility=utility,
        first_interval=(lo, hi),
        second_feasible=second,
        b_dim=n,
        states=states,
    )


def _cs_params(spec: FamilySpec):
    p = spec.params
    w0, beta, r = float(p["w"]), float(p["beta"]), float(p["r"])
    _require(r > 0, f"interest factor r={r} must be > 0")
    _require(beta > 0, f"discount beta={beta} must be > 0")
    return w0, beta, r


def _build_consumption_savings(spec: FamilySpec) -> DecisionModel:
    states = spec.states()
    lo, hi = spec.first_interval()
    w0, beta, r = _cs_params(spec)
    u1, u2, u3 = _fn(spec, "u1"), _fn(spec, "u2"), _fn(spec, "u3")
    _require(lo > 0, f"a_lo={lo} must be > 0 so that B(a) = [0, r*a] is nonempty")
    if u1.needs_positive:
        _require(hi < w0 - INTERIOR_MARGIN, f"a_hi={hi} must stay below wealth w={w0}")
    if u3.needs_positive:
        _require(float(states.values[0]) > 0, "u3 needs strictly positive state values")
    margin = INTERIOR_MARGIN if (u2.needs_positive or u3.needs_positive) else 0.0

    def utility(a, b, x):
        b0 = np.asarray(b, dtype=float)[..., 0]
        x = np.asarray(x, dtype=float)
        return u1.value(w0 - a) + beta * u2.value(r * a - b0) + beta**2 * u3.value(b0 * x)

    def second(a: float) -> BoxFeasible:
        return BoxFeasible(np.asarray([0.0]), np.asarray([r * a]), eval_margin=margin)

    return DecisionModel(
        utility=utility,
        first_interval=(lo, hi),
        second_feasible=second,
        b_dim=1,
        states=states,
    )


def _build_global_warming(spec: FamilySpec) -> DecisionModel:
    states = spec.states()
    lo, hi = spec.first_interval()
    v = _benefit(spec)
    u = _fn(spec, "u")
    _check_domain(u, np.asarray([lo, hi]), "u(a) over the first interval")
    corners_b = _feasible_corners(spec)
    grid_a = np.asarray([lo, hi])
    z = (
        corners_b[None, :, None] * (1.0 - states.values[None, None, :])
        - grid_a[:, None, None] * states.values[None, None, :]
    )
    if float(np.min(z)) <= v.domain_low() + INTERIOR_MARGIN:
        raise DomainViolation(
            "states: damages b - x*(a+b) reach "
            f"{float(np.min(z))!r}, at or below the benefit-function bound {v.domain_low()}"
        )

    def utility(a, b, x):
        b0 = np.asarray(b, dtype=float)[..., 0]
        x = np.asarray(x, dtype=float)
        return u.value(a) + v.value(b0 - x * (a + b0))

    return DecisionModel(
        utility=utility,
        first_interval=(lo, hi),
        second_feasible=_scalar_feasible(spec),
        b_dim=1,
        states=states,
    )


def _build_cake_eating(spec: FamilySpec) -> DecisionModel:
    states = spec.states()
    lo, hi = spec.first_interval()
    u, v, w = _fn(spec, "u"), _fn(spec, "v"), _fn(spec, "w")
    _check_domain(u, np.asarray([lo, hi]), "u(a) over the first interval")
    corners = _feasible_corners(spec)
    _check_domain(v, corners, "v(b) over feasible corners")
    rem = (
        states.values[None, None, :]
        - np.asarray([lo, hi])[:, None, None]
        - corners[None, :, None]
    )
    _check_domain(w, rem, "w(x - a - b) over corners")

    def utility(a, b, x):
        b0 = np.asarray(b, dtype=float)[..., 0]
        x = np.asarray(x, dtype=float)
        return u.value(a) + v.value(b0) + w.value(x - a - b0)

    margin = INTERIOR_MARGIN if (v.needs_positive or w.needs_positive) else 0.0
    return DecisionModel(
        utility=utility,
        first_interval=(lo, hi),
        second_feasible=_scalar_feasible(spec, margin),
        b_dim=1,
        states=states,
    )


# ---------------------------------------------------------------------------
# second-decision gradients (exact closed forms)
# ---------------------------------------------------------------------------


def grad_b(spec: FamilySpec, a: float, b: np.ndarray, x: float) -> np.ndarray:
    """dU/db at (a, b, x), exact per family."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if spec.family == "additive":
        v = _fn(spec, "v")
        track = float(spec.params.get("track", 1.0))
        return np.asarray([float(v.deriv(b[0] - track * x))])
    if spec.family == "risk_neutral":
        n, pdim, g_u, h_u, q_u, g, h, w = _risk_neutral_arrays(spec)
        out = (g_u * a + h_u) - q_u @ b
        for i in range(pdim):
            out = out + (g[i] * a + h[i]) * x ** (i + 1)
        return out
    if spec.family == "consumption_savings":
        w0, beta, r = _cs_params(spec)
        u2, u3 = _fn(spec, "u2"), _fn(spec, "u3")
        return np.asarray(
            [float(-beta * u2.deriv(r * a - b[0]) + beta**2 * x * u3.deriv(b[0] * x))]
        )
    if spec.family == "global_warming":
        v = _benefit(spec)
        z = b[0] - x * (a + b[0])
        return np.asarray([float(v.deriv(z) * (1.0 - x))])
    if spec.family == "cake_eating":
        v, w = _fn(spec, "v"), _fn(spec, "w")
        return np.asarray([float(v.deriv(b[0]) - w.deriv(x - a - b[0]))])
    raise DomainViolation(f"no gradient for family {spec.family!r}")


# ---------------------------------------------------------------------------
# first-order certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FocCertificate:
    """A solved matching (M, b0) and its verification on the state grid.

    ``direction`` classifies b0 against sampled second decisions: "convex"
    when b0 simultaneously minimizes the utility difference at every state
    (the value-of-information gap is then convex in the belief), "concave"
    for a simultaneous maximizer, "affine" when the difference is flat in b,
    and "none" when no uniform classification holds.  ``passed`` requires
    the residual within tolerance, a definite direction, and — when the
    probed decision binds a feasibility constraint — the neighborhood
    containment of the affine matching map.
    """

    M: np.ndarray
    b0: np.ndarray
    residual: float
    passed: bool
    direction: str = "none"
    constants: dict = field(default_factory=dict)
    argmin_ok: bool = True
    neighborhood_ok: bool = True
    tolerance: float = FOC_RESIDUAL_TOL

    def as_dict(self) -> dict:
        return {
            "M": np.asarray(self.M).tolist(),
            "b0": np.asarray(self.b0).tolist(),
            "residual": self.residual,
            "passed": self.passed,
            "direction": self.direction,
            "constants": dict(self.constants),
            "argmin_ok": self.argmin_ok,
            "neighborhood_ok": self.neighborhood_ok,
            "tolerance": self.tolerance,
        }


def _bracketed_root(fn: Callable[[float], float], lo: float, hi: float, probes: int = 256) -> float:
    """Find a sign change of ``fn`` on [lo, hi] and solve it with brentq."""
    if not hi > lo:
        raise NoCertificate("empty bracket for the compatibility equation")
    grid = np.linspace(lo, hi, probes)
    vals = np.asarray([fn(float(t)) for t in grid])
    if not np.all(np.isfinite(vals)):
        raise NoCertificate("compatibility equation leaves its domain on the bracket")
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if sign_change.size == 0:
        raise NoCertificate("compatibility equation has no root on the feasible bracket")
    i = int(sign_change[0])
    if vals[i] == 0.0:
        return float(grid[i])
    return float(brentq(fn, grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16))


def _feasible_bounds(spec: FamilySpec, a: float) -> tuple[np.ndarray, np.ndarray]:
    if spec.family == "consumption_savings":
        _, _, r = _cs_params(spec)
        return np.asarray([0.0]), np.asarray([r * a])
    p = spec.params
    if "b_points" in p:
        pts = np.asarray(p["b_points"], dtype=float)
        pts = pts.reshape(len(pts), -1)
        return pts.min(axis=0), pts.max(axis=0)
    n = int(p.get("n", 1))
    return (
        np.asarray(p["b_lo"], dtype=float).reshape(-1) * np.ones(n),
        np.asarray(p["b_hi"], dtype=float).reshape(-1) * np.ones(n),
    )


def _residual_on_grid(
    spec: FamilySpec, a1: float, a0: float, b1: np.ndarray, b0: np.ndarray, m: np.ndarray, x_grid
) -> float:
    worst = 0.0
    for x in np.asarray(x_grid, dtype=float):
        defect = m @ grad_b(spec, a1, b1, float(x)) - grad_b(spec, a0, b0, float(x))
        worst = max(worst, float(np.max(np.abs(defect))))
    return worst


def _classify_direction(
    spec: FamilySpec,
    a1: float,
    a0: float,
    b1: np.ndarray,
    b0: np.ndarray,
    m: np.ndarray,
    x_grid,
    tol: float = FOC_RESIDUAL_TOL,
) -> tuple[str, bool]:
    """Classify b0 within sampled decisions of B(a0) under the matching map."""
    model1 = build_model(spec)
    lo0, hi0 = _feasible_bounds(spec, a0)
    lo1, hi1 = _feasible_bounds(spec, a1)
    n = b0.size
    per_coord = 21 if n == 1 else max(5, int(round(200 ** (1 / n))))
    axes = [np.linspace(lo0[i], hi0[i], per_coord) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    samples = np.stack([g.ravel() for g in mesh], axis=-1)
    samples = np.vstack([samples, b0[None, :]])

    margin = INTERIOR_MARGIN
    # the matching map has Jacobian M^T, which makes b0 stationary for the
    # utility difference whenever M g1(x) = g0(x) holds
    mapped = b1[None, :] + (samples - b0[None, :]) @ m
    inside = np.all(
        (mapped >= lo1[None, :] + margin) & (mapped <= hi1[None, :] - margin), axis=1
    )
    inside &= np.all(
        (samples >= lo0[None, :] + margin) & (samples <= hi0[None, :] - margin), axis=1
    )
    inside[-1] = True  # b0 itself is always classified
    samples, mapped = samples[inside], mapped[inside]
    if len(samples) < 3:
        return "none", False

    xs = np.asarray(x_grid, dtype=float)
    diff = np.empty((len(samples), xs.size))
    for k, x in enumerate(xs):
        u1 = np.asarray(model1.utility(a1, mapped[:, None, :], np.asarray([x])), dtype=float)
        u0 = np.asarray(model1.utility(a0, samples[:, None, :], np.asarray([x])), dtype=float)
        diff[:, k] = (u1 - u0).reshape(len(samples))

    at_b0 = diff[-1]
    spread = float(np.max(diff.max(axis=0) - diff.min(axis=0)))
    scale = max(1.0, float(np.max(np.abs(diff))))
    if spread <= tol * scale:
        return "affine", True
    if np.all(at_b0 <= diff.min(axis=0) + tol * scale):
        return "convex", True
    if np.all(at_b0 >= diff.max(axis=0) - tol * scale):
        return "concave", True
    return "none", False


def _neighborhood_ok(
    spec: FamilySpec, a1: float, a0: float, b1: np.ndarray, b0: np.ndarray, m: np.ndarray
) -> bool:
    """Containment of the matching map near b0, checked only when b1 binds."""
    lo1, hi1 = _feasible_bounds(spec, a1)
    lo0, hi0 = _feasible_bounds(spec, a0)
    span1 = np.maximum(hi1 - lo1, 1e-12)
    bind = np.any(b1 <= lo1 + 1e-6 * span1) or np.any(b1 >= hi1 - 1e-6 * span1)
    if not bind:
        return True
    delta = 1e-4 * np.maximum(hi0 - lo0, 1e-12)
    for coord in range(b0.size):
        for sign in (-1.0, 1.0):
            probe = b0.copy()
            probe[coord] = np.clip(probe[coord] + sign * delta[coord], lo0[coord], hi0[coord])
            mapped = b1 + m.T @ (probe - b0)
            if np.any(mapped < lo1 - 1e-9) or np.any(mapped > hi1 + 1e-9):
                return False
    return True


def foc_certificate(spec: FamilySpec, a1: float, a0: float, b1, x_grid) -> FocCertificate:
    """Solve the per-family matching (M, b0) and verify it on ``x_grid``.

    Raises NoCertificate when the family admits no candidate solution for
    these arguments (inconsistent linear system, no root of the
    compatibility equation, incompatible component functions).  A candidate
    with residual above tolerance or without a definite direction is
    returned with ``passed`` False.
    """
    lo, hi = spec.first_interval()
    if not (a1 > a0):
        raise DomainViolation(f"need a1 > a0, got a1={a1}, a0={a0}")
    if not (lo - 1e-12 <= a0 and a1 <= hi + 1e-12):
        raise DomainViolation(f"a0={a0}, a1={a1} must lie in [{lo}, {hi}]")
    b1 = np.atleast_1d(np.asarray(b1, dtype=float))
    lo1, hi1 = _feasible_bounds(spec, a1)
    if np.any(b1 < lo1 - 1e-9) or np.any(b1 > hi1 + 1e-9):
        raise DomainViolation(f"b1={b1.tolist()} outside the feasible set at a1")

    solver = {
        "additive": _solve_additive,
        "risk_neutral": _solve_risk_neutral,
        "consumption_savings": _solve_consumption_savings,
        "global_warming": _solve_global_warming,
        "cake_eating": _solve_cake_eating,
    }[spec.family]
    m, b0, constants = solver(spec, a1, a0, b1)

    residual = _residual_on_grid(spec, a1, a0, b1, b0, m, x_grid)
    direction, dir_ok = _classify_direction(spec, a1, a0, b1, b0, m, x_grid)
    hood = _neighborhood_ok(spec, a1, a0, b1, b0, m)
    return FocCertificate(
        M=m,
        b0=b0,
        residual=residual,
        passed=residual <= FOC_RESIDUAL_TOL and dir_ok and hood,
        direction=direction,
        constants=constants,
        argmin_ok=dir_ok,
        neighborhood_ok=hood,
    )


def _solve_additive(spec, a1, a0, b1):
    return np.eye(1), b1.copy(), {}


def _solve_risk_neutral(spec, a1, a0, b1):
    n, pdim, g_u, h_u, q_u, g, h, w = _risk_neutral_arrays(spec)
    g1 = [g[i] * a1 + h[i] for i in range(pdim)]
    g0 = [g[i] * a0 + h[i] for i in range(pdim)]
    c1 = g_u * a1 + h_u - q_u @ b1
    c0 = g_u * a0 + h_u

    # identity fast path: exact whenever the feature gradients do not move with a
    if all(float(np.max(np.abs(v1 - v0))) <= 1e-12 for v1, v0 in zip(g1, g0)):
        try:
            b0 = np.linalg.solve(q_u, c0 - c1)
        except np.linalg.LinAlgError:
            b0 = np.linalg.lstsq(q_u, c0 - c1, rcond=None)[0]
        return np.eye(n), b0, {}

    rows = []
    rhs = []
    for v1, v0 in zip(g1, g0):
        for r in range(n):
            row = np.zeros(n * n + n)
            row[r * n : (r + 1) * n] = v1
            rows.append(row)
            rhs.append(v0[r])
    for r in range(n):
        row = np.zeros(n * n + n)
        row[r * n : (r + 1) * n] = c1
        row[n * n :] = q_u[r]
        rows.append(row)
        rhs.append(c0[r])
    a_mat, rhs = np.asarray(rows), np.asarray(rhs)
    sol = np.linalg.lstsq(a_mat, rhs, rcond=None)[0]
    if float(np.max(np.abs(a_mat @ sol - rhs))) > FOC_RESIDUAL_TOL:
        raise NoCertificate(
            "the matching system is inconsistent (more independent state features "
            "than second-decision dimensions)"
        )
    return sol[: n * n].reshape(n, n), sol[n * n :], {}


def _solve_consumption_savings(spec, a1, a0, b1):
    w0, beta, r = _cs_params(spec)
    u2, u3 = _fn(spec, "u2"), _fn(spec, "u3")
    b1s = float(b1[0])
    if isinstance(u3, Crra):
        gamma_eff = u3.gamma
    elif isinstance(u3, Power):
        gamma_eff = 1.0 - u3.theta
    elif isinstance(u3, LogFn):
        alpha = a0 / a1
        b0 = alpha * b1s
        d1 = -beta * float(u2.deriv(r * a1 - b1s)) + beta**2 / b1s
        d0 = -beta * float(u2.deriv(r * a0 - b0)) + beta**2 / b0
        if abs(d1) < 1e-14:
            raise NoCertificate("degenerate gradient at (a1, b1) for log second-period utility")
        return np.asarray([[d0 / d1]]), np.asarray([b0]), {"alpha": alpha}
    else:
        raise NoCertificate(
            "the savings certificate needs an isoelastic (or power/log) final-period utility"
        )
    if gamma_eff == 0.0:
        raise NoCertificate("final-period utility is affine; the matching is degenerate")

    margin = INTERIOR_MARGIN
    alpha_lo = margin / b1s
    alpha_hi = (r * a0 - margin) / b1s
    d1 = float(u2.deriv(r * a1 - b1s))

    def compat(alpha: float) -> float:
        return alpha ** (-gamma_eff) * d1 - float(u2.deriv(r * a0 - alpha * b1s))

    alpha = _bracketed_root(compat, alpha_lo, alpha_hi)
    m_scalar = alpha ** (-gamma_eff)
    return np.asarray([[m_scalar]]), np.asarray([alpha * b1s]), {"alpha": alpha}


def _solve_global_warming(spec, a1, a0, b1):
    gamma, eta = float(spec.params["gamma"]), float(spec.params["eta"])
    denom = a1 - gamma * eta
    if abs(denom) < 1e-12:
        raise NoCertificate("a1 coincides with gamma*eta; the scaling match degenerates")
    alpha = (a0 - gamma * eta) / denom
    if alpha <= 0:
        raise NoCertificate(
            f"scaling ratio alpha={alpha!r} is not positive; no matching decision exists"
        )
    b0 = alpha * (a1 + float(b1[0])) - a0
    lo0, hi0 = _feasible_bounds(spec, a0)
    if not lo0[0] - 1e-9 <= b0 <= hi0[0] + 1e-9:
        raise NoCertificate(f"matched decision b0={b0!r} falls outside the feasible set at a0")
    return (
        np.asarray([[alpha ** (-gamma)]]),
        np.asarray([b0]),
        {"alpha": alpha, "shift": gamma * eta * (alpha - 1.0)},
    )


def _solve_cake_eating(spec, a1, a0, b1):
    v, w = _fn(spec, "v"), _fn(spec, "w")
    b1s = float(b1[0])
    lo0, hi0 = _feasible_bounds(spec, a0)
    v1 = float(v.deriv(b1s))

    if isinstance(w, Quadratic):
        def compat(b0: float) -> float:
            beta = a0 + b0 - a1 - b1s
            return float(v.deriv(b0)) - v1 - 2.0 * beta

        b0 = _bracketed_root(compat, float(lo0[0]) + INTERIOR_MARGIN, float(hi0[0]) - INTERIOR_MARGIN)
        beta = a0 + b0 - a1 - b1s
        return np.asarray([[1.0]]), np.asarray([b0]), {"beta": beta, "kappa": 2.0 * beta}

    if isinstance(w, Exp):
        def compat(b0: float) -> float:
            beta = a0 + b0 - a1 - b1s
            return float(v.deriv(b0)) - np.exp(w.eta * beta) * v1

        b0 = _bracketed_root(compat, float(lo0[0]) + INTERIOR_MARGIN, float(hi0[0]) - INTERIOR_MARGIN)
        beta = a0 + b0 - a1 - b1s
        return np.asarray([[np.exp(w.eta * beta)]]), np.asarray([b0]), {"beta": beta}

    raise NoCertificate(
        "the cake-eating matching needs a quadratic or exponential remainder utility; "
        "power-law remainders admit no shift relation"
    )


def scaling_identity_check(gamma: float, eta: float, alpha: float, x_grid) -> float:
    """Max residual of deriv(alpha*x + gamma*eta*(alpha-1)) = alpha^(-gamma) * deriv(x)
    over the grid, for the shifted-isoelastic benefit function.

    The identity is exact analytically; the returned value is float noise for
    valid parameters and strictly positive for perturbed exponents.
    """
    if gamma <= 0 or gamma == 1.0:
        raise DomainViolation(f"gamma={gamma} must be positive and != 1")
    if eta <= 0:
        raise DomainViolation(f"eta={eta} must be > 0")
    if alpha <= 0:
        raise DomainViolation(f"alpha={alpha} must be > 0")
    v = ShiftedIsoelastic(gamma, eta)
    xs = np.asarray(x_grid, dtype=float)
    shifted = alpha * xs + gamma * eta * (alpha - 1.0)
    low = v.domain_low()
    if float(np.min(xs)) <= low or float(np.min(shifted)) <= low:
        raise DomainViolation("x_grid leaves the domain of the benefit derivative")
    return float(np.max(np.abs(v.deriv(shifted) - alpha ** (-gamma) * v.deriv(xs))))
