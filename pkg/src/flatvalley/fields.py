"""Potentials vanishing on a level hypersurface, plus a small gallery.

The central object is :class:`CompositePotential`, U(x) = g(f(x)), built from
a scalar field f with analytic gradient and a nonnegative profile g with
g(0) = 0 and g > 0 elsewhere.  When 0 is a regular value of f the zero set
M = {f = 0} = {U = 0} is a hypersurface of equilibria ("the valley floor"),
which is what the rest of the package probes.

:class:`PlainPotential` holds classical stability counterexamples that do not
fit the composite form; they are used by the stability-contrast demos only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteEvaluationError,
    UnknownPotentialError,
)

Array = np.ndarray

_EPS = float(np.finfo(float).eps)


def _as_point(x, dim: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimensionMismatchError(
            f"expected a point of dimension {dim}, got shape {x.shape}"
        )
    return x


def default_fd_step(x: Array) -> float:
    """Central-difference step: eps^(1/3) * (1 + ||x||)."""
    return _EPS ** (1.0 / 3.0) * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A smooth scalar function on R^n with analytic gradient.

    ``f`` and ``grad`` take a single (n,) point.  ``f_many`` optionally
    evaluates an (N, n) batch; vectorised gallery fields provide it so that
    energy audits do not pay a Python loop per sample.
    """

    dim: int
    f: Callable[[Array], float]
    grad: Callable[[Array], Array]
    hess: Optional[Callable[[Array], Array]] = None
    f_many: Optional[Callable[[Array], Array]] = None
    name: str = "field"

    def value(self, x) -> float:
        return float(self.f(_as_point(x, self.dim)))

    def gradient(self, x) -> Array:
        return np.asarray(self.grad(_as_point(x, self.dim)), dtype=float)

    def value_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if self.f_many is not None:
            return np.asarray(self.f_many(X), dtype=float)
        return np.array([self.f(row) for row in X], dtype=float)


@dataclass(frozen=True, eq=False)
class Profile:
    """A scalar profile g with g(0) = 0, g >= 0, vanishing only at zero.

    ``inverse`` is the inverse of g restricted to [0, inf) where monotone;
    the gallery's power profiles provide it because the confinement bound
    |f| <= g^-1(budget) needs it.
    """

    g: Callable[[float], float]
    dg: Callable[[float], float]
    d2g: Optional[Callable[[float], float]] = None
    inverse: Optional[Callable[[float], float]] = None
    name: str = "profile"

    def value(self, s: float) -> float:
        return float(self.g(s))

    def derivative(self, s: float) -> float:
        return float(self.dg(s))


def power_profile(exponent: int) -> Profile:
    """g(s) = s**k for even integer k >= 2 (so g is C^2 and nonnegative)."""
    k = int(exponent)
    if k != exponent or k < 2 or k % 2 != 0:
        raise InvalidParameterError(
            f"profile exponent must be an even integer >= 2, got {exponent!r}"
        )
    return Profile(
        g=lambda s: s**k,
        dg=lambda s: k * s ** (k - 1),
        d2g=lambda s: k * (k - 1) * s ** (k - 2),
        inverse=lambda t: t ** (1.0 / k),
        name=f"s^{k}",
    )


@dataclass(frozen=True, eq=False)
class CompositePotential:
    """U(x) = g(f(x)) with the chain-rule gradient g'(f(x)) grad f(x)."""

    field: ScalarField
    profile: Profile
    name: str = "composite"
    spec_record: Optional[dict] = None

    @property
    def dim(self) -> int:
        return self.field.dim

    def value(self, x) -> float:
        return self.profile.value(self.field.value(x))

    def gradient(self, x) -> Array:
        x = _as_point(x, self.dim)
        return self.profile.dg(self.field.f(x)) * np.asarray(
            self.field.grad(x), dtype=float
        )

    @cached_property
    def value_fast(self) -> Callable[[Array], float]:
        f, g = self.field.f, self.profile.g
        return lambda x: g(f(x))

    @cached_property
    def gradient_fast(self) -> Callable[[Array], Array]:
        f, grad, dg = self.field.f, self.field.grad, self.profile.dg
        return lambda x: dg(f(x)) * grad(x)

    def value_many(self, X: Array) -> Array:
        return np.asarray(self.profile.g(self.field.value_many(X)), dtype=float)


@dataclass(frozen=True, eq=False)
class PlainPotential:
    """A potential given directly by U and its gradient, without a field."""

    dim: int
    u: Callable[[Array], float]
    grad_u: Callable[[Array], Array]
    label: str = "plain"
    spec_record: Optional[dict] = None
    u_many: Optional[Callable[[Array], Array]] = None

    @property
    def name(self) -> str:
        return self.label

    def value(self, x) -> float:
        return float(self.u(_as_point(x, self.dim)))

    def gradient(self, x) -> Array:
        return np.asarray(self.grad_u(_as_point(x, self.dim)), dtype=float)

    @cached_property
    def value_fast(self) -> Callable[[Array], float]:
        return self.u

    @cached_property
    def gradient_fast(self) -> Callable[[Array], Array]:
        return self.grad_u

    def value_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if self.u_many is not None:
            return np.asarray(self.u_many(X), dtype=float)
        return np.array([self.u(row) for row in X], dtype=float)


# ---------------------------------------------------------------------------
# gallery
# ---------------------------------------------------------------------------

_GUTTER_GRAD = np.array([1.0, 0.0])
_GUTTER_HESS = np.zeros((2, 2))


def gutter(exponent: int = 4) -> CompositePotential:
    """U(x, y) = x**k: a straight flat valley along the y axis."""
    fld = ScalarField(
        dim=2,
        f=lambda x: x[0],
        grad=lambda x: _GUTTER_GRAD,
        hess=lambda x: _GUTTER_HESS,
        f_many=lambda X: X[:, 0],
        name="gutter",
    )
    return CompositePotential(
        fld,
        power_profile(exponent),
        name=f"gutter(k={exponent})",
        spec_record={"kind": "gutter", "params": {"exponent": exponent}},
    )


def circle(exponent: int = 2) -> CompositePotential:
    """U(x, y) = (x^2 + y^2 - 1)**k: the valley floor is the unit circle."""
    fld = ScalarField(
        dim=2,
        f=lambda x: x[0] * x[0] + x[1] * x[1] - 1.0,
        grad=lambda x: np.array([2.0 * x[0], 2.0 * x[1]]),
        hess=lambda x: 2.0 * np.eye(2),
        f_many=lambda X: X[:, 0] ** 2 + X[:, 1] ** 2 - 1.0,
        name="circle",
    )
    return CompositePotential(
        fld,
        power_profile(exponent),
        name=f"circle(k={exponent})",
        spec_record={"kind": "circle", "params": {"exponent": exponent}},
    )


def ellipsoid(coeffs=(1.0, 2.0, 3.0), exponent: int = 4) -> CompositePotential:
    """U(x) = (sum_i c_i x_i^2 - 1)**k: the valley floor is an ellipsoid."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2 or np.any(c <= 0):
        raise InvalidParameterError("ellipsoid coefficients must be positive, >= 2 of them")
    n = c.size
    fld = ScalarField(
        dim=n,
        f=lambda x: float(c @ (x * x)) - 1.0,
        grad=lambda x: 2.0 * c * x,
        hess=lambda x: 2.0 * np.diag(c),
        f_many=lambda X: (X * X) @ c - 1.0,
        name=f"ellipsoid{tuple(c)}",
    )
    return CompositePotential(
        fld,
        power_profile(exponent),
        name=f"ellipsoid(k={exponent})",
        spec_record={"kind": "ellipsoid", "params": {"coeffs": list(map(float, c)), "exponent": exponent}},
    )


def custom_polynomial(
    linear=None, quadratic=None, offset: float = 0.0, exponent: int = 2
) -> CompositePotential:
    """f(x) = l.x + q.(x*x) - offset with profile s**k.

    Generalises the fixed gallery shapes; the caller asserts that 0 is a
    regular value of f (``check_regular_value`` can probe it numerically).
    """
    if linear is None and quadratic is None:
        raise InvalidParameterError("need at least one of linear/quadratic coefficients")
    l = None if linear is None else np.asarray(linear, dtype=float)
    q = None if quadratic is None else np.asarray(quadratic, dtype=float)
    if l is not None and q is not None and l.shape != q.shape:
        raise InvalidParameterError("linear and quadratic coefficient lengths differ")
    n = (l if l is not None else q).size
    lv = np.zeros(n) if l is None else l
    qv = np.zeros(n) if q is None else q
    off = float(offset)
    fld = ScalarField(
        dim=n,
        f=lambda x: float(lv @ x + qv @ (x * x)) - off,
        grad=lambda x: lv + 2.0 * qv * x,
        hess=lambda x: 2.0 * np.diag(qv),
        f_many=lambda X: X @ lv + (X * X) @ qv - off,
        name="custom-polynomial",
    )
    return CompositePotential(
        fld,
        power_profile(exponent),
        name=f"custom-polynomial(k={exponent})",
        spec_record={
            "kind": "custom-polynomial",
            "params": {
                "linear": list(map(float, lv)),
                "quadratic": list(map(float, qv)),
                "offset": off,
                "exponent": exponent,
            },
        },
    )


# Oscillating bump used by the classical 1-D and 2-D stable counterexamples.
# The value at the essential singularity is 0 by continuity; evaluation inside
# |s| < 1e-12 returns 0 to avoid overflow of 1/|s|.
_BUMP_CUT = 1e-12


def _bump(s: float) -> float:
    a = abs(s)
    if a < _BUMP_CUT:
        return 0.0
    u = 1.0 / a
    return math.exp(-u) * math.sin(u)


def _bump_prime(s: float) -> float:
    # the bump is even, so its derivative extends oddly through 0
    a = abs(s)
    if a < _BUMP_CUT:
        return 0.0
    u = 1.0 / a
    val = math.exp(-u) * u * u * (math.sin(u) - math.cos(u))
    return val if s > 0 else -val


def painleve() -> PlainPotential:
    """1-D potential exp(-1/|x|) sin(1/|x|): the origin is a stable non-minimum."""
    return PlainPotential(
        dim=1,
        u=lambda x: _bump(x[0]),
        grad_u=lambda x: np.array([_bump_prime(x[0])]),
        label="painleve",
        spec_record={"kind": "painleve", "params": {}},
    )


def laloy() -> PlainPotential:
    """2-D potential bump(x) - bump(y) - y^2: stable origin without trapping zones.

    The x motion decouples (dU/dx depends on x only), so the first coordinate
    stays trapped exactly as in the 1-D example.
    """
    return PlainPotential(
        dim=2,
        u=lambda x: _bump(x[0]) - _bump(x[1]) - x[1] * x[1],
        grad_u=lambda x: np.array([_bump_prime(x[0]), -_bump_prime(x[1]) - 2.0 * x[1]]),
        label="laloy",
        spec_record={"kind": "laloy", "params": {}},
    )


_GALLERY = {
    "gutter": gutter,
    "circle": circle,
    "ellipsoid": ellipsoid,
    "painleve": painleve,
    "laloy": laloy,
    "custom-polynomial": custom_polynomial,
    "custom_polynomial": custom_polynomial,
}


def gallery_lookup(name: str, params: Optional[dict] = None):
    """Build a gallery potential from a declarative (name, params) record."""
    try:
        builder = _GALLERY[name]
    except KeyError:
        raise UnknownPotentialError(
            f"unknown potential {name!r}; known: {sorted(set(_GALLERY) - {'custom_polynomial'})}"
        ) from None
    try:
        return builder(**(params or {}))
    except TypeError as exc:
        raise InvalidParameterError(f"bad parameters for {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# numerical oracles
# ---------------------------------------------------------------------------


def fd_gradient_check(potential, x, h: Optional[float] = None) -> float:
    """Max relative discrepancy between the analytic gradient and central differences.

    Returns max over coordinates of |analytic - fd| / (1 + |analytic|).
    """
    x = _as_point(x, potential.dim)
    if h is None:
        h = default_fd_step(x)
    if h <= 0:
        raise InvalidParameterError("finite-difference step must be positive")
    analytic = potential.gradient(x)
    worst = 0.0
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        fp = potential.value(x + step)
        fm = potential.value(x - step)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteEvaluationError(
                f"potential not finite within step {h} of {x} along axis {i}"
            )
        fd = (fp - fm) / (2.0 * h)
        worst = max(worst, abs(analytic[i] - fd) / (1.0 + abs(analytic[i])))
    return worst


@dataclass(eq=False)
class RegularityReport:
    """Evidence that 0 is (or is not) a regular value of a field."""

    tol: float
    grad_norms: list = field(default_factory=list)
    points: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def min_grad_norm(self) -> float:
        return float(min(self.grad_norms)) if self.grad_norms else float("nan")

    @property
    def argmin_point(self) -> Optional[Array]:
        if not self.grad_norms:
            return None
        return self.points[int(np.argmin(self.grad_norms))]

    @property
    def passed(self) -> bool:
        return bool(self.grad_norms) and self.min_grad_norm > self.tol and not self.notes


def check_regular_value(fld: ScalarField, seeds, tol: float = 1e-3) -> RegularityReport:
    """Project seeds onto {f = 0} and report the smallest gradient norm found.

    A projection that dies approaching the critical set is itself evidence
    against regularity: the gradient norm at the failure point is recorded
    and the verdict fails.  Other projection failures propagate.
    """
    from .errors import FlowDomainError, NewtonConvergenceError
    from .geometry import foot_point

    report = RegularityReport(tol=tol)
    for seed in seeds:
        seed = _as_point(seed, fld.dim)
        try:
            on_m = foot_point(fld, seed)
        except FlowDomainError as exc:
            where = seed if exc.state is None else np.asarray(exc.state, dtype=float)
            gn = float(np.linalg.norm(fld.gradient(where)))
            report.grad_norms.append(gn)
            report.points.append(where)
            report.notes.append(
                f"projection of seed {seed.tolist()} approached the critical set "
                f"(|grad f| = {gn:.3e})"
            )
            continue
        except NewtonConvergenceError as exc:
            raise NewtonConvergenceError(
                f"seed {seed.tolist()} failed to project onto the zero set: {exc}"
            ) from exc
        report.grad_norms.append(float(np.linalg.norm(fld.gradient(on_m))))
        report.points.append(on_m)
    return report
