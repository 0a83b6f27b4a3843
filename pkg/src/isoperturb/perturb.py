"""Perturbation functions: the nonlinearity budget of a near-isometry.

A perturbation function phi is a non-decreasing map [0, inf) -> [0, inf)
used as a one-sided modulus: a bijection T between normed spaces is
controlled by phi when both T and its inverse expand distances by at most
phi.  This module implements the function families the rest of the
package optimizes over, together with iterated composition phi^(m),
the halving property check phi(t)/2 <= phi(t/2), and an integral
certificate for how fast iterates can grow.

Supported kinds:

``identity``        phi(t) = t
``affine``          phi(t) = M*t + L          (M >= 0, L >= 0)
``additive_power``  phi(t) = t + c*t**alpha    (0 <= alpha < 1, c > 0)
``tabulated``       linear interpolation through knots, held constant
                    below the first knot, extrapolated past the last
                    knot with that segment's slope floored at 1
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    CapExceeded,
    EpsVanishes,
    NegativeInput,
    NonFinite,
    OutOfRange,
    PositiveOverflow,
)

__all__ = [
    "PerturbationFunction",
    "ITERATION_CAP",
    "OVERFLOW_CEILING",
    "DEFAULT_HALVING_GRID",
    "evaluate",
    "iterate",
    "gap",
    "check_halving",
    "HalvingCheck",
    "integral_bound_check",
    "IntegralCheck",
    "to_json",
    "from_json",
]

# Hard limit on looped compositions; affine kinds use closed forms instead.
ITERATION_CAP = 2**20

# Values past this ceiling are treated as overflow rather than trusted.
OVERFLOW_CEILING = 1e300

DEFAULT_HALVING_GRID = tuple(np.geomspace(1e-6, 1e9, 181))


def _require_finite_nonneg(t: float, what: str = "t") -> float:
    t = float(t)
    if math.isnan(t) or math.isinf(t):
        raise NonFinite(f"{what} must be finite, got {t!r}")
    if t < 0:
        raise NegativeInput(f"{what} must be >= 0, got {t!r}")
    return t


@dataclass(frozen=True)
class PerturbationFunction:
    """One perturbation function, tagged by kind.

    Use the factory classmethods rather than the raw constructor; they
    validate parameters for their kind and leave the rest at defaults.
    """

    kind: str
    M: float = 1.0
    L: float = 0.0
    alpha: float = 0.0
    c: float = 1.0
    knots: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "identity":
            pass
        elif self.kind == "affine":
            if not (math.isfinite(self.M) and math.isfinite(self.L)):
                raise NonFinite("affine parameters must be finite")
            if self.M < 0 or self.L < 0:
                raise OutOfRange("affine requires M >= 0 and L >= 0")
        elif self.kind == "additive_power":
            if not (0.0 <= self.alpha < 1.0):
                raise OutOfRange("additive_power requires 0 <= alpha < 1")
            if not (self.c > 0 and math.isfinite(self.c)):
                raise OutOfRange("additive_power requires finite c > 0")
        elif self.kind == "tabulated":
            knots = tuple((float(t), float(v)) for t, v in self.knots)
            if len(knots) < 2:
                raise OutOfRange("tabulated requires at least two knots")
            ts = [t for t, _ in knots]
            vs = [v for _, v in knots]
            if any(not math.isfinite(x) for x in ts + vs):
                raise NonFinite("tabulated knots must be finite")
            if min(ts) < 0 or min(vs) < 0:
                raise NegativeInput("tabulated knots must be non-negative")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise OutOfRange("tabulated knot abscissae must be strictly increasing")
            if any(b < a for a, b in zip(vs, vs[1:])):
                raise OutOfRange("tabulated knot values must be non-decreasing")
            object.__setattr__(self, "knots", knots)
        else:
            raise OutOfRange(f"unknown perturbation kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "PerturbationFunction":
        return cls(kind="identity")

    @classmethod
    def affine(cls, M: float, L: float) -> "PerturbationFunction":
        return cls(kind="affine", M=float(M), L=float(L))

    @classmethod
    def additive_power(cls, alpha: float, c: float = 1.0) -> "PerturbationFunction":
        return cls(kind="additive_power", alpha=float(alpha), c=float(c))

    @classmethod
    def tabulated(cls, knots: Sequence[Sequence[float]]) -> "PerturbationFunction":
        return cls(kind="tabulated", knots=tuple((float(t), float(v)) for t, v in knots))

    # Slope used past the last knot; never allowed to dip below 1 so the
    # extrapolated tail cannot fall behind the identity.
    def _tail_slope(self) -> float:
        (t0, v0), (t1, v1) = self.knots[-2], self.knots[-1]
        return max(1.0, (v1 - v0) / (t1 - t0))

    def __call__(self, t: float) -> float:
        return evaluate(self, t)


def evaluate(phi: PerturbationFunction, t: float) -> float:
    """Evaluate phi at a single point t >= 0."""
    t = _require_finite_nonneg(t)
    if phi.kind == "identity":
        return t
    if phi.kind == "affine":
        return phi.M * t + phi.L
    if phi.kind == "additive_power":
        # 0**0 == 1.0 here on purpose: alpha = 0 means a constant additive bump.
        return t + phi.c * t**phi.alpha
    ts = [k[0] for k in phi.knots]
    vs = [k[1] for k in phi.knots]
    if t <= ts[0]:
        return vs[0]
    if t >= ts[-1]:
        return vs[-1] + phi._tail_slope() * (t - ts[-1])
    return float(np.interp(t, ts, vs))


def gap(phi: PerturbationFunction, t: float) -> float:
    """The excess phi(t) - t; the integrand denominator of the growth certificate."""
    return evaluate(phi, t) - float(t)


def _affine_iterate(M: float, L: float, m: int, t: float) -> float:
    if M == 1.0:
        return t + m * L
    # exp/log form keeps m up to 2**63 representable without a loop
    log_pow = m * math.log(M)
    if log_pow > math.log(OVERFLOW_CEILING):
        raise PositiveOverflow(f"M**m overflows ceiling at m={m}")
    p = math.exp(log_pow)
    return p * t + L * (p - 1.0) / (M - 1.0)


def iterate(phi: PerturbationFunction, m: int, t: float) -> float:
    """m-fold composition phi^(m)(t).

    Affine kinds use the exact closed form, so the step count m may be
    astronomically large.  Other kinds loop, subject to ITERATION_CAP;
    crossing OVERFLOW_CEILING raises PositiveOverflow.
    """
    m = int(m)
    if m < 0:
        raise OutOfRange("iteration count m must be >= 0")
    t = _require_finite_nonneg(t)
    if m == 0 or phi.kind == "identity":
        return t
    if phi.kind == "affine":
        out = _affine_iterate(phi.M, phi.L, m, t)
        if out > OVERFLOW_CEILING:
            raise PositiveOverflow(f"affine iterate exceeds ceiling at m={m}")
        return out
    if m > ITERATION_CAP:
        raise CapExceeded(f"m={m} exceeds iteration cap {ITERATION_CAP}")
    v = t
    if phi.kind == "additive_power":
        alpha, c = phi.alpha, phi.c
        for _ in range(m):
            v = v + c * v**alpha
            if v > OVERFLOW_CEILING:
                raise PositiveOverflow("additive_power iterate exceeds ceiling")
    else:
        for _ in range(m):
            v = evaluate(phi, v)
            if v > OVERFLOW_CEILING:
                raise PositiveOverflow("tabulated iterate exceeds ceiling")
    return v


@dataclass(frozen=True)
class HalvingCheck:
    ok: bool
    first_violation: Optional[float] = None


def check_halving(
    phi: PerturbationFunction,
    grid: Optional[Sequence[float]] = None,
    tol: float = 1e-12,
) -> HalvingCheck:
    """Test phi(t)/2 <= phi(t/2) over a grid of scales.

    The halving property is what lets a single application of phi at a
    coarse scale be traded for applications at finer scales, which the
    midpoint bound machinery relies on.  The tolerance is relative to
    the magnitude of phi(t/2).
    """
    pts = DEFAULT_HALVING_GRID if grid is None else tuple(float(x) for x in grid)
    if len(pts) == 0:
        raise OutOfRange("halving grid must be non-empty")
    for t in pts:
        half = evaluate(phi, t / 2.0)
        if evaluate(phi, t) / 2.0 > half + tol * (1.0 + abs(half)):
            return HalvingCheck(ok=False, first_violation=t)
    return HalvingCheck(ok=True)


@dataclass(frozen=True)
class IntegralCheck:
    integral: float
    bound: float
    passed: bool


def integral_bound_check(
    phi: PerturbationFunction, t: float, n: int, pass_tol: float = 1e-6
) -> IntegralCheck:
    """Certify that int_t^{phi^(n)(t)} dx / (phi(x) - x) <= n.

    The reciprocal-gap integral telescopes across iterates, one unit per
    step at most, so the inequality holds whenever the gap is positive
    on the whole range.  Equality is attained when the gap is constant.
    """
    t = _require_finite_nonneg(t)
    n = int(n)
    if n < 0:
        raise OutOfRange("n must be >= 0")
    top = iterate(phi, n, t)
    if top <= t:
        # zero-length range; the integral is 0 <= n
        if gap(phi, t) <= 0:
            raise EpsVanishes(f"phi(x) - x vanishes at x={t}")
        return IntegralCheck(integral=0.0, bound=float(n), passed=True)

    probe = np.linspace(t, top, 257)
    gaps = np.array([gap(phi, float(x)) for x in probe])
    if np.any(gaps <= 0):
        bad = float(probe[int(np.argmax(gaps <= 0))])
        raise EpsVanishes(f"phi(x) - x vanishes near x={bad}")

    interior = None
    if phi.kind == "tabulated":
        interior = [k[0] for k in phi.knots if t < k[0] < top] or None
    value, _ = integrate.quad(
        lambda x: 1.0 / gap(phi, x),
        t,
        top,
        epsabs=1e-8,
        limit=200,
        points=interior,
    )
    return IntegralCheck(integral=float(value), bound=float(n), passed=value <= n + pass_tol)


def to_json(phi: PerturbationFunction) -> dict:
    """Plain-dict form, stable across runs, suitable for configs and reports."""
    if phi.kind == "identity":
        return {"kind": "identity"}
    if phi.kind == "affine":
        return {"kind": "affine", "M": phi.M, "L": phi.L}
    if phi.kind == "additive_power":
        return {"kind": "additive_power", "alpha": phi.alpha, "c": phi.c}
    return {"kind": "tabulated", "knots": [[t, v] for t, v in phi.knots]}


def from_json(obj) -> PerturbationFunction:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "identity":
        return PerturbationFunction.identity()
    if kind == "affine":
        return PerturbationFunction.affine(obj["M"], obj["L"])
    if kind == "additive_power":
        return PerturbationFunction.additive_power(obj["alpha"], obj.get("c", 1.0))
    if kind == "tabulated":
        return PerturbationFunction.tabulated(obj["knots"])
    raise OutOfRange(f"unknown perturbation kind {kind!r}")
