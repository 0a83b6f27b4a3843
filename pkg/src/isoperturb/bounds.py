"""Midpoint displacement bounds for maps controlled by a perturbation function.

If a bijection T and its inverse both expand distances by at most phi,
and phi has the halving property, then the image of a midpoint cannot
drift from the midpoint of the images by more than

    phi^(2**(n+1) - 1)( d / 2**(n+1) )

for any depth n >= 0, where d is the distance between the endpoints.
Depth 0 is the single-application estimate phi(d/2).  This module
evaluates that family exactly, optimizes over the depth, and implements
the closed-form specializations: the additive (Hyers-Ulam style)
schedule, the bi-Lipschitz small-eps bound, an exponential majorant for
affine phi, a net-restricted variant, and the power-gap growth bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import HalvingViolated, OutOfRange, PositiveOverflow
from .perturb import (
    OVERFLOW_CEILING,
    CapExceeded,
    PerturbationFunction,
    PositiveOverflow,
    check_halving,
    evaluate,
    iterate,
)

__all__ = [
    "MidpointBoundReport",
    "midpoint_bound",
    "trivial_bound",
    "optimize_bound",
    "HyersUlamBound",
    "hyers_ulam_bound",
    "bilip_bound",
    "exp_majorant",
    "dyadic_k_for_eps",
    "net_bound",
    "PowerAlphaBound",
    "power_alpha_bound",
    "DEFAULT_MAX_DEPTH",
    "SMALL_EPS_LIMIT",
]

DEFAULT_MAX_DEPTH = 64

# The small-eps closed forms are only derived on this open interval.
SMALL_EPS_LIMIT = 0.2


@dataclass(frozen=True)
class MidpointBoundReport:
    """Result of optimizing the midpoint bound over dyadic depths.

    ``profile`` holds the candidate value at every depth scanned
    (``inf`` where the depth produced no finite value), so callers can
    inspect the landscape instead of trusting any unimodality.
    """

    d: float
    n_star: int
    k: int
    bound: float
    method: str
    corollary_values: dict = field(default_factory=dict)
    profile: tuple = ()
    skipped_depths: tuple = ()


def _require_positive_d(d: float) -> float:
    d = float(d)
    if not (d > 0 and math.isfinite(d)):
        raise OutOfRange(f"d must be finite and > 0, got {d!r}")
    return d


def midpoint_bound(
    phi: PerturbationFunction,
    d: float,
    depth: int,
    require_halving: bool = False,
) -> float:
    """Exact bound value at one dyadic depth; inf when uncomputable.

    Returns phi composed 2**(depth+1) - 1 times, evaluated at
    d / 2**(depth+1).  Iteration caps and overflow both collapse to an
    inf sentinel so depth scans can simply skip them.
    """
    d = _require_positive_d(d)
    depth = int(depth)
    if depth < 0:
        raise OutOfRange("depth must be >= 0")
    if require_halving:
        hc = check_halving(phi)
        if not hc.ok:
            raise HalvingViolated(f"halving fails at t={hc.first_violation}")
    k = 2 ** (depth + 1)
    try:
        return iterate(phi, k - 1, d / k)
    except (CapExceeded, PositiveOverflow):
        return math.inf


def trivial_bound(phi: PerturbationFunction, d: float) -> float:
    """Single-application estimate phi(d/2), the depth-0 bound."""
    d = _require_positive_d(d)
    return evaluate(phi, d / 2.0)


def _power_majorant_value(alpha: float, c: float, d: float, k: float, steps: float) -> float:
    # Inversion of the reciprocal-gap integral for gap(x) = c*x**alpha:
    # phi^(m)(t) <= (t**(1-alpha) + c*(1-alpha)*m)**(1/(1-alpha)).
    t = d / k
    base = t ** (1.0 - alpha) + c * (1.0 - alpha) * steps
    return base ** (1.0 / (1.0 - alpha))


def _affine_exp_value(eps: float, L: float, d: float, k: float, steps: float) -> float:
    # (1+eps)**m <= exp(eps*m) turns the affine closed form into this majorant.
    if eps == 0.0:
        return d / k + steps * L
    x = eps * steps
    if x > 700.0:
        return math.inf
    g = math.exp(x)
    return g * d / k + (g - 1.0) * L / eps


def _tabulated_envelope(phi: PerturbationFunction) -> tuple[float, float]:
    # Smallest affine M*t + Lhat with M = the steepest slope that dominates
    # a tabulated phi everywhere; max of phi(t) - M*t sits at a breakpoint.
    ts = [k[0] for k in phi.knots]
    vs = [k[1] for k in phi.knots]
    slopes = [(v1 - v0) / (t1 - t0) for (t0, v0), (t1, v1) in zip(phi.knots, phi.knots[1:])]
    M = max(slopes + [phi._tail_slope()])
    offsets = [vs[0]] + [v - M * t for t, v in phi.knots]
    return M, max(0.0, max(offsets))


def _majorant_at_depth(phi: PerturbationFunction, d: float, depth: int) -> float:
    k = 2.0 ** (depth + 1)
    steps = k - 1.0
    if phi.kind == "additive_power":
        return _power_majorant_value(phi.alpha, phi.c, d, k, steps)
    if phi.kind == "tabulated":
        M, Lhat = _tabulated_envelope(phi)
        return _affine_exp_value(M - 1.0, Lhat, d, k, steps)
    return math.inf


def optimize_bound(
    phi: PerturbationFunction,
    d: float,
    n_max: int = DEFAULT_MAX_DEPTH,
    xi: Optional[tuple[float, float]] = None,
    require_halving: bool = False,
) -> MidpointBoundReport:
    """Scan depths 0..n_max exhaustively and report the best bound.

    No unimodality is assumed; the full profile is recorded.  Depths
    whose exact iterate is capped fall back to a closed-form majorant
    when one exists for phi's kind and are otherwise skipped.  Passing
    ``xi = (xi_domain, xi_range)`` additionally reports the net-restricted
    corollary value when phi is affine with a small expansion excess.
    """
    d = _require_positive_d(d)
    n_max = int(n_max)
    if n_max < 0:
        raise OutOfRange("n_max must be >= 0")
    if require_halving:
        hc = check_halving(phi)
        if not hc.ok:
            raise HalvingViolated(f"halving fails at t={hc.first_violation}")

    profile: list[float] = []
    skipped: list[int] = []
    best_val = math.inf
    best_n = 0
    best_from_majorant = False
    for n in range(n_max + 1):
        exact = midpoint_bound(phi, d, n)
        from_majorant = False
        val = exact
        if not math.isfinite(exact):
            maj = _majorant_at_depth(phi, d, n)
            if math.isfinite(maj) and maj <= OVERFLOW_CEILING:
                val = maj
                from_majorant = True
            else:
                skipped.append(n)
        profile.append(val)
        if val < best_val:
            best_val = val
            best_n = n
            best_from_majorant = from_majorant

    if not math.isfinite(best_val):
        raise PositiveOverflow("no depth produced a finite bound")

    if best_from_majorant:
        method = "exp-majorant"
    elif best_n == 0:
        method = "trivial"
    elif phi.kind in ("identity", "affine"):
        method = "affine-closed-form"
    else:
        method = "exact-iterate"

    corollary: dict[str, float] = {"trivial": trivial_bound(phi, d)}
    if phi.kind == "affine":
        if phi.M == 1.0:
            corollary["hyers_ulam"] = hyers_ulam_bound(phi.L, d).bound
        else:
            eps = phi.M - 1.0
            if eps > 0:
                corollary["bilip"] = bilip_bound(eps, phi.L, d)
                if xi is not None and eps < SMALL_EPS_LIMIT:
                    corollary["net"] = net_bound(eps, xi[0], xi[1], d)
    elif phi.kind == "additive_power":
        vals = [
            _power_majorant_value(phi.alpha, phi.c, d, 2.0**j, 2.0**j)
            for j in range(1, 66)
        ]
        corollary["power_alpha"] = min(vals)

    return MidpointBoundReport(
        d=d,
        n_star=best_n,
        k=2 ** (best_n + 1),
        bound=best_val,
        method=method,
        corollary_values=corollary,
        profile=tuple(profile),
        skipped_depths=tuple(skipped),
    )


class HyersUlamBound(NamedTuple):
    bound: float
    n: int


def hyers_ulam_bound(L: float, d: float) -> HyersUlamBound:
    """Closed-form depth schedule for a purely additive excess phi(t) = t + L.

    The depth grows like log2(sqrt(d)), trading the shrinking linear
    term against the accumulating additive one; the result is bounded by
    (2 + L)*sqrt(d) + (1 + L) for every d >= 1.
    """
    d = _require_positive_d(d)
    L = float(L)
    if L < 0:
        raise OutOfRange("L must be >= 0")
    n = max(0, math.floor(math.log2(math.sqrt(d))) - 1)
    k = 2 ** (n + 1)
    return HyersUlamBound(bound=d / k + (k - 1) * L, n=n)


def bilip_bound(eps: float, L: float, d: float) -> float:
    """Bound for phi(t) = (1+eps)*t + L.

    For 0 < eps < SMALL_EPS_LIMIT the dyadic depth near log2(1/eps)
    yields 3*eps*d + 4*L/eps.  For larger eps the single-application
    estimate (1+eps)*d/2 + L/2 is returned instead.
    """
    eps = float(eps)
    L = float(L)
    d = _require_positive_d(d)
    if eps <= 0 or L < 0:
        raise OutOfRange("requires eps > 0 and L >= 0")
    if eps < SMALL_EPS_LIMIT:
        return 3.0 * eps * d + 4.0 * L / eps
    return (1.0 + eps) * d / 2.0 + L / 2.0


def exp_majorant(eps: float, L: float, d: float, k: int) -> float:
    """exp(eps*k)*d/k + (exp(eps*k) - 1)*L/eps, dominating the exact
    affine iterate of length k started at d/k."""
    eps = float(eps)
    if eps <= 0:
        raise OutOfRange("eps must be > 0")
    L = float(L)
    if L < 0:
        raise OutOfRange("L must be >= 0")
    d = float(d)
    if d < 0:
        raise OutOfRange("d must be >= 0")
    k = float(k)
    if k <= 0:
        raise OutOfRange("k must be > 0")
    x = eps * k
    if x > 700.0:
        return math.inf
    g = math.exp(x)
    return g * d / k + (g - 1.0) * L / eps


def dyadic_k_for_eps(eps: float) -> int:
    """The power of two nearest the natural window around 1/eps.

    Picks the integer depth n inside [log2(1/eps) - 1.5, log2(1/eps) - 0.5]
    and returns k = 2**(n+1); that window always contains an integer and
    k then lands within a factor of sqrt(2) of 1/eps.  When the window
    edges are themselves integers, the k closer to 1/eps wins.
    """
    eps = float(eps)
    if not (0.0 < eps < SMALL_EPS_LIMIT):
        raise OutOfRange(f"eps must lie in (0, {SMALL_EPS_LIMIT}), got {eps!r}")
    x = math.log2(1.0 / eps)
    lo, hi = x - 1.5, x - 0.5
    candidates = [n for n in range(max(0, math.ceil(lo)), math.floor(hi) + 1)]
    if not candidates:
        raise OutOfRange(f"no integer depth in [{lo}, {hi}]")
    target = 1.0 / eps
    best = min(candidates, key=lambda n: abs(2.0 ** (n + 1) - target))
    return 2 ** (best + 1)


def net_bound(eps: float, xi_domain: float, xi_range: float, d: float) -> float:
    """3*eps*d + 34*(xi_domain + xi_range)/eps, the net-restricted variant.

    xi_domain and xi_range are the density radii of the sampled sets in
    the source and target spaces.
    """
    eps = float(eps)
    if not (0.0 < eps < SMALL_EPS_LIMIT):
        raise OutOfRange(f"eps must lie in (0, {SMALL_EPS_LIMIT}), got {eps!r}")
    if xi_domain < 0 or xi_range < 0:
        raise OutOfRange("density radii must be >= 0")
    d = float(d)
    if d < 0:
        raise OutOfRange("d must be >= 0")
    return 3.0 * eps * d + 34.0 * (xi_domain + xi_range) / eps


class PowerAlphaBound(NamedTuple):
    bound: float
    k: int


def power_alpha_bound(alpha: float, d: float) -> PowerAlphaBound:
    """Growth bound for phi(t) = t + t**alpha, optimized over dyadic k.

    Minimizes ((d/k)**(1-alpha) + (1-alpha)*k)**(1/(1-alpha)) over
    k = 2, 4, ..., 2**65; the optimum scales like d**(1/(2-alpha)).
    """
    alpha = float(alpha)
    if not (0.0 <= alpha < 1.0):
        raise OutOfRange("alpha must lie in [0, 1)")
    d = _require_positive_d(d)
    best_v = math.inf
    best_k = 2
    for j in range(1, 66):
        k = 2.0**j
        v = _power_majorant_value(alpha, 1.0, d, k, k)
        if v < best_v:
            best_v = v
            best_k = 2**j
    return PowerAlphaBound(bound=best_v, k=best_k)
