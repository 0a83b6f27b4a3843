"""Search harness for the worst-case midpoint drift constant.

For a bi-Lipschitz bijection whose expansion excess is eps, the midpoint
deviation is at most K * eps * |a - b| for a universal K.  The canonical
kink map (expand the right half line by 1+eps, shrink the left by the
same factor) shows K >= (2+eps)/(4(1+eps)), which tends to 1/2 as eps
shrinks; the known ceilings are 3 for every eps in (0, 0.2) and e in the
small-eps limit.  Where the true constant sits is open, so this module
provides a reproducible random-restart hill climb over piecewise linear
bijections with slopes confined to [1/(1+eps), 1+eps], reporting the
best deviation-to-scale ratio it finds.  Any reported ratio is a valid
lower bound; the search makes no optimality claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import OutOfRange

__all__ = [
    "RATIO_GLOBAL_CAP",
    "RATIO_LIMIT_CAP",
    "vestfrid_ratio",
    "UpperBounds",
    "upper_bounds",
    "PiecewiseLinearMap",
    "canonical_kink",
    "KepsInstance",
    "best_ratio_on_lattice",
    "search_lower_bound",
]

RATIO_GLOBAL_CAP = 3.0
RATIO_LIMIT_CAP = math.e

SMALL_EPS_LIMIT = 0.2

_MIN_SEP = 1e-12


def vestfrid_ratio(eps: float) -> float:
    """(2+eps)/(4*(1+eps)): the kink map's exact deviation-to-scale ratio."""
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise OutOfRange("eps must be finite and > 0")
    return (2.0 + eps) / (4.0 * (1.0 + eps))


class UpperBounds(NamedTuple):
    global_cap: float
    liminf_cap: float


def upper_bounds(eps: float) -> UpperBounds:
    """Known ceilings (3, e) valid on the small-eps window (0, 0.2)."""
    eps = float(eps)
    if not (0.0 < eps < SMALL_EPS_LIMIT):
        raise OutOfRange(f"eps must lie in (0, {SMALL_EPS_LIMIT}), got {eps!r}")
    return UpperBounds(global_cap=RATIO_GLOBAL_CAP, liminf_cap=RATIO_LIMIT_CAP)


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Continuous piecewise linear bijection of R, anchored to 0 at its
    first breakpoint.

    slopes[0] rules everything left of breakpoints[0], slopes[i] the
    segment ending at breakpoints[i], slopes[-1] everything to the
    right.  All slopes must be positive.
    """

    breakpoints: tuple
    slopes: tuple

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        if len(bps) < 1:
            raise OutOfRange("need at least one breakpoint")
        if len(sl) != len(bps) + 1:
            raise OutOfRange("need exactly one more slope than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise OutOfRange("breakpoints must be strictly increasing")
        if any(s <= 0 or not math.isfinite(s) for s in sl):
            raise OutOfRange("slopes must be finite and > 0")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)

    def _values(self) -> np.ndarray:
        b = np.asarray(self.breakpoints)
        s = np.asarray(self.slopes)
        vals = np.zeros(len(b))
        if len(b) > 1:
            vals[1:] = np.cumsum(s[1:-1] * np.diff(b))
        return vals

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.breakpoints)
        s = np.asarray(self.slopes)
        v = self._values()
        piece = np.searchsorted(b, x, side="right")
        anchor = np.maximum(piece - 1, 0)
        out = v[anchor] + s[piece] * (x - b[anchor])
        return out

    def slope_range(self) -> tuple[float, float]:
        return (min(self.slopes), max(self.slopes))


def canonical_kink(eps: float, knots: int = 1) -> PiecewiseLinearMap:
    """The kink map expressed with the requested number of breakpoints.

    Extra breakpoints are collinear, so the function is identical for
    every knot count; this is the deterministic seed shape the search
    starts from.
    """
    if knots < 1:
        raise OutOfRange("knots must be >= 1")
    lo, hi = 1.0 / (1.0 + eps), 1.0 + eps
    if knots == 1:
        bps = (0.0,)
    else:
        bps = tuple(np.linspace(-1.0, 0.0, knots))
    return PiecewiseLinearMap(breakpoints=bps, slopes=(lo,) * knots + (hi,))


@dataclass(frozen=True)
class KepsInstance:
    """One searched configuration with its certified ratio.

    ``maps`` holds one piecewise linear map per axis (length 1 or 2);
    deviations in two dimensions are taken coordinatewise under the sup
    norm.  ``ratio`` is deviation / (eps * separation) at best_pair and
    is exactly recomputable from the stored parameters.
    """

    eps: float
    maps: tuple
    best_pair: tuple
    ratio: float

    @property
    def dim(self) -> int:
        return len(self.maps)

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "dim": self.dim,
            "maps": [
                {"breakpoints": list(m.breakpoints), "slopes": list(m.slopes)}
                for m in self.maps
            ],
            "best_pair": [list(p) for p in self.best_pair],
            "ratio": self.ratio,
        }

    def recompute_ratio(self) -> float:
        a, b = (np.asarray(p, dtype=float) for p in self.best_pair)
        devs = [
            _axis_deviation(m, float(a[i]), float(b[i]))
            for i, m in enumerate(self.maps)
        ]
        sep = float(np.max(np.abs(a - b)))
        if sep <= _MIN_SEP:
            return 0.0
        return max(devs) / (self.eps * sep)


def _axis_deviation(m: PiecewiseLinearMap, a: float, b: float) -> float:
    return float(abs(m((a + b) / 2.0) - (m(a) + m(b)) / 2.0))


def _axis_candidates(m: PiecewiseLinearMap) -> np.ndarray:
    """Pair lattice for one axis: breakpoint pairs, their midpoint
    reflections, and symmetric far pairs around each breakpoint."""
    B = list(m.breakpoints)
    scale = max(1.0, (B[-1] - B[0]) if len(B) > 1 else 1.0)
    pairs = set()

    def add(a: float, b: float):
        if abs(a - b) > _MIN_SEP:
            pairs.add((min(a, b), max(a, b)))

    for i, p in enumerate(B):
        for q in B[i + 1 :]:
            add(p, q)
        for q in B:
            if q != p:
                add(q, 2.0 * p - q)  # midpoint lands exactly on p
        for w in (scale, 8.0 * scale, 64.0 * scale):
            add(p - w, p + w)
    for w in (scale, 8.0 * scale, 64.0 * scale):
        add(B[0] - w, B[-1] + w)
    out = np.array(sorted(pairs), dtype=float)
    return out.reshape(-1, 2)


def _axis_ratio_stats(m: PiecewiseLinearMap, cand: np.ndarray):
    a, b = cand[:, 0], cand[:, 1]
    mid = (a + b) / 2.0
    dev = np.abs(m(mid) - (m(a) + m(b)) / 2.0)
    sep = np.abs(a - b)
    return dev, sep


def best_ratio_on_lattice(eps: float, maps: tuple) -> tuple[float, tuple]:
    """Exact maximum of the deviation ratio over the candidate lattice.

    One axis: scans its own lattice.  Two axes: scans the product of
    both lattices (each augmented with the degenerate stay-at-zero
    pair), vectorized, under the sup norm.
    """
    if len(maps) == 1:
        cand = _axis_candidates(maps[0])
        dev, sep = _axis_ratio_stats(maps[0], cand)
        ratios = dev / (eps * sep)
        i = int(np.argmax(ratios))
        pair = ((float(cand[i, 0]),), (float(cand[i, 1]),))
        return float(ratios[i]), pair

    c1 = np.vstack([_axis_candidates(maps[0]), [[0.0, 0.0]]])
    c2 = np.vstack([_axis_candidates(maps[1]), [[0.0, 0.0]]])
    d1, s1 = _axis_ratio_stats(maps[0], c1)
    d2, s2 = _axis_ratio_stats(maps[1], c2)
    dev = np.maximum(d1[:, None], d2[None, :])
    sep = np.maximum(s1[:, None], s2[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sep > _MIN_SEP, dev / (eps * sep), 0.0)
    flat = int(np.argmax(ratios))
    i, j = np.unravel_index(flat, ratios.shape)
    pair = (
        (float(c1[i, 0]), float(c2[j, 0])),
        (float(c1[i, 1]), float(c2[j, 1])),
    )
    return float(ratios[i, j]), pair


def _clip_slopes(slopes: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(slopes, 1.0 / (1.0 + eps), 1.0 + eps)


def _propose(rng: np.random.Generator, maps: list, eps: float) -> list:
    out = []
    for m in maps:
        out.append([np.array(m[0], dtype=float), np.array(m[1], dtype=float)])
    axis = int(rng.integers(len(out)))
    bps, slopes = out[axis]
    if rng.random() < 0.5 and len(slopes):
        i = int(rng.integers(len(slopes)))
        width = (1.0 + eps) - 1.0 / (1.0 + eps)
        slopes[i] = float(np.clip(slopes[i] + rng.normal(0.0, 0.35) * width,
                                  1.0 / (1.0 + eps), 1.0 + eps))
    else:
        i = int(rng.integers(len(bps)))
        span = max(1.0, bps[-1] - bps[0])
        bps[i] += rng.normal(0.0, 0.4) * span
        bps.sort()
        for k in range(1, len(bps)):
            if bps[k] - bps[k - 1] < 1e-9:
                bps[k] = bps[k - 1] + 1e-9
    return out


def _instance(eps: float, raw_maps: list, dim: int) -> KepsInstance:
    maps = tuple(
        PiecewiseLinearMap(breakpoints=tuple(b), slopes=tuple(s)) for b, s in raw_maps
    )
    ratio, pair = best_ratio_on_lattice(eps, maps)
    return KepsInstance(eps=eps, maps=maps, best_pair=pair, ratio=ratio)


def search_lower_bound(
    eps: float,
    knots: int = 1,
    budget: int = 200,
    seed: int = 0,
    dim: int = 1,
) -> KepsInstance:
    """Random-restart hill climb for a large deviation ratio.

    Deterministic in (eps, knots, budget, seed, dim).  Restart 0 starts
    from the canonical kink shape, so the reported ratio is never below
    (2+eps)/(4(1+eps)); further restarts start from random slope and
    breakpoint draws.  budget counts proposal evaluations across all
    restarts; budget 0 just scores the seed shape.
    """
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise OutOfRange("eps must be finite and > 0")
    knots = int(knots)
    if knots < 1:
        raise OutOfRange("knots must be >= 1")
    budget = int(budget)
    if budget < 0:
        raise OutOfRange("budget must be >= 0")
    if dim not in (1, 2):
        raise OutOfRange("dim must be 1 or 2")

    lo, hi = 1.0 / (1.0 + eps), 1.0 + eps
    n_restarts = max(1, min(6, budget // 50))
    steps = [budget // n_restarts] * n_restarts
    steps[0] += budget - sum(steps)

    def seed_maps(r: int) -> list:
        if r == 0:
            k = canonical_kink(eps, knots)
            return [[list(k.breakpoints), list(k.slopes)] for _ in range(dim)]
        rng0 = np.random.default_rng([int(seed), r, 7])
        out = []
        for _ in range(dim):
            bps = np.sort(rng0.uniform(-2.0, 2.0, size=knots))
            for k in range(1, knots):
                if bps[k] - bps[k - 1] < 1e-6:
                    bps[k] = bps[k - 1] + 1e-6
            slopes = rng0.uniform(lo, hi, size=knots + 1)
            out.append([list(bps), list(slopes)])
        return out

    best: Optional[KepsInstance] = None
    for r in range(n_restarts):
        rng = np.random.default_rng([int(seed), r])
        current = seed_maps(r)
        inst = _instance(eps, current, dim)
        local_best = inst
        for _ in range(steps[r]):
            cand = _propose(rng, current, eps)
            cand_inst = _instance(eps, cand, dim)
            if cand_inst.ratio > local_best.ratio:
                local_best = cand_inst
                current = cand
        if best is None or local_best.ratio > best.ratio:
            best = local_best
    assert best is not None
    return best
