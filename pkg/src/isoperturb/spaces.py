"""Finite-dimensional testbed maps and brute-force midpoint experiments.

Everything here lives in R^dim under one of three norms (sup, euclid,
ell1).  The map kinds are analytic near-isometries whose exact expansion
moduli are known, so simulated deviations can be checked against the
bound engine without trusting the map being tested:

``Vestfrid1D``             x >= 0 scaled by 1+eps, x < 0 divided by 1+eps
``CoordinatewiseVestfrid`` the same per coordinate with its own eps
``SignedPermutation``      exact isometry permuting and flipping axes
``NoisyIsometry``          signed permutation plus a bounded smooth wobble
``Composite``              left-to-right composition of the above

The module also provides the empirical expansion modulus, sup-deviation
sweeps over boxes, greedy separated nets, and the desk-scale repair of a
distance-preserving but non-injective sample map into a bijection with a
displacement certificate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .bounds import optimize_bound
from .errors import (
    BudgetExceeded,
    CardinalityMismatch,
    DimensionMismatch,
    HypothesisFailed,
    InversionDiverged,
    ModulusMismatch,
    OutOfRange,
)
from .perturb import PerturbationFunction, evaluate

__all__ = [
    "NORM_TAGS",
    "norm_of",
    "SpacePoint",
    "Vestfrid1D",
    "CoordinatewiseVestfrid",
    "SignedPermutation",
    "NoisyIsometry",
    "Composite",
    "MapKind",
    "map_to_json",
    "map_from_json",
    "apply_map",
    "invert_map",
    "EmpiricalModulus",
    "measure_eps",
    "midpoint_deviation",
    "DeviationSup",
    "deviation_sup_oracle",
    "PairMargin",
    "BoundCheckReport",
    "check_against_bound",
    "NetResult",
    "greedy_separated_net",
    "RepairResult",
    "repair_to_bijection",
    "random_cloud",
    "random_signed_permutation",
]

NORM_TAGS = ("sup", "euclid", "ell1")

PAIR_BUDGET = 10**8


def norm_of(v: np.ndarray, tag: str = "sup") -> np.ndarray:
    """Norm along the last axis."""
    v = np.asarray(v, dtype=float)
    if tag == "sup":
        return np.max(np.abs(v), axis=-1)
    if tag == "euclid":
        return np.sqrt(np.sum(v * v, axis=-1))
    if tag == "ell1":
        return np.sum(np.abs(v), axis=-1)
    raise OutOfRange(f"unknown norm tag {tag!r}")


@dataclass(frozen=True)
class SpacePoint:
    """A point of R^dim tagged with the norm its space carries."""

    coords: tuple
    norm_tag: str = "sup"

    def __post_init__(self):
        coords = tuple(float(x) for x in self.coords)
        if len(coords) == 0:
            raise DimensionMismatch("a point needs at least one coordinate")
        if self.norm_tag not in NORM_TAGS:
            raise OutOfRange(f"unknown norm tag {self.norm_tag!r}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def _as_array(p, dim: Optional[int] = None) -> np.ndarray:
    a = p.array() if isinstance(p, SpacePoint) else np.asarray(p, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if dim is not None and a.shape[-1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {a.shape[-1]}")
    return a


def _tag_of(p, default: str) -> str:
    return p.norm_tag if isinstance(p, SpacePoint) else default


# ---------------------------------------------------------------------------
# map kinds


def _vestfrid_fwd(x: np.ndarray, eps) -> np.ndarray:
    return np.where(x >= 0, (1.0 + eps) * x, x / (1.0 + eps))


def _vestfrid_inv(y: np.ndarray, eps) -> np.ndarray:
    return np.where(y >= 0, y / (1.0 + eps), (1.0 + eps) * y)


@dataclass(frozen=True)
class Vestfrid1D:
    """One-dimensional kink map: expand the right half line, shrink the left."""

    eps: float

    def __post_init__(self):
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise OutOfRange("eps must be finite and >= 0")

    dim = 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _vestfrid_fwd(np.asarray(x, dtype=float), self.eps)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return _vestfrid_inv(np.asarray(y, dtype=float), self.eps)

    @property
    def claimed_modulus(self) -> tuple[float, float]:
        return (1.0 + self.eps, 0.0)


@dataclass(frozen=True)
class CoordinatewiseVestfrid:
    eps: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        if len(eps) == 0:
            raise DimensionMismatch("needs at least one coordinate")
        if any(e < 0 or not math.isfinite(e) for e in eps):
            raise OutOfRange("every eps must be finite and >= 0")
        object.__setattr__(self, "eps", eps)

    @property
    def dim(self) -> int:
        return len(self.eps)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_array(x, self.dim)
        return _vestfrid_fwd(x, np.asarray(self.eps))

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = _as_array(y, self.dim)
        return _vestfrid_inv(y, np.asarray(self.eps))

    @property
    def claimed_modulus(self) -> tuple[float, float]:
        return (1.0 + max(self.eps), 0.0)


@dataclass(frozen=True)
class SignedPermutation:
    """Coordinate i goes to slot sigma[i] with sign signs[i]; an exact isometry."""

    sigma: tuple
    signs: tuple

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        signs = tuple(int(s) for s in self.signs)
        n = len(sigma)
        if len(signs) != n:
            raise DimensionMismatch("sigma and signs must have equal length")
        if sorted(sigma) != list(range(n)):
            raise OutOfRange("sigma must be a permutation of 0..n-1")
        if any(s not in (-1, 1) for s in signs):
            raise OutOfRange("signs must be +1 or -1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self) -> int:
        return len(self.sigma)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_array(x, self.dim)
        out = np.empty_like(x)
        out[..., list(self.sigma)] = x * np.asarray(self.signs)
        return out

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = _as_array(y, self.dim)
        return y[..., list(self.sigma)] * np.asarray(self.signs)

    @property
    def claimed_modulus(self) -> tuple[float, float]:
        return (1.0, 0.0)


MAX_NOISE_AMPLITUDE = 0.25


@dataclass(frozen=True)
class NoisyIsometry:
    """Signed permutation with a smooth amplitude-bounded wobble on top.

    The wobble is sinusoidal per output coordinate with unit-bounded
    frequency, so each output coordinate stays strictly monotone in its
    source coordinate and the map remains a bijection.  Both T and its
    inverse move distances by at most 2*amplitude, whence the claimed
    modulus (1, 2*amplitude).  The amplitude must stay below 0.25 so the
    plain fixed point refinement used for inversion contracts.
    """

    base: SignedPermutation
    amplitude: float
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.amplitude < MAX_NOISE_AMPLITUDE):
            raise OutOfRange(
                f"amplitude must lie in [0, {MAX_NOISE_AMPLITUDE}) for invertibility"
            )
        rng = np.random.default_rng(int(self.seed))
        freq = rng.uniform(0.5, 1.0, size=self.base.dim)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=self.base.dim)
        freq.setflags(write=False)
        phase.setflags(write=False)
        object.__setattr__(self, "_freq", freq)
        object.__setattr__(self, "_phase", phase)

    @property
    def dim(self) -> int:
        return self.base.dim

    def _wobble(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude * np.sin(self._freq * u + self._phase)

    def forward(self, x: np.ndarray) -> np.ndarray:
        u = self.base.forward(x)
        return u + self._wobble(u)

    def inverse(self, y: np.ndarray, max_steps: int = 200) -> np.ndarray:
        y = _as_array(y, self.dim)
        u = np.array(y, dtype=float)
        # refinement u <- u - (g(u) - y) where g(u) = u + wobble(u)
        for _ in range(max_steps):
            residual = u + self._wobble(u) - y
            u = u - residual
            if float(np.max(np.abs(residual))) <= 1e-13:
                break
        residual = u + self._wobble(u) - y
        if float(np.max(np.abs(residual))) > 1e-10 * (1.0 + float(np.max(np.abs(y)))):
            raise InversionDiverged("fixed point refinement missed tolerance in 200 steps")
        return self.base.inverse(u)

    @property
    def claimed_modulus(self) -> tuple[float, float]:
        return (1.0, 2.0 * self.amplitude)


@dataclass(frozen=True)
class Composite:
    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if len(parts) == 0:
            raise OutOfRange("composite needs at least one part")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionMismatch(f"parts disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def forward(self, x: np.ndarray) -> np.ndarray:
        for p in self.parts:
            x = p.forward(x)
        return x

    def inverse(self, y: np.ndarray) -> np.ndarray:
        for p in reversed(self.parts):
            y = p.inverse(y)
        return y

    @property
    def claimed_modulus(self) -> tuple[float, float]:
        M, L = 1.0, 0.0
        for p in self.parts:
            pM, pL = p.claimed_modulus
            M, L = pM * M, pM * L + pL  # note: applying p after the prefix
        return (M, L)


MapKind = Union[Vestfrid1D, CoordinatewiseVestfrid, SignedPermutation, NoisyIsometry, Composite]


def map_to_json(m: MapKind) -> dict:
    if isinstance(m, Vestfrid1D):
        return {"kind": "vestfrid1d", "eps": m.eps}
    if isinstance(m, CoordinatewiseVestfrid):
        return {"kind": "coordinatewise_vestfrid", "eps": list(m.eps)}
    if isinstance(m, SignedPermutation):
        return {"kind": "signed_permutation", "sigma": list(m.sigma), "signs": list(m.signs)}
    if isinstance(m, NoisyIsometry):
        return {
            "kind": "noisy_isometry",
            "base": map_to_json(m.base),
            "amplitude": m.amplitude,
            "seed": m.seed,
        }
    if isinstance(m, Composite):
        return {"kind": "composite", "parts": [map_to_json(p) for p in m.parts]}
    raise OutOfRange(f"not a serializable map kind: {type(m)!r}")


def map_from_json(obj) -> MapKind:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "vestfrid1d":
        return Vestfrid1D(eps=obj["eps"])
    if kind == "coordinatewise_vestfrid":
        return CoordinatewiseVestfrid(eps=tuple(obj["eps"]))
    if kind == "signed_permutation":
        return SignedPermutation(sigma=tuple(obj["sigma"]), signs=tuple(obj["signs"]))
    if kind == "noisy_isometry":
        base = map_from_json(obj["base"])
        if not isinstance(base, SignedPermutation):
            raise OutOfRange("noisy_isometry base must be a signed permutation")
        return NoisyIsometry(base=base, amplitude=obj["amplitude"], seed=int(obj["seed"]))
    if kind == "composite":
        return Composite(parts=tuple(map_from_json(p) for p in obj["parts"]))
    raise OutOfRange(f"unknown map kind {kind!r}")


def apply_map(m: MapKind, p: SpacePoint) -> SpacePoint:
    out = m.forward(_as_array(p, m.dim))
    return SpacePoint(coords=tuple(np.atleast_1d(out)), norm_tag=_tag_of(p, "sup"))


def invert_map(m: MapKind, q: SpacePoint) -> SpacePoint:
    out = m.inverse(_as_array(q, m.dim))
    return SpacePoint(coords=tuple(np.atleast_1d(out)), norm_tag=_tag_of(q, "sup"))


# ---------------------------------------------------------------------------
# empirical modulus and deviation experiments


@dataclass(frozen=True)
class EmpiricalModulus:
    """eps_hat sampled on a grid of scales; non-decreasing by construction."""

    t_grid: tuple
    eps_hat: tuple
    sample_count: int

    def value_at(self, t: float) -> float:
        grid = np.asarray(self.t_grid)
        idx = int(np.searchsorted(grid, t, side="right")) - 1
        if idx < 0:
            return 0.0
        return self.eps_hat[idx]


def _condensed_pair_stats(points: np.ndarray, images: np.ndarray, tag_in: str, tag_out: str):
    n = points.shape[0]
    d_in, d_out = [], []
    for i in range(n - 1):
        d_in.append(norm_of(points[i + 1 :] - points[i], tag_in))
        d_out.append(norm_of(images[i + 1 :] - images[i], tag_out))
    if not d_in:
        return np.empty(0), np.empty(0)
    return np.concatenate(d_in), np.concatenate(d_out)


def measure_eps(
    m: MapKind,
    cloud,
    t_grid: Sequence[float],
    norm_in: str = "sup",
    norm_out: str = "sup",
) -> EmpiricalModulus:
    """Empirical expansion modulus over all pairs of a finite cloud.

    A pair enters the statistic at scale t when either its source
    distance or its image distance is at most t; the value is the
    largest absolute gap between the two distances among entering pairs.
    """
    P = _cloud_array(cloud, m.dim)
    grid = sorted(float(t) for t in t_grid)
    if not grid:
        raise OutOfRange("t_grid must be non-empty")
    TP = m.forward(P)
    d_in, d_out = _condensed_pair_stats(P, TP, norm_in, norm_out)
    diffs = np.abs(d_out - d_in)
    eps_vals = []
    for t in grid:
        mask = (d_in <= t) | (d_out <= t)
        eps_vals.append(float(diffs[mask].max()) if np.any(mask) else 0.0)
    eps_vals = np.maximum.accumulate(np.asarray(eps_vals))
    return EmpiricalModulus(
        t_grid=tuple(grid),
        eps_hat=tuple(float(v) for v in eps_vals),
        sample_count=int(d_in.size),
    )


def _cloud_array(cloud, dim: int) -> np.ndarray:
    if isinstance(cloud, np.ndarray):
        P = np.asarray(cloud, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
    else:
        P = np.stack([_as_array(p, dim) for p in cloud])
    if P.shape[-1] != dim:
        raise DimensionMismatch(f"cloud dimension {P.shape[-1]} != map dimension {dim}")
    return P


def midpoint_deviation(m: MapKind, a, b, norm_tag: str = "sup") -> float:
    """Distance between the image of the midpoint and the midpoint of the images."""
    tag = _tag_of(a, norm_tag)
    av, bv = _as_array(a, m.dim), _as_array(b, m.dim)
    mid_image = m.forward((av + bv) / 2.0)
    image_mid = (m.forward(av) + m.forward(bv)) / 2.0
    return float(norm_of(mid_image - image_mid, tag))


@dataclass(frozen=True)
class DeviationSup:
    sup: float
    argmax_pair: tuple


def deviation_sup_oracle(
    m: MapKind,
    region: Sequence[tuple[float, float]],
    grid_per_axis: int,
    norm_tag: str = "sup",
) -> DeviationSup:
    """Brute-force sup of the midpoint deviation over a gridded box.

    Exhausts all ordered grid pairs; refuses outright when the pair
    count would exceed PAIR_BUDGET.
    """
    region = [(float(lo), float(hi)) for (lo, hi) in region]
    if len(region) != m.dim:
        raise DimensionMismatch(f"region has {len(region)} axes, map has {m.dim}")
    g = int(grid_per_axis)
    if g < 2:
        raise OutOfRange("grid_per_axis must be >= 2")
    if float(g) ** (2 * m.dim) > PAIR_BUDGET:
        raise BudgetExceeded(
            f"{g}^{2 * m.dim} pairs exceed budget {PAIR_BUDGET}"
        )
    axes = [np.linspace(lo, hi, g) for (lo, hi) in region]
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([ax.ravel() for ax in mesh], axis=-1)
    TP = m.forward(P)
    best = -1.0
    best_pair = (P[0], P[0])
    for i in range(P.shape[0] - 1):
        mids = (P[i] + P[i + 1 :]) / 2.0
        dev = norm_of(m.forward(mids) - (TP[i] + TP[i + 1 :]) / 2.0, norm_tag)
        j = int(np.argmax(dev))
        if float(dev[j]) > best:
            best = float(dev[j])
            best_pair = (P[i].copy(), P[i + 1 + j].copy())
    return DeviationSup(
        sup=best,
        argmax_pair=(tuple(best_pair[0]), tuple(best_pair[1])),
    )


@dataclass(frozen=True)
class PairMargin:
    pair_id: int
    d: float
    deviation: float
    bound: float
    margin: float


@dataclass(frozen=True)
class BoundCheckReport:
    rows: tuple
    violations: tuple
    passed: bool
    tol: float


DOMINATION_GRID = tuple(np.geomspace(1e-6, 1e6, 121))


def check_against_bound(
    m: MapKind,
    phi: PerturbationFunction,
    pairs,
    norm_tag: str = "sup",
    tol: float = 1e-9,
    n_max: int = 64,
) -> BoundCheckReport:
    """Compare each pair's midpoint deviation with the optimized bound.

    phi must dominate the map's claimed modulus pointwise, otherwise the
    comparison would be checking the wrong certificate and the call
    raises ModulusMismatch.  A pair violates when its deviation exceeds
    the bound by more than tol.
    """
    M, L = m.claimed_modulus
    for t in DOMINATION_GRID:
        if evaluate(phi, t) < M * t + L - 1e-9 * (1.0 + t):
            raise ModulusMismatch(
                f"phi({t}) = {evaluate(phi, t)} below claimed modulus {M}*t + {L}"
            )
    rows = []
    violations = []
    for pid, (a, b) in enumerate(pairs):
        av, bv = _as_array(a, m.dim), _as_array(b, m.dim)
        d = float(norm_of(av - bv, _tag_of(a, norm_tag)))
        dev = midpoint_deviation(m, av, bv, norm_tag=_tag_of(a, norm_tag))
        if d == 0.0:
            bound = evaluate(phi, 0.0)
        else:
            bound = optimize_bound(phi, d, n_max=n_max).bound
        margin = bound - dev
        rows.append(PairMargin(pair_id=pid, d=d, deviation=dev, bound=bound, margin=margin))
        if margin < -tol:
            violations.append(pid)
    return BoundCheckReport(
        rows=tuple(rows),
        violations=tuple(violations),
        passed=not violations,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# nets and bijection repair


@dataclass(frozen=True)
class NetResult:
    indices: tuple
    min_separation: float
    cover_radius: float


def greedy_separated_net(points, delta0: float, norm_tag: str = "sup") -> NetResult:
    """First-come greedy maximal delta0-separated subset.

    Points are scanned in their given order; one joins the net when it
    is at least delta0 away from everything already in.  Greedy
    maximality means every rejected point is within delta0 of the net.
    """
    delta0 = float(delta0)
    if delta0 <= 0:
        raise OutOfRange("delta0 must be > 0")
    P = _cloud_array(points, _point_dim(points))
    chosen: list[int] = []
    for i in range(P.shape[0]):
        if not chosen:
            chosen.append(i)
            continue
        dists = norm_of(P[chosen] - P[i], norm_tag)
        if float(dists.min()) >= delta0:
            chosen.append(i)
    net = P[chosen]
    if len(chosen) > 1:
        min_sep = min(
            float(norm_of(net[i + 1 :] - net[i], norm_tag).min())
            for i in range(len(chosen) - 1)
        )
    else:
        min_sep = math.inf
    cover = max(
        float(norm_of(net - P[i], norm_tag).min()) for i in range(P.shape[0])
    )
    return NetResult(indices=tuple(chosen), min_separation=min_sep, cover_radius=cover)


def _point_dim(points) -> int:
    if isinstance(points, np.ndarray):
        return points.shape[-1] if points.ndim > 1 else 1
    first = points[0]
    return first.dim if isinstance(first, SpacePoint) else len(np.atleast_1d(first))


@dataclass(frozen=True)
class RepairResult:
    """Bijection table repaired from a possibly collapsing sample map.

    ``assignment[i]`` is the codomain index matched to domain index i.
    The displacement certificate bounds how far any repaired image may
    sit from the original image: 2*delta0 + 2*eps_hat.
    """

    assignment: tuple
    net_indices: tuple
    delta0: float
    eps_hat: float
    displacement_bound: float
    max_displacement: float
    displacements: tuple
    min_net_image_separation: float
    injectivity_floor: float
    displacement_ok: bool
    injectivity_ok: bool

    @property
    def certificate_ok(self) -> bool:
        return self.displacement_ok and self.injectivity_ok


def repair_to_bijection(
    domain,
    codomain,
    map_values,
    delta0: float,
    norm_in: str = "sup",
    norm_out: str = "sup",
) -> RepairResult:
    """Repair a distance-respecting sample map into a bijection.

    Requires equal sample cardinalities and an empirical modulus at the
    separation scale strictly below that scale.  A greedy net of the
    domain pins the skeleton; all remaining points are grouped into
    blocks around the net images and matched greedily by image distance
    within each block, leftovers pooled.  The returned certificate is
    recomputed exhaustively, never assumed.
    """
    delta0 = float(delta0)
    if delta0 <= 0:
        raise OutOfRange("delta0 must be > 0")
    dim = _point_dim(domain)
    X = _cloud_array(domain, dim)
    TX = _cloud_array(map_values, _point_dim(map_values))
    Y = _cloud_array(codomain, TX.shape[-1])
    if X.shape[0] != TX.shape[0]:
        raise CardinalityMismatch("domain and map_values sizes differ")
    if X.shape[0] != Y.shape[0]:
        raise CardinalityMismatch(
            f"|domain| = {X.shape[0]} but |codomain| = {Y.shape[0]}"
        )

    d_in, d_out = _condensed_pair_stats(X, TX, norm_in, norm_out)
    mask = (d_in <= delta0) | (d_out <= delta0)
    eps_hat = float(np.abs(d_out - d_in)[mask].max()) if np.any(mask) else 0.0
    if eps_hat >= delta0:
        raise HypothesisFailed(
            f"eps_hat({delta0}) = {eps_hat} is not below delta0 = {delta0}"
        )

    net = greedy_separated_net(X, delta0, norm_tag=norm_in)
    A = list(net.indices)
    TA = TX[A]

    # blocks keyed by the nearest net image; using image-side proximity for
    # both sides keeps block cardinalities matched when the codomain is the
    # observed image multiset
    x_block = np.array([int(np.argmin(norm_of(TA - TX[i], norm_out))) for i in range(X.shape[0])])
    y_block = np.array([int(np.argmin(norm_of(TA - Y[j], norm_out))) for j in range(Y.shape[0])])

    assignment = [-1] * X.shape[0]
    used_y = [False] * Y.shape[0]
    leftover_x: list[int] = []
    leftover_y: list[int] = []
    for b in range(len(A)):
        xs = [i for i in range(X.shape[0]) if x_block[i] == b]
        ys = [j for j in range(Y.shape[0]) if y_block[j] == b]
        pairs = sorted(
            ((float(norm_of(TX[i] - Y[j], norm_out)), i, j) for i in xs for j in ys),
            key=lambda t: (t[0], t[1], t[2]),
        )
        taken_x = set()
        taken_y = set()
        for dist, i, j in pairs:
            if i in taken_x or j in taken_y:
                continue
            assignment[i] = j
            used_y[j] = True
            taken_x.add(i)
            taken_y.add(j)
        leftover_x.extend(i for i in xs if i not in taken_x)
        leftover_y.extend(j for j in ys if j not in taken_y)

    if leftover_x:
        pairs = sorted(
            ((float(norm_of(TX[i] - Y[j], norm_out)), i, j) for i in leftover_x for j in leftover_y),
            key=lambda t: (t[0], t[1], t[2]),
        )
        taken_x = set()
        taken_y = set()
        for dist, i, j in pairs:
            if i in taken_x or j in taken_y:
                continue
            assignment[i] = j
            taken_x.add(i)
            taken_y.add(j)

    displacements = tuple(
        float(norm_of(TX[i] - Y[assignment[i]], norm_out)) for i in range(X.shape[0])
    )
    bound = 2.0 * delta0 + 2.0 * eps_hat
    max_disp = max(displacements) if displacements else 0.0

    if len(A) > 1:
        min_img_sep = min(
            float(norm_of(TA[i + 1 :] - TA[i], norm_out).min()) for i in range(len(A) - 1)
        )
    else:
        min_img_sep = math.inf
    floor = delta0 - eps_hat

    return RepairResult(
        assignment=tuple(assignment),
        net_indices=tuple(A),
        delta0=delta0,
        eps_hat=eps_hat,
        displacement_bound=bound,
        max_displacement=max_disp,
        displacements=displacements,
        min_net_image_separation=min_img_sep,
        injectivity_floor=floor,
        displacement_ok=max_disp <= bound + 1e-12 * (1.0 + bound),
        injectivity_ok=min_img_sep >= floor - 1e-12 * (1.0 + delta0),
    )


# ---------------------------------------------------------------------------
# random instance helpers


def random_cloud(
    rng: np.random.Generator,
    n: int,
    dim: int,
    low: float = -10.0,
    high: float = 10.0,
) -> np.ndarray:
    return rng.uniform(low, high, size=(int(n), int(dim)))


def random_signed_permutation(rng: np.random.Generator, dim: int) -> SignedPermutation:
    sigma = tuple(int(i) for i in rng.permutation(int(dim)))
    signs = tuple(int(s) for s in rng.choice([-1, 1], size=int(dim)))
    return SignedPermutation(sigma=sigma, signs=signs)
