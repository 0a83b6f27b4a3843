"""Recovering a signed permutation from a perturbed sup-norm operator.

Setting: T maps R^n to R^n (functions on n points under the sup norm),
fixes the origin, and distorts distances by at most M*t + L with M close
to 1.  Classically an exact isometry of this kind is a weighted
composition; here T is only approximately one, and we recover the
underlying coordinate bijection sigma and sign pattern lambda by probing
T with scaled coordinate peaks.

The probe logic: feed T the peak s*m*e_x and its negation, and collect
output slots where the response is at least D*m for the peak and at most
-D*m for the negation, with D = 14 - 13*M.  For M below sqrt(16/15) the
algebraic separation margin 16 - 15*M^2 is positive and the candidate
slot is unique once m is large enough relative to L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConditionIIViolated,
    DimensionMismatch,
    EmptyForBothSigns,
    IndexOutOfRange,
    MissingTableEntry,
    MTooLarge,
    NotBijective,
    NotSingleValued,
    OutOfRange,
)
from .spaces import MapKind

__all__ = [
    "M_LIMIT",
    "STABILITY_COEFF",
    "SIGN_COEFF",
    "MODULUS_COEFF",
    "candidate_threshold",
    "expansion_gap",
    "separation_margin",
    "OperatorOracle",
    "peak_vector",
    "CandidateSet",
    "candidate_set",
    "RecoveredIsometry",
    "RecoveryDiagnostics",
    "recover",
    "apply_recovered",
    "StabilityReport",
    "stability_report",
    "SignCheckResult",
    "sign_check",
    "modulus_check",
    "ESCALATION_SCHEDULE",
]

# Recovery threshold on the claimed expansion constant.
M_LIMIT = math.sqrt(16.0 / 15.0)

# Coefficients of the closed-form guarantees tied to the recovery scheme.
STABILITY_COEFF = 76.0
SIGN_COEFF = 30.0
MODULUS_COEFF = 15.0

ESCALATION_SCHEDULE = tuple(2**j for j in range(21))

_SLACK = 1e-12


def candidate_threshold(M: float) -> float:
    """D = 14 - 13*M, the relative response level that flags a peak's slot."""
    return 14.0 - 13.0 * float(M)


def expansion_gap(M: float) -> float:
    """2*M - 1 - D, the slack the probe inequalities leave; equals 15*(M-1)."""
    return 2.0 * float(M) - 1.0 - candidate_threshold(M)


def separation_margin(M: float) -> float:
    """1 - gap*M - gap, positive exactly when M < sqrt(16/15)."""
    g = expansion_gap(M)
    return 1.0 - g * float(M) - g


@dataclass(frozen=True)
class OperatorOracle:
    """Black-box access to T plus its claimed modulus constants.

    ``fn`` takes one input vector of length n_in and returns one output
    vector of length n_out; set batch_ok when fn also accepts stacked
    inputs of shape (..., n_in).
    """

    n_in: int
    n_out: int
    fn: Callable[[np.ndarray], np.ndarray]
    claimed_M: float
    claimed_L: float
    batch_ok: bool = False

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise DimensionMismatch("operator dimensions must be >= 1")
        if self.claimed_M < 1.0:
            raise OutOfRange("claimed_M must be >= 1")
        if self.claimed_L < 0.0:
            raise OutOfRange("claimed_L must be >= 0")

    def eval(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_in,):
            raise DimensionMismatch(f"expected shape ({self.n_in},), got {f.shape}")
        out = np.asarray(self.fn(f), dtype=float)
        if out.shape != (self.n_out,):
            raise DimensionMismatch(f"operator returned shape {out.shape}")
        return out

    def eval_batch(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            return self.eval(F)
        if self.batch_ok:
            out = np.asarray(self.fn(F), dtype=float)
            if out.shape != F.shape[:-1] + (self.n_out,):
                raise DimensionMismatch(f"operator returned shape {out.shape}")
            return out
        return np.stack([self.eval(row) for row in F.reshape(-1, self.n_in)]).reshape(
            F.shape[:-1] + (self.n_out,)
        )

    @classmethod
    def from_map(
        cls,
        m: MapKind,
        claimed_M: Optional[float] = None,
        claimed_L: Optional[float] = None,
    ) -> "OperatorOracle":
        M, L = m.claimed_modulus
        oracle = cls(
            n_in=m.dim,
            n_out=m.dim,
            fn=m.forward,
            claimed_M=float(M if claimed_M is None else claimed_M),
            claimed_L=float(L if claimed_L is None else claimed_L),
            batch_ok=True,
        )
        origin = oracle.eval(np.zeros(m.dim))
        if float(np.max(np.abs(origin))) > 1e-10:
            raise OutOfRange("operator must fix the origin")
        return oracle

    @classmethod
    def from_table(
        cls,
        inputs,
        outputs,
        claimed_M: float,
        claimed_L: float,
        lookup_tol: float = 1e-9,
    ) -> "OperatorOracle":
        inputs = np.asarray(inputs, dtype=float)
        outputs = np.asarray(outputs, dtype=float)
        if inputs.ndim != 2 or outputs.ndim != 2 or inputs.shape[0] != outputs.shape[0]:
            raise DimensionMismatch("tabulated oracle needs matching 2d input/output arrays")

        def lookup(f: np.ndarray) -> np.ndarray:
            hits = np.max(np.abs(inputs - f), axis=1) <= lookup_tol
            idx = np.flatnonzero(hits)
            if idx.size == 0:
                raise MissingTableEntry(f"no tabulated row for input {f.tolist()}")
            return outputs[idx[0]]

        oracle = cls(
            n_in=inputs.shape[1],
            n_out=outputs.shape[1],
            fn=lookup,
            claimed_M=float(claimed_M),
            claimed_L=float(claimed_L),
            batch_ok=False,
        )
        zero_rows = np.flatnonzero(np.max(np.abs(inputs), axis=1) <= lookup_tol)
        if zero_rows.size and float(np.max(np.abs(outputs[zero_rows[0]]))) > 1e-10:
            raise OutOfRange("operator must fix the origin")
        return oracle


def peak_vector(n: int, x: int, m: float, sign: int) -> np.ndarray:
    """sign * m * e_x in R^n."""
    n = int(n)
    x = int(x)
    if not 0 <= x < n:
        raise IndexOutOfRange(f"coordinate {x} outside 0..{n - 1}")
    if sign not in (-1, 1):
        raise OutOfRange("sign must be +1 or -1")
    m = float(m)
    if not (m > 0 and math.isfinite(m)):
        raise OutOfRange("peak height m must be finite and > 0")
    v = np.zeros(n)
    v[x] = sign * m
    return v


@dataclass(frozen=True)
class CandidateSet:
    """Output slots responding like the image of coordinate x's peak."""

    x: int
    m: float
    sign: int
    indices: tuple
    ambiguous: bool
    plus_indices: tuple
    minus_indices: tuple

    @property
    def singleton(self) -> bool:
        return not self.ambiguous and len(self.indices) == 1


def candidate_set(oracle: OperatorOracle, x: int, D: float, m: float) -> CandidateSet:
    """Probe coordinate x at height m and classify responding output slots.

    For each sign s, a slot y qualifies when T(s*m*e_x)(y) >= D*m and
    T(-s*m*e_x)(y) <= -D*m.  Exactly one sign should respond; if both
    do, the result is flagged ambiguous, and if neither does the call
    raises EmptyForBothSigns (the peak height is then too small for the
    noise level).
    """
    D = float(D)
    if D <= 0:
        raise OutOfRange("threshold D must be > 0")
    t_plus = oracle.eval(peak_vector(oracle.n_in, x, m, +1))
    t_minus = oracle.eval(peak_vector(oracle.n_in, x, m, -1))
    level = D * float(m)
    slack = _SLACK * max(1.0, float(m))
    plus = np.flatnonzero((t_plus >= level - slack) & (t_minus <= -level + slack))
    minus = np.flatnonzero((t_minus >= level - slack) & (t_plus <= -level + slack))
    plus_t = tuple(int(i) for i in plus)
    minus_t = tuple(int(i) for i in minus)
    if not plus_t and not minus_t:
        raise EmptyForBothSigns(f"no responding slot for coordinate {x} at m={m}")
    if plus_t and minus_t:
        return CandidateSet(
            x=x, m=float(m), sign=0, indices=(), ambiguous=True,
            plus_indices=plus_t, minus_indices=minus_t,
        )
    sign = 1 if plus_t else -1
    idx = plus_t if plus_t else minus_t
    return CandidateSet(
        x=x, m=float(m), sign=sign, indices=idx, ambiguous=False,
        plus_indices=plus_t, minus_indices=minus_t,
    )


@dataclass(frozen=True)
class RecoveredIsometry:
    """sigma[i] is the output slot of input coordinate i; signs[i] its sign."""

    sigma: tuple
    signs: tuple

    def __post_init__(self):
        if len(self.sigma) != len(self.signs):
            raise DimensionMismatch("sigma and signs must have equal length")


@dataclass(frozen=True)
class RecoveryDiagnostics:
    D_used: float
    m_used: float
    m_escalations: int
    condition_ii_margin: float
    candidate_sets: tuple


def apply_recovered(rec: RecoveredIsometry, f) -> np.ndarray:
    """Evaluate the recovered weighted coordinate bijection on f."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[..., list(rec.sigma)] = f * np.asarray(rec.signs)
    return out


def recover(
    oracle: OperatorOracle,
    schedule: tuple = ESCALATION_SCHEDULE,
) -> tuple[RecoveredIsometry, RecoveryDiagnostics]:
    """Identify the signed coordinate bijection behind the operator.

    Probes every input coordinate; when the claimed modulus has L > 0
    the peak height escalates geometrically until every candidate set is
    a singleton and the assembled assignment is a bijection.  Raises
    MTooLarge when the claimed expansion constant is at or beyond
    sqrt(16/15), where uniqueness is no longer guaranteed.
    """
    M = oracle.claimed_M
    if M >= M_LIMIT:
        raise MTooLarge(f"claimed_M = {M} >= {M_LIMIT}")
    if oracle.n_in != oracle.n_out:
        raise DimensionMismatch(
            f"recovery requires square operators, got {oracle.n_in} -> {oracle.n_out}"
        )
    margin = separation_margin(M)
    if margin <= 0:
        raise ConditionIIViolated(f"separation margin {margin} <= 0")
    D = candidate_threshold(M)
    heights = (1.0,) if oracle.claimed_L == 0.0 else tuple(float(m) for m in schedule)

    last_failure = "empty"
    for esc, m in enumerate(heights):
        sets = []
        ok = True
        for x in range(oracle.n_in):
            try:
                cs = candidate_set(oracle, x, D, m)
            except EmptyForBothSigns:
                ok = False
                last_failure = "empty"
                break
            sets.append(cs)
            if not cs.singleton:
                ok = False
                last_failure = "ambiguous" if cs.ambiguous else "multi"
                break
        if not ok:
            continue
        sigma = tuple(cs.indices[0] for cs in sets)
        if sorted(sigma) != list(range(oracle.n_in)):
            last_failure = "not_bijective"
            continue
        rec = RecoveredIsometry(sigma=sigma, signs=tuple(cs.sign for cs in sets))
        diag = RecoveryDiagnostics(
            D_used=D,
            m_used=float(m),
            m_escalations=esc,
            condition_ii_margin=margin,
            candidate_sets=tuple(sets),
        )
        return rec, diag

    if last_failure == "not_bijective":
        raise NotBijective("candidate assignment never became a bijection")
    raise NotSingleValued(
        f"candidate sets never became singletons (last failure: {last_failure})"
    )


@dataclass(frozen=True)
class StabilityReport:
    sup_excess: float
    delta_hat: float
    coeff: float
    sample_count: int
    passes: bool


def stability_report(
    oracle: OperatorOracle,
    rec: RecoveredIsometry,
    samples,
    tol: float = 1e-9,
) -> StabilityReport:
    """Sup over samples of ||Tf - If|| - 76*(M-1)*||f||, sup norms throughout.

    delta_hat is the positive part of that sup: the additive residue the
    recovered isometry cannot explain.  With claimed_L = 0 the report
    passes only when the residue is numerically zero.
    """
    F = np.asarray(samples, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    TF = oracle.eval_batch(F)
    IF = apply_recovered(rec, F)
    allowance = STABILITY_COEFF * (oracle.claimed_M - 1.0) * np.max(np.abs(F), axis=-1)
    excess = np.max(np.abs(TF - IF), axis=-1) - allowance
    sup_excess = float(np.max(excess))
    delta_hat = max(0.0, sup_excess)
    passes = sup_excess <= tol if oracle.claimed_L == 0.0 else True
    return StabilityReport(
        sup_excess=sup_excess,
        delta_hat=delta_hat,
        coeff=STABILITY_COEFF,
        sample_count=int(F.shape[0]),
        passes=passes,
    )


@dataclass(frozen=True)
class SignCheckResult:
    threshold: float
    qualified: tuple
    passes: tuple
    all_pass: bool


def sign_check(oracle: OperatorOracle, rec: RecoveredIsometry, f) -> SignCheckResult:
    """Check sign agreement at coordinates carrying enough of the sup norm.

    Coordinates with |f(x)| > 30*(M-1)*||f|| must satisfy
    sign(Tf(sigma(x))) == sign(lambda(x) * f(x)).  Smaller coordinates
    are skipped; the perturbation can legitimately flip them.
    """
    f = np.asarray(f, dtype=float)
    Tf = oracle.eval(f)
    thr = SIGN_COEFF * (oracle.claimed_M - 1.0) * float(np.max(np.abs(f)))
    qualified = [x for x in range(oracle.n_in) if abs(f[x]) > thr]
    passes = []
    for x in qualified:
        expected = math.copysign(1.0, rec.signs[x] * f[x])
        got = Tf[rec.sigma[x]]
        passes.append(got != 0.0 and math.copysign(1.0, got) == expected)
    return SignCheckResult(
        threshold=thr,
        qualified=tuple(qualified),
        passes=tuple(passes),
        all_pass=all(passes),
    )


def modulus_check(oracle: OperatorOracle, rec: RecoveredIsometry, f) -> float:
    """Worst violation of | |Tf(sigma(x))| - |f(x)| | <= 15*(M^2-M)*||f||.

    Returns the signed worst excess; non-positive means the inequality
    holds at every coordinate.
    """
    f = np.asarray(f, dtype=float)
    Tf = oracle.eval(f)
    allowance = (
        MODULUS_COEFF
        * (oracle.claimed_M**2 - oracle.claimed_M)
        * float(np.max(np.abs(f)))
    )
    worst = -math.inf
    for x in range(oracle.n_in):
        worst = max(worst, abs(abs(Tf[rec.sigma[x]]) - abs(f[x])) - allowance)
    return float(worst)
