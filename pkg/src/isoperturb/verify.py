"""End-to-end verification suite.

Each criterion is a self-contained experiment that exercises the public
API and reports pass/fail with a short diagnostic string.  The test
suite and the command line both run these through `run_suite`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import banach_stone, bounds, keps, perturb, spaces

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_suite", "DEFAULT_SEED"]

DEFAULT_SEED = 20260816


@dataclass(frozen=True)
class CriterionResult:
    cid: int
    name: str
    passed: bool
    detail: str


# ---------------------------------------------------------------------------
# helpers

def _vestfrid_map(rng: np.random.Generator, dim: int) -> spaces.CoordinatewiseVestfrid:
    eps = tuple(float(e) for e in rng.uniform(0.005, 0.15, size=dim))
    return spaces.CoordinatewiseVestfrid(eps=eps)


def _random_map(rng: np.random.Generator):
    """One surjective perturbed isometry plus an honest dominating modulus."""
    kind = int(rng.integers(0, 3))
    if kind == 0:
        e = float(rng.uniform(0.01, 0.18))
        m = spaces.Vestfrid1D(eps=e)
        return m, perturb.PerturbationFunction.affine(1.0 + e, 0.0)
    if kind == 1:
        dim = int(rng.integers(2, 9))
        m = _vestfrid_map(rng, dim)
        return m, perturb.PerturbationFunction.affine(1.0 + max(m.eps), 0.0)
    dim = int(rng.integers(2, 9))
    base = spaces.random_signed_permutation(rng, dim)
    amp = float(rng.uniform(0.01, 0.2))
    m = spaces.NoisyIsometry(base=base, amplitude=amp, seed=int(rng.integers(2**31)))
    return m, perturb.PerturbationFunction.affine(1.0, 2.0 * amp)


# ---------------------------------------------------------------------------
# criteria

def _c1_midpoint_soundness(seed: int) -> CriterionResult:
    rng = np.random.default_rng([seed, 1])
    n_maps, n_pairs = 50, 1000
    worst = math.inf
    total = 0
    violations = 0
    for _ in range(n_maps):
        m, phi = _random_map(rng)
        pts = spaces.random_cloud(rng, 2 * n_pairs, m.dim, -10.0, 10.0)
        pairs = [(tuple(pts[2 * i]), tuple(pts[2 * i + 1])) for i in range(n_pairs)]
        report = spaces.check_against_bound(m, phi, pairs, norm_tag="sup", tol=1e-9)
        total += len(report.rows)
        violations += len(report.violations)
        worst = min(worst, min(r.margin for r in report.rows))
    passed = violations == 0
    return CriterionResult(
        1,
        "midpoint_soundness",
        passed,
        f"{n_maps} maps x {n_pairs} pairs, {violations}/{total} violations, "
        f"worst margin {worst:.3e}",
    )


def _c2_additive_schedule(seed: int) -> CriterionResult:
    checks = []
    for L in (0.1, 1.0, 10.0):
        phi = perturb.PerturbationFunction.affine(1.0, L)
        for d in np.geomspace(1.0, 1e9, 19):
            opt = bounds.optimize_bound(phi, float(d))
            hs = bounds.hyers_ulam_bound(L, float(d))
            env = (2.0 + L) * math.sqrt(d) + (1.0 + L)
            checks.append(opt.bound <= hs.bound + 1e-12)
            checks.append(hs.bound <= env + 1e-9)
    hs = bounds.hyers_ulam_bound(1.0, 1024.0)
    exact = hs.bound == 63.0 and hs.n == 4
    checks.append(exact)
    # closed-form affine iterate against the literal 31-fold composition
    phi = perturb.PerturbationFunction.affine(1.0, 1.0)
    val = 32.0
    for _ in range(31):
        val = phi(val)
    closed = perturb.iterate(phi, 31, 32.0)
    checks.append(abs(closed - val) <= 1e-9 * max(1.0, abs(val)))
    passed = all(checks)
    return CriterionResult(
        2,
        "additive_schedule",
        passed,
        f"{len(checks)} comparisons, d=1024 L=1 gives {hs.bound:g} at depth {hs.n}",
    )


def _c3_gap_integral(seed: int) -> CriterionResult:
    rng = np.random.default_rng([seed, 3])
    n_checks = 100
    failures = 0
    worst_excess = -math.inf
    eq_err = 0.0
    for i in range(n_checks):
        kind = int(rng.integers(0, 3))
        t = float(rng.uniform(0.1, 5.0))
        n = int(rng.integers(1, 13))
        if kind == 0:
            phi = perturb.PerturbationFunction.affine(
                float(rng.uniform(1.0, 1.3)), float(rng.uniform(0.1, 3.0))
            )
        elif kind == 1:
            phi = perturb.PerturbationFunction.affine(1.0, float(rng.uniform(0.1, 3.0)))
        else:
            phi = perturb.PerturbationFunction.additive_power(
                float(rng.uniform(0.0, 0.9)), float(rng.uniform(0.2, 3.0))
            )
        res = perturb.integral_bound_check(phi, t, n)
        worst_excess = max(worst_excess, res.integral - n)
        if not res.passed:
            failures += 1
        if kind == 1:
            # constant gap: the certificate is an equality
            eq_err = max(eq_err, abs(res.integral - n))
    passed = failures == 0 and eq_err <= 1e-6
    return CriterionResult(
        3,
        "gap_integral",
        passed,
        f"{n_checks} certificates, {failures} over budget, worst excess "
        f"{worst_excess:.2e}, constant-gap equality error {eq_err:.2e}",
    )


def _c4_bilip_domination(seed: int) -> CriterionResult:
    checks = 0
    bad = 0
    for e in np.linspace(0.005, 0.195, 20):
        for L in (0.0, 1.0, 10.0):
            phi = perturb.PerturbationFunction.affine(1.0 + float(e), L)
            for d in np.geomspace(1.0, 1e6, 13):
                opt = bounds.optimize_bound(phi, float(d))
                ref = bounds.bilip_bound(float(e), L, float(d))
                checks += 1
                if opt.bound > ref + 1e-9:
                    bad += 1
    phi = perturb.PerturbationFunction.affine(1.1, 0.0)
    cand = bounds.midpoint_bound(phi, 100.0, 2)
    ref = bounds.bilip_bound(0.1, 0.0, 100.0)
    spot = abs(cand - 24.3589638) <= 1e-6 and cand < ref and abs(ref - 30.0) <= 1e-9
    passed = bad == 0 and spot
    return CriterionResult(
        4,
        "bilip_domination",
        passed,
        f"{checks} grid points, {bad} above closed form; depth-2 sample "
        f"{cand:.7f} < {ref:g}",
    )


def _c5_kink_family(seed: int) -> CriterionResult:
    checks = []
    # measured two-point deviation ratio at eps = 0.1
    m = spaces.Vestfrid1D(eps=0.1)
    dev = spaces.midpoint_deviation(m, (-1.0,), (1.0,), norm_tag="sup")
    measured = dev / (0.1 * 2.0)
    checks.append(abs(measured - keps.vestfrid_ratio(0.1)) <= 1e-9)
    # the same ratio from a brute-force sweep over a box
    sup = spaces.deviation_sup_oracle(m, [(-5.0, 5.0)], 101, norm_tag="sup")
    checks.append(abs(sup.sup - 5.0 * (1.1 - 1.0 / 1.1) / 2.0) <= 1e-9)
    # eps -> 0 limit of the ratio is 1/2
    for e in (0.1, 0.05, 0.01, 0.001):
        me = spaces.Vestfrid1D(eps=e)
        de = spaces.midpoint_deviation(me, (-1.0,), (1.0,), norm_tag="sup")
        checks.append(abs(de / (e * 2.0) - keps.vestfrid_ratio(e)) <= 1e-9)
    checks.append(abs(keps.vestfrid_ratio(0.001) - 0.5) <= 1e-3)
    # searched ratios stay within the proved caps and never lose to the kink
    caps_ok = keps.upper_bounds(0.1) == (3.0, math.e)
    checks.append(caps_ok)
    found = []
    for e in (0.1, 0.05):
        inst = keps.search_lower_bound(e, knots=3, budget=120, seed=seed)
        found.append(inst.ratio)
        checks.append(inst.ratio <= 3.0 + 1e-9)
        checks.append(inst.ratio >= keps.vestfrid_ratio(e) - 1e-9)
    passed = all(checks)
    return CriterionResult(
        5,
        "kink_family",
        passed,
        f"two-point ratio {measured:.9f}, searched {found[0]:.4f}/{found[1]:.4f} "
        f"within [kink, 3]",
    )


def _recovery_instances(seed: int, count: int):
    rng = np.random.default_rng([seed, 6])
    dims = (2, 4, 8, 16, 32, 64)
    out = []
    for i in range(count):
        dim = dims[i % len(dims)]
        p = spaces.random_signed_permutation(rng, dim)
        eps = tuple(float(e) for e in rng.uniform(0.001, 0.029, size=dim))
        v = spaces.CoordinatewiseVestfrid(eps=eps)
        t = spaces.Composite(parts=(v, p))
        oracle = banach_stone.OperatorOracle.from_map(t)
        out.append((oracle, p, rng))
    return out


def _c6_recovery_roundtrip(seed: int) -> CriterionResult:
    instances = _recovery_instances(seed, 200)
    wrong = 0
    stab_fail = 0
    worst_ratio_excess = -math.inf
    for oracle, p, rng in instances:
        rec, diag = banach_stone.recover(oracle)
        if rec.sigma != p.sigma or rec.signs != p.signs:
            wrong += 1
            continue
        samples = rng.uniform(-5.0, 5.0, size=(1000, oracle.n_in))
        rep = banach_stone.stability_report(oracle, rec, samples)
        if not rep.passes:
            stab_fail += 1
        tf = oracle.eval_batch(samples)
        if_ = banach_stone.apply_recovered(rec, samples)
        num = np.max(np.abs(tf - if_), axis=1)
        den = np.max(np.abs(samples), axis=1)
        ratio = float(np.max(num / den))
        allowed = banach_stone.STABILITY_COEFF * (oracle.claimed_M - 1.0)
        worst_ratio_excess = max(worst_ratio_excess, ratio - allowed)
    passed = wrong == 0 and stab_fail == 0 and worst_ratio_excess <= 1e-9
    return CriterionResult(
        6,
        "recovery_roundtrip",
        passed,
        f"{len(instances)} instances, {wrong} misrecovered, {stab_fail} stability "
        f"failures, worst ratio excess {worst_ratio_excess:.2e}",
    )


def _c7_sign_and_modulus(seed: int) -> CriterionResult:
    # same generator and seed as criterion 6, so these are the first 40
    # instances of that family
    instances = _recovery_instances(seed, 40)
    sign_fail = 0
    worst_mod = -math.inf
    for oracle, p, rng in instances:
        rec, _ = banach_stone.recover(oracle)
        for _ in range(5):
            f = rng.uniform(-3.0, 3.0, size=oracle.n_in)
            sc = banach_stone.sign_check(oracle, rec, f)
            if not sc.all_pass:
                sign_fail += 1
            mc = banach_stone.modulus_check(oracle, rec, f)
            worst_mod = max(worst_mod, mc)
    passed = sign_fail == 0 and worst_mod <= 1e-9
    return CriterionResult(
        7,
        "sign_and_modulus",
        passed,
        f"{len(instances)} instances x 5 samples, {sign_fail} sign failures, "
        f"worst modulus excess {worst_mod:.2e}",
    )


def _c8_margin_identity(seed: int) -> CriterionResult:
    grid = np.linspace(1.0, 1.1, 1001)
    worst = max(
        abs(banach_stone.separation_margin(float(m)) - (16.0 - 15.0 * float(m) ** 2))
        for m in grid
    )
    root = brentq(banach_stone.separation_margin, 1.0, 1.1, xtol=1e-13)
    root_err = abs(root - banach_stone.M_LIMIT)
    passed = worst <= 1e-12 and root_err <= 1e-9
    return CriterionResult(
        8,
        "margin_identity",
        passed,
        f"identity error {worst:.2e} over 1001 points, zero crossing off by "
        f"{root_err:.2e}",
    )


def _c9_bijection_repair(seed: int) -> CriterionResult:
    rng = np.random.default_rng([seed, 9])
    n_instances = 50
    failures = 0
    collapsed = 0
    worst_slack = math.inf
    for i in range(n_instances):
        dim = 2 if i % 10 == 9 else 1
        n = int(rng.integers(60, 121))
        dom = spaces.random_cloud(rng, n, dim, -5.0, 5.0)
        eps = tuple(float(e) for e in rng.uniform(0.0, 0.02, size=dim))
        base = spaces.CoordinatewiseVestfrid(eps=eps)
        q = float(rng.uniform(0.02, 0.08))
        img = q * np.floor(base.forward(dom) / q)
        domain = [tuple(map(float, row)) for row in dom]
        values = [tuple(map(float, row)) for row in img]
        if len(set(values)) < len(values):
            collapsed += 1
        res = spaces.repair_to_bijection(
            domain, list(values), values, delta0=0.5, norm_in="sup", norm_out="sup"
        )
        if not (res.displacement_ok and res.injectivity_ok):
            failures += 1
        worst_slack = min(worst_slack, res.displacement_bound - res.max_displacement)
    passed = failures == 0 and collapsed > 0
    return CriterionResult(
        9,
        "bijection_repair",
        passed,
        f"{n_instances} instances ({collapsed} with genuine collapses), "
        f"{failures} certificate failures, tightest slack {worst_slack:.3f}",
    )


def _c10_power_growth(seed: int) -> CriterionResult:
    worst = 0.0
    slopes = []
    for alpha in (0.0, 0.25, 0.5, 0.75):
        ds = np.geomspace(1e3, 1e9, 25)
        vals = [bounds.power_alpha_bound(alpha, float(d)).bound for d in ds]
        slope = float(np.polyfit(np.log(ds), np.log(vals), 1)[0])
        slopes.append(slope)
        worst = max(worst, abs(slope - 1.0 / (2.0 - alpha)))
    passed = worst <= 0.05
    return CriterionResult(
        10,
        "power_growth",
        passed,
        "log-log slopes " + "/".join(f"{s:.4f}" for s in slopes) +
        f", worst drift {worst:.4f}",
    )


CRITERIA: Sequence[tuple[int, str, Callable[[int], CriterionResult]]] = (
    (1, "midpoint_soundness", _c1_midpoint_soundness),
    (2, "additive_schedule", _c2_additive_schedule),
    (3, "gap_integral", _c3_gap_integral),
    (4, "bilip_domination", _c4_bilip_domination),
    (5, "kink_family", _c5_kink_family),
    (6, "recovery_roundtrip", _c6_recovery_roundtrip),
    (7, "sign_and_modulus", _c7_sign_and_modulus),
    (8, "margin_identity", _c8_margin_identity),
    (9, "bijection_repair", _c9_bijection_repair),
    (10, "power_growth", _c10_power_growth),
)

_BY_ID = {cid: fn for cid, _, fn in CRITERIA}
_BY_NAME = {name: cid for cid, name, _ in CRITERIA}

# module-themed shortcuts for subset runs, e.g. --only bounds
GROUPS = {
    "perturb": (3,),
    "bounds": (2, 4, 10),
    "spaces": (1, 9),
    "banach_stone": (6, 7, 8),
    "keps": (5,),
}


def _resolve(key) -> list[int]:
    """Map an id, criterion name, digit string, or group name to criterion ids."""
    if isinstance(key, int):
        if key in _BY_ID:
            return [key]
    else:
        s = str(key)
        if s in _BY_NAME:
            return [_BY_NAME[s]]
        if s in GROUPS:
            return list(GROUPS[s])
        if s.isdigit() and int(s) in _BY_ID:
            return [int(s)]
    raise KeyError(f"unknown criterion {key!r}")


def run_criterion(cid, seed: Optional[int] = None) -> CriterionResult:
    """Run one criterion by numeric id or name."""
    if seed is None:
        seed = DEFAULT_SEED
    key = cid if isinstance(cid, int) else _BY_NAME.get(str(cid))
    fn = _BY_ID.get(key)
    if fn is None:
        raise KeyError(f"unknown criterion {cid!r}")
    return fn(seed)


def run_suite(only=None, seed: Optional[int] = None) -> list[CriterionResult]:
    """Run all criteria, or the subset in `only` (ids, names, or group names)."""
    if seed is None:
        seed = DEFAULT_SEED
    if only is None:
        cids = [cid for cid, _, _ in CRITERIA]
    else:
        cids = []
        for key in only:
            for cid in _resolve(key):
                if cid not in cids:
                    cids.append(cid)
    return [_BY_ID[cid](seed) for cid in cids]
