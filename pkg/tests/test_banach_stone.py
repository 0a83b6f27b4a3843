import math

import numpy as np
import pytest

from isoperturb import errors
from isoperturb.banach_stone import (
    ESCALATION_SCHEDULE,
    M_LIMIT,
    OperatorOracle,
    apply_recovered,
    candidate_set,
    candidate_threshold,
    expansion_gap,
    modulus_check,
    peak_vector,
    recover,
    separation_margin,
    sign_check,
    stability_report,
)
from isoperturb.spaces import (
    Composite,
    CoordinatewiseVestfrid,
    NoisyIsometry,
    SignedPermutation,
    random_signed_permutation,
)


def test_constants_and_closed_forms():
    assert M_LIMIT == pytest.approx(math.sqrt(16.0 / 15.0), rel=1e-15)
    assert candidate_threshold(1.02) == pytest.approx(0.74)
    assert candidate_threshold(1.0) == 1.0
    # the gap between guaranteed response and threshold, and the margin
    # separating true from spurious coordinates
    assert expansion_gap(1.0) == pytest.approx(0.0)
    assert separation_margin(1.0) == pytest.approx(1.0)
    assert separation_margin(M_LIMIT) == pytest.approx(0.0, abs=1e-12)
    for M in np.linspace(1.0, 1.1, 101):
        assert separation_margin(float(M)) == pytest.approx(
            16.0 - 15.0 * float(M) ** 2, abs=1e-12
        )


def test_peak_vector():
    v = peak_vector(4, 2, 3.0, -1)
    assert v.tolist() == [0.0, 0.0, -3.0, 0.0]
    with pytest.raises(errors.IndexOutOfRange):
        peak_vector(4, 5, 1.0, 1)
    with pytest.raises(errors.OutOfRange):
        peak_vector(4, 0, 0.0, 1)
    with pytest.raises(errors.OutOfRange):
        peak_vector(4, 0, 1.0, 2)


def _perm_oracle(sigma, signs, eps=0.02):
    dim = len(sigma)
    p = SignedPermutation(sigma=tuple(sigma), signs=tuple(signs))
    v = CoordinatewiseVestfrid(eps=(eps,) * dim)
    return OperatorOracle.from_map(Composite(parts=(v, p))), p


class TestOracle:
    def test_from_map_carries_claimed_modulus(self):
        oracle, _ = _perm_oracle((1, 0), (1, -1))
        assert oracle.claimed_M == pytest.approx(1.02)
        assert oracle.claimed_L == 0.0
        assert oracle.n_in == oracle.n_out == 2

    def test_eval_shape_checked(self):
        oracle, _ = _perm_oracle((1, 0), (1, 1))
        with pytest.raises(errors.DimensionMismatch):
            oracle.eval(np.zeros(3))

    def test_from_map_requires_fixed_origin(self):
        rng = np.random.default_rng(21)
        base = random_signed_permutation(rng, 3)
        shifted = NoisyIsometry(base=base, amplitude=0.1, seed=4)
        # the random phase displaces the origin
        with pytest.raises(errors.OutOfRange):
            OperatorOracle.from_map(shifted)

    def test_from_table_lookup(self):
        ins = np.array([[1.0, 0.0], [0.0, 1.0]])
        outs = np.array([[0.0, 1.0], [1.0, 0.0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        assert oracle.eval(np.array([1.0, 0.0])).tolist() == [0.0, 1.0]
        with pytest.raises(errors.MissingTableEntry):
            oracle.eval(np.array([2.0, 0.0]))

    def test_from_table_origin_check(self):
        ins = np.array([[0.0, 0.0], [1.0, 0.0]])
        outs = np.array([[0.5, 0.0], [0.0, 1.0]])
        with pytest.raises(errors.OutOfRange):
            OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)


class TestCandidateSets:
    def test_singleton_for_exact_permutation(self):
        oracle, p = _perm_oracle((2, 0, 1), (1, -1, 1))
        D = candidate_threshold(oracle.claimed_M)
        for x in range(3):
            cs = candidate_set(oracle, x, D, 1.0)
            assert cs.singleton
            assert cs.indices == (p.sigma[x],)
            assert cs.sign == p.signs[x]

    def test_empty_for_both_signs(self):
        ins = np.array([[1.0, 0.0], [-1.0, 0.0]])
        outs = np.array([[0.5, 0.0], [-0.5, 0.0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        with pytest.raises(errors.EmptyForBothSigns):
            candidate_set(oracle, 0, 1.0, 1.0)

    def test_ambiguous_when_both_signs_qualify(self):
        ins = np.array([[1.0, 0.0], [-1.0, 0.0]])
        outs = np.array([[1.0, -1.0], [-1.0, 1.0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        cs = candidate_set(oracle, 0, 1.0, 1.0)
        assert cs.ambiguous
        assert not cs.singleton
        assert cs.sign == 0
        assert cs.plus_indices == (0,)
        assert cs.minus_indices == (1,)


class TestRecover:
    def test_exact_recovery_no_noise(self):
        oracle, p = _perm_oracle((3, 1, 0, 2), (-1, 1, 1, -1))
        rec, diag = recover(oracle)
        assert rec.sigma == p.sigma
        assert rec.signs == p.signs
        assert diag.m_used == 1.0
        assert diag.m_escalations == 0
        assert diag.D_used == pytest.approx(candidate_threshold(1.02))
        assert diag.condition_ii_margin == pytest.approx(16.0 - 15.0 * 1.02**2)
        assert len(diag.candidate_sets) == 4

    def test_m_too_large(self):
        oracle, _ = _perm_oracle((1, 0), (1, 1), eps=0.04)
        assert oracle.claimed_M == pytest.approx(1.04)
        with pytest.raises(errors.MTooLarge):
            recover(oracle)

    def test_rectangular_operator_rejected(self):
        ins = np.array([[1.0, 0.0], [-1.0, 0.0]])
        outs = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        with pytest.raises(errors.DimensionMismatch):
            recover(oracle)

    def test_not_bijective(self):
        # both inputs point at output slot 0
        ins = np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]])
        outs = np.array([[1.0, 0], [-1.0, 0], [1.0, 0], [-1.0, 0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        with pytest.raises(errors.NotBijective):
            recover(oracle)

    def test_not_single_valued(self):
        ins = np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]])
        outs = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, 1.0], [-1.0, -1.0]])
        oracle = OperatorOracle.from_table(ins, outs, claimed_M=1.0, claimed_L=0.0)
        with pytest.raises(errors.NotSingleValued):
            recover(oracle)

    def test_escalation_with_additive_noise(self):
        # claimed (M, L) = (1.001, 0.1): the threshold gap 0.013 m only
        # overtakes the noise once m reaches 4
        sigma, signs = (1, 0), (1, -1)
        rows_in, rows_out = [], []
        for m in (1.0, 2.0, 4.0):
            for x in range(2):
                for s in (1.0, -1.0):
                    f = np.zeros(2)
                    f[x] = s * m
                    if m == 1.0:
                        out = np.zeros(2)
                        out[sigma[x]] = 0.9 * s * signs[x]  # too weak, both empty
                    elif m == 2.0:
                        out = np.full(2, 2.0 * s * signs[x])  # spread, not singleton
                    else:
                        out = np.zeros(2)
                        out[sigma[x]] = 4.0 * s * signs[x]
                    rows_in.append(f)
                    rows_out.append(out)
        oracle = OperatorOracle.from_table(
            np.array(rows_in), np.array(rows_out), claimed_M=1.001, claimed_L=0.1
        )
        rec, diag = recover(oracle)
        assert rec.sigma == sigma
        assert rec.signs == signs
        assert diag.m_used == 4.0
        assert diag.m_escalations == 2

    def test_noisy_operator_recovery(self):
        # bounded coordinatewise noise that fixes the origin; claimed
        # modulus (1.004, 0.4) puts the search on the escalation path
        p = SignedPermutation(sigma=(2, 0, 1), signs=(1, -1, -1))

        def fn(f):
            u = p.forward(f)
            return u + 0.2 * np.sin(u)

        oracle = OperatorOracle(
            n_in=3, n_out=3, fn=fn, claimed_M=1.004, claimed_L=0.4, batch_ok=False
        )
        rec, diag = recover(oracle)
        assert rec.sigma == p.sigma
        assert rec.signs == p.signs
        assert diag.m_used in ESCALATION_SCHEDULE


def test_apply_recovered_matches_permutation_forward():
    rng = np.random.default_rng(22)
    p = random_signed_permutation(rng, 5)
    oracle = OperatorOracle.from_map(p)
    rec, _ = recover(oracle)
    f = rng.uniform(-2, 2, size=5)
    assert np.allclose(apply_recovered(rec, f), p.forward(f))


class TestGuarantees:
    def test_stability_exact_permutation(self):
        rng = np.random.default_rng(23)
        p = random_signed_permutation(rng, 4)
        oracle = OperatorOracle.from_map(p)
        rec, _ = recover(oracle)
        samples = rng.uniform(-3, 3, size=(200, 4))
        rep = stability_report(oracle, rec, samples)
        assert rep.passes
        assert rep.sup_excess <= 0.0
        assert rep.delta_hat == 0.0
        assert rep.sample_count == 200

    def test_stability_detects_wrong_recovery(self):
        rng = np.random.default_rng(24)
        p = random_signed_permutation(rng, 4)
        oracle = OperatorOracle.from_map(p)
        rec, _ = recover(oracle)
        wrong = type(rec)(sigma=rec.sigma, signs=tuple(-s for s in rec.signs))
        rep = stability_report(oracle, rec, rng.uniform(-3, 3, size=(50, 4)))
        bad = stability_report(oracle, wrong, rng.uniform(-3, 3, size=(50, 4)))
        assert rep.passes
        assert not bad.passes
        assert bad.delta_hat > 0

    def test_stability_within_allowance_for_expansion(self):
        oracle, _ = _perm_oracle((1, 2, 0), (1, 1, -1), eps=0.025)
        rec, _ = recover(oracle)
        rng = np.random.default_rng(25)
        samples = rng.uniform(-5, 5, size=(500, 3))
        rep = stability_report(oracle, rec, samples)
        assert rep.sup_excess <= 1e-9

    def test_sign_check(self):
        oracle, _ = _perm_oracle((1, 2, 0), (1, 1, -1))
        rec, _ = recover(oracle)
        rng = np.random.default_rng(26)
        for _ in range(10):
            f = rng.uniform(-3, 3, size=3)
            res = sign_check(oracle, rec, f)
            assert res.all_pass
            assert res.threshold == pytest.approx(30.0 * 0.02 * np.max(np.abs(f)))

    def test_modulus_check(self):
        oracle, _ = _perm_oracle((2, 0, 1), (-1, 1, 1))
        rec, _ = recover(oracle)
        rng = np.random.default_rng(27)
        worst = max(
            modulus_check(oracle, rec, rng.uniform(-4, 4, size=3)) for _ in range(20)
        )
        assert worst <= 1e-9

    def test_modulus_check_zero_for_pure_permutation(self):
        rng = np.random.default_rng(28)
        p = random_signed_permutation(rng, 3)
        oracle = OperatorOracle.from_map(p)
        rec, _ = recover(oracle)
        assert modulus_check(oracle, rec, np.array([1.0, -2.0, 0.5])) == 0.0
