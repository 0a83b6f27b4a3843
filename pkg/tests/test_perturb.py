import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoperturb import errors
from isoperturb.perturb import (
    ITERATION_CAP,
    PerturbationFunction,
    check_halving,
    evaluate,
    from_json,
    gap,
    integral_bound_check,
    iterate,
    to_json,
)


def test_identity_is_identity():
    phi = PerturbationFunction.identity()
    for t in (0.0, 1e-9, 1.0, 3.5e8):
        assert evaluate(phi, t) == t


def test_affine_evaluation():
    phi = PerturbationFunction.affine(1.5, 2.0)
    assert evaluate(phi, 4.0) == 8.0
    assert evaluate(phi, 0.0) == 2.0


def test_additive_power_evaluation():
    phi = PerturbationFunction.additive_power(0.5)
    assert evaluate(phi, 4.0) == pytest.approx(6.0)
    # alpha = 0 adds a constant, including at t = 0 where 0^0 counts as 1
    const = PerturbationFunction.additive_power(0.0, 2.5)
    assert evaluate(const, 0.0) == 2.5
    assert evaluate(const, 7.0) == 9.5


def test_tabulated_evaluation_regions():
    phi = PerturbationFunction.tabulated([(1.0, 2.0), (3.0, 4.0), (5.0, 10.0)])
    assert evaluate(phi, 0.2) == 2.0  # held constant below the first knot
    assert evaluate(phi, 2.0) == 3.0  # interpolation
    assert evaluate(phi, 5.0) == 10.0
    assert evaluate(phi, 7.0) == pytest.approx(10.0 + 2.0 * 3.0)  # tail slope 3


def test_tabulated_tail_never_below_identity():
    # flat tail would sink below the identity; the extrapolation floors at slope 1
    phi = PerturbationFunction.tabulated([(1.0, 5.0), (2.0, 5.0)])
    assert evaluate(phi, 100.0) == pytest.approx(5.0 + 98.0)


@pytest.mark.parametrize(
    "bad",
    [
        dict(kind="affine", M=-0.5, L=0.0),
        dict(kind="affine", M=1.0, L=-1.0),
        dict(kind="additive_power", alpha=1.0),
        dict(kind="additive_power", alpha=-0.1),
        dict(kind="additive_power", alpha=0.5, c=0.0),
        dict(kind="nonsense"),
    ],
)
def test_bad_parameters_rejected(bad):
    with pytest.raises(errors.OutOfRange):
        PerturbationFunction(**bad)


def test_bad_tabulated_knots_rejected():
    with pytest.raises(errors.OutOfRange):
        PerturbationFunction.tabulated([(1.0, 1.0)])
    with pytest.raises(errors.OutOfRange):
        PerturbationFunction.tabulated([(2.0, 1.0), (1.0, 2.0)])
    with pytest.raises(errors.OutOfRange):
        PerturbationFunction.tabulated([(1.0, 3.0), (2.0, 1.0)])
    with pytest.raises(errors.NegativeInput):
        PerturbationFunction.tabulated([(-1.0, 1.0), (2.0, 3.0)])
    with pytest.raises(errors.NonFinite):
        PerturbationFunction.tabulated([(1.0, math.inf), (2.0, 3.0)])


def test_negative_and_nonfinite_arguments():
    phi = PerturbationFunction.identity()
    with pytest.raises(errors.NegativeInput):
        evaluate(phi, -1.0)
    with pytest.raises(errors.NonFinite):
        evaluate(phi, math.nan)
    with pytest.raises(errors.NonFinite):
        evaluate(phi, math.inf)


def test_iterate_basics():
    phi = PerturbationFunction.affine(1.0, 1.0)
    assert iterate(phi, 0, 5.0) == 5.0
    assert iterate(phi, 31, 32.0) == 63.0
    with pytest.raises(errors.OutOfRange):
        iterate(phi, -1, 1.0)


def test_iterate_closed_form_huge_depth():
    # the affine closed form has no trouble far beyond the loop cap
    phi = PerturbationFunction.affine(1.0, 2.0)
    m = 2**63 - 1
    assert iterate(phi, m, 1.0) == pytest.approx(1.0 + 2.0 * m, rel=1e-15)


def test_iterate_overflow_raises():
    phi = PerturbationFunction.affine(2.0, 0.0)
    with pytest.raises(errors.PositiveOverflow):
        iterate(phi, 10_000, 1.0)


def test_iterate_loop_cap():
    phi = PerturbationFunction.additive_power(0.5)
    with pytest.raises(errors.CapExceeded):
        iterate(phi, ITERATION_CAP + 1, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    M=st.floats(min_value=1.0, max_value=1.2),
    L=st.floats(min_value=0.0, max_value=5.0),
    m=st.integers(min_value=0, max_value=4000),
    t=st.floats(min_value=0.0, max_value=100.0),
)
def test_affine_closed_form_matches_loop(M, L, m, t):
    phi = PerturbationFunction.affine(M, L)
    val = t
    for _ in range(m):
        val = M * val + L
    if not math.isfinite(val):
        return
    assert iterate(phi, m, t) == pytest.approx(val, rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.floats(min_value=0.0, max_value=0.9),
    a=st.integers(min_value=0, max_value=20),
    b=st.integers(min_value=0, max_value=20),
    t=st.floats(min_value=0.0, max_value=50.0),
)
def test_iterate_is_additive_in_depth(alpha, a, b, t):
    phi = PerturbationFunction.additive_power(alpha)
    lhs = iterate(phi, a + b, t)
    rhs = iterate(phi, a, iterate(phi, b, t))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_gap():
    phi = PerturbationFunction.affine(1.0, 0.75)
    assert gap(phi, 10.0) == pytest.approx(0.75)


class TestHalving:
    def test_builtin_kinds_halve(self):
        for phi in (
            PerturbationFunction.identity(),
            PerturbationFunction.affine(1.3, 2.0),
            PerturbationFunction.additive_power(0.5, 2.0),
            PerturbationFunction.additive_power(0.0, 1.0),
        ):
            assert check_halving(phi).ok

    def test_tabulated_violation_located(self):
        phi = PerturbationFunction.tabulated([(1.0, 1.0), (2.0, 10.0)])
        res = check_halving(phi, grid=[1.0, 2.0])
        assert not res.ok
        assert res.first_violation == 2.0

    def test_empty_grid_rejected(self):
        with pytest.raises(errors.OutOfRange):
            check_halving(PerturbationFunction.identity(), grid=[])


class TestIntegralCertificate:
    def test_constant_gap_is_equality(self):
        phi = PerturbationFunction.affine(1.0, 0.5)
        for n in (1, 3, 10):
            res = integral_bound_check(phi, 2.0, n)
            assert res.passed
            assert res.integral == pytest.approx(n, abs=1e-7)

    def test_growing_gap_is_strict(self):
        phi = PerturbationFunction.affine(1.2, 1.0)
        res = integral_bound_check(phi, 1.0, 5)
        assert res.passed
        assert res.integral < 5.0

    def test_vanishing_gap_raises(self):
        with pytest.raises(errors.EpsVanishes):
            integral_bound_check(PerturbationFunction.identity(), 1.0, 3)

    def test_power_gap_certificate(self):
        phi = PerturbationFunction.additive_power(0.5, 1.5)
        res = integral_bound_check(phi, 0.5, 8)
        assert res.passed

    def test_tabulated_gap_certificate(self):
        phi = PerturbationFunction.tabulated([(0.0, 1.0), (2.0, 3.5), (4.0, 6.0)])
        res = integral_bound_check(phi, 1.0, 4)
        assert res.passed


def test_json_round_trip():
    cases = [
        PerturbationFunction.identity(),
        PerturbationFunction.affine(1.05, 3.0),
        PerturbationFunction.additive_power(0.25, 2.0),
        PerturbationFunction.tabulated([(0.0, 0.5), (1.0, 2.0), (4.0, 9.0)]),
    ]
    for phi in cases:
        assert from_json(to_json(phi)) == phi
    with pytest.raises(errors.OutOfRange):
        from_json({"kind": "mystery"})
