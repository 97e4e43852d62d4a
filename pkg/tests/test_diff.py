import numpy as np
import pytest

import cert
import diff
from core import ModMap, SampleGrid, a_grid
from errors import ParameterError, PreconditionError
from tests.helpers import function, modmap

SAMPLE = dict(s=1.0, m1=[0.0], m2=[1.0], a=0.5)


def test_gradient_examples():
    np.testing.assert_allclose(diff.gradient(function("x1^2", [[0, 2]]), [1.0]).values, [2.0])
    paraboloid = function("x1^2 + x2^2", [[0, 3], [0, 3]])
    result = diff.gradient(paraboloid, [1.0, 2.0])
    np.testing.assert_allclose(result.values, [2.0, 4.0])
    assert result.smooth


def test_dual_and_central_gradients_agree():
    rng = np.random.default_rng(17)
    Q = function("exp(x1) * x2 + log(1 + x2^2) - x1^3", [[-1, 1], [-1, 1]])
    for _ in range(50):
        m = rng.uniform(-0.9, 0.9, size=2)
        dual = diff.gradient(Q, m).values
        central = diff.gradient(Q, m, method="central").values
        np.testing.assert_allclose(dual, central, rtol=1e-6, atol=1e-9)


def test_central_gradient_needs_room_inside_domain(square):
    with pytest.raises(ParameterError):
        diff.gradient(square, [1.0], method="central")
    with pytest.raises(ParameterError):
        diff.gradient(square, [0.5], method="secant")


def test_gradient_flags_kinks(caplog):
    result = diff.gradient(function("abs(x1)", [[-1, 1]]), [0.0])
    assert not result.smooth
    assert "kink" in caplog.text


def test_nonnegative_bounds_example(square, zero_g):
    bounds = diff.check_nonnegative_bounds(square, zero_g, **SAMPLE)
    assert bounds.lhs == pytest.approx(-2.0)
    assert bounds.rhs_i == pytest.approx(3.297443, abs=1e-6)
    assert bounds.margin_i == pytest.approx(5.297443, abs=1e-6)
    assert bounds.rhs_ii == pytest.approx(2.563436, abs=1e-6)
    assert bounds.margin_ii == pytest.approx(4.563436, abs=1e-6)


def test_nonnegative_bounds_a_power_factor(square, zero_g):
    bounds = diff.check_nonnegative_bounds(square, zero_g, **SAMPLE, factor="a-power")
    assert bounds.margin_i == pytest.approx(5.297443, abs=1e-6)
    assert bounds.margin_ii == pytest.approx(6.702557, abs=1e-6)
    with pytest.raises(ParameterError):
        diff.check_nonnegative_bounds(square, zero_g, **SAMPLE, factor="cubic")


def test_nonnegative_bounds_need_non_negative_q(zero_g):
    with pytest.raises(PreconditionError):
        diff.check_nonnegative_bounds(function("x1^2 - 5", [[0, 1]]), zero_g, **SAMPLE)


def test_bounds_reject_a_zero(square, zero_g):
    with pytest.raises(ParameterError):
        diff.check_nonnegative_bounds(square, zero_g, 1.0, [0.0], [1.0], 0.0)


def test_nonpositive_bound_example():
    Q = function("-(x1 - 1)^2", [[0, 1]])
    bound = diff.check_nonpositive_bound(Q, modmap("1"), 1.0, [0.0], [0.5], 0.5)
    assert bound.lhs == pytest.approx(-0.5)
    assert bound.rhs == pytest.approx(0.026918, abs=1e-6)
    assert bound.margin == pytest.approx(0.526918, abs=1e-6)


def test_nonpositive_bound_of_zero_function(zero_g):
    bound = diff.check_nonpositive_bound(function("0", [[0, 1]]), zero_g, 1.0, [0.4], [0.4], 0.5)
    assert bound.margin == 0.0


def test_nonpositive_bound_needs_non_positive_q(zero_g):
    with pytest.raises(PreconditionError):
        diff.check_nonpositive_bound(function("x1^2", [[0, 1]]), zero_g, 1.0, [0.5], [1.0], 0.5)


def test_symmetric_bound_positive_branch(zero_g):
    # Q(0) + Q(1) = 1.2
    bound = diff.check_symmetric_bound(function("x1^2 + 0.1", [[0, 1]]), zero_g, **SAMPLE)
    assert bound.branch == "positive"
    assert bound.lhs == pytest.approx(-2.0)
    assert bound.rhs == pytest.approx(5.513862, abs=1e-6)
    assert bound.margin == pytest.approx(7.513862, abs=1e-6)


def test_symmetric_bound_negative_branch():
    Q = function("-(x1^2 + 0.1)", [[0, 1]])
    for m1, m2 in (([0.0], [1.0]), ([1.0], [0.0])):
        bound = diff.check_symmetric_bound(Q, modmap("1"), 1.0, m1, m2, 0.5)
        assert bound.branch == "negative"
        assert bound.lhs == pytest.approx(2.0)
        assert bound.rhs == 2.0
        assert bound.margin == pytest.approx(0.0, abs=1e-12)


def test_symmetric_bound_with_equal_points(zero_g):
    bound = diff.check_symmetric_bound(function("x1^2 + 0.1", [[0, 1]]), zero_g, 1.0, [0.5], [0.5], 0.3)
    assert bound.lhs == 0.0
    assert bound.margin == bound.rhs


def test_symmetric_bound_rejects_mixed_signs(zero_g):
    with pytest.raises(PreconditionError):
        diff.check_symmetric_bound(function("x1 - 0.5", [[0, 1]]), zero_g, **SAMPLE)


def test_secant_margin_is_scaled_residual():
    rng = np.random.default_rng(5)
    Q = function("x1^3 - x1 + 2", [[-1, 1]])
    G = modmap("u1 * v1 - s")
    for _ in range(500):
        m1, m2 = rng.uniform(-1, 1, size=(2, 1))
        a, s = rng.uniform(0.05, 1), rng.uniform(0.05, 1)
        expected = -cert.residual(Q, G, s, m1, m2, a) / a
        assert diff.secant_margin(Q, G, s, m1, m2, a) == pytest.approx(expected, abs=1e-12)


def test_secant_margins_agree_with_sweep_verdict(square, zero_g, small_grid):
    assert cert.check_gs_convex(square, zero_g, [1.0], small_grid).passed
    points = small_grid.m_points(square.domain)
    for m1 in points:
        for m2 in points:
            for a in small_grid.a_values[1:]:
                assert diff.secant_margin(square, zero_g, 1.0, m1, m2, a) >= -1e-12


@pytest.mark.parametrize("text", ["x1^2", "exp(x1)", "log(2 + x1) * x1"])
def test_secant_gap_shrinks(text):
    gap = diff.secant_gap(function(text, [[0, 1]]), [1.0], [0.0])
    assert gap.decreasing
    assert list(gap.table["a"]) == [1e-2, 1e-3, 1e-4]
    assert gap.table["gap"].iloc[-1] < 1e-3


@pytest.mark.parametrize("factor, s_values", [("s-power", (1.0,)), ("a-power", (0.25, 0.5, 1.0))])
def test_corpus_bound_margins_are_non_negative(convex_member, factor, s_values):
    G = ModMap.zero(convex_member.dimension)
    points = SampleGrid(points_per_axis=5).m_points(convex_member.domain)
    a_values = [a for a in a_grid(11) if a >= 0.1]
    for s in s_values:
        for m1 in points:
            for m2 in points:
                for a in a_values:
                    bounds = diff.check_nonnegative_bounds(convex_member, G, s, m1, m2, a, factor)
                    assert bounds.margin_i >= -1e-12
                    assert bounds.margin_ii >= -1e-12


def test_margin_curve_marks_failed_hypotheses(zero_g):
    curve = diff.margin_curve(function("x1^2 + 0.1", [[0, 1]]), zero_g, 1.0, [0.0], [1.0], [0.0, 0.25, 0.5, 1.0])
    assert list(curve.columns) == ["a", "secant_margin", "margin_i", "margin_ii",
                                   "margin_nonpositive", "margin_symmetric"]
    assert list(curve["a"]) == [0.25, 0.5, 1.0]
    assert curve["margin_nonpositive"].isna().all()
    assert curve["margin_symmetric"].iloc[1] == pytest.approx(7.513862, abs=1e-6)
    assert (curve["margin_i"] > 0).all()
