import numpy as np
import pandas as pd
import pytest

import cert
from cert import ClassId
from core import ModMap, SampleGrid, a_grid
from errors import ParameterError, PreconditionError, SampleEvaluationError
from tests.helpers import E, function, modmap

S_VALUES = (0.25, 0.5, 1.0)


@pytest.mark.parametrize("a, expected", [(0.5, -0.398721), (0.0, -0.718282)])
def test_residual_examples(square, zero_g, a, expected):
    assert cert.residual(square, zero_g, 1.0, [0.0], [1.0], a) == pytest.approx(expected, abs=1e-6)


def test_residual_of_negative_constant_at_a_zero(minus_one, zero_g):
    assert cert.residual(minus_one, zero_g, 1.0, [0.3], [0.7], 0.0) == pytest.approx(E - 2, abs=1e-12)


def test_residual_rejects_points_outside_domain(square, zero_g):
    with pytest.raises(ParameterError):
        cert.residual(square, zero_g, 1.0, [0.0], [1.5], 0.5)


def test_residual_attaches_sample_to_evaluation_errors(zero_g):
    Q = function("log(x1)", [[0, 1]])
    with pytest.raises(SampleEvaluationError) as info:
        cert.residual(Q, zero_g, 1.0, [0.0], [1.0], 0.5)
    assert info.value.sample.m1 == (0.0,)


def test_square_passes(square, zero_g):
    report = cert.check_gs_convex(square, zero_g, [1.0], SampleGrid(points_per_axis=21))
    assert report.verdict == "pass"
    assert report.worst.residual <= 0
    assert report.sample_count == 21 * 21 * 21


def test_negative_constant_fails_at_a_zero(minus_one, zero_g):
    report = cert.check_gs_convex(minus_one, zero_g, [1.0], SampleGrid(points_per_axis=11))
    assert report.verdict == "fail"
    assert report.worst.a == 0.0
    assert report.worst.residual == pytest.approx(0.718282, abs=1e-6)
    assert report.worst.residual == pytest.approx(E - 2, abs=1e-9)
    # every pair ties at a = 0: the lexicographically smallest wins
    assert report.worst.m1 == (0.0,) and report.worst.m2 == (0.0,)
    worst_rows = report.witnesses[report.witnesses["kind"] == "worst"]
    assert list(worst_rows.columns) == ["s", "a", "m1_1", "m2_1", "residual", "kind"]
    assert (report.witnesses["kind"] == "violation").sum() > 0


def test_identity_on_unit_interval_passes(zero_g):
    assert cert.check_gs_convex(function("x1", [[0, 1]]), zero_g, [1.0], SampleGrid(points_per_axis=21)).passed


def test_convex_corpus_passes_for_several_s(convex_member):
    G = ModMap.zero(convex_member.dimension)
    report = cert.check_gs_convex(convex_member, G, S_VALUES, SampleGrid(points_per_axis=21))
    assert report.passed, report.worst
    assert report.s_values == S_VALUES


def test_s_list_defaults_to_grid(square, zero_g):
    report = cert.check_gs_convex(square, zero_g, None, SampleGrid(points_per_axis=5, s_values=(0.5, 1.0)))
    assert report.s_values == (0.5, 1.0)


def test_threaded_sweep_matches_serial(zero_g):
    Q = function("x1^3 - x1", [[-1, 1]])
    grid = SampleGrid(points_per_axis=15, refine=7, seed=5, s_values=(0.5, 1.0))
    serial = cert.check_gs_convex(Q, zero_g, None, grid, threads=1)
    threaded = cert.check_gs_convex(Q, zero_g, None, grid, threads=4)
    assert serial.worst == threaded.worst
    pd.testing.assert_frame_equal(serial.witnesses, threaded.witnesses)


def test_evaluation_error_aborts_sweep(zero_g):
    with pytest.raises(SampleEvaluationError):
        cert.check_gs_convex(function("1/x1", [[0, 1]]), zero_g, [1.0], SampleGrid(points_per_axis=5))


def test_negative_values_fail_at_a_zero_whatever_g():
    Q = function("x1 - 0.5", [[0, 1]])
    report = cert.check_gs_convex(Q, modmap("100"), [1.0], SampleGrid(points_per_axis=11))
    assert not report.passed
    assert report.worst.a == 0.0


def test_raising_g_lowers_residual_by_a_times_c(square):
    rng = np.random.default_rng(1)
    G = modmap("u1 * v1 + s")
    shifted = modmap("u1 * v1 + s + 0.75")
    for _ in range(200):
        m1, m2 = rng.uniform(0, 1, size=(2, 1))
        a, s = rng.uniform(0, 1), rng.uniform(0.01, 1)
        difference = cert.residual(square, shifted, s, m1, m2, a) - cert.residual(square, G, s, m1, m2, a)
        assert difference == pytest.approx(-0.75 * a, abs=1e-12)


def test_minimal_g_linear():
    result = cert.minimal_g(function("x1", [[0, 1]]), 1.0, [1.0], [0.0], np.linspace(0.01, 1.0, 100))
    assert result.gstar == pytest.approx(-0.0050167, abs=1e-7)
    assert result.argmax_a == pytest.approx(0.01)
    assert result.endpoint_feasible


def test_minimal_g_square(square):
    result = cert.minimal_g(square, 1.0, [0.0], [1.0], np.linspace(0.01, 1.0, 100))
    assert result.gstar == 0.0
    assert result.argmax_a == 1.0
    assert result.endpoint_feasible


def test_minimal_g_negative_constant_is_endpoint_infeasible(minus_one):
    result = cert.minimal_g(minus_one, 1.0, [0.2], [0.9], a_grid(11)[1:])
    assert not result.endpoint_feasible
    assert result.endpoint_residual == pytest.approx(E - 2)


def test_minimal_g_rejects_a_zero(square):
    with pytest.raises(ParameterError):
        cert.minimal_g(square, 1.0, [0.0], [1.0], a_grid(11))
    with pytest.raises(ParameterError):
        cert.minimal_g(square, 1.0, [0.0], [1.0], [])


@pytest.mark.parametrize("text, bounds", [
    ("x1^3", [[-1, 1]]),
    ("sqrt(x1)", [[0, 1]]),
    ("-x1^2 + 2", [[-1, 1]]),
    ("x1^2 - x2", [[0, 1], [0, 1]]),
])
def test_minimal_g_is_sufficient(text, bounds):
    Q = function(text, bounds)
    a_values = a_grid(21)[1:]
    points = SampleGrid(points_per_axis=5).m_points(Q.domain)
    for m1 in points:
        for m2 in points:
            gstar = cert.minimal_g(Q, 0.5, m1, m2, a_values).gstar
            G = ModMap.constant(gstar + 1e-9, Q.dimension)
            assert max(cert.residual(Q, G, 0.5, m1, m2, a) for a in a_values) <= 0


def test_minimal_g_landscape_warns_on_infeasible_pairs(minus_one, caplog):
    table = cert.minimal_g_landscape(minus_one, 1.0, SampleGrid(points_per_axis=3, a_values=a_grid(5)))
    assert len(table) == 9
    assert not table["endpoint_feasible"].any()
    assert "no finite G" in caplog.text


def test_class_weights_s_convex_sample():
    w1, w2, g = cert.class_weights(ClassId.S_CONVEX, 0.5, 0.5)
    assert (float(w1), float(w2), g) == pytest.approx((0.707107, 0.707107, 0.0), abs=1e-6)


def test_check_class_s_convex_passes_for_square(square, small_grid):
    assert cert.check_class("s-convex", square, None, 0.5, small_grid).passed


def test_sub_b_s_with_zero_g_matches_s_convex(small_grid):
    Q = function("x1^3 - x1", [[-1, 1]])
    plain = cert.check_class(ClassId.S_CONVEX, Q, None, 0.5, small_grid)
    with_g = cert.check_class(ClassId.SUB_B_S_CONVEX, Q, ModMap.zero(1), 0.5, small_grid)
    assert plain.verdict == with_g.verdict
    assert plain.worst.residual == with_g.worst.residual


def test_exponential_kind(small_grid):
    assert cert.check_class("exponential-kind", function("x1^2 + 0.1", [[0, 1]]), None, 1.0, small_grid).passed
    with pytest.raises(PreconditionError):
        cert.check_class("exponential-kind", function("x1^2", [[0, 1]]), None, 1.0, small_grid)


def test_check_class_modulating_map_rules(square, zero_g, small_grid):
    with pytest.raises(PreconditionError):
        cert.check_class("gs-exponential", square, None, 1.0, small_grid)
    with pytest.raises(PreconditionError):
        cert.check_class("sub-b-s-convex", square, None, 1.0, small_grid)
    with pytest.raises(PreconditionError):
        cert.check_class("s-convex", square, zero_g, 1.0, small_grid)
    with pytest.raises(ParameterError):
        cert.check_class("convex", square, None, 1.0, small_grid)


@pytest.mark.parametrize("text", ["x1^2", "exp(x1)"])
def test_reduction_equivalence(text, small_grid):
    assert cert.reduction_equivalence(function(text, [[0, 1]]), small_grid)


def test_reduction_equivalence_needs_non_negative_function(small_grid):
    with pytest.raises(PreconditionError):
        cert.reduction_equivalence(function("x1^2 - 0.5", [[0, 1]]), small_grid)


def test_report_dict(square, zero_g, small_grid):
    data = cert.check_gs_convex(square, zero_g, [1.0], small_grid).to_dict()
    assert data["class_id"] == "gs-exponential"
    assert data["verdict"] == "pass"
    assert set(data["worst"]) == {"m1", "m2", "a", "s", "residual"}
