import math

import numpy as np
import pytest

import core
import epigraph
from core import ModMap, SampleGrid, a_grid
from epigraph import EpiPoint
from errors import ParameterError
from tests.helpers import E, function

EPI_GRID = SampleGrid(points_per_axis=11, a_values=a_grid(11))


@pytest.mark.parametrize("alpha, expected", [(0.3, True), (0.25, True), (0.2, False)])
def test_epi_contains(square, alpha, expected):
    assert epigraph.epi_contains(square, EpiPoint((0.5,), alpha), tolerance=0.0) is expected


def test_epi_contains_rejects_outside_points(square):
    with pytest.raises(ParameterError):
        epigraph.epi_contains(square, EpiPoint((2.0,), 5.0))


def test_epi_point_needs_finite_level():
    with pytest.raises(ParameterError):
        EpiPoint((0.0,), math.inf)


def test_gs_combine_point_midpoint(zero_g):
    combined = epigraph.gs_combine_point(EpiPoint((0.0,), 0.0), EpiPoint((1.0,), 1.0), 0.5, 1.0, zero_g)
    assert combined.m == (0.5,)
    assert combined.alpha == pytest.approx(0.648721, abs=1e-6)


def test_gs_combine_point_endpoints(zero_g):
    p1, p2 = EpiPoint((0.2,), 3.0), EpiPoint((0.8,), 2.0)
    at_one = epigraph.gs_combine_point(p1, p2, 1.0, 0.5, zero_g)
    assert at_one.m == p1.m
    assert at_one.alpha == pytest.approx(core.weights(1.0, 0.5).w1 * 3.0)
    at_zero = epigraph.gs_combine_point(p1, p2, 0.0, 1.0, zero_g)
    assert at_zero.m == p2.m
    assert at_zero.alpha == pytest.approx((E - 1) * 2.0)


@pytest.mark.parametrize("m1, alpha1, s, expected", [
    ((0.5,), 0.1, 1.0, False),
    ((0.5,), 0.2, 1.0, True),
    ((0.5,), 0.19, 0.5, False),
    ((0.5,), 0.2, 0.5, True),
    ((0.0,), 0.0, 0.25, True),
    ((1.0,), 0.5, 0.25, False),
])
def test_membership_at_a_one_reduces_to_scaled_level(square, zero_g, m1, alpha1, s, expected):
    combined = epigraph.gs_combine_point(EpiPoint(m1, alpha1), EpiPoint((0.3,), 7.0), 1.0, s, zero_g)
    direct = square.value(m1) <= core.weights(1.0, s).w1 * alpha1 + 1e-12
    assert epigraph.epi_contains(square, combined, tolerance=1e-12) == direct == expected


def test_gs_combine_point_adds_scaled_g():
    combined = epigraph.gs_combine_point(EpiPoint((0.0,), 0.0), EpiPoint((1.0,), 0.0), 0.25, 1.0,
                                         ModMap.constant(2.0, 1))
    assert combined.alpha == pytest.approx(0.5)


def test_sample_epigraph_is_point_major(square):
    points, levels = epigraph.sample_epigraph(square, [[0.0], [1.0]], deltas=(0.0, 0.5))
    np.testing.assert_array_equal(points, [[0.0], [0.0], [1.0], [1.0]])
    np.testing.assert_array_equal(levels, [0.0, 0.5, 1.0, 1.5])
    with pytest.raises(ParameterError):
        epigraph.sample_epigraph(square, [[0.0]], deltas=(-0.1,))


def test_square_epigraph_is_closed(square, zero_g):
    report = epigraph.check_epigraph_theorem(square, zero_g, 1.0, EPI_GRID)
    assert report.consistent
    assert report.escapes == 0
    assert report.worst_escape is None
    assert report.gs_verdict == "pass"
    assert report.combinations >= 10_000
    assert report.escape_table.empty


def test_negative_constant_escapes_at_a_zero(minus_one, zero_g):
    report = epigraph.check_epigraph_theorem(minus_one, zero_g, 1.0, EPI_GRID)
    assert report.gs_verdict == "fail"
    assert report.escapes > 0
    assert report.worst_escape.a == 0.0
    assert report.worst_escape.excess == pytest.approx(E - 2, abs=1e-9)
    assert report.consistent
    assert report.to_dict()["worst_escape"]["a"] == 0.0


def test_degenerate_grid_with_equal_points(square, zero_g):
    report = epigraph.check_epigraph_theorem(square, zero_g, 1.0, SampleGrid(points_per_axis=1))
    assert report.consistent
    assert report.escapes == 0


def test_passing_corpus_members_keep_every_combination(convex_member):
    G = ModMap.zero(convex_member.dimension)
    report = epigraph.check_epigraph_theorem(convex_member, G, 0.5, EPI_GRID)
    assert report.combinations >= 10_000
    assert report.escapes == 0
    assert report.consistent


def test_boundedness_of_square(square):
    report = epigraph.boundedness_scan(square, points=101)
    assert (report.sup, report.inf, report.bounded) == (1.0, 0.0, True)
    assert report.witness is None


def test_boundedness_of_exponential():
    report = epigraph.boundedness_scan(function("exp(x1)", [[0, 2]]), g_bound=1.0)
    assert report.sup == pytest.approx(7.389056, abs=1e-6)
    assert report.bounded
    assert report.g_bound == 1.0


def test_unbounded_evidence():
    report = epigraph.boundedness_scan(function("1/x1", [[0, 1]]))
    assert not report.bounded
    assert report.witness == (0.0,)
    assert report.to_dict()["witness"] == [0.0]


def test_boundedness_estimates_are_monotone_under_refinement():
    Q = function("x1^3 - x1", [[0, 1]])
    coarse, medium, fine = (epigraph.boundedness_scan(Q, points=k) for k in (11, 21, 41))
    assert coarse.sup <= medium.sup + 1e-12
    assert medium.sup <= fine.sup + 1e-12
    assert coarse.inf >= medium.inf - 1e-12
    assert medium.inf >= fine.inf - 1e-12


def test_boundedness_scan_rejects():
    with pytest.raises(ParameterError):
        epigraph.boundedness_scan(function("x1 + x2", [[0, 1], [0, 1]]))
    with pytest.raises(ParameterError):
        epigraph.boundedness_scan(function("x1", [[0, 1]]), interval=[0.5, 2.0])
    with pytest.raises(ParameterError):
        epigraph.boundedness_scan(function("x1", [[0, 1]]), points=1)
