import numpy as np
import pytest

import algebra
import cert
from algebra import GSPair
from core import ModMap, SampleGrid
from errors import ParameterError
from tests.helpers import function, modmap

SAMPLE = dict(s=1.0, m1=[0.0], m2=[1.0], a=0.5)


def residual(pair, s, m1, m2, a):
    return cert.residual(pair.Q, pair.G, s, m1, m2, a)


@pytest.fixture
def square_pair():
    return GSPair(function("x1^2", [[0, 1]]), ModMap.zero(1))


@pytest.fixture
def identity_pair():
    return GSPair(function("x1", [[0, 1]]), ModMap.zero(1))


def test_sum_example(square_pair, identity_pair):
    assert residual(square_pair, **SAMPLE) == pytest.approx(-0.398721, abs=1e-6)
    assert residual(identity_pair, **SAMPLE) == pytest.approx(-0.148721, abs=1e-6)
    combined = algebra.combine_sum(square_pair, identity_pair)
    assert residual(combined, **SAMPLE) == pytest.approx(-0.547442, abs=1e-6)


def test_sum_with_zero_function(square_pair):
    zero = GSPair(function("0", [[0, 1]]), ModMap.zero(1))
    combined = algebra.combine_sum(square_pair, zero)
    assert residual(combined, **SAMPLE) == residual(square_pair, **SAMPLE)


def test_sum_rejects_mismatched_domains(square_pair):
    other = GSPair(function("x1", [[0, 2]]), ModMap.zero(1))
    with pytest.raises(ParameterError):
        algebra.combine_sum(square_pair, other)


def test_pair_dimensions_must_agree():
    with pytest.raises(ParameterError):
        GSPair(function("x1", [[0, 1]]), ModMap.zero(2))


def test_scale(square_pair):
    assert residual(algebra.scale(square_pair, 0.0), **SAMPLE) == 0.0
    assert residual(algebra.scale(square_pair, 2.0), **SAMPLE) == pytest.approx(-0.797442, abs=1e-6)
    with pytest.raises(ParameterError):
        algebra.scale(square_pair, -1.0)


def test_linear_combination(square_pair, identity_pair):
    zero = algebra.linear_combination([square_pair, identity_pair], [0.0, 0.0])
    assert residual(zero, **SAMPLE) == 0.0
    both = algebra.linear_combination([square_pair, identity_pair], [1.0, 1.0])
    assert residual(both, **SAMPLE) == pytest.approx(
        residual(algebra.combine_sum(square_pair, identity_pair), **SAMPLE), abs=1e-15)
    single = algebra.linear_combination([square_pair], [3.0])
    assert residual(single, **SAMPLE) == residual(algebra.scale(square_pair, 3.0), **SAMPLE)


@pytest.mark.parametrize("pairs, betas", [([], []), ("one", [1.0, 2.0]), ("one", [-1.0])])
def test_linear_combination_rejects(square_pair, pairs, betas):
    pairs = [square_pair] if pairs == "one" else pairs
    with pytest.raises(ParameterError):
        algebra.linear_combination(pairs, betas)


def test_post_compose_linear(square_pair):
    identity = algebra.post_compose_linear(square_pair, 1.0)
    assert residual(identity, **SAMPLE) == residual(square_pair, **SAMPLE)
    assert residual(algebra.post_compose_linear(square_pair, 0.5), **SAMPLE) == pytest.approx(-0.199361, abs=1e-6)
    with pytest.raises(ParameterError):
        algebra.post_compose_linear(square_pair, -2.0)


def test_additivity_and_homogeneity_on_random_samples():
    rng = np.random.default_rng(2024)
    first = GSPair(function("x1^3 - x1 * x2", [[0, 1], [0, 1]]), modmap("u1 - v2 * s", 2))
    second = GSPair(function("exp(x2) - x1^2", [[0, 1], [0, 1]]), modmap("max(u1, v1) + 1", 2))
    combined = algebra.combine_sum(first, second)
    beta = 1.7
    scaled = algebra.scale(first, beta)
    for _ in range(10_000):
        m1, m2 = rng.uniform(0, 1, size=(2, 2))
        a, s = rng.uniform(0, 1), rng.uniform(0.01, 1)
        r1, r2 = residual(first, s, m1, m2, a), residual(second, s, m1, m2, a)
        assert residual(combined, s, m1, m2, a) == pytest.approx(r1 + r2, abs=1e-12)
        assert residual(scaled, s, m1, m2, a) == pytest.approx(beta * r1, abs=1e-12)


def test_closure_preserves_passing_verdicts():
    grid = SampleGrid(points_per_axis=11, s_values=(0.5, 1.0))
    first = GSPair(function("x1^2", [[-1, 1]]), modmap("0.5"))
    second = GSPair(function("exp(x1)", [[-1, 1]]), modmap("abs(u1 - v1)"))
    for pair in (first, second):
        assert cert.check_gs_convex(pair.Q, pair.G, None, grid).passed
    built = [
        algebra.combine_sum(first, second),
        algebra.scale(first, 3.0),
        algebra.linear_combination([first, second], [0.25, 2.0]),
        algebra.post_compose_linear(second, 0.5),
    ]
    for pair in built:
        assert cert.check_gs_convex(pair.Q, pair.G, None, grid).passed, pair.Q.name


def test_sup_family_value():
    pairs = [GSPair(function("x1", [[0, 2]]), ModMap.zero(1)), GSPair(function("x1^2", [[0, 2]]), ModMap.zero(1))]
    family = algebra.sup_family(pairs)
    assert family.pair.Q.value([0.5]) == 0.5
    assert family.finite.all()
    assert family.contiguous
    assert family.pair.Q.domain.bounds() == [[0.0, 2.0]]


def test_sup_family_excludes_infinite_points():
    pairs = [GSPair(function("x1^2", [[0, 1]]), ModMap.zero(1)), GSPair(function("1/x1", [[0, 1]]), ModMap.zero(1))]
    family = algebra.sup_family(pairs, probe=np.linspace(0, 1, 11))
    assert not family.finite[0]
    assert family.finite[1:].all()
    assert family.contiguous
    assert family.pair.Q.domain.lower == (0.1,)


def test_sup_family_passes_on_finiteness_set():
    pairs = [GSPair(function("x1^2", [[0, 1]]), ModMap.zero(1)), GSPair(function("1/x1", [[0, 1]]), ModMap.zero(1))]
    family = algebra.sup_family(pairs, probe=np.linspace(0, 1, 101))
    report = cert.check_gs_convex(family.pair.Q, family.pair.G, None, SampleGrid(points_per_axis=11))
    assert report.passed


def test_sup_family_reports_gaps():
    pairs = [GSPair(function("log(abs(x1 - 0.5))", [[0, 1]]), ModMap.zero(1))]
    family = algebra.sup_family(pairs, probe=np.linspace(0, 1, 5))
    assert family.finite.tolist() == [True, True, False, True, True]
    assert not family.contiguous


def test_sup_family_rejects():
    with pytest.raises(ParameterError):
        algebra.sup_family([])
    with pytest.raises(ParameterError):
        algebra.sup_family([GSPair(function("x1 + x2", [[0, 1], [0, 1]]), ModMap.zero(2))])
    with pytest.raises(ParameterError):
        algebra.sup_family([GSPair(function("log(x1)", [[0, 1]]), ModMap.zero(1))], probe=[0.0])
