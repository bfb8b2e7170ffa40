import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rcs.dist import (FiniteDistribution, ModelGroup, OutputSpace, accept_distribution,
                      cumulative_mass, mixture_draw, order_stats_at, overlap_z, sigma, validate)
from rcs.errors import IndexOutOfSpace, NegativeMass, NotNormalized, ZeroMixtureMass

from conftest import philox


def test_validate_examples():
    assert validate([0.5, 0.5, 0.0])
    with pytest.raises(NotNormalized):
        validate([0.5, 0.6, 0.0])
    with pytest.raises(NegativeMass):
        validate([-0.1, 1.1, 0.0])


def test_distribution_is_read_only():
    d = FiniteDistribution([0.25, 0.75])
    with pytest.raises(ValueError):
        d.probs[0] = 1.0
    assert FiniteDistribution.normalized([1, 3]) == d
    assert FiniteDistribution.point_mass(3, 1).probs.tolist() == [0, 1, 0]


def test_output_space():
    space = OutputSpace(4, frozenset({3}))
    assert space.safe == {0, 1, 2}
    assert space.is_unsafe(3) and not space.is_unsafe(0)
    with pytest.raises(IndexOutOfSpace):
        space.check_index(4)
    with pytest.raises(IndexOutOfSpace):
        OutputSpace(2, frozenset({2}))


def test_cumulative_mass():
    d = FiniteDistribution([0.2, 0.3, 0.5])
    assert cumulative_mass(d, {0, 1}) == pytest.approx(0.5)
    assert cumulative_mass(d, range(3)) == pytest.approx(1.0)
    assert cumulative_mass(d, set()) == 0.0
    with pytest.raises(IndexOutOfSpace):
        cumulative_mass(d, {5})


def test_group_shape_checks():
    space = OutputSpace(2)
    with pytest.raises(ValueError):
        ModelGroup(np.array([[0.5, 0.5]]), 2, space)
    with pytest.raises(ValueError):
        ModelGroup(np.array([[0.5, 0.5, 0.0]]), 1, space)


def _group_at(values):
    rows = [[v, 1 - v] for v in values]
    return ModelGroup.from_models(rows, 2, OutputSpace(2))


@pytest.mark.parametrize("values,expected", [
    ([0.5, 0.1, 0.3], [0.1, 0.3, 0.5]),
    ([0.2, 0.2, 0.2], [0.2, 0.2, 0.2]),
    ([0.0, 0.7, 0.0], [0.0, 0.0, 0.7]),
])
def test_order_stats(values, expected):
    assert order_stats_at(_group_at(values), 0).tolist() == pytest.approx(expected)


def test_sigma_worked(worked):
    val, stats_ = sigma(worked, 0)
    assert val == pytest.approx(0.75, abs=1e-15)
    assert stats_.tolist() == [0.0, 0.5, 0.5]
    assert sigma(worked, 2)[0] == 0.0


def test_sigma_identical_is_exactly_one(identical):
    for y in range(3):
        assert sigma(identical, y)[0] == 1.0


def test_sigma_zero_mixture_mass():
    g = ModelGroup.from_models([[1.0, 0.0], [1.0, 0.0]], 1, OutputSpace(2))
    with pytest.raises(ZeroMixtureMass):
        sigma(g, 1)


def test_overlap_examples(worked, disjoint, identical):
    assert overlap_z(worked) == pytest.approx(0.5)
    assert overlap_z(disjoint) == 0.0
    assert overlap_z(identical) == pytest.approx(1.0)


def _brute_z(probs, s):
    return sum(sum(sorted(col)[:s]) for col in probs.T.tolist()) / s


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(2, 6), st.data())
def test_overlap_matches_brute_force(n, size, data):
    raw = data.draw(st.lists(st.lists(st.floats(0.01, 1.0), min_size=size, max_size=size),
                             min_size=n, max_size=n))
    probs = np.array(raw)
    probs /= probs.sum(axis=1, keepdims=True)
    s = data.draw(st.integers(1, n))
    g = ModelGroup(probs, s, OutputSpace(size))
    assert overlap_z(g) == pytest.approx(_brute_z(probs, s), abs=1e-12)
    assert 0 <= overlap_z(g) <= 1 + 1e-12
    for y in range(size):
        val, _ = sigma(g, y)
        assert 0 <= val <= 1
        assert val == pytest.approx(np.sort(probs[:, y])[:s].mean() / probs[:, y].mean(), abs=1e-12)
    acc = accept_distribution(g)
    assert acc.sum() == pytest.approx(1.0)


def test_mixture_draw_point_masses():
    g = ModelGroup.from_models([[0, 0, 1.0]] * 3, 2, OutputSpace(3))
    rng = philox(1)
    for _ in range(50):
        y, origin = mixture_draw(g, rng)
        assert y == 2 and 0 <= origin < 3


def test_mixture_draw_chi_square():
    g = ModelGroup.from_models([[1.0, 0.0], [0.0, 1.0]], 1, OutputSpace(2))
    rng = philox(2)
    draws = np.array([mixture_draw(g, rng) for _ in range(100_000)])
    counts = np.bincount(draws[:, 0], minlength=2)
    assert stats.chisquare(counts, [50_000, 50_000]).pvalue > 0.001
    # the origin of a point-mass draw is the model holding that point
    assert np.array_equal(draws[:, 0], draws[:, 1])


def test_mixture_draw_two_thirds():
    g = ModelGroup.from_models([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], 2, OutputSpace(2))
    rng = philox(3)
    trials = 60_000
    hits = sum(mixture_draw(g, rng)[0] == 1 for _ in range(trials))
    sd = np.sqrt(2 / 3 * 1 / 3 / trials)
    assert abs(hits / trials - 2 / 3) < 3 * sd


def test_label_scrambling_does_not_change_sigma(worked):
    relabelled = worked.with_labels((False, True, True))
    for y in range(3):
        assert sigma(worked, y)[0] == sigma(relabelled, y)[0]
