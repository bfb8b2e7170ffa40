import math
from fractions import Fraction

import numpy as np
import pytest

from rcs.analysis import (bound_rhs, delta_sigma, exhaustive_q, mu_unsafe, mu_unsafe_order,
                          risk_bound_report)
from rcs.dist import ModelGroup, OutputSpace
from rcs.errors import TooLarge
from rcs.protocols import run_rcs

from conftest import philox


def test_delta_sigma_identity(worked):
    assert delta_sigma(worked, 1, 1) == (0.0, 1.0)


def test_delta_sigma_worked(worked):
    delta, dtv = delta_sigma(worked, 2, 0)
    assert delta == pytest.approx(-0.75)
    assert dtv == 0.0


def test_delta_sigma_antisymmetric():
    g = ModelGroup.from_models([[0.3, 0.2, 0.5], [0.1, 0.6, 0.3], [0.4, 0.4, 0.2]], 2, OutputSpace(3))
    for a in range(3):
        for b in range(3):
            d_ab, r_ab = delta_sigma(g, a, b)
            d_ba, r_ba = delta_sigma(g, b, a)
            assert d_ab == pytest.approx(-d_ba)
            assert r_ab == pytest.approx(1 / r_ba)


def test_mu_variants(worked):
    assert mu_unsafe(worked) == 0.0
    assert mu_unsafe_order(worked) == 0.0
    flipped = worked.with_labels((True, True, True))
    assert mu_unsafe(flipped) == pytest.approx(1 / 3)


def test_report_no_unsafe_mass():
    g = ModelGroup.from_models([[0.5, 0.5, 0], [0.2, 0.8, 0], [1.0, 0, 0]], 2, OutputSpace(3, frozenset({2})),
                               truth_labels=(True, True, True))
    rep = risk_bound_report(g, 2, 2000, philox(0))
    assert rep.mu_U == 0 and rep.q_U_hat == 0
    rho = 1.0 if math.isnan(rep.rho_U_hat) else rep.rho_U_hat
    assert rep.bound == pytest.approx(rep.pr_trace * rho)
    if rep.trace_trials:
        assert rep.rho_U_hat == 0 and rep.bound == 0
    assert 0 <= rep.pr_trace <= 1


def test_report_identical(identical):
    rep = risk_bound_report(identical, 3, 20_000, philox(1))
    assert rep.Z == pytest.approx(1.0) and rep.pr_trace == pytest.approx(0.0, abs=1e-12)
    assert rep.trace_trials == 0 and math.isnan(rep.rho_U_hat)
    sd = math.sqrt(0.3 * 0.7 / 20_000)
    assert abs(rep.q_U_hat - 0.3) < 3 * sd
    assert rep.q_U_hat <= rep.bound + 3 * sd


def test_report_worked_bound(worked):
    trials = 100_000
    rep = risk_bound_report(worked, 2, trials, philox(2))
    sd = math.sqrt(max(rep.q_U_hat * (1 - rep.q_U_hat), 1e-12) / trials)
    assert rep.q_U_hat <= rep.bound + 3 * sd
    assert rep.as_dict()["trials"] == trials


def test_exhaustive_trivial_cases():
    space = OutputSpace(3, frozenset({2}))
    safe = ModelGroup.from_models([[1, 0, 0], [0, 1, 0], [1, 0, 0]], 2, space)
    assert exhaustive_q(safe, 3) == 0
    single = ModelGroup.from_models([[0.5, 0.25, 0.25]], 1, space)
    for R in (1, 2, 4):
        assert exhaustive_q(single, R) == Fraction(1, 4)


def test_exhaustive_worked_r1(worked):
    assert exhaustive_q(worked, 1) == Fraction(1, 3)


@pytest.mark.parametrize("R", [1, 2, 3])
def test_exhaustive_matches_monte_carlo(worked, R):
    exact = float(exhaustive_q(worked, R))
    rng = philox(10 + R)
    trials = 100_000
    hits = sum(run_rcs(worked, R, rng).y == 2 for _ in range(trials))
    sd = math.sqrt(exact * (1 - exact) / trials)
    assert abs(hits / trials - exact) < 3 * sd + 1e-12


def test_exhaustive_matches_monte_carlo_random():
    rng = np.random.default_rng(5)
    probs = rng.dirichlet(np.ones(4), size=4)
    g = ModelGroup(probs, 3, OutputSpace(4, frozenset({3})))
    exact = float(exhaustive_q(g, 3))
    sim = philox(6)
    trials = 60_000
    hits = sum(run_rcs(g, 3, sim).y == 3 for _ in range(trials))
    assert abs(hits / trials - exact) < 3 * math.sqrt(exact * (1 - exact) / trials)


def test_exhaustive_too_large():
    g = ModelGroup.from_models([np.full(9, 1 / 9)], 1, OutputSpace(9, frozenset({8})))
    with pytest.raises(TooLarge):
        exhaustive_q(g, 1)
    small = ModelGroup.from_models([[0.5, 0.5]], 1, OutputSpace(2, frozenset({1})))
    with pytest.raises(TooLarge):
        exhaustive_q(small, 9)


def test_bound_rhs_worked(worked):
    expected = {1: (Fraction(1, 3), Fraction(1, 2)), 2: (Fraction(2, 9), Fraction(1, 4)),
                3: (Fraction(5, 54), Fraction(1, 8)), 4: (Fraction(1, 27), Fraction(1, 16))}
    for R, (q, rhs) in expected.items():
        assert exhaustive_q(worked, R) == q
        assert bound_rhs(worked, R) == rhs
        assert q <= rhs


def test_exact_arithmetic_rescales_float_rows():
    # rows normalised by float division sum to 1 only up to rounding
    raw = np.array([[0.1, 0.7, 0.3], [0.2, 0.2, 0.9], [0.3, 0.3, 0.3]])
    probs = raw / raw.sum(axis=1, keepdims=True)
    g = ModelGroup(probs, 1, OutputSpace(3, frozenset({0, 1})))
    for R in (1, 2, 3):
        assert exhaustive_q(g, R) <= bound_rhs(g, R)
