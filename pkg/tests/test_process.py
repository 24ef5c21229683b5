"""Process simulation tests: direct recursion, clans, ensembles, DP oracle."""

import math

import numpy as np
import pytest

import gw2
from gw2.errors import GW2Error
from gw2.process import PathState, ScenarioSpec
from gw2.rng import Stream

b = gw2.bernoulli
d = gw2.deterministic


def scenario(off1, off2, imm, x0, xm1, **kw):
    kw.setdefault("horizon", 1)
    return ScenarioSpec(offspring1=off1, offspring2=off2, immigration=imm,
                        initial0=x0, initialm1=xm1, **kw)


# -- step ---------------------------------------------------------------------

def test_step_all_zero_offspring():
    s = scenario(d(0), d(0), d(0), d(0), d(0))
    nxt = gw2.step(PathState(2, 1), s, Stream.from_seed(0, 0))
    assert (nxt.current, nxt.previous, nxt.time) == (0, 2, 1)


def test_step_fibonacci_recursion():
    s = scenario(d(1), d(1), d(0), d(0), d(0))
    state = PathState(1, 0)
    seen = []
    stream = Stream.from_seed(0, 0)
    for _ in range(5):
        state = gw2.step(state, s, stream)
        seen.append(state.current)
    assert seen == [1, 2, 3, 5, 8]


def test_step_immigration_only():
    s = scenario(d(0), d(0), d(7), d(0), d(0))
    nxt = gw2.step(PathState(0, 0), s, Stream.from_seed(0, 0))
    assert (nxt.current, nxt.previous) == (7, 0)


def test_path_state_rejects_negative():
    with pytest.raises(GW2Error):
        PathState(-1, 0)


# -- simulate_path ------------------------------------------------------------

def test_path_all_zero():
    s = scenario(d(0), d(0), d(0), d(0), d(0), horizon=6)
    assert gw2.simulate_path(s, Stream.from_seed(0, 0)) == [0] * 7


def test_path_counting_immigrants():
    s = scenario(d(1), d(0), d(1), d(0), d(0), horizon=6)
    assert gw2.simulate_path(s, Stream.from_seed(0, 0)) == list(range(7))


def test_path_fibonacci_like():
    s = scenario(d(1), d(1), d(0), d(1), d(1), horizon=5)
    assert gw2.simulate_path(s, Stream.from_seed(0, 0)) == [1, 2, 3, 5, 8, 13]


# -- ensembles ----------------------------------------------------------------

def test_ensemble_all_zero_counts():
    s = scenario(d(0), d(0), d(0), d(0), d(0), horizon=3,
                 replicates=1000, thresholds=(0.5, 2.0))
    summary = gw2.simulate_ensemble(s)
    assert summary.counts == (0, 0)
    assert summary.mean == 0.0


def test_ensemble_counts_non_increasing():
    s = scenario(b(0.5), b(0.4), gw2.poisson(1.0), d(1), d(1), horizon=4,
                 master_seed=3, replicates=20_000, thresholds=(1.0, 3.0, 6.0, 10.0))
    summary = gw2.simulate_ensemble(s)
    assert all(a >= b_ for a, b_ in zip(summary.counts, summary.counts[1:]))
    assert all(0 <= c <= s.replicates for c in summary.counts)


def test_ensemble_matches_oracle_at_n1():
    s = scenario(b(0.2), b(0.1), gw2.discrete_pareto(2.5), d(1), d(1),
                 horizon=1, master_seed=5, replicates=200_000, thresholds=(9.0,))
    summary = gw2.simulate_ensemble(s)
    p = gw2.exact_distribution(s, 4000).survival(9.0)
    se = math.sqrt(p * (1 - p) / s.replicates)
    assert abs(summary.counts[0] / s.replicates - p) < 4 * se


def test_mean_identity_against_forecast():
    s = scenario(b(0.5), b(0.3), gw2.poisson(1.0), gw2.poisson(2.0), d(1),
                 horizon=4, master_seed=9, replicates=100_000)
    summary = gw2.simulate_ensemble(s)
    expected, _ = gw2.mean_forecast(s)
    se = math.sqrt(max(summary.second_moment - summary.mean ** 2, 0.0)
                   / s.replicates)
    assert abs(summary.mean - expected) < 4 * se


def test_scenario_validation():
    with pytest.raises(GW2Error):
        scenario(d(0), d(0), d(0), d(0), d(0), horizon=0)
    with pytest.raises(GW2Error):
        scenario(d(0), d(0), d(0), d(0), d(0), thresholds=(2.0, 1.0))


# -- clans --------------------------------------------------------------------

def test_clan_initial_values():
    assert gw2.simulate_clan("v0", 0, b(0.5), b(0.5), Stream.from_seed(0, 0)) == 1
    assert gw2.simulate_clan("v0", -1, b(0.5), b(0.5), Stream.from_seed(0, 0)) == 0
    assert gw2.simulate_clan("vm1", 0, b(0.5), b(0.5), Stream.from_seed(0, 0)) == 0
    assert gw2.simulate_clan("vm1", -1, b(0.5), b(0.5), Stream.from_seed(0, 0)) == 1


def test_clan_n1_distributed_as_single_offspring_draw():
    # age-0 clan at n=1 is one first-law draw; age-1 clan one second-law draw
    v0 = gw2.sample_clan("v0", 1, b(0.3), d(5), 50_000, master_seed=2)
    assert set(np.unique(v0)) <= {0, 1}
    assert abs(v0.mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / v0.size)
    vm1 = gw2.sample_clan("vm1", 1, b(0.3), d(5), 1000, master_seed=2)
    assert np.all(vm1 == 5)


def test_clan_mean_matches_mk():
    mks = gw2.mk(0.6, 0.5, 6)
    for k in (2, 4, 6):
        values = gw2.sample_clan("v0", k, b(0.6), b(0.5), 100_000, master_seed=k)
        se = values.std() / math.sqrt(values.size)
        assert abs(values.mean() - mks[k]) < 4 * se


# -- decomposed simulation ----------------------------------------------------

def test_decomposed_single_clan_collapse():
    # no immigration, X_-1 = 0, X_0 = 1: decomposition is exactly one clan
    s = scenario(d(2), d(1), d(0), d(1), d(0), horizon=3)
    direct = gw2.simulate_path(s, Stream.from_seed(0, 0))[-1]
    decomposed = gw2.simulate_decomposed(s, Stream.from_seed(0, 0))
    clan = gw2.simulate_clan("v0", 3, d(2), d(1), Stream.from_seed(0, 0))
    assert direct == decomposed == clan


def test_decomposed_matches_direct_in_distribution():
    s = scenario(b(0.5), b(0.5), gw2.poisson(1.0), d(1), d(1), horizon=3,
                 master_seed=17, replicates=30_000)
    direct = gw2.sample_xn(s)
    decomposed = gw2.sample_xn(s, decomposed=True)
    p = gw2.two_sample_chi2(np.bincount(direct), np.bincount(decomposed))
    assert p > 0.001


def test_markov_pair_property():
    # restarting from a recorded pair state reproduces the one-step law
    s = scenario(b(0.5), b(0.4), gw2.poisson(0.5), d(3), d(2), horizon=1,
                 master_seed=23, replicates=30_000)
    restarted = np.array([
        gw2.step(PathState(3, 2), s, Stream.from_seed(23, i)).current
        for i in range(30_000)])
    direct = gw2.sample_xn(s)
    p = gw2.two_sample_chi2(np.bincount(direct), np.bincount(restarted))
    assert p > 0.001


# -- exact oracle -------------------------------------------------------------

def test_exact_one_bernoulli_step():
    s = scenario(b(0.5), b(0.5), d(0), d(1), d(0), horizon=1)
    marginal = gw2.exact_distribution(s, 8).marginal()
    assert marginal[0] == pytest.approx(0.5)
    assert marginal[1] == pytest.approx(0.5)


def test_exact_two_bernoulli_steps():
    s = scenario(b(0.5), b(0.5), d(0), d(1), d(0), horizon=2)
    marginal = gw2.exact_distribution(s, 8).marginal()
    assert marginal[0] == pytest.approx(0.375)
    assert marginal[1] == pytest.approx(0.5)
    assert marginal[2] == pytest.approx(0.125)


def test_exact_truncation_deficit_closed_form():
    T = 10_000
    s = scenario(d(0), d(0), gw2.discrete_pareto(2.5), d(0), d(0), horizon=1)
    exact = gw2.exact_distribution(s, T)
    assert exact.mass_deficit == pytest.approx((T + 1) ** -2.5, rel=1e-9)
    # (T+1)^-2.5 ~ 1e-10 sits below the default 1e-9 warning tolerance
    assert not exact.deficit_warning
    tight = gw2.exact_distribution(s, T, deficit_tolerance=1e-12)
    assert tight.deficit_warning


def test_exact_mass_accounting():
    s = scenario(b(0.4), b(0.3), gw2.poisson(1.0), gw2.poisson(1.0), d(1),
                 horizon=3)
    exact = gw2.exact_distribution(s, 50)
    assert exact.joint.min() >= 0.0
    assert float(exact.joint.sum()) + exact.mass_deficit == pytest.approx(1.0, abs=1e-12)


def test_exact_moment_matches_forecast():
    s = scenario(b(0.4), b(0.3), gw2.poisson(1.0), gw2.poisson(1.0), d(1),
                 horizon=3)
    expected, _ = gw2.mean_forecast(s)
    assert gw2.exact_distribution(s, 60).moment(1) == pytest.approx(expected, rel=1e-9)
