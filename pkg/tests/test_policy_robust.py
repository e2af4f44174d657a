import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_assort import policy_robust
from robust_assort.choice import Instance, expected_revenue
from robust_assort.optimizer import brute_force_opt
from robust_assort.policy_robust import (
    ActiveElimination,
    T0_CONSTANT,
    compute_width,
    initial_epoch_length,
    uniform_index,
    update_estimate,
    width_display,
)


def _instance(r, v=None, K=1, T=1000):
    r = np.asarray(r, dtype=float)
    v = np.full(r.shape, 0.5) if v is None else np.asarray(v, dtype=float)
    return Instance(len(r), K, T, r, v)


def _width_oracle(eps_tau, log_t, t_tau, n, K):
    # term by term, written out independently of the module
    first = eps_tau / 2.0
    second = (eps_tau * n * log_t / t_tau) ** 0.5
    third = 2.0 * n * log_t / (3.0 * t_tau)
    return 16.0 * K * (K + 1) * (first + second + third) + 16.0 * (K * n * log_t / t_tau) ** 0.5


def test_initial_epoch_length_hand_value():
    assert initial_epoch_length(T0_CONSTANT, 10, 2, math.e, 1.0) == 11520


def test_initial_epoch_length_clamped():
    assert initial_epoch_length(T0_CONSTANT, 10, 2, 1000, 0.0) == 1


def test_initial_width_is_one():
    pol = ActiveElimination(_instance([0.5, 0.5]), eps_bar=0.0)
    assert pol.width == 1.0


def test_width_hand_instance():
    # K=1, N=2, ln T=1, T_tau=1e6, eps_tau=1e-3
    w = width_display(1e-3, 1.0, 1e6, 2, 1)
    hand = 32 * (5e-4 + math.sqrt(2e-9) + 4 / 3e6) + 16 * math.sqrt(2e-6)
    assert w == pytest.approx(hand, rel=1e-12)
    assert w == pytest.approx(0.04010, abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0.1, 20), st.floats(1, 1e7), st.integers(1, 300),
       st.integers(1, 30))
def test_width_matches_oracle(eps_tau, log_t, t_tau, n, K):
    assert width_display(eps_tau, log_t, t_tau, n, K) == pytest.approx(
        _width_oracle(eps_tau, log_t, t_tau, n, K), rel=1e-12)


def test_width_without_contamination():
    T, t_tau, n, K = 10 ** 8, 10 ** 7, 3, 1
    lt = math.log(T)
    want = min(1.0, 16 * K * (K + 1) * 2 * n * lt / (3 * t_tau) + 16 * math.sqrt(K * n * lt / t_tau))
    assert compute_width(0.0, T, t_tau, n, K) == pytest.approx(want, rel=1e-12)
    assert 0 < want < 1


def test_width_short_epoch_branch():
    # T_tau < eps_bar T / (4(K+1)) = 0.1 * 1e6 / 8
    assert compute_width(0.1, 10 ** 6, 12000, 2, 1) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.integers(10, 10 ** 9),
       st.floats(1e-6, 1), st.integers(1, 50), st.integers(1, 10))
def test_width_monotone_in_eps_bar(e1, e2, T, frac, n, K):
    lo, hi = sorted((e1, e2))
    t_tau = max(1.0, frac * T)
    w_lo, w_hi = compute_width(lo, T, t_tau, n, K), compute_width(hi, T, t_tau, n, K)
    assert 0.0 <= w_lo <= w_hi + 1e-15 <= 1.0 + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.01), st.integers(10 ** 6, 10 ** 9), st.integers(1, 50), st.integers(1, 5))
def test_width_decreases_with_epoch_length(eps_bar, T, n, K):
    t1 = eps_bar * T / (4 * (K + 1)) + 1
    widths = [compute_width(eps_bar, T, t1 * 2 ** k, n, K) for k in range(8)]
    assert all(b <= a + 1e-15 for a, b in zip(widths, widths[1:]))


def test_update_estimate_examples():
    assert update_estimate(0, 7) == 0
    assert update_estimate(5, 10) == 0.5
    assert update_estimate(20, 10) == 1
    assert update_estimate(3, 0) == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_update_estimate_in_unit_interval(n_i, n_0):
    assert 0.0 <= update_estimate(n_i, n_0) <= 1.0


def test_unit_width_never_eliminates():
    pol = ActiveElimination(_instance([1.0, 0.0, 0.3], K=1), eps_bar=0.1)
    pol.estimates = np.array([1.0, 0.0, 0.2])
    pol.begin_epoch()
    assert pol.active_set == (1, 2, 3)


@pytest.mark.parametrize("width, kept", [(0.2, (1,)), (0.25, (1, 2))])
def test_elimination_hand_instance(width, kept):
    # gamma = R({1}) = 0.5; item 2's best (K=1) is {2} with R = 0.05; gap 0.45
    pol = ActiveElimination(_instance([1.0, 0.1], [1.0, 1.0], K=1), eps_bar=0.0)
    pol.estimates = np.array([1.0, 1.0])
    pol.width = width
    pol.begin_epoch()
    assert pol.gamma == pytest.approx(0.5)
    assert pol.active_set == kept


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1), st.floats(0, 0.3))
def test_optimal_items_survive_with_exact_estimates(n, seed, width):
    rng = np.random.default_rng(seed)
    r, v = rng.random(n), rng.random(n)
    K = int(rng.integers(1, n + 1))
    pol = ActiveElimination(Instance(n, K, 100, r, v), eps_bar=0.0)
    pol.estimates = v.copy()
    pol.width = width
    pol.begin_epoch()
    best = brute_force_opt(r, v, K)
    assert set(best.assortment) <= set(pol.active_set)
    # the item achieving gamma keeps its own candidate
    assert any(abs(expected_revenue(pol.candidates[i], r, v) - pol.gamma) < 1e-6
               for i in pol.active_set)


def test_singleton_active_set_offers_its_candidate():
    pol = ActiveElimination(_instance([1.0, 0.1], [1.0, 1.0], K=1), eps_bar=0.0)
    pol.estimates = np.array([1.0, 0.0])
    pol.width = 0.01
    pol.begin_epoch()
    rng = np.random.default_rng(0)
    assert pol.active_set == (1,)
    assert all(pol.select_assortment(rng) == pol.candidates[1] for _ in range(100))


def test_uniform_selection_frequencies():
    n = 7
    pol = ActiveElimination(_instance(np.linspace(0.1, 0.9, n)), eps_bar=0.0)
    pol.begin_epoch()
    rng = np.random.default_rng(5)
    draws = 10 ** 5
    counts = np.zeros(n + 1)
    for _ in range(draws):
        pol.select_assortment(rng)
        assert pol._sampled in pol.active_set
        counts[pol._sampled] += 1
    p = 1 / n
    assert np.all(np.abs(counts[1:] - draws * p) <= 3 * math.sqrt(draws * p * (1 - p)))


def test_uniform_index_in_range():
    class Top:
        def random(self):
            return 1.0 - 1e-17
    assert uniform_index(Top(), 5) == 4


def test_counter_updates():
    pol = ActiveElimination(_instance([0.5, 0.5, 0.5], K=3), eps_bar=0.0)
    pol.begin_epoch()
    pol.observe_for(2, 2)
    assert pol.n_purchase[2] == 1 and pol.n_nopurchase[2] == 0
    pol.observe_for(2, 0)
    assert pol.n_nopurchase[2] == 1
    pol.observe_for(2, 3)
    assert pol.n_purchase == {1: 0, 2: 1, 3: 0}
    assert pol.n_nopurchase == {1: 0, 2: 1, 3: 0}


def test_end_epoch_updates_only_active_items():
    pol = ActiveElimination(_instance([1.0, 0.1, 0.1], [1.0, 1.0, 1.0], K=1), eps_bar=0.0)
    pol.estimates = np.array([1.0, 1.0, 0.7])
    pol.width = 0.1
    pol.begin_epoch()
    assert pol.active_set == (1,)
    pol.n_nopurchase[1] = 4
    pol.end_epoch()
    assert pol.estimates.tolist() == [0.0, 1.0, 0.7]
    assert pol.tau == 1


def test_epoch_lengths_double():
    pol = ActiveElimination(_instance([0.5, 0.4], T=100), eps_bar=0.0, t0=3)
    rng = np.random.default_rng(1)
    for _ in range(3 + 6 + 12 + 1):
        pol.select(rng)
        pol.observe(0)
    assert [rec.length for rec in pol.log] == [3, 6, 12, 24]
    assert [rec.completed for rec in pol.log] == [True, True, True, False]


def test_finish_closes_exact_boundary_only():
    pol = ActiveElimination(_instance([0.5, 0.4], T=100), eps_bar=0.0, t0=4)
    rng = np.random.default_rng(1)
    for _ in range(4):
        pol.select(rng)
        pol.observe(0)
    pol.finish()
    assert pol.log[-1].completed and pol.tau == 1


def test_eps_bar_range():
    with pytest.raises(ValueError):
        ActiveElimination(_instance([0.5]), eps_bar=1.5)


def test_policy_only_reads_revenues(monkeypatch):
    inst = _instance([0.9, 0.2], [0.7, 0.1], T=50)
    pol = ActiveElimination(inst, eps_bar=0.0, t0=5)
    other = ActiveElimination(_instance([0.9, 0.2], [0.0, 1.0], T=50), eps_bar=0.0, t0=5)
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    for t in range(50):
        assert pol.select(a) == other.select(b)
        pol.observe(t % 3)
        other.observe(t % 3)


def test_estimate_function_is_swappable(monkeypatch):
    monkeypatch.setattr(policy_robust, "update_estimate", lambda n_i, n_0: 0.25)
    pol = ActiveElimination(_instance([0.5, 0.4]), eps_bar=0.0, t0=1)
    pol.begin_epoch()
    pol.end_epoch()
    assert pol.estimates.tolist() == [0.25, 0.25]
