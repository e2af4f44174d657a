import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_assort.choice import Instance, NoAdversary, make_adversary
from robust_assort.policy_adaptive import (
    AdaptiveElimination,
    ThreadState,
    init_grid,
    nested_intersect,
    sample_probabilities,
    thread_width,
)
from robust_assort.policy_robust import ActiveElimination, compute_width
from robust_assort.simulator import run_episode


def _instance(n=4, K=2, T=2000, seed=0):
    rng = np.random.default_rng(seed)
    return Instance(n, K, T, rng.random(n), rng.random(n))


def _thread(j, active, p=1.0, eps=1.0):
    return ThreadState(j, eps, p, tuple(active), np.ones(6))


def test_two_thread_probabilities():
    assert sample_probabilities(2).tolist() == pytest.approx([1 / 3, 2 / 3], abs=1e-15)


@given(st.integers(1, 60))
def test_probabilities_sum_to_one(J):
    p = sample_probabilities(J)
    assert abs(p.sum() - 1) <= 1e-12 and np.all(np.diff(p) > 0)


def test_grid_degenerate_when_n_equals_t():
    J, grid, probs = init_grid(50, 50)
    assert J == 1 and grid.tolist() == [1.0] and probs.tolist() == [1.0]


def test_grid_size():
    # sqrt(20000 / 10) = 44.7 -> ceil(log2) = 6
    J, grid, _ = init_grid(10, 20000)
    assert J == 6 and grid[-1] == 2.0 ** -5
    assert 2.0 ** -J <= math.sqrt(10 / 20000) < 2.0 ** -(J - 1)


def test_grid_rejects_n_above_t():
    with pytest.raises(ValueError):
        init_grid(11, 10)


def test_nested_intersect_examples():
    ths = [_thread(0, (1, 2, 3)), _thread(1, (2, 3, 4))]
    assert nested_intersect(ths) is None
    assert ths[1].active_set == (2, 3)
    same = [_thread(0, (1, 2)), _thread(1, (1, 2))]
    nested_intersect(same)
    assert same[1].active_set == (1, 2)


def test_nested_intersect_reports_empty():
    ths = [_thread(0, (1,)), _thread(1, (2,))]
    assert nested_intersect(ths) == 1


@given(st.lists(st.sets(st.integers(1, 6), min_size=1), min_size=1, max_size=6))
def test_nested_chain(sets):
    ths = [_thread(j, sorted(s)) for j, s in enumerate(sets)]
    if nested_intersect(ths) is None:
        for j in range(len(ths)):
            for k in range(j):
                assert set(ths[j].active_set) <= set(ths[k].active_set)


def test_thread_width_full_probability_is_plain_width():
    th = _thread(0, (1, 2, 3), p=1.0, eps=0.25)
    assert thread_width(th, 10 ** 6, 10 ** 5, 2) == compute_width(0.25, 10 ** 6, 10 ** 5, 3, 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(1e-3, 1), st.integers(10 ** 3, 10 ** 9),
       st.floats(1e-4, 1), st.integers(1, 5))
def test_halving_probability_never_shrinks_width(eps, p, T, frac, K):
    a = _thread(0, (1, 2), p=p, eps=eps)
    b = _thread(0, (1, 2), p=p / 2, eps=eps)
    t_tau = max(1.0, frac * T)
    assert thread_width(b, T, t_tau, K) >= thread_width(a, T, t_tau, K) - 1e-15


def test_thread_width_passes_scaled_lengths(monkeypatch):
    from robust_assort import policy_adaptive
    seen = []
    monkeypatch.setattr(policy_adaptive, "compute_width",
                        lambda *args: seen.append(args) or 0.5)
    th = _thread(0, (1, 2), p=0.25, eps=0.5)
    thread_width(th, 10000, 1200, 3)
    # the short-epoch test inside compares 0.25*1200 against 0.5 * 0.25*10000 / 16
    assert seen == [(0.5, 2500.0, 300.0, 2, 3)]


def test_coarsest_thread_never_restarts():
    pol = AdaptiveElimination(_instance(), J=3, t0=10)
    pol._ensure_epoch()
    assert not any(pol.needs_restart(0, i) for i in pol.threads[0].active_set)


def test_identical_estimates_wide_width_no_restart():
    pol = AdaptiveElimination(_instance(), J=3, t0=10)
    pol._ensure_epoch()
    for th in pol.threads:
        th.width = 1 / 7
    pol._check_cache.clear()
    assert not any(pol.needs_restart(j, i) for j, th in enumerate(pol.threads)
                   for i in th.active_set)


def test_constructed_restart_trigger():
    pol = AdaptiveElimination(_instance(n=3, K=1), J=2, t0=10)
    pol._ensure_epoch()
    coarse, fine = pol.threads
    coarse.estimates = np.array([1.0, 0.0, 0.0])
    coarse.gamma, coarse.width = 0.5, 0.05
    fine.candidates = {2: (2,)}
    pol._check_cache.clear()
    # 0 < 0.5 - 7 * 0.05
    assert pol.needs_restart(1, 2)
    coarse.width = 0.08
    pol._check_cache.clear()
    assert not pol.needs_restart(1, 2)


def test_restart_drops_finest_thread():
    pol = AdaptiveElimination(_instance(), J=3, t0=10)
    rng = np.random.default_rng(0)
    for _ in range(25):
        pol.select(rng)
        pol.observe(0)
    assert pol.restart()
    assert pol.J == 2 and pol.restart_count == 1
    assert [th.eps_hat for th in pol.threads] == [1.0, 0.5]
    assert pol.tau == 0 and all(th.estimates.tolist() == [1.0] * 4 for th in pol.threads)
    assert pol.threads[0].n_purchase == {}


def test_restart_floor():
    pol = AdaptiveElimination(_instance(), J=1, t0=10)
    assert not pol.restart() and pol.J == 1 and pol.restart_count == 0


def test_thread_draw_frequencies():
    pol = AdaptiveElimination(_instance(n=4), J=3, t0=10 ** 6)
    pol._ensure_epoch()
    rng = np.random.default_rng(9)
    n = 10 ** 5
    counts = np.zeros(3)
    for _ in range(n):
        counts[pol.adaptive_select(rng)[0]] += 1
    p = sample_probabilities(3)
    assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)))


def test_only_sampled_thread_counters_change():
    pol = AdaptiveElimination(_instance(n=3, K=3), J=3, t0=50)
    rng = np.random.default_rng(2)
    s = pol.select(rng)
    j, i = pol._sampled
    before = [(dict(th.n_purchase), dict(th.n_nopurchase)) for th in pol.threads]
    other = next((x for x in s if x != i), None)
    if other is not None:
        pol.observe(other)
        assert before == [(th.n_purchase, th.n_nopurchase) for th in pol.threads]
    pol.select(rng)
    j, i = pol._sampled
    pol.observe(i)
    for k, th in enumerate(pol.threads):
        if k == j:
            assert th.n_purchase[i] == before[k][0][i] + 1
        else:
            assert (th.n_purchase, th.n_nopurchase) == before[k]


@pytest.mark.parametrize("seed", range(5))
def test_single_thread_reduces_to_known_eps(seed):
    inst = _instance(n=6, K=2, T=3000, seed=seed)
    ad = AdaptiveElimination(inst, J=1, t0=40)
    ae = ActiveElimination(inst, eps_bar=1.0, t0=40)
    ta = run_episode(ad, inst, NoAdversary(inst.horizon), np.random.default_rng(seed),
                     np.random.default_rng(seed + 1))
    te = run_episode(ae, inst, NoAdversary(inst.horizon), np.random.default_rng(seed),
                     np.random.default_rng(seed + 1))
    assert np.array_equal(ta.instant, te.instant)
    assert ad.threads[0].estimates.tolist() == ae.estimates.tolist()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0, 0.5))
def test_restart_count_bounded(seed, eps):
    inst = _instance(n=5, K=2, T=1500, seed=seed)
    pol = AdaptiveElimination(inst, t0=8)
    rng = np.random.default_rng(seed)
    adv = make_adversary("adaptive_hook", eps, inst.horizon, rng=rng)
    run_episode(pol, inst, adv, rng, np.random.default_rng(seed + 7))
    assert 1 <= pol.J and pol.restart_count <= pol.initial_J
    for rec in pol.log:
        for a, b in zip(rec["active"], rec["active"][1:]):
            assert set(b) <= set(a)
