"""Oracle-equivalence and invariant suites behind ``robust-assort selftest``.

Each suite returns a SuiteResult; failures carry the seed that reproduces
them.
"""

from dataclasses import dataclass, field

import numpy as np

from robust_assort import optimizer
from robust_assort.choice import (
    Instance,
    NoAdversary,
    choice_probabilities,
    expected_revenue,
)
from robust_assort.policy_robust import ActiveElimination, auto_explore_scale, T0_CONSTANT
from robust_assort import policy_robust
from robust_assort.simulator import delta_star_diagnostic, run_episode, trial_streams


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def _random_subset(rng, n, max_size):
    size = int(rng.integers(0, min(n, max_size) + 1))
    return tuple(sorted(int(i) + 1 for i in rng.choice(n, size, replace=False)))


def optimizer_oracle(n_instances=1000, seed=0, tol=1e-6, delta=1e-9):
    """Bisection optimizers vs exhaustive search, every must-include item."""
    res = SuiteResult("optimizer-vs-brute-force")
    for k in range(n_instances):
        rng = np.random.default_rng([seed, k])
        n = int(rng.integers(1, 13))
        K = int(rng.integers(1, min(4, n) + 1))
        r, v = rng.random(n), rng.random(n)
        got = optimizer.static_assortment_opt(r, v, K, delta).estimated_revenue
        want = optimizer.brute_force_opt(r, v, K).estimated_revenue
        res.cases += 1
        if abs(got - want) > tol:
            res.failures.append(f"static seed=[{seed},{k}] got={got} want={want}")
        for m in range(1, n + 1):
            got = optimizer.constrained_assortment_opt(r, v, K, m, delta)
            want = optimizer.brute_force_opt(r, v, K, must_include=m).estimated_revenue
            res.cases += 1
            if (abs(got.estimated_revenue - want) > tol or m not in got.assortment
                    or len(got.assortment) > K):
                res.failures.append(
                    f"constrained seed=[{seed},{k}] must={m} got={got} want={want}")
    return res


def choice_invariants(n_draws=10_000, seed=1, max_n=50):
    res = SuiteResult("choice-invariants")
    rng = np.random.default_rng(seed)
    for k in range(n_draws):
        n = int(rng.integers(1, max_n + 1))
        v, r = rng.random(n), rng.random(n)
        s = _random_subset(rng, n, n)
        p = choice_probabilities(s, v).probs
        rev = expected_revenue(s, r, v)
        via_probs = sum(r[i - 1] * p[1 + j] for j, i in enumerate(s))
        res.cases += 1
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12 or abs(rev - via_probs) > 1e-12:
            res.failures.append(f"seed={seed} draw={k} S={s}")
    return res


def revenue_perturbation(n_draws=10_000, seed=2, max_size=10):
    """|R(S; v_hat) - R(S; v)| <= 2 sum|v_hat - v| / (1 + sum v)."""
    res = SuiteResult("revenue-perturbation-bound")
    rng = np.random.default_rng(seed)
    for k in range(n_draws):
        n = int(rng.integers(1, 21))
        r, v = rng.random(n), rng.random(n)
        vh = np.clip(v + rng.normal(0, rng.choice([0.01, 0.1, 1.0]), n), 0, None)
        s = _random_subset(rng, n, max_size)
        idx = [i - 1 for i in s]
        lhs = abs(expected_revenue(s, r, vh) - expected_revenue(s, r, v))
        rhs = 2 * np.abs(vh[idx] - v[idx]).sum() / (1 + v[idx].sum())
        res.cases += 1
        if lhs > rhs + 1e-12:
            res.failures.append(f"seed={seed} draw={k} lhs={lhs} rhs={rhs}")
    return res


def feasibility_monotone(n_instances=300, seed=3):
    res = SuiteResult("feasibility-monotone-in-alpha")
    rng = np.random.default_rng(seed)
    alphas = np.linspace(0.01, 1.0, 40)
    for k in range(n_instances):
        n = int(rng.integers(1, 13))
        K = int(rng.integers(1, min(4, n) + 1))
        r, v = rng.random(n), rng.random(n)
        must = None if rng.random() < 0.5 else int(rng.integers(1, n + 1))
        flags = [optimizer.feasibility_check(r, v, K, a, must)[0] for a in alphas]
        res.cases += 1
        # once infeasible, stays infeasible as alpha grows
        if any(not a and b for a, b in zip(flags, flags[1:])):
            res.failures.append(f"seed={seed} instance={k}")
    return res


def estimate_coverage(n_items, capacity, horizon, v_low, v_high, runs, seed,
                      eps=0.0, min_epochs=3):
    """Fraction of (completed epoch, active item) pairs with |v_hat - v| <= Delta*.

    Uncontaminated episodes of the known-eps policy with T_0 ~ T/64.
    Returns (covered, total, width_covered, width_total).
    """
    covered = total = wcov = wtot = 0
    for run in range(runs):
        rngs = trial_streams(seed + run)
        r = rngs["instance"].random(n_items)
        v = rngs["instance"].uniform(v_low, v_high, n_items)
        inst = Instance(n_items, capacity, horizon, r, v)
        scale = auto_explore_scale(T0_CONSTANT, n_items, capacity, horizon)
        pol = ActiveElimination(inst, eps, explore_scale=scale)
        run_episode(pol, inst, NoAdversary(horizon), rngs["policy"], rngs["customer"])
        done = [rec for rec in pol.log if rec.completed]
        if len(done) < min_epochs:
            raise AssertionError(f"only {len(done)} epochs completed; raise horizon")
        for rec in done:
            for i in rec.active:
                vh = policy_robust.update_estimate(rec.n_purchase[i], rec.n_nopurchase[i])
                v_s = float(sum(v[j - 1] for j in rec.candidates[i]))
                bound = delta_star_diagnostic(capacity, eps, horizon, rec.length,
                                              len(rec.active), v_s, v[i - 1])
                total += 1
                covered += abs(vh - v[i - 1]) <= bound
        for rec in pol.log:
            for s in rec.candidates.values():
                gap = abs(expected_revenue(s, r, rec.estimates) - expected_revenue(s, r, v))
                wtot += 1
                wcov += gap <= rec.width
    return covered, total, wcov, wtot


def coverage_suite(runs=4, seed=100, level=0.99):
    """Small-utility instances so a wrong estimator cannot hide inside the bound."""
    res = SuiteResult("estimate-coverage")
    covered, total, wcov, wtot = estimate_coverage(
        n_items=4, capacity=2, horizon=100_000, v_low=0.05, v_high=0.3,
        runs=runs, seed=seed)
    res.cases = total + wtot
    if covered < level * total:
        res.failures.append(f"seed={seed} estimate coverage {covered}/{total} < {level}")
    if wcov < level * wtot:
        res.failures.append(f"seed={seed} revenue-width coverage {wcov}/{wtot} < {level}")
    return res


SUITES = (optimizer_oracle, choice_invariants, revenue_perturbation,
          feasibility_monotone, coverage_suite)


def run_all(out=print):
    results = []
    for suite in SUITES:
        res = suite()
        results.append(res)
        status = "ok" if res.ok else "FAIL"
        out(f"{res.name}: {res.cases} cases, {len(res.failures)} failures [{status}]")
        for f in res.failures[:20]:
            out(f"  {f}")
    return results
