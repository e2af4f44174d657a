"""Protocol loop, regret accounting, experiment instances and trial runner.

One trial owns one root seed. It is split into independent streams for the
instance draw, the adversary, the policy and the customers, so every policy
in a trial faces the same instance, the same outlier schedule and the same
customer uniforms (common random numbers), and swapping the policy never
perturbs the adversary.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from robust_assort import policy_adaptive, policy_robust
from robust_assort.choice import (
    History,
    Instance,
    choice_probabilities,
    expected_revenue,
    make_adversary,
    sample_choice,
)
from robust_assort.optimizer import brute_force_opt, static_assortment_opt
from robust_assort.policy_adaptive import AdaptiveElimination
from robust_assort.policy_baselines import EpochThompson, EpochUCB
from robust_assort.policy_robust import ActiveElimination

POLICIES = ("active_elim", "adaptive", "ucb", "ts")
INSTANCE_KINDS = ("decoy", "uniform")
STREAMS = ("instance", "adversary", "policy", "customer")
TRACE_COLUMNS = ("policy", "trial", "seed", "t", "cum_regret", "avg_regret")
AGGREGATE_COLUMNS = ("policy", "t", "mean_avg_regret", "sd_avg_regret", "trials")
DEFAULT_UCB_C1 = 0.003


class ProtocolViolation(RuntimeError):
    """A policy offered an assortment that breaks |S| <= K or item ranges."""


# instances -------------------------------------------------------------


def generate_decoy_instance(n_items, capacity, horizon, rng):
    """Contaminated-experiment instance.

    Items 1..K earn revenue 1 but typical customers never buy them (v = 0);
    the rest have r, v ~ U[0.1, 0.2]. Outliers follow an MNL that gives the
    zero-utility items weight 1 and leaves the others unchanged.
    """
    if capacity >= n_items:
        raise ValueError("need K < N")
    m = n_items - capacity
    r = np.concatenate([np.ones(capacity), rng.uniform(0.1, 0.2, m)])
    v = np.concatenate([np.zeros(capacity), rng.uniform(0.1, 0.2, m)])
    outlier_v = np.where(v == 0, 1.0, v)
    return Instance(n_items, capacity, horizon, r, v), outlier_v


def generate_uniform_instance(n_items, capacity, horizon, rng):
    r = rng.random(n_items)
    v = rng.random(n_items)
    return Instance(n_items, capacity, horizon, r, v), np.where(v < 0.1, 1.0, v)


def true_optimum(instance):
    """S* on the true utilities; brute force is authoritative when N <= 20."""
    res = static_assortment_opt(instance.revenues, instance.utilities, instance.capacity)
    if instance.n_items <= 20:
        bf = brute_force_opt(instance.revenues, instance.utilities, instance.capacity)
        if bf.estimated_revenue > res.estimated_revenue + 1e-9:
            raise AssertionError("bisection optimum disagrees with brute force")
        return bf
    return res


# episodes --------------------------------------------------------------


@dataclass
class RegretTrace:
    policy: str
    trial: int
    seed: int
    instant: np.ndarray
    opt_revenue: float = 0.0
    n_outliers: int = 0

    @property
    def cumulative(self):
        return np.cumsum(self.instant)

    @property
    def average(self):
        return self.cumulative / np.arange(1, self.instant.shape[0] + 1)

    def at(self, checkpoints):
        cum = self.cumulative
        return [(t, float(cum[t - 1]), float(cum[t - 1]) / t) for t in checkpoints]


class FixedPolicy:
    """Offers one assortment forever (oracle / sanity baseline)."""

    label = "fixed"

    def __init__(self, assortment):
        self.assortment = tuple(assortment)

    def select(self, rng):
        return self.assortment

    def observe(self, purchased):
        pass

    def finish(self):
        pass


def run_episode(policy, instance, adversary, policy_rng, customer_rng,
                label=None, trial=0, seed=0, opt=None, history=None):
    """Play one horizon of the customer/adversary/policy protocol.

    Per period the adversary commits (phi_t, Q_t) from the full history,
    then the policy (which only ever sees its own assortments and the
    purchases) picks S_t, then the purchase is drawn. Regret is the expected
    revenue gap R(S*) - R(S_t) under the typical-customer model.
    """
    if opt is None:
        opt = true_optimum(instance)
    r, v = instance.revenues, instance.utilities
    n, cap = instance.n_items, instance.capacity
    r_star = opt.estimated_revenue
    T = instance.horizon
    if history is None:
        history = History(n)
    instant = np.empty(T)
    revs = {}
    typical = {}
    for t in range(1, T + 1):
        phi, q = adversary.commit(history, t)
        s = policy.select(policy_rng)
        rev = revs.get(s)
        if rev is None:
            if (len(s) > cap or len(set(s)) != len(s)
                    or any(not 1 <= i <= n for i in s)):
                raise ProtocolViolation(f"period {t}: illegal assortment {s!r}")
            rev = expected_revenue(s, r, v)
            revs[s] = rev
        if phi:
            dist = q(s)
        else:
            dist = typical.get(s)
            if dist is None:
                dist = typical[s] = choice_probabilities(s, v)
        purchased = sample_choice(dist, customer_rng)
        history.append(phi, q, s, purchased)
        policy.observe(purchased)
        instant[t - 1] = r_star - rev
    policy.finish()
    return RegretTrace(label or getattr(policy, "label", "policy"), trial, seed,
                       instant, r_star, history.n_outliers)


def delta_star_diagnostic(capacity, eps, horizon, epoch_len, n_active, v_s, v_i):
    """High-probability bound on |v_hat_i - v_i| after one epoch (test diagnostic).

    v_s is the true total utility of the candidate assortment that was
    offered to estimate item i.
    """
    K = capacity
    log_t = math.log(max(float(horizon), 1.0))
    eps_tau = min(1.0, eps * horizon / epoch_len)
    a = n_active * log_t / epoch_len
    return (8 * (K + 1) * (eps_tau / 2 + math.sqrt(eps_tau * a) + 2 * a / 3)
            + 8 * math.sqrt((1 + v_s) * v_i * a))


# experiments -------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    k: int
    t: int
    eps: float = 0.0
    eps_bar: float = None
    explore_scale: object = "auto"
    policies: tuple = POLICIES
    adversary: str = "front_loaded"
    instance: str = "decoy"
    trials: int = 20
    seed: int = 0
    ucb_c1: float = DEFAULT_UCB_C1
    checkpoints: int = 50
    full_trace: bool = False
    out: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self):
        out = []
        if self.n < 1:
            out.append("n: must be >= 1")
        if not 1 <= self.k <= self.n:
            out.append("k: need 1 <= k <= n")
        if self.instance == "decoy" and self.k >= self.n:
            out.append("k: decoy instance needs k < n")
        if self.t < max(1, self.n):
            out.append("t: need t >= n")
        if not 0.0 <= self.eps < 1.0:
            out.append("eps: must lie in [0, 1)")
        if self.eps_bar is not None and not 0.0 <= self.eps_bar <= 1.0:
            out.append("eps_bar: must lie in [0, 1]")
        if not (self.explore_scale == "auto"
                or (isinstance(self.explore_scale, (int, float))
                    and not isinstance(self.explore_scale, bool)
                    and self.explore_scale >= 0)):
            out.append("explore_scale: must be 'auto' or a nonnegative number")
        for p in self.policies:
            if p not in POLICIES:
                out.append(f"policies: unknown policy {p!r} (choose from {', '.join(POLICIES)})")
        if not self.policies:
            out.append("policies: at least one policy required")
        if self.adversary not in ("none", "front_loaded", "adaptive_hook"):
            out.append(f"adversary: unknown kind {self.adversary!r}")
        if self.instance not in INSTANCE_KINDS:
            out.append(f"instance: unknown kind {self.instance!r}")
        if self.trials < 1:
            out.append("trials: must be >= 1")
        if self.checkpoints < 1:
            out.append("checkpoints: must be >= 1")
        if self.ucb_c1 < 0:
            out.append("ucb_c1: must be >= 0")
        return out

    @property
    def effective_eps_bar(self):
        return self.eps if self.eps_bar is None else self.eps_bar

    def to_dict(self):
        d = asdict(self)
        d["policies"] = list(self.policies)
        if d["eps_bar"] is None:
            del d["eps_bar"]
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def trial_streams(seed):
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def build_trial(config, seed):
    """Instance, adversary and generators of one trial (fresh on each call)."""
    rngs = trial_streams(seed)
    gen = generate_decoy_instance if config.instance == "decoy" else generate_uniform_instance
    instance, outlier_v = gen(config.n, config.k, config.t, rngs["instance"])
    adversary = make_adversary(config.adversary, config.eps, config.t, outlier_v,
                               rngs["adversary"])
    return instance, adversary, rngs


def make_policy(name, instance, config):
    if name == "active_elim":
        scale = config.explore_scale
        if scale == "auto":
            scale = policy_robust.auto_explore_scale(
                policy_robust.T0_CONSTANT, instance.n_items, instance.capacity,
                instance.horizon)
        return ActiveElimination(instance, config.effective_eps_bar, explore_scale=scale)
    if name == "adaptive":
        scale = config.explore_scale
        if scale == "auto":
            scale = policy_robust.auto_explore_scale(
                policy_adaptive.T0_CONSTANT, 1, instance.capacity, instance.horizon)
        return AdaptiveElimination(instance, explore_scale=scale)
    if name == "ucb":
        return EpochUCB(instance, c1=config.ucb_c1)
    if name == "ts":
        return EpochThompson(instance)
    raise ValueError(f"unknown policy {name!r}")


def run_trial(config, policy_name, trial):
    seed = config.seed + trial
    instance, adversary, rngs = build_trial(config, seed)
    policy = make_policy(policy_name, instance, config)
    return run_episode(policy, instance, adversary, rngs["policy"], rngs["customer"],
                       label=policy_name, trial=trial, seed=seed)


def _run_task(args):
    config, policy_name, trial = args
    return run_trial(config, policy_name, trial)


def checkpoint_grid(horizon, count):
    """``count`` evenly spaced periods ending at the horizon (deduplicated)."""
    count = min(count, horizon)
    return sorted({max(1, int(round(horizon * k / count))) for k in range(1, count + 1)})


def run_traces(config, jobs=1):
    """All (policy, trial) traces, ordered by policy order then trial index."""
    tasks = [(config, p, k) for p in config.policies for k in range(config.trials)]
    if jobs <= 1 or len(tasks) == 1:
        traces = [_run_task(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            traces = list(ex.map(_run_task, tasks, chunksize=1))
    order = {p: n for n, p in enumerate(config.policies)}
    return sorted(traces, key=lambda tr: (order[tr.policy], tr.trial))


def aggregate(traces, checkpoints):
    """Mean and sd of average regret per (policy, checkpoint)."""
    by_policy = {}
    for tr in traces:
        by_policy.setdefault(tr.policy, []).append(tr)
    rows = []
    rank = {p: k for k, p in enumerate(POLICIES)}
    for policy in sorted(by_policy, key=lambda p: (rank.get(p, len(rank)), p)):
        trs = by_policy[policy]
        trs = sorted(trs, key=lambda x: x.trial)
        idx = np.asarray(checkpoints)
        avg = np.array([tr.cumulative[idx - 1] / idx for tr in trs])
        mean = avg.mean(axis=0)
        sd = avg.std(axis=0, ddof=1) if len(trs) > 1 else np.zeros(len(checkpoints))
        for t, m, s in zip(checkpoints, mean, sd):
            rows.append({"policy": policy, "t": t, "mean_avg_regret": float(m),
                         "sd_avg_regret": float(s), "trials": len(trs)})
    return rows


def run_trials(config, checkpoints=None, jobs=1):
    """Run every configured policy for ``config.trials`` seeded trials.

    Returns ``(traces, rows)``; rows hold mean/sd of average regret at the
    checkpoints (default: quarters of the horizon).
    """
    if checkpoints is None:
        checkpoints = checkpoint_grid(config.t, 4)
    traces = run_traces(config, jobs)
    return traces, aggregate(traces, checkpoints)


def _fmt(x):
    return repr(float(x))


def write_trace_csv(path, traces, checkpoints=None):
    """Per-trial regret at checkpoints (every period when ``checkpoints`` is None)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for tr in traces:
            pts = checkpoints or range(1, tr.instant.shape[0] + 1)
            for t, cum, avg in tr.at(pts):
                w.writerow([tr.policy, tr.trial, tr.seed, t, _fmt(cum), _fmt(avg)])


def write_aggregate_csv(path, rows, extra_columns=()):
    cols = tuple(extra_columns) + AGGREGATE_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
