"""Active elimination without knowing the outlier proportion.

J "threads" run the known-eps logic side by side for hypothetical
proportions 1, 1/2, ..., 2**-(J-1). Each period one thread is drawn, with
finer (more aggressive) threads drawn more often, and that thread supplies
the assortment and collects the feedback. Active sets are forced to nest
(finer threads keep a subset of coarser threads' items), and if a fine
thread's candidate looks clearly bad under a coarser thread's estimates,
the whole policy restarts with the finest thread dropped.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from robust_assort import policy_robust
from robust_assort.choice import NO_PURCHASE, expected_revenue
from robust_assort.optimizer import (
    DEFAULT_DELTA,
    constrained_assortment_opt_many,
    static_assortment_opt,
)
from robust_assort.policy_robust import InvariantViolation, compute_width, uniform_index

T0_CONSTANT = 64
RESTART_FACTOR = 7


def sample_probabilities(J):
    """Thread j is drawn with probability 2**-(J-j) / (1 - 2**-J)."""
    norm = 1.0 - 2.0 ** (-J)
    return np.array([2.0 ** (-(J - j)) / norm for j in range(J)])


def init_grid(n_items, horizon):
    """Grid size J, the eps grid 2**-j and the thread sampling probabilities.

    J is the smallest count (at least 1) whose finest value 2**-J is at
    most sqrt(N/T).
    """
    if n_items > horizon:
        raise ValueError("need N <= T")
    J = max(1, math.ceil(math.log2(math.sqrt(horizon / n_items)) - 1e-12))
    grid = np.array([2.0 ** (-j) for j in range(J)])
    return J, grid, sample_probabilities(J)


@dataclass
class ThreadState:
    thread_id: int
    eps_hat: float
    sample_prob: float
    active_set: tuple
    estimates: np.ndarray
    width: float = 1.0
    gamma: float = 0.0
    candidates: dict = field(default_factory=dict)
    n_purchase: dict = field(default_factory=dict)
    n_nopurchase: dict = field(default_factory=dict)


def nested_intersect(threads):
    """Intersect each thread's active set with its coarser neighbour's, in order.

    Returns the id of the first thread whose intersection came out empty,
    or None.
    """
    for j in range(1, len(threads)):
        coarser = set(threads[j - 1].active_set)
        mine = tuple(i for i in threads[j].active_set if i in coarser)
        if not mine:
            return j
        threads[j].active_set = mine
    return None


def thread_width(thread, horizon, epoch_len, capacity):
    """Width of one thread: horizon and epoch length both scaled by its draw probability."""
    p = thread.sample_prob
    return compute_width(thread.eps_hat, p * horizon, p * epoch_len,
                         len(thread.active_set), capacity)


class AdaptiveElimination:
    label = "adaptive"

    def __init__(self, instance, explore_scale=1.0, t0=None, J=None,
                 delta=DEFAULT_DELTA, keep_log=True):
        self.revenues = np.asarray(instance.revenues, dtype=float)
        self.n_items = instance.n_items
        self.capacity = instance.capacity
        self.horizon = instance.horizon
        self.explore_scale = float(explore_scale)
        self.delta = delta
        if t0 is None:
            t0 = policy_robust.initial_epoch_length(T0_CONSTANT, 1, self.capacity,
                                                    self.horizon, self.explore_scale)
        self.t0 = max(1, int(t0))
        if J is None:
            J = init_grid(self.n_items, self.horizon)[0]
        self.initial_J = int(J)
        self.restart_count = 0
        self.restart_periods = []
        self.keep_log = keep_log
        self.log = []
        self.elapsed = 0
        self._reset(self.initial_J)

    def _reset(self, J):
        self.J = J
        probs = sample_probabilities(J)
        self._cum = np.cumsum(probs).tolist()
        self.threads = [
            ThreadState(j, 2.0 ** (-j), float(probs[j]),
                        tuple(range(1, self.n_items + 1)), np.ones(self.n_items))
            for j in range(J)
        ]
        self.tau = 0
        self.epoch_length = self.t0
        self.remaining = 0
        self._started = False
        self._check_cache = {}
        self._sampled = None

    def restart(self):
        if self.J <= 1:
            return False
        self.restart_count += 1
        self.restart_periods.append(self.elapsed + 1)
        self._reset(self.J - 1)
        return True

    # epoch boundaries -------------------------------------------------

    def begin_epoch(self):
        """Nest, optimize and eliminate thread by thread.

        Returns False if a nesting step produced an empty set (a restart
        trigger), True otherwise.
        """
        for j, th in enumerate(self.threads):
            if j > 0:
                coarser = set(self.threads[j - 1].active_set)
                th.active_set = tuple(i for i in th.active_set if i in coarser)
                if not th.active_set:
                    return False
            prev = th.active_set
            gamma = static_assortment_opt(self.revenues, th.estimates, self.capacity,
                                          self.delta, active=prev).estimated_revenue
            cands = constrained_assortment_opt_many(self.revenues, th.estimates,
                                                    self.capacity, prev, self.delta,
                                                    active=prev)
            keep = tuple(i for i in prev
                         if cands[i].estimated_revenue + 2 * th.width >= gamma)
            if not keep:
                raise InvariantViolation(f"thread {j} active set became empty")
            th.gamma = gamma
            th.active_set = keep
            th.candidates = {i: cands[i].assortment for i in keep}
            th.n_purchase = {i: 0 for i in keep}
            th.n_nopurchase = {i: 0 for i in keep}
        self.epoch_length = (2 ** self.tau) * self.t0
        self.remaining = self.epoch_length
        self._check_cache = {}
        if self.keep_log:
            self.log.append({
                "restart": self.restart_count,
                "tau": self.tau,
                "J": self.J,
                "active": [th.active_set for th in self.threads],
                "widths": [th.width for th in self.threads],
            })
        return True

    def end_epoch(self):
        for th in self.threads:
            for i in th.active_set:
                th.estimates[i - 1] = policy_robust.update_estimate(
                    th.n_purchase[i], th.n_nopurchase[i])
            th.width = thread_width(th, self.horizon, self.epoch_length, self.capacity)
        self.tau += 1

    # per period ---------------------------------------------------------

    def needs_restart(self, j, i):
        """Does thread j's candidate for item i look bad to some coarser thread?"""
        key = (j, i)
        hit = self._check_cache.get(key)
        if hit is None:
            s = self.threads[j].candidates[i]
            hit = False
            for k in range(j):
                th = self.threads[k]
                rev = expected_revenue(s, self.revenues, th.estimates)
                if rev < th.gamma - RESTART_FACTOR * th.width:
                    hit = True
                    break
            self._check_cache[key] = hit
        return hit

    def adaptive_select(self, rng):
        """Draw (thread, item) and report whether the restart rule fires."""
        if self.J == 1:
            j = 0
        else:
            u = rng.random()
            j = next((k for k, c in enumerate(self._cum) if u < c), self.J - 1)
        th = self.threads[j]
        i = th.active_set[uniform_index(rng, len(th.active_set))]
        return j, i, th.candidates[i], self.needs_restart(j, i)

    def _ensure_epoch(self):
        while True:
            if not self._started:
                ok = self.begin_epoch()
                self._started = True
            elif self.remaining == 0:
                self.end_epoch()
                ok = self.begin_epoch()
            else:
                return
            if ok:
                return
            self.restart()

    def select(self, rng):
        while True:
            self._ensure_epoch()
            j, i, s, flag = self.adaptive_select(rng)
            if flag and self.restart():
                continue
            self._sampled = (j, i)
            return s

    def observe(self, purchased):
        j, i = self._sampled
        th = self.threads[j]
        if purchased == i:
            th.n_purchase[i] += 1
        elif purchased == NO_PURCHASE:
            th.n_nopurchase[i] += 1
        self.remaining -= 1
        self.elapsed += 1

    def finish(self):
        if self._started and self.remaining == 0:
            self.end_epoch()
