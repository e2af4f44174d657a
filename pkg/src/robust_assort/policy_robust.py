"""Active-elimination policy for a known outlier proportion upper bound.

Time is split into epochs of doubling length T_tau = 2**tau * T_0. At the
start of each epoch the policy computes, for every active item i, the best
assortment containing i under the current estimates, drops items whose best
assortment trails the overall optimum by more than twice the confidence
width, and then spends the epoch offering the candidate of a uniformly
sampled active item. Estimates are rebuilt from scratch every epoch, so
contamination in one epoch cannot leak into later ones.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from robust_assort.choice import NO_PURCHASE
from robust_assort.optimizer import (
    DEFAULT_DELTA,
    constrained_assortment_opt_many,
    static_assortment_opt,
)

T0_CONSTANT = 128


class InvariantViolation(AssertionError):
    pass


def uniform_index(rng, n):
    """Uniform draw from range(n) consuming exactly one ``rng.random()``."""
    return min(int(rng.random() * n), n - 1)


def _log_horizon(horizon):
    # floored at 1: thread horizons p_j * T can fall below e, where ln would
    # shrink (or flip the sign of) every confidence term
    return max(1.0, math.log(float(horizon)))


def initial_epoch_length(constant, n_factor, capacity, horizon, explore_scale):
    """round(explore_scale * constant * (K+1)^2 * n_factor * ln T), at least 1."""
    base = constant * (capacity + 1) ** 2 * n_factor * _log_horizon(horizon)
    return max(1, int(round(explore_scale * base)))


def auto_explore_scale(constant, n_factor, capacity, horizon, fraction=1 / 64):
    """explore_scale that makes T_0 about ``fraction * T``."""
    base = constant * (capacity + 1) ** 2 * n_factor * _log_horizon(horizon)
    return fraction * horizon / base


def width_display(eps_tau, log_t, epoch_len, n_active, capacity):
    """The unclamped confidence-width expression for given eps_tau and ln T."""
    K = capacity
    a = n_active * log_t / epoch_len
    return (16 * K * (K + 1) * (eps_tau / 2 + math.sqrt(eps_tau * a) + 2 * a / 3)
            + 16 * math.sqrt(K * a))


def compute_width(eps_bar, horizon, epoch_len, n_active, capacity):
    """Confidence width on revenue error, clamped to [0, 1].

    Short epochs (T_tau < eps_bar*T / (4(K+1))) get the trivial width 1;
    otherwise eps_tau = min(1, eps_bar*T/T_tau) enters the display.
    """
    if epoch_len < eps_bar * horizon / (4 * (capacity + 1)):
        return 1.0
    eps_tau = min(1.0, eps_bar * horizon / epoch_len)
    w = width_display(eps_tau, _log_horizon(horizon), epoch_len, n_active, capacity)
    return min(1.0, max(0.0, w))


def update_estimate(n_i, n_0):
    # the ratio is clipped into [0, 1], the admissible utility range
    if n_0 <= 0:
        return 1.0
    return min(1.0, n_i / n_0)


@dataclass
class EpochRecord:
    """What one epoch looked like; kept for diagnostics and tests."""

    tau: int
    length: int
    active_before: tuple
    active: tuple
    estimates: np.ndarray
    gamma: float
    width: float
    candidates: dict
    n_purchase: dict = field(default_factory=dict)
    n_nopurchase: dict = field(default_factory=dict)
    completed: bool = False


class ActiveElimination:
    """Known-eps_bar active-elimination policy.

    Only ``instance.revenues``, ``capacity``, ``horizon`` and ``n_items``
    are read; the utilities stay hidden. ``t0`` overrides the initial epoch
    length outright (used to match conventions across policies).
    """

    label = "active_elim"

    def __init__(self, instance, eps_bar, explore_scale=1.0, t0=None,
                 delta=DEFAULT_DELTA, keep_log=True):
        if not 0.0 <= eps_bar <= 1.0:
            raise ValueError("eps_bar must lie in [0, 1]")
        self.revenues = np.asarray(instance.revenues, dtype=float)
        self.n_items = instance.n_items
        self.capacity = instance.capacity
        self.horizon = instance.horizon
        self.eps_bar = float(eps_bar)
        self.explore_scale = float(explore_scale)
        self.delta = delta
        if t0 is None:
            t0 = initial_epoch_length(T0_CONSTANT, self.n_items, self.capacity,
                                      self.horizon, self.explore_scale)
        self.t0 = max(1, int(t0))

        self.tau = 0
        self.epoch_length = self.t0
        self.active_set = tuple(range(1, self.n_items + 1))
        self.estimates = np.ones(self.n_items)
        self.width = 1.0
        self.gamma = None
        self.candidates = {}
        self.n_purchase = {}
        self.n_nopurchase = {}
        self.remaining = 0
        self._sampled = None
        self._active_list = []
        self.keep_log = keep_log
        self.log = []
        self._started = False

    # epoch boundaries -------------------------------------------------

    def begin_epoch(self):
        prev = self.active_set
        gamma = static_assortment_opt(self.revenues, self.estimates, self.capacity,
                                      self.delta, active=prev).estimated_revenue
        cands = constrained_assortment_opt_many(self.revenues, self.estimates,
                                                self.capacity, prev, self.delta,
                                                active=prev)
        keep = tuple(i for i in prev
                     if cands[i].estimated_revenue + 2 * self.width >= gamma)
        if not keep:
            raise InvariantViolation("active set became empty")
        self.gamma = gamma
        self.active_set = keep
        self._active_list = list(keep)
        self.candidates = {i: cands[i].assortment for i in keep}
        self.n_purchase = {i: 0 for i in keep}
        self.n_nopurchase = {i: 0 for i in keep}
        self.epoch_length = (2 ** self.tau) * self.t0
        self.remaining = self.epoch_length
        if self.keep_log:
            self.log.append(EpochRecord(
                tau=self.tau, length=self.epoch_length, active_before=prev,
                active=keep, estimates=self.estimates.copy(), gamma=gamma,
                width=self.width, candidates=dict(self.candidates)))

    def end_epoch(self):
        for i in self.active_set:
            self.estimates[i - 1] = update_estimate(self.n_purchase[i], self.n_nopurchase[i])
        self.width = compute_width(self.eps_bar, self.horizon, self.epoch_length,
                                   len(self.active_set), self.capacity)
        if self.keep_log:
            rec = self.log[-1]
            rec.n_purchase = dict(self.n_purchase)
            rec.n_nopurchase = dict(self.n_nopurchase)
            rec.completed = True
        self.tau += 1

    # per period ---------------------------------------------------------

    def select_assortment(self, rng):
        i = self._active_list[uniform_index(rng, len(self._active_list))]
        self._sampled = i
        return self.candidates[i]

    def observe_for(self, sampled_i, purchased):
        if purchased == sampled_i:
            self.n_purchase[sampled_i] += 1
        elif purchased == NO_PURCHASE:
            self.n_nopurchase[sampled_i] += 1

    # protocol interface used by the simulator ---------------------------

    def select(self, rng):
        if not self._started:
            self.begin_epoch()
            self._started = True
        elif self.remaining == 0:
            self.end_epoch()
            self.begin_epoch()
        return self.select_assortment(rng)

    def observe(self, purchased):
        self.observe_for(self._sampled, purchased)
        self.remaining -= 1

    def finish(self):
        """Close the epoch if the horizon ended exactly on its boundary.

        A partially completed epoch is left open: its counters are never
        turned into estimates.
        """
        if self._started and self.remaining == 0:
            self.end_epoch()

    def active_history(self):
        return [rec.active for rec in self.log]
