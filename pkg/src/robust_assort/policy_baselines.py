"""Epoch-based UCB and Thompson-sampling baselines for MNL bandits.

Both offer the same assortment until the first no-purchase, then treat the
number of purchases of each offered item during that epoch as an unbiased
draw of its utility (a geometric count with mean v_i), and re-optimize.
Neither is designed for outliers: a burst of contaminated epochs moves
their running averages / posteriors for a long time.
"""

import math

import numpy as np

from robust_assort.choice import NO_PURCHASE
from robust_assort.optimizer import DEFAULT_DELTA, static_assortment_opt

UCB_CONSTANT = 48.0


class _EpochBaseline:
    def __init__(self, instance, delta=DEFAULT_DELTA, max_epoch_length=None):
        self.revenues = np.asarray(instance.revenues, dtype=float)
        self.n_items = instance.n_items
        self.capacity = instance.capacity
        self.horizon = instance.horizon
        self.delta = delta
        # an epoch only ends on a no-purchase; the cap keeps episodes finite
        # even against outliers that never leave empty-handed
        self.max_epoch_length = int(max_epoch_length or instance.horizon)
        self.purchases = np.zeros(self.n_items)   # cumulative purchases per item
        self.epoch_counts = np.zeros(self.n_items)  # epochs in which the item was offered
        self.n_epochs = 0
        self.assortment = None
        self.tally = {}
        self.epoch_periods = 0

    def _optimize(self, weights):
        return static_assortment_opt(self.revenues, weights, self.capacity,
                                     self.delta).assortment

    def _next_assortment(self, rng):
        raise NotImplementedError

    def select(self, rng):
        if self.assortment is None:
            self.assortment = self._next_assortment(rng)
            self.tally = {i: 0 for i in self.assortment}
            self.epoch_periods = 0
        return self.assortment

    def observe(self, purchased):
        self.epoch_periods += 1
        if purchased != NO_PURCHASE and purchased in self.tally:
            self.tally[purchased] += 1
        if purchased == NO_PURCHASE or self.epoch_periods >= self.max_epoch_length:
            self._close_epoch()

    def step(self, rng, observation=None):
        """Feed the last period's outcome (if any) and return the next assortment."""
        if observation is not None:
            self.observe(observation)
        return self.select(rng)

    def _close_epoch(self):
        for i, c in self.tally.items():
            self.purchases[i - 1] += c
            self.epoch_counts[i - 1] += 1
        self.n_epochs += 1
        self._after_epoch(self.tally)
        self.assortment = None

    def _after_epoch(self, tally):
        pass

    def finish(self):
        pass


class EpochUCB(_EpochBaseline):
    """Optimistic index v_bar + C1*(sqrt(48 v_bar L / T_i) + 48 L / T_i).

    L = ln(sqrt(N) * l + 1) with l the number of completed epochs plus one.
    C1 = 1 gives the constants of the original analysis; smaller values
    explore less. Items never offered keep index 1.
    """

    label = "ucb"

    def __init__(self, instance, c1=1.0, margin=0.0, **kw):
        super().__init__(instance, **kw)
        self.c1 = float(c1)
        self.cap = 1.0 + float(margin)

    def ucb_index(self):
        ell = self.n_epochs + 1
        log_term = math.log(math.sqrt(self.n_items) * ell + 1.0)
        idx = np.ones(self.n_items)
        seen = self.epoch_counts > 0
        n = self.epoch_counts[seen]
        vbar = self.purchases[seen] / n
        bonus = (np.sqrt(vbar * UCB_CONSTANT * log_term / n)
                 + UCB_CONSTANT * log_term / n)
        idx[seen] = np.clip(vbar + self.c1 * bonus, 0.0, self.cap)
        return idx

    def _next_assortment(self, rng):
        return self._optimize(self.ucb_index())


class EpochThompson(_EpochBaseline):
    """Beta(1,1) prior on q_i = v_i / (1 + v_i); each finished epoch adds
    (purchases of i) successes and one failure. A fresh draw of every item's
    q is made per epoch and mapped back to v = q / (1 - q)."""

    label = "ts"

    def __init__(self, instance, **kw):
        super().__init__(instance, **kw)
        self.a = np.ones(self.n_items)
        self.b = np.ones(self.n_items)

    def _after_epoch(self, tally):
        for i, c in tally.items():
            self.a[i - 1] += c
            self.b[i - 1] += 1

    def sample_utilities(self, rng):
        q = np.minimum(rng.beta(self.a, self.b), 1.0 - 1e-12)
        return q / (1.0 - q)

    def _next_assortment(self, rng):
        return self._optimize(self.sample_utilities(rng))
