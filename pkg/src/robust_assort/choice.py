"""MNL choice model, customer protocol records and outlier adversaries.

Items are numbered 1..N; outcome 0 is the no-purchase option whose weight
is fixed at 1. Parameter vectors (revenues, utilities) are 0-based numpy
arrays of length N, so item ``i`` lives at position ``i - 1``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

NO_PURCHASE = 0
PROB_TOL = 1e-12

ADVERSARY_KINDS = ("none", "front_loaded", "adaptive_hook")


class BudgetExceeded(RuntimeError):
    """An adversary tried to place more than floor(eps*T) outliers."""


@dataclass(frozen=True)
class Instance:
    n_items: int
    capacity: int
    horizon: int
    revenues: np.ndarray
    utilities: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.revenues, dtype=float)
        v = np.ascontiguousarray(self.utilities, dtype=float)
        if r.shape != (self.n_items,) or v.shape != (self.n_items,):
            raise ValueError("revenues and utilities must have length n_items")
        if np.any((r < 0) | (r > 1)) or np.any((v < 0) | (v > 1)):
            raise ValueError("revenues and utilities must lie in [0, 1]")
        if not 1 <= self.capacity <= self.n_items:
            raise ValueError("need 1 <= capacity <= n_items")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "revenues", r)
        object.__setattr__(self, "utilities", v)


@dataclass(frozen=True)
class ChoiceDistribution:
    """Outcome probabilities over ``(0,) + assortment``; ``probs[0]`` is no-purchase."""

    assortment: tuple
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (len(self.assortment) + 1,):
            raise ValueError("probs must have one entry per item plus no-purchase")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "_cdf", np.cumsum(p).tolist())

    def prob(self, item):
        if item == NO_PURCHASE:
            return float(self.probs[0])
        try:
            return float(self.probs[1 + self.assortment.index(item)])
        except ValueError:
            return 0.0

    def outcomes(self):
        return (NO_PURCHASE,) + tuple(self.assortment)


def _check_assortment(assortment, n):
    items = tuple(int(i) for i in assortment)
    if len(set(items)) != len(items):
        raise ValueError(f"assortment has repeated items: {items}")
    for i in items:
        if not 1 <= i <= n:
            raise ValueError(f"item {i} outside 1..{n}")
    return items


def choice_probabilities(assortment, utilities):
    v = np.asarray(utilities, dtype=float)
    items = _check_assortment(assortment, v.shape[0])
    w = v[[i - 1 for i in items]] if items else np.empty(0)
    denom = 1.0 + float(np.sum(w))
    probs = np.concatenate(([1.0 / denom], w / denom))
    return ChoiceDistribution(items, probs)


def expected_revenue(assortment, revenues, utilities):
    """R(S) = sum r_i v_i / (1 + sum v_i); R of the empty set is 0."""
    v = np.asarray(utilities, dtype=float)
    r = np.asarray(revenues, dtype=float)
    items = _check_assortment(assortment, v.shape[0])
    if not items:
        return 0.0
    idx = [i - 1 for i in items]
    w = v[idx]
    return float(np.dot(r[idx], w) / (1.0 + np.sum(w)))


def sample_choice(dist, rng):
    """Draw one outcome (0 = no purchase) by inverting the CDF with one uniform."""
    u = rng.random()
    cdf = dist._cdf
    for k, c in enumerate(cdf):
        if u < c:
            return NO_PURCHASE if k == 0 else dist.assortment[k - 1]
    # u landed in the rounding gap above cdf[-1]; take the last positive-mass outcome
    for k in range(len(cdf) - 1, -1, -1):
        if dist.probs[k] > 0:
            return NO_PURCHASE if k == 0 else dist.assortment[k - 1]
    return NO_PURCHASE


def outlier_budget(epsilon, horizon):
    # rounding guards against 0.1 * 30 == 3.0000000000000004 style artifacts
    return int(math.floor(round(epsilon * horizon, 9)))


@dataclass
class History:
    """Protocol record of one episode.

    ``records`` is the adversary filtration: tuples (phi_t, Q_t, S_t, i_t).
    Policies only ever see ``policy_view()``. Purchase counts are kept
    incrementally so adaptive adversaries need not rescan the log.
    """

    n_items: int
    records: list = field(default_factory=list)
    purchase_counts: np.ndarray = None
    n_outliers: int = 0

    def __post_init__(self):
        if self.purchase_counts is None:
            self.purchase_counts = np.zeros(self.n_items + 1, dtype=np.int64)

    def append(self, phi, q, assortment, purchased):
        self.records.append((bool(phi), q, tuple(assortment), int(purchased)))
        self.purchase_counts[purchased] += 1
        self.n_outliers += int(bool(phi))

    def __len__(self):
        return len(self.records)

    def policy_view(self):
        return [(s, i) for _, _, s, i in self.records]


class Adversary:
    """Chooses (phi_t, Q_t) from the history before the assortment is shown.

    ``Q_t`` is a callable mapping an assortment to a ChoiceDistribution, or
    None for a typical customer. Subclasses override ``decide``.
    """

    def __init__(self, epsilon, horizon, rng=None):
        if not 0.0 <= epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        self.epsilon = float(epsilon)
        self.horizon = int(horizon)
        self.budget = outlier_budget(epsilon, horizon)
        self.rng = rng
        self.used = 0

    def decide(self, history, t):
        return False, None

    def commit(self, history, t):
        if t > self.horizon:
            raise ValueError(f"period {t} beyond horizon {self.horizon}")
        phi, q = self.decide(history, t)
        if phi:
            if self.used >= self.budget:
                raise BudgetExceeded(
                    f"outlier at t={t} exceeds budget floor(eps*T)={self.budget}"
                )
            self.used += 1
        return bool(phi), q


class NoAdversary(Adversary):
    kind = "none"

    def __init__(self, horizon, rng=None):
        super().__init__(0.0, horizon, rng)


class FrontLoadedAdversary(Adversary):
    """Outliers in periods 1..floor(eps*T), all following a fixed MNL."""

    kind = "front_loaded"

    def __init__(self, epsilon, horizon, outlier_utilities, rng=None):
        super().__init__(epsilon, horizon, rng)
        self.outlier_utilities = np.asarray(outlier_utilities, dtype=float)
        self._cache = {}

    def _q(self, assortment):
        key = tuple(assortment)
        d = self._cache.get(key)
        if d is None:
            d = choice_probabilities(key, self.outlier_utilities)
            self._cache[key] = d
        return d

    def decide(self, history, t):
        if t <= self.budget:
            return True, self._q
        return False, None


class PopularItemAdversary(Adversary):
    """Adaptive stress adversary.

    While budget remains, each period is an outlier with probability eps
    (drawn from the adversary's own stream). An outlier buys the item with
    the highest purchase count in the history so far (ties: lowest index,
    item 1 before any purchase) whenever it is offered, and buys nothing
    otherwise.
    """

    kind = "adaptive_hook"

    def decide(self, history, t):
        if self.used >= self.budget or self.rng.random() >= self.epsilon:
            return False, None
        counts = history.purchase_counts[1:]
        target = int(np.argmax(counts)) + 1

        def q(assortment, target=target):
            items = tuple(assortment)
            probs = np.zeros(len(items) + 1)
            if target in items:
                probs[1 + items.index(target)] = 1.0
            else:
                probs[0] = 1.0
            return ChoiceDistribution(items, probs)

        return True, q


def make_adversary(kind, epsilon, horizon, outlier_utilities=None, rng=None):
    if kind == "none" or epsilon == 0:
        return NoAdversary(horizon, rng)
    if kind == "front_loaded":
        if outlier_utilities is None:
            raise ValueError("front_loaded adversary needs outlier_utilities")
        return FrontLoadedAdversary(epsilon, horizon, outlier_utilities, rng)
    if kind == "adaptive_hook":
        return PopularItemAdversary(epsilon, horizon, rng)
    raise ValueError(f"unknown adversary kind {kind!r}; expected one of {ADVERSARY_KINDS}")


def adversary_step(adversary, history, t, offered_assortment, utilities, rng):
    """One protocol step from the customer side.

    The adversary commits (phi_t, Q_t) from ``history`` before looking at
    ``offered_assortment``; the purchase is then drawn from Q_t or from the
    typical MNL. Returns ``(is_outlier, purchased_item)``.
    """
    phi, q = adversary.commit(history, t)
    dist = q(offered_assortment) if phi else choice_probabilities(offered_assortment, utilities)
    return phi, sample_choice(dist, rng)
