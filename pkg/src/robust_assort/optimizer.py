"""Capacity-constrained MNL assortment optimization.

Both optimizers bisect on the target revenue alpha: R(S) >= alpha holds for
some |S| <= K exactly when the K largest positive values of
psi_j = (r_j - alpha) * v_j sum to at least alpha (with a must-include item
contributing its psi unconditionally). Restricting to a ground set is done
by zeroing the utilities of items outside it.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from robust_assort import kernels
from robust_assort.choice import expected_revenue

DEFAULT_DELTA = 1e-9
BRUTE_FORCE_MAX_N = 20


@dataclass(frozen=True)
class OptResult:
    assortment: tuple
    estimated_revenue: float
    alpha_interval: tuple = (0.0, 0.0)


def _arrays(revenues, utilities, active=None):
    r = np.ascontiguousarray(revenues, dtype=float)
    v = np.ascontiguousarray(utilities, dtype=float)
    if r.shape != v.shape or r.ndim != 1:
        raise ValueError("revenues and utilities must be 1-d and the same length")
    if np.any(v < 0):
        raise ValueError("utilities must be nonnegative")
    if active is not None:
        mask = np.zeros(v.shape[0], dtype=bool)
        mask[[i - 1 for i in active]] = True
        v = np.where(mask, v, 0.0)
    return r, v


def _check_must(must_include, n):
    if must_include is None:
        return -1
    i = int(must_include)
    if not 1 <= i <= n:
        raise ValueError(f"must_include item {i} outside 1..{n}")
    return i - 1


def feasibility_check(revenues, est_utilities, K, alpha, must_include=None):
    """Is there an assortment of size <= K (containing ``must_include``) with R >= alpha?

    Returns ``(feasible, witness)`` where the witness is the probe set: the
    must-include item plus the largest strictly positive psi_j.
    """
    r, v = _arrays(revenues, est_utilities)
    must = _check_must(must_include, r.shape[0])
    ok, chosen = kernels.feasible_witness(r, v, int(K), float(alpha), must)
    return bool(ok), tuple(sorted(j + 1 for j in chosen))


def _result(witness, lo, hi, r, v, fallback):
    if witness:
        s = tuple(sorted(j + 1 for j in witness))
    else:
        s = fallback
    return OptResult(s, expected_revenue(s, r, v), (lo, hi))


def constrained_assortment_opt(revenues, est_utilities, K, must_include,
                               delta=DEFAULT_DELTA, active=None):
    """Best assortment of size <= K that contains ``must_include``.

    ``active`` restricts the other members to a ground set of items. If no
    probe is ever feasible (e.g. all revenues zero) the singleton
    ``{must_include}`` is returned.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    r, v = _arrays(revenues, est_utilities, active)
    must = _check_must(must_include, r.shape[0])
    if active is not None:
        # the forced item keeps its own estimate even if outside the ground set
        v[must] = float(np.asarray(est_utilities, dtype=float)[must])
    witness, lo, hi = kernels.bisect_opt(r, v, int(K), must, float(delta))
    return _result(witness, lo, hi, r, v, (must + 1,))


def constrained_assortment_opt_many(revenues, est_utilities, K, items,
                                    delta=DEFAULT_DELTA, active=None):
    """``constrained_assortment_opt`` for each item in ``items`` (one kernel call)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    r, v = _arrays(revenues, est_utilities, active)
    items = [int(i) for i in items]
    if active is not None and not set(items) <= set(active):
        raise ValueError("batch must-include items must lie in the active set")
    musts = np.array([_check_must(i, r.shape[0]) for i in items], dtype=np.int_)
    runs = kernels.bisect_opt_many(r, v, int(K), musts, float(delta))
    return {
        i: _result(w, lo, hi, r, v, (i,)) for i, (w, lo, hi) in zip(items, runs)
    }


def static_assortment_opt(revenues, est_utilities, K, delta=DEFAULT_DELTA, active=None):
    """Best assortment of size <= K; the empty set when nothing earns revenue."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    r, v = _arrays(revenues, est_utilities, active)
    witness, lo, hi = kernels.bisect_opt(r, v, int(K), -1, float(delta))
    return _result(witness, lo, hi, r, v, ())


def brute_force_opt(revenues, utilities, K, must_include=None, active=None):
    """Exact optimum by enumerating every subset of size <= K (test oracle).

    Ties keep the first subset in (size, lexicographic) order, so the
    smallest optimal assortment is returned.
    """
    r = np.asarray(revenues, dtype=float)
    v = np.asarray(utilities, dtype=float)
    n = r.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refuses N={n} > {BRUTE_FORCE_MAX_N}")
    must = _check_must(must_include, n) + 1 if must_include is not None else None
    pool = list(range(1, n + 1)) if active is None else sorted(set(active))
    if must is not None:
        pool = [i for i in pool if i != must]
        base, room = (must,), K - 1
    else:
        base, room = (), K
    best, best_rev = None, -1.0
    for size in range(0, min(room, len(pool)) + 1):
        for extra in combinations(pool, size):
            s = tuple(sorted(base + extra))
            rev = expected_revenue(s, r, v)
            if rev > best_rev:
                best, best_rev = s, rev
    return OptResult(best, best_rev, (best_rev, best_rev))
