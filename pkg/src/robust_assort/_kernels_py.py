"""Pure-Python bisection kernels; fallback for the compiled ``_kernels``.

Arithmetic order matches the compiled version exactly (psi is computed
elementwise, the probe sum is accumulated must-first then in descending psi
order), so both backends produce identical floats and witnesses.
"""

import numpy as np


def _probe(r, v, K, alpha, must):
    psi = (r - alpha) * v
    if must >= 0:
        t = float(psi[must])
        chosen = [must]
        slots = K - 1
    else:
        t = 0.0
        chosen = []
        slots = K
    if slots > 0:
        cand = np.flatnonzero(psi > 0.0)
        if must >= 0:
            cand = cand[cand != must]
        if cand.size:
            # descending psi, ties by ascending index
            order = cand[np.lexsort((cand, -psi[cand]))][:slots]
            for j in order.tolist():
                chosen.append(j)
                t = t + float(psi[j])
    return t >= alpha, chosen


def feasible_witness(r, v, K, alpha, must=-1):
    return _probe(r, v, K, alpha, must)


def bisect_opt(r, v, K, must, delta):
    """Return ``(witness, alpha_lo, alpha_hi)``; witness is [] if never feasible."""
    lo, hi = 0.0, 1.0
    best = []
    while hi - lo >= delta:
        mid = (lo + hi) / 2.0
        ok, chosen = _probe(r, v, K, mid, must)
        if ok:
            best = chosen
            lo = mid
        else:
            hi = mid
    return best, lo, hi


def bisect_opt_many(r, v, K, musts, delta):
    return [bisect_opt(r, v, K, int(m), delta) for m in musts]
