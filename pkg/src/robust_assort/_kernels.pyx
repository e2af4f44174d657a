# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bisection kernels for capacity-constrained MNL assortment search.

Mirrors ``_kernels_py`` operation for operation so both backends return
bit-identical results. All item indices here are 0-based; ``must = -1``
means no must-include item.
"""

from libc.stdlib cimport malloc, free


cdef int _probe(const double[::1] r, const double[::1] v, int K, double alpha,
                int must, double* psi, int* chosen, char* taken) noexcept nogil:
    # Fills chosen[0:m] with the witness (must first, then descending psi,
    # ties broken by ascending index); returns m if feasible, -(m+1) if not.
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t j
    cdef int m = 0, slots, k, best
    cdef double t = 0.0, bval

    for j in range(n):
        psi[j] = (r[j] - alpha) * v[j]
        taken[j] = 0

    if must >= 0:
        t = psi[must]
        chosen[0] = must
        taken[must] = 1
        m = 1
        slots = K - 1
    else:
        slots = K

    for k in range(slots):
        best = -1
        bval = 0.0
        for j in range(n):
            if not taken[j] and psi[j] > bval:
                bval = psi[j]
                best = <int>j
        if best < 0:
            break
        taken[best] = 1
        chosen[m] = best
        m += 1
        t = t + bval

    if t >= alpha:
        return m
    return -(m + 1)


def feasible_witness(const double[::1] r, const double[::1] v, int K,
                     double alpha, int must=-1):
    cdef Py_ssize_t n = r.shape[0]
    cdef double* psi = <double*>malloc(n * sizeof(double))
    cdef int* chosen = <int*>malloc((n + 1) * sizeof(int))
    cdef char* taken = <char*>malloc(n * sizeof(char))
    cdef int res, m, k
    try:
        res = _probe(r, v, K, alpha, must, psi, chosen, taken)
        m = res if res >= 0 else -res - 1
        return res >= 0, [chosen[k] for k in range(m)]
    finally:
        free(psi)
        free(chosen)
        free(taken)


cdef int _bisect(const double[::1] r, const double[::1] v, int K, int must,
                 double delta, double* psi, int* chosen, int* best,
                 char* taken, double* lo_out, double* hi_out) noexcept nogil:
    cdef double lo = 0.0, hi = 1.0, mid
    cdef int res, nbest = 0, k
    while hi - lo >= delta:
        mid = (lo + hi) / 2.0
        res = _probe(r, v, K, mid, must, psi, chosen, taken)
        if res >= 0:
            for k in range(res):
                best[k] = chosen[k]
            nbest = res
            lo = mid
        else:
            hi = mid
    lo_out[0] = lo
    hi_out[0] = hi
    return nbest


def bisect_opt(const double[::1] r, const double[::1] v, int K, int must,
               double delta):
    """Return ``(witness, alpha_lo, alpha_hi)``; witness is [] if never feasible."""
    cdef Py_ssize_t n = r.shape[0]
    cdef double* psi = <double*>malloc(n * sizeof(double))
    cdef int* chosen = <int*>malloc((n + 1) * sizeof(int))
    cdef int* best = <int*>malloc((n + 1) * sizeof(int))
    cdef char* taken = <char*>malloc(n * sizeof(char))
    cdef double lo, hi
    cdef int nbest, k
    try:
        with nogil:
            nbest = _bisect(r, v, K, must, delta, psi, chosen, best, taken,
                            &lo, &hi)
        return [best[k] for k in range(nbest)], lo, hi
    finally:
        free(psi)
        free(chosen)
        free(best)
        free(taken)


def bisect_opt_many(const double[::1] r, const double[::1] v, int K,
                    const long[::1] musts, double delta):
    """Batch form of ``bisect_opt`` over several must-include items."""
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t q
    cdef double* psi = <double*>malloc(n * sizeof(double))
    cdef int* chosen = <int*>malloc((n + 1) * sizeof(int))
    cdef int* best = <int*>malloc((n + 1) * sizeof(int))
    cdef char* taken = <char*>malloc(n * sizeof(char))
    cdef double lo, hi
    cdef int nbest, k
    out = []
    try:
        for q in range(musts.shape[0]):
            with nogil:
                nbest = _bisect(r, v, K, <int>musts[q], delta, psi, chosen,
                                best, taken, &lo, &hi)
            out.append(([best[k] for k in range(nbest)], lo, hi))
        return out
    finally:
        free(psi)
        free(chosen)
        free(best)
        free(taken)
