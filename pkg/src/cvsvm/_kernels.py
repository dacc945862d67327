"""Compiled inner loops for subset enumeration.

The stationarity system of the LS-SVM restricted to a subset S is held as
a lower Cholesky factor over *augmented* indices: index 0 is the bias and
index j + 1 is feature j.  Factor position 0 is always the bias; the
selected features follow in descending feature index, so the low-order
features that a Gray-code walk toggles most often sit at the end of the
factor, where insertion and deletion are cheapest.

All functions work in place on preallocated buffers and return False when
a pivot falls to ``PIVOT_TOL`` or below, leaving the caller to refactor.
"""

import numpy as np
from numba import njit

PIVOT_TOL = 1e-12
JITTER = 1e-10


@njit(cache=True, nogil=True)
def popcount(v):
    c = 0
    while v:
        v &= v - 1
        c += 1
    return c


@njit(cache=True, nogil=True)
def trailing_zeros(v):
    c = 0
    while (v & 1) == 0:
        v >>= 1
        c += 1
    return c


@njit(cache=True, nogil=True)
def support_from_mask(mask, p, idx):
    """Fill ``idx`` with [0, features descending] and return its length."""
    idx[0] = 0
    n = 1
    for j in range(p - 1, -1, -1):
        if (mask >> j) & 1:
            idx[n] = j + 1
            n += 1
    return n


@njit(cache=True, nogil=True)
def factor_full(A, idx, n, L, jitter):
    for i in range(n):
        for c in range(i + 1):
            s = A[idx[i], idx[c]]
            for t in range(c):
                s -= L[i, t] * L[c, t]
            if c == i:
                s += jitter
                if s <= PIVOT_TOL:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, c] = s / L[c, c]
    return True


@njit(cache=True, nogil=True)
def rank_one(L, start, stop, x, sign):
    """L L' <- L L' + sign * x x' on the trailing block [start, stop)."""
    for j in range(start, stop):
        d = L[j, j]
        r2 = d * d + sign * x[j] * x[j]
        if r2 <= PIVOT_TOL:
            return False
        r = np.sqrt(r2)
        c = r / d
        s = x[j] / d
        L[j, j] = r
        for i in range(j + 1, stop):
            L[i, j] = (L[i, j] + sign * s * x[i]) / c
            x[i] = c * x[i] - s * L[i, j]
    return True


@njit(cache=True, nogil=True)
def insert_position(L, idx, n, A, aug, k, work):
    """Insert augmented index ``aug`` at factor position ``k`` (n -> n + 1)."""
    for i in range(n - 1, k - 1, -1):
        for c in range(i, k - 1, -1):
            L[i + 1, c + 1] = L[i, c]
        for c in range(k):
            L[i + 1, c] = L[i, c]
        idx[i + 1] = idx[i]
    idx[k] = aug
    for c in range(k):
        s = A[aug, idx[c]]
        for t in range(c):
            s -= L[k, t] * L[c, t]
        L[k, c] = s / L[c, c]
    d2 = A[aug, aug]
    for c in range(k):
        d2 -= L[k, c] * L[k, c]
    if d2 <= PIVOT_TOL:
        return False
    d = np.sqrt(d2)
    L[k, k] = d
    for i in range(k + 1, n + 1):
        s = A[idx[i], aug]
        for t in range(k):
            s -= L[i, t] * L[k, t]
        L[i, k] = s / d
        work[i] = L[i, k]
    return rank_one(L, k + 1, n + 1, work, -1.0)


@njit(cache=True, nogil=True)
def delete_position(L, idx, n, k, work):
    """Remove factor position ``k`` (n -> n - 1)."""
    for i in range(k + 1, n):
        work[i - 1] = L[i, k]
    for i in range(k + 1, n):
        for c in range(k):
            L[i - 1, c] = L[i, c]
        for c in range(k + 1, i + 1):
            L[i - 1, c - 1] = L[i, c]
        idx[i - 1] = idx[i]
    return rank_one(L, k, n - 1, work, 1.0)


@njit(cache=True, nogil=True)
def solve_factored(L, idx, n, rhs, tmp, theta):
    for i in range(n):
        s = rhs[idx[i]]
        for t in range(i):
            s -= L[i, t] * tmp[t]
        tmp[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = tmp[i]
        for t in range(i + 1, n):
            s -= L[t, i] * theta[t]
        theta[i] = s / L[i, i]


@njit(cache=True, nogil=True)
def flip_feature(L, idx, n, A, mask, j, p, work):
    """Toggle feature ``j`` given the *new* mask; returns (new n, ok)."""
    k = 1 + popcount(mask >> (j + 1))
    if (mask >> j) & 1:
        ok = insert_position(L, idx, n, A, j + 1, k, work)
        return n + 1, ok
    ok = delete_position(L, idx, n, k, work)
    return n - 1, ok


@njit(cache=True, nogil=True)
def refactor(L, idx, A, mask, p):
    n = support_from_mask(mask, p, idx)
    if factor_full(A, idx, n, L, 0.0):
        return n, 0
    if factor_full(A, idx, n, L, JITTER):
        return n, 1
    return n, -1


@njit(cache=True, nogil=True)
def gray_block(A_all, rhs_all, Xv_all, yv_all, nv, p, start, stop,
               hinge_out, sq_out):
    """CV criteria for Gray-code positions ``start <= i < stop``.

    ``hinge_out[i - start]`` and ``sq_out[i - start]`` receive the fold
    sums of both validation losses for mask ``i ^ (i >> 1)``.  Returns
    (number of refactorizations, number of jittered factors); a negative
    jitter count means a factorization failed outright.
    """
    K = A_all.shape[0]
    P = p + 1
    L = np.zeros((P, P))
    idx = np.zeros(P, dtype=np.int64)
    work = np.zeros(P)
    tmp = np.zeros(P)
    theta = np.zeros(P)
    for i in range(stop - start):
        hinge_out[i] = 0.0
        sq_out[i] = 0.0
    refactors = 0
    jittered = 0
    for k in range(K):
        A = A_all[k]
        rhs = rhs_all[k]
        Xv = Xv_all[k]
        yv = yv_all[k]
        m = nv[k]
        mask = start ^ (start >> 1)
        n, status = refactor(L, idx, A, mask, p)
        if status < 0:
            return refactors, -1
        jittered += status
        for pos in range(start, stop):
            if pos > start:
                j = trailing_zeros(pos)
                mask ^= 1 << j
                n, ok = flip_feature(L, idx, n, A, mask, j, p, work)
                if not ok:
                    refactors += 1
                    n, status = refactor(L, idx, A, mask, p)
                    if status < 0:
                        return refactors, -1
                    jittered += status
            solve_factored(L, idx, n, rhs, tmp, theta)
            h = 0.0
            q = 0.0
            for v in range(m):
                f = 0.0
                for t in range(n):
                    f += theta[t] * Xv[v, idx[t]]
                r = 1.0 - yv[v] * f
                if r > 0.0:
                    h += r
                q += r * r
            hinge_out[pos - start] += h
            sq_out[pos - start] += q
    return refactors, jittered
