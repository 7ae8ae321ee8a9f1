"""Dynamic-programming kernel for SRVF alignment (compiled with numba)."""
from math import gcd

import numpy as np
from numba import njit


def neighborhood(max_step: int) -> np.ndarray:
    """All coprime lattice moves ``(di, dj)`` with ``1 <= di, dj <= max_step``."""
    moves = [(a, b) for a in range(1, max_step + 1) for b in range(1, max_step + 1) if gcd(a, b) == 1]
    return np.array(moves, dtype=np.int64)


@njit(cache=True)
def _segment_cost(q1, q2, k, l, di, dj, h):
    # Trapezoidal integral of (q1(t) - sqrt(slope) q2(gamma(t)))^2 over one
    # straight lattice segment, q2 interpolated linearly.
    m = q2.shape[0]
    s = dj / di
    rs = np.sqrt(s)
    c = 0.0
    for p in range(di + 1):
        pos = l + p * s
        lo = int(pos)
        if lo >= m - 1:
            v = q2[m - 1]
        else:
            fr = pos - lo
            v = q2[lo] * (1.0 - fr) + q2[lo + 1] * fr
        d = q1[k + p] - rs * v
        w = 0.5 if (p == 0 or p == di) else 1.0
        c += w * d * d
    return c * h


@njit(cache=True)
def dp_table(q1, q2, moves):
    """Cumulative-cost table and argmin move index for every lattice node."""
    m = q1.shape[0]
    h = 1.0 / (m - 1)
    E = np.full((m, m), np.inf)
    P = np.full((m, m), -1, dtype=np.int64)
    E[0, 0] = 0.0
    for i in range(1, m):
        for j in range(1, m):
            best = np.inf
            arg = -1
            for n in range(moves.shape[0]):
                k = i - moves[n, 0]
                l = j - moves[n, 1]
                if k < 0 or l < 0:
                    continue
                e0 = E[k, l]
                if e0 == np.inf:
                    continue
                c = e0 + _segment_cost(q1, q2, k, l, moves[n, 0], moves[n, 1], h)
                if c < best:
                    best = c
                    arg = n
            E[i, j] = best
            P[i, j] = arg
    return E, P


def backtrack(P, moves):
    m = P.shape[0]
    i = j = m - 1
    path = [(i, j)]
    while i > 0:
        n = P[i, j]
        i -= moves[n, 0]
        j -= moves[n, 1]
        path.append((i, j))
    return np.array(path[::-1], dtype=float) / (m - 1)
