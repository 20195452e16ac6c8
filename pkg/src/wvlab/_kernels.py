"""Compiled inner loops for series evaluation.

Each term ``c_alpha z^alpha`` is formed as ``exp(L - shift) * phase`` where
``L = log|c_alpha| + sum_j alpha_j log|z_j|``; the shift keeps the largest
term near one, so the sum never overflows regardless of ``|f|``.  Terms are
accumulated with Neumaier compensation in canonical (degree, lex) order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_NEGLIGIBLE = 60.0


@njit(cache=True)
def _tables(z, D):
    m = z.shape[0]
    logpow = np.zeros((m, D + 1))
    unitpow = np.ones((m, D + 1), dtype=np.complex128)
    for j in range(m):
        a = abs(z[j])
        if a == 0.0:
            for e in range(1, D + 1):
                logpow[j, e] = -np.inf
                unitpow[j, e] = 0.0
        else:
            la = np.log(a)
            th = np.angle(z[j])
            for e in range(1, D + 1):
                logpow[j, e] = e * la
                unitpow[j, e] = np.cos(e * th) + 1j * np.sin(e * th)
    return logpow, unitpow


@njit(cache=True)
def eval_points(Lc, uc, A, Z, D, fixed_shift, use_fixed, want_euler):
    """Evaluate at every row of ``Z``.

    Returns ``(mant, shift, euler, abssum)`` where ``f = mant * exp(shift)``,
    ``euler[:, j] * exp(shift) = z_j * df/dz_j`` and ``abssum * exp(shift)``
    is the sum of the moduli of all terms (the cancellation scale).
    """
    N, m = Z.shape
    T = Lc.shape[0]
    mant = np.zeros(N, dtype=np.complex128)
    shift = np.full(N, -np.inf)
    euler = np.zeros((N, m if want_euler else 0), dtype=np.complex128)
    abssum = np.zeros(N)
    for p in range(N):
        logpow, unitpow = _tables(Z[p], D)
        top = -np.inf
        for t in range(T):
            L = Lc[t]
            for j in range(m):
                L += logpow[j, A[t, j]]
            if L > top:
                top = L
        sh = fixed_shift[p] if use_fixed else top
        if not np.isfinite(sh):
            continue
        # terms this far below the largest one cannot affect the sum
        cutoff = top - _NEGLIGIBLE
        sre = 0.0
        cre = 0.0
        sim = 0.0
        cim = 0.0
        acc = 0.0
        for t in range(T):
            L = Lc[t]
            for j in range(m):
                L += logpow[j, A[t, j]]
            if L < cutoff:
                continue
            a = np.exp(L - sh)
            acc += a
            w = uc[t] * a
            for j in range(m):
                w *= unitpow[j, A[t, j]]
            x = w.real
            s = sre + x
            if abs(sre) >= abs(x):
                cre += (sre - s) + x
            else:
                cre += (x - s) + sre
            sre = s
            y = w.imag
            s = sim + y
            if abs(sim) >= abs(y):
                cim += (sim - s) + y
            else:
                cim += (y - s) + sim
            sim = s
            if want_euler:
                for j in range(m):
                    euler[p, j] += A[t, j] * w
        mant[p] = (sre + cre) + 1j * (sim + cim)
        shift[p] = sh
        abssum[p] = acc
    return mant, shift, euler, abssum
