"""Extended-range complex numbers stored as ``mantissa * 2**exp2``.

Taylor coefficients of the exp-families decay like ``1/k!`` and leave the
float64 range well before the truncation degrees used here, so every
coefficient is carried as a complex mantissa plus an integer binary
exponent.  The mantissa is normalised so that ``max(|re|, |im|)`` lies in
``[0.5, 1)``; the pair is then a canonical encoding of the value.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


def _ldexp_c(mant: np.ndarray, shift: np.ndarray) -> np.ndarray:
    # overflow to inf is the documented behaviour of to_complex
    with np.errstate(over="ignore"):
        re = np.ldexp(mant.real, shift)
        out = np.empty(re.shape, dtype=np.complex128)
        out.real = re
        out.imag = np.ldexp(mant.imag, shift)
    return out


def normalize(mant, exp2):
    """Return the canonical ``(mant, exp2)`` pair; zeros get ``exp2 = 0``."""
    mant = np.asarray(mant, dtype=np.complex128)
    exp2 = np.asarray(exp2, dtype=np.int64)
    if not np.all(np.isfinite(mant)):
        raise FloatingPointError("non-finite mantissa in extended-range value")
    scale = np.maximum(np.abs(mant.real), np.abs(mant.imag))
    _, ex = np.frexp(scale)
    ex = ex.astype(np.int64)
    out = _ldexp_c(mant, -ex)
    e = np.where(scale == 0.0, 0, exp2 + ex)
    return out, e.astype(np.int64)


def from_complex(values):
    values = np.asarray(values, dtype=np.complex128)
    return normalize(values, np.zeros(values.shape, dtype=np.int64))


def from_log(log_abs, unit):
    """Build values ``exp(log_abs) * unit`` without leaving the float range."""
    log_abs = np.asarray(log_abs, dtype=np.float64)
    unit = np.asarray(unit, dtype=np.complex128)
    finite = np.isfinite(log_abs)
    e = np.where(finite, np.floor(np.where(finite, log_abs, 0.0) / LN2), 0).astype(np.int64)
    frac = np.where(finite, log_abs - e * LN2, -np.inf)
    return normalize(np.exp(frac) * unit, e)


def to_complex(mant, exp2):
    """Plain complex values (may overflow to inf or underflow to 0)."""
    mant = np.asarray(mant, dtype=np.complex128)
    exp2 = np.asarray(exp2, dtype=np.int64)
    big = np.clip(exp2, -4000, 4000)
    return _ldexp_c(mant, big)


def log_abs(mant, exp2):
    """``log|mant * 2**exp2|``; ``-inf`` for zero."""
    mant = np.asarray(mant, dtype=np.complex128)
    exp2 = np.asarray(exp2, dtype=np.int64)
    with np.errstate(divide="ignore"):
        direct = np.log(np.abs(to_complex(mant, exp2)))
        fallback = np.log(np.abs(mant)) + exp2 * LN2
    # the direct route is bit-exact for values inside the normal float range
    safe = (np.abs(exp2) < 1000) & np.isfinite(direct)
    return np.where(safe, direct, fallback)


def multiply(m1, e1, m2, e2):
    return normalize(np.asarray(m1) * np.asarray(m2), np.asarray(e1) + np.asarray(e2))


def sum_groups(mant, exp2, starts):
    """Sum consecutive runs ``[starts[i], starts[i+1])`` of extended values."""
    mant = np.asarray(mant, dtype=np.complex128)
    exp2 = np.asarray(exp2, dtype=np.int64)
    if mant.size == 0:
        return mant, exp2
    nz = mant != 0
    e_masked = np.where(nz, exp2, np.iinfo(np.int64).min // 4)
    emax = np.maximum.reduceat(e_masked, starts)
    counts = np.diff(np.append(starts, mant.size))
    emax_rep = np.repeat(emax, counts)
    shift = np.clip(e_masked - emax_rep, -2000, 0)
    shifted = _ldexp_c(mant, shift)
    re = np.add.reduceat(shifted.real, starts)
    im = np.add.reduceat(shifted.imag, starts)
    emax = np.where(emax < np.iinfo(np.int64).min // 8, 0, emax)
    return normalize(re + 1j * im, emax)


def logsumexp_groups(logs, starts, size):
    """Per-run log-sum-exp of real log magnitudes (``-inf`` entries allowed)."""
    logs = np.asarray(logs, dtype=np.float64)
    if logs.size == 0:
        return np.full(size, -np.inf)
    mx = np.maximum.reduceat(logs, starts)
    counts = np.diff(np.append(starts, logs.size))
    mx_rep = np.repeat(mx, counts)
    with np.errstate(invalid="ignore"):
        w = np.exp(np.where(np.isfinite(mx_rep), logs - mx_rep, -np.inf))
    s = np.add.reduceat(w, starts)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(mx), mx + np.log(s), -np.inf)
