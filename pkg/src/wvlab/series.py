"""Sparse truncated power series in several complex variables.

A :class:`PowerSeries` holds the Taylor coefficients ``a_alpha`` of an entire
function on C^m up to a total degree ``D``.  Terms are kept in canonical
order (total degree, then lexicographic in the exponent vector), zero
coefficients are never stored, and every coefficient is an extended-range
number so that factorially decaying coefficients survive at large ``D``.

Series built from explicit polynomials are flagged ``exact``: their absent
terms are genuinely zero, so the truncation degree only records the degree
bound and never limits trust.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np

from . import _ext, _kernels

MultiIndex = Tuple[int, ...]
Number = Union[int, float, complex]

TRUST_MARGIN = 10
_CHUNK_ELEMS = 1_500_000


class DimensionError(ValueError):
    pass


class UntrustedRadiusError(ValueError):
    """Raised when a radius lies beyond what the truncation can support."""


def as_multi_index(alpha: Iterable[int], dimension: int | None = None) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index entries must be non-negative: {alpha}")
    if len(alpha) < 1:
        raise ValueError("multi-index must have length >= 1")
    if dimension is not None and len(alpha) != dimension:
        raise DimensionError(f"multi-index {alpha} has length {len(alpha)}, expected {dimension}")
    return alpha


@lru_cache(maxsize=64)
def _compositions(m: int, k: int) -> np.ndarray:
    if m == 1:
        return np.array([[k]], dtype=np.int64)
    blocks = []
    for a in range(k + 1):
        rest = _compositions(m - 1, k - a)
        blocks.append(np.column_stack([np.full(len(rest), a, dtype=np.int64), rest]))
    out = np.vstack(blocks)
    out.flags.writeable = False
    return out


def all_multi_indices(m: int, degree: int) -> np.ndarray:
    """All exponent vectors of total degree <= ``degree`` in canonical order."""
    return np.vstack([_compositions(m, k) for k in range(degree + 1)])


def _pack(alphas: np.ndarray) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=np.int64)
    if alphas.size == 0:
        return np.zeros(len(alphas), dtype=np.int64)
    base = int(alphas.max()) + 1
    m = alphas.shape[1]
    if base ** m >= 2 ** 62:
        raise OverflowError("exponent range too large to pack")
    key = np.zeros(len(alphas), dtype=np.int64)
    for j in range(m):
        key = key * base + alphas[:, j]
    return key


@dataclass(frozen=True)
class HomogeneousNorms:
    """Degree-bucketed l1 norms ``||a_k||_1``, stored as logarithms."""

    log_values: np.ndarray

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    @property
    def degree(self) -> int:
        return len(self.log_values) - 1

    def __len__(self) -> int:
        return len(self.log_values)

    def log_terms(self, r: float) -> np.ndarray:
        k = np.arange(len(self.log_values))
        with np.errstate(invalid="ignore"):
            return np.where(np.isfinite(self.log_values), self.log_values + k * math.log(r), -np.inf)

    def max_term(self, r: float) -> float:
        if r <= 0:
            raise ValueError("radius must be positive")
        t = self.log_terms(r)
        return float(t.max()) if len(t) else -math.inf

    def central_index(self, r: float, rtol: float = 1e-12) -> int:
        if r <= 0:
            raise ValueError("radius must be positive")
        t = self.log_terms(r)
        if not np.any(np.isfinite(t)):
            raise ValueError("central index of the zero series is undefined")
        mx = t.max()
        hits = np.flatnonzero(t >= mx - rtol * max(1.0, abs(mx)))
        return int(hits[-1])


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Immutable sparse truncated Taylor series.

    Use the constructors (:func:`make_polynomial`, :func:`make_exp_of_linear`,
    :meth:`from_terms`) rather than the raw field initialiser.
    """

    dimension: int
    alphas: np.ndarray
    mant: np.ndarray
    exp2: np.ndarray
    truncation_degree: int
    exact: bool = False

    # -- construction -----------------------------------------------------

    @classmethod
    def from_terms(cls, dimension, alphas, mant, exp2, truncation_degree, exact=False):
        """Canonicalise raw terms: merge repeats, drop zeros and degrees > D."""
        if dimension < 1:
            raise DimensionError("dimension must be >= 1")
        if truncation_degree < 0:
            raise ValueError("truncation degree must be >= 0")
        alphas = np.asarray(alphas, dtype=np.int64).reshape(-1, dimension)
        mant = np.asarray(mant, dtype=np.complex128).reshape(-1)
        exp2 = np.asarray(exp2, dtype=np.int64).reshape(-1)
        deg = alphas.sum(axis=1)
        keep = (deg <= truncation_degree) & (mant != 0)
        alphas, mant, exp2 = alphas[keep], mant[keep], exp2[keep]
        if len(alphas):
            key = _pack(alphas)
            order = np.argsort(key, kind="stable")
            key, alphas, mant, exp2 = key[order], alphas[order], mant[order], exp2[order]
            starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
            if len(starts) != len(key):
                mant, exp2 = _ext.sum_groups(mant, exp2, starts)
                alphas = alphas[starts]
            else:
                mant, exp2 = _ext.normalize(mant, exp2)
            keep = mant != 0
            alphas, mant, exp2 = alphas[keep], mant[keep], exp2[keep]
            order = np.argsort(alphas.sum(axis=1), kind="stable")
            alphas, mant, exp2 = alphas[order], mant[order], exp2[order]
        for arr in (alphas, mant, exp2):
            arr.flags.writeable = False
        return cls(dimension, alphas, mant, exp2, int(truncation_degree), bool(exact))

    @classmethod
    def zero(cls, dimension: int, truncation_degree: int = 0, exact: bool = True):
        return cls.from_terms(dimension, np.zeros((0, dimension)), [], [], truncation_degree, exact)

    @classmethod
    def constant(cls, dimension: int, value: Number, truncation_degree: int = 0, exact: bool = True):
        m, e = _ext.from_complex([value])
        return cls.from_terms(dimension, np.zeros((1, dimension)), m, e, truncation_degree, exact)

    # -- accessors --------------------------------------------------------

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.alphas.sum(axis=1)

    @property
    def n_terms(self) -> int:
        return len(self.mant)

    @property
    def is_zero(self) -> bool:
        return self.n_terms == 0

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n_terms else 0

    def is_constant(self) -> bool:
        return self.n_terms == 0 or self.max_degree == 0

    @cached_property
    def log_abs_coefficients(self) -> np.ndarray:
        return _ext.log_abs(self.mant, self.exp2)

    @cached_property
    def coefficients(self) -> Dict[MultiIndex, complex]:
        vals = _ext.to_complex(self.mant, self.exp2)
        return {tuple(int(a) for a in al): complex(v) for al, v in zip(self.alphas, vals)}

    def coefficient(self, alpha: Sequence[int]) -> complex:
        return self.coefficients.get(as_multi_index(alpha, self.dimension), 0j)

    @cached_property
    def degree_starts(self) -> np.ndarray:
        d = self.degrees
        return np.flatnonzero(np.r_[True, d[1:] != d[:-1]]) if len(d) else np.zeros(0, dtype=np.int64)

    @cached_property
    def norms(self) -> HomogeneousNorms:
        return homogeneous_l1_norms(self)

    @cached_property
    def sphere_norms(self) -> HomogeneousNorms:
        """Per-degree sums of ``|a_alpha| * max_{||z||=1} |z^alpha|``."""
        a = self.alphas.astype(np.float64)
        k = a.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(a > 0, a * np.log(a / np.where(k > 0, k, 1.0)), 0.0)
        logs = self.log_abs_coefficients + 0.5 * w.sum(axis=1)
        return _bucket_norms(self, logs)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha1()
        h.update(repr((self.dimension, self.truncation_degree, self.exact)).encode())
        for arr in (self.alphas, self.mant, self.exp2):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __hash__(self) -> int:
        return hash(self.fingerprint)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return self.fingerprint == other.fingerprint

    def __repr__(self) -> str:
        tag = "exact" if self.exact else f"D={self.truncation_degree}"
        return f"PowerSeries(m={self.dimension}, terms={self.n_terms}, {tag})"

    # -- slicing ----------------------------------------------------------

    def select(self, mask: np.ndarray) -> "PowerSeries":
        return PowerSeries.from_terms(
            self.dimension, self.alphas[mask], self.mant[mask], self.exp2[mask],
            self.truncation_degree, self.exact,
        )

    def homogeneous_part(self, k: int) -> "PowerSeries":
        return self.select(self.degrees == k)

    def z1_slice(self, k: int) -> "PowerSeries":
        """Terms whose first exponent equals ``k``."""
        return self.select(self.alphas[:, 0] == k)

    def truncate(self, degree: int) -> "PowerSeries":
        """Drop terms above ``degree``; exact series may also raise their bound."""
        if degree > self.truncation_degree and not self.exact:
            raise ValueError("cannot raise the truncation degree of an inexact series")
        mask = self.degrees <= degree
        return PowerSeries.from_terms(
            self.dimension, self.alphas[mask], self.mant[mask], self.exp2[mask],
            degree, self.exact and self.max_degree <= degree,
        )

    # -- operators --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, PowerSeries):
            return add(self, other)
        return add(self, PowerSeries.constant(self.dimension, other))

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PowerSeries):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# constructors


def make_polynomial(dimension: int, terms: Sequence[Tuple[Sequence[int], Number]],
                    truncation_degree: int | None = None) -> PowerSeries:
    """Exact polynomial from ``(multi_index, coefficient)`` pairs.

    Duplicate multi-indices are rejected rather than summed.
    """
    alphas, vals, seen = [], [], set()
    for alpha, c in terms:
        alpha = as_multi_index(alpha, dimension)
        if alpha in seen:
            raise ValueError(f"duplicate multi-index {alpha}")
        seen.add(alpha)
        alphas.append(alpha)
        vals.append(complex(c))
    degree = max((sum(a) for a in alphas), default=0)
    if truncation_degree is not None:
        if truncation_degree < degree:
            raise ValueError("truncation degree below polynomial degree")
        degree = truncation_degree
    m, e = _ext.from_complex(np.array(vals, dtype=np.complex128))
    return PowerSeries.from_terms(dimension, np.array(alphas).reshape(-1, dimension), m, e, degree, exact=True)


def make_exp_of_linear(a: Sequence[Number], D: int) -> PowerSeries:
    """Taylor series of ``exp(a_1 z_1 + ... + a_m z_m)`` through degree ``D``."""
    if D < 0:
        raise ValueError("D must be >= 0")
    a = [complex(x) for x in a]
    m = len(a)
    if m < 1:
        raise DimensionError("need at least one variable")
    if all(x == 0 for x in a):
        return PowerSeries.constant(m, 1.0, D, exact=True)
    # one-variable factors a_j^e / e!, built by a stable ratio recurrence
    um = np.zeros((m, D + 1), dtype=np.complex128)
    ue = np.zeros((m, D + 1), dtype=np.int64)
    for j, aj in enumerate(a):
        cm, ce = _ext.from_complex([1.0])
        um[j, 0], ue[j, 0] = cm[0], ce[0]
        for e in range(1, D + 1):
            if aj == 0:
                break
            cm, ce = _ext.normalize(um[j, e - 1] * aj / e, ue[j, e - 1])
            um[j, e], ue[j, e] = cm, ce
    # only variables with a_j != 0 carry terms
    active = [j for j in range(m) if a[j] != 0]
    alphas = np.zeros((math.comb(D + len(active), len(active)), m), dtype=np.int64)
    alphas[:, active] = all_multi_indices(len(active), D)
    mant = np.ones(len(alphas), dtype=np.complex128)
    exp2 = np.zeros(len(alphas), dtype=np.int64)
    for j in active:
        mant = mant * um[j, alphas[:, j]]
        exp2 = exp2 + ue[j, alphas[:, j]]
    mant, exp2 = _ext.normalize(mant, exp2)
    return PowerSeries.from_terms(m, alphas, mant, exp2, D, exact=False)


# ---------------------------------------------------------------------------
# arithmetic


def _check_dims(s: PowerSeries, t: PowerSeries) -> None:
    if s.dimension != t.dimension:
        raise DimensionError(f"dimension mismatch: {s.dimension} vs {t.dimension}")


def _combined_degree(s: PowerSeries, t: PowerSeries, product: bool) -> Tuple[int, bool]:
    if s.exact and t.exact:
        return (s.truncation_degree + t.truncation_degree if product
                else max(s.truncation_degree, t.truncation_degree)), True
    if s.exact:
        return t.truncation_degree, False
    if t.exact:
        return s.truncation_degree, False
    return min(s.truncation_degree, t.truncation_degree), False


def add(s: PowerSeries, t: PowerSeries) -> PowerSeries:
    _check_dims(s, t)
    D, exact = _combined_degree(s, t, product=False)
    return PowerSeries.from_terms(
        s.dimension,
        np.vstack([s.alphas, t.alphas]),
        np.concatenate([s.mant, t.mant]),
        np.concatenate([s.exp2, t.exp2]),
        D, exact,
    )


def scale(s: PowerSeries, c: Number) -> PowerSeries:
    cm, ce = _ext.from_complex([complex(c)])
    m, e = _ext.multiply(s.mant, s.exp2, cm[0], ce[0])
    return PowerSeries.from_terms(s.dimension, s.alphas, m, e, s.truncation_degree, s.exact)


def _outer_terms(sa, sm, se, ta, tm, te):
    al = (sa[:, None, :] + ta[None, :, :]).reshape(-1, sa.shape[1])
    m = (sm[:, None] * tm[None, :]).reshape(-1)
    e = (se[:, None] + te[None, :]).reshape(-1)
    return al, m, e


def mul(s: PowerSeries, t: PowerSeries) -> PowerSeries:
    """Truncated Cauchy product.

    The result keeps every degree that both factors determine: the minimum of
    the truncation degrees, where an exact polynomial counts as unbounded.
    """
    _check_dims(s, t)
    D, exact = _combined_degree(s, t, product=True)
    if s.is_zero or t.is_zero:
        return PowerSeries.zero(s.dimension, D, exact)
    if s.n_terms > t.n_terms:
        s, t = t, s
    t_deg = t.degrees
    acc_a, acc_m, acc_e = [], [], []
    pending = 0
    parts = []
    for i in np.unique(s.degrees):
        rows = np.flatnonzero(s.degrees == i)
        cut = int(np.searchsorted(t_deg, D - i, side="right"))
        if cut == 0:
            continue
        step = max(1, _CHUNK_ELEMS // cut)
        for lo in range(0, len(rows), step):
            r = rows[lo:lo + step]
            al, m, e = _outer_terms(s.alphas[r], s.mant[r], s.exp2[r],
                                    t.alphas[:cut], t.mant[:cut], t.exp2[:cut])
            acc_a.append(al)
            acc_m.append(m)
            acc_e.append(e)
            pending += len(m)
            if pending > 4 * _CHUNK_ELEMS:
                parts.append(PowerSeries.from_terms(s.dimension, np.vstack(acc_a), np.concatenate(acc_m),
                                                    np.concatenate(acc_e), D, exact))
                acc_a, acc_m, acc_e, pending = [], [], [], 0
    if acc_m:
        parts.append(PowerSeries.from_terms(s.dimension, np.vstack(acc_a), np.concatenate(acc_m),
                                            np.concatenate(acc_e), D, exact))
    if not parts:
        return PowerSeries.zero(s.dimension, D, exact)
    out = parts[0]
    for p in parts[1:]:
        out = PowerSeries.from_terms(s.dimension, np.vstack([out.alphas, p.alphas]),
                                     np.concatenate([out.mant, p.mant]),
                                     np.concatenate([out.exp2, p.exp2]), D, exact)
    return out


def exp_series(g: PowerSeries, degree: int | None = None) -> PowerSeries:
    """Formal ``exp(g)`` truncated at ``degree`` (default: ``g``'s degree).

    Uses the Euler-operator form of ``dh = h dg``: with homogeneous parts
    ``h_k``, ``k h_k = sum_{j=1..k} j g_j h_{k-j}``.
    """
    D = g.truncation_degree if degree is None else int(degree)
    if degree is not None and D > g.truncation_degree and not g.exact:
        raise ValueError("requested degree exceeds the truncation of g")
    m = g.dimension
    g0 = g.coefficient((0,) * m)
    h0m, h0e = _ext.from_log([g0.real], [complex(math.cos(g0.imag), math.sin(g0.imag))])
    exact = g.is_constant()
    if depends_on_z1_only(g) and not exact:
        gm, ge = univariate_coefficients(g, D)
        jm, je = _ext.normalize(gm * np.arange(D + 1), ge)
        hm = np.zeros(D + 1, dtype=np.complex128)
        he = np.zeros(D + 1, dtype=np.int64)
        hm[0], he[0] = h0m[0], h0e[0]
        for k in range(1, D + 1):
            s_m, s_e = ext_dot(jm[1:k + 1], je[1:k + 1], hm[k - 1::-1], he[k - 1::-1])
            km, ke = _ext.normalize(np.array([s_m / k]), np.array([s_e]))
            hm[k], he[k] = km[0], ke[0]
        return from_univariate(m, hm, he, D)
    parts = {0: (np.zeros((1, m), dtype=np.int64), h0m, h0e)}
    g_parts = {}
    for j in range(1, D + 1):
        mask = g.degrees == j
        if mask.any():
            g_parts[j] = (g.alphas[mask], g.mant[mask], g.exp2[mask])
    for k in range(1, D + 1):
        acc_a, acc_m, acc_e = [], [], []
        for j, (ga, gm, ge) in g_parts.items():
            if j > k or (k - j) not in parts:
                continue
            ha, hm, he = parts[k - j]
            al, mm, ee = _outer_terms(ga, gm * (j / k), ge, ha, hm, he)
            acc_a.append(al)
            acc_m.append(mm)
            acc_e.append(ee)
        if not acc_m:
            continue
        part = PowerSeries.from_terms(m, np.vstack(acc_a), np.concatenate(acc_m), np.concatenate(acc_e), D)
        if part.n_terms:
            parts[k] = (part.alphas, part.mant, part.exp2)
    keys = sorted(parts)
    return PowerSeries.from_terms(
        m,
        np.vstack([parts[k][0] for k in keys]),
        np.concatenate([parts[k][1] for k in keys]),
        np.concatenate([parts[k][2] for k in keys]),
        D, exact,
    )


def depends_on_z1_only(s: PowerSeries) -> bool:
    return s.dimension == 1 or not s.alphas[:, 1:].any()


def univariate_coefficients(s: PowerSeries, D: int):
    """Dense ``(mant, exp2)`` arrays of length ``D+1`` for a series in ``z_1`` alone."""
    mant = np.zeros(D + 1, dtype=np.complex128)
    exp2 = np.zeros(D + 1, dtype=np.int64)
    k = s.alphas[:, 0]
    keep = k <= D
    mant[k[keep]] = s.mant[keep]
    exp2[k[keep]] = s.exp2[keep]
    return mant, exp2


def from_univariate(dimension: int, mant: np.ndarray, exp2: np.ndarray, D: int,
                    exact: bool = False) -> PowerSeries:
    al = np.zeros((len(mant), dimension), dtype=np.int64)
    al[:, 0] = np.arange(len(mant))
    return PowerSeries.from_terms(dimension, al, mant, exp2, D, exact)


def ext_dot(am, ae, bm, be) -> Tuple[complex, int]:
    """``sum_i a_i b_i`` of extended values as one unnormalised ``(mant, exp2)`` pair."""
    e = ae + be
    nz = (am != 0) & (bm != 0)
    if not nz.any():
        return 0j, 0
    top = int(e[nz].max())
    w = np.where(nz, am * bm, 0) * np.ldexp(1.0, np.clip(e - top, -1100, 0))
    return complex(np.sum(w)), top


def partial_derivative(s: PowerSeries, I: Sequence[int]) -> PowerSeries:
    I = np.array(as_multi_index(I, s.dimension), dtype=np.int64)
    D = max(s.truncation_degree - int(I.sum()), 0)
    if not I.any():
        return s
    mask = np.all(s.alphas >= I, axis=1)
    al = s.alphas[mask]
    factor = np.ones(len(al), dtype=np.float64)
    for j, ij in enumerate(I):
        for t in range(int(ij)):
            factor *= (al[:, j] - t)
    m, e = _ext.normalize(s.mant[mask] * factor, s.exp2[mask])
    return PowerSeries.from_terms(s.dimension, al - I, m, e, D, s.exact)


def antiderivative_z1(s: PowerSeries) -> PowerSeries:
    """Antiderivative in ``z_1`` with zero constant of integration."""
    al = s.alphas.copy()
    al[:, 0] += 1
    m, e = _ext.normalize(s.mant / al[:, 0], s.exp2)
    return PowerSeries.from_terms(s.dimension, al, m, e, s.truncation_degree + 1, s.exact)


def _bucket_norms(s: PowerSeries, logs: np.ndarray) -> HomogeneousNorms:
    out = np.full(s.truncation_degree + 1, -np.inf)
    if s.n_terms:
        starts = s.degree_starts
        vals = _ext.logsumexp_groups(logs, starts, len(starts))
        out[s.degrees[starts]] = vals
    out.flags.writeable = False
    return HomogeneousNorms(out)


def homogeneous_l1_norms(s: PowerSeries) -> HomogeneousNorms:
    """``||a_k||_1 = sum_{|alpha|=k} |a_alpha|`` for k = 0..D."""
    return _bucket_norms(s, s.log_abs_coefficients)


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class _EvalData:
    Lc: np.ndarray
    uc: np.ndarray
    A: np.ndarray


def _eval_data(s: PowerSeries) -> _EvalData:
    data = s.__dict__.get("_eval_cache")
    if data is None:
        uc = s.mant / np.abs(s.mant)
        data = _EvalData(np.ascontiguousarray(s.log_abs_coefficients), np.ascontiguousarray(uc),
                         np.ascontiguousarray(s.alphas))
        object.__setattr__(s, "_eval_cache", data)
    return data


def _points(s: PowerSeries, Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.complex128))
    if Z.shape[1] != s.dimension:
        raise DimensionError(f"points have dimension {Z.shape[1]}, series has {s.dimension}")
    return np.ascontiguousarray(Z)


def _run(s: PowerSeries, Z: np.ndarray, scale_degree: int | None, want_euler: bool):
    n = len(Z)
    if s.is_zero:
        return (np.zeros(n, dtype=np.complex128), np.full(n, -np.inf),
                np.zeros((n, s.dimension), dtype=np.complex128), np.zeros(n))
    d = _eval_data(s)
    if scale_degree is None:
        fixed, use_fixed = np.zeros(n), False
    else:
        with np.errstate(divide="ignore"):
            fixed, use_fixed = scale_degree * np.log(np.linalg.norm(Z, axis=1)), True
    return _kernels.eval_points(d.Lc, d.uc, d.A, Z, max(s.max_degree, 1), fixed, use_fixed, want_euler)


def evaluate_batch(s: PowerSeries, Z, scale_degree: int | None = None):
    """Evaluate at many points; returns ``(mantissa, log_scale)`` arrays.

    By default each point is scaled by its own largest term, so mantissas
    stay of order one whatever the size of ``f``.
    """
    mant, shift, _, _ = _run(s, _points(s, Z), scale_degree, False)
    return mant, shift


def evaluate(s: PowerSeries, z, scale_degree: int | None = None) -> Tuple[complex, float]:
    """Value at one point as ``(mantissa, log_scale)``; ``f = mantissa*exp(log_scale)``.

    Terms are summed in canonical degree order with compensated accumulation.
    """
    mant, shift = evaluate_batch(s, np.asarray(z, dtype=np.complex128).reshape(1, -1), scale_degree)
    if mant[0] == 0:
        return 0j, -math.inf
    return complex(mant[0]), float(shift[0])


def log_abs_and_euler(s: PowerSeries, Z):
    """``log|f|`` and the Euler ratios ``z_j (df/dz_j) / f`` at each point."""
    mant, shift, euler, _ = _run(s, _points(s, Z), None, True)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.where(mant != 0, np.log(np.abs(mant)) + shift, -np.inf)
        ratios = euler / mant[:, None]
    return logf, ratios


@dataclass(frozen=True)
class LogBounds:
    """Pointwise ``log|f|`` bracketed by rounding-error bounds.

    ``log_lower <= log|f| <= log_upper`` up to the stated error model; the
    bracket is wide exactly where cancellation has destroyed the value.
    """

    log_abs: np.ndarray
    log_upper: np.ndarray
    log_lower: np.ndarray

    @property
    def width(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(np.isfinite(self.log_lower), self.log_upper - self.log_lower, np.inf)

    @property
    def plus_width(self) -> np.ndarray:
        """Width of the induced bracket for ``log+ |f|``."""
        with np.errstate(invalid="ignore"):
            return np.maximum(self.log_upper, 0.0) - np.maximum(self.log_lower, 0.0)


# worst-case rounding of a compensated sum of rounded terms, relative to sum |terms|
ERR_REL = 16 * 2.0 ** -52


def log_abs_bounds(s: PowerSeries, Z) -> LogBounds:
    mant, shift, _, abssum = _run(s, _points(s, Z), None, False)
    a = np.abs(mant)
    err = abssum * ERR_REL
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.where(a > 0, np.log(a) + shift, -np.inf)
        upper = np.where(a + err > 0, np.log(a + err) + shift, -np.inf)
        lower = np.where(a > err, np.log(np.maximum(a - err, 0.0)) + shift, -np.inf)
    return LogBounds(logf, upper, lower)


def log_abs_batch(s: PowerSeries, Z) -> np.ndarray:
    mant, shift = evaluate_batch(s, Z)
    with np.errstate(divide="ignore"):
        return np.where(mant != 0, np.log(np.abs(mant)) + shift, -np.inf)


def to_value(mantissa: complex, log_scale: float) -> complex:
    """Collapse a split value to a plain complex number (may overflow)."""
    if mantissa == 0 or log_scale == -math.inf:
        return 0j
    return mantissa * math.exp(log_scale)


@dataclass(frozen=True)
class Quotient:
    """Meromorphic function ``num/den`` evaluated pointwise."""

    num: PowerSeries
    den: PowerSeries

    @property
    def dimension(self) -> int:
        return self.num.dimension

    def log_abs_bounds(self, Z) -> LogBounds:
        n = log_abs_bounds(self.num, Z)
        d = log_abs_bounds(self.den, Z)
        with np.errstate(invalid="ignore"):
            return LogBounds(n.log_abs - d.log_abs, n.log_upper - d.log_lower, n.log_lower - d.log_upper)

    def log_abs_batch(self, Z) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return log_abs_batch(self.num, Z) - log_abs_batch(self.den, Z)


def log_abs_of(f, Z) -> np.ndarray:
    if isinstance(f, PowerSeries):
        return log_abs_batch(f, Z)
    return f.log_abs_batch(Z)


def log_abs_bounds_of(f, Z) -> LogBounds:
    if isinstance(f, PowerSeries):
        return log_abs_bounds(f, Z)
    return f.log_abs_bounds(Z)


# ---------------------------------------------------------------------------
# truncation trust


def is_trusted(s: PowerSeries, r: float, margin: int = TRUST_MARGIN, sphere: bool = False) -> bool:
    """Whether the truncated series represents ``f`` faithfully at radius ``r``.

    Trusted iff the central index sits at least ``margin`` below ``D`` and
    the last ``margin`` degree terms ``||a_k||_1 r^k`` shrink by a factor
    of at least 2 between consecutive non-zero degrees.  With ``sphere``
    the terms use the sphere majorant ``max_{||z||=r} |z^alpha|``, which
    is the relevant bound for evaluations on ``S(r)``.
    """
    if s.exact or s.is_zero:
        return True
    norms = s.sphere_norms if sphere else s.norms
    D = s.truncation_degree
    if norms.central_index(r) > D - margin:
        return False
    window = norms.log_terms(r)[max(D - margin + 1, 0):]
    window = window[np.isfinite(window)]
    return bool(np.all(np.diff(window) <= -_ext.LN2 + 1e-12))


def require_trusted(f, r: float, sphere: bool = False) -> None:
    series = [f] if isinstance(f, PowerSeries) else [f.num, f.den]
    for s in series:
        if not is_trusted(s, r, sphere=sphere):
            raise UntrustedRadiusError(f"radius {r:g} is not trusted at truncation D={s.truncation_degree}")
