"""Series solutions of ``d^I f - e^P f = Q`` and their hyper-order.

Solutions are built stratum by stratum in ``z_1``: writing
``f = sum_k f_k(z_2..z_m) z_1^k`` the first-order equation becomes the
recurrence ``(k+1) f_{k+1} = [e^P f + Q]_k``.  When ``P``, ``Q`` and the
initial stratum involve ``z_1`` alone the strata are scalars and the
recurrence runs on dense extended-range arrays, which reaches degrees in
the thousands.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _ext
from .growth import (GrowthProfile, _logplus, diverging_order, hyper_order_estimate, norms_profile,
                     order_slopes, proximity)
from .reports import csv_text
from .sampling import sample_sigma
from .series import (PowerSeries, UntrustedRadiusError, _outer_terms, antiderivative_z1, as_multi_index,
                     depends_on_z1_only, evaluate_batch, exp_series, ext_dot, from_univariate, is_trusted,
                     partial_derivative, univariate_coefficients)
from .seriesio import SeriesFormatError, parse_series_lines, write_series

RESIDUAL_TOL = 1e-8
HYPER_ORDER_TOL = 0.3
INVARIANT_TOL = 0.25


class PreconditionError(ValueError):
    """An instance or candidate solution does not meet an operation's requirements."""


@dataclass(frozen=True, eq=False)
class PdeInstance:
    """``d^I f - e^P f = Q`` on C^m with ``I = (k, 0, ..., 0)``."""

    dimension: int
    I: Tuple[int, ...]
    P: PowerSeries
    Q: PowerSeries
    D: int
    f0: Optional[PowerSeries] = None

    def __post_init__(self):
        m = self.dimension
        I = as_multi_index(self.I, m)
        object.__setattr__(self, "I", I)
        if any(I[1:]) or I[0] < 1:
            raise PreconditionError(f"I must be (k, 0, ..., 0) with k >= 1, got {I}")
        for name in ("P", "Q") + (("f0",) if self.f0 is not None else ()):
            if getattr(self, name).dimension != m:
                raise PreconditionError(f"{name} has dimension {getattr(self, name).dimension}, expected {m}")
        if not self.P.exact:
            raise PreconditionError("P must be a polynomial")
        if self.P.is_constant():
            raise PreconditionError("P must be non-constant")
        if self.f0 is not None and self.f0.n_terms and self.f0.alphas[:, 0].any():
            raise PreconditionError("the initial stratum f0 must not involve z_1")

    @property
    def order(self) -> int:
        return self.I[0]

    @property
    def deg_P(self) -> int:
        return self.P.max_degree

    @property
    def initial(self) -> PowerSeries:
        if self.f0 is not None:
            return self.f0
        return PowerSeries.constant(self.dimension, 1.0)


def _strip_z1(s: PowerSeries, k: int) -> PowerSeries:
    sl = s.z1_slice(k)
    al = sl.alphas.copy()
    al[:, 0] = 0
    return PowerSeries.from_terms(s.dimension, al, sl.mant, sl.exp2, s.truncation_degree, s.exact)


def _solve_univariate(inst: PdeInstance, E: PowerSeries) -> PowerSeries:
    D = inst.D
    em, ee = univariate_coefficients(E, D)
    qm, qe = univariate_coefficients(inst.Q, D)
    fm = np.zeros(D + 1, dtype=np.complex128)
    fe = np.zeros(D + 1, dtype=np.int64)
    c0 = inst.initial.coefficient((0,) * inst.dimension)
    m0, e0 = _ext.from_complex([c0])
    fm[0], fe[0] = m0[0], e0[0]
    for k in range(D):
        am = np.append(em[:k + 1], qm[k])
        ae = np.append(ee[:k + 1], qe[k])
        bm = np.append(fm[k::-1], 1.0)
        be = np.append(fe[k::-1], 0)
        s_m, s_e = ext_dot(am, ae, bm, be)
        nm, ne = _ext.normalize(np.array([s_m / (k + 1)]), np.array([s_e]))
        fm[k + 1], fe[k + 1] = nm[0], ne[0]
    return from_univariate(inst.dimension, fm, fe, D)


def _solve_strata(inst: PdeInstance, E: PowerSeries) -> PowerSeries:
    m, D = inst.dimension, inst.D
    E_sl = [_strip_z1(E, i) for i in range(D + 1)]
    Q_sl = [_strip_z1(inst.Q, i) for i in range(D + 1)]
    strata = [inst.initial.truncate(D) if inst.initial.exact else inst.initial]
    for k in range(D):
        cap = D - (k + 1)
        acc_a = [Q_sl[k].alphas]
        acc_m = [Q_sl[k].mant]
        acc_e = [Q_sl[k].exp2]
        for i in range(k + 1):
            a, b = E_sl[i], strata[k - i]
            if a.is_zero or b.is_zero:
                continue
            al, mm, ee = _outer_terms(a.alphas, a.mant, a.exp2, b.alphas, b.mant, b.exp2)
            acc_a.append(al)
            acc_m.append(mm)
            acc_e.append(ee)
        mant, exp2 = _ext.normalize(np.concatenate(acc_m) / (k + 1), np.concatenate(acc_e))
        strata.append(PowerSeries.from_terms(m, np.vstack(acc_a), mant, exp2, cap))
    al = [s.alphas + np.eye(1, m, 0, dtype=np.int64) * k for k, s in enumerate(strata)]
    return PowerSeries.from_terms(m, np.vstack(al), np.concatenate([s.mant for s in strata]),
                                  np.concatenate([s.exp2 for s in strata]), D)


def solve_first_order(inst: PdeInstance) -> PowerSeries:
    """Truncated series solution of ``d_1 f - e^P f = Q`` with ``f(0, z') = f0(z')``."""
    if inst.order != 1:
        raise PreconditionError("the constructive solver handles I = (1, 0, ..., 0) only; "
                                "use tautological_instance for higher orders")
    if inst.D < inst.deg_P + 2:
        raise PreconditionError(f"D={inst.D} must be at least deg P + 2 = {inst.deg_P + 2}")
    E = exp_series(inst.P, inst.D)
    if all(depends_on_z1_only(s) for s in (inst.P, inst.Q, inst.initial)):
        return _solve_univariate(inst, E)
    return _solve_strata(inst, E)


def reference_solution(P: PowerSeries, D: int) -> PowerSeries:
    """``exp(int_0^{z_1} e^P)``: the solution with ``Q = 0`` and ``f0 = 1`` for ``P = P(z_1)``."""
    return exp_series(antiderivative_z1(exp_series(P, D)), D)


def tautological_instance(f: PowerSeries, P: PowerSeries, I: Sequence[int]) -> PdeInstance:
    """Instance for which ``f`` solves the equation by definition: ``Q := d^I f - e^P f``."""
    I = as_multi_index(I, f.dimension)
    E = exp_series(P, f.truncation_degree)
    Q = partial_derivative(f, I) - E * f
    return PdeInstance(f.dimension, I, P, Q, Q.truncation_degree)


# ---------------------------------------------------------------------------
# residuals


def _split(s: PowerSeries, Z: np.ndarray):
    mant, shift = evaluate_batch(s, Z)
    shift = np.where(mant != 0, shift, -np.inf)
    return mant, shift


def residual(inst: PdeInstance, f: PowerSeries, points, allow_untrusted: bool = False) -> float:
    """``max |d^I f - e^P f - Q| / (1 + |e^P f|)`` over ``points``."""
    Z = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    r = float(np.max(np.linalg.norm(Z, axis=1)))
    if not allow_untrusted:
        for name, s in (("f", f), ("Q", inst.Q)):
            if r > 0 and not is_trusted(s, r, sphere=True):
                raise UntrustedRadiusError(f"{name} is not trusted at radius {r:g}")
    dm, ds = _split(partial_derivative(f, inst.I), Z)
    fm, fs = _split(f, Z)
    qm, qs = _split(inst.Q, Z)
    pm, ps = evaluate_batch(inst.P, Z)
    pz = pm * np.exp(ps)
    # e^P f as a split value: unit phase times exp(log magnitude)
    bm = fm * np.exp(1j * pz.imag)
    bs = fs + pz.real
    top = np.maximum.reduce([ds, bs, qs, np.zeros(len(Z))])
    with np.errstate(invalid="ignore", over="ignore"):
        a = dm * np.exp(ds - top)
        b = bm * np.exp(bs - top)
        c = qm * np.exp(qs - top)
    a, b, c = (np.nan_to_num(v) for v in (a, b, c))
    ratio = np.abs(a - b - c) / (np.exp(-top) + np.abs(b))
    return float(np.max(ratio))


def ball_points(m: int, count: int, radius: float, seed: int) -> np.ndarray:
    """Uniform points of the closed ball of the given radius in C^m."""
    dirs = np.array(sample_sigma(m, 1.0, count, seed).points)
    u = np.random.default_rng([seed, 1]).uniform(size=count)
    return dirs * (radius * u ** (1.0 / (2 * m)))[:, None]


# ---------------------------------------------------------------------------
# smallness of Q


def _decile_means(values: np.ndarray) -> Tuple[float, float]:
    n = max(1, math.ceil(len(values) / 10))
    return float(np.mean(values[:n])), float(np.mean(values[-n:]))


@dataclass
class SmallnessReport:
    radii: np.ndarray
    ratios: np.ndarray
    decreasing: bool
    q_is_zero: bool

    @property
    def passes(self) -> bool:
        return self.q_is_zero or self.decreasing or bool(np.all(self.ratios == 0))


def smallness_check(f: PowerSeries, Q: PowerSeries, radii: Sequence[float], seed: int = 0,
                    count: int = 4000) -> SmallnessReport:
    """Per-radius ``T(r, Q) / T(r, f)`` for entire ``f`` and ``Q``."""
    radii = np.asarray(radii, dtype=float)
    if Q.is_zero:
        return SmallnessReport(radii, np.zeros(len(radii)), True, True)
    ratios = []
    for k, r in enumerate(radii):
        tq = proximity(Q, r, count, seed + k).value
        tf = proximity(f, r, count, seed + k).value
        ratios.append(tq / tf if tf > 0 else (0.0 if tq == 0 else math.inf))
    ratios = np.array(ratios)
    lo, hi = _decile_means(ratios)
    return SmallnessReport(radii, ratios, bool(hi < lo), False)


# ---------------------------------------------------------------------------
# Theorem-level check


def _bounded_below(y: np.ndarray, tol: float = INVARIANT_TOL) -> bool:
    """No downward drift: the later half never drops below the earlier half's minimum."""
    h = len(y) // 2
    return bool(np.min(y[h:]) >= np.min(y[:max(h, 1)]) - tol)


def _bounded_above(y: np.ndarray, tol: float = INVARIANT_TOL) -> bool:
    h = len(y) // 2
    return bool(np.max(y[h:]) <= np.max(y[:max(h, 1)]) + tol)


@dataclass
class T41Report:
    deg_P: int
    rho1_hat: float
    slopes: np.ndarray
    tolerance: float
    residual: float
    smallness: SmallnessReport
    profiles: List[GrowthProfile]
    lower_quantity: np.ndarray
    upper_quantity: np.ndarray
    lower_ok: bool
    upper_ok: bool
    infinite_order: bool
    notes: List[str] = field(default_factory=list)

    CSV_COLUMNS = ("r", "central_index", "trusted", "loglog_nu", "lower_quantity", "upper_quantity")

    @property
    def within_tolerance(self) -> bool:
        return abs(self.rho1_hat - self.deg_P) <= self.tolerance

    def verdict(self) -> str:
        return "PASS" if self.within_tolerance and self.lower_ok and self.upper_ok else "FAIL"

    @property
    def trusted_profiles(self) -> List[GrowthProfile]:
        return [p for p in self.profiles if p.trusted]

    def rows(self):
        it = iter(zip(self.lower_quantity, self.upper_quantity))
        for p in self.profiles:
            lo = up = ll = math.nan
            if p.trusted:
                lo, up = next(it)
                ll = float(_logplus(_logplus(np.array([float(p.central_index)])))[0])
            yield {"r": p.r, "central_index": p.central_index, "trusted": p.trusted, "loglog_nu": ll,
                   "lower_quantity": lo, "upper_quantity": up}

    def to_csv(self) -> str:
        return csv_text(self.CSV_COLUMNS, self.rows())

    def summary_line(self) -> str:
        return (f"T41: {self.verdict()} (rho1_hat={self.rho1_hat:.4g}, deg P={self.deg_P}, "
                f"tolerance={self.tolerance:g}, lower_ok={self.lower_ok}, upper_ok={self.upper_ok}, "
                f"{len(self.trusted_profiles)}/{len(self.profiles)} radii trusted)")


def verify_t41(inst: PdeInstance, f: PowerSeries, radii: Sequence[float], tolerance: float = HYPER_ORDER_TOL,
               seed: int = 0, residual_points: int = 200, smallness_count: int = 4000) -> T41Report:
    """Hyper-order of ``f`` from the central index against ``deg P``."""
    pts = ball_points(inst.dimension, residual_points, 1.0, seed)
    res = residual(inst, f, pts)
    if not res <= RESIDUAL_TOL:
        raise PreconditionError(f"f does not solve the instance (residual {res:.3g} > {RESIDUAL_TOL:g})")
    radii = np.asarray(radii, dtype=float)
    profiles = norms_profile(f, radii, seed)
    trusted = [p for p in profiles if p.trusted]
    small = smallness_check(f, inst.Q, [p.r for p in trusted], seed, smallness_count)
    if not small.passes:
        raise PreconditionError("Q is not small with respect to f on the trusted grid")
    rho1 = hyper_order_estimate(profiles)
    slopes = order_slopes(profiles, extra_logs=1)
    r = np.array([p.r for p in trusted])
    ll = _logplus(_logplus(np.array([float(p.central_index) for p in trusted])))
    n = inst.deg_P
    lower = ll - n * np.log(r)
    upper = lower - np.log(np.log(r))
    return T41Report(n, rho1, slopes, tolerance, res, small, profiles, lower, upper,
                     _bounded_below(lower), _bounded_above(upper), diverging_order(profiles, min_ratio=1.0))


# ---------------------------------------------------------------------------
# instance files


def write_instance(inst: PdeInstance, target) -> None:
    """Instance file: ``I`` and ``D`` lines, then ``P``/``Q``/``f0`` blocks closed by ``end``."""
    buf = io.StringIO()
    buf.write("I " + " ".join(str(i) for i in inst.I) + "\n")
    buf.write(f"D {inst.D}\n")
    blocks = [("P", inst.P), ("Q", inst.Q)] + ([("f0", inst.f0)] if inst.f0 is not None else [])
    for name, s in blocks:
        buf.write(f"{name}\n")
        write_series(s, buf)
        buf.write("end\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, newline="\n")


def parse_instance_lines(lines: Sequence[str]) -> PdeInstance:
    fields: Dict[str, object] = {}
    block: Optional[str] = None
    body: List[str] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if block is not None:
            if line == "end":
                fields[block] = parse_series_lines(body)
                block, body = None, []
            else:
                body.append(line)
            continue
        toks = line.split()
        if toks[0] == "I":
            fields["I"] = tuple(int(t) for t in toks[1:])
        elif toks[0] == "D" and len(toks) == 2:
            fields["D"] = int(toks[1])
        elif toks[0] in ("P", "Q", "f0") and len(toks) == 1:
            block = toks[0]
        else:
            raise SeriesFormatError(f"line {lineno}: unexpected {line!r}")
    if block is not None:
        raise SeriesFormatError(f"block {block} is not closed by 'end'")
    for key in ("I", "D", "P"):
        if key not in fields:
            raise SeriesFormatError(f"instance is missing {key}")
    P = fields["P"]
    m = P.dimension
    Q = fields.get("Q") or PowerSeries.zero(m)
    return PdeInstance(m, fields["I"], P, Q, fields["D"], fields.get("f0"))


def read_instance(source) -> PdeInstance:
    if hasattr(source, "read"):
        return parse_instance_lines(source.read().splitlines())
    return parse_instance_lines(Path(source).read_text().splitlines())
