"""Logarithmic partial-derivative ratios and the estimates built on them.

Checks provided here:

* the ratio bound ``|d^{I_n} f / d^I f| <= B (T(a^2 r)/r + n(a^2 r)/r)^{|I_n|-|I|}``
  outside a set of radii of finite logarithmic measure;
* its finite-order form ``<= ||z||^{(|I_n|-|I|)(rho - 1 + eps)}``;
* the counting bound ``n(r) <= (|I|+3)/log(a) T(a r)``;
* the quotient-rule identities for first and second derivatives of
  ``d_i g / g``, with the left sides obtained by independent contour
  differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import median
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .growth import (DEFAULT_R0, RadiusGrid, characteristic, counting_from_valence, derived_seed,
                     diverging_order, norms_profile, order_slopes)
from .reports import InequalityReport, csv_text, record
from .sampling import sample_sigma
from .series import (PowerSeries, as_multi_index, evaluate, evaluate_batch, is_trusted, log_abs_bounds,
                     partial_derivative)

TINY_LOG = math.log(1e-300)
RESAMPLE_ROUNDS = 10
LOG_TOL = 1e-3
MEDIAN_FACTOR = 10.0
MAX_REJECT_RATE = 0.01


class VanishingDenominatorError(ZeroDivisionError):
    """The denominator derivative vanishes (numerically) at the point."""


class InfiniteOrderError(ValueError):
    """Order estimates diverge, so a finite-order bound cannot be checked."""


@lru_cache(maxsize=256)
def derivative(f: PowerSeries, I: Tuple[int, ...]) -> PowerSeries:
    return partial_derivative(f, I)


def _index(f: PowerSeries, I) -> Tuple[int, ...]:
    return as_multi_index(I, f.dimension)


def logderiv_ratio(f: PowerSeries, I, I_n, z) -> Tuple[complex, float]:
    """``d^{I_n} f(z) / d^I f(z)`` as ``(mantissa, log_scale)``."""
    I, I_n = _index(f, I), _index(f, I_n)
    nm, ns = evaluate(derivative(f, I_n), z)
    dm, ds = evaluate(derivative(f, I), z)
    if dm == 0 or math.log(abs(dm)) + ds <= TINY_LOG:
        raise VanishingDenominatorError(f"d^{I} f vanishes at {tuple(np.round(np.asarray(z), 6))}")
    if nm == 0:
        return 0j, -math.inf
    q = nm / dm
    return q / abs(q), math.log(abs(q)) + ns - ds


def log_ratio_bounds(f: PowerSeries, I, I_n, Z):
    """``(log|ratio|, usable)`` at many points.

    A point is unusable when the denominator vanishes or either derivative
    has lost its value to cancellation.
    """
    I, I_n = _index(f, I), _index(f, I_n)
    num = log_abs_bounds(derivative(f, I_n), Z)
    den = log_abs_bounds(derivative(f, I), Z)
    with np.errstate(invalid="ignore"):
        val = num.log_abs - den.log_abs
    num_ok = (num.width <= LOG_TOL) | np.isneginf(num.log_upper)
    usable = (den.log_abs > TINY_LOG) & (den.width <= LOG_TOL) & num_ok
    return val, usable


def max_log_ratio(f: PowerSeries, I, I_n, r: float, count: int, seed: int) -> Tuple[float, int]:
    """Largest sampled ``log|d^{I_n} f / d^I f|`` on ``S(r)``.

    Unusable points are redrawn from fresh seeds for up to ten rounds; the
    number still unusable afterwards is returned alongside the maximum.
    """
    best = -math.inf
    need = count
    for rnd in range(RESAMPLE_ROUNDS + 1):
        pts = sample_sigma(f.dimension, r, need, derived_seed(seed, rnd)).points
        val, ok = log_ratio_bounds(f, I, I_n, pts)
        if ok.any():
            best = max(best, float(np.max(val[ok])))
        need = int((~ok).sum())
        if need == 0:
            break
    return best, need


def _checked_radii(f: PowerSeries, radii, factor: float) -> Tuple[list, list]:
    keep, skipped = [], []
    for r in radii:
        r = float(r)
        if is_trusted(f, r, sphere=True) and is_trusted(f, factor * r, sphere=True):
            keep.append(r)
        else:
            skipped.append(r)
    return keep, skipped


def _radii(grid) -> np.ndarray:
    return grid.radii if isinstance(grid, RadiusGrid) else np.asarray(grid, dtype=float)


def _grid_length(grid) -> float:
    r = _radii(grid)
    return math.log(r[-1] / r[0]) if len(r) > 1 else 0.0


def verify_theorem21(f: PowerSeries, I, I_n, alpha: float, grid, points_per_radius: int = 200,
                     seed: int = 0, samples: int = 20_000) -> InequalityReport:
    """Ratio bound with the characteristic and the counting function.

    Per radius the empirical constant is ``LHS / core`` with
    ``core = (T(a^2 r)/r + n(a^2 r)/r)^n``.  A radius violates when its
    constant exceeds ten times the running median of the constants so far.
    ``n(a^2 r)`` is the mean counting function over ``[a r, a^2 r]``, which
    never exceeds ``n(a^2 r)``; this makes the check conservative.
    """
    if f.is_zero:
        raise ValueError("the ratio bound is undefined for the zero series")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    I, I_n = _index(f, I), _index(f, I_n)
    order = sum(I_n) - sum(I)
    if order < 1:
        raise ValueError("need |I_n| > |I|")
    g = derivative(f, I)
    if g.is_zero:
        raise ValueError("d^I f is identically zero")
    report = InequalityReport("T21", "exceptional", seed=seed, grid_log_length=_grid_length(grid),
                              params={"I": I, "I_n": I_n, "alpha": alpha, "points": points_per_radius})
    radii, report.skipped = _checked_radii(f, _radii(grid), alpha ** 2)
    ratios, rs, lhs_all, core_all = [], [], [], []
    for k, r in enumerate(radii):
        sk = derived_seed(seed, k)
        lhs, lost = max_log_ratio(f, I, I_n, r, points_per_radius, sk)
        T = characteristic(f, alpha ** 2 * r, samples, sk)
        if g.is_constant():
            n_est, n_rej = 0.0, 0
        else:
            cnt = counting_from_valence(g, alpha * r, alpha ** 2 * r, samples, sk)
            n_est, n_rej = max(cnt.value, 0.0), cnt.rejected
        if T.rejection_rate > MAX_REJECT_RATE or n_rej > MAX_REJECT_RATE * samples or not math.isfinite(lhs):
            report.skipped.append(r)
            report.notes.append(f"r={r:.6g}: ill-conditioned sampling, skipped")
            continue
        base = (max(T.value, 0.0) + n_est) / r
        core = order * math.log(base) if base > 0 else -math.inf
        rs.append(r)
        lhs_all.append(lhs)
        core_all.append(core)
        ratios.append(lhs - core)
    B_log = []
    for k, r in enumerate(rs):
        med = median(ratios[:k + 1])
        rhs = core_all[k] + med + math.log(MEDIAN_FACTOR)
        report.records.append(record(r, lhs_all[k], rhs))
        if report.records[-1].satisfied:
            B_log.append(ratios[k])
    report.empirical_B = math.exp(max(B_log)) if B_log else math.nan
    report.params["B_per_radius"] = [math.exp(x) if x < 700 else math.inf for x in ratios]
    return report


def b_bounded(report: InequalityReport, factor: float = 10.0) -> bool:
    """Trailing-half maximum of the per-radius constants within ``factor`` of their median."""
    B = np.asarray(report.params.get("B_per_radius", []), dtype=float)
    if len(B) == 0:
        return False
    tail = B[len(B) // 2:]
    return bool(np.max(tail) <= factor * np.median(tail))


def order_radii_for(f: PowerSeries, r_min: float, points: int = 24) -> np.ndarray:
    """Geometric radii from ``r_min`` up to the largest polydisc-trusted radius."""
    hi = r_min
    while is_trusted(f, hi * 1.1) and hi < 1e12:
        hi *= 1.1
    if hi <= r_min * 1.5:
        hi = r_min * 1.5
    return r_min * (hi / r_min) ** np.linspace(0.0, 1.0, points)


def estimate_order_for(f: PowerSeries, radii: Sequence[float]) -> Tuple[float, np.ndarray, bool]:
    """``(rho_hat, trailing slopes, diverging)`` from central indices on ``radii``."""
    prof = norms_profile(f, radii)
    slopes = order_slopes(prof, "central_index")
    return float(slopes.max()), slopes, diverging_order(prof)


def verify_corollary21(f: PowerSeries, I, I_n, eps: float, grid, points_per_radius: int = 200,
                       seed: int = 0, order_radii: Optional[Sequence[float]] = None) -> InequalityReport:
    """Finite-order ratio bound ``r^{n (rho - 1 + eps)}`` with the module's own order estimate.

    The order is estimated from central indices on ``order_radii`` (default:
    from the first grid radius up to the largest trusted one).  A diverging slope sequence means infinite order and the
    check is refused.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    I, I_n = _index(f, I), _index(f, I_n)
    order = sum(I_n) - sum(I)
    radii_all = _radii(grid)
    if order_radii is None:
        order_radii = order_radii_for(f, float(radii_all[0]))
    rho, slopes, diverging = estimate_order_for(f, order_radii)
    if diverging:
        raise InfiniteOrderError(f"order slopes keep rising: {np.round(slopes, 3).tolist()}")
    report = InequalityReport("C21", "exceptional", seed=seed, grid_log_length=_grid_length(grid),
                              params={"I": I, "I_n": I_n, "eps": eps, "rho_hat": rho})
    radii, report.skipped = _checked_radii(f, radii_all, 1.0)
    for k, r in enumerate(radii):
        lhs, lost = max_log_ratio(f, I, I_n, r, points_per_radius, derived_seed(seed, k))
        if not math.isfinite(lhs):
            report.skipped.append(r)
            continue
        report.records.append(record(r, lhs, order * (rho - 1 + eps) * math.log(r), 1e-9))
    return report


def verify_lemma24(f: PowerSeries, I, a, alpha: float, grid, seed: int = 0,
                   samples: int = 20_000) -> InequalityReport:
    """Counting bound ``n(r) <= (|I|+3)/log(a) T(a r)`` for the a-points of ``d^I f``.

    ``n(r)`` is estimated by the mean counting function over ``[r, a r]``,
    an over-estimate for a non-decreasing ``n``.  Entire inputs have no
    poles, so ``a = inf`` gives ``n = 0``.
    """
    if not isinstance(f, PowerSeries):
        raise TypeError("the counting bound is implemented for entire series")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if a not in (0, math.inf):
        raise ValueError("a must be 0 or infinity")
    I = _index(f, I)
    g = derivative(f, I)
    report = InequalityReport("L24", "threshold", seed=seed, grid_log_length=_grid_length(grid),
                              params={"I": I, "a": a, "alpha": alpha})
    radii, report.skipped = _checked_radii(f, _radii(grid), alpha)
    coef = (sum(I) + 3) / math.log(alpha)
    for k, r in enumerate(radii):
        sk = derived_seed(seed, k)
        T = characteristic(f, alpha * r, samples, sk)
        if a == 0 and not g.is_constant():
            n = counting_from_valence(g, r, alpha * r, samples, sk)
            n_val, n_se, n_rej = n.value, n.stderr, n.rejected
        else:
            n_val, n_se, n_rej = (0.0, 0.0, 0)
        if T.rejection_rate > MAX_REJECT_RATE or n_rej > MAX_REJECT_RATE * samples:
            report.skipped.append(r)
            continue
        slack = 3 * math.hypot(n_se, coef * T.stderr) + 1e-9
        lhs = math.log(n_val) if n_val > 0 else -math.inf
        rhs_val = coef * T.value + slack
        rhs = math.log(rhs_val) if rhs_val > 0 else -math.inf
        report.records.append(record(r, lhs, rhs))
    return report


# ---------------------------------------------------------------------------
# quotient-rule identities


@dataclass
class IdentityReport:
    max_discrepancy_first: float
    max_discrepancy_second: float
    tolerance: float
    points: int
    skipped_points: int = 0
    details: List[Tuple] = field(default_factory=list)

    CSV_COLUMNS = ("identity", "i", "j", "l", "max_discrepancy")

    @property
    def passed(self) -> bool:
        return max(self.max_discrepancy_first, self.max_discrepancy_second) <= self.tolerance

    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def rows(self):
        for d in self.details:
            if d[0] == "first":
                yield {"identity": "first", "i": d[1], "j": d[2], "l": "", "max_discrepancy": d[3]}
            else:
                yield {"identity": "second", "i": d[1], "j": d[2], "l": d[3], "max_discrepancy": d[4]}

    def to_csv(self) -> str:
        return csv_text(self.CSV_COLUMNS, self.rows())

    def summary_line(self) -> str:
        return (f"IDS: {self.verdict()} (first {self.max_discrepancy_first:.3g}, "
                f"second {self.max_discrepancy_second:.3g}, tolerance {self.tolerance:g}, {self.points} points)")


def _unit(m: int, j: int) -> Tuple[int, ...]:
    e = [0] * m
    e[j] += 1
    return tuple(e)


def _add(*idx) -> Tuple[int, ...]:
    return tuple(int(sum(v)) for v in zip(*idx))


def _values(s: PowerSeries, Z) -> np.ndarray:
    mant, shift = evaluate_batch(s, Z)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(mant != 0, mant * np.exp(shift), 0)


CONTOUR_NODES = 24


def _contour_derivative(h, Z: np.ndarray, dirs: Sequence[int], rho: np.ndarray) -> np.ndarray:
    """Mixed derivative of ``h`` along coordinate list ``dirs`` (length 1 or 2)
    by the trapezoid rule on circles (a torus for two distinct directions)."""
    N = CONTOUR_NODES
    w = np.exp(2j * np.pi * np.arange(N) / N)
    P, m = Z.shape
    if len(dirs) == 1 or dirs[0] == dirs[1]:
        k = len(dirs)
        j = dirs[0]
        nodes = np.repeat(Z[:, None, :], N, axis=1)
        nodes[:, :, j] += rho[:, None] * w[None, :]
        vals = h(nodes.reshape(-1, m)).reshape(P, N)
        return math.factorial(k) * np.mean(vals * w[None, :] ** (-k), axis=1) / rho ** k
    j, l = dirs
    nodes = np.repeat(Z[:, None, None, :], N, axis=1).repeat(N, axis=2)
    nodes[:, :, :, j] += rho[:, None, None] * w[None, :, None]
    nodes[:, :, :, l] += rho[:, None, None] * w[None, None, :]
    vals = h(nodes.reshape(-1, m)).reshape(P, N, N)
    kern = w[:, None] ** -1 * w[None, :] ** -1
    return np.mean(vals * kern[None], axis=(1, 2)) / rho ** 2


def verify_logderiv_identities(f: PowerSeries, points, tolerance: float = 1e-8, I=None) -> IdentityReport:
    """Check the first- and second-order quotient-rule identities for ``g = d^I f``.

    Right sides use series derivatives of ``g``; left sides differentiate the
    pointwise ratio ``d_i g / g`` numerically on small circles whose radius
    is a fraction of the estimated distance to the zero set of ``g``.
    Discrepancies are relative to the largest of the left side, the sum of
    the moduli of the right-hand terms and ``|d_i g / g| / rho**k``, the size
    of the ratio's ``k``-th derivative at the circle radius (this keeps
    quadrature round-off from counting when the true value is zero).
    """
    m = f.dimension
    g = derivative(f, _index(f, I if I is not None else (0,) * m))
    Z = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    D = lambda *idx: _values(derivative(g, _add((0,) * m, *idx)), Z)  # noqa: E731
    g0 = D()
    keep = np.abs(g0) > 1e-300
    skipped = int((~keep).sum())
    Z, g0 = Z[keep], g0[keep]
    D = lambda *idx: _values(derivative(g, _add((0,) * m, *idx)), Z)  # noqa: E731
    e = [_unit(m, j) for j in range(m)]
    first = {j: D(e[j]) / g0 for j in range(m)}
    grad = np.sqrt(sum(np.abs(first[j]) ** 2 for j in range(m)))
    with np.errstate(divide="ignore"):
        dist = np.where(grad > 0, 1.0 / grad, np.inf)
    rho = np.minimum(0.1 * dist, 0.05)
    worst1 = worst2 = 0.0
    details = []
    for i in range(m):
        gi = derivative(g, e[i])

        def h(W, gi=gi):
            return _values(gi, W) / _values(g, W)

        for j in range(m):
            lhs = _contour_derivative(h, Z, [j], rho)
            a = D(e[i], e[j]) / g0
            b = first[j] * first[i]
            scale = np.maximum(np.maximum(np.abs(lhs), np.abs(a) + np.abs(b)), np.abs(first[i]) / rho)
            disc = np.abs(lhs - (a - b)) / np.where(scale > 0, scale, 1.0)
            worst1 = max(worst1, float(disc.max(initial=0.0)))
            details.append(("first", i, j, float(disc.max(initial=0.0))))
            for l in range(j, m):
                k = j
                lhs2 = _contour_derivative(h, Z, [k, l], rho)
                terms = [D(e[l], e[k], e[i]) / g0,
                         -first[l] * (D(e[k], e[i]) / g0),
                         -first[i] * (D(e[l], e[k]) / g0),
                         -first[k] * (D(e[l], e[i]) / g0),
                         2 * first[i] * first[k] * first[l]]
                rhs2 = sum(terms)
                scale = np.maximum(np.maximum(np.abs(lhs2), sum(np.abs(t) for t in terms)),
                                   np.abs(first[i]) / rho ** 2)
                disc = np.abs(lhs2 - rhs2) / np.where(scale > 0, scale, 1.0)
                worst2 = max(worst2, float(disc.max(initial=0.0)))
                details.append(("second", i, k, l, float(disc.max(initial=0.0))))
    return IdentityReport(worst1, worst2, tolerance, len(Z), skipped, details)
