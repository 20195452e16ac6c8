"""Growth functionals: maximum term, central index, maximum modulus,
proximity, valence and counting functions, and order estimators.

Sphere integrals are Monte-Carlo means over invariant-measure samples and
always come with a standard error.  Valence and counting estimates evaluate
``log|f|`` along the same directions at both radii, so the difference of
the two sphere integrals is estimated with paired samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .sampling import DEFAULT_RESTARTS, max_modulus_sphere, max_modulus_torus, sample_sigma
from .series import (HomogeneousNorms, PowerSeries, Quotient, UntrustedRadiusError, is_trusted,
                     log_abs_bounds_of)

Evaluable = Union[PowerSeries, Quotient]

REJECT_LOG = -1e3
LOG_TOL = 1e-3
DEFAULT_R0 = 1.25
WINDOW = 4
MIN_TRUSTED = 8


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo estimate with its standard error."""

    value: float
    stderr: float
    count: int
    rejected: int = 0

    @property
    def rejection_rate(self) -> float:
        total = self.count + self.rejected
        return self.rejected / total if total else 0.0

    def agrees_with(self, target: float, k: float = 3.0, floor: float = 1e-9) -> bool:
        return abs(self.value - target) <= k * self.stderr + floor * max(1.0, abs(target))


def _mean_se(x: np.ndarray, rejected: int) -> Estimate:
    n = len(x)
    if n == 0:
        return Estimate(math.nan, math.inf, 0, rejected)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se, n, rejected)


def max_term(norms: HomogeneousNorms, r: float) -> float:
    """``log mu(r)`` for the maximum term ``max_k ||a_k||_1 r^k``."""
    return norms.max_term(r)


def central_index(norms: HomogeneousNorms, r: float) -> int:
    """Largest degree attaining the maximum term."""
    return norms.central_index(r)


def _series_of(f: Evaluable) -> List[PowerSeries]:
    return [f] if isinstance(f, PowerSeries) else [f.num, f.den]


def _require(f: Evaluable, r: float, allow_untrusted: bool) -> None:
    if allow_untrusted:
        return
    for s in _series_of(f):
        if not is_trusted(s, r, sphere=True):
            raise UntrustedRadiusError(
                f"sphere radius {r:g} is not trusted at truncation D={s.truncation_degree}")


def _log_samples(f: Evaluable, pts: np.ndarray):
    b = log_abs_bounds_of(f, pts)
    ok = (b.width <= LOG_TOL) & (b.log_abs >= REJECT_LOG)
    return b.log_abs, ok


def proximity(f: Evaluable, r: float, count: int = 10_000, seed: int = 0,
              allow_untrusted: bool = False) -> Estimate:
    """``m(r, f)``: mean of ``log+ |f|`` over the sphere ``S(r)``.

    A sample counts when its certified bracket for ``log+ |f|`` is narrower
    than ``LOG_TOL``; samples lost to cancellation are rejected.
    """
    _require(f, r, allow_untrusted)
    pts = sample_sigma(_series_of(f)[0].dimension, r, count, seed).points
    b = log_abs_bounds_of(f, pts)
    ok = b.plus_width <= LOG_TOL
    vals = np.clip(np.maximum(b.log_abs, 0.0), np.maximum(b.log_lower, 0.0), np.maximum(b.log_upper, 0.0))
    return _mean_se(vals[ok], int((~ok).sum()))


def sphere_log_integral(f: Evaluable, r: float, count: int = 10_000, seed: int = 0,
                        allow_untrusted: bool = False) -> Estimate:
    """Mean of ``log|f|`` over ``S(r)``.

    Samples where ``|f|`` is lost to cancellation or underflow are rejected
    and counted in the estimate.
    """
    _require(f, r, allow_untrusted)
    pts = sample_sigma(_series_of(f)[0].dimension, r, count, seed).points
    vals, ok = _log_samples(f, pts)
    return _mean_se(vals[ok], int((~ok).sum()))


def _paired_difference(f: Evaluable, r_lo: float, r_hi: float, count: int, seed: int,
                       allow_untrusted: bool) -> Estimate:
    _require(f, r_lo, allow_untrusted)
    _require(f, r_hi, allow_untrusted)
    # the same seed gives the same directions at both radii
    unit = sample_sigma(_series_of(f)[0].dimension, 1.0, count, seed).points
    hi, ok_hi = _log_samples(f, unit * r_hi)
    lo, ok_lo = _log_samples(f, unit * r_lo)
    ok = ok_hi & ok_lo
    return _mean_se(hi[ok] - lo[ok], int((~ok).sum()))


def valence_jensen(f: Evaluable, r: float, r0: float = DEFAULT_R0, count: int = 10_000, seed: int = 0,
                   allow_untrusted: bool = False) -> Estimate:
    """``N(r, r0; 0; f)`` as the difference of sphere log-integrals at ``r`` and ``r0``."""
    if not 1.0 < r0 < r:
        raise ValueError(f"need 1 < r0 < r, got r0={r0}, r={r}")
    if isinstance(f, PowerSeries) and f.is_zero:
        raise ValueError("valence of the zero function is undefined")
    return _paired_difference(f, r0, r, count, seed, allow_untrusted)


def counting_from_valence(f: Evaluable, t1: float, t2: float, count: int = 10_000, seed: int = 0,
                          allow_untrusted: bool = False) -> Estimate:
    """Mean of ``n(t)`` over ``[t1, t2]`` in logarithmic scale.

    Equals ``(N(t2) - N(t1)) / log(t2/t1)``; the base radius cancels.
    """
    if not 1.0 < t1 < t2:
        raise ValueError(f"need 1 < t1 < t2, got t1={t1}, t2={t2}")
    d = _paired_difference(f, t1, t2, count, seed, allow_untrusted)
    w = math.log(t2 / t1)
    return Estimate(d.value / w, d.stderr / w, d.count, d.rejected)


def characteristic(f: Evaluable, r: float, count: int = 10_000, seed: int = 0, r0: float = DEFAULT_R0,
                   allow_untrusted: bool = False) -> Estimate:
    """``T(r, f) = m(r, f) + N(r, infinity; f)``; the pole part is zero for entire ``f``."""
    m = proximity(f, r, count, seed, allow_untrusted)
    if isinstance(f, PowerSeries) or f.den.is_constant():
        return m
    n = valence_jensen(f.den, r, r0, count, seed, allow_untrusted)
    return Estimate(m.value + n.value, math.hypot(m.stderr, n.stderr), m.count, m.rejected + n.rejected)


# ---------------------------------------------------------------------------
# grids and profiles


@dataclass(frozen=True)
class RadiusGrid:
    """Geometric grid ``r_k = r0 * q**k`` for ``k = 0..K``."""

    r0: float
    q: float
    K: int

    def __post_init__(self):
        if not self.r0 > 1.0:
            raise ValueError(f"grid radii must exceed 1 (r0={self.r0})")
        if not self.q > 1.0:
            raise ValueError(f"grid ratio must exceed 1 (q={self.q})")
        if self.K < 0:
            raise ValueError("K must be >= 0")

    @classmethod
    def from_range(cls, r_min: float, r_max: float, K: int) -> "RadiusGrid":
        if K < 1 or r_max <= r_min:
            raise ValueError("need K >= 1 and r_max > r_min")
        return cls(r_min, (r_max / r_min) ** (1.0 / K), K)

    @property
    def radii(self) -> np.ndarray:
        return self.r0 * self.q ** np.arange(self.K + 1)

    @property
    def log_length(self) -> float:
        return self.K * math.log(self.q)

    def __len__(self) -> int:
        return self.K + 1


def derived_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for sub-task ``keys`` of a run seeded by ``seed``."""
    return int(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(1)[0])


@dataclass(frozen=True)
class GrowthProfile:
    """Growth quantities of one function at one radius."""

    r: float
    log_max_term: float
    central_index: int
    log_M_sphere: float
    log_M_torus: float
    proximity: float
    proximity_stderr: float
    valence: float
    trusted: bool
    seed: int

    CSV_COLUMNS = ("r", "log_max_term", "central_index", "log_M_sphere", "log_M_torus",
                   "proximity", "proximity_stderr", "valence", "trusted", "seed")

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_COLUMNS}


def profile_at(f: PowerSeries, r: float, samples: int, restarts: int, seed: int,
               r0: float = DEFAULT_R0) -> GrowthProfile:
    norms = f.norms
    trusted = is_trusted(f, r) and is_trusted(f, r, sphere=True)
    nan = math.nan
    if f.is_zero:
        raise ValueError("growth profile of the zero series is undefined")
    lmu, nu = norms.max_term(r), norms.central_index(r)
    if not trusted:
        return GrowthProfile(r, lmu, nu, nan, nan, nan, nan, nan, False, seed)
    ms, _ = max_modulus_sphere(f, r, restarts, seed)
    mt, _ = max_modulus_torus(f, r, restarts, seed)
    prox = proximity(f, r, samples, seed)
    val = nan
    if r > r0 and is_trusted(f, r0, sphere=True):
        val = valence_jensen(f, r, r0, samples, seed).value
    return GrowthProfile(r, lmu, nu, ms, mt, prox.value, prox.stderr, val, True, seed)


def growth_profile(f: PowerSeries, grid: Union[RadiusGrid, Sequence[float]], samples: int = 4000,
                   restarts: int = DEFAULT_RESTARTS, seed: int = 0, r0: float = DEFAULT_R0,
                   jobs: int = 1) -> List[GrowthProfile]:
    radii = grid.radii if isinstance(grid, RadiusGrid) else np.asarray(grid, dtype=float)
    tasks = [(float(r), derived_seed(seed, k)) for k, r in enumerate(radii)]
    run = lambda t: profile_at(f, t[0], samples, restarts, t[1], r0)  # noqa: E731
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(run, tasks))
    return [run(t) for t in tasks]


def norms_profile(f: PowerSeries, radii: Sequence[float], seed: int = 0) -> List[GrowthProfile]:
    """Cheap profile carrying only the coefficient-based quantities."""
    out = []
    nan = math.nan
    for r in radii:
        r = float(r)
        out.append(GrowthProfile(r, f.norms.max_term(r), f.norms.central_index(r), nan, nan, nan, nan,
                                 nan, is_trusted(f, r), seed))
    return out


# ---------------------------------------------------------------------------
# order estimators

SOURCES = ("max_term", "central_index", "max_modulus")


def _logplus(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 1.0, np.log(np.where(x > 1.0, x, 1.0)), 0.0)


def _growth_variable(profiles: Sequence[GrowthProfile], source: str, extra_logs: int):
    ps = sorted((p for p in profiles if p.trusted), key=lambda p: p.r)
    if len(ps) < MIN_TRUSTED:
        raise ValueError(f"need at least {MIN_TRUSTED} trusted radii, got {len(ps)}")
    r = np.array([p.r for p in ps])
    if source == "max_term":
        y = _logplus(np.maximum(np.array([p.log_max_term for p in ps]), 0.0))
    elif source == "central_index":
        y = _logplus(np.array([float(p.central_index) for p in ps]))
    elif source == "max_modulus":
        y = _logplus(np.maximum(np.array([p.log_M_sphere for p in ps]), 0.0))
    else:
        raise ValueError(f"unknown source {source!r}; choose from {SOURCES}")
    for _ in range(extra_logs):
        y = _logplus(y)
    return np.log(r), y


def window_slopes(x: np.ndarray, y: np.ndarray, window: int = WINDOW, trailing: bool = True) -> np.ndarray:
    """Least-squares slopes over consecutive windows (of the trailing half by default)."""
    start = len(x) // 2 if trailing else 0
    xs, ys = x[start:], y[start:]
    if len(xs) < window:
        xs, ys = x[-window:], y[-window:]
    out = []
    for i in range(len(xs) - window + 1):
        out.append(np.polyfit(xs[i:i + window], ys[i:i + window], 1)[0])
    return np.array(out)


def order_slopes(profiles: Sequence[GrowthProfile], source: str = "central_index", extra_logs: int = 0,
                 trailing: bool = True):
    x, y = _growth_variable(profiles, source, extra_logs)
    return window_slopes(x, y, trailing=trailing)


def order_estimate(profiles: Sequence[GrowthProfile], source: str = "central_index") -> float:
    """Windowed-maximum slope estimate of the order."""
    return float(order_slopes(profiles, source).max())


def hyper_order_estimate(profiles: Sequence[GrowthProfile], source: str = "central_index") -> float:
    """Windowed-maximum slope estimate of the hyper-order."""
    return float(order_slopes(profiles, source, extra_logs=1).max())


def is_diverging(slopes: np.ndarray, min_rise: float = 0.5, min_ratio: float = 1.25) -> bool:
    """Whether window slopes trend upward without settling: the infinite-order signature.

    The trend is the least-squares line through the slopes in window order;
    it must rise by ``min_rise`` over the sequence and end at least
    ``min_ratio`` times where it starts.
    """
    slopes = np.asarray(slopes, dtype=float)
    if len(slopes) < 3:
        return False
    k = np.arange(len(slopes))
    a, b = np.polyfit(k, slopes, 1)
    first, last = b, b + a * k[-1]
    return bool(last - first >= min_rise and last >= min_ratio * max(first, 1e-12))


def diverging_order(profiles: Sequence[GrowthProfile], source: str = "central_index",
                    min_ratio: float = 1.25) -> bool:
    return is_diverging(order_slopes(profiles, source, trailing=False), min_ratio=min_ratio)
