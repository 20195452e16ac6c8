"""Comparison inequalities between the maximum modulus, the maximum term and
the central index, and the Wiman-Valiron asymptotic for log-derivatives.

Maximum moduli come from multi-start search and are therefore lower
bounds.  Checks of the form ``M <= ...`` are conservative when they pass;
checks of the form ``... <= M`` are conservative when they fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .growth import GrowthProfile, RadiusGrid, derived_seed, order_estimate
from .logderiv import VanishingDenominatorError, logderiv_ratio
from .reports import EXCEPTIONAL_BUDGET, InequalityReport, csv_text, log_measure, record
from .sampling import DEFAULT_RESTARTS, max_modulus_sphere, max_modulus_torus
from .series import PowerSeries, UntrustedRadiusError, as_multi_index, is_trusted

DELTA = 0.1
ETA_THRESHOLD = 0.1
CHECK_SLACK = 1e-6
ORDER_AGREEMENT = 0.2


def _radii(grid) -> np.ndarray:
    return grid.radii if isinstance(grid, RadiusGrid) else np.asarray(grid, dtype=float)


def _log_length(grid) -> float:
    r = _radii(grid)
    return math.log(r[-1] / r[0]) if len(r) > 1 else 0.0


# ---------------------------------------------------------------------------
# comparison inequalities


def verify_t31(f: PowerSeries, grid, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> InequalityReport:
    """``log mu(r) <= m log M(sqrt(m) r)`` per radius, with a threshold ``R*``."""
    m = f.dimension
    rep = InequalityReport("T31", "threshold", seed=seed, grid_log_length=_log_length(grid),
                           params={"restarts": restarts})
    for k, r in enumerate(_radii(grid)):
        r = float(r)
        s = math.sqrt(m) * r
        if not (is_trusted(f, r) and is_trusted(f, s, sphere=True)):
            rep.skipped.append(r)
            continue
        logM, _ = max_modulus_sphere(f, s, restarts, derived_seed(seed, k))
        rep.records.append(record(r, f.norms.max_term(r), m * logM, CHECK_SLACK))
    rep.notes.append("M is a search lower bound: a failing record may be a search artefact")
    return rep


def verify_t32(f: PowerSeries, grid, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> InequalityReport:
    """``M(r) <= mu(r) (nu(R) + R/(R-r))`` with ``R = 2r``."""
    rep = InequalityReport("T32", "threshold", seed=seed, grid_log_length=_log_length(grid),
                           params={"restarts": restarts, "R_rule": "R=2r"})
    for k, r in enumerate(_radii(grid)):
        r = float(r)
        R = 2.0 * r
        if not (is_trusted(f, r) and is_trusted(f, R) and is_trusted(f, r, sphere=True)):
            rep.skipped.append(r)
            continue
        logM, _ = max_modulus_sphere(f, r, restarts, derived_seed(seed, k))
        rhs = f.norms.max_term(r) + math.log(f.norms.central_index(R) + R / (R - r))
        rep.records.append(record(r, logM, rhs, CHECK_SLACK))
    rep.notes.append("M is a search lower bound: passing records are conservative only up to search quality")
    return rep


@dataclass
class OrderAgreement:
    """Order estimates from the three growth sources."""

    estimates: Dict[str, float]
    profiles: List[GrowthProfile]

    @property
    def differences(self) -> Dict[Tuple[str, str], float]:
        return {(a, b): abs(self.estimates[a] - self.estimates[b])
                for a, b in combinations(sorted(self.estimates), 2)}

    @property
    def max_difference(self) -> float:
        return max(self.differences.values())

    def agrees(self, tol: float = ORDER_AGREEMENT) -> bool:
        return self.max_difference <= tol

    CSV_COLUMNS = ("source", "order_estimate")

    def to_csv(self) -> str:
        return csv_text(self.CSV_COLUMNS, ({"source": k, "order_estimate": v}
                                           for k, v in sorted(self.estimates.items())))

    def verdict(self) -> str:
        return "PASS" if self.agrees() else "FAIL"

    def summary_line(self) -> str:
        est = ", ".join(f"{k}={v:.4g}" for k, v in sorted(self.estimates.items()))
        return f"T33: {self.verdict()} ({est}; max pairwise difference {self.max_difference:.3g})"


def order_profile(f: PowerSeries, grid, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> List[GrowthProfile]:
    """Profiles carrying the three order sources and nothing else."""
    out = []
    nan = math.nan
    for k, r in enumerate(_radii(grid)):
        r = float(r)
        trusted = is_trusted(f, r) and is_trusted(f, r, sphere=True)
        logM = max_modulus_sphere(f, r, restarts, derived_seed(seed, k))[0] if trusted else nan
        out.append(GrowthProfile(r, f.norms.max_term(r), f.norms.central_index(r), logM, nan, nan, nan, nan,
                                 trusted, derived_seed(seed, k)))
    return out


def verify_t33(f: PowerSeries, grid, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> OrderAgreement:
    profiles = order_profile(f, grid, restarts, seed)
    est = {src: order_estimate(profiles, src) for src in ("max_modulus", "max_term", "central_index")}
    return OrderAgreement(est, profiles)


def torus_sphere_sandwich(f: PowerSeries, r: float, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> bool:
    """``max_torus(r) |f| <= M(sqrt(m) r)``, the torus lying on that sphere."""
    lt, _ = max_modulus_torus(f, r, restarts, seed)
    ls, _ = max_modulus_sphere(f, math.sqrt(f.dimension) * r, restarts, seed)
    return lt <= ls + CHECK_SLACK


# ---------------------------------------------------------------------------
# Wiman-Valiron ratio


@dataclass(frozen=True)
class WVRecord:
    """Outcome at one radius; ``eta`` is ``nan`` when the record is invalid."""

    r: float
    phases: Tuple[float, ...]
    condition_ok: bool
    eta: float
    log_f_at_zr: float
    log_M_sphere_sqrtm_r: float
    central_index: int
    delta: float
    valid: bool

    CSV_COLUMNS = ("r", "condition_ok", "eta", "log_f_at_zr", "log_M_sphere_sqrtm_r", "central_index",
                   "phases", "valid")

    @property
    def point(self) -> np.ndarray:
        return self.r * np.exp(1j * np.asarray(self.phases))

    def violates(self, eta_threshold: float = ETA_THRESHOLD) -> bool:
        return not (self.valid and self.condition_ok and self.eta <= eta_threshold)

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_COLUMNS}


def _linear_form(a, m: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    if len(a) != m:
        raise ValueError(f"linear form has {len(a)} coefficients, expected {m}")
    if not np.any(a):
        raise ValueError("the linear form is identically zero")
    if not np.all(a):
        raise ValueError("every coefficient of the linear form must be non-zero")
    return a


def wv_record(f: PowerSeries, I, a, r: float, delta: float = DELTA, restarts: int = DEFAULT_RESTARTS,
              seed: int = 0) -> WVRecord:
    m = f.dimension
    I = as_multi_index(I, m)
    a = _linear_form(a, m)
    s = math.sqrt(m) * r
    if not is_trusted(f, r):
        raise UntrustedRadiusError(f"torus radius {r:g} is not trusted at D={f.truncation_degree}")
    if not is_trusted(f, s, sphere=True):
        raise UntrustedRadiusError(f"sphere radius {s:g} is not trusted at D={f.truncation_degree}")
    log_t, zr = max_modulus_torus(f, r, restarts, seed)
    log_M, _ = max_modulus_sphere(f, s, restarts, seed)
    nu = f.norms.central_index(r)
    z = zr.point
    L = complex(np.dot(a, z))
    condition = nu >= 1 and log_t > log_M + (-0.25 + delta) * math.log(nu)
    valid = nu >= 1 and L != 0
    eta = math.nan
    if valid:
        try:
            unit, logq = logderiv_ratio(f, (0,) * m, I, z)
        except VanishingDenominatorError:
            valid = False
        else:
            k = sum(I)
            if unit == 0:
                eta = 1.0
            else:
                lv = logq + k * (math.log(abs(L)) - math.log(nu))
                ph = unit * (L / abs(L)) ** k
                eta = abs(ph * math.exp(lv) - 1.0)
    return WVRecord(float(r), zr.phases, bool(condition), eta, log_t, log_M, int(nu), delta, bool(valid))


def wv_ratio_check(f: PowerSeries, I, a, grid, delta: float = DELTA, restarts: int = DEFAULT_RESTARTS,
                   seed: int = 0) -> List[WVRecord]:
    """``eta(r) = |(d^I f / f)(z_r) (L(z_r)/nu(r))^{|I|} - 1|`` at torus maxima ``z_r``."""
    if not 0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    _linear_form(a, f.dimension)
    radii = np.sort(_radii(grid))
    return [wv_record(f, I, a, float(r), delta, restarts, derived_seed(seed, k)) for k, r in enumerate(radii)]


def exceptional_set_estimate(records: Union[Sequence[WVRecord], InequalityReport],
                             eta_threshold: float = ETA_THRESHOLD) -> float:
    """Logarithmic measure of grid intervals whose left endpoint violates."""
    if isinstance(records, InequalityReport):
        return records.violation_log_measure
    return log_measure([w.r for w in records], [w.violates(eta_threshold) for w in records])


@dataclass
class WVReport:
    """Decay summary of a Wiman-Valiron run."""

    records: List[WVRecord]
    I: Tuple[int, ...]
    eta_threshold: float = ETA_THRESHOLD
    seed: int = 0
    skipped: List[float] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def usable(self) -> List[WVRecord]:
        return [w for w in self.records if w.valid and w.condition_ok]

    def decile_etas(self) -> Tuple[float, float]:
        """Mean ``eta`` over the bottom and top radius deciles of usable records."""
        eta = np.array([w.eta for w in self.usable])
        if len(eta) == 0:
            return math.nan, math.nan
        n = max(1, math.ceil(len(eta) / 10))
        return float(np.mean(eta[:n])), float(np.mean(eta[-n:]))

    @property
    def fitted_C(self) -> float:
        """Smallest ``C`` with ``eta(r) <= C / r`` on usable records."""
        u = self.usable
        return max((w.eta * w.r for w in u), default=math.nan)

    @property
    def grid_log_length(self) -> float:
        r = [w.r for w in self.records]
        return math.log(max(r) / min(r)) if len(r) > 1 else 0.0

    @property
    def exceptional_measure(self) -> float:
        return exceptional_set_estimate(self.records, self.eta_threshold)

    @property
    def exceptional_fraction(self) -> float:
        L = self.grid_log_length
        return self.exceptional_measure / L if L > 0 else 0.0

    @property
    def decays(self) -> bool:
        bottom, top = self.decile_etas()
        return bool(top < self.eta_threshold and top < bottom)

    def verdict(self) -> str:
        if not self.records:
            return "SKIPPED(untrusted radii)"
        if not self.usable:
            return "FAIL"
        return "PASS" if self.decays and self.exceptional_fraction < EXCEPTIONAL_BUDGET else "FAIL"

    def to_csv(self) -> str:
        return csv_text(WVRecord.CSV_COLUMNS, (w.as_row() for w in self.records))

    def summary_line(self) -> str:
        bottom, top = self.decile_etas()
        return (f"T34: {self.verdict()} (I={self.I}, eta bottom decile {bottom:.3g}, top decile {top:.3g}, "
                f"C={self.fitted_C:.3g}, exceptional fraction {self.exceptional_fraction:.3g})")


def verify_t34(f: PowerSeries, I, a, grid, delta: float = DELTA, restarts: int = DEFAULT_RESTARTS,
               seed: int = 0, eta_threshold: float = ETA_THRESHOLD) -> WVReport:
    """Decay check over the grid radii whose torus and sphere radii are trusted."""
    m = f.dimension
    radii = np.sort(_radii(grid))
    ok = [bool(is_trusted(f, r) and is_trusted(f, math.sqrt(m) * r, sphere=True)) for r in radii]
    recs = wv_ratio_check(f, I, a, radii[ok], delta, restarts, seed) if any(ok) else []
    return WVReport(recs, as_multi_index(I, m), eta_threshold, seed,
                    skipped=[float(r) for r, k in zip(radii, ok) if not k])
