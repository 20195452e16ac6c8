"""Inequality reports, verdicts and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

EXCEPTIONAL_BUDGET = 0.2


def fmt(x) -> str:
    """Locale-free, round-trippable text for one CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (tuple, list)):
        return " ".join(fmt(v) for v in x)
    return str(x)


def csv_text(columns: Sequence[str], rows: Iterable[Dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Dict]) -> None:
    Path(path).write_text(csv_text(columns, rows), newline="\n")


def log_measure(radii: Sequence[float], violating: Sequence[bool]) -> float:
    """Sum of ``log(r_{k+1}/r_k)`` over intervals whose left endpoint violates."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(violating, dtype=bool)
    if len(r) < 2:
        return 0.0
    order = np.argsort(r)
    r, v = r[order], v[order]
    return float(np.sum(np.log(r[1:] / r[:-1])[v[:-1]]))


@dataclass(frozen=True)
class InequalityRecord:
    r: float
    lhs_log: float
    rhs_log: float
    margin: float
    satisfied: bool


@dataclass
class InequalityReport:
    """Per-radius outcome of checking one inequality over a grid.

    ``kind`` selects the verdict rule: ``strict`` (every checked radius must
    pass), ``threshold`` (all radii above a threshold ``R*`` must pass) or
    ``exceptional`` (failures allowed on a set of small logarithmic measure).
    """

    theorem: str
    kind: str
    records: List[InequalityRecord] = field(default_factory=list)
    empirical_B: float = math.nan
    seed: int = 0
    params: Dict = field(default_factory=dict)
    skipped: List[float] = field(default_factory=list)
    grid_log_length: float = 0.0
    notes: List[str] = field(default_factory=list)

    CSV_COLUMNS = ("theorem", "r", "lhs_log", "rhs_log", "margin", "satisfied", "empirical_B", "seed")

    @property
    def radii(self) -> List[float]:
        return [rec.r for rec in self.records]

    @property
    def violating_radii(self) -> List[float]:
        return [rec.r for rec in self.records if not rec.satisfied]

    @property
    def violation_log_measure(self) -> float:
        return log_measure(self.radii, [not rec.satisfied for rec in self.records])

    @property
    def threshold(self) -> Optional[float]:
        """Smallest checked radius above which every check passes."""
        if not self.records:
            return None
        out = None
        for rec in reversed(sorted(self.records, key=lambda x: x.r)):
            if not rec.satisfied:
                break
            out = rec.r
        return out

    def exceptional_fraction(self) -> float:
        total = self.grid_log_length
        if total <= 0 and len(self.records) > 1:
            total = math.log(max(self.radii) / min(self.radii))
        return self.violation_log_measure / total if total > 0 else 0.0

    def verdict(self) -> str:
        if not self.records:
            return "SKIPPED(untrusted radii)" if self.skipped else "SKIPPED(no radii)"
        bad = self.violating_radii
        if self.kind == "strict":
            return "FAIL" if bad else "PASS"
        if self.kind == "threshold":
            if self.threshold is None:
                return "FAIL"
            return "PASS" if not bad else f"PASS(above R*={self.threshold:.6g})"
        if not bad:
            return "PASS"
        measure = self.violation_log_measure
        if self.exceptional_fraction() < EXCEPTIONAL_BUDGET:
            return f"PASS-with-exceptional-set({measure:.6g})"
        return "FAIL"

    @property
    def failed(self) -> bool:
        return self.verdict() == "FAIL"

    def rows(self):
        for rec in self.records:
            yield {"theorem": self.theorem, "r": rec.r, "lhs_log": rec.lhs_log, "rhs_log": rec.rhs_log,
                   "margin": rec.margin, "satisfied": rec.satisfied, "empirical_B": self.empirical_B,
                   "seed": self.seed}

    def to_csv(self) -> str:
        return csv_text(self.CSV_COLUMNS, self.rows())

    def summary_line(self) -> str:
        extra = f" skipped={len(self.skipped)}" if self.skipped else ""
        return f"{self.theorem}: {self.verdict()} ({len(self.records)} radii checked{extra})"


def record(r: float, lhs_log: float, rhs_log: float, slack: float = 0.0) -> InequalityRecord:
    """Record for ``lhs <= rhs`` in log space with an additive tolerance."""
    if math.isinf(lhs_log) and lhs_log < 0:
        margin = math.inf
    else:
        margin = rhs_log - lhs_log
    return InequalityRecord(float(r), float(lhs_log), float(rhs_log), float(margin), bool(margin >= -slack))
