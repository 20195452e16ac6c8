"""Built-in function families and truncation-degree selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Tuple

import numpy as np

from .pde import PdeInstance, solve_first_order
from .series import PowerSeries, exp_series, is_trusted, make_exp_of_linear, make_polynomial

DEFAULT_TERM_BUDGET = 400_000
MAX_AUTO_DEGREE = 4096
MIN_DEGREE = 4


class FamilyError(ValueError):
    """Unknown family or malformed family parameters."""


def parse_complex(v) -> complex:
    """A number, or a ``[re, im]`` pair."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise FamilyError(f"complex values are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FamilyError(f"expected a number, got {v!r}")
    return complex(v)


def parse_terms(dimension: int, terms) -> PowerSeries:
    """Polynomial from ``[[multi_index, coefficient], ...]``."""
    if not isinstance(terms, list):
        raise FamilyError("terms must be a list of [multi_index, coefficient] pairs")
    out = []
    for t in terms:
        if not (isinstance(t, (list, tuple)) and len(t) == 2 and isinstance(t[0], (list, tuple))):
            raise FamilyError(f"bad term {t!r}")
        if len(t[0]) != dimension:
            raise FamilyError(f"multi-index {t[0]!r} does not have {dimension} entries")
        out.append((tuple(int(a) for a in t[0]), parse_complex(t[1])))
    try:
        return make_polynomial(dimension, out)
    except ValueError as exc:
        raise FamilyError(str(exc)) from exc


def _dimension(params: Mapping) -> int:
    m = params.get("dimension")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise FamilyError(f"dimension must be a positive integer, got {m!r}")
    return m


def _linear(params: Mapping) -> List[complex]:
    a = params.get("a")
    if not isinstance(a, list) or not a:
        raise FamilyError("'a' must be a non-empty list of coefficients")
    return [parse_complex(v) for v in a]


def _polynomial(params: Mapping, D: int) -> PowerSeries:
    return parse_terms(_dimension(params), params.get("terms"))


def _exp_linear(params: Mapping, D: int) -> PowerSeries:
    return make_exp_of_linear(_linear(params), D)


def _exp_poly(params: Mapping, D: int) -> PowerSeries:
    return exp_series(parse_terms(_dimension(params), params.get("terms")), D)


def _exp_exp_linear(params: Mapping, D: int) -> PowerSeries:
    return exp_series(make_exp_of_linear(_linear(params), D), D)


def pde_instance(params: Mapping, D: int) -> PdeInstance:
    m = _dimension(params)
    P = parse_terms(m, params.get("P"))
    Q = parse_terms(m, params["Q"]) if params.get("Q") else PowerSeries.zero(m)
    f0 = parse_terms(m, params["f0"]) if params.get("f0") else None
    I = (1,) + (0,) * (m - 1)
    try:
        return PdeInstance(m, I, P, Q, D, f0)
    except ValueError as exc:
        raise FamilyError(str(exc)) from exc


def _pde_solution(params: Mapping, D: int) -> PowerSeries:
    return solve_first_order(pde_instance(params, D))


@dataclass(frozen=True)
class Family:
    name: str
    description: str
    schema: Tuple[Tuple[str, str], ...]
    builder: Callable[[Mapping, int], PowerSeries]
    exact: bool = False

    def build(self, params: Mapping, D: int) -> PowerSeries:
        unknown = set(params) - {k for k, _ in self.schema}
        if unknown:
            raise FamilyError(f"family {self.name!r} has no parameter(s) {sorted(unknown)}")
        return self.builder(params, D)

    def describe(self) -> str:
        lines = [f"{self.name}: {self.description}"]
        lines += [f"    {k}: {v}" for k, v in self.schema]
        return "\n".join(lines)


_TERMS = "list of [multi_index, coefficient]; coefficients are numbers or [re, im]"

FAMILIES: Dict[str, Family] = {f.name: f for f in (
    Family("polynomial", "exact polynomial sum c_alpha z^alpha",
           (("dimension", "int m >= 1"), ("terms", _TERMS)), _polynomial, exact=True),
    Family("exp_linear", "exp(a_1 z_1 + ... + a_m z_m)",
           (("a", "list of m coefficients"),), _exp_linear),
    Family("exp_poly", "exp(P(z)) for a polynomial P",
           (("dimension", "int m >= 1"), ("terms", _TERMS + " (terms of P)")), _exp_poly),
    Family("exp_exp_linear", "exp(exp(a_1 z_1 + ... + a_m z_m))",
           (("a", "list of m coefficients"),), _exp_exp_linear),
    Family("pde_solution", "solution of d_1 f - e^P f = Q with f(0, z') = f0(z')",
           (("dimension", "int m >= 1"), ("P", _TERMS + " (non-constant)"),
            ("Q", _TERMS + " (optional, default 0)"), ("f0", _TERMS + " in z_2..z_m (optional, default 1)")),
           _pde_solution),
)}


def list_families() -> List[Family]:
    return [FAMILIES[k] for k in sorted(FAMILIES)]


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise FamilyError(f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}") from None


# ---------------------------------------------------------------------------
# truncation selection


@dataclass(frozen=True)
class TrustNeeds:
    """Radii at which a series must be trusted: polydisc and sphere."""

    polydisc: Tuple[float, ...] = ()
    sphere: Tuple[float, ...] = ()

    def untrusted(self, f: PowerSeries) -> List[Tuple[str, float]]:
        bad = [("polydisc", r) for r in self.polydisc if not is_trusted(f, r)]
        bad += [("sphere", r) for r in self.sphere if not is_trusted(f, r, sphere=True)]
        return bad

    def merged(self, other: "TrustNeeds") -> "TrustNeeds":
        return TrustNeeds(tuple(sorted(set(self.polydisc) | set(other.polydisc))),
                          tuple(sorted(set(self.sphere) | set(other.sphere))))


def auto_truncation(build: Callable[[int], PowerSeries], needs: TrustNeeds,
                    term_budget: int = DEFAULT_TERM_BUDGET, max_degree: int = MAX_AUTO_DEGREE,
                    start: int = 16) -> Tuple[PowerSeries, int]:
    """Smallest tried ``D`` whose series is trusted at every needed radius.

    ``D`` doubles from ``start`` and is then bisected down.  Doubling stops
    when the next series would exceed the term budget or ``max_degree``; the
    largest series built is then returned and its untrusted radii are for
    the caller to report.
    """
    D = max(start, MIN_DEGREE)
    f = build(D)
    if f.exact or not needs.untrusted(f):
        return f, f.truncation_degree
    while True:
        used = max(1, int(np.count_nonzero(f.alphas.any(axis=0))))
        if 2 * D > max_degree or f.n_terms * 2 ** used > term_budget:
            return f, D
        lo, D = D, 2 * D
        f = build(D)
        if not needs.untrusted(f):
            break
    hi = D
    while hi - lo > 1:
        mid = (lo + hi) // 2
        g = build(mid)
        if needs.untrusted(g):
            lo = mid
        else:
            hi, f = mid, g
    return f, hi
