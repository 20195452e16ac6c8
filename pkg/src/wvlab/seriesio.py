"""Plain-text coefficient files.

Format::

    # comment
    dim 2 degree 40
    0 0  1.0  0.0
    1 0  0x1.0000000000000p-1500  0.0

One term per line: the exponent vector, then real and imaginary parts.  A
trailing ``exact`` token on the header marks a polynomial (absent terms are
true zeros).  Values inside the double range are written with ``repr``;
values outside it use hexadecimal floats whose binary exponent may exceed
the double range, so writing then reading is bit-exact for every series.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np

from . import _ext
from .series import PowerSeries, as_multi_index


_MIN_NORMAL = 2.2250738585072014e-308


class SeriesFormatError(ValueError):
    pass


def _format_component(x: float, exp2: int) -> str:
    if x == 0.0:
        return "0.0"
    v = math.ldexp(x, exp2) if exp2 < 1024 else math.inf
    if math.isfinite(v) and abs(v) >= _MIN_NORMAL and math.ldexp(v, -exp2) == x:
        return repr(v)
    frac, e = math.frexp(x)
    head, _, _ = (frac * 2).hex().partition("p")
    return f"{head}p{e - 1 + exp2}"


def _parse_component(tok: str) -> Tuple[float, int]:
    """Parse one real number into an unnormalised ``(value, exp2)`` pair."""
    t = tok.strip()
    body = t.lstrip("+-").lower()
    if body.startswith("0x"):
        head, sep, exp = t.lower().partition("p")
        e = int(exp) if sep else 0
        try:
            x = float.fromhex(head + "p0")
        except ValueError as exc:
            raise SeriesFormatError(f"bad hex float {tok!r}") from exc
        return x, e
    try:
        v = float(t)
    except ValueError as exc:
        raise SeriesFormatError(f"bad number {tok!r}") from exc
    if math.isnan(v):
        raise SeriesFormatError(f"NaN coefficient {tok!r}")
    if v != 0.0 and math.isfinite(v) and abs(v) >= _MIN_NORMAL:
        return v, 0
    fr = Fraction(t)
    if fr == 0:
        return 0.0, 0
    e = fr.numerator.bit_length() - fr.denominator.bit_length()
    scaled = fr / (Fraction(2) ** e) if e >= 0 else fr * (Fraction(2) ** (-e))
    return float(scaled), e


def _combine(re: Tuple[float, int], im: Tuple[float, int]) -> Tuple[complex, int]:
    (xr, er), (xi, ei) = re, im
    if xr == 0.0:
        er = ei
    if xi == 0.0:
        ei = er
    e = max(er, ei)
    return complex(math.ldexp(xr, er - e), math.ldexp(xi, ei - e)), e


def write_series(s: PowerSeries, target) -> None:
    lines = [f"dim {s.dimension} degree {s.truncation_degree}" + (" exact" if s.exact else "")]
    for al, m, e in zip(s.alphas, s.mant, s.exp2):
        idx = " ".join(str(int(a)) for a in al)
        lines.append(f"{idx}  {_format_component(m.real, int(e))}  {_format_component(m.imag, int(e))}")
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, newline="\n")


def parse_series_lines(lines: Iterable[str]) -> PowerSeries:
    header = None
    alphas: List[Tuple[int, ...]] = []
    mants, exps = [], []
    seen = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if header is None:
            if len(toks) not in (4, 5) or toks[0] != "dim" or toks[2] != "degree" or (
                    len(toks) == 5 and toks[4] != "exact"):
                raise SeriesFormatError(f"line {lineno}: expected header 'dim m degree D [exact]'")
            header = (int(toks[1]), int(toks[3]), len(toks) == 5)
            continue
        m = header[0]
        if len(toks) != m + 2:
            raise SeriesFormatError(f"line {lineno}: expected {m} exponents and two parts")
        alpha = as_multi_index((int(t) for t in toks[:m]), m)
        if sum(alpha) > header[1]:
            raise SeriesFormatError(f"line {lineno}: degree {sum(alpha)} exceeds header degree")
        if alpha in seen:
            raise SeriesFormatError(f"line {lineno}: duplicate multi-index {alpha}")
        seen.add(alpha)
        v, e = _combine(_parse_component(toks[m]), _parse_component(toks[m + 1]))
        alphas.append(alpha)
        mants.append(v)
        exps.append(e)
    if header is None:
        raise SeriesFormatError("missing header line")
    m, D, exact = header
    mant, exp2 = _ext.normalize(np.array(mants, dtype=np.complex128), np.array(exps, dtype=np.int64))
    return PowerSeries.from_terms(m, np.array(alphas, dtype=np.int64).reshape(-1, m), mant, exp2, D, exact)


def read_series(source) -> PowerSeries:
    if hasattr(source, "read"):
        return parse_series_lines(source.read().splitlines())
    return parse_series_lines(Path(source).read_text().splitlines())
