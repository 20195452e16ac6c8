"""Command-line driver: growth profiles, theorem checks and PDE instances.

Exit codes: 0 no failures, 1 at least one FAIL, 2 configuration error,
3 grid radii untrusted at the truncation degree, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .families import FamilyError, TrustNeeds, auto_truncation, get_family, list_families, pde_instance
from .growth import GrowthProfile, RadiusGrid, growth_profile
from .logderiv import (InfiniteOrderError, VanishingDenominatorError, verify_corollary21, verify_lemma24,
                       verify_logderiv_identities, verify_theorem21)
from .pde import PdeInstance, PreconditionError, ball_points, read_instance, solve_first_order, verify_t41
from .reports import csv_text, write_csv
from .series import PowerSeries, UntrustedRadiusError
from .seriesio import SeriesFormatError, read_series, write_series
from .wiman_valiron import verify_t31, verify_t32, verify_t33, verify_t34

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNTRUSTED, EXIT_NUMERIC = 0, 1, 2, 3, 4

THEOREMS = ("T21", "C21", "L24", "T31", "T32", "T33", "T34", "IDS", "T41")
TOP_LEVEL = {"family", "file", "dimension", "truncation", "grid", "samples", "restarts", "seed", "jobs",
             "theorems", "theorem_params", "output", "term_budget", "allow_partial", "pde"}


class ConfigError(ValueError):
    pass


class UntrustedGridError(RuntimeError):
    def __init__(self, radii: Sequence[float], D: int):
        super().__init__(f"{len(radii)} grid radii untrusted at D={D}")
        self.radii = list(radii)
        self.D = D


@dataclass
class ExperimentConfig:
    seed: int
    grid: RadiusGrid
    family: Optional[Dict] = None
    file: Optional[str] = None
    dimension: Optional[int] = None
    truncation: object = "auto"
    samples: int = 4000
    restarts: int = 16
    jobs: int = 1
    theorems: List[str] = field(default_factory=list)
    theorem_params: Dict[str, Dict] = field(default_factory=dict)
    output: str = "out"
    term_budget: int = 400_000
    allow_partial: bool = False
    pde: Optional[Dict] = None

    @property
    def radii(self) -> np.ndarray:
        return self.grid.radii

    def params(self, theorem: str) -> Dict:
        return dict(self.theorem_params.get(theorem, {}))


def _int(doc: Dict, key: str, default=None, minimum: int = 0) -> int:
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def _grid(doc) -> RadiusGrid:
    if not isinstance(doc, dict):
        raise ConfigError("grid must be an object with r0, q, K (or r_min, r_max, K)")
    try:
        if "r0" in doc:
            return RadiusGrid(float(doc["r0"]), float(doc["q"]), int(doc["K"]))
        return RadiusGrid.from_range(float(doc["r_min"]), float(doc["r_max"]), int(doc["K"]))
    except KeyError as exc:
        raise ConfigError(f"grid is missing {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from None


def parse_config(doc: Dict, overrides: Optional[Dict] = None) -> ExperimentConfig:
    """Validate a configuration document; ``overrides`` replace top-level scalars."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    doc = dict(doc)
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    unknown = set(doc) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    if "seed" not in doc:
        raise ConfigError("seed is required")
    if "grid" not in doc:
        raise ConfigError("grid is required")
    cfg = ExperimentConfig(seed=_int(doc, "seed"), grid=_grid(doc["grid"]))
    fam = doc.get("family")
    if fam is not None:
        if not isinstance(fam, dict) or "name" not in fam:
            raise ConfigError("family must be an object with a name")
        extra = set(fam) - {"name", "params"}
        if extra:
            raise ConfigError(f"unknown family keys {sorted(extra)}")
        try:
            get_family(fam["name"])
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
        cfg.family = {"name": fam["name"], "params": dict(fam.get("params", {}))}
    cfg.file = doc.get("file")
    cfg.pde = doc.get("pde")
    if "dimension" in doc:
        cfg.dimension = _int(doc, "dimension", minimum=1)
    D = doc.get("truncation", "auto")
    if D != "auto":
        D = _int(doc, "truncation", minimum=4)
    cfg.truncation = D
    cfg.samples = _int(doc, "samples", 4000, 1)
    cfg.restarts = _int(doc, "restarts", 16, 1)
    cfg.jobs = _int(doc, "jobs", 1, 1)
    cfg.term_budget = _int(doc, "term_budget", 400_000, 1)
    cfg.allow_partial = bool(doc.get("allow_partial", False))
    cfg.output = str(doc.get("output", "out"))
    th = doc.get("theorems", [])
    if not isinstance(th, list) or any(t not in THEOREMS for t in th):
        raise ConfigError(f"theorems must be a list drawn from {list(THEOREMS)}, got {th!r}")
    cfg.theorems = list(th)
    tp = doc.get("theorem_params", {})
    if not isinstance(tp, dict) or any(k not in THEOREMS for k in tp):
        raise ConfigError("theorem_params keys must be theorem ids")
    cfg.theorem_params = tp
    return cfg


def load_config(path, overrides: Optional[Dict] = None) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(doc, overrides)


# ---------------------------------------------------------------------------
# trust needs per theorem


def _unit(m: int, j: int = 0) -> List[int]:
    return [1 if i == j else 0 for i in range(m)]


def theorem_needs(cfg: ExperimentConfig, theorem: str, m: int) -> TrustNeeds:
    r = [float(x) for x in cfg.radii]
    p = cfg.params(theorem)
    sm = math.sqrt(m)
    if theorem in ("T31", "T34"):
        return TrustNeeds((), tuple(sm * x for x in r))
    if theorem == "T32":
        return TrustNeeds(tuple(2 * x for x in r), ())
    if theorem == "T21":
        a = float(p.get("alpha", 1.5))
        return TrustNeeds((), tuple(a * a * x for x in r))
    if theorem == "L24":
        a = float(p.get("alpha", 1.5))
        return TrustNeeds((), tuple(a * x for x in r))
    if theorem == "IDS":
        return TrustNeeds((), (float(p.get("radius", 1.0)),))
    return TrustNeeds()


def base_needs(cfg: ExperimentConfig) -> TrustNeeds:
    r = tuple(float(x) for x in cfg.radii)
    return TrustNeeds(r, r)


def build_function(cfg: ExperimentConfig, extra: TrustNeeds = TrustNeeds()) -> PowerSeries:
    if cfg.file is not None:
        try:
            f = read_series(cfg.file)
        except (OSError, SeriesFormatError) as exc:
            raise ConfigError(f"cannot load coefficient file: {exc}") from None
    elif cfg.family is not None:
        fam = get_family(cfg.family["name"])
        params = cfg.family["params"]
        build = lambda D: fam.build(params, D)  # noqa: E731
        try:
            if cfg.truncation == "auto":
                f, _ = auto_truncation(build, base_needs(cfg).merged(extra), cfg.term_budget)
            else:
                f = build(cfg.truncation)
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("configuration needs a family or a coefficient file")
    if cfg.dimension is not None and cfg.dimension != f.dimension:
        raise ConfigError(f"dimension {cfg.dimension} does not match the function's {f.dimension}")
    return f


def untrusted_grid_radii(cfg: ExperimentConfig, f: PowerSeries) -> List[float]:
    return sorted({r for _, r in base_needs(cfg).untrusted(f)})


# ---------------------------------------------------------------------------
# running


def _run_theorem(theorem: str, cfg: ExperimentConfig, f: PowerSeries, radii: np.ndarray):
    p = cfg.params(theorem)
    m = f.dimension
    seed = cfg.seed
    if theorem == "T31":
        return verify_t31(f, radii, cfg.restarts, seed)
    if theorem == "T32":
        return verify_t32(f, radii, cfg.restarts, seed)
    if theorem == "T33":
        return verify_t33(f, radii, cfg.restarts, seed)
    if theorem == "T34":
        return verify_t34(f, p.get("I", _unit(m)), p.get("a", [1] * m), radii, float(p.get("delta", 0.1)),
                          cfg.restarts, seed, float(p.get("eta_threshold", 0.1)))
    if theorem == "T21":
        return verify_theorem21(f, p.get("I", [0] * m), p.get("I_n", _unit(m)), float(p.get("alpha", 1.5)),
                                radii, int(p.get("points", 200)), seed, cfg.samples)
    if theorem == "C21":
        return verify_corollary21(f, p.get("I", [0] * m), p.get("I_n", _unit(m)), float(p.get("eps", 0.5)),
                                  radii, int(p.get("points", 200)), seed)
    if theorem == "L24":
        a = p.get("a", 0)
        a = math.inf if a in ("inf", "infinity") else float(a)
        return verify_lemma24(f, p.get("I", [0] * m), a, float(p.get("alpha", 1.5)), radii, seed, cfg.samples)
    if theorem == "IDS":
        pts = ball_points(m, int(p.get("points", 100)), float(p.get("radius", 1.0)), seed)
        return verify_logderiv_identities(f, pts, float(p.get("tolerance", 1e-8)), p.get("I"))
    if theorem == "T41":
        if cfg.family is None or cfg.family["name"] != "pde_solution":
            raise ConfigError("T41 needs the pde_solution family (or the pde subcommand)")
        inst = pde_instance(cfg.family["params"], f.truncation_degree)
        return verify_t41(inst, f, radii, float(p.get("tolerance", 0.3)), seed)
    raise ConfigError(f"unknown theorem {theorem!r}")


@dataclass
class Outcome:
    lines: List[str]
    failed: bool


def _summary_header(cfg: ExperimentConfig, f: PowerSeries) -> List[str]:
    src = cfg.family["name"] if cfg.family else f"file {cfg.file}"
    return [f"function: {src} (m={f.dimension}, D={f.truncation_degree}{', exact' if f.exact else ''})",
            f"grid: r0={cfg.grid.r0!r} q={cfg.grid.q!r} K={cfg.grid.K}",
            f"seed: {cfg.seed}"]


def _write_summary(out: Path, lines: List[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", newline="\n")


def _prepare(cfg: ExperimentConfig, theorems: Sequence[str]):
    f = build_function(cfg)
    extra = TrustNeeds()
    for t in theorems:
        extra = extra.merged(theorem_needs(cfg, t, f.dimension))
    if extra != TrustNeeds() and cfg.truncation == "auto" and cfg.family is not None:
        f = build_function(cfg, extra)
    bad = untrusted_grid_radii(cfg, f)
    radii = np.array([r for r in cfg.radii if float(r) not in set(bad)])
    if bad and not cfg.allow_partial:
        raise UntrustedGridError(bad, f.truncation_degree)
    return f, radii, bad


def run_profile(cfg: ExperimentConfig) -> Outcome:
    out = Path(cfg.output)
    f, radii, bad = _prepare(cfg, [])
    prof = growth_profile(f, radii, cfg.samples, cfg.restarts, cfg.seed, jobs=cfg.jobs)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "growth_profile.csv", GrowthProfile.CSV_COLUMNS, (p.as_row() for p in prof))
    lines = _summary_header(cfg, f) + [f"profile: {len(prof)} radii"]
    if bad:
        lines.append("skipped untrusted radii: " + " ".join(repr(r) for r in bad))
    _write_summary(out, lines)
    return Outcome(lines, False)


def run_verify(cfg: ExperimentConfig) -> Outcome:
    out = Path(cfg.output)
    f, radii, bad = _prepare(cfg, cfg.theorems)
    out.mkdir(parents=True, exist_ok=True)
    prof = growth_profile(f, radii, cfg.samples, cfg.restarts, cfg.seed, jobs=cfg.jobs)
    write_csv(out / "growth_profile.csv", GrowthProfile.CSV_COLUMNS, (p.as_row() for p in prof))
    lines = _summary_header(cfg, f)
    if bad:
        lines.append("skipped untrusted radii: " + " ".join(repr(r) for r in bad))
    failed = False
    for t in cfg.theorems:
        try:
            rep = _run_theorem(t, cfg, f, radii)
        except InfiniteOrderError as exc:
            lines.append(f"{t}: SKIPPED(infinite order) {exc}")
            continue
        except PreconditionError as exc:
            lines.append(f"{t}: FAIL(precondition) {exc}")
            failed = True
            continue
        (out / f"{t.lower()}_report.csv").write_text(rep.to_csv(), newline="\n")
        verdict = rep.verdict()
        failed |= verdict.startswith("FAIL")
        lines.append(rep.summary_line())
    lines.append(f"overall: {'FAIL' if failed else 'PASS'}")
    _write_summary(out, lines)
    return Outcome(lines, failed)


def _pde_from_config(cfg: ExperimentConfig) -> PdeInstance:
    pde_cfg = cfg.pde or {}
    if "instance" in pde_cfg:
        try:
            return read_instance(pde_cfg["instance"])
        except (OSError, SeriesFormatError, ValueError) as exc:
            raise ConfigError(f"cannot load PDE instance: {exc}") from None
    if cfg.family is not None and cfg.family["name"] == "pde_solution":
        D = cfg.truncation if cfg.truncation != "auto" else int(pde_cfg.get("D", 0)) or None
        if D is None:
            raise ConfigError("the pde subcommand needs an integer truncation")
        try:
            return pde_instance(cfg.family["params"], D)
        except FamilyError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError("the pde subcommand needs pde.instance or the pde_solution family")


def run_pde(cfg: ExperimentConfig) -> Outcome:
    out = Path(cfg.output)
    inst = _pde_from_config(cfg)
    f = solve_first_order(inst)
    out.mkdir(parents=True, exist_ok=True)
    write_series(f, out / "pde_solution.txt")
    p = cfg.params("T41")
    lines = [f"instance: m={inst.dimension} I={inst.I} deg P={inst.deg_P} D={inst.D}", f"seed: {cfg.seed}"]
    try:
        rep = verify_t41(inst, f, cfg.radii, float(p.get("tolerance", 0.3)), cfg.seed)
    except PreconditionError as exc:
        lines.append(f"T41: FAIL(precondition) {exc}")
        _write_summary(out, lines)
        return Outcome(lines, True)
    (out / "t41_report.csv").write_text(rep.to_csv(), newline="\n")
    lines.append(f"residual: {rep.residual!r}")
    lines.append(rep.summary_line())
    _write_summary(out, lines)
    return Outcome(lines, rep.verdict() != "PASS")


def print_families(stream=None) -> None:
    stream = stream or sys.stdout
    for fam in list_families():
        print(fam.describe(), file=stream)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wvlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("profile", "write growth_profile.csv"),
                       ("verify", "profile plus the selected theorem checks"),
                       ("run", "alias of verify"),
                       ("pde", "solve a PDE instance and check its hyper-order")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides 'output')")
        p.add_argument("--seed", type=int, help="overrides 'seed'")
        p.add_argument("--jobs", type=int, help="overrides 'jobs'")
    sub.add_parser("families", help="list built-in function families")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "families":
        print_families()
        return EXIT_OK
    out_dir = args.out
    try:
        cfg = load_config(args.config, {"output": args.out, "seed": args.seed, "jobs": args.jobs})
        out_dir = cfg.output
        runner = {"profile": run_profile, "verify": run_verify, "run": run_verify, "pde": run_pde}[args.command]
        outcome = runner(cfg)
    except (ConfigError, FamilyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UntrustedGridError as exc:
        lines = [f"untrusted grid at D={exc.D}; untrusted radii:"] + [repr(r) for r in exc.radii]
        if out_dir:
            _write_summary(Path(out_dir), lines)
        print("\n".join(lines), file=sys.stderr)
        return EXIT_UNTRUSTED
    except (FloatingPointError, VanishingDenominatorError, UntrustedRadiusError, ArithmeticError,
            ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print("\n".join(outcome.lines))
    return EXIT_FAIL if outcome.failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
