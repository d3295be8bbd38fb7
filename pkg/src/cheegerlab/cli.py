"""Batch command line driver.

Usage:
    cheegerlab --scenario problem.cfg [--stage solve] [--out DIR]
               [--seed N] [--threads N]

Scenarios are flat key = value files with [section] headers; '#' starts a
comment.  Sections and keys are documented in the README.  Each run writes
its artifacts (masks as PGM, tables as CSV) plus a manifest.json that
embeds the scenario text; passing a manifest as --scenario reruns it.

Exit codes: 0 ok, 2 configuration, 3 solver, 4 verification, 5 cantor,
6 input/output.  With several --scenario arguments the worst code wins and
--threads bounds the worker pool.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cantor import (
    CantorResolutionWarning,
    CantorSpec,
    boundary_gap_report,
    build_cantor_set,
    cantor_grid,
    self_cheeger_probe,
)
from .grid import (
    Anisotropy,
    CellSet,
    Grid,
    GridError,
    ScalarField,
    connected_components,
    make_annulus,
    make_disk,
    stencil_by_name,
)
from .gridio import (
    MaskIOError,
    load_field_text,
    load_mask_pgm,
    load_mask_text,
    save_mask_pgm,
    write_csv,
)
from .measures import MeasureError
from .solver import CheegerProblem, SolveOptions, SolverError, solve
from .verify import (
    VerifyError,
    check_lemma_relperimeter,
    relative_isoperimetric_constant,
    trace_constant,
    volume_growth_check,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4
EXIT_CANTOR = 5
EXIT_IO = 6

_STAGES = ("solve", "verify", "cantor", "oracle")
_CHECKS = ("trace", "isoperimetric", "lemma", "growth")


class ScenarioError(Exception):
    """Configuration problem; message carries file/line context."""


class VerificationFailed(Exception):
    pass


class CantorFailed(Exception):
    pass


def _parse_sections(text: str, name: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: dict[str, tuple[str, int]] | None = None
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if not section:
                raise ScenarioError(f"{name}:{num}: empty section header")
            current = sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"{name}:{num}: expected 'key = value' or '[section]'")
        if current is None:
            raise ScenarioError(f"{name}:{num}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ScenarioError(f"{name}:{num}: empty key")
        if key in current:
            raise ScenarioError(f"{name}:{num}: duplicate key {key!r}")
        current[key] = (value, num)
    return sections


_REQUIRED = object()


class _Section:
    """Typed accessors over one parsed section, with file:line diagnostics."""

    def __init__(self, scenario: "Scenario", name: str):
        self.scenario = scenario
        self.name = name
        self.data = scenario.sections.get(name, {})
        self.used: set[str] = set()

    def _fetch(self, key: str, default):
        if key in self.data:
            self.used.add(key)
            return self.data[key]
        if default is _REQUIRED:
            raise ScenarioError(
                f"{self.scenario.name}: [{self.name}] is missing required key {key!r}"
            )
        return None

    def _fail(self, key: str, line: int, expected: str, got: str):
        raise ScenarioError(
            f"{self.scenario.name}:{line}: [{self.name}] {key}: expected {expected}, got {got!r}"
        )

    def raw(self, key: str, default=_REQUIRED) -> str | None:
        item = self._fetch(key, default)
        return default if item is None else item[0]

    def string(self, key: str, default=_REQUIRED, choices=None) -> str:
        item = self._fetch(key, default)
        if item is None:
            value = default
        else:
            value = item[0]
            if choices and value not in choices:
                self._fail(key, item[1], f"one of {', '.join(choices)}", value)
        return value

    def real(self, key: str, default=_REQUIRED) -> float:
        item = self._fetch(key, default)
        if item is None:
            return default
        try:
            return float(item[0])
        except ValueError:
            self._fail(key, item[1], "a real number", item[0])

    def integer(self, key: str, default=_REQUIRED) -> int:
        item = self._fetch(key, default)
        if item is None:
            return default
        try:
            return int(item[0])
        except ValueError:
            self._fail(key, item[1], "an integer", item[0])

    def boolean(self, key: str, default=_REQUIRED) -> bool:
        item = self._fetch(key, default)
        if item is None:
            return default
        low = item[0].lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self._fail(key, item[1], "a boolean", item[0])

    def pair(self, key: str, default=_REQUIRED) -> tuple[float, float]:
        item = self._fetch(key, default)
        if item is None:
            return default
        parts = item[0].split()
        if len(parts) != 2:
            self._fail(key, item[1], "two reals separated by space", item[0])
        try:
            return float(parts[0]), float(parts[1])
        except ValueError:
            self._fail(key, item[1], "two reals separated by space", item[0])

    def words(self, key: str, default=_REQUIRED) -> list[str]:
        item = self._fetch(key, default)
        if item is None:
            return list(default)
        return item[0].split()

    def check_unknown(self) -> None:
        extra = set(self.data) - self.used
        if extra:
            key = sorted(extra)[0]
            raise ScenarioError(
                f"{self.scenario.name}:{self.data[key][1]}: [{self.name}] "
                f"has unknown key {key!r}"
            )


@dataclass
class Scenario:
    name: str
    text: str
    base_dir: Path
    sections: dict[str, dict[str, tuple[str, int]]]
    stage: str | None = None  # from an embedding manifest, if any
    seed: int | None = None

    @classmethod
    def load(cls, path: Path) -> "Scenario":
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
        stage = seed = None
        base_dir = path.parent.resolve()
        if raw.lstrip().startswith("{"):
            try:
                manifest = json.loads(raw)
                text = manifest["scenario"]
                stage = manifest.get("stage")
                seed = manifest.get("seed")
                base_dir = Path(manifest.get("scenario_dir", base_dir))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ScenarioError(f"{path} looks like a manifest but is invalid: {exc}") from None
        else:
            text = raw
        scn = cls(path.name, text, base_dir, _parse_sections(text, path.name))
        scn.stage, scn.seed = stage, seed
        return scn

    def section(self, name: str) -> _Section:
        return _Section(self, name)

    def known_sections(self, names: set[str]) -> None:
        extra = set(self.sections) - names
        if extra:
            raise ScenarioError(f"{self.name}: unknown section [{sorted(extra)[0]}]")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def _load_mask_file(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return load_mask_pgm(path)
    return load_mask_text(path)


def _build_domain(scn: Scenario) -> CellSet:
    sec = scn.section("domain")
    shape = sec.string("shape", choices=("square", "disk", "annulus", "mask"))
    extent = sec.real("extent", 1.0)
    if extent <= 0:
        raise ScenarioError(f"{scn.name}: [domain] extent must be positive")
    if shape == "mask":
        mask_file = sec.raw("mask_file")
        mask = _load_mask_file(scn.resolve(mask_file))
        ny, nx = mask.shape
        grid = Grid(nx, ny, extent / nx)
        domain = CellSet(grid, mask)
        if domain.is_empty:
            raise ScenarioError(f"{scn.name}: mask file {mask_file} selects no cells")
        sec.check_unknown()
        return domain
    size = sec.integer("size")
    if size < 1:
        raise ScenarioError(f"{scn.name}: [domain] size must be >= 1")
    grid = Grid(size, size, extent / size)
    center = sec.pair("center", (extent / 2.0, extent / 2.0))
    if shape == "square":
        domain = CellSet.full(grid)
    elif shape == "disk":
        domain = make_disk(grid, center, sec.real("radius"))
    else:
        domain = make_annulus(grid, center, sec.real("inner_radius"), sec.real("radius"))
    sec.check_unknown()
    return domain


def _build_weights(scn: Scenario, grid: Grid) -> tuple[ScalarField, Anisotropy, float]:
    sec = scn.section("weights")
    stencil = stencil_by_name(sec.string("stencil", "full16", choices=("full16", "axis4")))
    fspec = sec.words("f", ["uniform", "1.0"])
    f = _field_from_words(scn, grid, fspec)
    gspec = sec.words("g", ["euclidean"])
    g = _anisotropy_from_words(scn, grid, stencil, gspec)
    alpha = sec.real("alpha", 1.0)
    sec.check_unknown()
    return f, g, alpha


def _field_from_words(scn: Scenario, grid: Grid, words: list[str]) -> ScalarField:
    kind = words[0] if words else ""
    try:
        if kind == "uniform" and len(words) == 2:
            return ScalarField.uniform(grid, float(words[1]))
        if kind == "radial" and len(words) == 4:
            base, slope = float(words[1]), float(words[2])
            cx, cy = (float(v) for v in words[3].split(",", 1))
            return ScalarField.radial(grid, base, slope, (cx, cy))
        if kind == "file" and len(words) == 2:
            values = load_field_text(scn.resolve(words[1]))
            return ScalarField(grid, values)
    except (ValueError, GridError, MaskIOError) as exc:
        raise ScenarioError(f"{scn.name}: [weights] f: {exc}") from None
    raise ScenarioError(
        f"{scn.name}: [weights] f must be 'uniform V', 'radial BASE SLOPE CX,CY' "
        f"or 'file PATH', got {' '.join(words)!r}"
    )


def _anisotropy_from_words(
    scn: Scenario, grid: Grid, stencil, words: list[str]
) -> Anisotropy:
    kind = words[0] if words else ""
    try:
        if kind == "euclidean" and len(words) == 1:
            return Anisotropy.euclidean(grid, stencil)
        if kind == "scaled" and len(words) == 2:
            return Anisotropy.scaled(grid, float(words[1]), stencil)
        if kind == "crystalline" and len(words) == 1 + stencil.n_directions:
            return Anisotropy.crystalline(grid, [float(w) for w in words[1:]], stencil)
        if kind == "file" and len(words) == 2:
            values = load_field_text(scn.resolve(words[1]))
            return Anisotropy.isotropic_field(grid, values, stencil)
    except (ValueError, GridError, MaskIOError) as exc:
        raise ScenarioError(f"{scn.name}: [weights] g: {exc}") from None
    raise ScenarioError(
        f"{scn.name}: [weights] g must be 'euclidean', 'scaled S', 'crystalline "
        f"v1 .. vD' or 'file PATH', got {' '.join(words)!r}"
    )


def _solver_options(scn: Scenario, stage: str) -> SolveOptions:
    sec = scn.section("solver")
    opt = SolveOptions(
        tol=sec.real("tol", 1e-9),
        max_iter=sec.integer("max_iter", 50),
        oracle_cap=sec.integer("oracle_cap", 16),
        method="oracle" if stage == "oracle" else sec.string(
            "method", "auto", choices=("auto", "oracle", "dinkelbach")
        ),
    )
    sec.check_unknown()
    return opt


def _run_solve(
    scn: Scenario, stage: str, out: Path, seed: int | None
) -> tuple[list[str], str | None]:
    """Returns (artifact names, verification failure message or None)."""
    domain = _build_domain(scn)
    f, g, alpha = _build_weights(scn, domain.grid)
    problem = CheegerProblem(domain, f, g, alpha)
    result = solve(problem, _solver_options(scn, stage))
    if not result.converged:
        raise SolverError(
            f"solver did not converge within the iteration budget "
            f"(last ratio {result.ratio:.6g})"
        )
    save_mask_pgm(result.minimizer, out / "minimizer.pgm")
    write_csv(
        out / "trace.csv",
        ("iter", "lambda", "volume", "perimeter"),
        (
            (i, lam, vol, per)
            for i, (lam, vol, per) in enumerate(
                zip(result.lambda_trace, result.volume_trace, result.perimeter_trace)
            )
        ),
    )
    rows = [("cheeger_ratio", result.ratio, "minimizer.pgm", "")]
    for idx, r in enumerate(result.component_ratios):
        rows.append((f"component_ratio[{idx}]", r, "minimizer.pgm", ""))
    artifacts = ["minimizer.pgm", "trace.csv", "verify.csv"]

    failure = None
    if stage == "verify":
        check_rows, failed = _run_checks(scn, problem, result, out, seed, artifacts)
        rows += check_rows
        if failed:
            failure = "one or more verification checks failed (see verify.csv margins)"
    write_csv(out / "verify.csv", ("check", "constant", "witness", "margin"), rows)
    return artifacts, failure


def _run_checks(scn, problem, result, out: Path, seed: int | None, artifacts: list[str]):
    sec = scn.section("verify")
    budget = sec.integer("budget", 500)
    slack = sec.real("slack", 0.05)
    checks = sec.words("checks", ["trace", "isoperimetric", "lemma"])
    for c in checks:
        if c not in _CHECKS:
            raise ScenarioError(f"{scn.name}: [verify] unknown check {c!r}")
    target_kind = sec.string("target", "minimizer", choices=("minimizer", "domain"))
    seed = seed if seed is not None else sec.integer("seed", None)
    if seed is None:
        raise ScenarioError(
            f"{scn.name}: sampled verification needs a seed (--seed or [verify] seed)"
        )
    growth_center = sec.pair("growth_center", None)
    growth_r = (sec.real("growth_r_min", None), sec.real("growth_r_max", None))
    sec.check_unknown()

    target = problem.domain if target_kind == "domain" else result.minimizer
    components = connected_components(target)
    rows = []
    failed = False
    for idx, comp in enumerate(components):
        tag = f"[{idx}]"
        if "trace" in checks:
            est = trace_constant(comp, problem.g, budget, seed)
            rows.append((f"trace{tag}", est.constant) + _witness(est.witness, out, f"trace{idx}", artifacts) + ("",))
        if "isoperimetric" in checks:
            est = relative_isoperimetric_constant(comp, budget, seed)
            rows.append(
                (f"relative_isoperimetric{tag}", est.constant)
                + _witness(est.witness, out, f"isoperimetric{idx}", artifacts)
                + ("",)
            )
        if "lemma" in checks:
            rep = check_lemma_relperimeter(comp, problem.g, budget, seed, slack)
            rows.append(
                (f"lemma_interior_bound{tag}", rep.coefficient)
                + _witness(rep.witness, out, f"lemma{idx}", artifacts)
                + (rep.worst_margin,)
            )
            failed |= not rep.passed
    if "growth" in checks:
        if growth_center is None or growth_r[0] is None or growth_r[1] is None:
            raise ScenarioError(
                f"{scn.name}: [verify] growth check needs growth_center, "
                f"growth_r_min and growth_r_max"
            )
        rep = volume_growth_check(
            components[0], growth_center, growth_r[0], growth_r[1],
            slack=slack, budget=budget, seed=seed,
        )
        worst = min(row.margin for row in rep.rows)
        rows.append(("volume_growth[0]", rep.c, "", worst))
        failed |= not rep.passed
    return rows, failed


def _witness(witness, out: Path, tag: str, artifacts: list[str]) -> tuple[str]:
    if witness is None:
        return ("",)
    name = f"witness_{tag}.pgm"
    save_mask_pgm(witness, out / name)
    artifacts.append(name)
    return (name,)


def _run_cantor(scn: Scenario, out: Path, seed: int | None) -> list[str]:
    sec = scn.section("cantor")
    spec = CantorSpec(
        sec.real("epsilon"),
        sec.integer("depth"),
        cantor_grid(sec.integer("size", 256)),
    )
    probe = sec.boolean("probe", False)
    probe_budget = sec.integer("probe_budget", 200)
    probe_slack = sec.real("probe_slack", 0.05)
    escalate = tuple(int(w) for w in sec.words("escalate", []))
    sec.check_unknown()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CantorResolutionWarning)
        domain = build_cantor_set(spec)
    save_mask_pgm(domain.omega, out / "domain.pgm")
    report = boundary_gap_report(domain)
    write_csv(
        out / "cantor.csv",
        ("depth", "exact_measure", "raster_perimeter", "proxy", "gap"),
        ((r.depth, r.exact_measure, r.raster_perimeter, r.proxy, r.gap) for r in report.rows),
    )
    artifacts = ["domain.pgm", "cantor.csv"]
    if probe:
        if seed is None:
            raise ScenarioError(f"{scn.name}: cantor probe needs a seed (--seed)")
        rep = self_cheeger_probe(
            domain, probe_budget, slack=probe_slack, seed=seed, escalate=escalate
        )
        last = rep.attempts[-1]
        write_csv(
            out / "verify.csv",
            ("check", "constant", "witness", "margin"),
            [("cantor_probe", last.improvement, "domain.pgm", rep.slack - last.improvement)],
        )
        artifacts.append("verify.csv")
        if not rep.passed:
            raise CantorFailed(
                f"self-ratio probe failed: best subset improves the whole-domain "
                f"ratio by {last.improvement:.4g} (> slack {rep.slack:g})"
            )
    return artifacts


def _run_one(scn: Scenario, stage: str, out: Path, seed: int | None, threads: int) -> int:
    code = EXIT_OK
    message = None
    artifacts: list[str] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if stage == "cantor":
            scn.known_sections({"cantor", "output", "run"})
            artifacts = _run_cantor(scn, out, seed)
        else:
            scn.known_sections({"domain", "weights", "solver", "verify", "output", "run"})
            artifacts, failure = _run_solve(scn, stage, out, seed)
            if failure is not None:
                raise VerificationFailed(failure)
    except ScenarioError as exc:
        code, message = EXIT_CONFIG, str(exc)
    except (MaskIOError, OSError) as exc:
        code, message = EXIT_IO, f"{scn.name}: {exc}"
    except SolverError as exc:
        code, message = EXIT_SOLVER, f"{scn.name}: {exc}"
    except VerificationFailed as exc:
        code, message = EXIT_VERIFY, f"{scn.name}: {exc}"
    except CantorFailed as exc:
        code, message = EXIT_CANTOR, f"{scn.name}: {exc}"
    except (GridError, MeasureError, VerifyError) as exc:
        code, message = EXIT_CONFIG, f"{scn.name}: {exc}"
    if message:
        print(f"cheegerlab: {message}", file=sys.stderr)
    try:
        _write_manifest(scn, stage, out, seed, threads, artifacts, code)
    except OSError as exc:
        print(f"cheegerlab: cannot write manifest: {exc}", file=sys.stderr)
        code = max(code, EXIT_IO)
    return code


def _write_manifest(scn, stage, out: Path, seed, threads, artifacts, code) -> None:
    manifest = {
        "kind": "cheegerlab-manifest",
        "package": __version__,
        "numpy": np.__version__,
        "python": f"{sys.version_info.major}.{sys.version_info.minor}",
        "stage": stage,
        "seed": seed,
        "threads": threads,
        "exit_code": code,
        "scenario_sha256": hashlib.sha256(scn.text.encode("utf-8")).hexdigest(),
        "scenario_dir": str(scn.base_dir),
        "scenario": scn.text,
        "outputs": sorted(set(artifacts)),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _out_dir(scn: Scenario, args, multiple: bool, stem: str) -> Path:
    if args.out:
        base = Path(args.out)
    elif os.environ.get("CHEEGERLAB_OUT"):
        base = Path(os.environ["CHEEGERLAB_OUT"])
    else:
        sec = scn.section("output")
        base = Path(sec.string("dir", "out"))
        if not base.is_absolute():
            base = scn.base_dir / base
        sec.check_unknown()
    return base / stem if multiple else base


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cheegerlab",
        description="Weighted ratio minimizers and inequality checks on grids.",
    )
    parser.add_argument("--scenario", action="append", required=True,
                        help="scenario config or manifest.json (repeatable)")
    parser.add_argument("--stage", choices=_STAGES, default=None,
                        help="pipeline stage (default: solve, or the manifest's)")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for sampled verification sweeps")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker pool size for multiple scenarios")
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("cheegerlab: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    jobs = []
    multiple = len(args.scenario) > 1
    for path_str in args.scenario:
        path = Path(path_str)
        try:
            scn = Scenario.load(path)
            run_sec = scn.section("run")
            stage = args.stage or scn.stage or run_sec.string("stage", "solve", choices=_STAGES)
            seed = args.seed if args.seed is not None else scn.seed
            if seed is None:
                seed = run_sec.integer("seed", None)
            out = _out_dir(scn, args, multiple, path.stem)
        except ScenarioError as exc:
            print(f"cheegerlab: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"cheegerlab: {exc}", file=sys.stderr)
            return EXIT_IO
        jobs.append((scn, stage, out, seed))

    if args.threads == 1 or len(jobs) == 1:
        codes = [_run_one(scn, stage, out, seed, args.threads) for scn, stage, out, seed in jobs]
    else:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            codes = list(
                pool.map(lambda job: _run_one(job[0], job[1], job[2], job[3], args.threads), jobs)
            )
    return max(codes) if codes else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
