"""Batch driver: scenario parsing, stages, exit codes, determinism."""

import json
from textwrap import dedent

import numpy as np
import pytest

from cheegerlab import (
    Anisotropy,
    CellSet,
    Grid,
    ScalarField,
    CheegerProblem,
    load_mask_pgm,
    save_field_text,
    save_mask_text,
    solve,
)
from cheegerlab.cli import main
from cheegerlab.solver import SolveOptions

DISK = dedent(
    """
    [domain]
    shape = disk
    size = 48
    radius = 0.4  # fits well inside the unit box
    [weights]
    stencil = full16
    g = euclidean
    """
)


def _write(tmp_path, text, name="scn.cfg"):
    path = tmp_path / name
    path.write_text(dedent(text))
    return path


def _artifact_bytes(out, names=("minimizer.pgm", "trace.csv", "verify.csv", "manifest.json")):
    return {n: (out / n).read_bytes() for n in names}


def test_solve_stage_and_rerun_determinism(tmp_path):
    scn = _write(tmp_path, DISK)
    out1, out2, out3 = (tmp_path / d for d in ("a", "b", "c"))
    assert main(["--scenario", str(scn), "--out", str(out1)]) == 0
    assert main(["--scenario", str(scn), "--out", str(out2)]) == 0
    first = _artifact_bytes(out1)
    assert _artifact_bytes(out2) == first
    # a manifest is itself a runnable scenario
    assert main(["--scenario", str(out1 / "manifest.json"), "--out", str(out3)]) == 0
    assert _artifact_bytes(out3) == first
    manifest = json.loads(first["manifest.json"])
    assert manifest["exit_code"] == 0
    assert manifest["stage"] == "solve"
    assert sorted(manifest["outputs"]) == ["minimizer.pgm", "trace.csv", "verify.csv"]
    mask = load_mask_pgm(out1 / "minimizer.pgm")
    assert mask.any()


def test_oracle_stage_matches_library(tmp_path):
    scn = _write(
        tmp_path,
        """
        [domain]
        shape = square
        size = 4
        [run]
        stage = oracle
        """,
    )
    out = tmp_path / "out"
    assert main(["--scenario", str(scn), "--out", str(out)]) == 0
    lines = (out / "verify.csv").read_text().splitlines()
    assert lines[0] == "check,constant,witness,margin"
    name, value = lines[1].split(",")[:2]
    assert name == "cheeger_ratio"
    grid = Grid(4, 4, 0.25)
    problem = CheegerProblem(
        CellSet.full(grid), ScalarField.uniform(grid), Anisotropy.euclidean(grid)
    )
    want = solve(problem, SolveOptions(method="oracle")).ratio
    assert float(value) == want


def test_config_errors(tmp_path, capsys):
    cases = [
        ("[domain]\nshape = trapezoid\nsize = 8\n", "shape"),
        ("[domain]\nshape = square\nsize = 8\nwingspan = 3\n", "wingspan"),
        ("shape = square\n", "outside any"),
        ("[domain]\nshape = square\nsize = 8\nsize = 9\n", "duplicate"),
        ("[domain]\nshape = square\nsize = 8\n[mystery]\nx = 1\n", "mystery"),
        ("[domain]\nshape = square\nsize = 8\n[verify]\nchecks = vibes\n[run]\nstage = verify\nseed = 1\n", "vibes"),
        ("[domain]\nshape = square\nsize = 8\n[run]\nstage = verify\n", "seed"),
        ("[domain]\nshape = square\nsize = nine\n", "integer"),
    ]
    for i, (text, needle) in enumerate(cases):
        scn = _write(tmp_path, text, f"bad{i}.cfg")
        code = main(["--scenario", str(scn), "--out", str(tmp_path / f"o{i}")])
        assert code == 2, text
        assert needle in capsys.readouterr().err
    assert main(["--scenario", str(tmp_path / "missing.cfg")]) == 2
    assert main(["--scenario", str(tmp_path / "bad0.cfg"), "--threads", "0"]) == 2


def test_error_line_numbers_are_reported(tmp_path, capsys):
    scn = _write(tmp_path, "[domain]\nshape = square\nsize = nine\n", "lines.cfg")
    main(["--scenario", str(scn), "--out", str(tmp_path / "o")])
    assert "lines.cfg:3" in capsys.readouterr().err


def test_verify_stage_passes_with_face_counts(tmp_path):
    scn = _write(
        tmp_path,
        """
        [domain]
        shape = square
        size = 32
        [weights]
        stencil = axis4
        [verify]
        checks = trace isoperimetric lemma
        budget = 200
        seed = 3
        target = domain
        [run]
        stage = verify
        """,
    )
    out = tmp_path / "out"
    assert main(["--scenario", str(scn), "--out", str(out)]) == 0
    body = (out / "verify.csv").read_text()
    for row in ("trace[0]", "relative_isoperimetric[0]", "lemma_interior_bound[0]"):
        assert row in body
    assert (out / "witness_trace0.pgm").exists()


def test_verify_stage_flags_substencil_violations(tmp_path):
    # full16 underestimates single-cell perimeters, so the interior bound
    # sweep fails on the disk and the run exits 4.
    scn = _write(
        tmp_path,
        """
        [domain]
        shape = disk
        size = 32
        radius = 0.4
        [weights]
        stencil = full16
        [verify]
        checks = lemma
        budget = 300
        seed = 1
        target = domain
        [run]
        stage = verify
        """,
    )
    out = tmp_path / "out"
    assert main(["--scenario", str(scn), "--out", str(out)]) == 4
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 4


def test_solver_budget_exhaustion_exits_3(tmp_path):
    scn = _write(
        tmp_path,
        """
        [domain]
        shape = square
        size = 48
        [solver]
        method = dinkelbach
        max_iter = 1
        """,
    )
    assert main(["--scenario", str(scn), "--out", str(tmp_path / "out")]) == 3


def test_cantor_stage(tmp_path):
    scn = _write(
        tmp_path,
        """
        [cantor]
        epsilon = 0.35
        depth = 4
        size = 64
        [run]
        stage = cantor
        """,
    )
    out = tmp_path / "out"
    assert main(["--scenario", str(scn), "--out", str(out)]) == 0
    rows = (out / "cantor.csv").read_text().splitlines()
    assert rows[0] == "depth,exact_measure,raster_perimeter,proxy,gap"
    assert len(rows) == 6  # depths 0..4
    gaps = [float(r.split(",")[4]) for r in rows[1:]]
    assert all(a > b > 0 for a, b in zip(gaps, gaps[1:]))
    # probing needs a seed
    probing = _write(
        tmp_path,
        """
        [cantor]
        epsilon = 0.35
        depth = 4
        size = 64
        probe = yes
        [run]
        stage = cantor
        """,
        "probe.cfg",
    )
    assert main(["--scenario", str(probing), "--out", str(tmp_path / "p")]) == 2


def test_mask_and_field_files_resolve_next_to_scenario(tmp_path):
    nest = tmp_path / "nested"
    nest.mkdir()
    rng = np.random.default_rng(4)
    grid = Grid(12, 12, 1.0 / 12)
    mask = np.zeros((12, 12), bool)
    mask[3:9, 3:9] = True
    save_mask_text(CellSet(grid, mask), nest / "dom.txt")
    save_field_text(np.full((12, 12), 1.5), nest / "f.txt")
    scn = _write(
        nest,
        """
        [domain]
        shape = mask
        mask_file = dom.txt
        [weights]
        f = file f.txt
        """,
    )
    out = tmp_path / "out"
    assert main(["--scenario", str(scn), "--out", str(out)]) == 0
    assert load_mask_pgm(out / "minimizer.pgm").sum() > 0


def test_multiple_scenarios_use_stem_subdirs(tmp_path):
    a = _write(tmp_path, DISK, "first.cfg")
    b = _write(tmp_path, DISK.replace("0.4", "0.3"), "second.cfg")
    out = tmp_path / "both"
    code = main(
        ["--scenario", str(a), "--scenario", str(b), "--out", str(out), "--threads", "2"]
    )
    assert code == 0
    assert (out / "first" / "manifest.json").exists()
    assert (out / "second" / "manifest.json").exists()


def test_output_dir_sources(tmp_path, monkeypatch):
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("CHEEGERLAB_OUT", str(env_dir))
    scn = _write(tmp_path, "[domain]\nshape = square\nsize = 8\n")
    assert main(["--scenario", str(scn)]) == 0
    assert (env_dir / "manifest.json").exists()
    # --out wins over the environment
    explicit = tmp_path / "explicit"
    assert main(["--scenario", str(scn), "--out", str(explicit)]) == 0
    assert (explicit / "manifest.json").exists()


def test_unwritable_output_exits_6(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory\n")
    scn = _write(tmp_path, "[domain]\nshape = square\nsize = 8\n")
    assert main(["--scenario", str(scn), "--out", str(blocker / "sub")]) == 6
