"""Trace/isoperimetric sweeps and growth checks against hand oracles."""

import math

import numpy as np
import pytest

from cheegerlab import (
    Anisotropy,
    CellSet,
    Grid,
    STENCIL4,
    VerifyError,
    ball_growth_derivative,
    check_lemma_relperimeter,
    localized_sup,
    make_disk,
    relative_isoperimetric_constant,
    trace_constant,
    volume_growth_check,
)


def _full(n, h=1.0):
    grid = Grid(n, n, h)
    return CellSet.full(grid), Anisotropy.euclidean(grid, STENCIL4)


def test_trace_constant_2x2_exhaustive():
    # Domino E: bnd = 4, int = 2, complement bnd = 4, so min/int = 2; the
    # singleton gives 1 and the diagonal pair 1, hence sup = 2.
    full, unit = _full(2)
    est = trace_constant(full, unit, budget=20)
    assert est.mode == "exhaustive"
    assert est.samples == 14
    assert est.constant == 2.0
    assert est.witness.count == 2


def test_trace_constant_3x3_exhaustive():
    # Top row: bnd = 5, int = 3, complement bnd = 7, min/int = 5/3; no
    # other subset does better.
    full, unit = _full(3)
    est = trace_constant(full, unit, budget=510)
    assert est.mode == "exhaustive"
    assert est.constant == pytest.approx(5.0 / 3.0)
    assert est.witness.count == 3


def test_relative_isoperimetric_2x2():
    # Domino: min area 2, interior cut 2, sqrt(2)/2; beats the singleton's
    # sqrt(1)/2.
    full, _ = _full(2)
    est = relative_isoperimetric_constant(full, budget=20)
    assert est.mode == "exhaustive"
    assert est.constant == pytest.approx(math.sqrt(2.0) / 2.0)
    assert est.witness.count == 2


def test_sweeps_require_connected_parents():
    grid = Grid(4, 4, 1.0)
    unit = Anisotropy.euclidean(grid, STENCIL4)
    two_islands = CellSet.from_flat(grid, [0, 15])
    empty = CellSet.empty(grid)
    for parent in (two_islands, empty):
        with pytest.raises(VerifyError):
            trace_constant(parent, unit, budget=10)
        with pytest.raises(VerifyError):
            relative_isoperimetric_constant(parent, budget=10)
        with pytest.raises(VerifyError):
            check_lemma_relperimeter(parent, unit, budget=10)
    other = Anisotropy.euclidean(Grid(4, 4, 0.5), STENCIL4)
    with pytest.raises(VerifyError):
        trace_constant(CellSet.full(grid), other, budget=10)


def test_lemma_relperimeter_exhaustive_3x3():
    full, unit = _full(3)
    rep = check_lemma_relperimeter(full, unit, budget=510, seed=0, slack=0.05)
    assert rep.mode == "exhaustive"
    assert rep.samples == 510
    assert rep.passed
    assert rep.violations == 0
    assert rep.trace_k == pytest.approx(5.0 / 3.0)
    # (k+1) C / (2 sqrt(pi)) with C = 1
    assert rep.coefficient == pytest.approx((5.0 / 3.0 + 1.0) / (2.0 * math.sqrt(math.pi)))
    assert rep.worst_margin > 0


def test_localized_sup_basic_and_far_center():
    grid = Grid(16, 16, 1.0 / 16)
    disk = make_disk(grid, (0.5, 0.5), 0.3)
    val = localized_sup(disk, (0.8, 0.5), 0.15, budget=200, seed=2)
    again = localized_sup(disk, (0.8, 0.5), 0.15, budget=200, seed=2)
    assert val == again
    assert val == pytest.approx(1.0)
    with pytest.raises(VerifyError):
        localized_sup(disk, (0.5, 0.5), 0.15, budget=50)  # center, not boundary
    with pytest.raises(VerifyError):
        localized_sup(disk, (0.8, 0.5), -0.1, budget=50)


def test_volume_growth_on_disk():
    grid = Grid(32, 32, 1.0 / 32)
    disk = make_disk(grid, (0.5, 0.5), 0.35)
    rep = volume_growth_check(disk, (0.85, 0.5), 4.0 / 32, 0.3, steps=4, budget=250, seed=1)
    assert rep.passed
    assert len(rep.rows) == 4
    assert rep.c == pytest.approx(1.0 / rep.isoperimetric_k)
    for row in rep.rows:
        assert row.ok
        assert row.m_2rho >= row.m_rho
        assert row.margin == pytest.approx(row.m_2rho - row.bound)
    with pytest.raises(VerifyError):
        volume_growth_check(disk, (0.85, 0.5), 0.3, 0.1)
    with pytest.raises(VerifyError):
        volume_growth_check(disk, (0.1, 0.1), 4.0 / 32, 0.3)  # far from the set


def test_ball_growth_derivative_matches_coarea():
    grid = Grid(64, 64, 1.0 / 64)
    disk = make_disk(grid, (0.5, 0.5), 0.4)
    for r in (0.15, 0.25):
        fd, per = ball_growth_derivative(disk, (0.5, 0.5), r)
        assert per > 0
        assert abs(fd - per) / per < 0.05
    with pytest.raises(VerifyError):
        ball_growth_derivative(disk, (0.5, 0.5), -1.0)
    with pytest.raises(VerifyError):
        ball_growth_derivative(disk, (0.5, 0.5), 0.1, dr=0.2)
