"""Fat-Cantor construction: exact bookkeeping, raster, gap audit, probe."""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from cheegerlab import (
    CantorError,
    CantorResolutionWarning,
    CantorSpec,
    Grid,
    boundary_gap_report,
    build_cantor_set,
    build_domain,
    bump_area,
    bump_profile,
    cantor_grid,
    cantor_limit_length,
    make_disk,
    self_cheeger_probe,
)


def _quiet_build(spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CantorResolutionWarning)
        return build_cantor_set(spec)


def test_lengths_follow_closed_form():
    dom = _quiet_build(CantorSpec(0.35, 20, cantor_grid(64)))
    prod = 1.0
    for i, L in enumerate(dom.lengths):
        if i:
            prod *= 1.0 - 2.0 ** (-i)
        assert L == pytest.approx(2.0 * 0.35 * prod, rel=1e-12)
    assert dom.cantor_measure_exact == dom.lengths[-1]


def test_removed_length_matches_bump_list():
    # Step i removes 2^(i-1) middles of half-width delta_i; the total
    # removed length must equal L_{i-1} - L_i exactly.
    dom = _quiet_build(CantorSpec(0.42, 12, cantor_grid(64)))
    for i in range(1, 13):
        step = dom.bumps[i]
        assert len(step) == 2 ** (i - 1)
        deltas = {d for _, d in step}
        assert len(deltas) == 1  # one half-width per step
        removed = sum(2.0 * d for _, d in step)
        assert removed == pytest.approx(dom.lengths[i - 1] - dom.lengths[i], rel=1e-12)


def test_limit_length_against_pentagonal_series():
    # prod_{i>=1}(1 - q^i) at q = 1/2 via Euler's pentagonal number series,
    # an independent route to the same constant.
    q, series = 0.5, 1.0
    for k in range(1, 40):
        for kk in (k, -k):
            series += (-1) ** k * q ** (kk * (3 * kk - 1) // 2)
    assert cantor_limit_length(1.0) / 2.0 == pytest.approx(series, rel=1e-13)
    assert cantor_limit_length(0.35) == pytest.approx(0.7 * series, rel=1e-13)


def test_bump_profile_shape():
    d = 0.3
    assert bump_profile(d, d) == 0.0
    assert bump_profile(-d, d) == 0.0
    assert bump_profile(2 * d, d) == 0.0
    peak = bump_profile(0.0, d)
    assert peak == pytest.approx(1.0 - math.sqrt(1.0 - d * d))
    assert peak <= d * d
    xs = np.linspace(-d, d, 101)
    ys = bump_profile(xs, d)
    assert np.all(ys >= 0)
    assert np.allclose(ys, ys[::-1])  # even profile
    with pytest.raises(CantorError):
        bump_profile(0.0, 0.0)


def test_bump_area_against_quadrature():
    for d in (0.3, 0.05):
        numeric, _ = integrate.quad(lambda x: 2.0 * bump_profile(x, d), -d, d)
        assert bump_area(d) == pytest.approx(numeric, rel=1e-9)
    d = 1e-3
    assert bump_area(d) == pytest.approx((2.0 / 3.0) * d**3, rel=1e-4)
    with pytest.raises(CantorError):
        bump_area(1.5)


def test_spec_validation():
    grid = cantor_grid(64)
    assert grid.origin == (-1.0, -1.0)
    assert grid.h == pytest.approx(2.0 / 64)
    with pytest.raises(CantorError):
        cantor_grid(1)
    with pytest.raises(CantorError):
        CantorSpec(0.0, 3, grid)
    with pytest.raises(CantorError):
        CantorSpec(1.0, 3, grid)
    with pytest.raises(CantorError):
        CantorSpec(0.3, -1, grid)
    with pytest.raises(CantorError):
        CantorSpec(0.3, 2.5, grid)
    with pytest.raises(CantorError):
        CantorSpec(0.3, 3, Grid(8, 8, 1.0 / 8))  # covers [0,1]^2 only


def test_resolution_warning_and_depth_zero():
    with pytest.warns(CantorResolutionWarning):
        build_domain(CantorSpec(0.35, 10, cantor_grid(64)))
    with warnings.catch_warnings():
        warnings.simplefilter("error", CantorResolutionWarning)
        shallow = build_cantor_set(CantorSpec(0.35, 1, cantor_grid(256)))
        plain = build_domain(CantorSpec(0.35, 0, cantor_grid(64)))
    assert shallow.resolvable_depth == 1
    assert plain.mask.sum() == make_disk(cantor_grid(64), (0.0, 0.0), 1.0).mask.sum()


def test_domain_raster_properties():
    spec = CantorSpec(0.35, 6, cantor_grid(128))
    dom = _quiet_build(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CantorResolutionWarning)
        direct = build_domain(spec)
    assert np.array_equal(dom.omega.mask, direct.mask)
    disk = make_disk(spec.grid, (0.0, 0.0), 1.0)
    assert not (dom.omega.mask & ~disk.mask).any()  # slits only remove
    assert dom.omega.count < disk.count
    assert np.array_equal(dom.omega.mask, dom.omega.mask[::-1])  # mirror symmetry


def test_boundary_gap_report():
    dom = _quiet_build(CantorSpec(0.35, 8, cantor_grid(256)))
    rep = boundary_gap_report(dom)
    assert len(rep.rows) == 9
    assert rep.limit_gap == pytest.approx(2.0 * cantor_limit_length(0.35))
    deepest = rep.rows[rep.resolvable_depth].raster_perimeter
    for row in rep.rows:
        assert row.gap == pytest.approx(2.0 * dom.lengths[row.depth], rel=1e-15)
        assert row.proxy == pytest.approx(row.raster_perimeter + row.gap)
        assert row.gap > rep.limit_gap  # L_i decreases to a positive limit
        if row.depth >= rep.resolvable_depth:
            assert row.raster_perimeter == deepest
    # the first slit adds wall length
    assert rep.rows[1].raster_perimeter > rep.rows[0].raster_perimeter


def test_self_cheeger_probe():
    dom = _quiet_build(CantorSpec(0.35, 6, cantor_grid(128)))
    rep = self_cheeger_probe(dom, 150, seed=7)
    assert rep.passed
    assert len(rep.attempts) == 1
    att = rep.attempts[0]
    assert att.resolution == 128
    assert att.improvement <= rep.slack
    assert att.best_sampled_ratio <= att.ratio_whole + 1e-12
    with pytest.raises(CantorError):
        self_cheeger_probe(dom, 10, slack=-0.5)
