"""Empirical constants and inequality checks on rasterized domains.

All sweeps share the :mod:`cheegerlab.sampling` candidate stream, so a
reported constant is the exact supremum whenever the stream is exhaustive
and a seeded lower estimate otherwise.  Checks return report objects; a
failed check is a report with ``passed=False`` and a witness set, never an
exception, so batch drivers can serialize everything.

Conventions: areas are unweighted (count times h^2); "boundary" and
"interior" split a subset's crossings by whether they leave the parent
set, as in :func:`cheegerlab.measures.relative_perimeters`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    STENCIL4,
    STENCIL16,
    Anisotropy,
    CellSet,
    Stencil,
    connected_components,
    make_disk,
)
from .measures import relative_perimeters, weighted_perimeter
from .sampling import sample_subsets, sampling_mode

__all__ = [
    "VerifyError",
    "SupEstimate",
    "LemmaReport",
    "GrowthRow",
    "GrowthReport",
    "trace_constant",
    "relative_isoperimetric_constant",
    "check_lemma_relperimeter",
    "localized_sup",
    "volume_growth_check",
    "ball_growth_derivative",
]


class VerifyError(ValueError):
    """Preconditions of a verification sweep not met."""


@dataclass(frozen=True)
class SupEstimate:
    """Estimated supremum with its maximizing candidate."""

    name: str
    constant: float
    witness: CellSet | None
    samples: int
    mode: str  # "exhaustive" or "sampled"


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of the interior-perimeter lower bound sweep."""

    passed: bool
    worst_margin: float
    witness: CellSet | None
    samples: int
    mode: str
    trace_k: float
    coefficient: float
    slack: float
    violations: int


@dataclass(frozen=True)
class GrowthRow:
    rho: float
    m_rho: float
    m_2rho: float
    bound: float
    margin: float
    ok: bool


@dataclass(frozen=True)
class GrowthReport:
    """Volume growth m(2 rho) >= (1 - slack) (c / 2n)^n (2 rho)^n at a boundary point."""

    passed: bool
    rows: tuple[GrowthRow, ...]
    isoperimetric_k: float
    c: float
    slack: float


def _require_connected(parent: CellSet, who: str) -> None:
    if parent.is_empty:
        raise VerifyError(f"{who} needs a nonempty parent set")
    if len(connected_components(parent)) != 1:
        raise VerifyError(f"{who} needs a 4-connected parent set")


def trace_constant(
    parent: CellSet, g: Anisotropy, budget: int, seed: int = 0
) -> SupEstimate:
    """sup over proper subsets E of min(bnd(E), bnd(A \\ E)) / int(E).

    ``bnd`` is the crossing cost from a set to the outside of the parent A,
    ``int`` the cost to the rest of A, both weighted by g.  A single-cell
    parent has no proper subsets and yields 0 by convention.
    """
    _require_connected(parent, "trace constant")
    if parent.grid != g.grid:
        raise VerifyError("parent set and anisotropy live on different grids")
    perimeter_a = weighted_perimeter(parent, g)
    best = 0.0
    witness = None
    samples = 0
    for cand in sample_subsets(parent, budget, seed):
        samples += 1
        dec = relative_perimeters(cand, parent, g)
        if dec.interior <= 0:
            continue
        bnd_rest = max(perimeter_a - dec.boundary, 0.0)
        ratio = min(dec.boundary, bnd_rest) / dec.interior
        if ratio > best:
            best = ratio
            witness = cand
    return SupEstimate("trace", best, witness, samples, sampling_mode(parent, budget))


def relative_isoperimetric_constant(
    parent: CellSet, budget: int, seed: int = 0, stencil: Stencil = STENCIL4
) -> SupEstimate:
    """sup over proper subsets E of min(|E|, |A \\ E|)^(1/2) / int(E).

    Areas are unweighted and the interior perimeter uses g identically 1 on
    the requested stencil (face counts by default).
    """
    _require_connected(parent, "relative isoperimetric constant")
    unit = Anisotropy.euclidean(parent.grid, stencil)
    area = parent.grid.cell_area
    total = parent.count
    best = 0.0
    witness = None
    samples = 0
    for cand in sample_subsets(parent, budget, seed):
        samples += 1
        dec = relative_perimeters(cand, parent, unit)
        if dec.interior <= 0:
            continue
        small = min(cand.count, total - cand.count) * area
        ratio = math.sqrt(small) / dec.interior
        if ratio > best:
            best = ratio
            witness = cand
    return SupEstimate("relative_isoperimetric", best, witness, samples, sampling_mode(parent, budget))


def check_lemma_relperimeter(
    parent: CellSet, g: Anisotropy, budget: int, seed: int = 0, slack: float = 0.05
) -> LemmaReport:
    """Sweep min(|E|, |A \\ E|)^(1/2) <= (1+slack) (k+1) C / (2 sqrt(pi)) * int_g(E).

    ``k`` is the trace constant of the same parent estimated on the same
    candidate stream; C is the comparability constant of g, which converts
    the weighted interior perimeter back to a Euclidean-comparable one.
    The right-hand coefficient is (k+1) / (n omega_n^(1/n)) in dimension
    n = 2, scaled by C and the slack.
    """
    _require_connected(parent, "interior perimeter bound")
    k = trace_constant(parent, g, budget, seed).constant
    coefficient = (k + 1.0) * g.comparability / (2.0 * math.sqrt(math.pi))
    area = parent.grid.cell_area
    total = parent.count
    worst = math.inf
    witness = None
    samples = 0
    violations = 0
    for cand in sample_subsets(parent, budget, seed):
        samples += 1
        dec = relative_perimeters(cand, parent, g)
        lhs = math.sqrt(min(cand.count, total - cand.count) * area)
        margin = (1.0 + slack) * coefficient * dec.interior - lhs
        if margin < worst:
            worst = margin
            witness = cand
        if margin < 0:
            violations += 1
    return LemmaReport(
        passed=violations == 0,
        worst_margin=worst,
        witness=witness,
        samples=samples,
        mode=sampling_mode(parent, budget),
        trace_k=k,
        coefficient=coefficient,
        slack=slack,
        violations=violations,
    )


def localized_sup(
    parent: CellSet,
    x: tuple[float, float],
    rho: float,
    budget: int,
    g: Anisotropy | None = None,
    seed: int = 0,
) -> float:
    """sup of bnd(E) / int(E) over subsets E of A intersected with B_rho(x).

    ``x`` must lie within one cell width of the discrete boundary of A
    (cells of A with an axis neighbor outside).  Subsets of the ball
    neighborhood localize the trace ratio near the boundary point.
    """
    _require_connected(parent, "localized supremum")
    if rho <= 0:
        raise VerifyError(f"localization radius must be positive, got {rho!r}")
    grid = parent.grid
    if g is None:
        g = Anisotropy.euclidean(grid, STENCIL4)
    rim = _discrete_boundary(parent)
    X, Y = grid.cell_centers()
    d2 = (X - x[0]) ** 2 + (Y - x[1]) ** 2
    near = math.sqrt(float(d2[rim].min())) if rim.any() else math.inf
    if near > grid.h * (1.0 + 1e-9):
        raise VerifyError(
            f"localization center {x} is {near:.3g} away from the discrete "
            f"boundary, more than one cell width {grid.h:.3g}"
        )
    region = CellSet(grid, parent.mask & (d2 <= rho * rho))
    if region.is_empty:
        raise VerifyError("localization ball misses the parent set")
    best = 0.0
    candidates = sample_subsets(region, budget, seed)
    for cand in candidates:
        dec = relative_perimeters(cand, parent, g)
        if dec.interior > 0:
            best = max(best, dec.boundary / dec.interior)
    if region != parent:
        dec = relative_perimeters(region, parent, g)
        if dec.interior > 0:
            best = max(best, dec.boundary / dec.interior)
    return best


def _discrete_boundary(parent: CellSet) -> np.ndarray:
    from scipy import ndimage

    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    interior = ndimage.binary_erosion(parent.mask, structure=cross, border_value=0)
    return parent.mask & ~interior


def volume_growth_check(
    parent: CellSet,
    x0: tuple[float, float],
    r_min: float,
    r_max: float,
    *,
    steps: int = 6,
    slack: float = 0.05,
    budget: int = 400,
    seed: int = 0,
) -> GrowthReport:
    """Check m(2 rho) >= (1 - slack) (c / 2n)^n (2 rho)^n for a radius ladder.

    ``m(r)`` is the area of A within distance r of x0; ``c`` is the
    reciprocal of the relative isoperimetric constant of A estimated with
    the Euclidean 16-direction perimeter (whose interior crossing cost is
    what the co-area derivative m'(r) produces); rho runs over a geometric
    ladder in [r_min, r_max / 2] so 2 rho stays within r_max.  Requires x0
    within one cell width of A.
    """
    _require_connected(parent, "volume growth check")
    if not (0 < r_min < r_max):
        raise VerifyError(f"need 0 < r_min < r_max, got {r_min!r}, {r_max!r}")
    grid = parent.grid
    X, Y = grid.cell_centers()
    d = np.hypot(X - x0[0], Y - x0[1])
    inside = d[parent.mask]
    if float(inside.min()) > grid.h * (1.0 + 1e-9):
        raise VerifyError(f"growth center {x0} is farther than one cell width from the set")
    k = relative_isoperimetric_constant(parent, budget, seed, stencil=STENCIL16).constant
    if k <= 0:
        raise VerifyError("relative isoperimetric constant degenerated to 0")
    c = 1.0 / k
    n = 2
    area = grid.cell_area
    rows = []
    for rho in np.geomspace(r_min, r_max / 2.0, steps):
        m_rho = float(np.count_nonzero(inside <= rho)) * area
        m_2rho = float(np.count_nonzero(inside <= 2 * rho)) * area
        bound = (1.0 - slack) * (c / (2 * n)) ** n * (2 * rho) ** n
        rows.append(GrowthRow(float(rho), m_rho, m_2rho, bound, m_2rho - bound, m_2rho >= bound))
    return GrowthReport(all(r.ok for r in rows), tuple(rows), k, c, slack)


def ball_growth_derivative(
    parent: CellSet,
    x0: tuple[float, float],
    r: float,
    dr: float | None = None,
    stencil: Stencil = STENCIL16,
) -> tuple[float, float]:
    """Finite-difference d/dr of m(r) next to the ball's interior perimeter.

    Returns ``(fd, per)`` where fd is the central difference of the area of
    A within B_r over +-dr (default 4 h) and per is the crossing cost from
    A intersect B_r to the rest of A with g identically 1: the co-area rule
    says the two agree up to discretization error.
    """
    if r <= 0:
        raise VerifyError(f"radius must be positive, got {r!r}")
    grid = parent.grid
    if dr is None:
        dr = 4.0 * grid.h
    if dr <= 0 or dr >= r:
        raise VerifyError(f"difference step must lie in (0, r), got {dr!r}")
    X, Y = grid.cell_centers()
    d = np.hypot(X - x0[0], Y - x0[1])
    inside = d[parent.mask]
    area = grid.cell_area
    m_hi = float(np.count_nonzero(inside <= r + dr)) * area
    m_lo = float(np.count_nonzero(inside <= r - dr)) * area
    fd = (m_hi - m_lo) / (2.0 * dr)
    ball_part = CellSet(grid, parent.mask & (d <= r))
    if ball_part.is_empty:
        return fd, 0.0
    unit = Anisotropy.euclidean(grid, stencil)
    per = relative_perimeters(ball_part, parent, unit).interior
    return fd, per
