"""Discrete universe: square grids, cell sets, weight fields and anisotropies.

Conventions used everywhere in this package:

* A :class:`Grid` covers the rectangle ``[ox, ox + nx*h] x [oy, oy + ny*h]``
  with square cells of side ``h``.  Cell ``(i, j)`` (column ``i``, row ``j``)
  has center ``(ox + (i + 0.5) h, oy + (j + 0.5) h)``.
* Masks are boolean arrays of shape ``(ny, nx)`` indexed ``[j, i]``; row 0 is
  the bottom row.  Flat cell ids are row-major: ``id = j * nx + i``.
* Neighbor stencils list their direction offsets sorted by angle, and always
  contain ``-d`` for every ``d``; the opposite of direction ``k`` is
  ``k + D/2 (mod D)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import ndimage

__all__ = [
    "GridError",
    "Grid",
    "CellSet",
    "ScalarField",
    "Stencil",
    "STENCIL4",
    "STENCIL16",
    "stencil_by_name",
    "Anisotropy",
    "make_disk",
    "make_annulus",
    "connected_components",
    "subsets_of",
]

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class GridError(ValueError):
    """Invalid grid-level construction: bad shapes, empty rasterizations, caps."""


@dataclass(frozen=True)
class Grid:
    """Uniform square grid of ``nx`` by ``ny`` cells with spacing ``h``."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise GridError(f"grid needs at least one cell per axis, got {self.nx} x {self.ny}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise GridError(f"grid spacing must be a positive finite real, got {self.h!r}")
        ox, oy = self.origin
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(ox), float(oy)))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates as two ``(ny, nx)`` arrays ``(X, Y)``."""
        xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(xs, ys)


@dataclass(frozen=True, eq=False)
class CellSet:
    """Finite union of grid cells, stored as a read-only boolean mask."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.ascontiguousarray(self.mask, dtype=bool)
        if m.shape != (self.grid.ny, self.grid.nx):
            raise GridError(
                f"mask shape {m.shape} does not match grid ({self.grid.ny}, {self.grid.nx})"
            )
        if m is self.mask:
            m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.zeros((grid.ny, grid.nx), dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.ones((grid.ny, grid.nx), dtype=bool))

    @classmethod
    def from_flat(cls, grid: Grid, flat_ids: Sequence[int]) -> "CellSet":
        """Build from row-major flat cell ids (``id = j * nx + i``)."""
        ids = np.asarray(flat_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= grid.n_cells):
            raise GridError(
                f"flat cell ids must lie in [0, {grid.n_cells}), got range "
                f"[{ids.min()}, {ids.max()}]"
            )
        m = np.zeros(grid.n_cells, dtype=bool)
        m[ids] = True
        return cls(grid, m.reshape(grid.ny, grid.nx))

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def area(self) -> float:
        """Unweighted area, ``count * h**2``."""
        return self.count * self.grid.cell_area

    def flat_indices(self) -> np.ndarray:
        """Sorted row-major flat ids of the member cells."""
        return np.flatnonzero(self.mask.ravel())

    def _check_same_grid(self, other: "CellSet") -> None:
        if other.grid != self.grid:
            raise GridError("cell sets live on different grids")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.mask, other.mask))

    def __or__(self, other: "CellSet") -> "CellSet":
        self._check_same_grid(other)
        return CellSet(self.grid, self.mask | other.mask)

    def __and__(self, other: "CellSet") -> "CellSet":
        self._check_same_grid(other)
        return CellSet(self.grid, self.mask & other.mask)

    def difference(self, other: "CellSet") -> "CellSet":
        self._check_same_grid(other)
        return CellSet(self.grid, self.mask & ~other.mask)

    def is_subset_of(self, other: "CellSet") -> bool:
        self._check_same_grid(other)
        return not (self.mask & ~other.mask).any()


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Strictly positive cell-sampled weight, e.g. a volume density f."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.ny, self.grid.nx):
            raise GridError(
                f"field shape {v.shape} does not match grid ({self.grid.ny}, {self.grid.nx})"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite entries")
        if not np.all(v > 0):
            raise GridError("field must be strictly positive everywhere")
        if v is self.values:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, grid: Grid, value: float = 1.0) -> "ScalarField":
        return cls(grid, np.full((grid.ny, grid.nx), float(value)))

    @classmethod
    def radial(
        cls, grid: Grid, base: float, slope: float, center: tuple[float, float]
    ) -> "ScalarField":
        """Field ``base + slope * |x - center|`` sampled at cell centers."""
        X, Y = grid.cell_centers()
        r = np.hypot(X - center[0], Y - center[1])
        return cls(grid, base + slope * r)

    @property
    def sup_norm(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True, eq=False)
class Stencil:
    """Even set of integer neighbor offsets, sorted by angle.

    ``offsets[k + D/2] == -offsets[k]`` is enforced so every direction has its
    opposite at a fixed index shift, which is what makes perimeter sums
    symmetric under complementation.
    """

    name: str
    offsets: np.ndarray

    def __post_init__(self) -> None:
        off = np.ascontiguousarray(self.offsets, dtype=np.int64)
        if off.ndim != 2 or off.shape[1] != 2 or off.shape[0] % 2 != 0:
            raise GridError("stencil offsets must be an even-length list of (dx, dy) pairs")
        d = off.shape[0]
        if not np.array_equal(off[d // 2 :], -off[: d // 2]):
            raise GridError("stencil is not closed under v -> -v with opposite at k + D/2")
        ang = np.arctan2(off[:, 1], off[:, 0])
        if np.any(np.diff(np.unwrap(ang)) <= 0):
            raise GridError("stencil offsets must be strictly sorted by angle")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        norms = np.sqrt((off.astype(np.float64) ** 2).sum(axis=1))
        units = off.astype(np.float64) / norms[:, None]
        units.setflags(write=False)
        object.__setattr__(self, "_units", units)

    @property
    def n_directions(self) -> int:
        return self.offsets.shape[0]

    @property
    def unit_directions(self) -> np.ndarray:
        """Unit vectors of the offsets, shape (D, 2)."""
        return self._units

    def opposite(self, k: int) -> int:
        return (k + self.n_directions // 2) % self.n_directions


#: Axis neighbors only.  Crossing counts give the l1 (face-count) perimeter.
STENCIL4 = Stencil("axis4", [(1, 0), (0, 1), (-1, 0), (0, -1)])

#: Axis, diagonal and knight-move neighbors, 22.5 to 26.6 degree sectors.
#: With the Cauchy-Crofton weights this approximates the Euclidean perimeter.
STENCIL16 = Stencil(
    "full16",
    [
        (1, 0), (2, 1), (1, 1), (1, 2),
        (0, 1), (-1, 2), (-1, 1), (-2, 1),
        (-1, 0), (-2, -1), (-1, -1), (-1, -2),
        (0, -1), (1, -2), (1, -1), (2, -1),
    ],
)

_STENCILS = {s.name: s for s in (STENCIL4, STENCIL16)}


def stencil_by_name(name: str) -> Stencil:
    try:
        return _STENCILS[name]
    except KeyError:
        raise GridError(f"unknown stencil {name!r}, expected one of {sorted(_STENCILS)}") from None


@dataclass(frozen=True, eq=False)
class Anisotropy:
    """Cell-and-direction sampled surface density g(x, v).

    ``values[j, i, k]`` is g at cell ``(i, j)`` in stencil direction ``k``,
    for unit ``v``.  Construction validates the three structural properties
    the perimeter estimate relies on:

    * positivity and the comparability bounds ``1/C <= g <= C``,
    * evenness ``g(x, v) == g(x, -v)`` (checked, then symmetrized exactly),
    * convexity of the per-cell unit ball ``{v : g(x, v) <= 1}``, probed on
      the stencil directions.
    """

    grid: Grid
    stencil: Stencil
    values: np.ndarray
    comparability: float

    def __post_init__(self) -> None:
        d = self.stencil.n_directions
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.ny, self.grid.nx, d):
            raise GridError(
                f"anisotropy shape {v.shape} does not match (ny, nx, D) = "
                f"({self.grid.ny}, {self.grid.nx}, {d})"
            )
        if not np.all(np.isfinite(v)) or not np.all(v > 0):
            raise GridError("anisotropy values must be strictly positive and finite")

        half = d // 2
        flip = np.concatenate([np.arange(half, d), np.arange(half)])
        skew = np.max(np.abs(v - v[:, :, flip]))
        if skew > 1e-9 * v.max():
            raise GridError(f"anisotropy is not even: max |g(v) - g(-v)| = {skew:.3g}")
        v = 0.5 * (v + v[:, :, flip])  # make evenness exact

        c = float(self.comparability)
        if not (math.isfinite(c) and c >= 1):
            raise GridError(f"comparability constant must be >= 1, got {c!r}")
        lo, hi = float(v.min()), float(v.max())
        tol = 1e-12 * c
        if lo < 1 / c - tol or hi > c + tol:
            raise GridError(
                f"anisotropy range [{lo:.6g}, {hi:.6g}] violates comparability "
                f"bounds [1/C, C] = [{1 / c:.6g}, {c:.6g}]"
            )

        self._check_convexity(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "comparability", c)

    def _check_convexity(self, v: np.ndarray) -> None:
        # Unit-ball boundary samples q_k = u_k / g(u_k); the polygon through
        # them (directions are angle-sorted) must turn consistently left.
        u = self.stencil.unit_directions  # (D, 2)
        q = u[None, None, :, :] / v[:, :, :, None]  # (ny, nx, D, 2)
        e = np.roll(q, -1, axis=2) - q
        e_next = np.roll(e, -1, axis=2)
        cross = e[..., 0] * e_next[..., 1] - e[..., 1] * e_next[..., 0]
        scale = np.einsum("...k,...k->...", e, e).max()
        bad = cross < -1e-9 * scale
        if bad.any():
            j, i, k = np.unravel_index(np.argmax(bad), bad.shape)
            raise GridError(
                f"anisotropy unit ball is non-convex at cell ({i}, {j}), "
                f"direction index {k}"
            )

    @staticmethod
    def _auto_comparability(values: np.ndarray) -> float:
        return float(max(values.max(), 1.0 / values.min()))

    @classmethod
    def euclidean(cls, grid: Grid, stencil: Stencil = STENCIL16) -> "Anisotropy":
        """g identically 1: the perimeter reduces to the Euclidean estimate."""
        v = np.ones((grid.ny, grid.nx, stencil.n_directions))
        return cls(grid, stencil, v, 1.0)

    @classmethod
    def scaled(cls, grid: Grid, factor: float, stencil: Stencil = STENCIL16) -> "Anisotropy":
        """Constant isotropic g = factor."""
        v = np.full((grid.ny, grid.nx, stencil.n_directions), float(factor))
        return cls(grid, stencil, v, cls._auto_comparability(v))

    @classmethod
    def crystalline(
        cls,
        grid: Grid,
        direction_values: Sequence[float],
        stencil: Stencil = STENCIL16,
        comparability: float | None = None,
    ) -> "Anisotropy":
        """Spatially constant g given by one value per stencil direction."""
        dv = np.asarray(direction_values, dtype=np.float64)
        if dv.shape != (stencil.n_directions,):
            raise GridError(
                f"expected {stencil.n_directions} direction values, got {dv.shape}"
            )
        v = np.broadcast_to(dv, (grid.ny, grid.nx, stencil.n_directions)).copy()
        c = cls._auto_comparability(v) if comparability is None else float(comparability)
        return cls(grid, stencil, v, c)

    @classmethod
    def from_norm(
        cls,
        grid: Grid,
        norm: Callable[[np.ndarray], np.ndarray],
        stencil: Stencil = STENCIL16,
        comparability: float | None = None,
    ) -> "Anisotropy":
        """Sample an even norm-like function on the stencil's unit directions."""
        dv = np.asarray([float(norm(u)) for u in stencil.unit_directions])
        return cls.crystalline(grid, dv, stencil, comparability)

    @classmethod
    def isotropic_field(
        cls,
        grid: Grid,
        field: np.ndarray | ScalarField,
        stencil: Stencil = STENCIL16,
        comparability: float | None = None,
    ) -> "Anisotropy":
        """Direction-independent g(x) given by a per-cell positive array."""
        arr = field.values if isinstance(field, ScalarField) else np.asarray(field, np.float64)
        if arr.shape != (grid.ny, grid.nx):
            raise GridError(f"field shape {arr.shape} does not match grid")
        v = np.repeat(arr[:, :, None], stencil.n_directions, axis=2)
        c = cls._auto_comparability(v) if comparability is None else float(comparability)
        return cls(grid, stencil, v, c)


def make_disk(grid: Grid, center: tuple[float, float], radius: float) -> CellSet:
    """Cells whose centers lie in the closed disk of the given center/radius."""
    if radius <= 0:
        raise GridError(f"disk radius must be positive, got {radius!r}")
    X, Y = grid.cell_centers()
    mask = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius * radius
    if not mask.any():
        raise GridError(
            f"disk of radius {radius} at {center} rasterizes to the empty set "
            f"on this grid (h = {grid.h})"
        )
    return CellSet(grid, mask)


def make_annulus(
    grid: Grid, center: tuple[float, float], inner: float, outer: float
) -> CellSet:
    """Cells with center distance in ``(inner, outer]`` from the given center."""
    if not 0 <= inner < outer:
        raise GridError(f"annulus radii must satisfy 0 <= inner < outer, got {inner}, {outer}")
    X, Y = grid.cell_centers()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    mask = (r2 <= outer * outer) & (r2 > inner * inner)
    if not mask.any():
        raise GridError("annulus rasterizes to the empty set on this grid")
    return CellSet(grid, mask)


def connected_components(cells: CellSet) -> list[CellSet]:
    """4-connected components, ordered by their first cell in raster order."""
    labels, n = ndimage.label(cells.mask, structure=_FOUR_CONN)
    return [CellSet(cells.grid, labels == lab) for lab in range(1, n + 1)]


def subsets_of(cells: CellSet, cap: int = 20) -> Iterator[CellSet]:
    """Enumerate all nonempty subsets of ``cells`` (2^count - 1 of them).

    Subsets come in counting order of the bitmask whose bit b corresponds to
    the b-th member cell in row-major order.  Refuses sets larger than ``cap``.
    """
    m = cells.count
    if m > cap:
        raise GridError(f"subset enumeration capped at {cap} cells, set has {m}")
    flat = cells.flat_indices()
    ny, nx = cells.grid.ny, cells.grid.nx
    for bits in range(1, 1 << m):
        mask = np.zeros(ny * nx, dtype=bool)
        mask[flat[np.nonzero([(bits >> b) & 1 for b in range(m)])[0]]] = True
        yield CellSet(cells.grid, mask.reshape(ny, nx))
