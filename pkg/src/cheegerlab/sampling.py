"""Candidate subset streams for empirical supremum estimation.

``sample_subsets`` yields proper nonempty subsets of a parent set.  When
the parent is small enough that all of them fit in the budget the stream
is exhaustive (and the estimated supremum is exact); otherwise it mixes

* every boundary cell as a singleton (the atoms that usually dominate
  boundary/interior ratios),
* half-space cuts at axis and diagonal angles, thresholded at the sampled
  projection values,
* random 4-connected blobs grown by probabilistic dilation, with
  log-uniform target sizes.

Each random sample draws its own generator seeded by (seed, index), so the
stream is reproducible and independent of consumption order.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np
from scipy import ndimage

from .grid import CellSet, subsets_of

__all__ = ["sample_subsets", "sampling_mode"]

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_CUT_DIRECTIONS = (
    (1.0, 0.0),
    (0.0, 1.0),
    (math.sqrt(0.5), math.sqrt(0.5)),
    (math.sqrt(0.5), -math.sqrt(0.5)),
)


def sampling_mode(parent: CellSet, budget: int) -> str:
    """"exhaustive" when every proper nonempty subset fits in the budget."""
    m = parent.count
    if m <= 1:
        return "exhaustive"
    return "exhaustive" if m <= 40 and (1 << m) - 2 <= budget else "sampled"


def sample_subsets(parent: CellSet, budget: int, seed: int = 0) -> Iterator[CellSet]:
    """Yield up to ``budget`` proper nonempty subsets of ``parent``."""
    if budget < 1:
        raise ValueError(f"sampling budget must be >= 1, got {budget}")
    if parent.count <= 1:
        return  # no proper nonempty subsets exist
    if sampling_mode(parent, budget) == "exhaustive":
        full = parent.count
        for sub in subsets_of(parent, cap=40):
            if sub.count != full:
                yield sub
        return

    # Each family gets a slice of the budget so a large boundary rim cannot
    # starve the half-cut and blob streams.
    produced = 0
    for sub in _boundary_singletons(parent, max(1, budget // 3)):
        if produced >= budget:
            return
        yield sub
        produced += 1
    for sub in _half_cuts(parent, max(1, (budget - produced) // 2)):
        if produced >= budget:
            return
        yield sub
        produced += 1
    index = 0
    while produced < budget:
        rng = np.random.default_rng((int(seed), index))
        index += 1
        sub = _random_blob(parent, rng)
        if sub is not None:
            yield sub
            produced += 1
        if index > 20 * budget:  # degenerate parents cannot fill the budget
            return


def _boundary_singletons(parent: CellSet, quota: int) -> Iterator[CellSet]:
    interior = ndimage.binary_erosion(parent.mask, structure=_CROSS, border_value=0)
    rim = parent.mask & ~interior
    grid = parent.grid
    flats = np.flatnonzero(rim.ravel())
    if flats.size > quota:  # subsample the rim evenly, keeping raster order
        pick = np.unique(np.round(np.linspace(0, flats.size - 1, quota)).astype(int))
        flats = flats[pick]
    for flat in flats:
        yield CellSet.from_flat(grid, [int(flat)])


def _half_cuts(parent: CellSet, quota: int) -> Iterator[CellSet]:
    grid = parent.grid
    X, Y = grid.cell_centers()
    per_dir = max(1, quota // len(_CUT_DIRECTIONS))
    full = parent.count
    for ux, uy in _CUT_DIRECTIONS:
        proj = X * ux + Y * uy
        levels = np.unique(proj[parent.mask])
        if levels.size < 2:
            continue
        thresholds = levels[:-1]  # cutting at the last level keeps everything
        if thresholds.size > per_dir:
            pick = np.unique(np.round(np.linspace(0, thresholds.size - 1, per_dir)).astype(int))
            thresholds = thresholds[pick]
        for t in thresholds:
            mask = parent.mask & (proj <= t)
            n = int(mask.sum())
            if 0 < n < full:
                yield CellSet(grid, mask)


def _random_blob(parent: CellSet, rng: np.random.Generator) -> CellSet | None:
    flat = parent.flat_indices()
    total = flat.size
    target = int(round(math.exp(rng.uniform(0.0, math.log(total)))))
    target = min(target, total - 1)
    if target < 1:
        return None
    mask = np.zeros(parent.grid.n_cells, dtype=bool)
    mask[flat[rng.integers(total)]] = True
    mask = mask.reshape(parent.grid.ny, parent.grid.nx)
    size = 1
    while size < target:
        ring = ndimage.binary_dilation(mask, structure=_CROSS) & parent.mask & ~mask
        ridx = np.flatnonzero(ring.ravel())
        if ridx.size == 0:
            break
        keep = ridx[rng.random(ridx.size) < 0.75]
        if keep.size == 0:
            keep = ridx[[rng.integers(ridx.size)]]
        if keep.size > target - size:
            keep = rng.choice(keep, size=target - size, replace=False)
        mask.ravel()[keep] = True
        size += keep.size
    if size >= total:
        return None
    return CellSet(parent.grid, mask)
