"""Minimizers of the weighted ratio P_g(E) / V_f(E)^(1/alpha) over subsets.

Two routes to the optimum:

* :func:`oracle_solve` enumerates every nonempty subset of the domain
  (vectorized over bitmasks); exact, for small domains and for testing.
* :func:`dinkelbach_solve` iterates parametric min-cut subproblems
  ``min_E P_g(E) - lam_k * mu_k * V_f(E)``.  For alpha = 1 (mu = 1) this is
  the classical exact scheme: the ratio of each accepted iterate strictly
  decreases and the final one is within tolerance of the fixed point.  For
  alpha > 1 the volume term is linearized at a descending ladder of
  tangent volumes (mu = V_t^(1/alpha - 1) / alpha), single cells join the
  candidate pool, and a new set is accepted only if its true ratio
  improves, so the ratio still never increases; the scheme then stops at a
  local fixed point, which a small-domain oracle cross-check can audit
  (see ``SolveOptions.oracle_cap``).

Cut encoding: cell p carries theta_p = b_p - lam * mu * f_p * h^2, where
b_p is its crossing cost to the outside of the domain.  Positive theta
becomes an arc to the sink, negative theta an arc from the source (with
the constant sum of negative parts tracked separately), and adjacent cells
get symmetric arcs with the crossing cost, so for every subset E the cut
value equals the subproblem energy minus that constant.  Minimal source
sides make the returned minimizers deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Anisotropy, CellSet, GridError, ScalarField, connected_components
from .maxflow import FlowNetwork
from .measures import (
    _midpoint_g,
    crofton_weights,
    domain_crossing_arcs,
    weighted_perimeter,
    weighted_volume,
)

__all__ = [
    "SolverError",
    "CheegerProblem",
    "CheegerResult",
    "CutGraph",
    "ratio_of",
    "oracle_solve",
    "build_cut_graph",
    "max_flow",
    "dinkelbach_solve",
    "SolveOptions",
    "solve",
]

_N = 2  # planar grids; the admissible volume exponents are [1, n/(n-1))


class SolverError(ValueError):
    """Invalid problem data or solver misuse."""


@dataclass(frozen=True, eq=False)
class CheegerProblem:
    """Domain, volume weight f, surface weight g and volume exponent alpha."""

    domain: CellSet
    f: ScalarField
    g: Anisotropy
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.domain.is_empty:
            raise SolverError("domain must be nonempty")
        if self.f.grid != self.domain.grid or self.g.grid != self.domain.grid:
            raise SolverError("domain, f and g must share one grid")
        a = float(self.alpha)
        hi = _N / (_N - 1)
        if not (1.0 <= a < hi):
            raise SolverError(f"alpha must lie in [1, {hi}), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)


def ratio_of(problem: CheegerProblem, cells: CellSet) -> float:
    """P_g(E) / V_f(E)^(1/alpha), recomputed from the measures module."""
    if cells.is_empty:
        raise SolverError("ratio of the empty set is undefined")
    vol = weighted_volume(cells, problem.f)
    per = weighted_perimeter(cells, problem.g)
    return per / vol ** (1.0 / problem.alpha)


@dataclass(eq=False)
class CheegerResult:
    """Solver output.  ``ratio`` always comes from a fresh measures recompute."""

    minimizer: CellSet
    ratio: float
    lambda_trace: list[float]
    volume_trace: list[float]
    perimeter_trace: list[float]
    subproblem_count: int
    method: str
    converged: bool
    components: tuple[CellSet, ...] = ()
    component_ratios: tuple[float, ...] = ()
    oracle_gap: float | None = None


def _with_components(problem: CheegerProblem, result: CheegerResult) -> CheegerResult:
    comps = tuple(connected_components(result.minimizer))
    result.components = comps
    result.component_ratios = tuple(ratio_of(problem, c) for c in comps)
    return result


def oracle_solve(
    problem: CheegerProblem, *, connected_only: bool = False, cap: int = 20
) -> CheegerResult:
    """Exact minimizer by enumeration of all nonempty subsets of the domain.

    Ties are broken by (ratio, cell count, bitmask counting order), where
    bit b of the mask is the b-th domain cell in row-major order; the
    minimizer is therefore unique and deterministic.  Domains larger than
    ``cap`` cells are refused.
    """
    domain = problem.domain
    m = domain.count
    if m > cap or m > 21:  # hard ceiling keeps the bitmask arrays in memory
        raise SolverError(f"oracle enumeration capped at {min(cap, 21)} cells, domain has {m}")
    cells, arcs, bnd = domain_crossing_arcs(domain, problem.g)
    n_subsets = (1 << m) - 1
    masks = np.arange(1, n_subsets + 1, dtype=np.uint32)
    bits = ((masks[None, :] >> np.arange(m, dtype=np.uint32)[:, None]) & 1).astype(bool)

    h2 = domain.grid.cell_area
    vol_cell = problem.f.values.ravel()[cells] * h2
    volumes = vol_cell @ bits
    perims = bnd @ bits
    for u, v, w in arcs:
        if u.size:
            perims += w @ (bits[u] & ~bits[v])
    ratios = perims / volumes ** (1.0 / problem.alpha)

    if connected_only:
        ratios = np.where(_connected_flags(domain, bits), ratios, np.inf)

    best = int(np.argmin(ratios))  # argmin takes the first = smallest mask
    rmin = ratios[best]
    tied = np.flatnonzero(ratios == rmin)
    if tied.size > 1:
        sizes = bits[:, tied].sum(axis=0)
        tied = tied[sizes == sizes.min()]
        best = int(tied[0])  # masks ascending = counting order

    minimizer = CellSet.from_flat(domain.grid, cells[bits[:, best]])
    result = CheegerResult(
        minimizer=minimizer,
        ratio=ratio_of(problem, minimizer),
        lambda_trace=[float(rmin)],
        volume_trace=[float(volumes[best])],
        perimeter_trace=[float(perims[best])],
        subproblem_count=n_subsets,
        method="oracle",
        converged=True,
    )
    return _with_components(problem, result)


def _connected_flags(domain: CellSet, bits: np.ndarray) -> np.ndarray:
    """4-connectivity of each candidate subset, as a bool per bitmask column."""
    m = bits.shape[0]
    cells = domain.flat_indices()
    nx = domain.grid.nx
    pos = {int(c): b for b, c in enumerate(cells)}
    adj = [0] * m
    for b, c in enumerate(cells):
        i, j = int(c) % nx, int(c) // nx
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = pos.get((j + dj) * nx + (i + di)) if 0 <= i + di < nx else None
            if q is not None:
                adj[b] |= 1 << q
    flags = np.empty(bits.shape[1], dtype=bool)
    for idx in range(bits.shape[1]):
        mask = 0
        col = bits[:, idx]
        for b in range(m):
            if col[b]:
                mask |= 1 << b
        seed = mask & -mask
        seen = seed
        frontier = seed
        while frontier:
            nxt = 0
            b = frontier
            while b:
                low = b & -b
                nxt |= adj[low.bit_length() - 1]
                b ^= low
            nxt &= mask & ~seen
            seen |= nxt
            frontier = nxt
        flags[idx] = seen == mask
    return flags


@dataclass(eq=False)
class CutGraph:
    """Parametric min-cut encoding of one linearized subproblem."""

    problem: CheegerProblem
    lam: float
    volume_coeff: float
    network: FlowNetwork
    cells: np.ndarray
    source: int
    sink: int
    offset: float  # sum of negative theta parts; energy = cut value + offset

    def energy_of(self, cells: CellSet) -> float:
        """Subproblem energy P_g(E) - lam * mu * V_f(E), from measures."""
        if cells.is_empty:
            return 0.0
        return weighted_perimeter(cells, self.problem.g) - self.lam * self.volume_coeff * weighted_volume(cells, self.problem.f)


def build_cut_graph(
    problem: CheegerProblem, lam: float, volume_coeff: float = 1.0
) -> CutGraph:
    """Encode min over subsets E of P_g(E) - lam * volume_coeff * V_f(E).

    For every subset the cut separating {source, E} from the rest costs the
    subproblem energy minus the stored ``offset``, so a minimum cut yields
    the optimal subset (empty when nothing has negative energy).
    """
    if not (math.isfinite(lam) and lam >= 0):
        raise SolverError(f"cut parameter lam must be finite and >= 0, got {lam!r}")
    if not (math.isfinite(volume_coeff) and volume_coeff > 0):
        raise SolverError(f"volume coefficient must be positive, got {volume_coeff!r}")
    domain = problem.domain
    cells, arcs, bnd = domain_crossing_arcs(domain, problem.g)
    m = cells.size
    s, t = m, m + 1
    net = FlowNetwork(m + 2)

    half = problem.g.stencil.n_directions // 2
    for k in range(half):
        u, v, w = arcs[k]
        if u.size:
            # even g makes the opposite direction's cost identical
            net.add_edges(u, v, w, w)

    theta = bnd - lam * volume_coeff * problem.f.values.ravel()[cells] * domain.grid.cell_area
    pos_part = theta > 0
    neg_part = theta < 0
    nodes = np.arange(m, dtype=np.int64)
    if pos_part.any():
        net.add_edges(nodes[pos_part], np.full(pos_part.sum(), t, np.int64), theta[pos_part])
    if neg_part.any():
        net.add_edges(np.full(neg_part.sum(), s, np.int64), nodes[neg_part], -theta[neg_part])
    offset = float(theta[neg_part].sum())
    return CutGraph(problem, float(lam), float(volume_coeff), net, cells, s, t, offset)


def max_flow(graph: CutGraph) -> tuple[float, CellSet]:
    """Solve the cut subproblem: returns (flow value, optimal subset).

    The subset is the minimal source side, which is empty exactly when no
    subset has energy below zero.
    """
    value = graph.network.max_flow(graph.source, graph.sink)
    side = graph.network.source_side()
    chosen = graph.cells[side[: graph.cells.size]]
    return value, CellSet.from_flat(graph.problem.domain.grid, chosen)


def _tangent_volumes(alpha: float, vol: float, floor: float) -> list[float]:
    """Tangent points for the concave volume term, largest first.

    For alpha == 1 the linearization coefficient does not depend on the
    tangent point, so one rung suffices.  For alpha > 1 the ladder descends
    geometrically to the smallest single-cell volume: a tangent taken at
    the current volume prices small sets so cheaply that a much smaller
    optimum can hide behind the empty set, and a lower tangent exposes it.
    """
    if alpha == 1.0:
        return [vol]
    rungs = [vol]
    v = vol / 4.0
    while v > floor * (1.0 + 1e-12):
        rungs.append(v)
        v /= 4.0
    rungs.append(floor)
    return rungs


def _best_singleton(problem: CheegerProblem) -> tuple[float, CellSet, float, float]:
    """Best single-cell subset of the domain by true ratio, in closed form.

    A singleton crosses every stencil arc, so its perimeter is
    ``h * sum_k w_k * g_mid(p, e_k)`` and all ratios come out of one
    vectorized pass.  The cut chain can jump from the empty set straight to
    a cluster and never isolate a cheap cell, so for alpha > 1 this serves
    as an extra candidate when the ladder stalls.
    """
    g = problem.g
    grid = g.grid
    w = crofton_weights(g.stencil)
    per = np.zeros((grid.ny, grid.nx))
    for k, (dx, dy) in enumerate(g.stencil.offsets):
        per += w[k] * _midpoint_g(g, k, dx, dy)
    per *= grid.h
    vol = problem.f.values * grid.cell_area
    ratio = np.where(problem.domain.mask, per / vol ** (1.0 / problem.alpha), np.inf)
    j, i = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
    mask = np.zeros_like(problem.domain.mask)
    mask[j, i] = True
    return float(ratio[j, i]), CellSet(grid, mask), float(vol[j, i]), float(per[j, i])


def dinkelbach_solve(
    problem: CheegerProblem, *, tol: float = 1e-9, max_iter: int = 50
) -> CheegerResult:
    """Parametric-cut iteration on the ratio, started from the whole domain.

    For alpha == 1 this is the classic exact scheme: stop once the optimal
    linearized energy at the current lam is >= -tol.  For alpha > 1 each
    iteration solves cuts for the whole tangent ladder, keeps the candidate
    whose recomputed true ratio improves the most, and once no cut improves
    falls back on the best single cell (see :func:`_best_singleton`) before
    declaring a fixed point; acceptance always requires strict true-ratio
    descent, so the trace is monotone either way.  Exhausting ``max_iter``
    returns a result flagged ``converged=False``.
    """
    if tol < 0:
        raise SolverError(f"tolerance must be >= 0, got {tol!r}")
    if max_iter < 1:
        raise SolverError(f"max_iter must be >= 1, got {max_iter!r}")
    inv_alpha = 1.0 / problem.alpha
    current = problem.domain
    vol = weighted_volume(current, problem.f)
    per = weighted_perimeter(current, problem.g)
    lam = per / vol**inv_alpha
    lams, vols, pers = [lam], [vol], [per]
    vol_floor = float(problem.f.values.min()) * problem.domain.grid.cell_area
    single = _best_singleton(problem) if problem.alpha > 1.0 else None
    n_sub = 0
    converged = False
    for _ in range(max_iter):
        best = None  # (lam_new, candidate, vol_new, per_new) over the ladder
        for v_t in _tangent_volumes(problem.alpha, vol, vol_floor):
            coeff = v_t ** (inv_alpha - 1.0) * inv_alpha  # 1.0 when alpha == 1
            graph = build_cut_graph(problem, lam, coeff)
            _, candidate = max_flow(graph)
            n_sub += 1
            if candidate.is_empty:
                if problem.alpha == 1.0:
                    break  # exact: no subset has negative energy
                continue
            vol_new = weighted_volume(candidate, problem.f)
            per_new = weighted_perimeter(candidate, problem.g)
            energy = per_new - lam * coeff * vol_new
            lam_new = per_new / vol_new**inv_alpha
            if problem.alpha == 1.0 and energy >= -tol:
                break  # exact Dinkelbach termination
            if lam_new < lam and (best is None or lam_new < best[0]):
                best = (lam_new, candidate, vol_new, per_new)
            if problem.alpha == 1.0:
                break
        if best is None and single is not None and single[0] < lam * (1.0 - 1e-12):
            best = single
        if best is None:
            converged = True
            break
        lam, current, vol, per = best
        lams.append(lam)
        vols.append(vol)
        pers.append(per)
    result = CheegerResult(
        minimizer=current,
        ratio=ratio_of(problem, current),
        lambda_trace=lams,
        volume_trace=vols,
        perimeter_trace=pers,
        subproblem_count=n_sub,
        method="dinkelbach",
        converged=converged,
    )
    return _with_components(problem, result)


@dataclass(frozen=True)
class SolveOptions:
    """Dispatch and tolerance knobs for :func:`solve`.

    ``method`` is "auto" (oracle when the domain fits in ``oracle_cap``
    cells, parametric cuts otherwise), "oracle" or "dinkelbach".  When the
    iterative route runs on a domain small enough for the oracle, the
    optimality gap of its answer is recorded in ``CheegerResult.oracle_gap``.
    """

    tol: float = 1e-9
    max_iter: int = 50
    oracle_cap: int = 16
    method: str = "auto"
    connected_only: bool = False

    def __post_init__(self) -> None:
        if self.method not in ("auto", "oracle", "dinkelbach"):
            raise SolverError(f"unknown method {self.method!r}")


def solve(problem: CheegerProblem, options: SolveOptions | None = None) -> CheegerResult:
    """Entry point: dispatch between the oracle and the parametric solver."""
    opt = options or SolveOptions()
    small = problem.domain.count <= opt.oracle_cap
    method = opt.method
    if method == "auto":
        method = "oracle" if small else "dinkelbach"
    if method == "oracle":
        return oracle_solve(problem, connected_only=opt.connected_only, cap=opt.oracle_cap)
    result = dinkelbach_solve(problem, tol=opt.tol, max_iter=opt.max_iter)
    if small:
        reference = oracle_solve(problem, cap=opt.oracle_cap)
        result.oracle_gap = result.ratio - reference.ratio
    return result
