"""Shared test helpers: independent oracles and the acceptance summary."""

from collections import deque

import numpy as np
import pytest

from cheegerlab import Anisotropy


def random_even_convex(grid, stencil, rng, comparability=2.0):
    """Random crystalline anisotropy: a support-function mixture.

    Sums a few slabs |u . w| onto the constant 1, which keeps the unit
    ball convex and the values inside [1, 1.8] for any draw.
    """
    u = stencil.unit_directions
    vals = np.full(stencil.n_directions, 1.0)
    for _ in range(2):
        theta = rng.uniform(0, np.pi)
        w = np.array([np.cos(theta), np.sin(theta)])
        vals = vals + rng.uniform(0.0, 0.4) * np.abs(u @ w)
    return Anisotropy.crystalline(grid, vals, stencil, comparability=comparability)


def flood_components(mask):
    """4-connected components by BFS, as sets of (j, i) pairs."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    out = []
    ny, nx = mask.shape
    for j0, i0 in zip(*np.nonzero(mask)):
        if seen[j0, i0]:
            continue
        comp = set()
        queue = deque([(int(j0), int(i0))])
        seen[j0, i0] = True
        while queue:
            j, i = queue.popleft()
            comp.add((j, i))
            for dj, di in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                q, p = j + dj, i + di
                if 0 <= q < ny and 0 <= p < nx and mask[q, p] and not seen[q, p]:
                    seen[q, p] = True
                    queue.append((q, p))
        out.append(frozenset(comp))
    return out


def ek_max_flow(n_nodes, edges, s, t):
    """Edmonds-Karp on a dense capacity matrix; the reference answer."""
    cap = np.zeros((n_nodes, n_nodes))
    for u, v, c, rc in edges:
        cap[u, v] += c
        cap[v, u] += rc
    flow = 0.0
    while True:
        parent = {s: None}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for v in range(n_nodes):
                if v not in parent and cap[u, v] > 1e-12:
                    parent[v] = u
                    queue.append(v)
        if t not in parent:
            return flow, set(parent)
        path = []
        v = t
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        push = min(cap[u, v] for u, v in path)
        for u, v in path:
            cap[u, v] -= push
            cap[v, u] += push
        flow += push


_ACCEPTANCE = []


class AcceptanceRecorder:
    def record(self, number, description, passed):
        _ACCEPTANCE.append((int(number), str(description), bool(passed)))
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, ok in sorted(_ACCEPTANCE):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number}: {verdict} - {description}")
