"""Dinic max-flow on real capacities.

Arcs are stored in pairs (arc 2a, its reverse 2a+1) and compacted to CSR
before solving, so the hot loops run over flat int/float arrays.  The
kernels compile with numba when available and fall back to plain Python
otherwise (slow but correct, keeps the package importable without a JIT).

Capacities below ``eps = 1e-12 * max_capacity`` are treated as exhausted;
the minimum cut reported by :meth:`FlowNetwork.source_side` is the set of
nodes residually reachable from the source, i.e. the inclusion-minimal
source side, which makes results deterministic.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


__all__ = ["FlowNetwork"]


@njit(cache=True)
def _dinic(nn, s, t, ptr, to, rev, cap, eps):
    level = np.empty(nn, np.int64)
    it = np.empty(nn, np.int64)
    queue = np.empty(nn, np.int64)
    path_nodes = np.empty(nn + 1, np.int64)
    path_arcs = np.empty(nn + 1, np.int64)
    total = 0.0
    while True:
        for i in range(nn):
            level[i] = -1
        level[s] = 0
        queue[0] = s
        qh, qt = 0, 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            for a in range(ptr[u], ptr[u + 1]):
                v = to[a]
                if cap[a] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            return total
        for i in range(nn):
            it[i] = ptr[i]
        while True:
            v = s
            depth = 0
            path_nodes[0] = s
            found = False
            while True:
                if v == t:
                    found = True
                    break
                a = it[v]
                moved = False
                w = -1
                while a < ptr[v + 1]:
                    w = to[a]
                    if cap[a] > eps and level[w] == level[v] + 1:
                        moved = True
                        break
                    a += 1
                it[v] = a
                if moved:
                    path_arcs[depth] = a
                    depth += 1
                    path_nodes[depth] = w
                    v = w
                else:
                    if v == s:
                        break
                    level[v] = -1
                    depth -= 1
                    v = path_nodes[depth]
                    it[v] += 1
            if not found:
                break
            bottleneck = np.inf
            for d in range(depth):
                c = cap[path_arcs[d]]
                if c < bottleneck:
                    bottleneck = c
            for d in range(depth):
                a = path_arcs[d]
                cap[a] -= bottleneck
                cap[rev[a]] += bottleneck
            total += bottleneck
    return total


@njit(cache=True)
def _reachable(nn, s, ptr, to, cap, eps):
    seen = np.zeros(nn, np.bool_)
    queue = np.empty(nn, np.int64)
    seen[s] = True
    queue[0] = s
    qh, qt = 0, 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for a in range(ptr[u], ptr[u + 1]):
            v = to[a]
            if cap[a] > eps and not seen[v]:
                seen[v] = True
                queue[qt] = v
                qt += 1
    return seen


class FlowNetwork:
    """Directed network with float capacities and paired residual arcs."""

    def __init__(self, n_nodes: int):
        if n_nodes < 2:
            raise ValueError(f"flow network needs at least 2 nodes, got {n_nodes}")
        self.n_nodes = int(n_nodes)
        self._tails: list[np.ndarray] = []
        self._heads: list[np.ndarray] = []
        self._caps: list[np.ndarray] = []
        self._solved = False
        self._flow = 0.0
        self._eps = 0.0
        self._source = -1

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> None:
        """Add the arc u -> v with capacity ``cap`` and its reverse with ``rev_cap``."""
        self.add_edges(
            np.array([u], np.int64),
            np.array([v], np.int64),
            np.array([cap]),
            np.array([rev_cap]) if rev_cap else None,
        )

    def add_edges(
        self,
        u: np.ndarray,
        v: np.ndarray,
        cap: np.ndarray,
        rev_cap: np.ndarray | None = None,
    ) -> None:
        """Bulk variant of :meth:`add_edge` over parallel arrays."""
        if self._solved:
            raise RuntimeError("network already solved; build a new one to change arcs")
        u = np.asarray(u, np.int64)
        v = np.asarray(v, np.int64)
        cap = np.asarray(cap, np.float64)
        if rev_cap is None:
            rev_cap = np.zeros_like(cap)
        else:
            rev_cap = np.asarray(rev_cap, np.float64)
        if not (u.shape == v.shape == cap.shape == rev_cap.shape):
            raise ValueError("edge arrays must have identical shapes")
        if u.size == 0:
            return
        bad = (u < 0) | (u >= self.n_nodes) | (v < 0) | (v >= self.n_nodes) | (u == v)
        if bad.any():
            raise ValueError("edge endpoints out of range or self-loop")
        if (cap < 0).any() or (rev_cap < 0).any():
            raise ValueError("capacities must be nonnegative")
        # interleave forward/reverse so arc 2a+1 is the pair of arc 2a
        n = u.size
        tails = np.empty(2 * n, np.int64)
        heads = np.empty(2 * n, np.int64)
        caps = np.empty(2 * n, np.float64)
        tails[0::2], tails[1::2] = u, v
        heads[0::2], heads[1::2] = v, u
        caps[0::2], caps[1::2] = cap, rev_cap
        self._tails.append(tails)
        self._heads.append(heads)
        self._caps.append(caps)

    def _build_csr(self):
        if self._tails:
            tail = np.concatenate(self._tails)
            head = np.concatenate(self._heads)
            cap = np.concatenate(self._caps)
        else:
            tail = np.empty(0, np.int64)
            head = np.empty(0, np.int64)
            cap = np.empty(0, np.float64)
        order = np.argsort(tail, kind="stable")
        slot = np.empty_like(order)
        slot[order] = np.arange(order.size)
        pair = np.arange(order.size) ^ 1
        self._to = head[order]
        self._cap = cap[order]
        self._rev = slot[pair][order]
        counts = np.bincount(tail, minlength=self.n_nodes)
        self._ptr = np.zeros(self.n_nodes + 1, np.int64)
        np.cumsum(counts, out=self._ptr[1:])
        self._eps = 1e-12 * float(cap.max()) if cap.size else 0.0

    def max_flow(self, s: int, t: int) -> float:
        """Run Dinic from s to t.  Repeated calls return the cached value."""
        if not (0 <= s < self.n_nodes and 0 <= t < self.n_nodes):
            raise ValueError("terminal ids out of range")
        if s == t:
            raise ValueError("source and sink must differ")
        if self._solved:
            if (s, t) != self._terminals:
                raise RuntimeError("network was solved for different terminals")
            return self._flow
        self._build_csr()
        self._flow = float(_dinic(self.n_nodes, s, t, self._ptr, self._to, self._rev, self._cap, self._eps))
        self._solved = True
        self._terminals = (s, t)
        self._source = s
        return self._flow

    def source_side(self) -> np.ndarray:
        """Boolean per-node membership of the minimal min-cut source side."""
        if not self._solved:
            raise RuntimeError("call max_flow first")
        return np.asarray(_reachable(self.n_nodes, self._source, self._ptr, self._to, self._cap, self._eps))
