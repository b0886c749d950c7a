"""First passage times and geodesics from the origin.

Shortest paths use A* with the heuristic ``a * graph_distance(v, target)``,
which is consistent because every edge costs at least ``a`` and moves the
graph distance by at most one.  The search keeps expanding until every node
with ``g + h <= T`` is closed; all nodes on every geodesic then carry exact
labels, and the returned geodesic is traced backwards from the target picking
the lexicographically smallest ``(m, n)`` among tight predecessors.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np

from .lattice import (
    Edge,
    LatticePoint,
    NoiseField,
    WeightParams,
    Window,
    edge_half,
    edge_weight,
    graph_distance,
)

BRUTE_FORCE_MAX_EDGES = 16


@dataclass(frozen=True)
class PathRecord:
    vertices: tuple

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("a path needs at least one vertex")
        for u, v in zip(self.vertices, self.vertices[1:]):
            if abs(u[0] - v[0]) != 1 or abs(u[1] - v[1]) != 1:
                raise ValueError(f"{tuple(u)} -> {tuple(v)} is not a lattice step")

    def __len__(self):
        return len(self.vertices) - 1

    def edges(self) -> list[Edge]:
        return [Edge.between(u, v) for u, v in zip(self.vertices, self.vertices[1:])]

    def weight(self, f: NoiseField, wp: WeightParams) -> float:
        total = 0.0
        for e in self.edges():
            total += edge_weight(f, e, wp)
        return total


@dataclass(frozen=True)
class PassageResult:
    time: float
    geodesic: PathRecord
    window_used: Window
    expanded: int = 0

    @property
    def target(self) -> LatticePoint:
        return self.geodesic.vertices[-1]


def safety_window(target, wp: WeightParams) -> Window:
    """Box of graph radius ``ceil((b/a) * L0)`` around the origin.

    A path with more edges than that costs more than ``b * L0``, the price of
    any minimal-edge-count path, so it cannot be a geodesic.
    """
    m, n = target
    L0 = max(abs(m), abs(n))
    if L0 == 0:
        return Window(0, 0, 0, 0)
    R = math.ceil(wp.b / wp.a * L0)
    return Window(-R, R, -R, R)


# -- A* kernel ------------------------------------------------------------------

@numba.njit(cache=True)
def _edge_cost(key, mirrored, thr, a, b, m, n, d):
    if edge_half(key, m, n, d, mirrored) < thr:
        return a
    return b


@numba.njit(cache=True)
def _astar(key, mirrored, thr, a, b, m_min, m_max, n_min, n_max, tm, tn,
           g, seen, closed, stamp, eps):
    W = (m_max - m_min) // 2 + 1
    dm = np.array([-1, 1, -1, 1])
    dn = np.array([1, 1, -1, -1])

    src = (0 - n_min) * W + ((0 - m_min) >> 1)
    g[src] = 0.0
    seen[src] = stamp
    h0 = a * max(abs(tm), abs(tn))
    heap = [(h0, np.int64(0), np.int64(0))]
    T = np.inf
    expanded = 0
    while len(heap) > 0:
        f, m, n = heapq.heappop(heap)
        if f > T + eps:
            break
        idx = (n - n_min) * W + ((m - m_min) >> 1)
        if closed[idx] == stamp:
            continue
        closed[idx] = stamp
        expanded += 1
        gu = g[idx]
        if m == tm and n == tn:
            T = gu
        for k in range(4):
            vm = m + dm[k]
            vn = n + dn[k]
            if vm < m_min or vm > m_max or vn < n_min or vn > n_max:
                continue
            vidx = (vn - n_min) * W + ((vm - m_min) >> 1)
            if closed[vidx] == stamp:
                continue
            if dn[k] > 0:
                w = _edge_cost(key, mirrored, thr, a, b, m, n, dm[k])
            else:
                w = _edge_cost(key, mirrored, thr, a, b, vm, vn, -dm[k])
            gv = gu + w
            if seen[vidx] != stamp or gv < g[vidx]:
                seen[vidx] = stamp
                g[vidx] = gv
                hv = a * max(abs(tm - vm), abs(tn - vn))
                heapq.heappush(heap, (gv + hv, vm, vn))

    # trace back from the target through tight, closed predecessors
    path_m = [tm]
    path_n = [tn]
    m = tm
    n = tn
    while m != 0 or n != 0:
        idx = (n - n_min) * W + ((m - m_min) >> 1)
        gv = g[idx]
        best_m = 0
        best_n = 0
        found = False
        # lexicographic order on (m, n): left column first, lower level first
        for k in (2, 0, 3, 1):
            um = m + dm[k]
            un = n + dn[k]
            if um < m_min or um > m_max or un < n_min or un > n_max:
                continue
            uidx = (un - n_min) * W + ((um - m_min) >> 1)
            if closed[uidx] != stamp:
                continue
            if dn[k] < 0:
                w = _edge_cost(key, mirrored, thr, a, b, um, un, -dm[k])
            else:
                w = _edge_cost(key, mirrored, thr, a, b, m, n, dm[k])
            if abs(g[uidx] + w - gv) <= eps:
                best_m = um
                best_n = un
                found = True
                break
        if not found:
            raise RuntimeError("geodesic trace-back failed")
        m = best_m
        n = best_n
        path_m.append(m)
        path_n.append(n)
    return T, np.array(path_m[::-1]), np.array(path_n[::-1]), expanded


class _Workspace:
    """Reusable label arrays; stamps avoid clearing between searches."""

    def __init__(self):
        self.size = 0
        self.stamp = 0
        self.g = self.seen = self.closed = None

    def take(self, size: int):
        if size > self.size:
            self.g = np.empty(size, dtype=np.float64)
            self.seen = np.zeros(size, dtype=np.int32)
            self.closed = np.zeros(size, dtype=np.int32)
            self.size = size
            self.stamp = 0
        self.stamp += 1
        if self.stamp >= 2**31 - 1:
            self.seen[:] = 0
            self.closed[:] = 0
            self.stamp = 1
        return self.g, self.seen, self.closed, self.stamp


_WS = _Workspace()


def first_passage_time(target, f: NoiseField, wp: WeightParams, window: Window | None = None) -> PassageResult:
    """Exact ``T(0, target)`` over paths inside ``window`` (default: the safety window)."""
    tm, tn = int(target[0]), int(target[1])
    LatticePoint.checked(tm, tn)
    w = safety_window((tm, tn), wp) if window is None else window
    if (0, 0) not in w or (tm, tn) not in w:
        raise ValueError(f"window {w} must contain the origin and {(tm, tn)}")
    rows = w.n_max - w.n_min + 1
    cols = (w.m_max - w.m_min) // 2 + 1
    g, seen, closed, stamp = _WS.take(rows * cols)
    eps = 1e-9 * wp.b * (1 + graph_distance((0, 0), (tm, tn)))
    T, pm, pn, expanded = _astar(
        f.key, f.mirrored, np.uint64(wp.threshold), float(wp.a), float(wp.b),
        w.m_min, w.m_max, w.n_min, w.n_max, tm, tn,
        g, seen, closed, stamp, eps,
    )
    if not np.isfinite(T):
        raise ValueError(f"{(tm, tn)} is unreachable inside {w}")
    path = PathRecord(tuple(LatticePoint(int(m), int(n)) for m, n in zip(pm, pn)))
    # re-summing along the returned path keeps the invariant exact in floating point
    return PassageResult(path.weight(f, wp), path, w, int(expanded))


def brute_force_passage_time(target, f: NoiseField, wp: WeightParams, w: Window) -> float:
    """Minimum weight over all simple paths in a tiny window, by enumeration.

    Positive weights mean a non-simple walk never beats the simple path it
    contains, so simple paths suffice.
    """
    edges = w.edges()
    if len(edges) > BRUTE_FORCE_MAX_EDGES:
        raise ValueError(f"window has {len(edges)} edges; brute force allows {BRUTE_FORCE_MAX_EDGES}")
    tgt = (int(target[0]), int(target[1]))
    if (0, 0) not in w or tgt not in w:
        raise ValueError("window must contain the origin and the target")
    adj: dict = {}
    for e in edges:
        u, v = (e.low.m, e.low.n), (e.high.m, e.high.n)
        c = edge_weight(f, e, wp)
        adj.setdefault(u, []).append((v, c))
        adj.setdefault(v, []).append((u, c))

    best = math.inf
    visited = {(0, 0)}

    def walk(u, cost):
        nonlocal best
        if u == tgt:
            best = min(best, cost)
            return
        for v, c in adj.get(u, ()):
            if v not in visited:
                visited.add(v)
                walk(v, cost + c)
                visited.remove(v)

    walk((0, 0), 0.0)
    return best
