"""Geodesic decompositions: sub-optimal edges, x/y-traces and related bounds.

Strip rule: an edge between levels ``y`` and ``y + 1`` belongs to the strip
``R x [y, y + 1]`` whatever its orientation.  In each strip the edge with
the smallest midpoint column (earliest in path order on ties) is the one
non-repeated edge; every other edge of the path in that strip is repeated.
A b-edge is labelled ``SUBOPTIMAL_B`` even when it is also repeated.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fpp import PathRecord
from .lattice import Edge, NoiseField, WeightParams, edge_weight

log = logging.getLogger(__name__)


class EdgeClass(str, enum.Enum):
    OPTIMAL = "optimal"
    SUBOPTIMAL_B = "suboptimal_b"
    SUBOPTIMAL_REPEATED = "suboptimal_repeated"

    @property
    def suboptimal(self) -> bool:
        return self is not EdgeClass.OPTIMAL


class TraceConsistencyError(AssertionError):
    """The two routes to ``d_opt`` disagree."""


@dataclass(frozen=True)
class TraceDecomposition:
    x_intervals: tuple
    y_intervals: tuple
    classes: tuple
    retained: tuple  # path indices of edges kept as optimal

    @property
    def j1(self) -> int:
        return len(self.x_intervals)

    @property
    def j2(self) -> int:
        return len(self.y_intervals)

    @property
    def j(self) -> int:
        return max(self.j1, self.j2)

    @property
    def suboptimal_count(self) -> int:
        return sum(1 for c in self.classes if c.suboptimal)


def _edge_list(geodesic: PathRecord):
    vs = geodesic.vertices
    return list(zip(vs, vs[1:]))


def classify_edges(geodesic: PathRecord, f: NoiseField, wp: WeightParams) -> list[EdgeClass]:
    steps = _edge_list(geodesic)
    leftmost: dict[int, tuple] = {}
    for i, (u, v) in enumerate(steps):
        strip = min(u[1], v[1])
        mid2 = u[0] + v[0]  # twice the midpoint column
        if strip not in leftmost or (mid2, i) < leftmost[strip]:
            leftmost[strip] = (mid2, i)
    out = []
    for i, e in enumerate(geodesic.edges()):
        if edge_weight(f, e, wp) == wp.b:
            out.append(EdgeClass.SUBOPTIMAL_B)
        elif leftmost[e.low.n][1] != i:
            out.append(EdgeClass.SUBOPTIMAL_REPEATED)
        else:
            out.append(EdgeClass.OPTIMAL)
    return out


def _merge(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(iv) for iv in merged]


def x_trace(classes, geodesic: PathRecord) -> list[tuple]:
    """Union of the column projections of the sub-optimal edges."""
    spans = [
        (min(u[0], v[0]), max(u[0], v[0]))
        for c, (u, v) in zip(classes, _edge_list(geodesic))
        if c.suboptimal
    ]
    return _merge(spans)


def _covered(lo: int, hi: int, intervals) -> bool:
    return any(a <= lo and hi <= b for a, b in intervals)


def retained_edges(classes, geodesic: PathRecord, xs=None) -> list[int]:
    """Indices of edges whose projection escapes the x-trace."""
    xs = x_trace(classes, geodesic) if xs is None else xs
    keep = []
    for i, (u, v) in enumerate(_edge_list(geodesic)):
        if not _covered(min(u[0], v[0]), max(u[0], v[0]), xs):
            keep.append(i)
    return keep


def y_trace(classes, geodesic: PathRecord, xs=None) -> list[tuple]:
    """Level spans ``(start, end)`` of the maximal runs of retained edges."""
    vs = geodesic.vertices
    runs = []
    prev = None
    for i in retained_edges(classes, geodesic, xs):
        if prev is not None and i == prev + 1:
            runs[-1][1] = i
        else:
            runs.append([i, i])
        prev = i
    return [(vs[s][1], vs[e + 1][1]) for s, e in runs]


def decompose(geodesic: PathRecord, f: NoiseField, wp: WeightParams) -> TraceDecomposition:
    classes = classify_edges(geodesic, f, wp)
    xs = x_trace(classes, geodesic)
    ys = y_trace(classes, geodesic, xs)
    keep = retained_edges(classes, geodesic, xs)
    return TraceDecomposition(tuple(xs), tuple(ys), tuple(classes), tuple(keep))


def d_opt(geodesic: PathRecord, decomposition: TraceDecomposition, check: bool = True) -> int:
    """Rightward displacement carried by the optimal edges.

    Computed as the net displacement minus the x-trace length; with
    ``check`` the direct sum over retained edges must agree.
    """
    vs = geodesic.vertices
    via_trace = (vs[-1][0] - vs[0][0]) - sum(hi - lo for lo, hi in decomposition.x_intervals)
    if check:
        direct = sum(vs[i + 1][0] - vs[i][0] for i in decomposition.retained)
        if direct != via_trace:
            raise TraceConsistencyError(
                f"d_opt via x-trace = {via_trace}, direct sum = {direct}")
    return via_trace


def d_opt_direct(geodesic: PathRecord, decomposition: TraceDecomposition) -> int:
    vs = geodesic.vertices
    return sum(vs[i + 1][0] - vs[i][0] for i in decomposition.retained)


def regime_ok(p0: float, p: float, a: float = 1.0, nu: float = 1.0) -> bool:
    """Both small-gap conditions on ``p0 - p`` used by the sub-optimal edge bound."""
    gap = p0 - p
    if gap <= 0:
        return False
    L = math.log(1.0 / gap)
    return L > 1 and a * nu / L <= 1


def k_bound(a: float, b: float, delta: float, p0: float, p: float, n: int) -> int:
    """``floor(a nu delta (p0-p)^2 n / log(1/(p0-p)))`` with ``nu = 1/min(b-a, a)``."""
    if p >= p0:
        return 0
    nu = 1.0 / min(b - a, a)
    gap = p0 - p
    L = math.log(1.0 / gap)
    if not regime_ok(p0, p, a, nu):
        warnings.warn(f"p0 - p = {gap} is outside the small-gap regime", RuntimeWarning, stacklevel=2)
    return math.floor(a * nu * delta * gap * gap * n / L)


def entropy(x: float) -> float:
    """Binary entropy in nats, with ``H(0) = H(1) = 0``."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log1p(-x)


def entropy_binomial_check(u: int, v: int) -> bool:
    """``C(u, v) <= exp(u H(v/u))``, compared in the log domain."""
    if not (0 <= v <= u and u >= 1):
        raise ValueError(f"need 0 <= v <= u, u >= 1; got u={u}, v={v}")
    return math.log(math.comb(u, v)) <= u * entropy(v / u)


def entropy_small_x_bound(x: float) -> bool:
    """``H(x) <= 2 x log(1/x)``, the small-argument entropy bound."""
    return entropy(x) <= 2 * x * math.log(1 / x) * (1 + 1e-12)


def entropy_bound_x0(grid=None) -> float:
    """Largest grid point up to which the small-argument bound holds throughout."""
    grid = np.linspace(1e-4, 1 - 1e-4, 9999) if grid is None else np.sort(np.asarray(grid))
    x0 = 0.0
    for x in grid:
        if not entropy_small_x_bound(float(x)):
            break
        x0 = float(x)
    return x0


def levels_from_encoding(seq) -> list[tuple]:
    """Read a flat endpoint list ``y1, y1', y2, y2', ...`` as level intervals."""
    seq = list(seq)
    if len(seq) % 2:
        raise ValueError("an interval encoding needs an even number of endpoints")
    return list(zip(seq[0::2], seq[1::2]))


def suboptimal_budget_check(geodesic: PathRecord, decomposition: TraceDecomposition,
                            f: NoiseField, wp: WeightParams, n: int) -> bool:
    """Sub-optimal edge count is at most ``nu * (T - a n)``."""
    end = geodesic.vertices[-1]
    if end[1] != n or abs(end[0]) > n or n < 1:
        raise ValueError(f"geodesic must end at level {n} inside the cone")
    excess = geodesic.weight(f, wp) - wp.a * n
    ok = decomposition.suboptimal_count <= wp.nu * excess + 1e-9 * wp.b * n
    if not ok:
        log.warning("budget violated: %d sub-optimal edges, excess %.6g, path %s",
                    decomposition.suboptimal_count, excess, geodesic.vertices)
    return ok


def trace_properties(geodesic: PathRecord, f: NoiseField, wp: WeightParams, n: int) -> dict:
    """Evaluate the structural claims about one geodesic's decomposition.

    Keys: ``x_disjoint``, ``j_gap_ok`` (``|j1 - j2| <= 1``), ``d_opt_agree``,
    ``retained_upward_a`` and ``budget_holds``.
    """
    dec = decompose(geodesic, f, wp)
    vs = geodesic.vertices
    xs = dec.x_intervals
    upward = all(
        vs[k + 1][1] == vs[k][1] + 1 and edge_weight(f, Edge.between(vs[k], vs[k + 1]), wp) == wp.a
        for k in dec.retained
    )
    return {
        "x_disjoint": all(hi < lo2 for (_, hi), (lo2, _) in zip(xs, xs[1:])),
        "j_gap_ok": abs(dec.j1 - dec.j2) <= 1,
        "d_opt_agree": d_opt(geodesic, dec, check=False) == d_opt_direct(geodesic, dec),
        "retained_upward_a": upward,
        "budget_holds": suboptimal_budget_check(geodesic, dec, f, wp, n),
    }
