"""Rotated lattice geometry and the seeded a/b edge-weight field.

Points are ``(m, n)`` with ``m + n`` even; every edge joins ``(m, n)`` to
``(m - 1, n + 1)`` or ``(m + 1, n + 1)``.  Levels run over all integers so
that first passage paths may dip below the starting level.

Edge noise
----------
Each lattice point ``(m, n)`` owns one 64-bit hash word

    h = fmix64(fmix64(key + m * C1) + n * C2)

where ``key = fmix64(seed + GOLDEN)`` and ``fmix64`` is the MurmurHash3
finaliser (all arithmetic mod 2**64, coordinates taken in two's
complement).  The high 32 bits give the uniform of the up-right edge out of
``(m, n)``, the low 32 bits the up-left one: ``U = half / 2**32``.  An edge
has weight ``a`` iff ``U < p``, so for a fixed seed the set of a-edges only
grows with ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

UP_LEFT = -1
UP_RIGHT = 1

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xD6E8FEB86659FD93
_C2 = 0xC2B2AE3D27D4EB4F
_TWO32 = 4294967296.0


class ParityError(ValueError):
    """Raised when a coordinate pair is not a point of the rotated lattice."""


class LatticePoint(NamedTuple):
    m: int
    n: int

    @classmethod
    def checked(cls, m: int, n: int) -> "LatticePoint":
        _check_point(m, n)
        return cls(m, n)


def _check_point(m: int, n: int) -> None:
    if (m + n) % 2:
        raise ParityError(f"({m}, {n}) has odd coordinate sum")


@dataclass(frozen=True, order=True)
class Edge:
    """Canonical edge: lower endpoint plus direction (``UP_LEFT``/``UP_RIGHT``)."""

    low: LatticePoint
    dir: int

    def __post_init__(self):
        if self.dir not in (UP_LEFT, UP_RIGHT):
            raise ValueError(f"bad edge direction {self.dir!r}")
        _check_point(*self.low)

    @property
    def high(self) -> LatticePoint:
        return LatticePoint(self.low.m + self.dir, self.low.n + 1)

    @classmethod
    def between(cls, u, v) -> "Edge":
        (um, un), (vm, vn) = u, v
        if abs(um - vm) != 1 or abs(un - vn) != 1:
            raise ValueError(f"{tuple(u)} and {tuple(v)} are not adjacent")
        if un > vn:
            (um, un), (vm, vn) = (vm, vn), (um, un)
        return cls(LatticePoint(um, un), vm - um)


@dataclass(frozen=True)
class WeightParams:
    a: float = 1.0
    b: float = 2.0
    p: float = 0.5

    def __post_init__(self):
        if not (0 < self.a < self.b < math.inf):
            raise ValueError(f"need 0 < a < b < inf, got a={self.a}, b={self.b}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    def with_p(self, p: float) -> "WeightParams":
        return WeightParams(self.a, self.b, p)

    @property
    def threshold(self) -> int:
        """Integer cut so that ``half < threshold`` iff ``half / 2**32 < p``."""
        return int(math.ceil(self.p * _TWO32))

    @property
    def nu(self) -> float:
        return 1.0 / min(self.b - self.a, self.a)


@dataclass(frozen=True)
class Window:
    m_min: int
    m_max: int
    n_min: int
    n_max: int

    def __post_init__(self):
        if self.m_min > self.m_max or self.n_min > self.n_max:
            raise ValueError(f"empty window {self}")
        if self.m_min == self.m_max and self.n_min == self.n_max and (self.m_min + self.n_min) % 2:
            raise ValueError(f"window {self} holds no lattice point")

    def __contains__(self, pt) -> bool:
        m, n = pt
        return self.m_min <= m <= self.m_max and self.n_min <= n <= self.n_max

    def points(self):
        for n in range(self.n_min, self.n_max + 1):
            start = self.m_min + ((self.m_min + n) % 2)
            for m in range(start, self.m_max + 1, 2):
                yield LatticePoint(m, n)

    def edges(self):
        out = []
        for pt in self.points():
            for d in (UP_LEFT, UP_RIGHT):
                if (pt.m + d, pt.n + 1) in self:
                    out.append(Edge(pt, d))
        return out

    def doubled(self) -> "Window":
        return Window(2 * self.m_min - 1, 2 * self.m_max + 1, 2 * self.n_min - 1, 2 * self.n_max + 1)


# -- keyed mixer --------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _fmix64(k):
    k ^= k >> np.uint64(33)
    k *= np.uint64(0xFF51AFD7ED558CCD)
    k ^= k >> np.uint64(33)
    k *= np.uint64(0xC4CEB9FE1A85EC53)
    k ^= k >> np.uint64(33)
    return k


@numba.njit(cache=True)
def field_key(seed):
    return _fmix64(np.uint64(seed) + np.uint64(_GOLDEN))


@numba.njit(cache=True, inline="always")
def site_word(key, m, n):
    """64 hash bits for the two upward edges out of ``(m, n)``."""
    z = _fmix64(np.uint64(key) + np.uint64(np.int64(m)) * np.uint64(_C1))
    return _fmix64(z + np.uint64(np.int64(n)) * np.uint64(_C2))


@numba.njit(cache=True, inline="always")
def edge_half(key, m, n, d, mirrored):
    """32-bit draw of edge ``((m, n), d)``; ``mirrored`` keys it as its reflection."""
    if mirrored:
        m = -m
        d = -d
    w = site_word(key, m, n)
    if d > 0:
        return w >> np.uint64(32)
    return w & np.uint64(0xFFFFFFFF)


@numba.njit(cache=True)
def _edge_halves(key, ms, ns, ds, mirrored):
    out = np.empty(ms.shape[0], dtype=np.uint64)
    for i in range(ms.shape[0]):
        out[i] = edge_half(key, ms[i], ns[i], ds[i], mirrored)
    return out


def _seed64(seed: int) -> int:
    return int(seed) & _MASK64


@dataclass(frozen=True)
class NoiseField:
    """Per-edge uniforms as a pure function of ``(seed, edge)``.

    ``mirrored=True`` gives the field reflected through the level axis: the
    edge out of ``(m, n)`` in direction ``d`` reads the draw of ``(-m, n, -d)``.
    """

    seed: int
    mirrored: bool = False

    @property
    def key(self) -> np.uint64:
        return np.uint64(field_key(np.uint64(_seed64(self.seed))))

    def halves(self, ms, ns, ds) -> np.ndarray:
        ms = np.ascontiguousarray(ms, dtype=np.int64)
        ns = np.ascontiguousarray(ns, dtype=np.int64)
        ds = np.ascontiguousarray(ds, dtype=np.int64)
        return _edge_halves(self.key, ms, ns, ds, self.mirrored)

    def uniforms(self, ms, ns, ds) -> np.ndarray:
        return self.halves(ms, ns, ds).astype(np.float64) / _TWO32


def edge_uniform(f: NoiseField, e: Edge) -> float:
    h = edge_half(f.key, np.int64(e.low.m), np.int64(e.low.n), np.int64(e.dir), f.mirrored)
    return int(h) / _TWO32


def edge_weight(f: NoiseField, e: Edge, wp: WeightParams) -> float:
    return wp.a if edge_uniform(f, e) < wp.p else wp.b


def neighbors(pt, w: Window) -> list[Edge]:
    """Edges incident to ``pt`` whose far endpoint lies in ``w``.

    Order: up-left, up-right, down-left, down-right.  A point outside the
    window simply has no neighbours.
    """
    m, n = pt
    _check_point(m, n)
    if (m, n) not in w:
        return []
    here = LatticePoint(m, n)
    out = []
    for d in (UP_LEFT, UP_RIGHT):
        if (m + d, n + 1) in w:
            out.append(Edge(here, d))
    for d in (UP_LEFT, UP_RIGHT):
        # edge from (m + d, n - 1) back up to (m, n)
        if (m + d, n - 1) in w:
            out.append(Edge(LatticePoint(m + d, n - 1), -d))
    return out


def target_point(x: float, n: int) -> LatticePoint:
    """Lattice point at level ``n`` with column ``floor(x)``, moved left on odd parity."""
    m = math.floor(x)
    if (m + n) % 2:
        m -= 1
    return LatticePoint(m, n)


def nearest_lattice_point(x) -> LatticePoint:
    """Euclidean-nearest lattice point; ties go to the smallest ``(m, n)``."""
    x0, x1 = float(x[0]), float(x[1])
    fm, fn = math.floor(x0), math.floor(x1)
    best = None
    for m in range(fm - 1, fm + 3):
        for n in range(fn - 1, fn + 3):
            if (m + n) % 2:
                continue
            d2 = (m - x0) ** 2 + (n - x1) ** 2
            cand = (d2, m, n)
            if best is None or cand < best:
                best = cand
    return LatticePoint(best[1], best[2])


def graph_distance(u, v) -> int:
    """Number of edges on a shortest lattice path between two points."""
    return max(abs(u[0] - v[0]), abs(u[1] - v[1]))
