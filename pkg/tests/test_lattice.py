import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from abfpp.lattice import (
    UP_LEFT,
    UP_RIGHT,
    Edge,
    LatticePoint,
    NoiseField,
    ParityError,
    WeightParams,
    Window,
    edge_uniform,
    edge_weight,
    nearest_lattice_point,
    neighbors,
    target_point,
)

M64 = (1 << 64) - 1


def ref_fmix(k):
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & M64
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & M64
    k ^= k >> 33
    return k


def ref_half(seed, m, n, d):
    """Pure-Python reimplementation of the documented mixer."""
    key = ref_fmix((seed + 0x9E3779B97F4A7C15) & M64)
    z = ref_fmix((key + (m & M64) * 0xD6E8FEB86659FD93) & M64)
    w = ref_fmix((z + (n & M64) * 0xC2B2AE3D27D4EB4F) & M64)
    return w >> 32 if d > 0 else w & 0xFFFFFFFF


points = st.tuples(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6)).filter(
    lambda t: (t[0] + t[1]) % 2 == 0)


@given(st.integers(0, 2**63), points, st.sampled_from([UP_LEFT, UP_RIGHT]))
def test_mixer_matches_python_reference(seed, pt, d):
    f = NoiseField(seed)
    e = Edge(LatticePoint(*pt), d)
    assert edge_uniform(f, e) == ref_half(seed, pt[0], pt[1], d) / 2**32


def test_uniform_mean_over_million_edges():
    rng = np.random.default_rng(0)
    ms = rng.integers(-10**5, 10**5, 10**6)
    ns = rng.integers(-10**5, 10**5, 10**6)
    ms -= (ms + ns) % 2
    ds = rng.choice([-1, 1], 10**6)
    u = NoiseField(12345).uniforms(ms, ns, ds)
    assert abs(u.mean() - 0.5) < 0.002
    assert u.min() >= 0 and u.max() < 1


@given(st.integers(0, 2**40), points, st.sampled_from([UP_LEFT, UP_RIGHT]))
def test_edge_uniform_is_deterministic(seed, pt, d):
    e = Edge(LatticePoint(*pt), d)
    assert edge_uniform(NoiseField(seed), e) == edge_uniform(NoiseField(seed), e)


@given(st.integers(0, 2**40), points, st.sampled_from([UP_LEFT, UP_RIGHT]),
       st.floats(0, 1), st.floats(0, 1))
def test_weight_coupling_is_monotone(seed, pt, d, p1, p2):
    p1, p2 = sorted((p1, p2))
    f, e = NoiseField(seed), Edge(LatticePoint(*pt), d)
    if edge_weight(f, e, WeightParams(1, 2, p1)) == 1:
        assert edge_weight(f, e, WeightParams(1, 2, p2)) == 1


def test_weight_extremes():
    f = NoiseField(3)
    edges = list(Window(-4, 4, -4, 4).edges())
    assert all(edge_weight(f, e, WeightParams(1, 2, 1.0)) == 1 for e in edges)
    assert all(edge_weight(f, e, WeightParams(1, 2, 0.0)) == 2 for e in edges)


def test_mirrored_field_reads_reflected_edge():
    f, g = NoiseField(9), NoiseField(9, mirrored=True)
    for e in Window(-3, 3, -3, 3).edges():
        r = Edge(LatticePoint(-e.low.m, e.low.n), -e.dir)
        assert edge_uniform(g, e) == edge_uniform(f, r)


def test_neighbors_examples():
    big = Window(-5, 5, -5, 5)
    ends = {frozenset([tuple(e.low), tuple(e.high)]) for e in neighbors((0, 0), big)}
    assert ends == {frozenset([(0, 0), q]) for q in [(-1, 1), (1, 1), (-1, -1), (1, -1)]}
    corner = neighbors((0, 0), Window(0, 5, 0, 5))
    assert [(tuple(e.low), tuple(e.high)) for e in corner] == [((0, 0), (1, 1))]
    with pytest.raises(ParityError):
        neighbors((1, 0), big)
    assert neighbors((10, 10), big) == []


@given(points)
def test_edges_join_adjacent_levels(pt):
    for e in neighbors(pt, Window(pt[0] - 2, pt[0] + 2, pt[1] - 2, pt[1] + 2)):
        assert e.high.n - e.low.n == 1 and abs(e.high.m - e.low.m) == 1
        assert (e.low.m + e.low.n) % 2 == 0


def test_parity_checks():
    with pytest.raises(ParityError):
        LatticePoint.checked(1, 0)
    with pytest.raises(ParityError):
        Edge(LatticePoint(1, 0), UP_RIGHT)


def test_target_point_examples():
    assert target_point(4.7, 10) == (4, 10)
    assert target_point(4.7, 11) == (3, 11)
    assert target_point(-0.3, 1) == (-1, 1)


@given(st.floats(-1e6, 1e6), st.integers(-10**6, 10**6))
def test_target_point_parity(x, n):
    m, k = target_point(x, n)
    assert k == n and (m + n) % 2 == 0 and m in (math.floor(x), math.floor(x) - 1)


def test_nearest_lattice_point_examples():
    assert nearest_lattice_point((0.2, 0.1)) == (0, 0)
    assert nearest_lattice_point((1.0, 0.0)) == (0, 0)
    assert nearest_lattice_point((2.6, 1.2)) == (3, 1)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_nearest_lattice_point_beats_brute_force(x, y):
    got = nearest_lattice_point((x, y))
    cands = [(m, n) for m in range(math.floor(x) - 3, math.floor(x) + 4)
             for n in range(math.floor(y) - 3, math.floor(y) + 4) if (m + n) % 2 == 0]
    best = min(cands, key=lambda q: ((q[0] - x) ** 2 + (q[1] - y) ** 2, q))
    assert got == best


def test_weight_params_validation():
    with pytest.raises(ValueError):
        WeightParams(2, 1, 0.5)
    with pytest.raises(ValueError):
        WeightParams(1, 2, 1.5)
    assert WeightParams(1, 2, 0.5).nu == 1.0
    assert WeightParams(1, 3, 0.5).nu == 1.0
    assert WeightParams(2, 3, 0.5).nu == 1.0
    assert WeightParams(1, 1.5, 0.5).nu == 2.0


def test_window_doubling_contains_original():
    w = Window(-3, 4, -2, 5)
    d = w.doubled()
    assert all(pt in d for pt in w.points())
