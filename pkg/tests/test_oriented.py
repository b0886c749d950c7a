import numpy as np
import pytest
from hypothesis import given, strategies as st

from abfpp.lattice import Edge, LatticePoint, NoiseField, WeightParams, edge_weight
from abfpp.oriented import (
    EstimatorAbort,
    BreakPointRun,
    estimate_alpha_ratio,
    estimate_alpha_slope,
    estimate_tail_probability,
    evolve_front,
    extract_break_points,
    halfline_right_edge,
    origin_right_edge,
    ratio_from_runs,
    regeneration_inequality_check,
    survives_to_horizon,
)

seeds = st.integers(0, 2**40)
probs = st.floats(0.3, 0.95)


def is_open(f, wp, x, level, d):
    return edge_weight(f, Edge(LatticePoint(x, level), d), wp) == wp.a


def ref_step(f, wp, cols, level):
    return sorted({x + d for x in cols for d in (-1, 1) if is_open(f, wp, x, level, d)})


def ref_origin_trace(f, wp, N):
    cols, rp, resets = [0], [0], [False]
    for n in range(N):
        nxt = ref_step(f, wp, cols, n)
        resets.append(not nxt)
        cols = nxt or [n + 1]
        rp.append(max(cols))
    return rp, resets


def ref_survives(f, wp, start, H):
    cols = [start[0]]
    for k in range(H):
        cols = ref_step(f, wp, cols, start[1] + k)
        if not cols:
            return False
    return True


def ref_break_points(f, wp, N, H):
    rp, _ = ref_origin_trace(f, wp, N)
    if not ref_survives(f, wp, (0, 0), N + H):
        return None
    return [(n, rp[n]) for n in range(1, N + 1) if ref_survives(f, wp, (rp[n], n), H)]


def test_full_cone_at_p_one():
    states = evolve_front({0}, NoiseField(0), WeightParams(1, 2, 1.0), 6)
    for s in states:
        assert s.occupied == tuple(range(-s.level, s.level + 1, 2))


def test_empty_front_at_p_zero():
    states = evolve_front({0}, NoiseField(0), WeightParams(1, 2, 0.0), 3)
    assert states[1].occupied == () and states[3].occupied == ()


def test_two_level_hand_built_field():
    # seed 179 at p = 1/2: both edges out of (0,0) open; from (-1,1) only the
    # up-right edge, from (1,1) only the up-left edge, so the front pinches to {0}
    f, wp = NoiseField(179), WeightParams(1, 2, 0.5)
    assert is_open(f, wp, 0, 0, -1) and is_open(f, wp, 0, 0, 1)
    assert not is_open(f, wp, -1, 1, -1) and is_open(f, wp, -1, 1, 1)
    assert is_open(f, wp, 1, 1, -1) and not is_open(f, wp, 1, 1, 1)
    states = evolve_front({0}, f, wp, 2)
    assert [s.occupied for s in states] == [(0,), (-1, 1), (0,)]


def test_odd_initial_columns_rejected():
    with pytest.raises(ValueError):
        evolve_front({1}, NoiseField(0), WeightParams(1, 2, 0.5), 2)


@given(seeds, probs, st.sets(st.integers(-6, 6).map(lambda x: 2 * x), min_size=1))
def test_front_matches_reference(seed, p, initial):
    f, wp = NoiseField(seed), WeightParams(1, 2, p)
    cols = sorted(initial)
    for s in evolve_front(initial, f, wp, 12)[1:]:
        cols = ref_step(f, wp, cols, s.level - 1)
        assert list(s.occupied) == cols


def test_origin_fallback_to_one():
    # seed 2 at p = 1/2: both edges out of the origin have weight b
    f, wp = NoiseField(2), WeightParams(1, 2, 0.5)
    assert not is_open(f, wp, 0, 0, -1) and not is_open(f, wp, 0, 0, 1)
    tr = origin_right_edge(f, wp, 3)
    assert tr.values[1] == 1 and tr.resets[1]


def test_origin_trace_at_p_one():
    tr = origin_right_edge(NoiseField(5), WeightParams(1, 2, 1.0), 50)
    assert list(tr.values) == list(range(51)) and not tr.resets.any()


@given(seeds, st.floats(0.2, 0.95))
def test_origin_trace_matches_reference(seed, p):
    f, wp = NoiseField(seed), WeightParams(1, 2, p)
    rp, resets = ref_origin_trace(f, wp, 40)
    tr = origin_right_edge(f, wp, 40)
    assert list(tr.values) == rp and list(tr.resets) == resets


@given(seeds, st.floats(0.2, 0.95))
def test_origin_trace_stays_in_cone(seed, p):
    tr = origin_right_edge(NoiseField(seed), WeightParams(1, 2, p), 200)
    n = np.arange(201)
    assert np.all(np.abs(tr.values) <= n) and np.all((tr.values + n) % 2 == 0)
    steps = np.diff(tr.values)[~tr.resets[1:]]
    assert np.all(steps <= 1)


def test_halfline_at_p_one():
    assert halfline_right_edge(NoiseField(0), WeightParams(1, 2, 1.0), 300) == 300


@given(seeds, st.floats(0.3, 0.95), st.floats(0.3, 0.95))
def test_halfline_monotone_in_p(seed, p1, p2):
    p1, p2 = sorted((p1, p2))
    f = NoiseField(seed)
    r1 = halfline_right_edge(f, WeightParams(1, 2, p1), 120)
    r2 = halfline_right_edge(f, WeightParams(1, 2, p2), 120)
    if r1 is not None:
        assert r2 is not None and r1 <= r2


@given(seeds, st.floats(0.66, 0.95))
def test_halfline_speed_one(seed, p):
    f, wp = NoiseField(seed), WeightParams(1, 2, p)
    rs = [halfline_right_edge(f, wp, n) for n in range(1, 40)]
    for a, b in zip(rs, rs[1:]):
        if a is not None and b is not None:
            assert b <= a + 1


@given(seeds, st.floats(0.4, 0.95), st.integers(1, 30), st.integers(1, 30))
def test_survival_antitone_in_horizon(seed, p, h1, h2):
    h1, h2 = sorted((h1, h2))
    f, wp = NoiseField(seed), WeightParams(1, 2, p)
    if survives_to_horizon((0, 0), f, wp, h2):
        assert survives_to_horizon((0, 0), f, wp, h1)


def test_survival_extremes():
    f = NoiseField(4)
    assert survives_to_horizon((3, 1), f, WeightParams(1, 2, 1.0), 500)
    assert not survives_to_horizon((3, 1), f, WeightParams(1, 2, 0.0), 1)


@given(seeds, st.floats(0.5, 0.95))
def test_break_points_match_reference(seed, p):
    f, wp = NoiseField(seed), WeightParams(1, 2, p)
    run = extract_break_points(f, wp, 25, 15)
    ref = ref_break_points(f, wp, 25, 15)
    assert run.accepted == (ref is not None)
    if ref is not None:
        assert [(r.T_i, r.r_at_T) for r in run.records] == ref


def test_break_points_at_p_one():
    run = extract_break_points(NoiseField(0), WeightParams(1, 2, 1.0), 30, 10)
    assert run.accepted and len(run.records) == 30
    assert all(r.tau == 1 and r.X == 1 for r in run.records)
    levels, holds = regeneration_inequality_check(run)
    assert holds.all() and list(levels) == list(range(1, 30))


def test_five_level_regeneration_by_hand():
    # r' = 0,1,0,1,2,3 with break points at levels 2 and 5:
    # n=1 -> next break at 2: |0 - 1| <= 2*2; n=2..4 -> next break at 5: |3 - r'_n| <= 2*3
    from abfpp.oriented import BreakPointRecord
    run = BreakPointRun(0, 5, 5, True, np.array([0, 1, 0, 1, 2, 3]),
                        [BreakPointRecord(2, 0, 2, 0), BreakPointRecord(5, 3, 3, 3)])
    levels, holds = regeneration_inequality_check(run)
    assert list(levels) == [1, 2, 3, 4] and holds.all()
    run.records[1] = BreakPointRecord(5, 3, 1, 3)
    _, holds = regeneration_inequality_check(run)
    assert list(holds) == [True, False, True, True]


@given(seeds, st.floats(0.7, 0.95))
def test_regeneration_structure(seed, p):
    run = extract_break_points(NoiseField(seed), WeightParams(1, 2, p), 300, 100)
    if not run.accepted:
        return
    recs = run.records
    assert sum(r.tau for r in recs) == run.T_m
    assert sum(r.X for r in recs) == (run.rprime[run.T_m] if recs else 0)
    assert all(abs(r.X) <= r.tau and r.tau >= 1 for r in recs)
    _, holds = regeneration_inequality_check(run)
    assert holds.all()


def test_alpha_slope_at_p_one():
    est = estimate_alpha_slope(WeightParams(1, 2, 1.0), 100, 10)
    assert est.mean == 1.0 and est.stderr == 0.0


def test_alpha_slope_subcritical_refused():
    with pytest.raises(ValueError):
        estimate_alpha_slope(WeightParams(1, 2, 0.5), 100, 10)


def test_alpha_slope_extinction_abort():
    with pytest.raises(EstimatorAbort):
        estimate_alpha_slope(WeightParams(1, 2, 0.3), 200, 4, critical=0.1)


def test_alpha_ratio_at_p_one():
    est = estimate_alpha_ratio(WeightParams(1, 2, 1.0), 50, 10, 5)
    assert est.mean == 1.0


def test_kappa_at_least_one():
    from abfpp.oriented import breakpoint_runs
    _, kappa = ratio_from_runs(breakpoint_runs(WeightParams(1, 2, 0.8), 300, 100, 20, seed=1))
    assert kappa.mean >= 1


def test_alpha_estimates_in_unit_interval():
    est = estimate_alpha_slope(WeightParams(1, 2, 0.8), 300, 20)
    assert 0 < est.mean <= 1


def test_tail_zero_at_p_one():
    est = estimate_tail_probability(WeightParams(1, 2, 1.0), 1.0, 0.5, 100, 20)
    assert est.mean == 0.0 and est.stderr == 0.0


def test_tail_rejects_bad_eps():
    with pytest.raises(ValueError):
        estimate_tail_probability(WeightParams(1, 2, 0.8), 0.5, 1.5, 100, 20)
