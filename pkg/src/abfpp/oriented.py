"""Oriented percolation of a-edges and its right edge.

Three processes live here:

* the raw front ``xi_n^A`` started from a set of level-0 columns;
* the origin process ``xi'_n`` with the fallback to the singleton
  ``{n}`` whenever the front dies, whose supremum is ``r'_n``;
* the half-line process started from ``{-2n, ..., -2, 0}`` whose supremum at
  level ``n`` estimates the right edge ``r_n``.

Percolation points are replaced by survival to a finite horizon ``H``.
Survival of many starting points is answered at once by a backward sweep
that stores, for every site of the forward cone, the highest level it can
reach along a-edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .lattice import LatticePoint, NoiseField, WeightParams, edge_half, site_word
from .seeds import replicate_seed, run_replicates

# Oriented bond percolation threshold on this lattice, from the literature
# (not derived here); used only to refuse clearly subcritical requests.
CRITICAL_P = 0.6447

_NONE = np.iinfo(np.int64).min


class EstimatorAbort(RuntimeError):
    """Raised when too many replicates are unusable for an estimate."""


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    stderr: float
    reps: int
    excluded: int = 0

    def __post_init__(self):
        if self.stderr < 0 or self.reps < 1:
            raise ValueError(f"invalid estimate {self}")


@dataclass(frozen=True)
class FrontState:
    level: int
    occupied: tuple
    reset_flag: bool = False


@dataclass(frozen=True)
class RightEdgeTrace:
    values: np.ndarray
    resets: np.ndarray
    p: float
    seed: int
    N: int


@dataclass(frozen=True)
class BreakPointRecord:
    T_i: int
    r_at_T: int
    tau: int
    X: int
    validated: bool = True


@dataclass
class BreakPointRun:
    """One conditioned run: accepted iff the origin survives to ``N + H``."""

    seed: int
    N: int
    H: int
    accepted: bool
    rprime: np.ndarray
    records: list = field(default_factory=list)

    @property
    def T_m(self) -> int:
        return self.records[-1].T_i if self.records else 0


# -- kernels ---------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _open(key, mirrored, thr, x, level, d):
    return edge_half(key, x, level, d, mirrored) < thr


@numba.njit(cache=True, inline="always")
def _opens(key, mirrored, thr, x, level):
    """(up-left open, up-right open) for the site ``(x, level)``, one hash."""
    if mirrored:
        w = site_word(key, -x, level)
        return (w >> np.uint64(32)) < thr, (w & np.uint64(0xFFFFFFFF)) < thr
    w = site_word(key, x, level)
    return (w & np.uint64(0xFFFFFFFF)) < thr, (w >> np.uint64(32)) < thr


@numba.njit(cache=True)
def _front_next(key, mirrored, thr, level, cols):
    """Columns at ``level + 1`` reached from ``cols`` at ``level`` by one a-edge."""
    out = []
    last = _NONE
    for i in range(cols.shape[0]):
        x = cols[i]
        # candidates in increasing order: x - 1 then x + 1
        if x - 1 > last:
            hit = _open(key, mirrored, thr, x, level, -1)
            if not hit and i > 0 and cols[i - 1] == x - 2:
                hit = _open(key, mirrored, thr, x - 2, level, 1)
            if hit:
                out.append(x - 1)
                last = x - 1
        if x + 1 > last:
            hit = _open(key, mirrored, thr, x, level, 1)
            if not hit and i + 1 < cols.shape[0] and cols[i + 1] == x + 2:
                hit = _open(key, mirrored, thr, x + 2, level, -1)
            if hit:
                out.append(x + 1)
                last = x + 1
    res = np.empty(len(out), dtype=np.int64)
    for i in range(len(out)):
        res[i] = out[i]
    return res


# Dense kernels store level k compactly: column x sits at index (x - lo + k) / 2,
# so the two children of index i at level k + 1 are indices i and i + 1.

@numba.njit(cache=True)
def _front_extremes(key, mirrored, thr, lo, hi, level0, steps):
    """Evolve the front started from every column of ``lo..hi`` (step 2).

    Returns the rightmost occupied column at each of the ``steps + 1``
    levels, with ``_NONE`` once the front is empty.
    """
    size = (hi - lo) // 2 + steps + 2
    cur = np.zeros(size, dtype=np.bool_)
    nxt = np.zeros(size, dtype=np.bool_)
    cur[: (hi - lo) // 2 + 1] = True
    right = np.full(steps + 1, _NONE, dtype=np.int64)
    right[0] = hi
    ia = 0
    ib = (hi - lo) // 2
    for k in range(steps):
        level = level0 + k
        base = lo - k
        # entries of nxt outside [ia, ib + 1] are stale and never read
        nxt[ia] = False
        for i in range(ia, ib + 1):
            left, right_open = _opens(key, mirrored, thr, base + 2 * i, level)
            c = cur[i]
            nxt[i] |= c and left
            nxt[i + 1] = c and right_open
        na = ia
        while na <= ib + 1 and not nxt[na]:
            na += 1
        if na > ib + 1:
            break
        nb = ib + 1
        while not nxt[nb]:
            nb -= 1
        right[k + 1] = lo - (k + 1) + 2 * nb
        ia = na
        ib = nb
        cur, nxt = nxt, cur
    return right


@numba.njit(cache=True)
def _origin_trace(key, mirrored, thr, N):
    """``r'_0..r'_N`` for the origin process with its fallback singleton."""
    cur = np.zeros(N + 2, dtype=np.bool_)
    nxt = np.zeros(N + 2, dtype=np.bool_)
    cur[0] = True
    rp = np.zeros(N + 1, dtype=np.int64)
    resets = np.zeros(N + 1, dtype=np.bool_)
    ia = 0
    ib = 0
    for n in range(N):
        nxt[ia] = False
        for i in range(ia, ib + 1):
            left, right_open = _opens(key, mirrored, thr, 2 * i - n, n)
            c = cur[i]
            nxt[i] |= c and left
            nxt[i + 1] = c and right_open
        na = ia
        while na <= ib + 1 and not nxt[na]:
            na += 1
        if na > ib + 1:
            # front died: restart from the diagonal point (n + 1, n + 1)
            na = n + 1
            nb = n + 1
            nxt[nb] = True
            resets[n + 1] = True
        else:
            nb = ib + 1
            while not nxt[nb]:
                nb -= 1
        rp[n + 1] = 2 * nb - (n + 1)
        ia = na
        ib = nb
        cur, nxt = nxt, cur
    return rp, resets


@numba.njit(cache=True)
def _reach_along(key, mirrored, thr, rp, top):
    """Highest level (capped at ``top``) reachable from each ``(rp[k], k)``.

    Backward sweep over the cone ``|x| <= j`` from level ``top`` down to 0.
    """
    N = rp.shape[0] - 1
    cur = np.full(top + 2, top, dtype=np.int64)
    nxt = np.zeros(top + 2, dtype=np.int64)
    out = np.zeros(N + 1, dtype=np.int64)
    for j in range(top - 1, -1, -1):
        for i in range(j + 1):
            left, right_open = _opens(key, mirrored, thr, 2 * i - j, j)
            # arithmetic select: the open/closed pattern is random, branches mispredict
            rl = j + np.int64(left) * (cur[i] - j)
            rr = j + np.int64(right_open) * (cur[i + 1] - j)
            nxt[i] = max(rl, rr)
        if j <= N:
            out[j] = nxt[(rp[j] + j) // 2]
        cur, nxt = nxt, cur
    return out


# -- public operations -----------------------------------------------------------

def _check_supercritical(p: float, critical: float = CRITICAL_P) -> None:
    if p <= critical:
        raise ValueError(f"p={p} is not above the oriented critical value {critical}")


def evolve_front(initial, f: NoiseField, wp: WeightParams, steps: int) -> list[FrontState]:
    cols = np.array(sorted(set(int(x) for x in initial)), dtype=np.int64)
    if np.any(cols % 2):
        raise ValueError("initial columns must be even (level 0)")
    states = [FrontState(0, tuple(int(x) for x in cols))]
    key, thr = f.key, np.uint64(wp.threshold)
    for k in range(steps):
        cols = _front_next(key, f.mirrored, thr, k, cols)
        states.append(FrontState(k + 1, tuple(int(x) for x in cols)))
    return states


def origin_right_edge(f: NoiseField, wp: WeightParams, N: int) -> RightEdgeTrace:
    if N < 1:
        raise ValueError("N must be at least 1")
    rp, resets = _origin_trace(f.key, f.mirrored, np.uint64(wp.threshold), N)
    return RightEdgeTrace(rp, resets, wp.p, f.seed, N)


def halfline_right_edge(f: NoiseField, wp: WeightParams, n: int) -> int | None:
    """Rightmost level-``n`` column reached from ``{-2n, ..., 0}``; ``None`` if extinct."""
    if n < 1:
        raise ValueError("n must be at least 1")
    right = _front_extremes(f.key, f.mirrored, np.uint64(wp.threshold), -2 * n, 0, 0, n)
    r = int(right[n])
    return None if r == _NONE else r


def survives_to_horizon(start, f: NoiseField, wp: WeightParams, H: int) -> bool:
    if H < 1:
        raise ValueError("H must be at least 1")
    m, n = start
    LatticePoint.checked(m, n)
    right = _front_extremes(f.key, f.mirrored, np.uint64(wp.threshold), m, m, n, H)
    return bool(right[H] != _NONE)


def extract_break_points(f: NoiseField, wp: WeightParams, N: int, H: int | None = None) -> BreakPointRun:
    """Break points of ``r'`` on levels ``1..N``, conditioned on origin survival to ``N + H``."""
    H = N if H is None else H
    if N < 1 or H < 1:
        raise ValueError("N and H must be at least 1")
    key, thr = f.key, np.uint64(wp.threshold)
    rp, _ = _origin_trace(key, f.mirrored, thr, N)
    reach = _reach_along(key, f.mirrored, thr, rp, N + H)
    run = BreakPointRun(f.seed, N, H, bool(reach[0] >= N + H), rp)
    if not run.accepted:
        return run
    prev_T, prev_r = 0, 0
    for n in np.flatnonzero(reach[1:] - np.arange(1, N + 1) >= H) + 1:
        n = int(n)
        r = int(rp[n])
        run.records.append(BreakPointRecord(n, r, n - prev_T, r - prev_r, n + H <= N + H))
        prev_T, prev_r = n, r
    return run


def regeneration_inequality_check(run: BreakPointRun) -> tuple[np.ndarray, np.ndarray]:
    """Check ``|r'_{T_{N_n+1}} - r'_n| <= 2 tau_{N_n+1}`` on levels ``1..N``.

    Returns ``(covered_levels, holds)``; levels after the last validated break
    point have no following regeneration and are skipped.
    """
    recs = [r for r in run.records if r.validated]
    Ts = np.array([r.T_i for r in recs], dtype=np.int64)
    levels = np.arange(1, run.N + 1)
    nxt = np.searchsorted(Ts, levels, side="right")  # index of record N_n + 1
    covered = nxt < len(recs)
    levels = levels[covered]
    idx = nxt[covered]
    if len(levels) == 0:
        return levels, np.zeros(0, dtype=bool)
    r_next = np.array([recs[i].r_at_T for i in idx])
    tau_next = np.array([recs[i].tau for i in idx])
    holds = np.abs(r_next - run.rprime[levels]) <= 2 * tau_next
    return levels, holds


# -- estimators ------------------------------------------------------------------

def _halfline_job(args):
    seed, wp, n = args
    return halfline_right_edge(NoiseField(seed), wp, n)


def halfline_samples(wp: WeightParams, n: int, reps: int, seed: int, workers: int = 1, stream: str = "halfline"):
    """``r_n`` for replicates ``0..reps-1``; ``None`` marks extinct runs."""
    jobs = [(replicate_seed(seed, stream, i), wp, n) for i in range(reps)]
    return run_replicates(_halfline_job, jobs, workers)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def estimate_alpha_slope(wp: WeightParams, n: int, reps: int, seed: int = 0, workers: int = 1,
                         critical: float = CRITICAL_P) -> EstimateWithCI:
    _check_supercritical(wp.p, critical)
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be at least 1")
    rs = halfline_samples(wp, n, reps, seed, workers)
    ok = np.array([r for r in rs if r is not None], dtype=np.float64)
    excluded = reps - len(ok)
    if excluded * 2 > reps:
        raise EstimatorAbort(f"{excluded}/{reps} half-line runs died at p={wp.p}, n={n}")
    mean, se = _mean_se(ok / n)
    return EstimateWithCI(mean, se, len(ok), excluded)


def _breakpoint_job(args):
    seed, wp, N, H = args
    return extract_break_points(NoiseField(seed), wp, N, H)


def breakpoint_runs(wp: WeightParams, N: int, H: int, reps: int, seed: int, workers: int = 1):
    jobs = [(replicate_seed(seed, "breakpoints", i), wp, N, H) for i in range(reps)]
    return run_replicates(_breakpoint_job, jobs, workers)


def _ratio_with_jackknife(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    ratio = num.sum() / den.sum()
    k = len(num)
    if k < 2:
        return float(ratio), 0.0
    loo = (num.sum() - num) / (den.sum() - den)
    se = math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2))
    return float(ratio), float(se)


def ratio_from_runs(runs) -> tuple[EstimateWithCI, EstimateWithCI]:
    """Pooled ``sum X / sum tau`` and mean ``tau`` over validated break points."""
    rejected = sum(1 for r in runs if not r.accepted)
    sx, st, cnt = [], [], []
    for run in runs:
        recs = [r for r in run.records if r.validated]
        if run.accepted and recs:
            sx.append(sum(r.X for r in recs))
            st.append(sum(r.tau for r in recs))
            cnt.append(len(recs))
    if not sx:
        raise EstimatorAbort("no validated break points in any accepted run")
    sx, st, cnt = (np.array(v, dtype=np.float64) for v in (sx, st, cnt))
    alpha, alpha_se = _ratio_with_jackknife(sx, st)
    kappa, kappa_se = _ratio_with_jackknife(st, cnt)
    excluded = len(runs) - len(sx)
    return (EstimateWithCI(alpha, alpha_se, len(sx), excluded),
            EstimateWithCI(kappa, kappa_se, len(sx), excluded))


def estimate_alpha_ratio(wp: WeightParams, N: int, H: int, reps: int, seed: int = 0, workers: int = 1,
                         critical: float = CRITICAL_P) -> EstimateWithCI:
    _check_supercritical(wp.p, critical)
    return ratio_from_runs(breakpoint_runs(wp, N, H, reps, seed, workers))[0]


def estimate_tail_probability(wp: WeightParams, alpha_ref: float, eps: float, n: int, reps: int,
                              seed: int = 0, workers: int = 1) -> EstimateWithCI:
    """Frequency of ``r_n >= (alpha_ref + eps) n`` over half-line replicates."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    rs = halfline_samples(wp, n, reps, seed, workers, stream=f"tail-{n}")
    ok = np.array([r for r in rs if r is not None], dtype=np.float64)
    if len(ok) == 0:
        raise EstimatorAbort(f"every half-line run died at p={wp.p}, n={n}")
    hits = ok >= (alpha_ref + eps) * n
    phat = float(hits.mean())
    return EstimateWithCI(phat, math.sqrt(phat * (1 - phat) / len(ok)), len(ok), reps - len(ok))
