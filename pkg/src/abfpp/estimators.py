"""Monte Carlo estimates of time constants and the flat-edge probe.

The probe runs in two stages.  First the right-edge speed at ``p0`` is
estimated once and frozen; then every grid point measures the passage time
to the same target ``(alpha0 * n, n)`` on the same replicate seeds, so the
per-seed passage times are exactly nonincreasing in ``p``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .fpp import first_passage_time
from .lattice import NoiseField, WeightParams, nearest_lattice_point, target_point
from .oriented import (
    CRITICAL_P,
    EstimateWithCI,
    EstimatorAbort,
    _check_supercritical,
    _mean_se,
    estimate_alpha_slope,
    halfline_samples,
)
from .seeds import replicate_seed, run_replicates


@dataclass(frozen=True)
class ProbeConfig:
    p0: float
    q: float
    p_grid: tuple
    n: int
    reps: int
    alpha0: EstimateWithCI | None = None
    horizon: int | None = None
    seed: int = 0
    a: float = 1.0
    b: float = 2.0
    critical: float = CRITICAL_P
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        if not (self.critical < self.q < self.p0 < 1):
            raise ValueError(f"need critical < q < p0 < 1, got q={self.q}, p0={self.p0}")
        bad = [p for p in self.p_grid if not (self.q <= p <= self.p0)]
        if bad:
            raise ValueError(f"grid points {bad} fall outside [q, p0]")
        if self.n < 1 or self.reps < 1:
            raise ValueError("n and reps must be at least 1")
        WeightParams(self.a, self.b, self.p0)

    def weights(self, p: float) -> WeightParams:
        return WeightParams(self.a, self.b, p)

    def with_alpha0(self, alpha0: EstimateWithCI) -> "ProbeConfig":
        return ProbeConfig(self.p0, self.q, self.p_grid, self.n, self.reps, alpha0, self.horizon,
                           self.seed, self.a, self.b, self.critical, self.workers)

    @property
    def target(self):
        if self.alpha0 is None:
            raise ValueError("alpha0 must be frozen before measuring passage times")
        return target_point(self.alpha0.mean * self.n, self.n)


@dataclass(frozen=True)
class SingularityFit:
    delta_hat: float
    residual_norm: float
    h_values: tuple  # (p, EstimateWithCI) pairs
    not_positive: tuple = ()
    outside_regime: tuple = ()


@dataclass(frozen=True)
class GapReport:
    p0: float
    p: float
    gap: float
    stderr: float
    bound: float
    alpha_p0: EstimateWithCI
    alpha_p: EstimateWithCI
    reps: int
    excluded: int

    @property
    def holds(self) -> bool:
        return self.gap >= self.bound - 3 * self.stderr


def _passage_job(args):
    seed, wp, target = args
    return first_passage_time(target, NoiseField(seed), wp).time


def passage_times(wp: WeightParams, target, reps: int, seed: int, workers: int = 1,
                  stream: str = "fpp") -> np.ndarray:
    jobs = [(replicate_seed(seed, stream, i), wp, tuple(target)) for i in range(reps)]
    return np.array(run_replicates(_passage_job, jobs, workers), dtype=np.float64)


def estimate_time_constant(x, wp: WeightParams, n: int, reps: int, seed: int = 0,
                           workers: int = 1) -> EstimateWithCI:
    """Mean of ``T(0, n x) / n`` with ``n x`` rounded to the nearest lattice point."""
    if x[0] == 0 and x[1] == 0:
        raise ValueError("direction must be nonzero")
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be at least 1")
    target = nearest_lattice_point((n * x[0], n * x[1]))
    mean, se = _mean_se(passage_times(wp, target, reps, seed, workers) / n)
    return EstimateWithCI(mean, se, reps)


def freeze_alpha0(cfg: ProbeConfig, n: int, reps: int) -> ProbeConfig:
    """Estimate the right-edge speed at ``p0`` once and pin it into the config."""
    est = estimate_alpha_slope(cfg.weights(cfg.p0), n, reps, seed=cfg.seed, workers=cfg.workers,
                               critical=cfg.critical)
    return cfg.with_alpha0(est)


@functools.lru_cache(maxsize=64)
def probe_samples(cfg: ProbeConfig, p: float, n: int | None = None) -> np.ndarray:
    """Passage times to the frozen target at parameter ``p``; seeds shared across ``p``."""
    n = cfg.n if n is None else n
    if cfg.alpha0 is None:
        raise ValueError("alpha0 must be frozen before measuring passage times")
    target = target_point(cfg.alpha0.mean * n, n)
    out = passage_times(cfg.weights(p), target, cfg.reps, cfg.seed, cfg.workers, stream=f"probe-{n}")
    out.flags.writeable = False
    return out


def estimate_f(cfg: ProbeConfig, p: float) -> EstimateWithCI:
    mean, se = _mean_se(probe_samples(cfg, p) / cfg.n)
    return EstimateWithCI(mean, se, cfg.reps)


def is_flat(times: np.ndarray, a: float, n: int) -> np.ndarray:
    """``T == a n``; passage times take values in a lattice spaced far above rounding."""
    return times <= a * n * (1 + 1e-12)


def flat_edge_fraction(cfg: ProbeConfig, p: float, n: int | None = None) -> EstimateWithCI:
    if p < cfg.p0:
        raise ValueError(f"flat-edge fraction is measured at p >= p0, got p={p}")
    n = cfg.n if n is None else n
    hits = is_flat(probe_samples(cfg, p, n), cfg.a, n)
    frac = float(hits.mean())
    return EstimateWithCI(frac, math.sqrt(frac * (1 - frac) / len(hits)), len(hits))


def gap_check(p0: float, p: float, n: int, reps: int, a: float = 1.0, b: float = 2.0,
              seed: int = 0, workers: int = 1, critical: float = CRITICAL_P) -> GapReport:
    """Compare ``alpha(p0) - alpha(p)`` with ``2 (p0 - p)`` on shared seeds.

    The stderr is that of the per-seed paired difference.
    """
    if p > p0:
        raise ValueError("need p <= p0")
    _check_supercritical(p, critical)
    hi = halfline_samples(WeightParams(a, b, p0), n, reps, seed, workers)
    lo = halfline_samples(WeightParams(a, b, p), n, reps, seed, workers)
    keep = [i for i in range(reps) if hi[i] is not None and lo[i] is not None]
    excluded = reps - len(keep)
    if excluded * 2 > reps:
        raise EstimatorAbort(f"{excluded}/{reps} half-line runs died")
    r_hi = np.array([hi[i] for i in keep], dtype=np.float64) / n
    r_lo = np.array([lo[i] for i in keep], dtype=np.float64) / n
    gap, se = _mean_se(r_hi - r_lo)
    return GapReport(
        p0, p, gap, se, 2 * (p0 - p),
        EstimateWithCI(*_mean_se(r_hi), len(keep), excluded),
        EstimateWithCI(*_mean_se(r_lo), len(keep), excluded),
        len(keep), excluded,
    )


def singularity_shape(p0: float, p) -> np.ndarray:
    gap = p0 - np.asarray(p, dtype=np.float64)
    return gap * gap / np.log(1.0 / gap)


def singularity_fit(cfg: ProbeConfig, h_values) -> SingularityFit:
    """One-parameter least squares ``h(p) ~ delta * (p0-p)^2 / log(1/(p0-p))``."""
    h_values = tuple((float(p), est) for p, est in h_values)
    if len(h_values) < 2:
        raise ValueError("need at least two grid points to fit")
    ps = np.array([p for p, _ in h_values])
    if np.any(ps >= cfg.p0):
        raise ValueError("fit points must lie strictly below p0")
    h = np.array([est.mean for _, est in h_values])
    g = singularity_shape(cfg.p0, ps)
    delta = float(g @ h / (g @ g))
    resid = float(np.linalg.norm(h - delta * g))
    not_pos = tuple(p for p, est in h_values if not est.mean > 3 * est.stderr)
    outside = tuple(p for p in ps if cfg.p0 - p >= math.exp(-1))
    return SingularityFit(delta, resid, h_values, not_pos, tuple(float(p) for p in outside))


def h_estimates(cfg: ProbeConfig, grid=None):
    """``(p, f_hat(p) - a)`` for each grid point below ``p0``."""
    out = []
    for p in (cfg.p_grid if grid is None else grid):
        if p >= cfg.p0:
            continue
        est = estimate_f(cfg, p)
        out.append((p, EstimateWithCI(est.mean - cfg.a, est.stderr, est.reps, est.excluded)))
    return out
