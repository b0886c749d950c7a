"""Experiment runner: ``abfpp <experiment> [--config file.json] [--field value ...]``.

Exit codes: 0 success, 2 bad configuration, 3 estimator abort or other
runtime failure, 4 output could not be written.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .estimators import (
    ProbeConfig,
    estimate_f,
    estimate_time_constant,
    flat_edge_fraction,
    freeze_alpha0,
    h_estimates,
    singularity_fit,
)
from .fpp import brute_force_passage_time, first_passage_time
from .lattice import NoiseField, WeightParams, Window, target_point
from .oriented import (
    CRITICAL_P,
    EstimateWithCI,
    EstimatorAbort,
    breakpoint_runs,
    estimate_alpha_slope,
    estimate_tail_probability,
    ratio_from_runs,
    regeneration_inequality_check,
)
from .seeds import default_workers, replicate_seed
from .traces import decompose, trace_properties

log = logging.getLogger("abfpp")

EXPERIMENTS = ("alpha", "fpt", "f-curve", "tail", "breakpoints", "traces", "probe", "oracle")
EXIT_CONFIG, EXIT_RUNTIME, EXIT_OUTPUT = 2, 3, 4

# tiny window used by the oracle experiment: 13 points, 16 edges
ORACLE_WINDOW = Window(-2, 2, -2, 2)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    a: float = 1.0
    b: float = 2.0
    p: float | None = None
    p_grid: list | None = None
    p0: float | None = None
    q: float | None = None
    n: int | None = None
    n_grid: list | None = None
    reps: int = 100
    horizon: int | None = None
    eps: float | None = None
    alpha0: float | None = None
    alpha_n: int | None = None
    alpha_reps: int | None = None
    direction: list | None = None
    critical: float = CRITICAL_P
    seed: int = 0
    workers: int | None = None
    out_path: str | None = None
    format: str = "csv"

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @property
    def ps(self) -> list:
        if self.p_grid is not None:
            return [float(p) for p in self.p_grid]
        if self.p is not None:
            return [float(self.p)]
        raise ConfigError("need p or p_grid")

    @property
    def ns(self) -> list:
        if self.n_grid is not None:
            return [int(n) for n in self.n_grid]
        if self.n is not None:
            return [int(self.n)]
        raise ConfigError("need n or n_grid")

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        try:
            WeightParams(self.a, self.b, 0.5)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        ps = self.ps if self.experiment not in ("probe", "f-curve") or self.p_grid else []
        for p in ps:
            if not 0 <= p <= 1:
                raise ConfigError(f"p={p} outside [0, 1]")
        if self.experiment != "oracle":
            for n in self.ns:
                if n < 1:
                    raise ConfigError("levels must be at least 1")
        if self.experiment in ("alpha", "breakpoints", "tail"):
            for p in ps:
                if p <= self.critical:
                    raise ConfigError(f"p={p} is not supercritical (critical={self.critical})")
        if self.experiment == "tail" and not (self.eps and 0 < self.eps < 1):
            raise ConfigError("tail needs eps in (0, 1)")
        if self.experiment in ("f-curve", "probe"):
            if self.p0 is None or self.p_grid is None:
                raise ConfigError(f"{self.experiment} needs p0 and p_grid")
            self.probe_config(None)
        if self.experiment in ("f-curve", "probe", "tail") and self.alpha0 is None:
            if self.alpha_n is None or self.alpha_reps is None:
                raise ConfigError("either alpha0 or the freezing budget alpha_n/alpha_reps is required")

    def probe_config(self, alpha0: EstimateWithCI | None) -> ProbeConfig:
        q = self.q if self.q is not None else min(self.p_grid)
        try:
            return ProbeConfig(self.p0, q, tuple(p for p in self.p_grid if p <= self.p0), self.ns[0],
                               self.reps, alpha0, self.horizon, self.seed, self.a, self.b,
                               self.critical, self.workers or 1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ResultRow:
    experiment: str
    statistic: str
    a: float
    b: float
    p: float | None
    p0: float | None
    n: int | None
    horizon: int | None
    eps: float | None
    estimate: float
    stderr: float | None
    reps: int
    excluded: int
    seed: int
    version: str
    alpha0: float | None


ROW_FIELDS = tuple(f.name for f in fields(ResultRow))


def _row(cfg: ExperimentConfig, statistic: str, est, **kw) -> ResultRow:
    if isinstance(est, EstimateWithCI):
        vals = dict(estimate=est.mean, stderr=est.stderr, reps=est.reps, excluded=est.excluded)
    else:
        vals = dict(estimate=float(est), stderr=None, reps=kw.pop("reps", cfg.reps), excluded=kw.pop("excluded", 0))
    base = dict(experiment=cfg.experiment, statistic=statistic, a=cfg.a, b=cfg.b, p=None, p0=cfg.p0,
                n=None, horizon=cfg.horizon, eps=cfg.eps, seed=cfg.seed, version=__version__,
                alpha0=cfg.alpha0)
    base.update(vals)
    base.update(kw)
    return ResultRow(**base)


# -- experiments -----------------------------------------------------------------

def _freeze(cfg: ExperimentConfig, p0: float) -> EstimateWithCI:
    if cfg.alpha0 is not None:
        return EstimateWithCI(float(cfg.alpha0), 0.0, 1)
    est = estimate_alpha_slope(WeightParams(cfg.a, cfg.b, p0), cfg.alpha_n, cfg.alpha_reps,
                               seed=cfg.seed, workers=cfg.workers or 1, critical=cfg.critical)
    log.info("frozen alpha0(%.4g) = %.6f +- %.6f", p0, est.mean, est.stderr)
    return est


def _run_alpha(cfg):
    rows = []
    for p in cfg.ps:
        for n in cfg.ns:
            est = estimate_alpha_slope(WeightParams(cfg.a, cfg.b, p), n, cfg.reps, cfg.seed,
                                       cfg.workers or 1, critical=cfg.critical)
            log.info("alpha p=%g n=%d: %.6f (%d excluded)", p, n, est.mean, est.excluded)
            rows.append(_row(cfg, "alpha_slope", est, p=p, n=n))
    return rows


def _run_breakpoints(cfg):
    rows = []
    for p in cfg.ps:
        for N in cfg.ns:
            H = cfg.horizon or N
            runs = breakpoint_runs(WeightParams(cfg.a, cfg.b, p), N, H, cfg.reps, cfg.seed, cfg.workers or 1)
            alpha, kappa = ratio_from_runs(runs)
            covered = held = 0
            for run in runs:
                if run.accepted:
                    _, holds = regeneration_inequality_check(run)
                    covered += len(holds)
                    held += int(holds.sum())
            log.info("breakpoints p=%g N=%d: %d/%d runs rejected", p, N, alpha.excluded, cfg.reps)
            kw = dict(p=p, n=N, horizon=H)
            rows.append(_row(cfg, "alpha_ratio", alpha, **kw))
            rows.append(_row(cfg, "kappa", kappa, **kw))
            rows.append(_row(cfg, "regen_ineq_holds", held / covered if covered else float("nan"),
                             reps=covered, **kw))
    return rows


def _run_fpt(cfg):
    x = cfg.direction or [0.0, 1.0]
    rows = []
    for p in cfg.ps:
        for n in cfg.ns:
            est = estimate_time_constant(x, WeightParams(cfg.a, cfg.b, p), n, cfg.reps, cfg.seed, cfg.workers or 1)
            rows.append(_row(cfg, "time_constant", est, p=p, n=n))
    return rows


def _run_tail(cfg):
    rows = []
    for p in cfg.ps:
        ref = _freeze(cfg, p)
        for n in cfg.ns:
            est = estimate_tail_probability(WeightParams(cfg.a, cfg.b, p), ref.mean, cfg.eps, n, cfg.reps,
                                            cfg.seed, cfg.workers or 1)
            rows.append(_row(cfg, "tail_prob", est, p=p, n=n, alpha0=ref.mean))
    return rows


def _f_curve_rows(cfg, pc: ProbeConfig):
    rows = []
    for p in cfg.p_grid:
        est = estimate_f(pc, p)
        rows.append(_row(cfg, "f_hat", est, p=p, n=pc.n, alpha0=pc.alpha0.mean))
        if p >= pc.p0:
            rows.append(_row(cfg, "flat_fraction", flat_edge_fraction(pc, p), p=p, n=pc.n,
                             alpha0=pc.alpha0.mean))
    return rows


def _run_f_curve(cfg):
    pc = cfg.probe_config(_freeze(cfg, cfg.p0))
    return _f_curve_rows(cfg, pc)


def _run_probe(cfg):
    pc = cfg.probe_config(_freeze(cfg, cfg.p0))
    rows = _f_curve_rows(cfg, pc)
    fit = singularity_fit(pc, h_estimates(pc))
    kw = dict(n=pc.n, alpha0=pc.alpha0.mean)
    rows.append(_row(cfg, "delta_hat", fit.delta_hat, **kw))
    rows.append(_row(cfg, "fit_residual_norm", fit.residual_norm, **kw))
    rows.append(_row(cfg, "h_not_positive_count", len(fit.not_positive), **kw))
    return rows


def _run_traces(cfg):
    rows = []
    for p in cfg.ps:
        wp = WeightParams(cfg.a, cfg.b, p)
        for n in cfg.ns:
            target = target_point((cfg.alpha0 if cfg.alpha0 is not None else 0.5) * n, n)
            stats = {k: [] for k in ("suboptimal_count", "j", "x_disjoint", "j_gap_ok", "d_opt_agree",
                                     "retained_upward_a", "budget_holds")}
            for i in range(cfg.reps):
                f = NoiseField(replicate_seed(cfg.seed, "traces", i))
                res = first_passage_time(target, f, wp)
                dec = decompose(res.geodesic, f, wp)
                stats["suboptimal_count"].append(dec.suboptimal_count)
                stats["j"].append(dec.j)
                for name, ok in trace_properties(res.geodesic, f, wp, n).items():
                    stats[name].append(ok)
            for name, vals in stats.items():
                vals = np.asarray(vals, dtype=np.float64)
                se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
                rows.append(_row(cfg, name, EstimateWithCI(float(vals.mean()), se, len(vals)), p=p, n=n))
    return rows


def oracle_instance(seed: int, index: int):
    """Field and target of one tiny-window oracle comparison."""
    s = replicate_seed(seed, "oracle", index)
    pts = [pt for pt in ORACLE_WINDOW.points() if pt != (0, 0)]
    return NoiseField(s), pts[s % len(pts)]


def _run_oracle(cfg):
    rows = []
    for p in cfg.ps:
        wp = WeightParams(cfg.a, cfg.b, p)
        matches = 0
        for i in range(cfg.reps):
            f, target = oracle_instance(cfg.seed, i)
            fast = first_passage_time(target, f, wp, window=ORACLE_WINDOW).time
            matches += fast == brute_force_passage_time(target, f, wp, ORACLE_WINDOW)
        log.info("oracle p=%g: %d/%d matches", p, matches, cfg.reps)
        rows.append(_row(cfg, "oracle_match_fraction", matches / cfg.reps, p=p))
    return rows


RUNNERS = {
    "alpha": _run_alpha,
    "breakpoints": _run_breakpoints,
    "fpt": _run_fpt,
    "tail": _run_tail,
    "f-curve": _run_f_curve,
    "probe": _run_probe,
    "traces": _run_traces,
    "oracle": _run_oracle,
}


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    cfg.validate()
    return RUNNERS[cfg.experiment](cfg)


# -- output ------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in ROW_FIELDS])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    def clean(v):
        return None if isinstance(v, float) and math.isnan(v) else v
    return json.dumps([{k: clean(getattr(r, k)) for k in ROW_FIELDS} for r in rows], indent=2) + "\n"


def emit(rows, fmt: str, out_path: str | None) -> None:
    if not rows:
        raise ValueError("nothing to emit")
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows)
    if out_path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- command line ------------------------------------------------------------------

_OVERRIDES = {
    "a": float, "b": float, "p": float, "p0": float, "q": float, "n": int, "reps": int,
    "horizon": int, "eps": float, "alpha0": float, "alpha_n": int, "alpha_reps": int,
    "critical": float, "seed": int, "workers": int,
}
_LIST_OVERRIDES = {"p_grid": float, "n_grid": int, "direction": float}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abfpp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
        for field_name, typ in _OVERRIDES.items():
            flags = {f"--{field_name}", f"--{field_name.replace('_', '-')}"}
            sp.add_argument(*sorted(flags), dest=field_name, type=typ)
        for field_name, typ in _LIST_OVERRIDES.items():
            flags = {f"--{field_name}", f"--{field_name.replace('_', '-')}"}
            sp.add_argument(*sorted(flags), dest=field_name, type=typ, nargs="+")
        sp.add_argument("--out", "--out_path", "--out-path", dest="out_path")
        sp.add_argument("--format", choices=("csv", "json"))
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if data.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {args.experiment!r}")
    data["experiment"] = args.experiment
    for name in (*_OVERRIDES, *_LIST_OVERRIDES, "out_path", "format"):
        val = getattr(args, name, None)
        if val is not None:
            data[name] = val
    cfg = ExperimentConfig.from_dict(data)
    if cfg.workers is None:
        cfg.workers = default_workers()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimatorAbort, ValueError, RuntimeError) as exc:
        print(f"{cfg.experiment} aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        emit(rows, cfg.format, cfg.out_path)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
