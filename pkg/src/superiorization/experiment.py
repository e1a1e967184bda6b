"""Batch CT reconstruction experiments: configuration, trials, statistics, exports."""
from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .art import ArtConfig, ArtOperator
from .engine import FeasibilityProblem, RunTrace, Schedule, ZeroOracle, superiorize
from .image import ImageGrid, export_image, total_variation
from .perturbations import ComponentWiseTV, NegativeGradientTV
from .tomography import (FanBeamGeometry, add_noise, build_system_matrix, forward_project,
                         load_system, save_system, shepp_logan)

logger = logging.getLogger(__name__)

METHODS = ("cw", "ng", "none")
METRIC_COLUMNS = ("trial", "method", "iterations", "time_s", "tv_out", "prox_out", "rel_error", "terminated")
SERIES_COLUMNS = ("k", "time_s", "tv", "prox", "log10_prox")
SUMMARY_FIELDS = ("iterations", "time_s", "tv_out", "prox_out", "rel_error")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Experiment parameters.

    In JSON files and dicts the relaxation parameter is spelled ``lambda``
    and the method may be a single name or a list run on shared data.
    """

    J: int = 256
    views: int = 24
    method: tuple = ("cw",)
    relaxation: float = 1.0
    epsilon: float = 1.0
    eta0: float = 0.2
    kernel: float = 0.995
    nk: int = 10
    noise_level: float = 0.0
    seed: int = 0
    trials: int = 1
    max_iter: int = 5000
    output_dir: Optional[str] = "results"
    strict: bool = False
    cw_bound: str = "ball"

    def __post_init__(self):
        if isinstance(self.method, str):
            self.method = tuple(m.strip() for m in self.method.split(",") if m.strip())
        self.method = tuple(self.method)
        if self.method == ("all",):
            self.method = METHODS
        self.validate()

    def validate(self):
        bad = [m for m in self.method if m not in METHODS]
        if not self.method or bad:
            raise ConfigError(f"method must be drawn from {METHODS}, got {self.method!r}")
        if len(set(self.method)) != len(self.method):
            raise ConfigError(f"duplicate methods in {self.method!r}")
        if self.cw_bound not in ("ball", "pixel"):
            raise ConfigError(f"cw_bound must be 'ball' or 'pixel', got {self.cw_bound!r}")
        checks = [
            (_is_int(self.J) and self.J >= 16, "J must be an integer >= 16"),
            (_is_int(self.views) and self.views >= 1, "views must be a positive integer"),
            (0 < self.relaxation < 2, "lambda must lie in (0, 2)"),
            (self.epsilon > 0, "epsilon must be positive"),
            (self.eta0 > 0, "eta0 must be positive"),
            (0 < self.kernel < 1, "kernel must lie in (0, 1)"),
            (_is_int(self.nk) and self.nk >= 1, "nk must be a positive integer"),
            (self.noise_level >= 0, "noise_level must be nonnegative"),
            (_is_int(self.seed), "seed must be an integer"),
            (_is_int(self.trials) and self.trials >= 1, "trials must be a positive integer"),
            (_is_int(self.max_iter) and self.max_iter >= 1, "max_iter must be a positive integer"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "lambda" in data:
            data["relaxation"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["lambda"] = data.pop("relaxation")
        data["method"] = list(self.method)
        return data

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.eta0, self.kernel, self.nk)


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass
class TrialMetrics:
    trial: int
    method: str
    iterations: int
    time_s: float
    tv_out: float
    prox_out: float
    rel_error: float
    terminated: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: list
    traces: dict = field(default_factory=dict)
    phantom: Optional[np.ndarray] = None

    def summary(self) -> dict:
        return summarize(self.metrics)


def make_oracle(method: str, cw_bound: str = "ball"):
    if method == "cw":
        return ComponentWiseTV(cw_bound)
    if method == "ng":
        return NegativeGradientTV()
    if method == "none":
        return ZeroOracle(total_variation)
    raise ConfigError(f"unknown method {method!r}")


def system_for(config: ExperimentConfig, cache_dir=None):
    """Phantom, system matrix and noise-free data, reusing a cached matrix when present."""
    grid = ImageGrid(config.J)
    geometry = FanBeamGeometry.evenly_spaced(config.J, config.views)
    phantom = shepp_logan(config.J)
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"system_J{config.J}_views{config.views}.bin"
    if cache is not None and cache.exists():
        A, _ = load_system(cache)
        logger.info("loaded system matrix from %s", cache)
    else:
        A = build_system_matrix(geometry, grid)
        if cache is not None:
            cache.parent.mkdir(parents=True, exist_ok=True)
            save_system(cache, A, forward_project(A, phantom))
    return phantom, A, forward_project(A, phantom)


def run_trial(A, y, phantom, method: str, config: ExperimentConfig, trial: int = 0):
    op = ArtOperator(A, y, ArtConfig(config.relaxation))
    problem = FeasibilityProblem(op, op.proximity, config.epsilon)
    u, trace = superiorize(problem, make_oracle(method, config.cw_bound), config.schedule, np.zeros(A.L),
                           max_iter=config.max_iter, strict=config.strict)
    metrics = TrialMetrics(
        trial=trial,
        method=method,
        iterations=trace.iterations,
        time_s=trace.records[-1].time_s if trace.records else 0.0,
        tv_out=total_variation(u),
        prox_out=trace.final_prox,
        rel_error=float(np.linalg.norm(u - phantom) / np.linalg.norm(phantom)),
        terminated=trace.terminated,
    )
    if not trace.terminated:
        logger.warning("%s trial %d stopped at max_iter=%d with prox %.4g", method, trial,
                       config.max_iter, trace.final_prox)
    return u, trace, metrics


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every trial of every configured method on shared phantom, matrix and schedule.

    Trial ``t`` uses noise seed ``config.seed + t``.  With ``write`` set (and
    an ``output_dir``) the run leaves ``metrics.csv``, ``summary.csv``,
    ``config.json``, PGM images and per-iteration series behind.
    """
    out = Path(config.output_dir) if (write and config.output_dir) else None
    if out is not None:
        for sub in ("images", "series", "traces"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    phantom, A, y_clean = system_for(config, out / "cache" if out is not None else None)
    if out is not None:
        export_image(out / "images" / "phantom.pgm", phantom)

    result = ExperimentResult(config=config, metrics=[], phantom=phantom)
    for trial in range(config.trials):
        y = add_noise(y_clean, config.noise_level, config.seed + trial)
        for method in config.method:
            u, trace, metrics = run_trial(A, y, phantom, method, config, trial)
            logger.info("%s trial %d: %d iterations, TV %.2f, prox %.4g, %.1f s", method, trial,
                        metrics.iterations, metrics.tv_out, metrics.prox_out, metrics.time_s)
            result.metrics.append(metrics)
            result.traces[(method, trial)] = trace
            if out is not None:
                stem = f"{method}_trial{trial:03d}"
                export_image(out / "images" / f"{stem}.pgm", u)
                export_series(trace, out / "series" / f"{stem}.csv")
                trace.to_csv(out / "traces" / f"{stem}.csv")
    if out is not None:
        export_metrics(result.metrics, out / "metrics.csv")
        export_summary(summarize(result.metrics), out / "summary.csv")
    return result


def _mean_std(values):
    values = [float(v) for v in values]
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize(metrics) -> dict:
    """Per-method sample mean and standard deviation (n - 1 denominator) of each metric."""
    if not metrics:
        raise ValueError("cannot summarize an empty metrics table")
    by_method = {}
    for row in metrics:
        by_method.setdefault(row.method, []).append(row)
    summary = {}
    for method, rows in by_method.items():
        stats = {name: _mean_std(getattr(r, name) for r in rows) for name in SUMMARY_FIELDS}
        stats["terminated"] = _mean_std(float(r.terminated) for r in rows)
        stats["n"] = len(rows)
        summary[method] = stats
    return summary


def export_summary(summary: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        columns = [*SUMMARY_FIELDS, "terminated"]
        writer.writerow(["method", "n"] + [f"{c}_{s}" for c in columns for s in ("mean", "std")])
        for method, stats in summary.items():
            writer.writerow([method, stats["n"]] + [repr(v) for c in columns for v in stats[c]])


def export_metrics(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for m in metrics:
            writer.writerow([m.trial, m.method, m.iterations, repr(m.time_s), repr(m.tv_out),
                             repr(m.prox_out), repr(m.rel_error), int(m.terminated)])


def read_metrics(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [TrialMetrics(
            trial=int(row["trial"]), method=row["method"], iterations=int(row["iterations"]),
            time_s=float(row["time_s"]), tv_out=float(row["tv_out"]),
            prox_out=float(row["prox_out"]), rel_error=float(row["rel_error"]),
            terminated=bool(int(row["terminated"])),
        ) for row in reader]


def export_series(trace: RunTrace, path) -> None:
    """TV and proximity of ``y^1, y^2, ...`` against cumulative wall time."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for r in trace.records:
            log_prox = math.log10(r.prox_out) if r.prox_out > 0 else -math.inf
            writer.writerow([r.k + 1, repr(r.time_s), repr(r.phi_out), repr(r.prox_out), repr(log_prox)])
