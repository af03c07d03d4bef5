"""Monte-Carlo execution with splittable per-replicate seeding."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .scenarios import ScenarioSpec, generate_scenario
from .solvers import SolverOptions
from .validation import SolverError
from .variance import (DEFAULT_LAMBDA_GRID, heteroscedastic_variance,
                       heteroscedastic_variance_auto, homoscedastic_variance)

METRIC_HOMOSCEDASTIC = "abs_err_homoscedastic"
METRIC_HETEROSCEDASTIC = "mse_variance_field"


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator a Monte-Carlo run applies to each replicate."""

    kind: str = "homoscedastic"  # homoscedastic | heteroscedastic
    lam: object = "auto"
    lam_prime: object = "auto"
    grid: tuple = DEFAULT_LAMBDA_GRID
    opts: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.kind not in ("homoscedastic", "heteroscedastic"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        auto = [v == "auto" for v in (self.lam, self.lam_prime)]
        if self.kind == "heteroscedastic" and auto[0] != auto[1]:
            raise ValueError("lam and lam_prime must both be numeric or both 'auto'")


@dataclass
class McReport:
    """Per-replicate metric values and their summary for one experiment cell."""

    spec: ScenarioSpec
    reps: int
    metric: str
    per_rep: list[float]
    mean: float
    std_error: float | None
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "reps": self.reps,
            "metric": self.metric,
            "per_rep": self.per_rep,
            "mean": self.mean,
            "std_error": self.std_error,
            "wall_time": self.wall_time,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "McReport":
        d = dict(d)
        d["spec"] = ScenarioSpec.from_dict(d["spec"])
        return cls(**d)


def derive_seed(base_seed, *key: int) -> int:
    """Deterministic child seed for (base_seed, key), independent of order."""
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1)[0])


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("GRAPHVAR_THREADS")
    return max(1, int(env)) if env else 1


def _one_replicate(spec: ScenarioSpec, config: EstimatorConfig,
                   base_seed, rep: int) -> float:
    data_seed = derive_seed(base_seed, rep, 0)
    est_seed = derive_seed(base_seed, rep, 1)
    g, y, _theta, v = generate_scenario(replace(spec, seed=data_seed))
    if config.kind == "homoscedastic":
        if not np.isscalar(spec.v_star):
            raise ValueError("homoscedastic runs need a constant v_star")
        est = homoscedastic_variance(y, g, est_seed)
        return abs(est.v_hat - float(spec.v_star))
    if config.lam == "auto":
        fit, _, _ = heteroscedastic_variance_auto(y, g, config.grid, config.opts)
    else:
        fit = heteroscedastic_variance(y, g, float(config.lam),
                                       float(config.lam_prime), config.opts)
    if not fit.converged:
        raise SolverError(f"replicate {rep}: solver did not converge")
    return float(np.mean((fit.v_hat_raw - v) ** 2))


def run_monte_carlo(spec: ScenarioSpec, config: EstimatorConfig, reps: int,
                    base_seed=0, workers: int | None = None) -> McReport:
    """Run independent replicates; replicate r is seeded from (base_seed, r).

    Results are identical for any worker count; a replicate failure aborts
    the whole report rather than being dropped.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    t0 = time.perf_counter()
    nworkers = _worker_count(workers)
    if nworkers == 1:
        values = [_one_replicate(spec, config, base_seed, r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            values = list(pool.map(
                lambda r: _one_replicate(spec, config, base_seed, r),
                range(reps)))
    metric = (METRIC_HOMOSCEDASTIC if config.kind == "homoscedastic"
              else METRIC_HETEROSCEDASTIC)
    mean = float(np.mean(values))
    std_error = (float(np.std(values, ddof=1) / math.sqrt(reps))
                 if reps > 1 else None)
    return McReport(spec=spec, reps=reps, metric=metric,
                    per_rep=[float(v) for v in values], mean=mean,
                    std_error=std_error, wall_time=time.perf_counter() - t0)


def rate_slope(reports: list[McReport]) -> float:
    """OLS slope of log(mean metric) against log(n) across reports."""
    if len(reports) < 3:
        raise ValueError("rate_slope needs at least 3 reports")
    ns = [r.spec.n for r in reports]
    if len(set(ns)) != len(ns):
        raise ValueError("reports must have distinct n")
    families = {(r.spec.id, r.spec.graph_kind, r.spec.error_law) for r in reports}
    if len(families) != 1:
        raise ValueError("reports must come from a single scenario family")
    if any(r.mean <= 0 for r in reports):
        raise ValueError("mean metric must be positive to take logs")
    x = np.log([float(n) for n in ns])
    z = np.log([r.mean for r in reports])
    return float(np.polyfit(x, z, 1)[0])
