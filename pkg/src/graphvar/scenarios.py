"""Generative scenarios and standardized error laws.

Grid scenarios place signals on the m x m lattice (m = sqrt(n)) with the
region thresholds expressed in units of the side length m; K-NN scenarios
draw covariates uniformly on [0,1]^d and evaluate piecewise signal and
variance surfaces at them. Every error law is standardized to mean zero,
variance one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .graphs import build_chain, build_grid, build_knn_graph
from .validation import as_signal

GRID_SCENARIOS = ("S1", "S2", "S3", "S4", "S5", "S6")
KNN_SCENARIOS = ("S7", "S8")
HOMOSCEDASTIC_IDS = ("S1", "S2", "S3")
HETEROSCEDASTIC_IDS = ("S4", "S5", "S6", "S7", "S8", "Example1")
ERROR_LAWS = ("gaussian", "laplace", "student_t", "stretched_exp")


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Complete generative description of one experiment cell.

    v_star is the constant variance for the homoscedastic scenarios; the
    heteroscedastic scenarios derive their variance fields from the
    scenario rule, and Custom specs carry explicit per-node arrays.
    """

    id: str
    graph_kind: str  # chain | grid2d | knn
    n: int
    v_star: object = None  # float for S1-S3; None for rule-based; array for Custom
    theta_star: object = None  # array for Custom; None -> scenario rule
    error_law: str = "gaussian"
    law_param: float | None = None
    seed: object = 0
    knn_k: int = 5
    knn_dim: int = 2

    def __post_init__(self):
        if self.graph_kind not in ("chain", "grid2d", "knn"):
            raise ValueError(f"unknown graph_kind {self.graph_kind!r}")
        if self.error_law not in ERROR_LAWS:
            raise ValueError(f"unknown error law {self.error_law!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.id in HOMOSCEDASTIC_IDS:
            if not np.isscalar(self.v_star) or float(self.v_star) <= 0:
                raise ValueError(f"{self.id} needs a positive constant v_star")
        if self.error_law == "student_t":
            nu = self.law_param
            if nu is None or nu <= 4:
                raise ValueError("student_t requires law_param nu > 4")
            if self.id in HETEROSCEDASTIC_IDS and nu <= 8:
                raise ValueError(
                    "heteroscedastic scenarios need a finite 8th moment: nu > 8")
        if self.error_law == "stretched_exp":
            if self.law_param is None or self.law_param <= 0:
                raise ValueError("stretched_exp requires law_param alpha > 0")
        if self.id in GRID_SCENARIOS and self.graph_kind != "grid2d":
            raise ValueError(f"{self.id} is a grid scenario")
        if self.id in KNN_SCENARIOS and self.graph_kind != "knn":
            raise ValueError(f"{self.id} is a K-NN scenario")
        if self.id == "Example1" and self.graph_kind != "chain":
            raise ValueError("Example1 is a chain scenario")
        if self.id == "S8" and self.knn_dim < 2:
            raise ValueError("S8 needs at least 2 covariate dimensions")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("v_star", "theta_star"):
            if isinstance(d[key], np.ndarray):
                d[key] = d[key].tolist()
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        for key in ("v_star", "theta_star"):
            if isinstance(d.get(key), list):
                d[key] = np.asarray(d[key], dtype=np.float64)
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))


def _stretched_exp_sigma(alpha: float) -> float:
    # sqrt of Gamma(3/a) / Gamma(1/a), the variance of sign * W^(1/a)
    return math.exp(0.5 * (gammaln(3.0 / alpha) - gammaln(1.0 / alpha)))


def _sample_errors(law: str, n: int, rng: np.random.Generator,
                   param: float | None) -> np.ndarray:
    if law == "gaussian":
        return rng.standard_normal(n)
    if law == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), n)
    if law == "student_t":
        nu = float(param)
        return rng.standard_t(nu, n) / math.sqrt(nu / (nu - 2.0))
    if law == "stretched_exp":
        alpha = float(param)
        mags = rng.gamma(1.0 / alpha, 1.0, n) ** (1.0 / alpha)
        signs = rng.integers(0, 2, n) * 2.0 - 1.0
        return signs * mags / _stretched_exp_sigma(alpha)
    raise ValueError(f"unknown error law {law!r}")


def sample_errors(law: str, n: int, seed=None, law_param: float | None = None) -> np.ndarray:
    """n independent draws with mean 0 and variance 1 under the given law."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if law == "student_t" and (law_param is None or law_param <= 4):
        raise ValueError("student_t requires law_param nu > 4")
    if law == "stretched_exp" and (law_param is None or law_param <= 0):
        raise ValueError("stretched_exp requires law_param alpha > 0")
    return _sample_errors(law, n, np.random.default_rng(seed), law_param)


def _lattice(m: int):
    k, l = np.meshgrid(np.arange(1, m + 1), np.arange(1, m + 1), indexing="ij")
    return k.astype(np.float64), l.astype(np.float64)


def _grid_theta(scenario: str, m: int) -> np.ndarray:
    k, l = _lattice(m)
    if scenario in ("S1",):
        inside = (np.abs(k - m / 2) < m / 4) & (np.abs(l - m / 2) < m / 8)
        return inside.astype(np.float64).ravel()
    if scenario in ("S2", "S5"):
        inside = (k - m / 4) ** 2 + (l - m / 4) ** 2 < (m / 5) ** 2
        return inside.astype(np.float64).ravel()
    if scenario in ("S3", "S4", "S6"):
        return np.zeros(m * m)
    raise ValueError(f"no grid rule for scenario {scenario!r}")


def _grid_v(scenario: str, m: int) -> np.ndarray:
    k, l = _lattice(m)
    if scenario == "S4":
        inside = (np.abs(k - m / 2) < m / 3) & (np.abs(l - m / 2) < m / 3)
        return np.where(inside, 1.75, 1.0).ravel()
    if scenario == "S5":
        inside = (k - m / 2) ** 2 + (l - m / 2) ** 2 < (m / 4) ** 2
        return np.where(inside, 1.5, 0.5).ravel()
    if scenario == "S6":
        lo = (k - m / 4) ** 2 + (l - m / 4) ** 2 < (m / 5) ** 2
        hi = (k - 3 * m / 4) ** 2 + (l - 3 * m / 4) ** 2 < (m / 5) ** 2
        return np.where(lo, 0.5, np.where(hi, 2.0, 1.0)).ravel()
    raise ValueError(f"no variance rule for scenario {scenario!r}")


def _knn_theta(scenario: str, x: np.ndarray) -> np.ndarray:
    if scenario == "S7":
        return np.zeros(x.shape[0])
    if scenario == "S8":
        return np.where(x[:, 1] > 0.5, 0.0, -1.0)
    raise ValueError(f"no K-NN rule for scenario {scenario!r}")


def _knn_v(scenario: str, x: np.ndarray) -> np.ndarray:
    if scenario == "S7":
        return np.where(x[:, 0] > 0.5, 1.75, 0.25)
    if scenario == "S8":
        lo = (x[:, 0] - 0.25) ** 2 + (x[:, 1] - 0.25) ** 2 < 0.2**2
        hi = (x[:, 0] - 0.75) ** 2 + (x[:, 1] - 0.75) ** 2 < 0.2**2
        return np.where(lo, 0.5, np.where(hi, 2.0, 1.0))
    raise ValueError(f"no K-NN variance rule for scenario {scenario!r}")


def _example1(n: int):
    i = np.arange(1, n + 1, dtype=np.float64)  # 1-based node index
    theta = ((i > n / 4) & (i <= 3 * n / 4)).astype(np.float64)
    cut = math.floor(n / 7)
    v = np.where(i <= cut, 1.0, np.where(i <= n / 2, 1.5**2, 0.6**2))
    return theta, v


def generate_scenario(spec: ScenarioSpec):
    """Materialize one data set: returns (graph, y, theta_star, v_star).

    The draw order under the scenario seed is fixed: covariates first
    (K-NN scenarios only), then the standardized errors.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n

    if spec.graph_kind == "grid2d":
        m = math.isqrt(n)
        if m * m != n:
            raise ValueError(f"grid scenarios need a square n, got {n}")
        g = build_grid(m, 2)
    elif spec.graph_kind == "chain":
        g = build_chain(n)
    else:
        x = rng.random((n, spec.knn_dim))
        g = build_knn_graph(x, spec.knn_k)

    if spec.id in GRID_SCENARIOS:
        m = math.isqrt(n)
        theta = _grid_theta(spec.id, m)
        v = (np.full(n, float(spec.v_star)) if spec.id in HOMOSCEDASTIC_IDS
             else _grid_v(spec.id, m))
    elif spec.id in KNN_SCENARIOS:
        theta = _knn_theta(spec.id, g.coords)
        v = _knn_v(spec.id, g.coords)
    elif spec.id == "Example1":
        theta, v = _example1(n)
    elif spec.id == "Custom":
        theta = as_signal(spec.theta_star, n, "theta_star")
        v = (np.full(n, float(spec.v_star)) if np.isscalar(spec.v_star)
             else as_signal(spec.v_star, n, "v_star"))
    else:
        raise ValueError(f"unknown scenario id {spec.id!r}")

    if np.any(v <= 0):
        raise ValueError("v_star must be strictly positive")
    eps = _sample_errors(spec.error_law, n, rng, spec.law_param)
    y = theta + np.sqrt(v) * eps
    return g, y, theta, v


def chain_threepiece_spec(n: int, v0: float = 1.0, error_law: str = "gaussian",
                          law_param: float | None = None, seed=0) -> ScenarioSpec:
    """Chain scenario with a fixed 3-piece constant mean (levels 0, 1, 0)."""
    theta = np.zeros(n)
    theta[n // 3: 2 * n // 3] = 1.0
    return ScenarioSpec(id="Custom", graph_kind="chain", n=n, v_star=float(v0),
                        theta_star=theta, error_law=error_law,
                        law_param=law_param, seed=seed)
