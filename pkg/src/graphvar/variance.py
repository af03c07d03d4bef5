"""Variance estimators and model selection.

Two estimators:

* homoscedastic: squared differences of the data along a randomized
  depth-first visit order, averaged over the first floor(n/2)-1 disjoint
  pairs; linear time in n + |E|.
* heteroscedastic: v_hat_i = gamma_hat_i - theta_hat_i^2, where theta_hat
  is the fused lasso of y and gamma_hat the fused lasso of the entrywise
  square y^2 with its own penalty.

Penalties are picked by BIC (residual sum of squares + 2 df log n, with
df the number of connected components induced by the fitted levels); the
second-moment fit uses a robust variant whose residual targets are
clipped at the 0.95-quantile of y^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import solvers
from .graphs import DfsOrder, Graph, dfs_order, level_components
from .solvers import DF_TOL_SCALE, FusedLassoFit, SolverOptions
from .validation import SolverError, as_signal, check_lambda, require_connected


@dataclass(frozen=True)
class HomoscedasticEstimate:
    v_hat: float
    order: DfsOrder
    pairs_used: int


@dataclass
class HeteroscedasticFit:
    """Joint mean/second-moment fit; v_hat_raw may be negative."""

    theta_hat: np.ndarray
    gamma_hat: np.ndarray
    v_hat_raw: np.ndarray
    v_hat_clamped: np.ndarray
    lam: float
    lam_prime: float
    theta_fit: FusedLassoFit
    gamma_fit: FusedLassoFit

    @property
    def converged(self) -> bool:
        return self.theta_fit.converged and self.gamma_fit.converged


@dataclass
class ModelSelectionTrace:
    grid: list[float]
    scores: list[float]
    dfs: list[int]
    chosen_index: int

    def chosen_lambda(self) -> float:
        return self.grid[self.chosen_index]


DEFAULT_LAMBDA_GRID = (1e1, 1e2, 1e3, 1e4, 1e5)


def homoscedastic_variance(y, g: Graph, seed=None) -> HomoscedasticEstimate:
    """Difference-based variance estimate along a seeded random DFS order.

    v_hat averages (y[sigma(2i)] - y[sigma(2i-1)])^2 / 2 over the first
    floor(n/2)-1 disjoint pairs of the visit order (the trailing pair is
    left out by construction). Cost is O(n + |E|).
    """
    y = as_signal(y, g.n, "y")
    require_connected(g, "homoscedastic_variance")
    if g.n < 4:
        raise ValueError(f"homoscedastic_variance needs n >= 4, got n={g.n}")
    order = dfs_order(g, seed)
    pairs = g.n // 2 - 1
    sigma = order.sigma
    diffs = y[sigma[1:2 * pairs:2]] - y[sigma[0:2 * pairs:2]]
    v_hat = float(diffs @ diffs) / (2 * pairs)
    return HomoscedasticEstimate(v_hat=v_hat, order=order, pairs_used=pairs)


def heteroscedastic_variance(y, g: Graph, lam: float, lam_prime: float,
                             opts: SolverOptions | None = None) -> HeteroscedasticFit:
    """Plug-in variance field: fused lasso on y and on y^2, then subtract."""
    y = as_signal(y, g.n, "y")
    lam = check_lambda(lam, "lambda")
    lam_prime = check_lambda(lam_prime, "lambda_prime")
    opts = opts or SolverOptions()
    theta_fit = solvers.fused_lasso_graph(y, g, lam, opts)
    gamma_fit = solvers.fused_lasso_graph(y * y, g, lam_prime, opts)
    return _assemble(theta_fit, gamma_fit)


def _assemble(theta_fit: FusedLassoFit, gamma_fit: FusedLassoFit) -> HeteroscedasticFit:
    raw = gamma_fit.theta - theta_fit.theta**2
    return HeteroscedasticFit(
        theta_hat=theta_fit.theta,
        gamma_hat=gamma_fit.theta,
        v_hat_raw=raw,
        v_hat_clamped=np.maximum(raw, 0.0),
        lam=theta_fit.lam,
        lam_prime=gamma_fit.lam,
        theta_fit=theta_fit,
        gamma_fit=gamma_fit,
    )


def degrees_of_freedom(fit: FusedLassoFit, g: Graph) -> int:
    """Connected components induced by the fitted levels (tolerance-merged)."""
    theta = as_signal(fit.theta, g.n, "fit.theta")
    tol = DF_TOL_SCALE * max(1.0, float(np.abs(theta).max(initial=0.0)))
    return level_components(g, theta, tol)[0]


def risk_estimate(y, fit: FusedLassoFit, v_hat: float) -> float:
    """Unbiased-risk style score ||y - theta_hat||^2 + 2 * v_hat * df."""
    y = as_signal(y, None, "y")
    if v_hat < 0:
        raise ValueError(f"v_hat must be nonnegative, got {v_hat}")
    resid = y - fit.theta
    return float(resid @ resid + 2.0 * v_hat * fit.df)


def _grid_fits(data: np.ndarray, g: Graph, grid, opts: SolverOptions):
    """Fit every grid value, ascending with warm starts; reuse the fused
    certificate for penalties at or above the fusion ceiling."""
    grid = [check_lambda(v, "grid value") for v in grid]
    if not grid:
        raise ValueError("lambda grid must be nonempty")
    order = np.argsort(grid, kind="stable")
    try:
        w_ls = solvers._min_norm_dual(data, g)
        lam_ceiling = float(np.abs(w_ls).max(initial=0.0))
    except SolverError:
        w_ls, lam_ceiling = None, math.inf
    fits: list[FusedLassoFit | None] = [None] * len(grid)
    prev = None
    for idx in order:
        lam = grid[idx]
        if w_ls is not None and lam >= lam_ceiling:
            fits[idx] = solvers.fused_fit(data, g, lam, w_ls)
        else:
            fits[idx] = solvers.fused_lasso_graph(data, g, lam, opts, warm=prev)
            prev = fits[idx]
    return grid, fits


def _select(targets: np.ndarray, grid, fits, n: int):
    logn = math.log(n)
    scores, dfs = [], []
    for fit in fits:
        resid = targets - fit.theta
        scores.append(float(resid @ resid + 2.0 * fit.df * logn))
        dfs.append(fit.df)
    usable = [i for i, fit in enumerate(fits) if fit.converged]
    if not usable:
        raise SolverError("no penalty in the grid produced a converged fit")
    # minimize the score; break ties toward the smaller lambda
    chosen = min(usable, key=lambda i: (scores[i], grid[i]))
    trace = ModelSelectionTrace(grid=list(grid), scores=scores, dfs=dfs,
                                chosen_index=chosen)
    return trace, fits[chosen]


def bic_select(y, g: Graph, grid=DEFAULT_LAMBDA_GRID,
               opts: SolverOptions | None = None):
    """Pick lambda minimizing ||y - theta(lambda)||^2 + 2 df(lambda) log n."""
    y = as_signal(y, g.n, "y")
    opts = opts or SolverOptions()
    grid, fits = _grid_fits(y, g, grid, opts)
    return _select(y, grid, fits, g.n)


def nearest_rank_quantile(values, q: float) -> float:
    """Order-statistic quantile: the value at rank ceil(q * n) of the sort."""
    values = as_signal(values, None, "values")
    if values.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    rank = math.ceil(q * values.size)
    return float(np.sort(values)[rank - 1])


def robust_bic_select(y, g: Graph, grid=DEFAULT_LAMBDA_GRID,
                      opts: SolverOptions | None = None):
    """Pick lambda' for the second-moment fit on y^2.

    Residual targets are min(q, y_i^2) with q the nearest-rank
    0.95-quantile of {y_i^2}, which mutes outliers in the selection step;
    the fits themselves use the raw squares.
    """
    y = as_signal(y, g.n, "y")
    opts = opts or SolverOptions()
    ysq = y * y
    targets = np.minimum(nearest_rank_quantile(ysq, 0.95), ysq)
    grid, fits = _grid_fits(ysq, g, grid, opts)
    return _select(targets, grid, fits, g.n)


def heteroscedastic_variance_auto(y, g: Graph, grid=DEFAULT_LAMBDA_GRID,
                                  opts: SolverOptions | None = None):
    """Full pipeline: BIC for lambda on y, then robust BIC for lambda' on y^2.

    Returns (fit, theta_trace, gamma_trace).
    """
    y = as_signal(y, g.n, "y")
    opts = opts or SolverOptions()
    theta_trace, theta_fit = bic_select(y, g, grid, opts)
    gamma_trace, gamma_fit = robust_bic_select(y, g, grid, opts)
    return _assemble(theta_fit, gamma_fit), theta_trace, gamma_trace
