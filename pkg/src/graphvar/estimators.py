"""Scikit-learn style wrappers around the functional estimators.

Each estimator takes the graph and its tuning choices in __init__,
consumes the node signal in fit, and exposes results as trailing-
underscore attributes, so the pieces compose with sklearn tooling
(get_params/set_params, clone, pipelines over precomputed signals).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import solvers, variance
from .graphs import Graph
from .solvers import SolverOptions
from .validation import as_signal
from .variance import DEFAULT_LAMBDA_GRID


def _check_fitted(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError(
            f"{type(est).__name__} is not fitted yet; call fit first")


def _solver_options(est) -> SolverOptions:
    return SolverOptions(rho=est.rho, max_iters=est.max_iters,
                         gap_tol=est.gap_tol, cg_tol=est.cg_tol)


class GraphFusedLasso(BaseEstimator):
    """Total-variation denoiser on a fixed graph.

    Parameters
    ----------
    graph : Graph
        The graph the signal lives on.
    lam : float or "auto"
        Penalty weight; "auto" selects from `grid` by BIC.
    grid : sequence of float, optional
        Candidate penalties for lam="auto" (default 10^1..10^5).

    Attributes
    ----------
    signal_ : np.ndarray
        Denoised signal.
    dual_ : np.ndarray
        Edge dual certificate of the fit.
    gap_ : float
        Certified duality gap.
    df_ : int
        Connected components induced by the fitted levels.
    lambda_ : float
        Penalty actually used.
    trace_ : ModelSelectionTrace or None
        Selection trace when lam="auto".
    """

    def __init__(self, graph: Graph = None, lam="auto", grid=None,
                 gap_tol: float = 1e-6, max_iters: int = 10000,
                 rho: float | None = None, cg_tol: float = 1e-8):
        self.graph = graph
        self.lam = lam
        self.grid = grid
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.rho = rho
        self.cg_tol = cg_tol

    def fit(self, X, y=None):
        if self.graph is None:
            raise ValueError("graph must be provided")
        signal = as_signal(X, self.graph.n, "X")
        opts = _solver_options(self)
        if self.lam == "auto":
            grid = self.grid if self.grid is not None else DEFAULT_LAMBDA_GRID
            self.trace_, fit = variance.bic_select(signal, self.graph, grid, opts)
        else:
            self.trace_ = None
            fit = solvers.fused_lasso_graph(signal, self.graph, float(self.lam), opts)
        self.fit_ = fit
        self.signal_ = fit.theta
        self.dual_ = fit.dual_w
        self.gap_ = fit.gap
        self.df_ = fit.df
        self.lambda_ = fit.lam
        self.converged_ = fit.converged
        self.n_iter_ = fit.iters
        return self

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).signal_

    def transform(self, X=None) -> np.ndarray:
        _check_fitted(self, "signal_")
        return self.signal_


class HomoscedasticVariance(BaseEstimator):
    """Constant-variance estimator from DFS-ordered differences.

    Attributes after fit: variance_ (the estimate), order_ (the DFS visit
    order used), pairs_used_.
    """

    def __init__(self, graph: Graph = None, seed=None):
        self.graph = graph
        self.seed = seed

    def fit(self, X, y=None):
        if self.graph is None:
            raise ValueError("graph must be provided")
        signal = as_signal(X, self.graph.n, "X")
        est = variance.homoscedastic_variance(signal, self.graph, self.seed)
        self.estimate_ = est
        self.variance_ = est.v_hat
        self.order_ = est.order
        self.pairs_used_ = est.pairs_used
        return self

    def fit_predict(self, X, y=None) -> float:
        return self.fit(X).variance_


class HeteroscedasticVariance(BaseEstimator):
    """Node-varying variance estimator: fused fits of y and y^2.

    Attributes after fit: variance_ (raw field, may be negative),
    variance_clamped_, mean_ (fitted means), second_moment_, lambda_,
    lambda_prime_, theta_trace_/gamma_trace_ when tuned by BIC.
    """

    def __init__(self, graph: Graph = None, lam="auto", lam_prime="auto",
                 grid=None, gap_tol: float = 1e-6, max_iters: int = 10000,
                 rho: float | None = None, cg_tol: float = 1e-8):
        self.graph = graph
        self.lam = lam
        self.lam_prime = lam_prime
        self.grid = grid
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.rho = rho
        self.cg_tol = cg_tol

    def fit(self, X, y=None):
        if self.graph is None:
            raise ValueError("graph must be provided")
        signal = as_signal(X, self.graph.n, "X")
        opts = _solver_options(self)
        auto = [v == "auto" for v in (self.lam, self.lam_prime)]
        if any(auto) and not all(auto):
            raise ValueError("lam and lam_prime must both be numeric or both 'auto'")
        if all(auto):
            grid = self.grid if self.grid is not None else DEFAULT_LAMBDA_GRID
            fit, ttrace, gtrace = variance.heteroscedastic_variance_auto(
                signal, self.graph, grid, opts)
            self.theta_trace_, self.gamma_trace_ = ttrace, gtrace
        else:
            fit = variance.heteroscedastic_variance(
                signal, self.graph, float(self.lam), float(self.lam_prime), opts)
            self.theta_trace_ = self.gamma_trace_ = None
        self.fit_ = fit
        self.variance_ = fit.v_hat_raw
        self.variance_clamped_ = fit.v_hat_clamped
        self.mean_ = fit.theta_hat
        self.second_moment_ = fit.gamma_hat
        self.lambda_ = fit.lam
        self.lambda_prime_ = fit.lam_prime
        self.converged_ = fit.converged
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).variance_
