"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


class SolverError(RuntimeError):
    """Numerical failure inside a solver (e.g. an inner linear solve diverged)."""


class InputFormatError(ValueError):
    """Malformed input file; carries the offending path and line number."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}: " if line is None else f"{path}:{line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


def as_signal(values, n: int | None = None, name: str = "signal") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally checking its length."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if n is not None and arr.size != n:
        raise ValueError(f"{name} has length {arr.size}, expected {n}")
    return arr


def check_lambda(lam: float, name: str = "lambda") -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"{name} must be a finite nonnegative real, got {lam}")
    return lam


def require_connected(graph, who: str) -> None:
    if not graph.is_connected():
        raise ValueError(f"{who} requires a connected graph "
                         f"(got {graph.n_components} components)")
