"""Exact 1-D total-variation denoising kernels (taut string construction).

These are the hot inner loops of the chain solver and of the 2-D grid
sweep; they are jit-compiled when numba is importable and run as plain
Python otherwise.
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False


def _tv1d_kernel(y, lam, x):
    # Direct non-iterative minimizer of 0.5*||y-x||^2 + lam*sum|x_{i+1}-x_i|.
    # Tracks a candidate segment [k0..k] with tentative levels vlo/vhi and
    # slack budgets ulo/uhi; jump positions klo/khi mark where the taut
    # string last touched a tube boundary.
    n = y.shape[0]
    if n == 0:
        return
    if lam <= 0.0 or n == 1:
        for j in range(n):
            x[j] = y[j]
        return
    # constant inputs are fixed points; skip the level bookkeeping so the
    # output is bitwise equal to the input
    ymin = y[0]
    ymax = y[0]
    for j in range(1, n):
        if y[j] < ymin:
            ymin = y[j]
        elif y[j] > ymax:
            ymax = y[j]
    if ymin == ymax:
        for j in range(n):
            x[j] = y[j]
        return
    k = 0
    k0 = 0
    klo = 0
    khi = 0
    vlo = y[0] - lam
    vhi = y[0] + lam
    ulo = lam
    uhi = -lam
    while True:
        if k == n - 1:
            if ulo < 0.0:
                # string leaves through the lower boundary: fix a down-jump
                for j in range(k0, klo + 1):
                    x[j] = vlo
                klo += 1
                k = klo
                k0 = klo
                vlo = y[k]
                ulo = lam
                uhi = y[k] + lam - vhi
            elif uhi > 0.0:
                for j in range(k0, khi + 1):
                    x[j] = vhi
                khi += 1
                k = khi
                k0 = khi
                vhi = y[k]
                uhi = -lam
                ulo = y[k] - lam - vlo
            else:
                v = vlo + ulo / (k - k0 + 1)
                for j in range(k0, n):
                    x[j] = v
                return
            if k == n - 1:
                x[n - 1] = vlo + ulo
                return
            continue
        if y[k + 1] + ulo < vlo - lam:
            # next point forces a negative jump
            for j in range(k0, klo + 1):
                x[j] = vlo
            klo += 1
            k = klo
            k0 = klo
            khi = klo
            vlo = y[k]
            vhi = y[k] + 2.0 * lam
            ulo = lam
            uhi = -lam
        elif y[k + 1] + uhi > vhi + lam:
            # next point forces a positive jump
            for j in range(k0, khi + 1):
                x[j] = vhi
            khi += 1
            k = khi
            k0 = khi
            klo = khi
            vlo = y[k] - 2.0 * lam
            vhi = y[k]
            ulo = lam
            uhi = -lam
        else:
            # extend the current segment
            k += 1
            ulo += y[k] - vlo
            uhi += y[k] - vhi
            if ulo >= lam:
                vlo += (ulo - lam) / (k - k0 + 1)
                ulo = lam
                klo = k
            if uhi <= -lam:
                vhi += (uhi + lam) / (k - k0 + 1)
                uhi = -lam
                khi = k


if NUMBA_AVAILABLE:
    tv1d = numba.njit(cache=True)(_tv1d_kernel)
else:  # pragma: no cover
    tv1d = _tv1d_kernel


def _tv1d_rows_kernel(Y, lam, X, W):
    # Row-wise 1-D TV solve plus dual recovery. The dual of edge (j, j+1) in
    # row r is the running sum of residuals, clipped to [-lam, lam].
    m, c = Y.shape
    for r in range(m):
        tv1d(Y[r], lam, X[r])
        acc = 0.0
        for j in range(c - 1):
            acc += Y[r, j] - X[r, j]
            if acc > lam:
                acc = lam
            elif acc < -lam:
                acc = -lam
            W[r, j] = acc


if NUMBA_AVAILABLE:
    tv1d_rows = numba.njit(cache=True)(_tv1d_rows_kernel)
else:  # pragma: no cover
    tv1d_rows = _tv1d_rows_kernel


def tv1d_solve(y: np.ndarray, lam: float) -> np.ndarray:
    """Exact prox of lam * 1-D total variation at y."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    x = np.empty_like(y)
    tv1d(y, float(lam), x)
    return x

