"""Command-line surface.

Exit codes: 0 on success, 2 for input errors (bad files, bad arguments),
3 for numerical failures (non-converged solves). Diagnostics go to
stderr; stdout carries data only when --stdout is set.
"""

from __future__ import annotations

import functools
import json
import sys

import click
import numpy as np

from . import io as gio
from . import solvers, tables, variance
from .graphs import Graph, build_chain, build_knn_graph
from .montecarlo import EstimatorConfig, run_monte_carlo
from .scenarios import (HOMOSCEDASTIC_IDS, ScenarioSpec)
from .solvers import SolverOptions
from .validation import InputFormatError, SolverError

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InputFormatError,) as exc:
            _fail(EXIT_INPUT, str(exc))
        except SolverError as exc:
            _fail(EXIT_NUMERICAL, str(exc))
        except ValueError as exc:
            _fail(EXIT_INPUT, str(exc))
    return wrapper


def _parse_lambda(text: str, name: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{name} must be a number or 'auto', got {text!r}") from None
    return value


def _parse_grid(text: str | None):
    if text is None:
        return None
    try:
        grid = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"--grid must be comma-separated numbers, got {text!r}") from None
    if not grid:
        raise ValueError("--grid must contain at least one value")
    return grid


def _load_graph(signal_path, edges_path, coords_path, knn_k):
    if (edges_path is None) == (coords_path is None):
        raise ValueError("provide exactly one of --edges or --coords")
    y = gio.read_signal(signal_path)
    if y.size == 0:
        raise InputFormatError("signal file is empty", path=str(signal_path))
    if edges_path is not None:
        raw = gio.read_edges(edges_path)
        if raw.size and raw.max() >= y.size:
            raise InputFormatError(
                f"edge endpoint {int(raw.max())} out of range for n={y.size}",
                path=str(edges_path))
        oriented = np.sort(raw, axis=1)
        g = Graph(n=y.size, edges=oriented)
        if g.n_edges == g.n - 1:
            chain = build_chain(g.n)
            if np.array_equal(np.unique(oriented, axis=0), chain.edges):
                g = chain  # exact fast path for chain-shaped edge lists
    else:
        coords = gio.read_coords(coords_path)
        if coords.shape[0] != y.size:
            raise InputFormatError(
                f"{coords.shape[0]} coordinate rows for a signal of length {y.size}",
                path=str(coords_path))
        g = build_knn_graph(coords, knn_k)
    return g, y


def _emit(out_path, stdout_flag, text):
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if stdout_flag or out_path is None:
        click.echo(text, nl=not text.endswith("\n"))


def _dump_scenario_fields(spec, path):
    """Plot-ready CSV of one generated data set: coordinates plus fields."""
    from .scenarios import generate_scenario
    import math
    g, y, theta, v = generate_scenario(spec)
    if g.coords is not None:
        coords = g.coords
        names = [f"x{a + 1}" for a in range(coords.shape[1])]
    elif spec.graph_kind == "grid2d":
        m = math.isqrt(g.n)
        kk = np.repeat(np.arange(1, m + 1), m).astype(float)
        ll = np.tile(np.arange(1, m + 1), m).astype(float)
        coords = np.stack([kk, ll], axis=1)
        names = ["k", "l"]
    else:
        coords = np.arange(g.n, dtype=float)[:, None]
        names = ["node"]
    cols = [coords[:, a] for a in range(coords.shape[1])] + [theta, v, y]
    gio.write_columns(path, names + ["theta_star", "v_star", "y"], cols)


graph_opts = [
    click.option("--signal", "signal_path", required=True,
                 type=click.Path(exists=False), help="Node signal file."),
    click.option("--edges", "edges_path", type=click.Path(exists=False),
                 default=None, help="Edge list file (u v per line)."),
    click.option("--coords", "coords_path", type=click.Path(exists=False),
                 default=None, help="Coordinate file; builds a K-NN graph."),
    click.option("--knn", "knn_k", type=int, default=5, show_default=True,
                 help="Neighbor count for --coords graphs."),
]


def add_options(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


@click.group()
@click.version_option()
def main():
    """Variance estimation and TV denoising on graph-structured signals."""


@main.command()
@add_options(graph_opts)
@click.option("--lambda", "lam_text", default="auto", show_default=True,
              help="Penalty value, or 'auto' for BIC selection.")
@click.option("--grid", "grid_text", default=None,
              help="Comma-separated penalty grid for auto selection.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output CSV path; a .json sidecar is written next to it.")
@click.option("--stdout", "stdout_flag", is_flag=True, help="Echo data to stdout.")
@click.option("--gap-tol", type=float, default=1e-6, show_default=True)
@handles_errors
def denoise(signal_path, edges_path, coords_path, knn_k, lam_text, grid_text,
            out_path, stdout_flag, gap_tol):
    """Fit the graph fused lasso and write the denoised signal."""
    g, y = _load_graph(signal_path, edges_path, coords_path, knn_k)
    lam = _parse_lambda(lam_text, "--lambda")
    grid = _parse_grid(grid_text)
    opts = SolverOptions(gap_tol=gap_tol)
    trace = None
    if lam == "auto":
        trace, fit = variance.bic_select(y, g, grid or variance.DEFAULT_LAMBDA_GRID, opts)
    else:
        fit = solvers.fused_lasso_graph(y, g, lam, opts)
    if not fit.converged:
        raise SolverError(
            f"solver did not certify the requested gap within "
            f"{opts.max_iters} iterations (best gap {fit.gap:.3e})")
    sidecar = {
        "lambda": fit.lam,
        "df": fit.df,
        "gap": fit.gap,
        "iters": fit.iters,
        "objective": fit.objective(y, g),
        "converged": fit.converged,
    }
    if trace is not None:
        sidecar["trace"] = {"grid": trace.grid, "scores": trace.scores,
                            "dfs": trace.dfs, "chosen_index": trace.chosen_index}
    body = "value\n" + "".join(gio.format_float(v) + "\n" for v in fit.theta)
    _emit(out_path, stdout_flag, body)
    if out_path is not None:
        with open(str(out_path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    click.echo(f"denoised n={g.n} lambda={fit.lam:g} df={fit.df} "
               f"gap={fit.gap:.3e}", err=True)


@main.command("variance-homo")
@add_options(graph_opts)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the random DFS start.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--stdout", "stdout_flag", is_flag=True)
@handles_errors
def variance_homo(signal_path, edges_path, coords_path, knn_k, seed, out_path,
                  stdout_flag):
    """Estimate a constant noise variance from DFS-ordered differences."""
    g, y = _load_graph(signal_path, edges_path, coords_path, knn_k)
    est = variance.homoscedastic_variance(y, g, seed)
    payload = {"v_hat": est.v_hat, "seed": seed, "pairs_used": est.pairs_used,
               "start": int(est.order.start)}
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    _emit(out_path, stdout_flag, text)
    click.echo(f"v_hat={est.v_hat:.6g} (pairs={est.pairs_used})", err=True)


@main.command("variance-hetero")
@add_options(graph_opts)
@click.option("--lambda", "lam_text", default="auto", show_default=True)
@click.option("--lambda-prime", "lam_prime_text", default="auto", show_default=True)
@click.option("--grid", "grid_text", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output CSV (v_raw,v_clamped); .json sidecar with traces.")
@click.option("--stdout", "stdout_flag", is_flag=True)
@click.option("--gap-tol", type=float, default=1e-6, show_default=True)
@handles_errors
def variance_hetero(signal_path, edges_path, coords_path, knn_k, lam_text,
                    lam_prime_text, grid_text, out_path, stdout_flag, gap_tol):
    """Estimate a node-varying variance field via fused fits of y and y^2."""
    g, y = _load_graph(signal_path, edges_path, coords_path, knn_k)
    lam = _parse_lambda(lam_text, "--lambda")
    lam_prime = _parse_lambda(lam_prime_text, "--lambda-prime")
    if (lam == "auto") != (lam_prime == "auto"):
        raise ValueError("--lambda and --lambda-prime must both be numeric "
                         "or both 'auto'")
    grid = _parse_grid(grid_text)
    opts = SolverOptions(gap_tol=gap_tol)
    traces = None
    if lam == "auto":
        fit, ttrace, gtrace = variance.heteroscedastic_variance_auto(
            y, g, grid or variance.DEFAULT_LAMBDA_GRID, opts)
        traces = {"theta": {"grid": ttrace.grid, "scores": ttrace.scores,
                            "dfs": ttrace.dfs, "chosen_index": ttrace.chosen_index},
                  "gamma": {"grid": gtrace.grid, "scores": gtrace.scores,
                            "dfs": gtrace.dfs, "chosen_index": gtrace.chosen_index}}
    else:
        fit = variance.heteroscedastic_variance(y, g, lam, lam_prime, opts)
    if not fit.converged:
        raise SolverError("solver did not converge for the requested penalties")
    sidecar = {"lambda": fit.lam, "lambda_prime": fit.lam_prime,
               "traces": traces}
    body = "v_raw,v_clamped\n" + "".join(
        f"{gio.format_float(a)},{gio.format_float(b)}\n"
        for a, b in zip(fit.v_hat_raw, fit.v_hat_clamped))
    _emit(out_path, stdout_flag, body)
    if out_path is not None:
        with open(str(out_path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
    click.echo(f"lambda={fit.lam:g} lambda'={fit.lam_prime:g}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="ScenarioSpec JSON file.")
@click.option("--scenario", "scenario_id", default=None,
              help="Scenario id (S1..S8, Example1).")
@click.option("--n", type=int, default=None)
@click.option("--v0", type=float, default=None, help="Constant variance (S1-S3).")
@click.option("--law", default="gaussian", show_default=True)
@click.option("--law-param", type=float, default=None)
@click.option("--knn-k", type=int, default=5, show_default=True)
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--estimator", type=click.Choice(["homo", "hetero"]), default=None,
              help="Defaults to homo for S1-S3, hetero otherwise.")
@click.option("--grid", "grid_text", default=None)
@click.option("--reps", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--dump-fields", "fields_path", type=click.Path(), default=None,
              help="Also write one generated data set as plot-ready CSV "
                   "(node coordinates, theta_star, v_star, y).")
@click.option("--stdout", "stdout_flag", is_flag=True)
@handles_errors
def simulate(config_path, scenario_id, n, v0, law, law_param, knn_k, dim,
             estimator, grid_text, reps, seed, out_path, fields_path,
             stdout_flag):
    """Run a Monte-Carlo experiment cell and write its report as JSON."""
    if reps < 1:
        raise ValueError(f"--reps must be >= 1, got {reps}")
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            spec = ScenarioSpec.from_json(fh.read())
    else:
        if scenario_id is None or n is None:
            raise ValueError("provide --config or both --scenario and --n")
        kind = ("chain" if scenario_id == "Example1"
                else "knn" if scenario_id in ("S7", "S8") else "grid2d")
        spec = ScenarioSpec(id=scenario_id, graph_kind=kind, n=n, v_star=v0,
                            error_law=law, law_param=law_param, knn_k=knn_k,
                            knn_dim=dim, seed=seed)
    est_kind = estimator or ("homo" if spec.id in HOMOSCEDASTIC_IDS else "hetero")
    grid = _parse_grid(grid_text) or variance.DEFAULT_LAMBDA_GRID
    config = EstimatorConfig(
        kind="homoscedastic" if est_kind == "homo" else "heteroscedastic",
        grid=grid)
    if fields_path is not None:
        _dump_scenario_fields(spec, fields_path)
    report = run_monte_carlo(spec, config, reps, base_seed=seed)
    text = report.to_json(indent=2) + "\n"
    _emit(out_path, stdout_flag, text)
    se = "n/a" if report.std_error is None else f"{report.std_error:.4g}"
    click.echo(f"{spec.id} n={spec.n} reps={reps}: mean {report.metric} = "
               f"{report.mean:.6g} (se {se})", err=True)


@main.command("reproduce-table")
@click.option("--table", "table_id", type=click.IntRange(1, 4), required=True)
@click.option("--reps", type=int, default=None,
              help="Replicates per cell (defaults to the table's protocol).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sizes", "sizes_text", default=None,
              help="Comma-separated n values (must be table columns).")
@click.option("--dim", "dims_text", default="2", show_default=True,
              help="Comma-separated covariate dimensions (table 4).")
@click.option("--force", is_flag=True, help="Allow n > 1e6.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--stdout", "stdout_flag", is_flag=True)
@handles_errors
def reproduce_table_cmd(table_id, reps, seed, sizes_text, dims_text, force,
                        out_path, stdout_flag):
    """Reproduce one reference table with pass/fail flags per cell."""
    if reps is not None and reps < 1:
        raise ValueError(f"--reps must be >= 1, got {reps}")
    sizes = None
    if sizes_text is not None:
        sizes = [int(float(tok)) for tok in sizes_text.split(",") if tok.strip()]
    dims = tuple(int(tok) for tok in dims_text.split(",") if tok.strip())

    def progress(cell):
        click.echo(f"  {cell.scenario} n={cell.n}"
                   + (f" v0={cell.v0}" if cell.v0 is not None else "")
                   + f": {cell.measured:.4f} vs {cell.reference:.2f} "
                   + ("pass" if cell.passed else "FAIL"), err=True)

    report = tables.reproduce_table(table_id, reps=reps, seed=seed,
                                    sizes=sizes, dims=dims, force=force,
                                    progress=progress)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(indent=2) + "\n")
    text = report.to_text()
    if stdout_flag or out_path is None:
        click.echo(text)
    else:
        click.echo(text, err=True)
    sys.exit(0)


if __name__ == "__main__":
    main()
