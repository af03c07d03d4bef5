"""On-disk formats: edge lists, node signals, coordinate tables.

Edge lists are text files with one "u v" pair per line (0-indexed,
whitespace-separated, '#' comments). Signals are one float per line or a
single-column CSV with header "value". Floats are written as shortest
round-trip decimals so that re-reading reproduces them bit for bit.
"""

from __future__ import annotations

import numpy as np

from .validation import InputFormatError


def format_float(x: float) -> str:
    return repr(float(x))


def _content_lines(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise InputFormatError(f"cannot read file: {exc}", path=str(path)) from exc
    for lineno, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if text:
            yield lineno, text


def read_edges(path: str) -> np.ndarray:
    """Parse an edge-list file into an (m, 2) int array (unoriented pairs)."""
    rows = []
    for lineno, text in _content_lines(path):
        parts = text.split()
        if len(parts) != 2:
            raise InputFormatError(
                f"expected two node ids, got {text!r}", path=str(path), line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise InputFormatError(
                f"node ids must be integers, got {text!r}",
                path=str(path), line=lineno) from None
        if u < 0 or v < 0:
            raise InputFormatError(
                f"node ids must be nonnegative, got {text!r}",
                path=str(path), line=lineno)
        rows.append((u, v))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def write_edges(path: str, edges: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in np.asarray(edges):
            fh.write(f"{int(u)} {int(v)}\n")


def read_signal(path: str) -> np.ndarray:
    """Read a node signal: floats one per line, or CSV with header 'value'."""
    values = []
    lines = list(_content_lines(path))
    start = 0
    if lines and lines[0][1].strip().lower() == "value":
        start = 1
    for lineno, text in lines[start:]:
        token = text.rstrip(",")
        try:
            values.append(float(token))
        except ValueError:
            raise InputFormatError(
                f"expected a float, got {text!r}", path=str(path),
                line=lineno) from None
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise InputFormatError("signal contains non-finite values", path=str(path))
    return arr


def write_signal(path: str, values, header: str = "value") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for x in np.asarray(values, dtype=np.float64):
            fh.write(format_float(x) + "\n")


def write_columns(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    """Small CSV writer for multi-column outputs (coordinates + values)."""
    cols = [np.asarray(c) for c in columns]
    if len({c.shape[0] for c in cols}) > 1:
        raise ValueError("columns must share a length")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(format_float(x) for x in row) + "\n")


def read_coords(path: str) -> np.ndarray:
    """Read node coordinates: one whitespace- or comma-separated row per node."""
    rows = []
    width = None
    for lineno, text in _content_lines(path):
        parts = text.replace(",", " ").split()
        if width is None:
            # allow a header row of column names on the first line
            try:
                [float(p) for p in parts]
            except ValueError:
                continue
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise InputFormatError(
                f"expected numeric coordinates, got {text!r}",
                path=str(path), line=lineno) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputFormatError(
                f"expected {width} coordinates, got {len(row)}",
                path=str(path), line=lineno)
        rows.append(row)
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), width or 0)
