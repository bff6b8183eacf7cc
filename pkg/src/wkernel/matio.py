"""CSV matrix files, flat config files, and the scree-plot SVG.

All numeric output uses shortest round-trip decimal formatting, so
save -> load is the identity and repeated runs are byte-identical.
Every CSV written by the package carries a header row.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInput, ParseError


def _fmt(x) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))


def _parse_cell(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def load_matrix(path, min_rows: int = 1):
    """Load a CSV matrix; returns (array, header-or-None).

    The first row is treated as a header when any of its cells does not
    parse as a number.  Ragged rows, non-numeric cells, and empty files
    raise ParseError with the offending location (1-based).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.rstrip("\n").rstrip("\r") for line in fh]
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc
    rows = [line for line in lines if line.strip() != ""]
    if not rows:
        raise ParseError("empty file", path=path)

    header = None
    first = rows[0].split(",")
    if any(_parse_cell(c.strip()) is None for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise ParseError("file has a header but no data rows", path=path)

    width = None
    data = []
    offset = 2 if header is not None else 1
    for r, line in enumerate(rows):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"ragged row: expected {width} cells, got {len(cells)}",
                path=path,
                row=r + offset,
            )
        parsed = []
        for c, cell in enumerate(cells):
            val = _parse_cell(cell.strip())
            if val is None:
                raise ParseError(
                    f"non-numeric cell {cell.strip()!r}",
                    path=path,
                    row=r + offset,
                    col=c + 1,
                )
            if not np.isfinite(val):
                raise ParseError(
                    "non-finite value", path=path, row=r + offset, col=c + 1
                )
            parsed.append(val)
        data.append(parsed)
    arr = np.array(data, dtype=float)
    if arr.shape[0] < min_rows:
        raise ParseError(f"expected at least {min_rows} rows", path=path)
    if header is not None and len(header) != arr.shape[1]:
        raise ParseError(
            f"header has {len(header)} names for {arr.shape[1]} columns", path=path
        )
    return arr, header


def load_vector(path):
    """Load a one-column (or one-row) CSV as a vector."""
    arr, header = load_matrix(path)
    if arr.ndim == 2 and 1 in arr.shape:
        return arr.ravel(), header
    raise ParseError(f"expected a vector, got shape {arr.shape}", path=path)


def save_matrix(path, arr, header=None) -> None:
    """Write a matrix (or vector as one column) with a header row."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInput(f"can only save 1-D or 2-D arrays, got {arr.ndim}-D")
    if header is None:
        header = [f"col_{j}" for j in range(arr.shape[1])]
    if len(header) != arr.shape[1]:
        raise InvalidInput(f"{len(header)} header names for {arr.shape[1]} columns")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(str(h) for h in header) + "\n")
        for row in arr:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def save_keyvalue(path, pairs) -> None:
    """Write (key, value) rows; numbers get round-trip formatting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        for key, value in pairs:
            if isinstance(value, float):
                value = _fmt(value)
            fh.write(f"{key},{value}\n")


def load_config(path) -> dict:
    """Flat ``key = value`` config file; # starts a comment line."""
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}", path=path) from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", path=path, row=lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ParseError("empty key", path=path, row=lineno)
        out[key] = value.strip()
    return out


def write_scree_svg(path, eigenvalues, log_scale: bool = False) -> None:
    """Emit a minimal bar-chart SVG of the spectrum (no plotting deps).

    With log_scale, bars show log10 of the eigenvalues, floored eight
    decades below the largest.
    """
    vals = np.asarray(eigenvalues, dtype=float)
    width, height = 640, 400
    left, bottom, top = 50, 30, 20
    plot_w, plot_h = width - left - 10, height - bottom - top

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="14" font-size="12" font-family="sans-serif">'
        f'eigenvalue spectrum ({"log10" if log_scale else "linear"})</text>',
    ]
    if vals.size:
        if log_scale:
            floor = np.log10(max(vals.max(), 1e-300)) - 8.0
            heights = np.clip(np.log10(np.clip(vals, 1e-300, None)) - floor, 0.0, None)
        else:
            heights = np.clip(vals, 0.0, None)
        top_h = heights.max() if heights.max() > 0 else 1.0
        bar_w = plot_w / vals.size
        for i, h in enumerate(heights):
            px_h = plot_h * h / top_h
            x = left + i * bar_w
            y = top + plot_h - px_h
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{max(bar_w - 1.0, 0.5):.2f}" '
                f'height="{px_h:.2f}" fill="steelblue"/>'
            )
    parts.append(
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 10}" y2="{top + plot_h}" '
        'stroke="black"/>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def resolve_outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
