"""Plain-text grid files.

A file is a block of ``# key=value`` header lines followed by the values,
one grid row per line, comma separated, 17 significant digits::

    # dim=2
    # cells=3,2
    # extent=1,1
    # profile=paper-fig2
    0.5,1.25
    ...

Row ``i`` holds ``values[i, :]``; a 1D grid is a single line.  Parsing an
emitted file returns the identical doubles.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import DomainSpec, FieldGrid

RESERVED = ("dim", "cells", "extent")


def _num(v: float) -> str:
    return format(float(v), ".17g")


def format_grid(grid: FieldGrid, meta: dict | None = None) -> str:
    d = grid.domain
    lines = [f"# dim={d.dim}",
             "# cells=" + ",".join(str(c) for c in d.cells),
             "# extent=" + ",".join(_num(e) for e in d.extent)]
    for k, v in (meta or {}).items():
        if k in RESERVED:
            continue
        if any(c in str(k) for c in "=\n") or "\n" in str(v):
            raise ConfigError(f"metadata {k!r} cannot be written to a header line")
        lines.append(f"# {k}={_num(v) if isinstance(v, float) else v}")
    rows = grid.values.reshape(1, -1) if d.dim == 1 else grid.values
    lines.extend(",".join(_num(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_grid(path, grid: FieldGrid, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(format_grid(grid, meta))
    return path


def parse_grid(text: str) -> tuple[FieldGrid, dict]:
    meta = {}
    rows = []
    for n, line in enumerate(io.StringIO(text), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                continue
            k, v = body.split("=", 1)
            meta[k.strip()] = v.strip()
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError:
            raise ConfigError(f"line {n}: not a comma separated row of numbers") from None
    for k in RESERVED:
        if k not in meta:
            raise ConfigError(f"grid file header lacks {k!r}")
    try:
        dim = int(meta.pop("dim"))
        cells = tuple(int(c) for c in meta.pop("cells").split(","))
        extent = tuple(float(e) for e in meta.pop("extent").split(","))
    except ValueError:
        raise ConfigError("malformed dim/cells/extent header") from None
    if len(cells) != dim or len(extent) != dim:
        raise ConfigError("header dim disagrees with cells/extent")
    widths = {len(r) for r in rows}
    expected_rows = 1 if dim == 1 else cells[0]
    expected_width = cells[-1]
    if len(rows) != expected_rows or widths != {expected_width}:
        raise ConfigError(f"body is {len(rows)} rows of widths {sorted(widths)}, "
                          f"header declares {expected_rows} x {expected_width}")
    values = np.array(rows, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ConfigError("grid file holds non-finite values")
    domain = DomainSpec(dim=dim, cells=cells, extent=extent)
    return FieldGrid(domain, values), meta


def read_grid(path) -> tuple[FieldGrid, dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc.strerror}") from None
    return parse_grid(text)


def plot_table(grid: FieldGrid) -> str:
    """Long-format ``x[,y],value`` table at cell centres."""
    d = grid.domain
    pts = d.centers().reshape(-1, d.dim)
    head = "x,value" if d.dim == 1 else "x,y,value"
    body = (",".join(_num(c) for c in p) + "," + _num(v)
            for p, v in zip(pts, grid.values.ravel()))
    return head + "\n" + "\n".join(body) + "\n"
