# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Run artifacts on disk.

Field dump format (plain text, one record per line)::

    n t N...            header: dimension, time, resolution (N, or N_s N_phi)
    index coords value  one line per node, row-major node order

Ghost values are not stored; readers re-project them from the boundary condition.
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
from matplotlib.figure import Figure

from .discretization import Field, Grid, JetField, differentiate
from .errors import GridMismatchError, InvalidInputError, OutputError
from .monitors import MONITOR_COLUMNS, MonitorRow

LOG = logging.getLogger(__name__)

PathLike = Union[str, Path]

CONTOUR_LEVELS = 10


def _number(value: float) -> str:
    return repr(float(value))


def _writable(path: PathLike) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory ({e.strerror})", path=target) from e
    return target


def _write_lines(path: PathLike, lines: Iterable[str]) -> Path:
    target = _writable(path)
    try:
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line + "\n")
    except OSError as e:
        raise OutputError(f"Cannot write output file ({e.strerror})", path=target) from e
    LOG.info(f"Wrote {target}")
    return target


def write_field_dump(field: Field, path: PathLike) -> Path:
    grid = field.grid
    header = " ".join([str(grid.n), _number(field.t)] + [str(v) for v in grid.resolution])
    nodes = grid.nodes.reshape(-1, grid.n)
    values = field.values.reshape(-1)
    body = (
        " ".join([str(i)] + [_number(x) for x in nodes[i]] + [_number(values[i])])
        for i in range(grid.size)
    )
    return _write_lines(path, [header, *body])


def read_field_dump_header(path: PathLike) -> tuple[int, float, tuple[int, ...]]:
    try:
        with open(path, encoding="utf-8") as f:
            tokens = f.readline().split()
    except OSError as e:
        raise InvalidInputError(f"Cannot read field dump {path}: {e.strerror}") from e
    try:
        n, t, resolution = int(tokens[0]), float(tokens[1]), tuple(int(v) for v in tokens[2:])
    except (IndexError, ValueError) as e:
        raise InvalidInputError(f"Malformed field dump header in {path}: {tokens}") from e
    return n, t, resolution


def read_field_dump(path: PathLike, grid: Grid) -> Field:
    """Reads a dump onto grid. Ghosts are zero and must be projected by the caller"""
    n, t, resolution = read_field_dump_header(path)
    if n != grid.n or resolution != tuple(grid.resolution):
        raise GridMismatchError(
            f"Field dump {path} is for n={n}, resolution {resolution}, "
            f"but the grid is n={grid.n}, resolution {tuple(grid.resolution)}"
        )
    try:
        data = np.loadtxt(path, skiprows=1, ndmin=2)
    except ValueError as e:
        raise InvalidInputError(f"Malformed field dump body in {path}: {e}") from e
    if data.shape != (grid.size, n + 2):
        raise GridMismatchError(f"Field dump {path} has {data.shape[0]} nodes, expected {grid.size}")

    coords = grid.nodes.reshape(-1, n)
    scale = max(1.0, float(np.abs(coords).max()))
    if not np.allclose(data[:, 1 : n + 1], coords, rtol=0, atol=1e-9 * scale):
        raise GridMismatchError(f"Node coordinates in {path} do not match the grid")
    return Field(
        grid=grid,
        values=data[:, -1].reshape(grid.shape),
        ghosts=np.zeros(grid.columns),
        t=t,
    )


def write_monitor_csv(rows: Sequence[MonitorRow], path: PathLike) -> Path:
    target = _writable(path)
    try:
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(MONITOR_COLUMNS)
            for row in rows:
                writer.writerow(
                    [
                        str(v) if name == "step" else _number(v)
                        for name, v in ((c, getattr(row, c)) for c in MONITOR_COLUMNS)
                    ]
                )
    except OSError as e:
        raise OutputError(f"Cannot write monitor CSV ({e.strerror})", path=target) from e
    LOG.info(f"Wrote {len(rows)} monitor rows to {target}")
    return target


def read_monitor_csv(path: PathLike) -> list[MonitorRow]:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != MONITOR_COLUMNS:
                raise InvalidInputError(
                    f"{path} columns {reader.fieldnames} do not match {list(MONITOR_COLUMNS)}"
                )
            return [
                MonitorRow(
                    **{
                        name: int(record[name]) if name == "step" else float(record[name])
                        for name in MONITOR_COLUMNS
                    }
                )
                for record in reader
            ]
    except InvalidInputError:
        raise
    except OSError as e:
        raise InvalidInputError(f"Cannot read monitor CSV {path}: {e.strerror}") from e
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"Malformed monitor CSV {path}: {e}") from e


def write_profile_csv(field: Field, path: PathLike, jet: Optional[JetField] = None) -> Path:
    """Per-node x, u, u', u'', F for interval runs"""
    if field.grid.n != 1:
        raise InvalidInputError("Profile CSV export is only defined for interval grids")
    jet = differentiate(field) if jet is None else jet
    target = _writable(path)
    try:
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["x", "u", "du", "d2u", "F"])
            for j in range(field.grid.size):
                writer.writerow(
                    [
                        _number(v)
                        for v in (
                            field.grid.nodes[j, 0],
                            field.values[j],
                            jet.Du[j, 0],
                            jet.D2u[j, 0, 0],
                            jet.phase[j],
                        )
                    ]
                )
    except OSError as e:
        raise OutputError(f"Cannot write profile CSV ({e.strerror})", path=target) from e
    LOG.info(f"Wrote {target}")
    return target


def write_json(data: dict[str, Any], path: PathLike) -> Path:
    return _write_lines(path, [json.dumps(data, indent=2, sort_keys=True, default=float)])


def _contour(ax, X: np.ndarray, Y: np.ndarray, Z: np.ndarray, title: str) -> None:
    lo, hi = float(Z.min()), float(Z.max())
    ax.set_title(title)
    ax.set_aspect("equal")
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        ax.text(0.5, 0.5, f"constant {lo:.6g}", transform=ax.transAxes, ha="center")
    else:
        levels = np.linspace(lo, hi, CONTOUR_LEVELS + 2)[1:-1]
        ax.contour(X, Y, Z, levels=levels, colors="black", linewidths=0.8)
    ax.plot(X[-1], Y[-1], color="grey", linewidth=0.5)


def write_svg(field: Field, path: PathLike, jet: Optional[JetField] = None) -> Path:
    """Contours of u and of F(D^2 u) (2D) or their profiles (1D), side by side"""
    grid = field.grid
    jet = differentiate(field) if jet is None else jet
    figure = Figure(figsize=(10, 4.5))
    left, right = figure.subplots(1, 2)

    if grid.n == 1:
        x = grid.nodes[:, 0]
        left.plot(x, field.values, color="black")
        left.set_title("u")
        right.plot(x, jet.phase, color="black")
        right.set_title("F(D^2 u)")
    else:
        def wrap(a: np.ndarray) -> np.ndarray:
            return np.concatenate([a, a[:, :1]], axis=1)

        X, Y = wrap(grid.nodes[..., 0]), wrap(grid.nodes[..., 1])
        _contour(left, X, Y, wrap(field.values), "u")
        _contour(right, X, Y, wrap(jet.phase), "F(D^2 u)")

    figure.suptitle(f"t = {field.t:.6g}")
    target = _writable(path)
    try:
        figure.savefig(target, format="svg", metadata={"Date": None})
    except OSError as e:
        raise OutputError(f"Cannot write SVG ({e.strerror})", path=target) from e
    LOG.info(f"Wrote {target}")
    return target


def export_outputs(
    field: Field,
    out_dir: PathLike,
    *,
    name: str,
    rows: Optional[Sequence[MonitorRow]] = None,
    svg: bool = False,
    jet: Optional[JetField] = None,
) -> list[Path]:
    """Writes the dump of field, plus the 1D profile, monitor CSV and SVG when applicable"""
    out = Path(out_dir)
    jet = differentiate(field) if jet is None else jet
    written = [write_field_dump(field, out / f"{name}.txt")]
    if field.grid.n == 1:
        written.append(write_profile_csv(field, out / f"{name}_profile.csv", jet))
    if rows is not None:
        written.append(write_monitor_csv(rows, out / "monitors.csv"))
    if svg:
        written.append(write_svg(field, out / f"{name}.svg", jet))
    return written
