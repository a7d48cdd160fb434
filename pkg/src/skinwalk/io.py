"""CSV and JSON serialization for trajectories, velocity records and band tables."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Union

import numpy as np

from skinwalk.evolution import Trajectory
from skinwalk.spectral import BandTable
from skinwalk.walk import WalkParams

__all__ = [
    "format_number",
    "trajectory_to_dict",
    "trajectory_from_dict",
    "write_trajectory",
    "read_trajectory_json",
    "distribution_rows",
    "series_rows",
    "band_rows",
    "write_rows",
    "dump_rows",
]

PathLike = Union[str, Path]


def format_number(value: Any) -> str:
    """Render a cell: floats with 12 significant digits, ``None`` as empty."""
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        text = f"{float(value):.12g}"
        return "0" if text == "-0" else text
    if isinstance(value, (tuple, list)):
        return ";".join(format_number(v) for v in value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def trajectory_to_dict(traj: Trajectory) -> Dict[str, Any]:
    """JSON-ready mapping; distributions are keyed by step number."""
    params = None
    if traj.params is not None:
        params = _jsonable(dataclasses.asdict(traj.params))
    return {
        "method": traj.method,
        "params": params,
        "positions": traj.positions.tolist(),
        "steps": {str(t): row.tolist() for t, row in enumerate(traj.distributions)},
        "survival": traj.survival.tolist(),
        "center_of_mass": traj.center_of_mass.tolist(),
        "variance": traj.variance.tolist(),
    }


def trajectory_from_dict(data: Mapping[str, Any]) -> Trajectory:
    steps = data["steps"]
    rows = [steps[str(t)] for t in range(len(steps))]
    params = None
    if data.get("params"):
        params = WalkParams(**data["params"])
    return Trajectory(
        positions=np.asarray(data["positions"], dtype=np.int64),
        distributions=np.asarray(rows, dtype=float),
        survival=np.asarray(data["survival"], dtype=float),
        method=data.get("method", "density"),
        params=params,
    )


def read_trajectory_json(path: PathLike) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        return trajectory_from_dict(json.load(fh))


def distribution_rows(traj: Trajectory) -> List[Dict[str, Any]]:
    return [
        {"t": t, "x": int(x), "P": float(p)}
        for t, row in enumerate(traj.distributions)
        for x, p in zip(traj.positions, row)
    ]


def series_rows(traj: Trajectory) -> List[Dict[str, Any]]:
    return [
        {"t": t, "n": float(n), "survival": float(s), "variance": float(v)}
        for t, (n, s, v) in enumerate(zip(traj.center_of_mass, traj.survival, traj.variance))
    ]


def band_rows(table: BandTable) -> List[Dict[str, Any]]:
    return [
        {
            "k": float(k),
            "ReE+": float(ep.real),
            "ImE+": float(ep.imag),
            "ReE-": float(em.real),
            "ImE-": float(em.imag),
            "degenerate": bool(d),
        }
        for k, ep, em, d in zip(table.k, table.e_plus, table.e_minus, table.degenerate)
    ]


def dump_rows(rows: Sequence[Mapping[str, Any]], fmt: str, fh: TextIO, fieldnames: Optional[Sequence[str]] = None) -> None:
    """Write records as CSV (header, comma, LF) or as a JSON list."""
    if fmt == "json":
        json.dump([_jsonable(dict(r)) for r in rows], fh, indent=1, sort_keys=True)
        fh.write("\n")
        return
    names = list(fieldnames) if fieldnames is not None else (list(rows[0].keys()) if rows else [])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([format_number(row.get(name)) for name in names])


def write_rows(rows: Sequence[Mapping[str, Any]], path: PathLike, fmt: str = "csv", fieldnames=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        dump_rows(rows, fmt, fh, fieldnames)
    return path


def write_trajectory(traj: Trajectory, directory: PathLike, stem: str = "trajectory", fmt: str = "csv") -> List[Path]:
    """
    Write one trajectory.

    CSV produces ``<stem>_distribution.csv`` (t, x, P) and ``<stem>_series.csv``
    (t, n, survival, variance); JSON produces a single ``<stem>.json``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = directory / f"{stem}.json"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(trajectory_to_dict(traj), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return [path]
    return [
        write_rows(distribution_rows(traj), directory / f"{stem}_distribution.csv"),
        write_rows(series_rows(traj), directory / f"{stem}_series.csv"),
    ]


def rows_to_text(rows: Sequence[Mapping[str, Any]], fmt: str = "csv", fieldnames=None) -> str:
    buf = io.StringIO()
    dump_rows(rows, fmt, buf, fieldnames)
    return buf.getvalue()
