"""Atomic file output, trajectory CSV and JSON reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import Trajectory


def atomic_write(path: Path, data: bytes | str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(v), ".17g")


def trajectory_csv(traj: Trajectory) -> str:
    m = traj.points.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", *[f"x_{k}" for k in range(1, m + 1)], "sup_step"])
    for step, x, s in zip(traj.steps, traj.points, traj.sup_steps):
        w.writerow([int(step), *[fmt(c) for c in x], "" if math.isnan(s) else fmt(s)])
    return buf.getvalue()


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(steps, points)``; raises ``ValueError`` on a malformed file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    if not header or header[0] != "step" or not xcols:
        raise ValueError(f"{path} is not a trajectory CSV")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path} has no data rows")
    steps = np.array([int(r[0]) for r in body])
    pts = np.array([[float(r[i]) for i in xcols] for r in body])
    return steps, pts


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(doc: dict) -> str:
    """Stable JSON: insertion-ordered keys, shortest round-trip floats."""
    return json.dumps(_jsonable(doc), indent=2, ensure_ascii=False) + "\n"
