"""File formats: trajectory CSV/JSON, snapshot npz + sidecar, model and report JSON."""

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

from .dynamics import TrajectoryData
from .errors import ShapeError
from .koopman import KoopmanModel
from .lifting import LiftedSnapshots


def fmt(value) -> str:
    """Locale-independent, round-trippable text for numbers and flags."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    """Write through a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: list[str], rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload) -> str:
    # inf/nan are emitted as JSON extensions (Infinity/NaN); Python's json reads them back.
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, payload) -> Path:
    return atomic_write_text(path, dumps(payload))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- trajectories ------------------------------------------------------------


def trajectory_header(n_y: int, n_u: int) -> list[str]:
    return ["t"] + [f"y{i + 1}" for i in range(n_y)] + [f"u{i + 1}" for i in range(n_u)]


def write_trajectory_csv(path, traj: TrajectoryData) -> Path:
    """One row per sample; the final row has no input, so its ``u`` cells are empty."""
    header = trajectory_header(traj.output_dim, traj.input_dim)
    rows = []
    for k, t in enumerate(traj.times):
        u = list(traj.inputs[k]) if k < traj.n_steps else [""] * traj.input_dim
        rows.append([t, *traj.outputs[k], *u])
    return write_csv(path, header, rows)


def read_trajectory_csv(path, system: str = "", seed: int | None = None) -> TrajectoryData:
    header, rows = read_csv(path)
    if not header or header[0] != "t":
        raise ShapeError(f"{path}: first column must be 't'")
    y_cols = [i for i, h in enumerate(header) if h.startswith("y")]
    u_cols = [i for i, h in enumerate(header) if h.startswith("u")]
    if len(rows) < 2:
        raise ShapeError(f"{path}: need at least two samples")
    times = np.array([float(r[0]) for r in rows])
    outputs = np.array([[float(r[i]) for i in y_cols] for r in rows])
    inputs = np.array([[float(r[i]) for i in u_cols] for r in rows[:-1]]).reshape(len(rows) - 1, len(u_cols))
    dt = float(times[1] - times[0])
    return TrajectoryData(outputs, inputs, dt, system=system, seed=seed)


def trajectory_to_dict(traj: TrajectoryData) -> dict:
    return {"system": traj.system, "dt": traj.dt, "seed": traj.seed,
            "outputs": traj.outputs.tolist(), "inputs": traj.inputs.tolist()}


def trajectory_from_dict(payload: dict) -> TrajectoryData:
    outputs = np.asarray(payload["outputs"], dtype=float)
    inputs = np.asarray(payload["inputs"], dtype=float).reshape(outputs.shape[0] - 1, -1)
    return TrajectoryData(outputs, inputs, float(payload["dt"]), payload.get("system", ""),
                          payload.get("seed"))


def trajectory_hash(*trajectories: TrajectoryData) -> str:
    h = hashlib.sha256()
    for traj in trajectories:
        h.update(np.ascontiguousarray(traj.outputs).tobytes())
        h.update(np.ascontiguousarray(traj.inputs).tobytes())
    return h.hexdigest()


# -- snapshots ---------------------------------------------------------------


def save_snapshots(prefix, snaps: LiftedSnapshots, dictionary: dict | None = None,
                   source_hash: str | None = None) -> tuple[Path, Path]:
    """Write ``<prefix>.npz`` (Psi, Psi_prime, U) and a ``<prefix>.json`` sidecar."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    npz = prefix.with_suffix(".npz")
    buf = io.BytesIO()
    np.savez(buf, Psi=snaps.Psi, Psi_prime=snaps.Psi_prime, U=snaps.U)
    fd, tmp = tempfile.mkstemp(dir=npz.parent, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, npz)
    sidecar = write_json(prefix.with_suffix(".json"), {
        "lift_dim": snaps.lift_dim,
        "input_dim": snaps.input_dim,
        "K": snaps.K,
        "dictionary": dictionary or {},
        "source_hash": source_hash,
        "matrices": npz.name,
    })
    return npz, sidecar


def load_snapshots(prefix) -> tuple[LiftedSnapshots, dict]:
    prefix = Path(prefix)
    meta = read_json(prefix.with_suffix(".json"))
    with np.load(prefix.parent / meta["matrices"]) as data:
        snaps = LiftedSnapshots(data["Psi"], data["Psi_prime"], data["U"])
    if snaps.lift_dim != meta["lift_dim"] or snaps.K != meta["K"]:
        raise ShapeError(f"{prefix}: sidecar dims do not match stored matrices")
    return snaps, meta


# -- models ------------------------------------------------------------------


def save_model(path, model: KoopmanModel) -> Path:
    return write_json(path, model.to_dict())


def load_model(path) -> KoopmanModel:
    return KoopmanModel.from_dict(read_json(path))
