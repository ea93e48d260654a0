"""File formats.

Matrices: ``{"dim": D, "entries": [[re, im], ...]}`` with ``D*D`` pairs in
row-major order.  Vectors use the same layout with ``D`` pairs under
``"amplitudes"``.  Floats are written with ``repr`` precision so a round trip
is exact, and JSON is emitted with sorted keys so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .hilbert import DensityMatrix, PureState, make_density, make_pure

MATRIX_SCHEMA = {
    "type": "object",
    "required": ["dim", "entries"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "entries": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
    },
}


def _pairs(values: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, dtype=complex).ravel()]


def matrix_to_json(m) -> dict:
    entries = m.entries if hasattr(m, "entries") else np.asarray(m)
    return {"dim": int(entries.shape[0]), "entries": _pairs(entries)}


def matrix_from_json(d) -> np.ndarray:
    dim = int(d["dim"])
    flat = np.array([complex(re, im) for re, im in d["entries"]])
    if flat.size != dim * dim:
        raise DimensionMismatch(f"matrix of dim {dim} needs {dim * dim} entries, got {flat.size}")
    return flat.reshape(dim, dim)


def density_from_json(d) -> DensityMatrix:
    return make_density(matrix_from_json(d))


def pure_to_json(psi: PureState) -> dict:
    return {"dim": psi.dim, "amplitudes": _pairs(psi.amplitudes)}


def pure_from_json(d) -> PureState:
    flat = np.array([complex(re, im) for re, im in d["amplitudes"]])
    if flat.size != int(d["dim"]):
        raise DimensionMismatch(f"vector of dim {d['dim']} has {flat.size} amplitudes")
    return make_pure(flat)


def state_to_json(state) -> dict:
    if isinstance(state, PureState):
        return {"kind": "pure", **pure_to_json(state)}
    return {"kind": "density", **matrix_to_json(state)}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from exc


def fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_trajectories(path: Path, ensemble, steps=None) -> Path:
    """``t, q_1..q_N, stream_id``; rows grouped by trajectory, then time.

    ``steps`` restricts the rows to those time indices (default: all).
    """
    n = ensemble.positions.shape[2]
    steps = range(ensemble.times.size) if steps is None else list(steps)
    header = ["t"] + [f"q_{i + 1}" for i in range(n)] + ["stream_id"]

    def rows():
        for j, sid in enumerate(ensemble.stream_ids):
            for k in steps:
                yield [float(ensemble.times[k]), *(float(x) for x in ensemble.positions[k, j]), int(sid)]

    return write_csv(path, header, rows())


def write_flashes(path: Path, flashes) -> Path:
    return write_csv(path, ["t", "k", "x", "kind"], ([f.time, f.particle, f.center, f.kind] for f in flashes))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
