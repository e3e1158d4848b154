"""Persistence: field binaries, CSV tables, JSON manifests and map files.

Field files are a single JSON header line (UTF-8, terminated by newline)
followed by the raw little-endian float64 arrays named in the header, in C
order.  The header carries dims, spacing, the confining box, and the mask as
run-length pairs.  All text outputs are UTF-8 with LF line endings.  See
docs/formats.md for the full schemas.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import LaurentMap, VortexEnsemble
from .elliptic import MaskedGrid

MAGIC = "roughflow-field"


def mask_to_rle(mask: np.ndarray) -> list[list[int]]:
    flat = mask.ravel()
    edges = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(flat)]])
    return [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_to_mask(rle, shape) -> np.ndarray:
    parts = [np.full(count, value, dtype=np.int16) for value, count in rle]
    return np.concatenate(parts).reshape(shape)


def write_field(path, grid: MaskedGrid, arrays: dict[str, np.ndarray]) -> None:
    header = {
        "magic": MAGIC,
        "version": 1,
        "dims": list(grid.shape),
        "h": grid.h,
        "box": list(grid.box),
        "mask_rle": mask_to_rle(grid.mask),
        "arrays": list(arrays.keys()),
        "dtype": "<f8",
        "order": "C",
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name in header["arrays"]:
            a = np.ascontiguousarray(arrays[name], dtype="<f8")
            if a.shape != grid.shape:
                raise ValueError(f"array {name!r} does not match the grid shape")
            f.write(a.tobytes())


def read_field(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        if header.get("magic") != MAGIC:
            raise ValueError("not a field file")
        shape = tuple(header["dims"])
        count = shape[0] * shape[1]
        arrays = {}
        for name in header["arrays"]:
            buf = f.read(count * 8)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    header["mask"] = rle_to_mask(header["mask_rle"], shape)
    return header, arrays


def write_snapshot(path_prefix, grid: MaskedGrid, state, lq_norms: dict, energy: float) -> None:
    """Field file plus a JSON sidecar {t, gamma, alpha, energy, lq_norms}."""
    write_field(
        str(path_prefix) + ".field",
        grid,
        {"omega": state.omega, "ux": state.u[0], "uy": state.u[1]},
    )
    sidecar = {
        "t": state.t,
        "gamma": [float(g) for g in state.gamma],
        "alpha": [float(a) for a in state.alpha],
        "energy": energy,
        "lq_norms": lq_norms,
    }
    Path(str(path_prefix) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    keys = list(rows[0].keys())
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in keys})
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_matrix_csv(path, m: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(m), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(path, config: dict, outputs: list[str], wall_time_s: float) -> dict:
    """Run manifest: config, its hash, versions, wall time.  Everything but
    wall_time_s is deterministic; data outputs are bit-identical across
    repeated runs of one config."""
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "outputs": sorted(outputs),
        "wall_time_s": wall_time_s,
    }
    Path(path).write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest


def write_laurent_map(path, m: LaurentMap) -> None:
    Path(path).write_text(
        json.dumps(m.to_json(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def read_laurent_map(path) -> LaurentMap:
    return LaurentMap.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def write_ensemble_csv(path, ens: VortexEnsemble) -> None:
    rows = [
        {"x": z.real, "y": z.imag, "gamma": g}
        for z, g in zip(ens.positions, ens.strengths)
    ]
    write_csv(path, rows)


def read_ensemble_csv(path, blob_delta: float = 0.0) -> VortexEnsemble:
    rows = read_csv(path)
    pos = np.array([complex(float(r["x"]), float(r["y"])) for r in rows])
    g = np.array([float(r["gamma"]) for r in rows])
    return VortexEnsemble(pos, g, blob_delta=blob_delta)
