"""File formats: JSON metadata sidecars + raw little-endian float32 arrays.

An ensemble is a metadata JSON file next to one raw file per
(variable, member); a probability volume is a metadata JSON plus a single
raw file. Raw arrays are 32-bit IEEE-754, x-fastest vertex order. Traits
are plain JSON vertex lists; meshes are exported as Wavefront OBJ.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import FieldIOError, TraitError
from .geometry import TraitPolygon
from .grid import EnsembleField, ProbabilityVolume, TriangleMesh, UniformGrid3

_BYTE_ORDERS = {"little": "<", "big": ">"}


def _read_json(path):
    path = Path(path)
    if str(path) == "" or not path.is_file():
        raise FieldIOError(f"metadata file not found: {path!r}")
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FieldIOError(f"cannot read {path}: {e}") from e


def _grid_from_meta(meta, path):
    try:
        return UniformGrid3(tuple(meta["dims"]), tuple(meta["origin"]),
                            tuple(meta["spacing"]))
    except (KeyError, TypeError, ValueError) as e:
        raise FieldIOError(f"bad grid metadata in {path}: {e}") from e


def _read_raw(path, count, byte_order):
    if not os.path.isfile(path):
        raise FieldIOError(f"raw file not found: {path}")
    size = os.path.getsize(path)
    if size != count * 4:
        raise FieldIOError(
            f"size mismatch in {path}: expected {count * 4} bytes, found {size}")
    data = np.fromfile(path, dtype=np.dtype(_BYTE_ORDERS[byte_order] + "f4"))
    return data.astype(np.float32, copy=False)


def save_ensemble(ens: EnsembleField, metadata_path) -> None:
    """Write metadata JSON plus one raw float32 file per (variable, member)."""
    metadata_path = Path(metadata_path)
    if str(metadata_path) == "":
        raise FieldIOError("empty path")
    metadata_path.parent.mkdir(parents=True, exist_ok=True)
    stem = metadata_path.stem
    raw_files = []
    for v in range(2):
        per_member = []
        for m in range(ens.member_count):
            name = f"{stem}_v{v}_m{m}.raw"
            ens.values[:, v, m].astype("<f4").tofile(metadata_path.parent / name)
            per_member.append(name)
        raw_files.append(per_member)
    meta = {
        "dims": list(ens.grid.dims),
        "origin": list(ens.grid.origin),
        "spacing": list(ens.grid.spacing),
        "member_count": ens.member_count,
        "variables": list(ens.variable_names),
        "byte_order": "little",
        "raw_files": raw_files,
    }
    with open(metadata_path, "w") as f:
        json.dump(meta, f, indent=2)


def load_ensemble(metadata_path) -> EnsembleField:
    """Load and fully validate an ensemble (sizes, finiteness)."""
    meta = _read_json(metadata_path)
    grid = _grid_from_meta(meta, metadata_path)
    byte_order = meta.get("byte_order", "little")
    if byte_order not in _BYTE_ORDERS:
        raise FieldIOError(f"unsupported byte order {byte_order!r}")
    members = int(meta["member_count"])
    raw_files = meta["raw_files"]
    if len(raw_files) != 2 or any(len(r) != members for r in raw_files):
        raise FieldIOError(
            f"raw_files must list 2 variables x {members} members")
    n = grid.vertex_count
    base = Path(metadata_path).parent
    values = np.empty((n, 2, members), dtype=np.float32)
    for v in range(2):
        for m in range(members):
            data = _read_raw(base / raw_files[v][m], n, byte_order)
            bad = ~np.isfinite(data)
            if bad.any():
                vertex = int(np.nonzero(bad)[0][0])
                raise FieldIOError(
                    f"non-finite value at vertex {vertex} in {raw_files[v][m]}")
            values[:, v, m] = data
    names = tuple(meta.get("variables", ("A1", "A2")))[:2]
    return EnsembleField(grid, values, names)


def save_probability_volume(vol: ProbabilityVolume, metadata_path) -> None:
    metadata_path = Path(metadata_path)
    if str(metadata_path) == "":
        raise FieldIOError("empty path")
    metadata_path.parent.mkdir(parents=True, exist_ok=True)
    raw_name = metadata_path.stem + ".raw"
    vol.values.astype("<f4").tofile(metadata_path.parent / raw_name)
    meta = {
        "dims": list(vol.grid.dims),
        "origin": list(vol.grid.origin),
        "spacing": list(vol.grid.spacing),
        "byte_order": "little",
        "raw_file": raw_name,
    }
    with open(metadata_path, "w") as f:
        json.dump(meta, f, indent=2)


def load_probability_volume(metadata_path) -> ProbabilityVolume:
    meta = _read_json(metadata_path)
    grid = _grid_from_meta(meta, metadata_path)
    byte_order = meta.get("byte_order", "little")
    if byte_order not in _BYTE_ORDERS:
        raise FieldIOError(f"unsupported byte order {byte_order!r}")
    data = _read_raw(Path(metadata_path).parent / meta["raw_file"],
                     grid.vertex_count, byte_order)
    if not np.isfinite(data).all():
        raise FieldIOError("non-finite probability value")
    if data.size and (float(data.min()) < 0.0 or float(data.max()) > 1.0):
        raise FieldIOError(
            f"probability outside [0,1]: min {data.min()}, max {data.max()}")
    return ProbabilityVolume(grid, data)


def save_trait(trait: TraitPolygon, path) -> None:
    path = Path(path)
    if str(path) == "":
        raise FieldIOError("empty path")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump({"vertices": trait.vertices.tolist()}, f, indent=2)


def load_trait(path) -> TraitPolygon:
    """Load a trait polygon; normalization and validation happen in the type."""
    data = _read_json(path)
    try:
        verts = data["vertices"]
    except (KeyError, TypeError) as e:
        raise TraitError(f"trait file {path} must contain a 'vertices' list") from e
    return TraitPolygon(np.asarray(verts, dtype=float))


def save_obj(mesh: TriangleMesh, path) -> None:
    """Wavefront OBJ export: positions and faces only."""
    path = Path(path)
    if str(path) == "":
        raise FieldIOError("empty path")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(obj_text(mesh))


def obj_text(mesh: TriangleMesh) -> str:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    return "\n".join(lines) + "\n"


def load_obj(path) -> TriangleMesh:
    """Minimal OBJ reader for round-trip tests (v/f lines only)."""
    verts, tris = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                tris.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return TriangleMesh(np.array(verts, float).reshape(-1, 3),
                        np.array(tris, np.int64).reshape(-1, 3))
