"""File formats: volumetric fields, triangle meshes, CSV tables and JSON summaries.

Fields use the legacy VTK structured-points layout with point arrays q0..q4
(float64) and the node classification as an int32 array named mask. Binary
payloads are little-endian, which differs from the big-endian default of
the legacy format; the header comment records this. ASCII payloads print
17 significant digits so a write/read cycle is exact either way.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .domain import DomainSpec, Grid, Hole, TensorField, build_grid
from .errors import GridMismatch

_FLOAT = "%.17g"


# -- JSON ---------------------------------------------------------------------

def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = _FLOAT % x
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(v, indent, level + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(pad + s for s in items) + "\n" + end + "]"
    if hasattr(obj, "as_dict"):
        return _encode(obj.as_dict(), indent, level)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float printed to 17 significant digits."""
    return _encode(obj, indent, 0)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")


# -- fields -------------------------------------------------------------------------

def _spec_to_dict(spec: DomainSpec) -> dict:
    return {"outer_radius": spec.outer_radius, "shape": spec.shape,
            "holes": [[*map(float, h.center), float(h.radius)] for h in spec.holes]}


def _spec_from_dict(d: dict) -> DomainSpec:
    holes = tuple(Hole(tuple(h[:3]), h[3]) for h in d.get("holes", []))
    return DomainSpec(outer_radius=d["outer_radius"], holes=holes, shape=d.get("shape", "ball"))


def _vtk_order(a):
    # VTK runs x fastest; arrays here are indexed [x, y, z]
    return np.ascontiguousarray(np.transpose(a)).ravel()


def _from_vtk_order(flat, n):
    return np.transpose(flat.reshape(n, n, n))


def write_field(path, field: TensorField, binary: bool = True):
    g = field.grid
    title = json.dumps({"ldg": 1, "domain": _spec_to_dict(g.spec), "n": g.n,
                        "byte_order": "little"}, separators=(",", ":"))
    head = ["# vtk DataFile Version 3.0", title, "BINARY" if binary else "ASCII",
            "DATASET STRUCTURED_POINTS", f"DIMENSIONS {g.n} {g.n} {g.n}",
            "ORIGIN " + " ".join(_FLOAT % o for o in g.origin),
            "SPACING " + " ".join([_FLOAT % g.h] * 3), f"POINT_DATA {g.n ** 3}"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n").encode())
        arrays = [(f"q{c}", "double", field.values[..., c]) for c in range(5)]
        arrays.append(("mask", "int", g.kind.astype(np.int32)))
        for name, kind, arr in arrays:
            fh.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n".encode())
            flat = _vtk_order(arr)
            if binary:
                fh.write(flat.astype("<f8" if kind == "double" else "<i4").tobytes())
                fh.write(b"\n")
            else:
                fmt = _FLOAT if kind == "double" else "%d"
                fh.write(("\n".join(fmt % x for x in flat) + "\n").encode())


def _readline(buf, pos):
    end = buf.index(b"\n", pos)
    return buf[pos:end].decode(), end + 1


def read_field(path) -> TensorField:
    buf = Path(path).read_bytes()
    pos = 0
    lines = []
    for _ in range(8):
        line, pos = _readline(buf, pos)
        lines.append(line)
    meta = json.loads(lines[1])
    binary = lines[2].strip() == "BINARY"
    n = int(lines[4].split()[1])
    origin = np.array([float(x) for x in lines[5].split()[1:]])
    h = float(lines[6].split()[1])
    grid = build_grid(_spec_from_dict(meta["domain"]), n)
    if grid.h != h or not np.array_equal(grid.origin, origin):
        raise GridMismatch("stored spacing or origin differs from the rebuilt grid")
    count = n ** 3
    arrays = {}
    while pos < len(buf) and len(arrays) < 6:
        line, pos = _readline(buf, pos)
        if not line.startswith("SCALARS"):
            continue
        _, name, kind, _ = line.split()
        _, pos = _readline(buf, pos)
        if binary:
            size = 8 if kind == "double" else 4
            flat = np.frombuffer(buf, dtype="<f8" if kind == "double" else "<i4",
                                 count=count, offset=pos).copy()
            pos += size * count + 1
        else:
            end = pos
            for _ in range(count):
                end = buf.index(b"\n", end) + 1
            text = buf[pos:end].split()
            flat = np.array([float(t) if kind == "double" else int(t) for t in text])
            pos = end
        arrays[name] = _from_vtk_order(flat, n)
    if not np.array_equal(arrays["mask"].astype(np.int8), grid.kind):
        raise GridMismatch("stored node classification differs from the rebuilt grid")
    values = np.stack([arrays[f"q{c}"] for c in range(5)], axis=-1).astype(float)
    return TensorField(grid, values, {"source": str(path)})


def write_scalar_field(path, grid: Grid, name: str, data: np.ndarray):
    """Single float64 point array in the same structured-points layout (binary)."""
    head = ["# vtk DataFile Version 3.0", json.dumps({"ldg": 1, "n": grid.n,
                                                     "byte_order": "little"}),
            "BINARY", "DATASET STRUCTURED_POINTS", f"DIMENSIONS {grid.n} {grid.n} {grid.n}",
            "ORIGIN " + " ".join(_FLOAT % o for o in grid.origin),
            "SPACING " + " ".join([_FLOAT % grid.h] * 3), f"POINT_DATA {grid.n ** 3}",
            f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(head) + "\n").encode())
        fh.write(_vtk_order(np.asarray(data, float)).astype("<f8").tobytes())
        fh.write(b"\n")


# -- meshes ---------------------------------------------------------------------------

def write_obj(path, vertices, faces):
    with open(path, "w") as fh:
        for v in vertices:
            fh.write("v " + " ".join(_FLOAT % x for x in v) + "\n")
        for f in np.asarray(faces) + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def read_obj(path):
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, float).reshape(-1, 3), np.array(faces, np.int64).reshape(-1, 3)
