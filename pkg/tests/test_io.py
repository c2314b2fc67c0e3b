import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldg.domain import DomainSpec, Hole, TensorField, build_grid
from ldg.errors import GridMismatch
from ldg.io import dumps, read_field, read_obj, write_field, write_json, write_obj, write_scalar_field
from ldg.topology import BiaxField, extract_level_set, icosphere


@pytest.fixture(scope="module")
def grid():
    return build_grid(DomainSpec(holes=(Hole((0.4, 0, 0), 0.2),)), 40)


@pytest.mark.parametrize("binary", [True, False])
def test_field_round_trip_is_bitwise(grid, tmp_path, binary):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=grid.shape + (5,)) * 10.0 ** rng.integers(-20, 20, grid.shape + (5,))
    path = tmp_path / "f.vtk"
    write_field(path, TensorField(grid, vals, {}), binary=binary)
    back = read_field(path)
    assert np.array_equal(back.values, vals)
    assert back.grid.spec == grid.spec and back.grid.n == grid.n
    assert np.array_equal(back.grid.kind, grid.kind)


def test_vtk_header(grid, tmp_path):
    path = tmp_path / "f.vtk"
    write_field(path, TensorField(grid, np.zeros(grid.shape + (5,)), {}))
    head = path.read_bytes().split(b"\n")[:8]
    assert head[0] == b"# vtk DataFile Version 3.0"
    assert head[2] == b"BINARY" and head[3] == b"DATASET STRUCTURED_POINTS"
    assert head[4] == b"DIMENSIONS 40 40 40"
    assert json.loads(head[1])["byte_order"] == "little"


def test_vtk_point_order_runs_x_fastest(tmp_path):
    g = build_grid(DomainSpec(), 16)
    vals = np.zeros(g.shape + (5,))
    vals[1, 0, 0, 0] = 7.0
    path = tmp_path / "f.vtk"
    write_field(path, TensorField(g, vals, {}), binary=False)
    lines = path.read_text().splitlines()
    start = lines.index("SCALARS q0 double 1") + 2
    assert float(lines[start + 1]) == 7.0


def test_grid_mismatch(grid, tmp_path):
    path = tmp_path / "f.vtk"
    write_field(path, TensorField(grid, np.zeros(grid.shape + (5,)), {}))
    raw = path.read_bytes().replace(b"SPACING ", b"SPACING 1", 1)
    bad = tmp_path / "bad.vtk"
    bad.write_bytes(raw)
    with pytest.raises(GridMismatch):
        read_field(bad)


def test_scalar_field_file(grid, tmp_path):
    data = np.arange(grid.n ** 3, dtype=float).reshape(grid.shape)
    path = tmp_path / "s.vtk"
    write_scalar_field(path, grid, "beta", data)
    buf = path.read_bytes()
    off = buf.index(b"LOOKUP_TABLE default\n") + len(b"LOOKUP_TABLE default\n")
    flat = np.frombuffer(buf, "<f8", grid.n ** 3, off)
    assert np.array_equal(flat, np.transpose(data).ravel())


def test_obj_round_trip(tmp_path):
    g = build_grid(DomainSpec(), 32)
    x = g.coords
    rho = np.hypot(x[..., 0], x[..., 1])
    m = extract_level_set(BiaxField.from_scalar(g, np.hypot(rho - 0.5, x[..., 2]) - 0.2), 0.0)
    path = tmp_path / "m.obj"
    write_obj(path, m.vertices, m.faces)
    v, f = read_obj(path)
    assert np.array_equal(v, m.vertices) and np.array_equal(f, m.faces)
    v, f = icosphere(1)
    write_obj(path, v, f)
    assert read_obj(path)[1].min() == 0


def test_json_floats_use_17_digits(tmp_path):
    x = 0.1 + 0.2
    text = dumps({"a": x, "b": 1.0, "c": 3, "d": [1e-300, float("nan")], "e": np.float64(2.5),
                  "f": True, "g": None, "h": np.arange(3)})
    data = json.loads(text)
    assert data["a"] == x and "0.30000000000000004" in text
    assert '"b": 1.0' in text and '"c": 3' in text
    assert data["d"] == [1e-300, None] and data["h"] == [0, 1, 2]
    path = tmp_path / "s.json"
    write_json(path, {"k": [{"x": 1.5}]})
    assert json.loads(path.read_text()) == {"k": [{"x": 1.5}]}
    with pytest.raises(TypeError):
        dumps({"x": object()})


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_float_round_trip(x):
    assert json.loads(dumps([x]))[0] == x
