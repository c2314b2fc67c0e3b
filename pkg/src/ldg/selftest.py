"""Fast invariant checks that run without the test suite (``ldg selftest``)."""
from __future__ import annotations

import math
import tempfile
import traceback
from pathlib import Path

import numpy as np


def _check_qtensor():
    from . import qtensor as qt

    g = np.einsum("aij,bij->ab", qt.BASIS, qt.BASIS)
    assert np.allclose(g, np.eye(5), atol=1e-15)
    assert abs(qt.s_plus(1, 1, 1) - 1.5) < 1e-15
    assert abs(qt.potential_w(np.zeros(5)) - 1 / (12 * qt.SQRT6)) < 1e-15
    rng = np.random.default_rng(1)
    q = rng.normal(size=(50, 5))
    vals, vecs = qt.eigen(q)
    m = qt.to_matrix(q)
    res = np.einsum("nij,njk->nik", m, vecs) - vecs * vals[:, None, :]
    assert np.abs(res).max() < 1e-10
    v = rng.normal(size=(50, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    assert np.allclose(qt.biaxiality(qt.uniaxial(v)), 1.0, atol=1e-12)
    assert np.allclose(qt.potential_w(qt.uniaxial(v)), 0.0, atol=1e-14)


def _check_energy():
    from .domain import DomainSpec, boundary_hedgehog, build_grid
    from .energy import Assembled, objective, objective_gradient
    from .minimize import initial_guess

    g = build_grid(DomainSpec(), 16)
    f = initial_guess(g, boundary_hedgehog(g), 0.1, 3).values
    grad = objective_gradient(f, g, 1.0, 2.0)
    rng = np.random.default_rng(2)
    d = np.zeros_like(f)
    d[g.interior] = rng.normal(size=(int(g.interior.sum()), 5))
    t = 1e-6
    fd = (objective(f + t * d, g, 1.0, 2.0).total - objective(f - t * d, g, 1.0, 2.0).total) / (2 * t)
    assert abs(fd - np.sum(grad * d)) < 1e-5 * max(1.0, abs(fd))
    a = Assembled(g, f, 1.0, 2.0)
    assert np.allclose(a.gradient(a.gather(f)), a.gather(grad), atol=1e-12)


def _check_hedgehog():
    from .hedgehog import RadialProfile, basis_gram, eta_family, second_var_radial

    eta = RadialProfile(lambda r: r * (1 - r), lambda r: 1 - 2 * r)
    assert abs(second_var_radial(eta) - 8 * math.pi / 75) < 1e-10
    assert second_var_radial(eta_family(100)) < 0
    assert np.allclose(basis_gram(), 4 * math.pi / 5 * np.eye(5), atol=1e-3)


def _check_topology():
    from .domain import DomainSpec, build_grid
    from .topology import BiaxField, degree, extract_level_set, icosphere

    v, f = icosphere(2)
    assert degree(v, f).value == 1 and degree(-v, f).value == -1
    assert degree(np.tile([0.0, 0.0, 1.0], (len(v), 1)), f).value == 0
    g = build_grid(DomainSpec(), 32)
    x = g.coords
    rho = np.hypot(x[..., 0], x[..., 1])
    torus = extract_level_set(BiaxField.from_scalar(g, np.hypot(rho - 0.5, x[..., 2]) - 0.2), 0.0)
    assert torus.genera() == [1]
    sphere = extract_level_set(BiaxField.from_scalar(g, np.linalg.norm(x, axis=-1) - 0.5), 0.0)
    assert sphere.genera() == [0]


def _check_io():
    from .domain import DomainSpec, TensorField, build_grid
    from .io import read_field, write_field

    g = build_grid(DomainSpec(), 16)
    vals = np.random.default_rng(4).normal(size=g.shape + (5,))
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "f.vtk"
        write_field(p, TensorField(g, vals, {}))
        assert np.array_equal(read_field(p).values, vals)


CHECKS = {"qtensor": _check_qtensor, "energy": _check_energy, "hedgehog": _check_hedgehog,
          "topology": _check_topology, "io": _check_io}


def run_all(verbose: bool = True) -> list:
    failures = []
    for name, fn in CHECKS.items():
        try:
            fn()
            ok = True
        except Exception:  # report every failure, keep going
            ok = False
            failures.append(name)
            if verbose:
                traceback.print_exc()
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
    return failures
