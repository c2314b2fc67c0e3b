import math

import numpy as np
import pytest

from ldg import qtensor as qt
from ldg.domain import DomainSpec, TensorField, boundary_hedgehog, build_grid, harmonic_extension
from ldg.energy import energy_constrained, energy_unconstrained, residual_constrained
from ldg.errors import NotOnSphere
from ldg.minimize import (SolverOptions, initial_guess, minimize_constrained, minimize_gl,
                          minimize_unconstrained, mu_continuation, renormalized, resample)

E0 = qt.basis_vector(0)


@pytest.fixture(scope="module")
def g32():
    return build_grid(DomainSpec(), 32)


@pytest.fixture(scope="module")
def g24():
    return build_grid(DomainSpec(), 24)


def constant(grid, c):
    return TensorField(grid, np.broadcast_to(c, grid.shape + (5,)).copy(), {})


def strictly_decreasing(trace):
    e = np.array([v for _, v in trace])
    return bool(np.all(np.diff(e) < 0))


def test_initial_guess_is_unit_with_frozen_boundary(g24):
    bc = boundary_hedgehog(g24)
    f = initial_guess(g24, bc, 0.1, 5)
    assert np.allclose(f.norms()[g24.active], 1, atol=1e-12)
    frozen = ~g24.interior
    assert np.array_equal(f.values[frozen], bc[frozen])
    again = initial_guess(g24, bc, 0.1, 5)
    assert np.array_equal(f.values, again.values)
    assert not np.array_equal(f.values, initial_guess(g24, bc, 0.1, 6).values)


def test_constrained_lambda0_converges(g32):
    f0 = initial_guess(g32, boundary_hedgehog(g32), 0.0)
    f, rep = minimize_constrained(f0, 0.0, SolverOptions(tol=1e-4, max_iters=3000))
    assert rep.converged and rep.residual < 1e-4
    assert strictly_decreasing(rep.energy_trace)
    assert np.abs(f.norms()[g32.active] - 1).max() <= 1e-9
    frozen = ~g32.interior
    assert np.array_equal(f.values[frozen], f0.values[frozen])
    r = residual_constrained(f, 0.0)
    assert r.rms == pytest.approx(rep.residual, rel=1e-6)
    assert rep.energy.total == pytest.approx(energy_constrained(f, 0.0).total, rel=1e-12)


def test_constant_vacuum_needs_no_iterations(g24):
    f, rep = minimize_constrained(constant(g24, E0), 1.0)
    assert rep.iterations == 0 and rep.converged
    assert np.array_equal(f.values, constant(g24, E0).values)


def test_constrained_rejects_non_unit_start(g24):
    with pytest.raises(NotOnSphere):
        minimize_constrained(constant(g24, 0.5 * E0), 1.0)


def test_larger_lambda_lowers_potential(g24):
    """At lam = 0 the potential carries no weight, so compare the W integral."""
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 1)
    opts = SolverOptions(tol=1e-4, max_iters=400)
    f_a, _ = minimize_constrained(f0, 0.0, opts)
    f_b, _ = minimize_constrained(f0, 10.0, opts)
    w_a = energy_constrained(f_a, 1.0)
    w_b = energy_constrained(f_b, 1.0)
    assert w_b.potential < w_a.potential
    assert w_b.potential / w_b.total < w_a.potential / w_a.total


def test_unconstrained_max_principle(g32):
    f0 = initial_guess(g32, boundary_hedgehog(g32), 0.1, 0)
    f, rep = minimize_unconstrained(f0, 1.0, 50.0, SolverOptions(tol=1e-4, max_iters=1500))
    assert rep.max_norm <= 1.02
    assert strictly_decreasing(rep.energy_trace)
    assert rep.energy.total <= energy_unconstrained(f0, 1.0, 50.0).total
    assert rep.extra["mu_penalty_integral"] == pytest.approx(4 * rep.energy.penalty)


def test_unconstrained_linear_case_is_harmonic_extension(g24):
    bc = boundary_hedgehog(g24)
    f0 = initial_guess(g24, bc, 0.2, 2)
    f, rep = minimize_unconstrained(f0, 0.0, 0.0, SolverOptions(tol=1e-6, max_iters=20000))
    assert rep.converged and rep.residual < 1e-6
    ref = harmonic_extension(g24, bc, tol=1e-12)
    assert np.abs(f.values - ref)[g24.interior].max() < 1e-5


def test_determinism(g24):
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 9)
    opts = SolverOptions(tol=1e-8, max_iters=60)
    _, a = minimize_constrained(f0, 1.0, opts)
    _, b = minimize_constrained(f0, 1.0, opts)
    assert a.energy_trace == b.energy_trace


@pytest.mark.parametrize("rule", ["long", "short", "alternate"])
def test_bb_rules_descend(g24, rule):
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 3)
    _, rep = minimize_constrained(f0, 1.0, SolverOptions(tol=1e-8, max_iters=80, bb_rule=rule))
    assert strictly_decreasing(rep.energy_trace) and rep.iterations == 80


def test_mu_continuation_small(g24):
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 0)
    out = mu_continuation(f0, 1.0, [20, 80, 320], SolverOptions(tol=1e-4, max_iters=600))
    mins = [rep.extra["min_norm_interior"] for _, _, rep in out]
    pens = [rep.extra["mu_penalty_integral"] for _, _, rep in out]
    assert [mu for mu, _, _ in out] == [20, 80, 320]
    assert all(b > a for a, b in zip(mins, mins[1:]))
    assert all(b < a for a, b in zip(pens, pens[1:]))
    h = g24.h
    assert all(rep.max_norm <= 1 + 5 * h * h for _, _, rep in out)
    with pytest.raises(ValueError):
        mu_continuation(f0, 1.0, [10, 5])


def test_gl_ladder_approaches_anchor(g24):
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 4)
    anchor, _ = minimize_constrained(f0, 1.0, SolverOptions(tol=1e-4, max_iters=800))
    out = minimize_gl(anchor, 1.0, [0.2, 0.1, 0.05], SolverOptions(tol=1e-6, max_iters=800))
    dist = [rep.extra["l2_to_anchor"] for _, _, rep in out]
    pen = [rep.extra["gl_penalty"] for _, _, rep in out]
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert all(b < a for a, b in zip(pen, pen[1:]))
    e_anchor = energy_constrained(anchor, 1.0).total
    assert out[-1][2].extra["gl_total"] <= e_anchor + 1e-12
    with pytest.raises(ValueError):
        minimize_gl(anchor, 1.0, [0.1, 0.2])


def test_gl_constant_anchor_is_fixed_point(g24):
    anchor = constant(g24, E0)
    out = minimize_gl(anchor, 1.0, [0.2, 0.1, 0.05], SolverOptions(tol=1e-8))
    for _, f, rep in out:
        assert rep.residual < 1e-8
        assert np.array_equal(f.values, anchor.values)


def test_resample_keeps_unit_norm_and_boundary(g24):
    f0 = initial_guess(g24, boundary_hedgehog(g24), 0.1, 0)
    g2 = build_grid(DomainSpec(), 40)
    bc = boundary_hedgehog(g2)
    f = resample(f0, g2, bc)
    assert np.allclose(f.norms()[g2.active], 1, atol=1e-12)
    assert np.array_equal(f.values[~g2.interior], bc[~g2.interior])
    smooth = TensorField(g24, np.broadcast_to(E0, g24.shape + (5,)).copy(), {})
    assert np.allclose(resample(smooth, g2, bc).values[g2.interior], E0)


def test_renormalized(g24):
    f = constant(g24, 0.3 * E0)
    r = renormalized(f)
    assert np.allclose(r.norms()[g24.active], 1)
    assert math.isclose(np.abs(r.values[~g24.active]).max(), 0.3)
