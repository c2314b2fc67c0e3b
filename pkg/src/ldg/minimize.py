"""Descent drivers for the constrained, penalized and anchored energies.

All three share one loop: steepest descent with a Barzilai-Borwein trial step
and Armijo backtracking. Energy decreases are evaluated as sums of local
differences rather than differences of totals, so the sufficient-decrease
test stays meaningful down to residuals far below the round-off level of the
total energy.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Grid, TensorField, harmonic_extension
from .energy import Assembled, check_unit, objective
from .errors import LineSearchStalled

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    tol: float = 1e-5
    max_iters: int = 50000
    noise_amplitude: float = 0.1
    seed: int = 0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    tau_min: float = 1e-12
    tau_cap: float = math.inf
    log_every: int = 0
    bb_rule: str = "short"   # "long", "short" or "alternate"


@dataclass
class SolveReport:
    iterations: int
    energy: EnergyBreakdown
    residual: float
    min_norm: float
    max_norm: float
    energy_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "energy": self.energy.as_dict(),
                "residual": self.residual, "min_norm": self.min_norm,
                "max_norm": self.max_norm, "wall_time": self.wall_time,
                "converged": self.converged, **self.extra}


# -- descent loop ---------------------------------------------------------------

def _rowdot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _unit_rows(q):
    return q / np.sqrt(_rowdot(q, q))[:, None]


def _descent(values, grid, lam, pen, anchor, sphere, opts: SolverOptions):
    t0 = time.perf_counter()
    prob = Assembled(grid, values, lam, pen, anchor)
    x = prob.gather(values)
    if sphere:
        x = _unit_rows(x)
    w = prob.w
    vol = float(grid.weights.sum())
    h3 = grid.h ** 3
    energy = objective(prob.scatter(values, x), grid, lam, pen, anchor).total
    trace = [(0, energy)]
    x_prev = g_prev = None
    tau = None
    cap = opts.tau_cap
    stalled_once = False
    it = 0
    rms = math.inf
    converged = False

    def search_direction(q):
        g = prob.gradient(q)
        return g - _rowdot(q, g)[:, None] * q if sphere else g

    g = search_direction(x)
    while True:
        rms = math.sqrt(float(np.dot(w, _rowdot(g, g))) / vol) / h3
        if rms < opts.tol:
            converged = True
            break
        if it >= opts.max_iters:
            break
        gg = float(np.sum(g * g))
        tau_bb = None
        if x_prev is not None:
            s = x - x_prev
            y = g - g_prev
            sy = float(np.sum(s * y))
            if sy > 0:
                long_step = float(np.sum(s * s)) / sy
                short_step = sy / float(np.sum(y * y))
                rule = opts.bb_rule
                if rule == "alternate":
                    rule = "long" if it % 2 else "short"
                tau_bb = long_step if rule == "long" else short_step
        if tau_bb is None:
            tau = (tau or 0.1 / grid.h) * 2.0 if it else 0.05 / grid.h
        else:
            tau = tau_bb
        tau = min(tau, cap)
        while True:
            trial = x - tau * g
            if sphere:
                trial = _unit_rows(trial)
            de = prob.change(trial, x)
            if de < 0 and de <= -opts.armijo_c * tau * gg:
                break
            tau *= opts.backtrack
            if tau < opts.tau_min:
                break
        if tau < opts.tau_min:
            if stalled_once:
                raise LineSearchStalled(
                    f"no decreasing step at iteration {it} (residual {rms:.3g})")
            stalled_once = True
            cap = (cap if math.isfinite(cap) else 0.05 / grid.h * 64) / 2
            x_prev = g_prev = None
            tau = None
            continue
        x_prev, g_prev = x, g
        x = trial
        energy += de
        it += 1
        trace.append((it, energy))
        g = search_direction(x)
        if opts.log_every and it % opts.log_every == 0:
            log.info("iter %d energy %.12g residual %.3e tau %.3g", it, energy, rms, tau)
    out = prob.scatter(values, x)
    parts = objective(out, grid, lam, pen, anchor)
    norms = np.linalg.norm(out, axis=-1)[grid.active]
    report = SolveReport(iterations=it, energy=parts, residual=rms,
                         min_norm=float(norms.min()), max_norm=float(norms.max()),
                         energy_trace=trace, wall_time=time.perf_counter() - t0,
                         converged=converged)
    return out, report


# -- initial data -----------------------------------------------------------------

def initial_guess(grid: Grid, bc: np.ndarray, noise_amplitude: float = 0.1,
                  seed: int = 0, normalize: bool = True) -> TensorField:
    """Harmonic extension of the frozen data, normalized, with seeded tangent noise.

    Nodes where the extension nearly vanishes get a random unit value before
    the noise is applied.
    """
    rng = np.random.default_rng(seed)
    vals = harmonic_extension(grid, bc)
    inn = grid.interior
    q = vals[inn]
    nrm = np.linalg.norm(q, axis=-1)
    small = nrm < 1e-8
    if small.any():
        r = rng.normal(size=(small.sum(), 5))
        q[small] = r / np.linalg.norm(r, axis=-1, keepdims=True)
        nrm[small] = 1.0
    if normalize:
        q = q / nrm[:, None]
    if noise_amplitude:
        eta = rng.normal(size=q.shape) * noise_amplitude
        if normalize:
            eta -= np.sum(eta * q, -1, keepdims=True) * q
        q = q + eta
        if normalize:
            q /= np.linalg.norm(q, axis=-1, keepdims=True)
    vals[inn] = q
    return TensorField(grid, vals, {"init": "harmonic", "noise": noise_amplitude, "seed": seed})


# -- drivers -------------------------------------------------------------------------

def resample(field: TensorField, grid: Grid, bc: np.ndarray) -> TensorField:
    """Trilinear transfer of a field to another grid of the same domain.

    Frozen nodes of the target take the values bc; interior values are
    renormalized when the source is unit-norm on its active nodes.
    """
    from scipy.ndimage import map_coordinates

    src = field.grid
    pts = (grid.coords[grid.interior] - src.origin) / src.h
    vals = bc.copy()
    q = np.stack([map_coordinates(field.values[..., c], pts.T, order=1, mode="nearest")
                  for c in range(5)], axis=-1)
    nrm = np.linalg.norm(field.values[src.active], axis=-1)
    if np.allclose(nrm, 1.0, atol=1e-6):
        q = _unit_rows(q)
    vals[grid.interior] = q
    return TensorField(grid, vals, {**field.meta, "resampled_from": src.n})


def minimize_constrained(field0: TensorField, lam: float,
                         opts: Optional[SolverOptions] = None):
    """Projected descent for E_lam over unit-norm fields with frozen boundary data."""
    opts = opts or SolverOptions()
    check_unit(field0)
    x, rep = _descent(field0.values, field0.grid, lam, 0.0, None, True, opts)
    rep.extra["kind"] = "constrained"
    rep.extra["lam"] = lam
    return TensorField(field0.grid, x, dict(field0.meta)), rep


def _unitize(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def minimize_unconstrained(field0: TensorField, lam: float, mu: float,
                           opts: Optional[SolverOptions] = None):
    """Descent for F_{lam,mu} with frozen boundary data."""
    opts = opts or SolverOptions()
    x, rep = _descent(field0.values, field0.grid, lam, mu / 4.0, None, False, opts)
    rep.extra.update(kind="unconstrained", lam=lam, mu=mu,
                     mu_penalty_integral=4.0 * rep.energy.penalty)
    return TensorField(field0.grid, x, dict(field0.meta)), rep


def mu_continuation(field0: TensorField, lam: float, mu_ladder: Sequence[float],
                    opts: Optional[SolverOptions] = None):
    """Minimize F_{lam,mu} along an increasing ladder, warm-starting each stage.

    Returns a list of (mu, field, report); each report carries the minimum
    norm over the domain and mu * int (1 - |Q|^2)^2.
    """
    ladder = list(mu_ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("mu ladder must be strictly increasing")
    out = []
    cur = field0
    for mu in ladder:
        cur, rep = minimize_unconstrained(cur, lam, mu, opts)
        inn = cur.grid.interior
        rep.extra["min_norm_interior"] = float(np.linalg.norm(cur.values[inn], axis=-1).min())
        out.append((mu, cur, rep))
    return out


def minimize_gl(anchor: TensorField, lam: float, eps_ladder: Sequence[float],
                opts: Optional[SolverOptions] = None):
    """Critical points of GL_eps(anchor; .) along a decreasing eps ladder.

    Each report carries the L2 distance to the anchor, the GL total, and the
    penalty part (1/4 eps^2) int (1 - |Q|^2)^2.
    """
    opts = opts or SolverOptions()
    check_unit(anchor)
    ladder = list(eps_ladder)
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    grid = anchor.grid
    out = []
    cur = anchor.values
    for eps in ladder:
        cur, rep = _descent(cur, grid, lam, 1.0 / (4 * eps * eps), anchor.values, False, opts)
        diff = cur - anchor.values
        l2 = math.sqrt(float(np.dot(grid.weights[grid.active],
                                    np.sum(diff[grid.active] ** 2, -1))))
        rep.extra.update(kind="gl", lam=lam, eps=eps, l2_to_anchor=l2,
                         gl_total=rep.energy.total, gl_penalty=rep.energy.penalty)
        out.append((eps, TensorField(grid, cur, dict(anchor.meta)), rep))
    return out


def renormalized(field: TensorField) -> TensorField:
    """Project every non-exterior node value onto the unit sphere."""
    v = field.values.copy()
    act = field.grid.active
    v[act] = _unitize(v[act])
    return TensorField(field.grid, v, dict(field.meta))
