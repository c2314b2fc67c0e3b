"""Discrete energies, their exact gradients, Euler-Lagrange residuals and
monotonicity diagnostics.

The Dirichlet term is a sum over grid edges,

    (h / 2) * sum theta_ij |Q_i - Q_j|^2,

with theta_ij the fraction of the edge inside the domain (1 away from the
boundary), so its gradient at a deep interior node is -h^3 times the 7-point
Laplacian.
Bulk terms use the cut-cell quadrature weights of the grid. Residuals are
gradients divided by the cell volume h^3.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import qtensor as qt
from .domain import INTERIOR as INTERIOR_KIND, Grid, TensorField, voxel_fraction
from .errors import BallEscapesDomain, GridMismatch, NotOnSphere

UNIT_TOL = 1e-6


@dataclass
class EnergyBreakdown:
    dirichlet: float = 0.0
    potential: float = 0.0
    penalty: float = 0.0
    gl_anchor: float = 0.0

    @property
    def total(self) -> float:
        return self.dirichlet + self.potential + self.penalty + self.gl_anchor

    def as_dict(self) -> dict:
        return {"dirichlet": self.dirichlet, "potential": self.potential,
                "penalty": self.penalty, "gl_anchor": self.gl_anchor, "total": self.total}


def _edge_weights(grid: Grid):
    return grid.edge_weights


def _diffs(values):
    return (values[1:] - values[:-1], values[:, 1:] - values[:, :-1],
            values[:, :, 1:] - values[:, :, :-1])


def dirichlet_energy(values: np.ndarray, grid: Grid) -> float:
    e = 0.0
    for m, d in zip(_edge_weights(grid), _diffs(values)):
        e += float(np.sum(np.sum(d * d, axis=-1) * m))
    return 0.5 * grid.h * e


def dirichlet_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """h * sum_j (Q_i - Q_j) over active neighbours (zero on frozen nodes)."""
    g = np.zeros_like(values)
    for ax, (m, d) in enumerate(zip(_edge_weights(grid), _diffs(values))):
        d = d * m[..., None]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        g[tuple(lo)] -= d
        g[tuple(hi)] += d
    g *= grid.h
    g[~grid.interior] = 0.0
    return g


def gradient_density(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Per-node |grad Q|^2 whose h^3-weighted sum is twice the Dirichlet energy."""
    out = np.zeros(grid.shape)
    for ax, (m, d) in enumerate(zip(_edge_weights(grid), _diffs(values))):
        s = np.sum(d * d, axis=-1) * m
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += s
        out[tuple(hi)] += s
    return out / (2 * grid.h ** 2)


def _bulk(values, grid, lam, pen, anchor):
    """Potential, penalty and anchor energies with their per-node densities' gradients."""
    w = grid.weights
    act = grid.active
    q = values[act]
    wa = w[act]
    parts = {"potential": lam * float(np.dot(wa, qt.potential_w(q)))}
    if pen:
        s = 1.0 - np.sum(q * q, axis=-1)
        parts["penalty"] = pen * float(np.dot(wa, s * s))
    if anchor is not None:
        d = q - anchor[act]
        parts["gl_anchor"] = 0.5 * float(np.dot(wa, np.sum(d * d, axis=-1)))
    return parts


def _bulk_gradient(values, grid, lam, pen, anchor):
    w = grid.weights
    inn = grid.interior
    q = values[inn]
    g = lam * qt.potential_grad(q)
    if pen:
        g -= 4 * pen * (1.0 - np.sum(q * q, axis=-1))[:, None] * q
    if anchor is not None:
        g += q - anchor[inn]
    out = np.zeros_like(values)
    out[inn] = w[inn][:, None] * g
    return out


def objective(values, grid, lam, pen=0.0, anchor=None) -> EnergyBreakdown:
    """Discrete (1/2)|grad Q|^2 + lam W + pen (1-|Q|^2)^2 + (1/2)|Q - anchor|^2."""
    parts = _bulk(values, grid, lam, pen, anchor)
    return EnergyBreakdown(dirichlet=dirichlet_energy(values, grid), **parts)


def objective_gradient(values, grid, lam, pen=0.0, anchor=None) -> np.ndarray:
    """Exact gradient of :func:`objective` with respect to interior node values."""
    return dirichlet_gradient(values, grid) + _bulk_gradient(values, grid, lam, pen, anchor)


class Assembled:
    """Interior-only form of the discrete objective for repeated evaluation.

    Holds the weighted graph Laplacian restricted to interior nodes and the
    constant coupling to the frozen boundary band, so one gradient costs a
    single sparse product.
    """

    def __init__(self, grid: Grid, values: np.ndarray, lam: float, pen: float = 0.0,
                 anchor: Optional[np.ndarray] = None):
        from scipy.sparse import coo_matrix

        self.grid, self.lam, self.pen = grid, lam, pen
        n = grid.n
        flat_kind = grid.kind.ravel()
        inn = flat_kind == INTERIOR_KIND
        self.mask = grid.interior
        idx = -np.ones(n ** 3, dtype=np.int64)
        m = int(inn.sum())
        idx[inn] = np.arange(m)
        strides = (n * n, n, 1)
        rows, cols, vals = [], [], []
        coup = np.zeros((m, 5))
        flat_vals = values.reshape(-1, 5)
        for ax, wgt in enumerate(grid.edge_weights):
            lo = [slice(None)] * 3
            lo[ax] = slice(None, -1)
            base = np.arange(n ** 3).reshape(grid.shape)[tuple(lo)].ravel()
            th = wgt.ravel()
            keep = th > 0
            a, th = base[keep], th[keep]
            b = a + strides[ax]
            ia, ib = idx[a], idx[b]
            for p, q, ip, iq in ((a, b, ia, ib), (b, a, ib, ia)):
                ok = ip >= 0
                rows.append(ip[ok])
                cols.append(ip[ok])
                vals.append(th[ok])
                both = ok & (iq >= 0)
                rows.append(ip[both])
                cols.append(iq[both])
                vals.append(-th[both])
                fr = ok & (iq < 0)
                np.add.at(coup, ip[fr], -th[fr, None] * flat_vals[q[fr]])
        h = grid.h
        self.L = coo_matrix((h * np.concatenate(vals),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=(m, m)).tocsr()
        self.c = h * coup
        self.w = grid.weights.ravel()[inn]
        self.anchor = None if anchor is None else anchor.reshape(-1, 5)[inn]
        self.flat_index = np.nonzero(inn)[0]

    def gather(self, values: np.ndarray) -> np.ndarray:
        return values.reshape(-1, 5)[self.flat_index]

    def scatter(self, values: np.ndarray, q: np.ndarray) -> np.ndarray:
        out = values.copy()
        out.reshape(-1, 5)[self.flat_index] = q
        return out

    def gradient(self, q: np.ndarray) -> np.ndarray:
        g = self.L @ q + self.c
        bulk = self.lam * qt.potential_grad(q) if self.lam else np.zeros_like(q)
        if self.pen:
            bulk -= 4 * self.pen * (1.0 - np.sum(q * q, axis=-1))[:, None] * q
        if self.anchor is not None:
            bulk += q - self.anchor
        g += self.w[:, None] * bulk
        return g

    def change(self, new: np.ndarray, old: np.ndarray) -> float:
        """objective(new) - objective(old) without forming either total."""
        d = new - old
        de = 0.5 * float(np.vdot(d, self.L @ (new + old) + 2 * self.c))
        w = self.w
        t2n, t2o = np.einsum("ij,ij->i", new, new), np.einsum("ij,ij->i", old, old)
        if self.lam:
            dw = ((t2n - t2o) * (t2n + t2o) / (4 * qt.SQRT6)
                  - (qt.trace_cube(new) - qt.trace_cube(old)) / 3)
            de += self.lam * float(np.dot(w, dw))
        if self.pen:
            de += self.pen * float(np.dot(w, (t2o - t2n) * (2.0 - t2n - t2o)))
        if self.anchor is not None:
            dn, do = new - self.anchor, old - self.anchor
            de += 0.5 * float(np.dot(w, np.sum((dn - do) * (dn + do), -1)))
        return de


def check_unit(field: TensorField, tol: float = UNIT_TOL):
    dev = np.abs(field.norms()[field.grid.active] - 1.0)
    if dev.size and dev.max() > tol:
        raise NotOnSphere(f"field deviates from unit norm by {dev.max():.3g}")


def energy_constrained(field: TensorField, lam: float) -> EnergyBreakdown:
    check_unit(field)
    return objective(field.values, field.grid, lam)


def energy_unconstrained(field: TensorField, lam: float, mu: float) -> EnergyBreakdown:
    return objective(field.values, field.grid, lam, pen=mu / 4.0)


def energy_gl(field: TensorField, anchor: TensorField, lam: float, eps: float) -> EnergyBreakdown:
    if not field.grid.same_as(anchor.grid):
        raise GridMismatch("field and anchor live on different grids")
    return objective(field.values, field.grid, lam, pen=1.0 / (4 * eps * eps),
                     anchor=anchor.values)


@dataclass
class Residual:
    values: np.ndarray  # per node, zero on frozen nodes
    l2: float           # (sum_w |R|^2)^(1/2)
    rms: float          # l2 / sqrt(|Omega|)


def _residual(grid, r):
    w = grid.weights[grid.interior]
    l2 = math.sqrt(float(np.dot(w, np.sum(r[grid.interior] ** 2, axis=-1))))
    vol = float(grid.weights.sum())
    return Residual(r, l2, l2 / math.sqrt(vol))


def tangent_part(values, vectors):
    """Project node vectors onto the tangent spaces of the unit sphere at values."""
    return vectors - np.sum(values * vectors, axis=-1, keepdims=True) * values


def residual_unconstrained(field: TensorField, lam: float, mu: float) -> Residual:
    """Delta Q + lam (Q^2 - |Q|^2 I/3 - |Q|^2 Q/sqrt6) + mu (1 - |Q|^2) Q per cell.

    Equal to minus the exact gradient of the discrete energy divided by h^3.
    """
    g = objective_gradient(field.values, field.grid, lam, pen=mu / 4.0)
    return _residual(field.grid, -g / field.grid.h ** 3)


def residual_constrained(field: TensorField, lam: float) -> Residual:
    """Tension-field residual Delta Q + |grad Q|^2 Q - lam grad_tan W(Q).

    Discretely this is minus the sphere-projected gradient of the discrete
    energy divided by h^3; it is tangent to the sphere at every node.
    """
    check_unit(field)
    g = objective_gradient(field.values, field.grid, lam)
    return _residual(field.grid, -tangent_part(field.values, g) / field.grid.h ** 3)


def residual_gl(field: TensorField, anchor: TensorField, lam: float, eps: float) -> Residual:
    g = objective_gradient(field.values, field.grid, lam, pen=1.0 / (4 * eps * eps),
                           anchor=anchor.values)
    return _residual(field.grid, -g / field.grid.h ** 3)


# -- monotonicity -------------------------------------------------------------

@dataclass
class MonotonicityScan:
    center: np.ndarray
    radii: np.ndarray
    ball_energy: np.ndarray
    scaled_energy: np.ndarray
    annulus_radial_term: np.ndarray   # between radii[i-1] and radii[i]; 0 for i=0
    potential_term: np.ndarray        # 2 lam int t^-2 int_{B_t} W, same convention
    meta: dict = field(default_factory=dict)

    def increments(self) -> np.ndarray:
        return np.diff(self.scaled_energy)

    def max_relative_drop(self) -> float:
        """Largest decrease of the scaled energy relative to its local value."""
        inc = self.increments()
        if not inc.size:
            return 0.0
        return float(max(0.0, np.max(-inc / np.abs(self.scaled_energy[1:]))))

    def identity_defect(self) -> np.ndarray:
        """(difference of scaled energies) - (radial term + potential term)."""
        return self.increments() - self.annulus_radial_term[1:] - self.potential_term[1:]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "scaled_energy", "annulus_radial_term"])
            for r, s, a in zip(self.radii, self.scaled_energy, self.annulus_radial_term):
                w.writerow([f"{r:.17g}", f"{s:.17g}", f"{a:.17g}"])


def _central_gradient(values, h):
    """Central differences along each axis, shape (3, n, n, n, 5); one-sided at edges."""
    return np.stack(np.gradient(values, h, axis=(0, 1, 2)))


def _ball_fractions(grid: Grid, x0, r, k=6):
    d = np.linalg.norm(grid.coords - x0, axis=-1)
    frac = (d < r).astype(float)
    cut = np.abs(d - r) < 0.5 * math.sqrt(3) * grid.h * 1.01
    if cut.any():
        frac[cut] = voxel_fraction(
            grid.coords[cut], grid.h,
            lambda p: np.linalg.norm(p - x0, axis=-1) < r, k)
    return frac


def ball_energy(field: TensorField, lam: float, x0, r: float, k: int = 6) -> float:
    """E_lam on B_r(x0) with voxel-fraction quadrature."""
    grid = field.grid
    dens = 0.5 * gradient_density(field.values, grid) + lam * qt.potential_w(field.values)
    frac = _ball_fractions(grid, np.asarray(x0, float), r, k) * grid.active
    return float(np.sum(frac * dens)) * grid.h ** 3


def monotonicity_scan(field: TensorField, lam: float, x0, radii: Sequence[float],
                      t_samples: int = 8, k: int = 6) -> MonotonicityScan:
    """Scaled ball energies E(B_r(x0))/r with the terms of the monotonicity identity."""
    grid = field.grid
    x0 = np.asarray(x0, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and increasing")
    room = -float(grid.spec.signed_distance(x0[None])[0])
    if radii[-1] > room + 1e-12:
        raise BallEscapesDomain(f"ball of radius {radii[-1]} leaves the domain (room {room:.4g})")
    vals = field.values
    dens = 0.5 * gradient_density(vals, grid) + lam * qt.potential_w(vals)
    wpot = qt.potential_w(vals)
    act = grid.active
    y = grid.coords - x0
    dist = np.linalg.norm(y, axis=-1)
    unit = y / np.where(dist > 0, dist, 1.0)[..., None]
    grad = _central_gradient(vals, grid.h)
    dq_dr = np.einsum("a...,a...c->...c", np.moveaxis(unit, -1, 0), grad)
    radial = np.sum(dq_dr ** 2, axis=-1) / np.where(dist > 0, dist, np.inf)

    def frac(r):
        return _ball_fractions(grid, x0, r, k) * act

    h3 = grid.h ** 3
    fr = [frac(r) for r in radii]
    energy = np.array([np.sum(f * dens) * h3 for f in fr])
    rad_ball = np.array([np.sum(f * radial) * h3 for f in fr])
    annulus = np.concatenate([[0.0], np.diff(rad_ball)])
    pot = [0.0]
    for a, b in zip(radii[:-1], radii[1:]):
        ts = np.linspace(a, b, t_samples + 1)
        vals_t = np.array([np.sum(frac(t) * wpot) * h3 / t ** 2 for t in ts])
        pot.append(2 * lam * float(np.trapezoid(vals_t, ts)))
    return MonotonicityScan(center=x0, radii=radii, ball_energy=energy,
                            scaled_energy=energy / radii, annulus_radial_term=annulus,
                            potential_term=np.array(pot), meta={"lam": lam})


def dyadic_radii(r_max: float, count: int) -> list:
    return [r_max / 2 ** (count - 1 - i) for i in range(count)]
