"""Pointwise algebra of traceless symmetric 3x3 tensors.

A Q-tensor is stored as its five coefficients in the orthonormal basis

    e0 = sqrt(3/2) (k k - I/3)      e1 = (i k + k i) / sqrt(2)
    e2 = (j k + k j) / sqrt(2)      e3 = (i i - j j) / sqrt(2)
    e4 = (i j + j i) / sqrt(2)

so that the Frobenius product of two tensors is the dot product of their
coefficient vectors. Every function here accepts arrays of shape (..., 5)
and broadcasts over the leading axes; 3x3 matrices only appear transiently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (BadParams, IsotropicPoint, NotInS0, NotOnSphere,
                     NotTangent, NotUnit)

SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)
ISO_TOL = 1e-7
SPHERE_TOL = 1e-9

BASIS = np.zeros((5, 3, 3))
BASIS[0] = np.diag([-1.0, -1.0, 2.0]) / SQRT6
BASIS[1][0, 2] = BASIS[1][2, 0] = 1 / SQRT2
BASIS[2][1, 2] = BASIS[2][2, 1] = 1 / SQRT2
BASIS[3] = np.diag([1.0, -1.0, 0.0]) / SQRT2
BASIS[4][0, 1] = BASIS[4][1, 0] = 1 / SQRT2

E0, E1, E2, E3, E4 = (BASIS[i].copy() for i in range(5))


def basis_vector(i: int) -> np.ndarray:
    q = np.zeros(5)
    q[i] = 1.0
    return q


# -- conversions ------------------------------------------------------------

def _sym_entries(q):
    """Unique entries (xx, yy, zz, xy, xz, yz) of the matrix of q."""
    q = np.asarray(q, dtype=float)
    c0, c1, c2, c3, c4 = (q[..., i] for i in range(5))
    a = c0 / SQRT6
    b = c3 / SQRT2
    return (-a + b, -a - b, 2 * a, c4 / SQRT2, c1 / SQRT2, c2 / SQRT2)


def _from_sym(xx, yy, zz, xy, xz, yz):
    """Project a symmetric matrix given by its entries onto the basis."""
    return np.stack([(2 * zz - xx - yy) / SQRT6, SQRT2 * xz, SQRT2 * yz,
                     (xx - yy) / SQRT2, SQRT2 * xy], axis=-1)


def _square(q):
    xx, yy, zz, xy, xz, yz = _sym_entries(q)
    return (xx * xx + xy * xy + xz * xz,
            xy * xy + yy * yy + yz * yz,
            xz * xz + yz * yz + zz * zz,
            xx * xy + xy * yy + xz * yz,
            xx * xz + xy * yz + xz * zz,
            xy * xz + yy * yz + yz * zz)


def to_matrix(q) -> np.ndarray:
    return np.einsum("...i,ijk->...jk", np.asarray(q, dtype=float), BASIS)


def from_matrix(m, tol: float = 1e-10) -> np.ndarray:
    """Coefficients of a symmetric traceless matrix.

    Raises NotInS0 when the asymmetry or the trace exceeds ``tol``.
    """
    m = np.asarray(m, dtype=float)
    asym = np.linalg.norm(m - np.swapaxes(m, -1, -2), axis=(-2, -1))
    tr = np.trace(m, axis1=-2, axis2=-1)
    if np.any(asym > tol) or np.any(np.abs(tr) > tol):
        raise NotInS0(f"matrix not symmetric traceless (asym={np.max(asym):.3g}, "
                      f"trace={np.max(np.abs(tr)):.3g})")
    return np.einsum("...jk,ijk->...i", m, BASIS)


def uniaxial(n, s: float = math.sqrt(1.5), tol: float = 1e-12) -> np.ndarray:
    """s (n n - I/3) for unit director(s) n of shape (..., 3)."""
    n = np.asarray(n, dtype=float)
    if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > tol):
        raise NotUnit("director is not a unit vector")
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    third = 1.0 / 3.0
    q = _from_sym(x * x - third, y * y - third, z * z - third, x * y, x * z, y * z)
    return np.asarray(s)[..., None] * q if np.ndim(s) else s * q


# -- invariants ---------------------------------------------------------------

def norm(q):
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


def inner(p, q):
    return np.sum(np.asarray(p, dtype=float) * np.asarray(q, dtype=float), axis=-1)


def trace_cube(q):
    """tr(Q^3) = 3 det(Q) for traceless Q."""
    xx, yy, zz, xy, xz, yz = _sym_entries(q)
    det = (xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz)
           + xz * (xy * yz - yy * xz))
    return 3.0 * det


def traces(q):
    """Return (tr Q^2, tr Q^3)."""
    q = np.asarray(q, dtype=float)
    return np.sum(q * q, axis=-1), trace_cube(q)


def tr_q_psi2(q, psi):
    """tr(Q Psi^2), equal to tr(Psi Q Psi)."""
    s = _square(psi)
    xx, yy, zz, xy, xz, yz = _sym_entries(q)
    return (xx * s[0] + yy * s[1] + zz * s[2]
            + 2 * (xy * s[3] + xz * s[4] + yz * s[5]))


def biaxiality_unchecked(q, iso_tol: float = ISO_TOL):
    """Signed biaxiality with NaN at isotropic points; returns (beta, iso_mask)."""
    q = np.asarray(q, dtype=float)
    r = norm(q)
    iso = r < iso_tol
    safe = np.where(iso, 1.0, r)
    beta = SQRT6 * trace_cube(q) / safe ** 3
    beta = np.clip(beta, -1.0, 1.0)
    return np.where(iso, np.nan, beta), iso


def biaxiality(q, iso_tol: float = ISO_TOL):
    """sqrt(6) tr(Q^3) / |Q|^3, in [-1, 1].

    +1 when the smallest eigenvalue is double, -1 when the largest is, 0 when
    the middle eigenvalue vanishes.
    """
    beta, iso = biaxiality_unchecked(q, iso_tol)
    if np.any(iso):
        raise IsotropicPoint(f"|Q| below iso_tol={iso_tol}")
    return beta if np.ndim(beta) else float(beta)


# -- parameter reduction --------------------------------------------------------

def s_plus(a2: float, b2: float, c2: float) -> float:
    """Positive root of 2 c2 t^2 - b2 t - 3 a2 = 0."""
    if not (a2 > 0 and b2 > 0 and c2 > 0):
        raise BadParams("a2, b2, c2 must be positive")
    return (b2 + math.sqrt(b2 * b2 + 24.0 * a2 * c2)) / (4.0 * c2)


@dataclass(frozen=True)
class PhysicalParams:
    a2: float
    b2: float
    c2: float
    L: float


@dataclass(frozen=True)
class EnergyParams:
    lam: float
    mu: float = 0.0
    epsilon: Optional[float] = None
    physical: Optional[PhysicalParams] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise BadParams("lambda must be positive")
        if not self.mu >= 0:
            raise BadParams("mu must be nonnegative")
        if self.epsilon is not None and not self.epsilon > 0:
            raise BadParams("epsilon must be positive")


def params_from_physical(a2: float, b2: float, c2: float, L: float,
                         epsilon: Optional[float] = None) -> EnergyParams:
    if not L > 0:
        raise BadParams("L must be positive")
    sp = s_plus(a2, b2, c2)
    return EnergyParams(lam=math.sqrt(2.0 / 3.0) * b2 * sp / L, mu=a2 / L,
                        epsilon=epsilon, physical=PhysicalParams(a2, b2, c2, L))


# -- potential --------------------------------------------------------------

def potential_w(q):
    """|Q|^4/(4 sqrt6) - tr(Q^3)/3 + 1/(12 sqrt6); zero exactly on RP^2."""
    t2, t3 = traces(q)
    return t2 * t2 / (4 * SQRT6) - t3 / 3.0 + 1.0 / (12 * SQRT6)


def potential_grad(q):
    """Gradient of W in S0: |Q|^2 Q / sqrt6 - (Q^2 - |Q|^2 I / 3)."""
    q = np.asarray(q, dtype=float)
    t2 = np.sum(q * q, axis=-1)
    return t2[..., None] * q / SQRT6 - _from_sym(*_square(q))


def _check_sphere(q, tol=SPHERE_TOL):
    if np.any(np.abs(norm(q) - 1.0) > tol):
        raise NotOnSphere("tensor is not unit norm")


def tangential_grad_w(q):
    """-(Q^2 - I/3 - tr(Q^3) Q) for unit Q."""
    q = np.asarray(q, dtype=float)
    _check_sphere(q)
    return trace_cube(q)[..., None] * q - _from_sym(*_square(q))


def tangent_project(q, phi):
    """Phi - Q (Q:Phi) for unit Q."""
    q = np.asarray(q, dtype=float)
    _check_sphere(q)
    phi = np.asarray(phi, dtype=float)
    return phi - inner(q, phi)[..., None] * q


def hessian_w_raw(q, psi):
    """D^2 W(Q) Psi:Psi = (2 (Q:Psi)^2 + |Q|^2 |Psi|^2)/sqrt6 - 2 tr(Q Psi^2)."""
    q = np.asarray(q, dtype=float)
    psi = np.asarray(psi, dtype=float)
    qp = inner(q, psi)
    return (2 * qp * qp + inner(q, q) * inner(psi, psi)) / SQRT6 - 2 * tr_q_psi2(q, psi)


def hessian_w_tangential(q, phi):
    """D^2 W(Q) restricted to the tangent part of Phi at a unit Q.

    Equals |Phi_T|^2/sqrt6 - 2 tr(Q Phi_T^2); on RP^2 (where grad W = 0) this is
    the second derivative of W along the normalized curve (Q + t Phi)/|Q + t Phi|.
    """
    pt = tangent_project(q, phi)
    return inner(pt, pt) / SQRT6 - 2 * tr_q_psi2(q, pt)


def spectral_bound_gap(q, t, c_emp: float = 2.0, tol: float = SPHERE_TOL):
    """2 tr(T Q T) - 1/sqrt6 - c_emp sqrt(W(Q)) for unit Q and unit tangent T."""
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_sphere(q, tol)
    if np.any(np.abs(norm(t) - 1.0) > tol) or np.any(np.abs(inner(q, t)) > tol):
        raise NotTangent("T must be a unit tangent vector at Q")
    w = np.maximum(potential_w(q), 0.0)
    return 2 * tr_q_psi2(q, t) - 1 / SQRT6 - c_emp * np.sqrt(w)


# -- spectrum -------------------------------------------------------------------

def eigenvalues(q):
    """Ascending eigenvalues from the trigonometric formula.

    For traceless Q the eigenvalues are sqrt(2/3)|Q| cos((acos(beta) + 2 pi k)/3).
    """
    q = np.asarray(q, dtype=float)
    r = norm(q)
    safe = np.where(r > 0, r, 1.0)
    beta = np.clip(SQRT6 * trace_cube(q / safe[..., None]), -1.0, 1.0)
    theta = np.arccos(beta) / 3.0
    amp = math.sqrt(2.0 / 3.0) * r
    lmax = amp * np.cos(theta)
    lmin = amp * np.cos(theta + 2 * math.pi / 3)
    lmid = -lmax - lmin
    return np.stack([lmin, lmid, lmax], axis=-1)


def _sign_fix(v, tol=1e-12):
    """Flip vectors so their first non-negligible component is positive."""
    a = np.abs(v)
    first = np.argmax(a > tol * np.max(a, axis=-1, keepdims=True), axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)
    return np.where(lead < 0, -v, v)


def _null_vector(a):
    """Unit vector spanning the kernel of a rank-2 symmetric 3x3 matrix."""
    r0, r1, r2 = a[..., 0, :], a[..., 1, :], a[..., 2, :]
    c = np.stack([np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=-2)
    nrm = np.linalg.norm(c, axis=-1)
    best = np.argmax(nrm, axis=-1)
    v = np.take_along_axis(c, best[..., None, None], axis=-2)[..., 0, :]
    vn = np.take_along_axis(nrm, best[..., None], axis=-1)
    degenerate = vn[..., 0] == 0
    v = np.where(degenerate[..., None], np.array([0.0, 0.0, 1.0]), v)
    vn = np.where(vn == 0, 1.0, vn)
    return v / vn


def _complement(u):
    """Two unit vectors completing u to an orthonormal frame."""
    pick = np.where((np.abs(u[..., 0]) > np.abs(u[..., 1]))[..., None],
                    np.stack([-u[..., 2], np.zeros_like(u[..., 0]), u[..., 0]], -1),
                    np.stack([np.zeros_like(u[..., 0]), u[..., 2], -u[..., 1]], -1))
    pick = pick / np.linalg.norm(pick, axis=-1, keepdims=True)
    return pick, np.cross(u, pick)


def eigen(q):
    """Closed-form eigen-decomposition.

    Returns (values, vectors) with values ascending and vectors[..., :, k] the
    unit eigenvector for values[..., k]. Each vector's first significant
    component is positive. The most isolated eigenvalue's vector comes from
    cross products; the remaining pair is resolved by an exact 2x2 rotation in
    the orthogonal complement, which keeps residuals small near degeneracy.
    """
    q = np.asarray(q, dtype=float)
    scalar = q.ndim == 1
    q = np.atleast_2d(q)
    # work at unit scale so tiny or huge tensors neither underflow nor overflow
    scale = norm(q)
    scale = np.where(scale > 0, scale, 1.0)
    q = q / scale[..., None]
    lam = eigenvalues(q)
    m = to_matrix(q)
    iso_top = (lam[..., 2] - lam[..., 1]) >= (lam[..., 1] - lam[..., 0])
    lone = np.where(iso_top, lam[..., 2], lam[..., 0])
    u = _null_vector(m - lone[..., None, None] * np.eye(3))
    a, b = _complement(u)
    ma, mb = np.einsum("...ij,...j->...i", m, a), np.einsum("...ij,...j->...i", m, b)
    p = np.sum(a * ma, -1)
    r = np.sum(b * mb, -1)
    s = np.sum(a * mb, -1)
    ang = 0.5 * np.arctan2(2 * s, p - r)
    c, sn = np.cos(ang), np.sin(ang)
    w1 = c[..., None] * a + sn[..., None] * b
    w2 = -sn[..., None] * a + c[..., None] * b
    l1 = np.sum(w1 * np.einsum("...ij,...j->...i", m, w1), -1)
    l2 = np.sum(w2 * np.einsum("...ij,...j->...i", m, w2), -1)
    lu = np.sum(u * np.einsum("...ij,...j->...i", m, u), -1)
    vals = np.stack([lu, l1, l2], -1)
    vecs = np.stack([u, w1, w2], -1)
    order = np.argsort(vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, -1) * scale[..., None]
    vecs = np.take_along_axis(vecs, order[..., None, :], -1)
    vecs = _sign_fix(np.swapaxes(vecs, -1, -2))
    vecs = np.swapaxes(vecs, -1, -2)
    if scalar:
        return vals[0], vecs[0]
    return vals, vecs


def director_max(q):
    """Unit eigenvector(s) of the largest eigenvalue, and the gap to the middle one."""
    vals, vecs = eigen(q)
    return vecs[..., :, 2], vals[..., 2] - vals[..., 1]
