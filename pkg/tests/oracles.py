"""Independent reference computations used to freeze derived test values.

Nothing here imports the closed forms under test: matrices are built by
hand, derivatives come from finite differences, spectra from a cyclic
Jacobi iteration and the hedgehog profile from scipy's collocation solver.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_bvp

R6 = math.sqrt(6.0)
I3 = np.eye(3)
_i, _j, _k = I3


def basis_matrices():
    return np.array([
        math.sqrt(1.5) * (np.outer(_k, _k) - I3 / 3),
        (np.outer(_i, _k) + np.outer(_k, _i)) / math.sqrt(2),
        (np.outer(_j, _k) + np.outer(_k, _j)) / math.sqrt(2),
        (np.outer(_i, _i) - np.outer(_j, _j)) / math.sqrt(2),
        (np.outer(_i, _j) + np.outer(_j, _i)) / math.sqrt(2),
    ])


E = basis_matrices()


def mat(c):
    return np.tensordot(np.asarray(c, float), E, axes=1)


def w_matrix(m):
    t2 = np.trace(m @ m)
    t3 = np.trace(m @ m @ m)
    return t2 * t2 / (4 * R6) - t3 / 3 + 1 / (12 * R6)


def w_coeff(c):
    return w_matrix(mat(c))


def fd_grad(f, x, h=1e-6):
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for a in range(x.size):
        d = np.zeros_like(x)
        d[a] = h
        g[a] = (f(x + d) - f(x - d)) / (2 * h)
    return g


def fd_second(f, x, d, h=1e-2):
    """Second central difference with one Richardson step (exact for quartics)."""
    def dd(s):
        return (f(x + s * d) - 2 * f(x) + f(x - s * d)) / (s * s)
    return (4 * dd(h / 2) - dd(h)) / 3


def jacobi_eigh(m, sweeps=50):
    """Cyclic Jacobi rotations for a symmetric 3x3 matrix."""
    a = np.array(m, float)
    v = np.eye(3)
    for _ in range(sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(3) for q in range(3) if p != q))
        if off < 1e-15 * max(1.0, np.abs(a).max()):
            break
        for p in range(2):
            for q in range(p + 1, 3):
                if a[p, q] == 0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                r = np.eye(3)
                r[p, p] = r[q, q] = c
                r[p, q] = s
                r[q, p] = -s
                a = r.T @ a @ r
                v = v @ r
    order = np.argsort(np.diag(a))
    return np.diag(a)[order], v[:, order]


def hedgehog_bvp(lam, mu, r0=1e-4, tol=1e-8):
    """Radial profile from scipy's collocation BVP solver.

    Near the origin s ~ c r^2, so the inner condition is s'(r0) = 2 s(r0)/r0.
    """
    def bulk(s):
        return -lam * (s * s / 3 - 2 * s ** 3 / (3 * R6)) - mu * (1 - 2 * s * s / 3) * s

    def rhs(r, y):
        s, p = y
        return np.vstack([p, -2 * p / r + 6 * s / r ** 2 + bulk(s)])

    def bc(ya, yb):
        return np.array([ya[1] - 2 * ya[0] / r0, yb[0] - math.sqrt(1.5)])

    r = np.linspace(r0, 1, 4001)
    guess = np.vstack([math.sqrt(1.5) * np.tanh(r * math.sqrt(mu)),
                       math.sqrt(1.5 * mu) / np.cosh(r * math.sqrt(mu)) ** 2])
    sol = solve_bvp(rhs, bc, r, guess, tol=tol, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol


def random_unit_uniaxial(rng, size):
    n = rng.normal(size=(size, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    m = math.sqrt(1.5) * (n[:, :, None] * n[:, None, :] - I3 / 3)
    return np.einsum("nij,aij->na", m, E), n
