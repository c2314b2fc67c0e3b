"""Structured grids over a ball with spherical holes, Dirichlet data and quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import qtensor as qt
from .errors import DomainInvalid, GridMismatch, NotUnit, ResolutionTooCoarse

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2
PADDING = 1.0625
_NEIGHBOURS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


@dataclass(frozen=True)
class Hole:
    center: tuple
    radius: float


@dataclass(frozen=True)
class DomainSpec:
    """Outer ball (or cube, for quadrature checks) centred at the origin minus holes."""

    outer_radius: float = 1.0
    holes: tuple = ()
    shape: str = "ball"

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(
            h if isinstance(h, Hole) else Hole(tuple(map(float, h[0])), float(h[1]))
            for h in self.holes))
        if self.shape not in ("ball", "cube"):
            raise DomainInvalid(f"unknown shape {self.shape!r}")
        if self.outer_radius <= 0:
            raise DomainInvalid("outer radius must be positive")

    @property
    def n_boundary_components(self) -> int:
        return 1 + len(self.holes)

    @property
    def hp3_hint(self) -> bool:
        """Radial anchoring has odd total degree iff the component count is odd."""
        return self.n_boundary_components % 2 == 1

    def volume(self) -> float:
        outer = (4 / 3 * math.pi * self.outer_radius ** 3 if self.shape == "ball"
                 else (2 * self.outer_radius) ** 3)
        return outer - sum(4 / 3 * math.pi * h.radius ** 3 for h in self.holes)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        """Negative inside the domain. Exact for the ball, a valid bound otherwise."""
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            phi = np.linalg.norm(x, axis=-1) - self.outer_radius
        else:
            phi = np.max(np.abs(x), axis=-1) - self.outer_radius
        for h in self.holes:
            phi = np.maximum(phi, h.radius - np.linalg.norm(x - np.asarray(h.center), axis=-1))
        return phi

    def inside(self, x) -> np.ndarray:
        return self.signed_distance(x) < 0

    def nearest_boundary(self, x: np.ndarray):
        """Nearest boundary point, outward radial director there, and component id.

        The director is radial from the centre of the sphere the point lies on
        (for the cube, radial from the origin), which is the line field of the
        radial anchoring on every component.
        """
        x = np.asarray(x, dtype=float)
        if self.shape == "ball":
            r = np.linalg.norm(x, axis=-1)
            dist = np.abs(r - self.outer_radius)
            safe = np.where(r > 0, r, 1.0)[..., None]
            d = np.where(r[..., None] > 0, x / safe, np.array([0.0, 0.0, 1.0]))
            point = self.outer_radius * d
        else:
            a = np.abs(x)
            dist = np.abs(np.max(a, axis=-1) - self.outer_radius)
            point = np.clip(x, -self.outer_radius, self.outer_radius)
            ax = np.argmax(a, axis=-1)
            sgn = np.sign(np.take_along_axis(x, ax[..., None], -1))
            sgn = np.where(sgn == 0, 1.0, sgn)
            np.put_along_axis(point, ax[..., None], sgn * self.outer_radius, -1)
            pn = np.linalg.norm(point, axis=-1, keepdims=True)
            d = point / pn
        comp = np.zeros(x.shape[:-1], dtype=int)
        for k, h in enumerate(self.holes, start=1):
            y = x - np.asarray(h.center)
            rk = np.linalg.norm(y, axis=-1)
            dk = np.abs(rk - h.radius)
            closer = dk < dist
            safe = np.where(rk > 0, rk, 1.0)[..., None]
            dirk = np.where(rk[..., None] > 0, y / safe, np.array([0.0, 0.0, 1.0]))
            point = np.where(closer[..., None], np.asarray(h.center) + h.radius * dirk, point)
            d = np.where(closer[..., None], dirk, d)
            dist = np.where(closer, dk, dist)
            comp = np.where(closer, k, comp)
        return point, d, comp


@dataclass(eq=False)
class Grid:
    spec: DomainSpec
    n: int
    h: float
    origin: np.ndarray
    kind: np.ndarray  # EXTERIOR / BOUNDARY / INTERIOR per node

    @property
    def shape(self):
        return (self.n,) * 3

    @cached_property
    def coords(self) -> np.ndarray:
        ax = self.origin[0] + self.h * np.arange(self.n)
        return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)

    @property
    def axis(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.n)

    @property
    def interior(self) -> np.ndarray:
        return self.kind == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.kind == BOUNDARY

    @property
    def active(self) -> np.ndarray:
        return self.kind != EXTERIOR

    @property
    def n_boundary_components(self) -> int:
        return self.spec.n_boundary_components

    @cached_property
    def weights(self) -> np.ndarray:
        return cell_volume_weights(self)

    @cached_property
    def edge_weights(self) -> list:
        """Per axis, the fraction of each grid edge lying inside the domain.

        1 between interior nodes, the linearly interpolated crossing fraction
        between an interior and a boundary node, 0 otherwise.
        """
        phi = self.spec.signed_distance(self.coords)
        inn = self.interior
        out = []
        for ax in range(3):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ax] = slice(None, -1)
            hi[ax] = slice(1, None)
            p0, p1 = phi[tuple(lo)], phi[tuple(hi)]
            i0, i1 = inn[tuple(lo)], inn[tuple(hi)]
            cross = i0 ^ i1
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(i0, p0 / (p0 - p1), p1 / (p1 - p0))
            out.append(np.where(i0 & i1, 1.0, np.where(cross, np.clip(theta, 0.0, 1.0), 0.0)))
        return out

    def same_as(self, other: "Grid") -> bool:
        return (self is other or (self.n == other.n and self.h == other.h
                                  and np.array_equal(self.kind, other.kind)))

    def index_of(self, x) -> tuple:
        """Index of the node nearest to point x."""
        i = np.rint((np.asarray(x, dtype=float) - self.origin) / self.h).astype(int)
        return tuple(np.clip(i, 0, self.n - 1))


def build_grid(spec: DomainSpec, n: int) -> Grid:
    """Cubic grid with 3% padding around the outer boundary and node classification.

    Interior nodes lie strictly inside; the boundary band consists of outside
    nodes with an interior 6-neighbour, so every interior stencil is closed.
    """
    if n < 16:
        raise ResolutionTooCoarse("need at least 16 nodes per axis")
    R = spec.outer_radius
    h = 2 * R * PADDING / (n - 1)
    for i, a in enumerate(spec.holes):
        c = np.asarray(a.center)
        if 2 * a.radius < 4 * h:
            raise ResolutionTooCoarse(f"hole {i} spans fewer than 4 cells")
        if _clearance_outer(spec, a) < 2 * h:
            raise DomainInvalid(f"hole {i} is not inside the outer boundary with 2-cell clearance")
        for j, b in enumerate(spec.holes[:i]):
            if np.linalg.norm(c - np.asarray(b.center)) - a.radius - b.radius < 2 * h:
                raise DomainInvalid(f"holes {j} and {i} overlap or are too close")
    origin = np.full(3, -R * PADDING)
    grid = Grid(spec=spec, n=n, h=h, origin=origin, kind=np.zeros((n,) * 3, dtype=np.int8))
    inside = spec.signed_distance(grid.coords) < 0
    near = np.zeros_like(inside)
    for d in _NEIGHBOURS:
        near |= _shift(inside, d)
    kind = np.full(inside.shape, EXTERIOR, dtype=np.int8)
    kind[near & ~inside] = BOUNDARY
    kind[inside] = INTERIOR
    if inside[0].any() or inside[-1].any() or inside[:, 0].any() or inside[:, -1].any() \
            or inside[:, :, 0].any() or inside[:, :, -1].any():
        raise DomainInvalid("domain touches the array edge")
    grid.kind = kind
    return grid


def _clearance_outer(spec: DomainSpec, hole: Hole) -> float:
    c = np.asarray(hole.center)
    if spec.shape == "ball":
        return spec.outer_radius - np.linalg.norm(c) - hole.radius
    return spec.outer_radius - np.max(np.abs(c)) - hole.radius


def _shift(a: np.ndarray, d) -> np.ndarray:
    """out[x] = a[x + d], False outside the array."""
    out = np.zeros_like(a)
    src = tuple(slice(max(k, 0), a.shape[i] + min(k, 0)) for i, k in enumerate(d))
    dst = tuple(slice(max(-k, 0), a.shape[i] + min(-k, 0)) for i, k in enumerate(d))
    out[dst] = a[src]
    return out


@dataclass(eq=False)
class TensorField:
    """Per-node Q-tensor coefficients, shape (n, n, n, 5).

    Boundary nodes carry Dirichlet data; exterior nodes carry the extension of
    that data by nearest-point projection and never enter an energy.
    """

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def copy(self) -> "TensorField":
        return TensorField(self.grid, self.values.copy(), dict(self.meta))

    @property
    def frozen(self) -> np.ndarray:
        return ~self.grid.interior

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def with_values(self, values) -> "TensorField":
        if values.shape != self.values.shape:
            raise GridMismatch("value array does not match grid")
        return TensorField(self.grid, values, dict(self.meta))


def boundary_uniaxial(grid: Grid, director) -> np.ndarray:
    """Positive uniaxial data sqrt(3/2)(v v - I/3) on all non-interior nodes.

    ``director`` is either an array of unit vectors of shape grid.shape + (3,)
    or a callable mapping boundary points (m, 3) to unit vectors (m, 3); the
    callable is evaluated at each node's nearest boundary point.
    """
    out = np.zeros(grid.shape + (5,))
    sel = ~grid.interior
    if callable(director):
        point, _, _ = grid.spec.nearest_boundary(grid.coords[sel])
        v = np.asarray(director(point), dtype=float)
    else:
        v = np.asarray(director, dtype=float)[sel]
    if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1) > 1e-12):
        raise NotUnit("boundary director must be unit length")
    out[sel] = qt.uniaxial(v)
    return out


def boundary_hedgehog(grid: Grid) -> np.ndarray:
    """Radial anchoring on every boundary component, extended to exterior nodes."""
    out = np.zeros(grid.shape + (5,))
    sel = ~grid.interior
    _, d, _ = grid.spec.nearest_boundary(grid.coords[sel])
    out[sel] = qt.uniaxial(d / np.linalg.norm(d, axis=-1, keepdims=True), tol=1e-10)
    return out


def voxel_fraction(centers: np.ndarray, h: float, inside: Callable, k: int = 8) -> np.ndarray:
    """Fraction of each cube [c - h/2, c + h/2]^3 where ``inside`` holds (k^3 samples)."""
    off = (np.arange(k) + 0.5) / k - 0.5
    sub = np.stack(np.meshgrid(off, off, off, indexing="ij"), -1).reshape(-1, 3) * h
    out = np.empty(len(centers))
    chunk = max(1, 200000 // len(sub))
    for s in range(0, len(centers), chunk):
        pts = centers[s:s + chunk, None, :] + sub[None]
        out[s:s + chunk] = inside(pts).mean(axis=1)
    return out


def cell_volume_weights(grid: Grid, k: int = 8) -> np.ndarray:
    """Clipped voxel volume per non-exterior node (midpoint rule with cut cells)."""
    phi = grid.spec.signed_distance(grid.coords)
    frac = (phi < 0).astype(float)
    cut = np.abs(phi) < 0.5 * math.sqrt(3) * grid.h * 1.01
    frac[cut] = voxel_fraction(grid.coords[cut], grid.h, grid.spec.inside, k)
    frac[~grid.active] = 0.0
    return frac * grid.h ** 3


def harmonic_extension(grid: Grid, bc: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Discrete harmonic extension of the frozen data into the interior nodes.

    Solves the edge-weighted graph Laplacian of the grid, so the result is
    the exact minimizer of the discrete Dirichlet energy with these data.
    """
    from scipy.sparse import coo_matrix, diags
    from scipy.sparse.linalg import cg

    n = grid.n
    idx = -np.ones(n ** 3, dtype=np.int64)
    inn = grid.interior.ravel()
    m = int(inn.sum())
    idx[inn] = np.arange(m)
    flat_bc = bc.reshape(-1, 5)
    strides = (n * n, n, 1)
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    rhs = np.zeros((m, 5))
    for ax, wgt in enumerate(grid.edge_weights):
        lo = [slice(None)] * 3
        lo[ax] = slice(None, -1)
        a = np.arange(n ** 3).reshape(grid.shape)[tuple(lo)].ravel()
        th = wgt.ravel()
        keep = th > 0
        a, th = a[keep], th[keep]
        b = a + strides[ax]
        for p, q in ((a, b), (b, a)):
            ip, iq = idx[p], idx[q]
            ok = ip >= 0
            np.add.at(diag, ip[ok], th[ok])
            both = ok & (iq >= 0)
            rows.append(ip[both])
            cols.append(iq[both])
            vals.append(-th[both])
            fr = ok & (iq < 0)
            np.add.at(rhs, ip[fr], th[fr, None] * flat_bc[q[fr]])
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    A = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(m, m)).tocsr()
    precond = diags(1.0 / diag)
    out = bc.copy()
    for c in range(5):
        x, info = cg(A, rhs[:, c], rtol=tol, maxiter=20 * n ** 2, M=precond)
        out[grid.interior, c] = x
    return out


