"""Biaxiality fields, level-set surfaces, liftings of the leading eigenvector
and degrees on closed surfaces.

Level sets come from Lewiner marching cubes (scikit-image), whose ambiguity
resolution yields closed edge-manifold meshes away from the array border.
Arrays are padded before extraction so every component is closed.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import qtensor as qt
from .domain import Grid, TensorField
from .errors import (DegreeUnresolved, EigenvalueGapTooSmall, EmptyLevelSet,
                     LiftingObstructed)

GAP_TOL = 0.05
ATTAINMENT_LEVELS = (-0.99, -0.9, 0.0, 0.9, 0.99)


# -- biaxiality -----------------------------------------------------------------

@dataclass
class BiaxField:
    grid: Grid
    beta: np.ndarray          # on every node; isotropic nodes hold a filled value
    isotropic: np.ndarray     # |Q| < iso_tol
    beta_bar: float           # min over boundary nodes
    beta_0: float             # max over boundary nodes

    @property
    def valid(self) -> np.ndarray:
        """Non-exterior, non-isotropic nodes."""
        return self.grid.active & ~self.isotropic

    @classmethod
    def from_scalar(cls, grid: Grid, beta: np.ndarray) -> "BiaxField":
        """Wrap a synthetic biaxiality array (no isotropic points)."""
        beta = np.asarray(beta, float)
        iso = np.zeros(grid.shape, bool)
        b = beta[grid.boundary]
        return cls(grid, beta, iso, float(b.min()), float(b.max()))


def _fill_nearest(a, mask):
    if not mask.any():
        return a
    _, idx = ndimage.distance_transform_edt(mask, return_indices=True)
    return a[tuple(idx)]


def biaxiality_field(field: TensorField, iso_tol: float = qt.ISO_TOL) -> BiaxField:
    beta, iso = qt.biaxiality_unchecked(field.values, iso_tol)
    filled = _fill_nearest(np.where(iso, 0.0, beta), iso)
    grid = field.grid
    bd = grid.boundary & ~iso
    b = filled[bd] if bd.any() else filled[grid.boundary]
    return BiaxField(grid, filled, iso, float(b.min()), float(b.max()))


# -- meshes -----------------------------------------------------------------------

@dataclass
class Component:
    index: int
    n_vertices: int
    n_edges: int
    n_faces: int
    euler: int
    closed: bool
    genus: Optional[int]
    area: float
    bbox: tuple

    def as_dict(self) -> dict:
        return {"id": self.index, "chi": self.euler, "genus": self.genus,
                "closed": self.closed, "area": self.area, "V": self.n_vertices,
                "E": self.n_edges, "F": self.n_faces}


@dataclass
class LevelSetMesh:
    vertices: np.ndarray
    faces: np.ndarray
    face_component: np.ndarray
    components: list
    level: float = 0.0

    def genera(self) -> list:
        return [c.genus for c in self.components if c.closed]

    def submesh(self, k: int) -> "LevelSetMesh":
        sel = self.faces[self.face_component == k]
        used, inv = np.unique(sel, return_inverse=True)
        faces = inv.reshape(sel.shape)
        return LevelSetMesh(self.vertices[used], faces, np.zeros(len(faces), int),
                            [self.components[k]], self.level)

    def write_component_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "chi", "genus", "closed", "area"])
            for c in self.components:
                w.writerow([c.index, c.euler, "" if c.genus is None else c.genus,
                            int(c.closed), f"{c.area:.17g}"])


def _edges(faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return e


def analyze_mesh(vertices, faces, level=0.0) -> LevelSetMesh:
    """Label connected components and compute V, E, F, chi and genus of each."""
    faces = np.asarray(faces, dtype=np.int64)
    nv = len(vertices)
    e = _edges(faces)
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
    _, vlab = connected_components(adj, directed=False)
    flab_raw = vlab[faces[:, 0]]
    uniq, flab = np.unique(flab_raw, return_inverse=True)
    und = np.sort(e, axis=1)
    edge_face = np.tile(np.arange(len(faces)), 3)
    key = und[:, 0] * nv + und[:, 1]
    ukey, first, counts = np.unique(key, return_index=True, return_counts=True)
    edge_comp = flab[edge_face[first]]
    tri = vertices[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    comps = []
    for k in range(len(uniq)):
        fmask = flab == k
        vids = np.unique(faces[fmask])
        emask = edge_comp == k
        V, E, F = len(vids), int(emask.sum()), int(fmask.sum())
        closed = bool(np.all(counts[emask] == 2))
        chi = V - E + F
        genus = (2 - chi) // 2 if closed and chi % 2 == 0 and chi <= 2 else None
        pts = vertices[vids]
        comps.append(Component(k, V, E, F, chi, closed, genus, float(areas[fmask].sum()),
                               (tuple(pts.min(0)), tuple(pts.max(0)))))
    return LevelSetMesh(np.asarray(vertices, float), faces, flab, comps, level)


def _marching(values, level, h, origin, pad_value):
    from skimage.measure import marching_cubes

    lo, hi = float(values.min()), float(values.max())
    if not lo < level < hi:
        raise EmptyLevelSet(f"level {level} outside the range [{lo:.4g}, {hi:.4g}]")
    padded = np.pad(values, 1, mode="constant", constant_values=pad_value)
    verts, faces, _, _ = marching_cubes(padded, level, spacing=(h, h, h),
                                        method="lewiner", allow_degenerate=False)
    return verts + (np.asarray(origin) - h), faces


def extract_level_set(biax: BiaxField, t: float) -> LevelSetMesh:
    """Triangulated {beta = t} with per-component Euler characteristic and genus.

    Face normals point toward decreasing beta.
    """
    g = biax.grid
    pad = 1.0 if t < 1.0 else 2.0
    verts, faces = _marching(biax.beta, t, g.h, g.origin, pad)
    return analyze_mesh(verts, faces, t)


def level_scan(biax: BiaxField, t: float, dt: float = 0.02) -> dict:
    """Closed-component genus lists at t - dt, t and t + dt."""
    out = {}
    for s in (t - dt, t, t + dt):
        try:
            out[round(s, 12)] = extract_level_set(biax, s).genera()
        except EmptyLevelSet:
            out[round(s, 12)] = []
    return out


# -- spheres and degree -------------------------------------------------------------

def icosphere(level: int = 2, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron with outward-oriented faces."""
    p = (1 + math.sqrt(5)) / 2
    v = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
                  [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
                  [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(level):
        cache = {}
        verts = list(v)

        def mid(a, b):
            k = (min(a, b), max(a, b))
            if k not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[k] = len(verts) - 1
            return cache[k]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v, f = np.array(verts), np.array(nf)
    return v * radius + np.asarray(center, float), f


def solid_angles(v, faces):
    """Signed solid angle of each spherical triangle (v[a], v[b], v[c])."""
    a, b, c = v[faces[:, 0]], v[faces[:, 1]], v[faces[:, 2]]
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) \
        + np.einsum("ij,ij->i", c, a)
    return 2 * np.arctan2(num, den)


@dataclass
class DegreeResult:
    value: int
    raw: float
    residual: float


def degree(v: np.ndarray, faces: np.ndarray, tol: float = 0.1) -> DegreeResult:
    """Degree of a vertex map into S^2 on a closed oriented triangle mesh."""
    v = np.asarray(v, float)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    raw = float(solid_angles(v, np.asarray(faces)).sum() / (4 * math.pi))
    k = int(round(raw))
    res = abs(raw - k)
    if res >= tol:
        raise DegreeUnresolved(f"degree sum {raw:.4f} is not near an integer")
    return DegreeResult(k, raw, res)


# -- liftings -------------------------------------------------------------------------

@dataclass
class Lifting:
    vectors: np.ndarray        # per vertex unit vectors (NaN at excluded vertices)
    excluded: np.ndarray       # vertices failing the gap test
    gaps: np.ndarray
    components: int


def sample_field(field: TensorField, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of the five coefficients at arbitrary points."""
    g = field.grid
    idx = ((np.asarray(points, float) - g.origin) / g.h).T
    return np.stack([ndimage.map_coordinates(field.values[..., c], idx, order=1,
                                             mode="nearest") for c in range(5)], -1)


def vertex_normals(vertices, faces):
    tri = vertices[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    vn = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(vn, faces[:, k], fn)
    n = np.linalg.norm(vn, axis=1, keepdims=True)
    return vn / np.where(n > 0, n, 1.0)


def lift_vectors(vecs, vertices, faces, keep=None) -> tuple:
    """Sign-consistent choice of +-vecs by breadth-first propagation over mesh edges.

    The seed of each connected piece is oriented along the vertex normal.
    Returns (vectors, number of pieces); raises LiftingObstructed when some
    edge joins vertices of opposite orientation after propagation.
    """
    nv = len(vertices)
    keep = np.ones(nv, bool) if keep is None else keep
    e = _edges(np.asarray(faces))
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    e = np.unique(np.sort(e, axis=1), axis=0)
    nbrs = [[] for _ in range(nv)]
    for a, b in e:
        nbrs[a].append(b)
        nbrs[b].append(a)
    normals = vertex_normals(vertices, np.asarray(faces))
    out = np.full((nv, 3), np.nan)
    pieces = 0
    for seed in range(nv):
        if not keep[seed] or not np.isnan(out[seed, 0]):
            continue
        pieces += 1
        v0 = vecs[seed]
        out[seed] = v0 if np.dot(v0, normals[seed]) >= 0 else -v0
        queue = deque([seed])
        while queue:
            a = queue.popleft()
            for b in nbrs[a]:
                if np.isnan(out[b, 0]):
                    vb = vecs[b]
                    out[b] = vb if np.dot(vb, out[a]) >= 0 else -vb
                    queue.append(b)
    if len(e):
        dots = np.einsum("ij,ij->i", out[e[:, 0]], out[e[:, 1]])
        if np.any(dots < 0):
            bad = int(np.sum(dots < 0))
            raise LiftingObstructed(f"{bad} edges disagree after sign propagation")
    return out, pieces


def lift_eigenvector(field: TensorField, surface, gap_tol: float = GAP_TOL,
                     allow_excluded: bool = False) -> Lifting:
    """Lift the leading eigenvector of Q sampled at the vertices of a surface.

    surface is a LevelSetMesh or a (vertices, faces) pair such as an entry of
    :func:`boundary_meshes`.

    Vertices with lambda_max - lambda_mid < gap_tol |Q| are excluded; unless
    allow_excluded is set their presence raises EigenvalueGapTooSmall.
    """
    if isinstance(surface, LevelSetMesh):
        vertices, faces = surface.vertices, surface.faces
    else:
        vertices, faces = surface
    q = sample_field(field, vertices)
    v, gap = qt.director_max(q)
    keep = gap >= gap_tol * qt.norm(q)
    if not keep.all() and not allow_excluded:
        raise EigenvalueGapTooSmall(f"{int((~keep).sum())} vertices below the eigenvalue gap")
    out, pieces = lift_vectors(v, vertices, faces, keep)
    return Lifting(out, ~keep, gap, pieces)


def boundary_meshes(grid: Grid, level: int = 4):
    """Icosphere meshes of each boundary component, oriented outward from the domain."""
    spec = grid.spec
    if spec.shape != "ball":
        raise NotImplementedError("boundary meshes are available for ball domains")
    out = [icosphere(level, spec.outer_radius)]
    for hole in spec.holes:
        v, f = icosphere(level, hole.radius, hole.center)
        out.append((v, f[:, ::-1].copy()))
    return out


@dataclass
class BoundaryDegree:
    total: int
    per_component: list
    residuals: list


def boundary_degree(field: TensorField, level: int = 4,
                    gap_tol: float = GAP_TOL) -> BoundaryDegree:
    """deg(v_max, boundary) as the sum over boundary components."""
    per, res = [], []
    for v, f in boundary_meshes(field.grid, level):
        lift = lift_eigenvector(field, (v, f), gap_tol)
        d = degree(lift.vectors, f)
        per.append(d.value)
        res.append(d.residual)
    return BoundaryDegree(sum(per), per, res)


# -- regions ---------------------------------------------------------------------------

@dataclass
class RegionReport:
    t1: float
    t2: float
    low_empty: bool
    high_empty: bool
    low_components: int
    high_components: int
    low_genus: list
    high_genus: list
    surrogate_linked: bool
    notes: list = field(default_factory=list)
    attainment: Optional[dict] = None

    def as_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2,
                "region_genus_lists": {"low": self.low_genus, "high": self.high_genus},
                "surrogate_linked": self.surrogate_linked,
                "attainment": self.attainment,
                "empty": {"low": self.low_empty, "high": self.high_empty},
                "components": {"low": self.low_components, "high": self.high_components},
                "notes": self.notes}


def region_masks(biax: BiaxField, t1: float, t2: float):
    valid = biax.valid
    return valid & (biax.beta <= t1), valid & (biax.beta >= t2)


def _region_surfaces(biax: BiaxField, indicator: np.ndarray) -> list:
    """Genus list of the closed boundary surfaces of {indicator >= 0} inside the domain."""
    g = biax.grid
    phi = g.spec.signed_distance(g.coords)
    f = np.minimum(indicator, -phi)
    try:
        verts, faces = _marching(f, 0.0, g.h, g.origin, -1.0)
    except EmptyLevelSet:
        return []
    return analyze_mesh(verts, faces).genera()


def region_report(biax: BiaxField, t1: float, t2: float) -> RegionReport:
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    low, high = region_masks(biax, t1, t2)
    s = ndimage.generate_binary_structure(3, 1)
    n_low = ndimage.label(low, s)[1]
    n_high = ndimage.label(high, s)[1]
    low_g = _region_surfaces(biax, t1 - biax.beta) if low.any() else []
    high_g = _region_surfaces(biax, biax.beta - t2) if high.any() else []
    linked = bool(low.any() and high.any() and any(x and x > 0 for x in low_g)
                  and any(x and x > 0 for x in high_g))
    notes = []
    if biax.isotropic[biax.grid.active].any():
        notes.append("isotropic nodes present; attainment of beta = -1 is not guaranteed")
    if t2 >= biax.beta_bar:
        notes.append("t2 is not below the boundary minimum of beta")
    return RegionReport(t1, t2, not low.any(), not high.any(), n_low, n_high,
                        low_g, high_g, linked, notes)


# -- attainment ------------------------------------------------------------------------

def hypotheses(field: TensorField, degree_level: int = 4) -> dict:
    """Flags for the standing hypotheses: no isotropic point, boundary beta above -1,
    and odd boundary degree of the leading eigenvector."""
    biax = biaxiality_field(field)
    flags = {"hp0": not bool(biax.isotropic[field.grid.active].any()),
             "hp1": biax.beta_bar > -1 + 1e-9}
    try:
        flags["degree"] = boundary_degree(field, degree_level).total
        flags["hp3"] = flags["degree"] % 2 == 1
    except (EigenvalueGapTooSmall, LiftingObstructed, DegreeUnresolved) as exc:
        flags["degree"] = None
        flags["hp3"] = False
        flags["degree_error"] = type(exc).__name__
    return flags


def attainment_check(biax: BiaxField, flags: Optional[dict] = None,
                     levels: Sequence[float] = ATTAINMENT_LEVELS) -> dict:
    """min beta over the domain and which levels lie within the sampled range."""
    vals = biax.beta[biax.valid]
    lo, hi = float(vals.min()), float(vals.max())
    report = {"min_beta": lo, "max_beta": hi,
              "attained": {f"{t:g}": bool(lo <= t <= hi) for t in levels},
              "flags": dict(flags or {})}
    notes = []
    if flags is not None:
        for key in ("hp0", "hp1", "hp3"):
            if key in flags and not flags[key]:
                notes.append(f"{key.upper()} violated")
    report["notes"] = notes
    return report
