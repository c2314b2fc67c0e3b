import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldg import qtensor as qt
from ldg.domain import DomainSpec, Hole, TensorField, boundary_hedgehog, build_grid
from ldg.errors import DegreeUnresolved, EigenvalueGapTooSmall, EmptyLevelSet, LiftingObstructed
from ldg.hedgehog import assemble_field, solve_profile
from ldg.topology import (BiaxField, analyze_mesh, attainment_check, biaxiality_field,
                          boundary_degree, boundary_meshes, degree, extract_level_set,
                          hypotheses, icosphere, level_scan, lift_eigenvector, lift_vectors,
                          region_masks, region_report)

E0 = qt.basis_vector(0)


@pytest.fixture(scope="module")
def g40():
    return build_grid(DomainSpec(), 40)


def unit_field(grid, vec):
    v = np.broadcast_to(vec, grid.shape + (5,)).copy()
    return TensorField(grid, v, {})


def torus_distance(x, R=0.5, a=0.2):
    rho = np.hypot(x[..., 0], x[..., 1])
    return np.hypot(rho - R, x[..., 2]) - a


def hopf_beta(x, scale=0.15):
    """|w1|^2 - |w2|^2 on S^3 pulled back by inverse stereographic projection.

    A unitary rotation moves both core fibres off the projection pole so that
    {beta <= -t} and {beta >= t} are two bounded, linked solid tori.
    """
    y = x / scale
    r2 = (y ** 2).sum(-1)
    z1 = (2 * y[..., 0] + 2j * y[..., 1]) / (1 + r2)
    z2 = (2 * y[..., 2] + 1j * (r2 - 1)) / (1 + r2)
    w1, w2 = (z1 + z2) / math.sqrt(2), (z1 - z2) / math.sqrt(2)
    return np.abs(w1) ** 2 - np.abs(w2) ** 2


# -- degree on icospheres -----------------------------------------------------------------

@pytest.mark.parametrize("level", [2, 3, 4])
def test_degree_canonical_maps(level):
    v, f = icosphere(level)
    assert degree(v, f).value == 1
    assert degree(-v, f).value == -1
    assert degree(np.tile([0.0, 0.0, 1.0], (len(v), 1)), f).value == 0
    assert degree(v, f).residual < 1e-9


def test_degree_of_reflection_and_rotation():
    v, f = icosphere(3)
    refl = v * np.array([1, 1, -1])
    assert degree(refl, f).value == -1
    c, s = math.cos(0.7), math.sin(0.7)
    rot = v @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T
    assert degree(rot, f).value == 1


def test_degree_two_map():
    # z -> z^2 in stereographic coordinates has degree 2
    v, f = icosphere(4)
    c, s = math.cos(0.3), math.sin(0.3)
    v = v @ np.array([[1, 0, 0], [0, c, -s], [0, s, c]]).T    # no vertex at the pole
    z = (v[:, 0] + 1j * v[:, 1]) / (1 - v[:, 2])
    w = z * z
    d = 1 + np.abs(w) ** 2
    img = np.stack([2 * w.real / d, 2 * w.imag / d, (np.abs(w) ** 2 - 1) / d], 1)
    assert degree(img, f).value == 2


def test_degree_unresolved_on_open_patch():
    v, f = icosphere(2)
    with pytest.raises(DegreeUnresolved):
        degree(v, f[: len(f) // 2])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), min_size=3, max_size=3), st.integers(0, 2 ** 31 - 1))
def test_degree_parity_under_component_sign_flips(flips, seed):
    rng = np.random.default_rng(seed)
    centres = [(-2.0, 0, 0), (0, 0, 0), (2.0, 0, 0)]
    total = 0
    for flip, c in zip(flips, centres):
        v, f = icosphere(2, 0.5, c)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        img = (v - np.array(c)) @ q.T
        img = -img if flip else img
        total += degree(img, f).value
    assert total % 2 == 1


def test_degree_invariant_under_refinement():
    vals = []
    for level in (2, 3, 4):
        v, f = icosphere(level)
        vals.append(degree(v * np.array([1, -1, 1]), f).value)
    assert vals == [-1, -1, -1]


# -- level sets ------------------------------------------------------------------------

def test_sphere_level_set(g40):
    b = BiaxField.from_scalar(g40, np.linalg.norm(g40.coords, axis=-1) - 0.5)
    m = extract_level_set(b, 0.0)
    assert len(m.components) == 1
    c = m.components[0]
    assert c.closed and c.euler == 2 and c.genus == 0
    assert c.area == pytest.approx(math.pi, rel=0.02)


def test_torus_level_set(g40):
    b = BiaxField.from_scalar(g40, torus_distance(g40.coords))
    m = extract_level_set(b, 0.0)
    assert [c.euler for c in m.components] == [0]
    assert m.genera() == [1]
    assert m.components[0].area == pytest.approx(4 * math.pi ** 2 * 0.5 * 0.2, rel=0.02)


def test_two_spheres_and_double_torus(g40):
    x = g40.coords
    two = np.minimum(np.linalg.norm(x - (0.4, 0, 0), axis=-1),
                     np.linalg.norm(x + (0.4, 0, 0), axis=-1)) - 0.25
    assert sorted(extract_level_set(BiaxField.from_scalar(g40, two), 0.0).genera()) == [0, 0]
    tor = lambda c: torus_distance(x - np.array(c), 0.3, 0.1)
    double = np.minimum(tor((0.3, 0, 0)), tor((-0.3, 0, 0)))
    assert extract_level_set(BiaxField.from_scalar(g40, double), 0.0).genera() == [2]


def test_level_set_components_are_consistent(g40):
    b = BiaxField.from_scalar(g40, torus_distance(g40.coords))
    for t in (-0.1, 0.0, 0.1):
        m = extract_level_set(b, t)
        for c in m.components:
            assert c.closed
            assert c.euler == c.n_vertices - c.n_edges + c.n_faces
            assert c.euler % 2 == 0 and c.genus == (2 - c.euler) // 2 >= 0
        assert sum(c.n_faces for c in m.components) == len(m.faces)


def test_empty_level_set(g40):
    b = BiaxField.from_scalar(g40, np.full(g40.shape, 0.3))
    with pytest.raises(EmptyLevelSet):
        extract_level_set(b, 0.5)


def test_level_scan(g40):
    b = BiaxField.from_scalar(g40, torus_distance(g40.coords))
    scan = level_scan(b, 0.0, 0.02)
    assert scan == {-0.02: [1], 0.0: [1], 0.02: [1]}


def test_submesh_and_csv(g40, tmp_path):
    b = BiaxField.from_scalar(g40, torus_distance(g40.coords))
    m = extract_level_set(b, 0.0)
    sub = m.submesh(0)
    again = analyze_mesh(sub.vertices, sub.faces)
    assert again.genera() == [1]
    path = tmp_path / "comp.csv"
    m.write_component_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["id", "chi", "genus", "closed", "area"]
    assert rows[1][1:4] == ["0", "1", "1"]


def test_open_mesh_has_no_genus():
    v, f = icosphere(1)
    m = analyze_mesh(v, f[:-1])
    assert not m.components[0].closed and m.components[0].genus is None
    assert m.genera() == []


# -- biaxiality ------------------------------------------------------------------------

def test_biaxiality_examples(g40):
    b = biaxiality_field(TensorField(g40, boundary_hedgehog(g40), {}))
    assert b.beta_bar == pytest.approx(1, abs=1e-9) and b.beta_0 == pytest.approx(1, abs=1e-9)
    biax = unit_field(g40, qt.basis_vector(3))
    assert np.allclose(biaxiality_field(biax).beta[g40.active], 0, atol=1e-12)
    hh = assemble_field(solve_profile(1.0, 200.0), g40)
    bh = biaxiality_field(hh)
    r = np.linalg.norm(g40.coords, axis=-1)
    sel = bh.valid & (r > 0.05)
    assert np.allclose(bh.beta[sel], 1, atol=1e-9)
    assert bh.beta_bar <= bh.beta_0


def test_isotropic_points_are_masked(g40):
    v = np.zeros(g40.shape + (5,))
    v[..., 0] = np.linalg.norm(g40.coords, axis=-1) - 0.3
    b = biaxiality_field(TensorField(g40, v, {}))
    assert b.isotropic.any() or np.all(np.abs(v[..., 0]) > qt.ISO_TOL)
    assert np.all(np.abs(b.beta) <= 1)


# -- liftings ----------------------------------------------------------------------------

def test_lifting_of_hedgehog_boundary_is_normal(g40):
    f = TensorField(g40, boundary_hedgehog(g40), {})
    v, faces = boundary_meshes(g40, 3)[0]
    lift = lift_eigenvector(f, (v, faces))
    n = v / np.linalg.norm(v, axis=1, keepdims=True)
    dots = np.einsum("ij,ij->i", lift.vectors, n)
    assert np.all(np.abs(np.abs(dots) - 1) < 1e-2)
    assert np.all(np.sign(dots) == np.sign(dots[0]))
    assert lift.components == 1 and not lift.excluded.any()


def test_lifting_of_constant_field_is_vertical(g40):
    f = unit_field(g40, E0)
    lift = lift_eigenvector(f, icosphere(3, 0.6))
    assert np.allclose(np.abs(lift.vectors[:, 2]), 1, atol=1e-12)
    assert np.all(np.sign(lift.vectors[:, 2]) == np.sign(lift.vectors[0, 2]))


def test_mobius_line_field_on_torus_is_obstructed(g40):
    m = extract_level_set(BiaxField.from_scalar(g40, torus_distance(g40.coords)), 0.0)
    x = g40.coords
    phi = np.arctan2(x[..., 1], x[..., 0])
    rho = np.hypot(x[..., 0], x[..., 1])
    er = np.stack([x[..., 0], x[..., 1], 0 * rho], -1) / np.maximum(rho, 1e-12)[..., None]
    ez = np.zeros_like(er)
    ez[..., 2] = 1
    # the director turns by pi once around the core circle
    n = np.cos(phi / 2)[..., None] * ez + np.sin(phi / 2)[..., None] * er
    f = TensorField(g40, qt.uniaxial(n), {})
    with pytest.raises(LiftingObstructed):
        lift_eigenvector(f, m)
    # an untwisted line field on the same torus lifts fine
    plain = np.where((rho > 1e-9)[..., None], er, ez)
    lift = lift_eigenvector(TensorField(g40, qt.uniaxial(plain), {}), m)
    assert lift.components == 1


def test_lift_vectors_orients_seed_along_normal():
    v, f = icosphere(2)
    ok, pieces = lift_vectors(-v, v, f)
    assert pieces == 1 and np.allclose(ok, v)


def test_small_gap_raises(g40):
    f = unit_field(g40, -E0)          # negative uniaxial: the top eigenvalue is double
    with pytest.raises(EigenvalueGapTooSmall):
        lift_eigenvector(f, icosphere(2, 0.5))
    lift = lift_eigenvector(f, icosphere(2, 0.5), allow_excluded=True)
    assert lift.excluded.all()


def test_boundary_degree(g40):
    assert boundary_degree(TensorField(g40, boundary_hedgehog(g40), {})).total == 1
    assert boundary_degree(unit_field(g40, E0)).total == 0
    g = build_grid(DomainSpec(holes=(Hole((0.45, 0, 0), 0.2),)), 48)
    d = boundary_degree(TensorField(g, boundary_hedgehog(g), {}))
    # each sphere carries degree +-1 (the sign follows the lifting), so the sum is even
    assert [abs(k) for k in d.per_component] == [1, 1] and d.total % 2 == 0
    assert not hypotheses(TensorField(g, boundary_hedgehog(g), {}))["hp3"]


# -- regions -------------------------------------------------------------------------------

def test_hopf_field_is_surrogate_linked(g40):
    beta = np.where(g40.active, hopf_beta(g40.coords), 0.0)
    b = BiaxField.from_scalar(g40, beta)
    rep = region_report(b, -0.7, 0.7)
    assert not rep.low_empty and not rep.high_empty
    assert rep.low_genus == [1] and rep.high_genus == [1]
    assert rep.surrogate_linked
    d = rep.as_dict()
    assert {"t1", "t2", "region_genus_lists", "surrogate_linked", "attainment"} <= set(d)


def test_torus_and_separate_ball_are_not_linked(g40):
    x = g40.coords
    tube = torus_distance(x - np.array([0, 0, 0.4]), 0.35, 0.12)
    ball = np.linalg.norm(x - np.array([0, 0, -0.45]), axis=-1) - 0.2
    beta = np.clip(np.maximum(tube, 0) * 5, 0, 1) - 1 + np.clip(-ball * 5, 0, 1)
    rep = region_report(BiaxField.from_scalar(g40, beta), -0.5, 0.5)
    assert rep.low_genus == [1] and rep.high_genus == [0]
    assert not rep.surrogate_linked


def test_solid_torus_and_its_complement_count_as_linked(g40):
    # the complement contains a meridian loop, so both regions have genus-one boundary
    b = BiaxField.from_scalar(g40, np.tanh(5 * torus_distance(g40.coords)))
    rep = region_report(b, -0.5, 0.5)
    assert rep.low_genus == [1] and 1 in rep.high_genus
    assert rep.surrogate_linked


def test_hedgehog_regions(g40):
    hh = assemble_field(solve_profile(1.0, 200.0), g40)
    rep = region_report(biaxiality_field(hh), -0.8, 0.8)
    assert rep.low_empty and not rep.surrogate_linked
    assert any("isotropic" in n for n in rep.notes) or not biaxiality_field(hh).isotropic.any()


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.9, 0.0), st.floats(0.05, 0.9), st.integers(0, 1000))
def test_regions_are_disjoint_and_cover(t1, gap, seed):
    g = build_grid(DomainSpec(), 16)
    beta = np.random.default_rng(seed).uniform(-1, 1, g.shape)
    b = BiaxField.from_scalar(g, beta)
    t2 = min(t1 + gap, 0.99)
    low, high = region_masks(b, t1, t2)
    mid = b.valid & (beta > t1) & (beta < t2)
    assert not (low & high).any()
    assert np.array_equal(low | high | mid, b.valid)
    with pytest.raises(ValueError):
        region_report(b, t2, t1)


# -- attainment ----------------------------------------------------------------------------

def test_constant_field_violates_hp3(g40):
    f = unit_field(g40, E0)
    flags = hypotheses(f)
    assert flags["degree"] == 0 and not flags["hp3"] and flags["hp0"] and flags["hp1"]
    rep = attainment_check(biaxiality_field(f), flags)
    assert rep["min_beta"] == pytest.approx(1.0, abs=1e-12)
    assert "HP3 violated" in rep["notes"]
    assert not any(rep["attained"].values())


def test_attainment_levels(g40):
    z = g40.coords[..., 2]
    b = BiaxField.from_scalar(g40, 0.95 * z / np.abs(z[g40.active]).max())
    rep = attainment_check(b)
    assert rep["attained"] == {"-0.99": False, "-0.9": True, "0": True, "0.9": True,
                               "0.99": False}
    hh = TensorField(g40, boundary_hedgehog(g40), {})
    assert hypotheses(hh)["hp3"]
