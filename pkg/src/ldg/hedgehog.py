"""Radial hedgehog profiles and second-variation tests around them.

The profile s(r) of H(x) = s(|x|) (n n - I/3), n = x/|x|, solves

    s'' + 2 s'/r - 6 s/r^2 = -lam (s^2/3 - 2 s^3/(3 sqrt6)) - mu (1 - 2 s^2/3) s

on (0, 1) with s(0) = 0 and s(1) = sqrt(3/2). It is obtained by inserting
the ansatz into the Euler-Lagrange system; the 3D residual of the assembled
field checks the derivation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from . import qtensor as qt
from .domain import Grid, TensorField, boundary_hedgehog
from .energy import dirichlet_energy, objective
from .errors import DomainMismatch, NoConvergence, NotTangent, SingularIntegrand

S_BOUNDARY = math.sqrt(1.5)
ODE_TOL = 1e-8


# -- profile ------------------------------------------------------------------

@dataclass
class HedgehogProfile:
    r: np.ndarray
    s: np.ndarray
    lam: float
    mu: float
    residual: float

    def __call__(self, r):
        return np.interp(np.asarray(r, float), self.r, self.s, right=self.s[-1])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "s"])
            for a, b in zip(self.r, self.s):
                w.writerow([f"{a:.17g}", f"{b:.17g}"])


def _bulk_terms(s, lam, mu):
    f = lam * (s * s / 3 - 2 * s ** 3 / (3 * qt.SQRT6)) + mu * (1 - 2 * s * s / 3) * s
    df = lam * (2 * s / 3 - 2 * s * s / qt.SQRT6) + mu * (1 - 2 * s * s)
    return f, df


def ode_residual(r, s, lam, mu):
    """r^2-weighted central-difference residual at the interior samples."""
    h = r[1] - r[0]
    ri = r[1:-1]
    f, _ = _bulk_terms(s[1:-1], lam, mu)
    return (ri ** 2 * (s[2:] - 2 * s[1:-1] + s[:-2]) / h ** 2
            + ri * (s[2:] - s[:-2]) / h - 6 * s[1:-1] + ri ** 2 * f)


def _newton(r, s, lam, mu, max_iter=100):
    h = r[1] - r[0]
    ri = r[1:-1]
    lo = ri ** 2 / h ** 2 - ri / h
    up = ri ** 2 / h ** 2 + ri / h
    res = ode_residual(r, s, lam, mu)
    nrm = np.abs(res).max()
    for _ in range(max_iter):
        if nrm < ODE_TOL:
            return s, nrm
        _, df = _bulk_terms(s[1:-1], lam, mu)
        ab = np.zeros((3, len(ri)))
        ab[0, 1:] = up[:-1]
        ab[1] = -2 * ri ** 2 / h ** 2 - 6 + ri ** 2 * df
        ab[2, :-1] = lo[1:]
        step = solve_banded((1, 1), ab, -res)
        t = 1.0
        while t > 1e-6:
            trial = s.copy()
            trial[1:-1] += t * step
            tres = ode_residual(r, trial, lam, mu)
            tn = np.abs(tres).max()
            if tn < nrm or tn < ODE_TOL:
                break
            t *= 0.5
        else:
            break
        s, res, nrm = trial, tres, tn
    if nrm < ODE_TOL:
        return s, nrm
    raise NoConvergence(f"hedgehog Newton stalled at residual {nrm:.3g} (mu={mu})")


def solve_profile(lam: float, mu: float, nr: int = 2048,
                  start: Optional[HedgehogProfile] = None) -> HedgehogProfile:
    """Damped Newton on the central-difference BVP with continuation in mu."""
    if lam <= 0 or mu <= 0:
        raise ValueError("lam and mu must be positive")
    if nr < 256:
        raise ValueError("nr must be at least 256")
    r = np.linspace(0.0, 1.0, nr)
    if start is not None and len(start.r) == nr and start.mu <= mu:
        s, mu0 = start.s.copy(), start.mu
    else:
        s, mu0 = S_BOUNDARY * r ** 2, 0.0
    ladder = []
    m = mu
    while m > max(mu0, 1.0):
        ladder.append(m)
        m /= 2
    ladder.reverse()
    if not ladder or ladder[-1] != mu:
        ladder.append(mu)
    for m in ladder:
        try:
            s, res = _newton(r, s, lam, m)
        except NoConvergence:
            # finer continuation between the last good stage and m
            s, res = _refine_continuation(r, s, lam, mu0, m)
        mu0 = m
    return HedgehogProfile(r=r, s=s, lam=lam, mu=mu, residual=float(res))


def _refine_continuation(r, s, lam, mu_a, mu_b, depth=0):
    if depth > 8:
        raise NoConvergence(f"continuation failed between mu={mu_a} and mu={mu_b}")
    mid = 0.5 * (mu_a + mu_b)
    try:
        s_mid, _ = _newton(r, s, lam, mid)
    except NoConvergence:
        s_mid, _ = _refine_continuation(r, s, lam, mu_a, mid, depth + 1)
    try:
        return _newton(r, s_mid, lam, mu_b)
    except NoConvergence:
        return _refine_continuation(r, s_mid, lam, mid, mu_b, depth + 1)


def _require_unit_ball(grid: Grid):
    spec = grid.spec
    if spec.shape != "ball" or spec.holes or abs(spec.outer_radius - 1.0) > 1e-12:
        raise DomainMismatch("hedgehog fields live on the unit ball without holes")


def _radial_frame(grid: Grid):
    x = grid.coords
    r = np.linalg.norm(x, axis=-1)
    n = x / np.where(r > 0, r, 1.0)[..., None]
    n[r == 0] = (0.0, 0.0, 1.0)
    return r, n


def unit_hedgehog(grid: Grid) -> np.ndarray:
    """Coefficients of Hbar = sqrt(3/2)(n n - I/3); zero at the origin node."""
    r, n = _radial_frame(grid)
    out = qt.uniaxial(n)
    out[r == 0] = 0.0
    return out


def assemble_field(profile: HedgehogProfile, grid: Grid) -> TensorField:
    _require_unit_ball(grid)
    r, _ = _radial_frame(grid)
    vals = unit_hedgehog(grid) * (profile(r) / S_BOUNDARY)[..., None]
    frozen = ~grid.interior
    vals[frozen] = boundary_hedgehog(grid)[frozen]
    return TensorField(grid, vals, {"hedgehog": {"lam": profile.lam, "mu": profile.mu}})


# -- radial test functions ----------------------------------------------------------

@dataclass
class RadialProfile:
    """Radial function on [0, 1] with optional derivative and kink locations."""
    func: Callable
    deriv: Optional[Callable] = None
    breaks: tuple = ()
    support: tuple = (0.0, 1.0)
    name: str = "xi"

    def __call__(self, r):
        return self.func(np.asarray(r, float))

    def derivative(self, r):
        r = np.asarray(r, float)
        if self.deriv is not None:
            return self.deriv(r)
        d = 1e-7
        return (self.func(r + d) - self.func(r - d)) / (2 * d)

    def sample(self, nr: int = 2048):
        r = np.linspace(0.0, 1.0, nr)
        return r, self(r)

    def scaled(self, delta: float) -> "RadialProfile":
        """xi(r / delta), compactly supported in (delta a, delta b)."""
        f, g = self.func, self.derivative
        a, b = self.support
        return RadialProfile(
            func=lambda r: f(np.asarray(r) / delta),
            deriv=lambda r: g(np.asarray(r) / delta) / delta,
            breaks=tuple(delta * t for t in self.breaks),
            support=(delta * a, min(1.0, delta * b)),
            name=f"{self.name}_delta{delta:g}")

    @classmethod
    def from_samples(cls, r, values, name="samples"):
        sp = CubicSpline(np.asarray(r, float), np.asarray(values, float))
        d = sp.derivative()
        return cls(func=lambda t: sp(t), deriv=lambda t: d(t), breaks=(), name=name)


def eta_family(n: int) -> RadialProfile:
    """eta_n(r) = [min(n r, r^-1/2) - 2]_+, supported in [2/n, 1/4]."""
    if n < 1:
        raise ValueError("n must be a positive integer")

    def func(r):
        r = np.asarray(r, float)
        with np.errstate(divide="ignore"):
            inv = np.where(r > 0, 1.0 / np.sqrt(np.where(r > 0, r, 1.0)), np.inf)
        return np.maximum(np.minimum(n * r, inv) - 2.0, 0.0)

    def deriv(r):
        r = np.asarray(r, float)
        lin = n * r
        safe = np.where(r > 0, r, 1.0)
        inv = 1.0 / np.sqrt(safe)
        on_lin = (lin <= inv) & (lin > 2)
        on_pow = (lin > inv) & (inv > 2)
        return np.where(on_lin, float(n), 0.0) + np.where(on_pow, -0.5 * safe ** -1.5, 0.0)

    lo, knee, hi = 2.0 / n, n ** (-2.0 / 3.0), 0.25
    if lo >= hi:
        return RadialProfile(func=lambda r: np.zeros_like(np.asarray(r, float)),
                             deriv=lambda r: np.zeros_like(np.asarray(r, float)),
                             breaks=(), support=(hi, hi), name=f"eta_{n}")
    return RadialProfile(func=func, deriv=deriv, breaks=(lo, knee, hi),
                         support=(lo, hi), name=f"eta_{n}")


def log_sine(a: float = 0.08, b: float = 0.9) -> RadialProfile:
    """r^-1/2 sin(k ln(r/a)) on [a, b] with k = pi / ln(b/a), zero elsewhere.

    The radial Euler equation of int eta'^2 r^2 - 3 eta^2 has solutions
    r^-1/2 cos(sqrt(11)/2 ln r), so this profile has a negative radial second
    variation as soon as b/a exceeds exp(2 pi / sqrt 11) (about 6.6). Unlike
    eta_n it reaches that regime with a support wide enough for a coarse grid.
    """
    if not 0 < a < b <= 1:
        raise ValueError("need 0 < a < b <= 1")
    k = math.pi / math.log(b / a)

    def func(r):
        r = np.asarray(r, float)
        inside = (r > a) & (r < b)
        rs = np.where(inside, r, a)
        return np.where(inside, np.sin(k * np.log(rs / a)) / np.sqrt(rs), 0.0)

    def deriv(r):
        r = np.asarray(r, float)
        inside = (r > a) & (r < b)
        rs = np.where(inside, r, a)
        ph = k * np.log(rs / a)
        return np.where(inside, (k * np.cos(ph) - 0.5 * np.sin(ph)) * rs ** -1.5, 0.0)

    return RadialProfile(func=func, deriv=deriv, breaks=(a, b), support=(a, b),
                         name=f"logsine_{a:g}_{b:g}")


def default_xi() -> RadialProfile:
    """Support (0.06, 0.6): ten scales wide, clear of the boundary layer of H."""
    return log_sine(0.06, 0.6)


def _gauss_panels(breaks, nr, order=6):
    """Gauss-Legendre nodes and weights on [0, 1] split at the given breaks."""
    edges = sorted({0.0, 1.0, *[b for b in breaks if 0.0 < b < 1.0]})
    x0, w0 = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        k = max(1, int(round(nr * (b - a))))
        cuts = np.linspace(a, b, k + 1)
        mid = 0.5 * (cuts[1:] + cuts[:-1])[:, None]
        half = 0.5 * np.diff(cuts)[:, None]
        xs.append((mid + half * x0).ravel())
        ws.append((half * w0).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def radial_integrals(eta, nr: int = 2048):
    """(int eta'^2 r^2 dr, int eta^2 dr) on [0, 1]."""
    if not isinstance(eta, RadialProfile):
        eta = RadialProfile.from_samples(*eta)
    if abs(float(eta(np.array([0.0]))[0])) > 1e-12:
        raise SingularIntegrand("radial profile must vanish at the origin")
    x, w = _gauss_panels(eta.breaks, nr)
    e, de = eta(x), eta.derivative(x)
    return float(np.dot(w, de * de * x * x)), float(np.dot(w, e * e))


def second_var_radial(eta, nr: int = 2048) -> float:
    """(16 pi / 5) int_0^1 (eta'^2 r^2 - 3 eta^2) dr for a radial profile.

    eta may be a :class:`RadialProfile` or a pair (r, values) of samples.
    """
    a, b = radial_integrals(eta, nr)
    return 16 * math.pi / 5 * (a - 3 * b)


# -- sphere quadrature ----------------------------------------------------------------

def sphere_quadrature(n_theta: int = 32, n_phi: int = 64):
    """Points on S^2 and weights summing to 4 pi (Gauss in cos theta, uniform in phi)."""
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    ph = 2 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct ** 2)
    pts = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                    np.outer(ct, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(n_phi, 2 * math.pi / n_phi)).ravel()
    return pts, w


def basis_gram(n_theta: int = 32, n_phi: int = 64) -> np.ndarray:
    """Matrix of int_{S^2} (Hbar : e_i)(Hbar : e_j)."""
    pts, w = sphere_quadrature(n_theta, n_phi)
    hb = qt.uniaxial(pts)
    return np.einsum("p,pi,pj->ij", w, hb, hb)


def _tangent_direction(omega, vbar):
    hb = qt.uniaxial(omega)
    return vbar - hb * qt.inner(hb, vbar)[..., None], hb


def angular_constants(vbar, n_theta: int = 48, n_phi: int = 96):
    """A = int_{S^2} |T|^2 and B = int_{S^2} |grad_omega T|^2 for T = vbar - Hbar (Hbar : vbar).

    The tangential gradient uses the derivative of the degree-zero extension
    of Hbar, d_k(omega_i omega_j) = (delta_ik - omega_i omega_k) omega_j + ...
    """
    vbar = np.asarray(vbar, float)
    pts, w = sphere_quadrature(n_theta, n_phi)
    t, hb = _tangent_direction(pts, vbar)
    hv = qt.inner(hb, vbar)
    vm = qt.to_matrix(vbar)
    hm = qt.to_matrix(hb)
    P = np.eye(3) - pts[:, :, None] * pts[:, None, :]
    total = np.zeros(len(pts))
    for k in range(3):
        a = P[:, :, k][:, :, None] * pts[:, None, :]
        dh = qt.SQRT6 / 2 * (a + np.swapaxes(a, 1, 2))  # sqrt(3/2) * sym part
        dh_v = np.einsum("pij,ij->p", dh, vm)
        dt = -(dh * hv[:, None, None] + hm * dh_v[:, None, None])
        total += np.einsum("pij,pij->p", dt, dt)
    A = float(np.dot(w, qt.inner(t, t)))
    return A, float(np.dot(w, total))


def second_var_zero_angular(xi, vbar, nr: int = 2048) -> float:
    """E''_0(xi vbar_T; Hbar) from the separation A int xi'^2 r^2 + (B - 6A) int xi^2."""
    A, B = angular_constants(vbar)
    a, b = radial_integrals(xi, nr)
    return A * a + (B - 6 * A) * b


# -- perturbations and the second variation of F ---------------------------------------

@dataclass
class Perturbation:
    xi: RadialProfile
    vbar: np.ndarray
    phi: TensorField
    phi_t: TensorField


def build_perturbation(grid: Grid, xi: RadialProfile, vbar) -> Perturbation:
    """Phi = xi(|x|) vbar and its part Phi_T orthogonal to Hbar, zero on frozen nodes."""
    vbar = np.asarray(vbar, float)
    if abs(np.linalg.norm(vbar) - 1.0) > 1e-12:
        raise ValueError("vbar must be a unit vector")
    r, _ = _radial_frame(grid)
    prof = xi(r)
    prof[~grid.interior] = 0.0
    phi = prof[..., None] * vbar
    hb = unit_hedgehog(grid)
    phi_t = phi - hb * qt.inner(hb, phi)[..., None]
    phi_t[r == 0] = 0.0
    meta = {"xi": xi.name}
    return Perturbation(xi, vbar, TensorField(grid, phi, meta), TensorField(grid, phi_t, meta))


def second_var_F(hfield: TensorField, phi_t: TensorField, lam: float, mu: float,
                 tol: float = 1e-9) -> float:
    """Discrete int |grad Phi_T|^2 + lam D^2W(H) Phi_T:Phi_T + mu (|H|^2 - 1)|Phi_T|^2.

    Uses the edge form of the Dirichlet integral and the cell weights of the
    grid, so it equals the second t-derivative of the discrete F(H + t Phi_T).
    """
    grid = hfield.grid
    if not grid.same_as(phi_t.grid):
        raise DomainMismatch("fields live on different grids")
    h, p = hfield.values, phi_t.values
    if np.any(p[~grid.interior] != 0.0):
        raise NotTangent("perturbation must vanish on frozen nodes")
    dots = np.abs(qt.inner(h, p))
    scale = np.maximum(1.0, qt.norm(h) * qt.norm(p))
    if np.any(dots > tol * scale):
        raise NotTangent(f"Phi_T : H reaches {dots.max():.3g}")
    act = grid.active
    w = grid.weights[act]
    hq, pq = h[act], p[act]
    bulk = lam * qt.hessian_w_raw(hq, pq) + mu * (qt.inner(hq, hq) - 1) * qt.inner(pq, pq)
    return 2 * dirichlet_energy(p, grid) + float(np.dot(w, bulk))


def second_difference_F(hfield: TensorField, phi_t: TensorField, lam: float, mu: float,
                        t: float = 1e-3) -> float:
    """Central second difference of the discrete F along H + t Phi_T (oracle)."""
    grid = hfield.grid
    f = [objective(hfield.values + k * t * phi_t.values, grid, lam, pen=mu / 4).total
         for k in (-1, 0, 1)]
    return (f[0] - 2 * f[1] + f[2]) / t ** 2


def _grid_terms(hfield: TensorField, pert: Perturbation, lam: float, mu: float):
    grid = hfield.grid
    act = grid.active
    w = grid.weights[act]
    r, _ = _radial_frame(grid)
    p = pert.phi_t.values[act]
    pp = qt.inner(p, p)
    h = hfield.values[act]
    hb = unit_hedgehog(grid)[act]
    rr = r[act]
    inv = np.where(rr > 0, 6.0 / np.where(rr > 0, rr, 1.0) ** 2, 0.0)
    dir2 = 2 * dirichlet_energy(pert.phi_t.values, grid)
    harmonic_pot = -float(np.dot(w, inv * pp))
    mu_term = float(np.dot(w, mu * (qt.inner(h, h) - 1) * pp))
    hess_bar = float(np.dot(w, qt.hessian_w_raw(hb, p)))
    return dir2, harmonic_pot, mu_term, hess_bar


@dataclass
class SweepReport:
    lam: float
    rows: list = field(default_factory=list)   # dicts per (mu, delta)
    first_negative: Optional[tuple] = None
    best_delta: Optional[float] = None
    cross_checks: list = field(default_factory=list)

    def values(self, delta: float):
        return [r["value"] for r in self.rows if r["delta"] == delta]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "delta", "value"])
            for r in self.rows:
                w.writerow([f"{r['mu']:.17g}", f"{r['delta']:.17g}", f"{r['value']:.17g}"])

    def as_dict(self) -> dict:
        return {"lam": self.lam, "rows": self.rows, "first_negative": self.first_negative,
                "best_delta": self.best_delta, "cross_checks": self.cross_checks}


def instability_sweep(lam: float, mu_ladder: Sequence[float],
                      delta_ladder: Sequence[float] = (1.0, 0.5, 0.25, 0.1),
                      n_grid: int = 64, xi: Optional[RadialProfile] = None,
                      vbar=None, nr: int = 2048, grid: Optional[Grid] = None) -> SweepReport:
    """Table of F''(Phi_T; H^mu) over mu and the rescalings xi(r / delta).

    Each row also carries the pieces needed for the mu -> infinity check:
    the penalty term mu int (|H|^2 - 1)|Phi_T|^2 against -int |grad Hbar|^2 |Phi_T|^2,
    and the grid value of E''_lam(Phi_T; Hbar). Cross-checks compare E''_0
    from the angular separation with :func:`second_var_radial`.
    """
    from .domain import DomainSpec, build_grid

    mus, deltas = list(mu_ladder), list(delta_ladder)
    if not mus or not deltas:
        raise ValueError("ladders must be nonempty")
    xi = xi or default_xi()
    vbar = qt.basis_vector(0) if vbar is None else np.asarray(vbar, float)
    grid = grid or build_grid(DomainSpec(), n_grid)
    perts = {d: build_perturbation(grid, xi.scaled(d), vbar) for d in deltas}
    rep = SweepReport(lam=lam)
    for d in deltas:
        x = xi.scaled(d)
        rep.cross_checks.append({"delta": d, "radial": second_var_radial(x, nr),
                                 "angular": second_var_zero_angular(x, vbar, nr)})
    prof = None
    for mu in sorted(mus):
        prof = solve_profile(lam, mu, nr, start=prof)
        hf = assemble_field(prof, grid)
        for d in deltas:
            pert = perts[d]
            val = second_var_F(hf, pert.phi_t, lam, mu)
            dir2, hpot, mu_term, hess_bar = _grid_terms(hf, pert, lam, mu)
            row = {"mu": mu, "delta": d, "value": val, "dirichlet": dir2,
                   "mu_term": mu_term, "harmonic_limit_term": hpot,
                   "e2_lambda_grid": dir2 + hpot + lam * hess_bar,
                   "profile_residual": prof.residual}
            rep.rows.append(row)
            if rep.first_negative is None and val < 0:
                rep.first_negative = (mu, d)
    top = max(mus)
    top_rows = [r for r in rep.rows if r["mu"] == top]
    rep.best_delta = min(top_rows, key=lambda r: r["value"])["delta"]
    return rep
