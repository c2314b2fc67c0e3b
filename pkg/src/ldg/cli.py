"""Command line entry point: ``ldg <subcommand>``.

Exit codes: 0 success, 1 invalid configuration, 2 solver failure,
3 analysis failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ANALYSIS = 0, 1, 2, 3


def _cap_threads():
    cap = os.environ.get("LDG_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


# -- the full pipeline -------------------------------------------------------------

def _boundary_values(cfg, grid):
    import numpy as np

    from .domain import boundary_hedgehog, boundary_uniaxial
    from .errors import ConfigInvalid

    if cfg.bc.type == "hedgehog":
        return boundary_hedgehog(grid)
    try:
        director = np.load(cfg.bc.file)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read director file: {exc}") from exc
    if director.shape != grid.shape + (3,):
        raise ConfigInvalid(f"director array has shape {director.shape}, "
                            f"expected {grid.shape + (3,)}")
    return boundary_uniaxial(grid, director)


def _solve(cfg, field0, lam, mu, opts):
    from . import minimize as mn

    stages = []
    if cfg.solver.mu_ladder:
        for m, f, rep in mn.mu_continuation(field0, lam, cfg.solver.mu_ladder, opts):
            stages.append(("mu", m, f, rep))
    elif mu is not None:
        f, rep = mn.minimize_unconstrained(field0, lam, mu, opts)
        stages.append(("mu", mu, f, rep))
    else:
        f, rep = mn.minimize_constrained(field0, lam, opts)
        stages.append(("constrained", None, f, rep))
    if cfg.solver.eps_ladder:
        anchor = stages[-1][2]
        if stages[-1][0] != "constrained":
            anchor = mn.renormalized(anchor)
        for eps, f, rep in mn.minimize_gl(anchor, lam, cfg.solver.eps_ladder, opts):
            stages.append(("eps", eps, f, rep))
    return stages


def run(cfg, out_dir=None) -> int:
    """Minimize, analyze and export according to a RunConfig; returns an exit code."""
    import numpy as np

    from . import __version__
    from . import io
    from . import minimize as mn
    from . import topology as tp
    from .domain import DomainSpec, Hole, build_grid
    from .energy import dyadic_radii, energy_constrained, monotonicity_scan
    from .errors import (ConfigInvalid, EmptyLevelSet, LdgError, LineSearchStalled,
                         NoConvergence)

    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    try:
        spec = DomainSpec(outer_radius=cfg.domain.radius,
                          holes=tuple(Hole(tuple(h[:3]), h[3]) for h in cfg.domain.holes),
                          shape=cfg.domain.shape)
        grid = build_grid(spec, cfg.grid.n)
        bc = _boundary_values(cfg, grid)
        lam, mu = cfg.params.reduced()
        if cfg.grid.coarse_n and cfg.bc.type != "hedgehog":
            raise ConfigInvalid("coarse_n needs boundary data defined at every size")
    except ConfigInvalid:
        raise
    except LdgError as exc:
        raise ConfigInvalid(str(exc)) from exc
    opts = mn.SolverOptions(tol=cfg.solver.tol, max_iters=cfg.solver.max_iters,
                            noise_amplitude=cfg.solver.noise_amplitude, seed=cfg.solver.seed)
    timings["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        if cfg.grid.coarse_n:
            cgrid = build_grid(spec, cfg.grid.coarse_n)
            cbc = _boundary_values(cfg, cgrid)
            c0 = mn.initial_guess(cgrid, cbc, opts.noise_amplitude, opts.seed)
            cstages = [st for st in _solve(cfg, c0, lam, mu, opts) if st[0] != "eps"]
            field0 = mn.resample(cstages[-1][2], grid, bc)
            if cstages[-1][0] == "constrained":
                field0 = mn.renormalized(field0)
        else:
            field0 = mn.initial_guess(grid, bc, opts.noise_amplitude, opts.seed)
        stages = _solve(cfg, field0, lam, mu, opts)
    except (LineSearchStalled, NoConvergence) as exc:
        io.write_json(out / "error.json", {"stage": "solve", "error": type(exc).__name__,
                                           "message": str(exc)})
        return EXIT_SOLVER
    timings["solve"] = time.perf_counter() - t0

    final = stages[-1][2]
    io.write_field(out / "field.vtk", final)
    io.write_json(out / "solve_report.json",
                  [{"stage": k, "parameter": p, **rep.as_dict(),
                    "energy_trace": [[i, e] for i, e in rep.energy_trace[:: max(1, len(rep.energy_trace) // 200)]]}
                   for k, p, _, rep in stages])

    t0 = time.perf_counter()
    topo = {}
    try:
        biax = tp.biaxiality_field(final)
        io.write_scalar_field(out / "biaxiality.vtk", grid, "beta", biax.beta)
        levels = {}
        for t in cfg.analysis.levels:
            try:
                mesh = tp.extract_level_set(biax, t)
            except EmptyLevelSet:
                levels[f"{t:g}"] = {"empty": True}
                continue
            io.write_obj(out / f"level_{t:g}.obj", mesh.vertices, mesh.faces)
            mesh.write_component_csv(out / f"level_{t:g}_components.csv")
            levels[f"{t:g}"] = {"empty": False,
                                "components": [c.as_dict() for c in mesh.components],
                                "scan": {f"{k:g}": v for k, v in tp.level_scan(biax, t).items()}}
        final_unit = final if stages[-1][0] == "constrained" else mn.renormalized(final)
        flags = tp.hypotheses(final_unit, cfg.analysis.degree_level)
        report = tp.region_report(biax, cfg.analysis.t1, cfg.analysis.t2)
        report.attainment = tp.attainment_check(biax, flags)
        io.write_json(out / "region_report.json", report.as_dict())
        topo = {"levels": levels, "region": report.as_dict(), "hypotheses": flags,
                "beta_bar": biax.beta_bar, "beta_0": biax.beta_0}
        mono = []
        for k, x0 in enumerate(cfg.analysis.monotonicity_points):
            room = -float(spec.signed_distance(np.asarray([x0]))[0])
            radii = dyadic_radii(0.9 * room, cfg.analysis.monotonicity_radii)
            scan = monotonicity_scan(final_unit, lam, x0, radii)
            scan.write_csv(out / f"monotonicity_{k}.csv")
            mono.append({"center": list(x0), "max_relative_drop": scan.max_relative_drop()})
        topo["monotonicity"] = mono
    except LdgError as exc:
        io.write_json(out / "error.json", {"stage": "analysis", "error": type(exc).__name__,
                                           "message": str(exc)})
        return EXIT_ANALYSIS
    timings["analysis"] = time.perf_counter() - t0

    rep = stages[-1][3]
    energy = rep.energy.as_dict()
    if stages[-1][0] != "constrained":
        energy["e_lambda_renormalized"] = energy_constrained(mn.renormalized(final), lam).total
    summary = {"version": __version__, "config_echo": cfg.echo(), "energy": energy,
               "min_norm": rep.min_norm, "topology": topo, "timings": timings}
    io.write_json(out / "summary.json", summary)
    return EXIT_OK


# -- subcommands ---------------------------------------------------------------------

def cmd_minimize(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    if args.n:
        cfg.grid.n = args.n
    return run(cfg, args.out)


def cmd_hedgehog(args) -> int:
    from . import io
    from .domain import DomainSpec, build_grid
    from .errors import NoConvergence
    from .hedgehog import assemble_field, solve_profile

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        prof = solve_profile(args.lam, args.mu, args.nr)
    except NoConvergence as exc:
        print(exc, file=sys.stderr)
        return EXIT_SOLVER
    prof.write_csv(out / "profile.csv")
    info = {"lam": prof.lam, "mu": prof.mu, "nr": len(prof.r), "residual": prof.residual,
            "s_half": float(prof(0.5))}
    if args.n:
        f = assemble_field(prof, build_grid(DomainSpec(), args.n))
        io.write_field(out / "hedgehog.vtk", f)
    io.write_json(out / "profile.json", info)
    return EXIT_OK


def cmd_topology(args) -> int:
    from . import io
    from . import minimize as mn
    from . import topology as tp
    from .errors import LdgError

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        field = io.read_field(args.field)
    except (OSError, ValueError, LdgError) as exc:
        print(f"cannot read field: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        biax = tp.biaxiality_field(field)
        levels = {}
        for t in _floats(args.levels):
            try:
                mesh = tp.extract_level_set(biax, t)
            except tp.EmptyLevelSet:
                levels[f"{t:g}"] = {"empty": True}
                continue
            io.write_obj(out / f"level_{t:g}.obj", mesh.vertices, mesh.faces)
            mesh.write_component_csv(out / f"level_{t:g}_components.csv")
            levels[f"{t:g}"] = {"empty": False,
                                "components": [c.as_dict() for c in mesh.components]}
        report = tp.region_report(biax, args.t1, args.t2)
        report.attainment = tp.attainment_check(biax, tp.hypotheses(mn.renormalized(field)))
        data = report.as_dict()
        data["levels"] = levels
        io.write_json(out / "topology_report.json", data)
    except LdgError as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_stability(args) -> int:
    from . import io
    from .errors import NoConvergence
    from .hedgehog import instability_sweep

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        rep = instability_sweep(args.lam, _floats(args.mu_ladder), _floats(args.delta_ladder),
                                args.n)
    except NoConvergence as exc:
        print(exc, file=sys.stderr)
        return EXIT_SOLVER
    rep.write_csv(out / "sweep.csv")
    io.write_json(out / "sweep.json", rep.as_dict())
    return EXIT_OK


def cmd_monotonicity(args) -> int:
    import numpy as np

    from . import io
    from . import minimize as mn
    from .energy import dyadic_radii, monotonicity_scan
    from .errors import LdgError

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        field = mn.renormalized(io.read_field(args.field))
    except (OSError, ValueError, LdgError) as exc:
        print(f"cannot read field: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    x0 = np.array(_floats(args.center))
    try:
        room = -float(field.grid.spec.signed_distance(x0[None])[0])
        radii = _floats(args.radii) if args.radii else dyadic_radii(0.9 * room, 4)
        scan = monotonicity_scan(field, args.lam, x0, radii)
    except LdgError as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    scan.write_csv(out / "monotonicity.csv")
    io.write_json(out / "monotonicity.json",
                  {"center": x0, "radii": scan.radii, "scaled_energy": scan.scaled_energy,
                   "max_relative_drop": scan.max_relative_drop()})
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    failures = run_all(verbose=not args.quiet)
    return EXIT_OK if not failures else EXIT_ANALYSIS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldg", description="Landau-de Gennes Q-tensor solver")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("minimize", help="run the full pipeline from a config file")
    m.add_argument("--config", required=True)
    m.add_argument("--out", default=None)
    m.add_argument("--n", type=int, default=0, help="override grid.n")
    m.set_defaults(func=cmd_minimize)

    h = sub.add_parser("hedgehog", help="radial hedgehog profile")
    h.add_argument("--lambda", dest="lam", type=float, default=1.0)
    h.add_argument("--mu", type=float, required=True)
    h.add_argument("--nr", type=int, default=2048)
    h.add_argument("--n", type=int, default=0, help="also write the 3D field on an n^3 grid")
    h.add_argument("--out", default="hedgehog_out")
    h.set_defaults(func=cmd_hedgehog)

    t = sub.add_parser("topology", help="level sets and region report of a stored field")
    t.add_argument("--field", required=True)
    t.add_argument("--levels", default="-0.9,0,0.9")
    t.add_argument("--t1", type=float, default=-0.8)
    t.add_argument("--t2", type=float, default=0.8)
    t.add_argument("--out", default="topology_out")
    t.set_defaults(func=cmd_topology)

    s = sub.add_parser("stability", help="second-variation sweep around the hedgehog")
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--mu-ladder", default="50,200,800,3200")
    s.add_argument("--delta-ladder", default="1,0.5,0.25,0.1")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--out", default="stability_out")
    s.set_defaults(func=cmd_stability)

    o = sub.add_parser("monotonicity", help="scaled ball energies around a point")
    o.add_argument("--field", required=True)
    o.add_argument("--lambda", dest="lam", type=float, default=1.0)
    o.add_argument("--center", default="0,0,0")
    o.add_argument("--radii", default="")
    o.add_argument("--out", default="monotonicity_out")
    o.set_defaults(func=cmd_monotonicity)

    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--quiet", action="store_true")
    st.set_defaults(func=cmd_selftest)
    return p


_LIST_FLAGS = ("--levels", "--center", "--radii", "--mu-ladder", "--delta-ladder")


def _glue_list_flags(argv):
    # "--levels -0.9,0,0.9" would otherwise read the value as an option
    out, it = [], iter(argv)
    for a in it:
        if a in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    _cap_threads()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_list_flags(argv))
    from .errors import ConfigInvalid

    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
