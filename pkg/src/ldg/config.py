"""Run configuration: sectioned key = value files parsed into dataclasses.

Unknown sections or keys are errors, since a silent typo would otherwise
change a long run without notice.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .errors import BadParams, ConfigInvalid
from .qtensor import params_from_physical


@dataclass
class DomainConfig:
    radius: float = 1.0
    holes: list = field(default_factory=list)   # [(x, y, z, r), ...]
    shape: str = "ball"


@dataclass
class GridConfig:
    n: int = 32
    coarse_n: int = 0          # > 0: solve at this size first and transfer the result


@dataclass
class ParamsConfig:
    lam: Optional[float] = None
    mu: Optional[float] = None
    a2: Optional[float] = None
    b2: Optional[float] = None
    c2: Optional[float] = None
    L: Optional[float] = None

    def reduced(self) -> tuple:
        """(lam, mu) with mu None for the sphere-constrained problem."""
        if self.a2 is not None:
            p = params_from_physical(self.a2, self.b2, self.c2, self.L)
            return p.lam, p.mu
        return self.lam, self.mu


@dataclass
class BCConfig:
    type: str = "hedgehog"
    file: Optional[str] = None


@dataclass
class SolverConfig:
    tol: float = 1e-5
    max_iters: int = 50000
    noise_amplitude: float = 0.1
    seed: int = 0
    mu_ladder: list = field(default_factory=list)
    eps_ladder: list = field(default_factory=list)


@dataclass
class AnalysisConfig:
    levels: list = field(default_factory=lambda: [-0.9, 0.0, 0.9])
    t1: float = -0.8
    t2: float = 0.8
    monotonicity_points: list = field(default_factory=list)   # [(x, y, z), ...]
    monotonicity_radii: int = 4
    degree_level: int = 4


@dataclass
class OutputConfig:
    directory: str = "out"


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    bc: BCConfig = field(default_factory=BCConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def echo(self) -> dict:
        return asdict(self)


def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _tuples(text, size):
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = [float(x) for x in chunk.split(",")]
        if len(vals) != size:
            raise ConfigInvalid(f"expected {size} numbers in {chunk.strip()!r}")
        out.append(tuple(vals))
    return out


_SCHEMA = {
    "domain": {"radius": float, "holes": lambda s: _tuples(s, 4), "shape": str},
    "grid": {"n": int, "coarse_n": int},
    "params": {"lambda": float, "mu": float, "a2": float, "b2": float, "c2": float,
               "l": float},
    "bc": {"type": str, "file": str},
    "solver": {"tol": float, "max_iters": int, "noise_amplitude": float, "seed": int,
               "mu_ladder": _floats, "eps_ladder": _floats},
    "analysis": {"levels": _floats, "t1": float, "t2": float,
                 "monotonicity_points": lambda s: _tuples(s, 3),
                 "monotonicity_radii": int, "degree_level": int},
    "output": {"directory": str},
}

_RENAME = {("params", "lambda"): "lam", ("params", "l"): "L"}


def parse_config(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid(str(exc)) from exc
    cfg = RunConfig()
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigInvalid(f"unknown section [{section}]")
        target = getattr(cfg, section)
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigInvalid(f"unknown key {key!r} in [{section}]")
            try:
                value = _SCHEMA[section][key](raw.strip())
            except ValueError as exc:
                raise ConfigInvalid(f"bad value for {section}.{key}: {raw!r}") from exc
            setattr(target, _RENAME.get((section, key), key), value)
    if base_dir is not None and cfg.bc.file and not Path(cfg.bc.file).is_absolute():
        cfg.bc.file = str(Path(base_dir) / cfg.bc.file)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {p}: {exc}") from exc
    return parse_config(text, p.parent)


def validate(cfg: RunConfig):
    p = cfg.params
    reduced = p.lam is not None or p.mu is not None
    physical = [p.a2, p.b2, p.c2, p.L]
    if reduced and any(x is not None for x in physical):
        raise ConfigInvalid("give either lambda/mu or a2, b2, c2, L, not both")
    if not reduced:
        if any(x is None for x in physical):
            raise ConfigInvalid("missing parameters: need lambda (and mu) or all of a2, b2, c2, L")
        try:
            params_from_physical(*physical)
        except BadParams as exc:
            raise ConfigInvalid(str(exc)) from exc
    else:
        if p.lam is None or p.lam < 0:
            raise ConfigInvalid("lambda must be given and nonnegative")
        if p.mu is not None and p.mu <= 0:
            raise ConfigInvalid("mu must be positive")
    if cfg.solver.mu_ladder and any(b <= a for a, b in zip(cfg.solver.mu_ladder,
                                                           cfg.solver.mu_ladder[1:])):
        raise ConfigInvalid("mu_ladder must be strictly increasing")
    if cfg.solver.eps_ladder and any(b >= a for a, b in zip(cfg.solver.eps_ladder,
                                                            cfg.solver.eps_ladder[1:])):
        raise ConfigInvalid("eps_ladder must be strictly decreasing")
    if any(not -1 < t < 1 for t in cfg.analysis.levels):
        raise ConfigInvalid("analysis levels must lie in (-1, 1)")
    if not -1 <= cfg.analysis.t1 < cfg.analysis.t2 < 1:
        raise ConfigInvalid("need -1 <= t1 < t2 < 1")
    if cfg.bc.type not in ("hedgehog", "uniaxial-file"):
        raise ConfigInvalid(f"unknown bc type {cfg.bc.type!r}")
    if cfg.bc.type == "uniaxial-file" and not cfg.bc.file:
        raise ConfigInvalid("bc.file is required for uniaxial-file boundary data")
    if cfg.domain.shape not in ("ball", "cube"):
        raise ConfigInvalid(f"unknown domain shape {cfg.domain.shape!r}")
    if cfg.grid.n < 16 or (cfg.grid.coarse_n and not 16 <= cfg.grid.coarse_n < cfg.grid.n):
        raise ConfigInvalid("grid sizes must be at least 16 and coarse_n below n")
    if not (cfg.solver.tol > 0 and cfg.solver.max_iters >= 0 and
            math.isfinite(cfg.solver.noise_amplitude) and cfg.solver.noise_amplitude >= 0):
        raise ConfigInvalid("invalid solver options")
