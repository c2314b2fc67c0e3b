import pytest

from ldg.config import RunConfig, load_config, parse_config
from ldg.errors import ConfigInvalid

MINIMAL = """
[grid]
n = 20
[params]
lambda = 1.0
"""


def test_parse_minimal():
    cfg = parse_config(MINIMAL)
    assert isinstance(cfg, RunConfig)
    assert cfg.grid.n == 20 and cfg.params.lam == 1.0 and cfg.params.mu is None
    assert cfg.params.reduced() == (1.0, None)
    assert cfg.bc.type == "hedgehog" and cfg.analysis.levels == [-0.9, 0.0, 0.9]


def test_parse_full():
    text = """
    [domain]
    radius = 1.0
    holes = 0.4, 0, 0, 0.2 ; -0.4, 0, 0, 0.2
    [grid]
    n = 48
    coarse_n = 24
    [params]
    lambda = 1
    mu = 50   # inline comment
    [solver]
    tol = 1e-4
    mu_ladder = 50, 200, 800
    eps_ladder = 0.2, 0.1
    [analysis]
    levels = -0.5, 0.5
    monotonicity_points = 0,0,0.3 ; 0,0.3,0
    [output]
    directory = runs/a
    """
    cfg = parse_config("\n".join(line.strip() for line in text.splitlines()))
    assert cfg.domain.holes == [(0.4, 0, 0, 0.2), (-0.4, 0, 0, 0.2)]
    assert cfg.solver.mu_ladder == [50, 200, 800] and cfg.solver.eps_ladder == [0.2, 0.1]
    assert cfg.analysis.monotonicity_points == [(0, 0, 0.3), (0, 0.3, 0)]
    assert cfg.params.mu == 50 and cfg.output.directory == "runs/a"
    assert cfg.echo()["grid"] == {"n": 48, "coarse_n": 24}


def test_physical_parameters_reduce():
    cfg = parse_config("[params]\na2 = 1\nb2 = 1\nc2 = 1\nL = 1\n")
    lam, mu = cfg.params.reduced()
    assert lam > 0 and mu > 0


@pytest.mark.parametrize("text", [
    MINIMAL + "a2 = 1\n",                       # both parameter sets
    "[params]\nmu = 10\n",                      # no lambda
    "[params]\nlambda = -1\n",
    "[params]\nlambda = 1\nmu = 0\n",
    "[params]\na2 = 1\nb2 = 1\n",               # incomplete physical set
    MINIMAL + "[grid]\nsize = 3\n",             # duplicate section
    MINIMAL.replace("n = 20", "nn = 20"),       # unknown key
    MINIMAL + "[extras]\nx = 1\n",              # unknown section
    MINIMAL.replace("n = 20", "n = twenty"),
    MINIMAL.replace("n = 20", "n = 8"),
    MINIMAL + "[solver]\nmu_ladder = 200, 50\n",
    MINIMAL + "[solver]\neps_ladder = 0.1, 0.2\n",
    MINIMAL + "[analysis]\nlevels = 0, 1.0\n",
    MINIMAL + "[analysis]\nt1 = 0.5\nt2 = 0.1\n",
    MINIMAL + "[bc]\ntype = uniaxial-file\n",
    MINIMAL + "[bc]\ntype = planar\n",
    MINIMAL + "[domain]\nholes = 0.4, 0, 0\n",
    MINIMAL + "[domain]\nshape = torus\n",
    "not a config",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigInvalid):
        parse_config(text)


def test_load_config_resolves_relative_bc_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(MINIMAL + "[bc]\ntype = uniaxial-file\nfile = director.npy\n")
    cfg = load_config(p)
    assert cfg.bc.file == str(tmp_path / "director.npy")
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.cfg")
