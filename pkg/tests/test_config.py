import math

import pytest

from nsfilter.config import ExperimentConfig, load_config, parse_config
from nsfilter.errors import ConfigError, MissingInputError


def test_empty_file_gives_reference_setup(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == ExperimentConfig()
    assert (cfg.grid.n, cfg.grid.L) == (32, 2.0)
    assert (cfg.solver.nu, cfg.solver.dt, cfg.solver.forcing) == (0.01, 0.005, (5, 5))
    assert (cfg.observation.sigma, cfg.observation.h) == (0.04, 0.5)
    assert math.isinf(cfg.observation.lam)
    assert cfg.filter.ell is None
    assert cfg.steps_per_obs == 100


def test_missing_file():
    with pytest.raises(MissingInputError):
        load_config("/nonexistent/path.cfg")


def test_divisibility():
    assert parse_config("observation.h=0.3").steps_per_obs == 60
    with pytest.raises(ConfigError, match="observation.h"):
        parse_config("observation.h=0.302\nsolver.dt=0.004")
    with pytest.raises(ConfigError, match="solver.t_spin"):
        parse_config("solver.t_spin=0.0123")
    with pytest.raises(ConfigError, match="continuous.T"):
        parse_config("continuous.T=1.0001")


def test_parsing_types_and_comments():
    cfg = parse_config(
        """
        # comment line
        observation.lambda = 100   # multiple of lambda1
        filter.eta=0.4
        filter.ell=auto
        output.tracked_modes=1,1;2,-3
        continuous.dt=0.0025
        """
    )
    assert cfg.observation.lam == 100.0
    assert cfg.filter.eta == 0.4
    assert cfg.filter.ell is None
    assert cfg.output.tracked_modes == ((1, 1), (2, -3))
    assert cfg.continuous_dt == 0.0025
    assert parse_config("observation.lambda=inf").observation.lam == math.inf


@pytest.mark.parametrize(
    "text",
    [
        "nosuch.key=1",
        "filter.nosuch=1",
        "filter.eta",
        "filter.eta=abc",
        "observation.lambda=0",
        "observation.lambda=-4",
        "output.tracked_modes=16,0",
        "solver.forcing=0,0",
        "filter.mode=smoother",
        "observation.units=furlongs",
        "grid.n=31",
        "solver.backend=gpu",
        "filter.eta=-0.1",
        "continuous.omega=-1",
    ],
)
def test_invalid_configs_raise_named_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_eta_zero_and_omega_zero_are_accepted():
    cfg = parse_config("filter.eta=0\ncontinuous.omega=0")
    assert cfg.filter.eta == 0.0 and cfg.continuous.omega == 0.0


def test_items_round_trip():
    cfg = parse_config("filter.eta=0.4\nobservation.lambda=25\noutput.tracked_modes=1,2")
    text = "\n".join(f"{k}={v}" for k, v in cfg.items())
    assert parse_config(text) == cfg
    keys = [k for k, _ in cfg.items()]
    assert "observation.lambda" in keys and "filter.ell" in keys


def test_with_values():
    cfg = ExperimentConfig().with_values(**{"filter.eta": 4.0, "seeds__truth": 9})
    assert cfg.filter.eta == 4.0 and cfg.seeds.truth == 9
