import numpy as np
import pytest

from nsfilter import __version__
from nsfilter.cli import main, parse_sweep_value
from nsfilter.config import ExperimentConfig
from nsfilter.errors import ConfigError, MissingInputError, SchemaError
from nsfilter.records import read_records, read_table

SMALL = """\
grid.n=16
solver.t_spin=1
observation.h=0.1
observation.steps=4
output.tracked_modes=1,1;2,2
continuous.T=0.5
continuous.record_every=0.1
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def run(cfg, out, *cmd, extra=()):
    return main([*cmd, "--config", str(cfg), "--out", str(out), "--quiet", *extra])


def pipeline(cfg, out, extra=()):
    for cmd in ("truth", "observe", "filter", "bounds"):
        assert run(cfg, out, cmd, extra=extra) == 0


def test_pipeline_is_byte_identical(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    pipeline(small_cfg, a)
    pipeline(small_cfg, b)
    names = ["truth.csv", "observations.csv", "filter.csv", "bounds.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    c = tmp_path / "c"
    pipeline(small_cfg, c, extra=("--seed", "11"))
    assert (a / "truth.csv").read_bytes() != (c / "truth.csv").read_bytes()


def test_headers_carry_config_and_version(small_cfg, tmp_path):
    pipeline(small_cfg, tmp_path)
    for name in ("truth.csv", "observations.csv", "filter.csv", "bounds.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[0] == f"# nsfilter {__version__}"
        assert "# grid.n=16" in lines
        assert "# filter.eta=0.04" in lines


def test_filter_csv_schema(small_cfg, tmp_path):
    pipeline(small_cfg, tmp_path)
    t = read_records(tmp_path / "filter.csv")
    assert t.columns[:6] == ["step", "time", "err_sq_H0", "err_H1", "lower_bound", "upper_bound"]
    assert t.tracked_modes == [(1, 1), (2, 2)]
    np.testing.assert_array_equal(t.column("step"), np.arange(5))
    assert np.all(np.isfinite(t.column("upper_bound")))


def test_seed_flag_overrides_all_seeds(small_cfg, tmp_path):
    assert run(small_cfg, tmp_path, "truth", extra=("--seed", "7")) == 0
    text = (tmp_path / "truth.csv").read_text()
    assert "# seeds.truth=7" in text and "# seeds.noise=8" in text and "# seeds.init=9" in text


def test_bounds_coincide_without_model_weight(small_cfg, tmp_path):
    # eta = 0 gives B = 0, where the lower bound equals the complete-observation upper bound
    assert run(small_cfg, tmp_path, "bounds", extra=("--set", "filter.eta=0")) == 0
    t = read_table(tmp_path / "bounds.csv", ["lower_bound", "upper_bound", "trace_gamma"])
    np.testing.assert_array_equal(t.column("lower_bound"), t.column("upper_bound"))
    np.testing.assert_array_equal(t.column("lower_bound"), t.column("trace_gamma"))


def test_continuous_filter_output(small_cfg, tmp_path):
    extra = ("--set", "filter.mode=continuous")
    assert run(small_cfg, tmp_path, "truth", extra=extra) == 0
    assert run(small_cfg, tmp_path, "filter", extra=extra) == 0
    path = tmp_path / "continuous.csv"
    t = read_records(path)
    assert t.is_continuous
    assert len(t.rows) == 6
    assert np.all(np.isnan(t.column("lower_bound")))
    assert np.all(t.column("rel_err_l2") > 0)
    first = path.read_bytes()
    assert run(small_cfg, tmp_path, "filter", extra=extra) == 0
    assert path.read_bytes() == first


def test_sweep_writes_one_row_per_value(small_cfg, tmp_path):
    assert run(small_cfg, tmp_path, "sweep", extra=("--param", "eta", "--values", "1sigma", "0.4")) == 0
    t = read_table(tmp_path / "sweep.csv", ["parameter", "value", "classification"])
    assert [r[1] for r in t.rows] == ["1sigma", "0.4"]
    assert all(r[-1] in ("stable", "marginal", "diverged") for r in t.rows)


def test_sweep_parallel_matches_serial(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ("--param", "alpha", "--values", "1", "-1")
    assert run(small_cfg, a, "sweep", extra=args) == 0
    assert run(small_cfg, b, "sweep", extra=(*args, "--jobs", "2")) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_empty_sweep_writes_header_only(small_cfg, tmp_path):
    assert run(small_cfg, tmp_path, "sweep", extra=("--param", "eta")) == 0
    t = read_table(tmp_path / "sweep.csv", ["parameter"])
    assert t.rows == []


def test_sweep_value_parsing():
    cfg = ExperimentConfig()
    assert parse_sweep_value("eta", "10sigma", cfg) == pytest.approx(0.4)
    assert parse_sweep_value("eta", "sigma", cfg) == 0.04
    assert parse_sweep_value("lambda", "inf", cfg) == float("inf")
    with pytest.raises(ConfigError):
        parse_sweep_value("eta", "lots", cfg)


def test_plot_emits_script(small_cfg, tmp_path):
    pipeline(small_cfg, tmp_path)
    assert run(small_cfg, tmp_path, "plot", extra=(str(tmp_path / "filter.csv"), "--no-render")) == 0
    assert (tmp_path / "filter_plot.py").exists()


@pytest.mark.parametrize(
    "cmd, extra, expect",
    [
        ("observe", (), MissingInputError.exit_code),
        ("filter", (), MissingInputError.exit_code),
        ("truth", ("--set", "filter.eta=-1"), ConfigError.exit_code),
        ("truth", ("--set", "nonsense"), ConfigError.exit_code),
    ],
)
def test_exit_codes(small_cfg, tmp_path, capsys, cmd, extra, expect):
    assert run(small_cfg, tmp_path, cmd, extra=extra) == expect
    err = capsys.readouterr().err
    assert err.startswith("nsfilter: ")


def test_missing_config_exit_code(tmp_path):
    assert main(["truth", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]) == 3


def test_schema_error_exit_code(small_cfg, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("step,time\n0,0.0\n")
    assert run(small_cfg, tmp_path, "plot", extra=(str(bad), "--no-render")) == SchemaError.exit_code


def test_grid_mismatch_is_schema_error(small_cfg, tmp_path):
    assert run(small_cfg, tmp_path, "truth") == 0
    assert run(small_cfg, tmp_path, "observe", extra=("--set", "grid.L=3")) == SchemaError.exit_code
