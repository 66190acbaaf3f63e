import numpy as np
import pytest

from nsfilter import __version__
from nsfilter.config import ClassifyConfig, ExperimentConfig
from nsfilter.discrete import ModeSample, StepRecord
from nsfilter.errors import MissingInputError, SchemaError
from nsfilter.plotting import emit, plot_script
from nsfilter.records import (
    classify_continuous,
    classify_discrete,
    header_lines,
    read_records,
    record_columns,
    stability_test,
    summarize,
    write_records,
)


def make_records(n, modes=1, continuous=False):
    out = []
    for j in range(n):
        ms = [ModeSample((i + 1, 1), 0.5 + 0.1j, 0.4 - 0.2j, None if j == 0 or continuous else 0.3 + 0j)
              for i in range(modes)]
        if continuous:
            out.append(StepRecord(j, 0.5 * j, 1.0 / (j + 1), 2.0, None, None, 0.1 / (j + 1), ms))
        else:
            out.append(StepRecord(j, 0.5 * j, 1.0 / (j + 1), 2.0, 0.1, 1.5, None, ms))
    return out


def test_columns():
    assert record_columns(0) == ["step", "time", "err_sq_H0", "err_H1", "lower_bound", "upper_bound"]
    cols = record_columns(2, continuous=True)
    assert cols[6] == "rel_err_l2"
    assert cols[7:9] == ["m1_k1", "m1_k2"]
    assert len(cols) == 7 + 16


def test_header_has_version_and_full_config():
    lines = header_lines(ExperimentConfig(), "filter")
    assert lines[0] == f"nsfilter {__version__}"
    assert "filter.eta=0.04" in lines
    assert "observation.lambda=inf" in lines


def test_write_read_round_trip(tmp_path):
    p = tmp_path / "r.csv"
    write_records(p, make_records(4, 2), ["nsfilter test"])
    t = read_records(p)
    assert t.tracked_modes == [(1, 1), (2, 1)]
    assert not t.is_continuous
    np.testing.assert_array_equal(t.column("err_sq_H0"), [1.0, 0.5, 1 / 3, 0.25])
    assert np.isnan(t.column("m1_obs_re")[0])
    text = p.read_text()
    assert "\r" not in text
    assert text.splitlines()[1].startswith("step,time,err_sq_H0,err_H1,lower_bound,upper_bound,m1_k1")


def test_continuous_rows_leave_bounds_empty(tmp_path):
    p = tmp_path / "c.csv"
    write_records(p, make_records(3, 1, continuous=True), [], continuous=True)
    t = read_records(p)
    assert t.is_continuous
    assert np.all(np.isnan(t.column("upper_bound")))
    assert p.read_text().splitlines()[1].split(",")[4:6] == ["", ""]


def test_reader_rejects_bad_files(tmp_path):
    with pytest.raises(MissingInputError):
        read_records(tmp_path / "absent.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("step,time\n0,0.0\n")
    with pytest.raises(SchemaError):
        read_records(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("step,time,err_sq_H0,err_H1,lower_bound,upper_bound\n0,0.0\n")
    with pytest.raises(SchemaError):
        read_records(ragged)


def test_classifiers():
    c = ClassifyConfig()
    bound = np.full(401, 1.5)
    stable = np.r_[10.0, np.full(400, 0.9)]
    assert stability_test(stable, bound, c)
    assert classify_discrete(stable, bound, c) == "stable"
    assert classify_discrete(np.full(401, 3.0), bound, c) == "marginal"
    assert classify_discrete(np.full(401, 8.0), bound, c) == "diverged"
    assert classify_discrete(np.r_[np.full(200, 1.0), np.nan, np.ones(200)], bound, c) == "diverged"
    late = np.r_[np.full(60, 5.0), np.full(341, 0.5)]
    assert not stability_test(late, bound, c)
    rel = np.r_[1.0, np.full(200, 0.05)]
    assert classify_continuous(rel, c) == "stable"
    assert classify_continuous(np.full(201, 0.8), c) == "bounded"
    assert classify_continuous(np.full(201, 20.0), c) == "diverged"


def test_summarize():
    c = ClassifyConfig(median_from=1, final_window=2)
    row = summarize("eta", "0.04", make_records(5), c, trace_gamma=1.5)
    assert row.median_err_sq_H0 == pytest.approx(np.median([0.5, 1 / 3, 0.25, 0.2]))
    assert row.final_mean_err_sq_H0 == pytest.approx(0.225)
    # five records are too few for the stability test
    assert row.classification == "marginal"
    crow = summarize("omega", "100", make_records(5, continuous=True), c)
    assert crow.final_rel_err_l2 == pytest.approx(0.02)
    assert crow.trace_gamma is None


def test_plot_panels(tmp_path):
    for modes, continuous, expect in [(3, False, 4), (0, False, 1), (2, True, 3)]:
        p = tmp_path / f"r{modes}{continuous}.csv"
        write_records(p, make_records(3, modes, continuous), [], continuous=continuous)
        script, panels = plot_script(read_records(p), "x.png")
        assert panels == expect
        compile(script, "plot", "exec")
        assert f"CONTINUOUS = {continuous}" in script


def test_plot_renders_image(tmp_path):
    pytest.importorskip("matplotlib")
    p = tmp_path / "r.csv"
    write_records(p, make_records(5, 3), [])
    script, image, panels = emit(p, tmp_path / "out")
    assert script.exists() and image.exists() and image.stat().st_size > 0
    assert panels == 4
