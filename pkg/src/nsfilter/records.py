"""CSV persistence of step records, output headers, and regime classification.

Every file starts with ``#`` comment lines: the library version, the command
that produced it, and the fully resolved configuration. Floats are written
with ``repr`` so that a fixed configuration gives byte-identical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .config import ClassifyConfig, ExperimentConfig
from .discrete import StepRecord
from .errors import SchemaError

BASE_COLUMNS = ["step", "time", "err_sq_H0", "err_H1", "lower_bound", "upper_bound"]
MODE_FIELDS = ["k1", "k2", "truth_re", "truth_im", "est_re", "est_im", "obs_re", "obs_im"]
SUMMARY_COLUMNS = [
    "parameter", "value", "median_err_sq_H0", "final_mean_err_sq_H0", "trace_gamma",
    "lower_bound", "median_upper_bound", "median_rel_err_l2", "final_rel_err_l2", "classification",
]


def header_lines(cfg: ExperimentConfig, command: str, extra: Iterable[tuple[str, str]] = ()) -> list[str]:
    """Comment lines (without the leading ``#``) describing how a file was produced."""
    lines = [f"nsfilter {__version__}", f"command={command}"]
    lines += [f"{k}={v}" for k, v in extra]
    lines += [f"{k}={v}" for k, v in cfg.items()]
    return lines


def write_header(fh, lines: Sequence[str]) -> None:
    for line in lines:
        fh.write(f"# {line}\n")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def record_columns(n_modes: int, continuous: bool = False) -> list[str]:
    cols = list(BASE_COLUMNS)
    if continuous:
        cols.append("rel_err_l2")
    for i in range(1, n_modes + 1):
        cols += [f"m{i}_{f}" for f in MODE_FIELDS]
    return cols


def _record_row(rec: StepRecord, continuous: bool) -> list[str]:
    row = [str(rec.step), fmt(rec.time), fmt(rec.err_sq_H0), fmt(rec.err_H1),
           fmt(rec.lower_bound), fmt(rec.upper_bound)]
    if continuous:
        row.append(fmt(rec.rel_err_l2))
    for m in rec.modes:
        obs = (None, None) if m.observation is None else (m.observation.real, m.observation.imag)
        row += [str(m.k[0]), str(m.k[1]), fmt(m.truth.real), fmt(m.truth.imag),
                fmt(m.estimate.real), fmt(m.estimate.imag), fmt(obs[0]), fmt(obs[1])]
    return row


def write_records(path: str | Path, records: Sequence[StepRecord], header: Sequence[str],
                  continuous: bool = False) -> None:
    n_modes = len(records[0].modes) if records else 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_header(fh, header)
        fh.write(",".join(record_columns(n_modes, continuous)) + "\n")
        for rec in records:
            fh.write(",".join(_record_row(rec, continuous)) + "\n")


@dataclass
class Table:
    """A parsed CSV: header metadata, column names and string cells."""

    meta: dict[str, str]
    columns: list[str]
    rows: list[list[str]]

    def column(self, name: str) -> np.ndarray:
        """Numeric column with empty cells as NaN."""
        if name not in self.columns:
            raise SchemaError(f"missing column {name!r}")
        i = self.columns.index(name)
        return np.array([float(r[i]) if r[i] != "" else math.nan for r in self.rows])

    @property
    def tracked_modes(self) -> list[tuple[int, int]]:
        out = []
        i = 1
        while f"m{i}_k1" in self.columns and self.rows:
            out.append((int(self.column(f"m{i}_k1")[0]), int(self.column(f"m{i}_k2")[0])))
            i += 1
        return out

    @property
    def is_continuous(self) -> bool:
        return "rel_err_l2" in self.columns


def read_table(path: str | Path, required: Sequence[str] = ()) -> Table:
    p = Path(path)
    if not p.exists():
        from .errors import MissingInputError

        raise MissingInputError(f"input file not found: {p}")
    meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows = []
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            if columns is None:
                columns = line.split(",")
                continue
            cells = line.split(",")
            if len(cells) != len(columns):
                raise SchemaError(f"{p}: row has {len(cells)} cells, expected {len(columns)}")
            rows.append(cells)
    if columns is None:
        raise SchemaError(f"{p}: no column header")
    missing = [c for c in required if c not in columns]
    if missing:
        raise SchemaError(f"{p}: missing columns {', '.join(missing)}")
    return Table(meta, columns, rows)


def read_records(path: str | Path) -> Table:
    table = read_table(path, BASE_COLUMNS)
    n_extra = len(table.columns) - len(BASE_COLUMNS) - table.is_continuous
    if n_extra % len(MODE_FIELDS):
        raise SchemaError(f"{path}: tracked-mode columns are incomplete")
    expected = record_columns(n_extra // len(MODE_FIELDS), table.is_continuous)
    if table.columns != expected:
        raise SchemaError(f"{path}: unexpected column layout")
    return table


# classification ------------------------------------------------------------

def first_below(err: np.ndarray, bound: np.ndarray) -> int | None:
    idx = np.flatnonzero(err < bound)
    return int(idx[0]) if idx.size else None


def stability_test(err: np.ndarray, bound: np.ndarray, c: ClassifyConfig) -> bool:
    """Falls below the bound within ``hit_within`` steps and stays below on ``stay_fraction`` of steps from ``stay_from``."""
    hit = first_below(err, bound)
    if hit is None or hit > c.hit_within or len(err) <= c.stay_from:
        return False
    return bool(np.mean(err[c.stay_from:] < bound[c.stay_from:]) >= c.stay_fraction)


def classify_discrete(err: np.ndarray, bound: np.ndarray, c: ClassifyConfig) -> str:
    """``stable`` if the stability test passes, ``diverged`` if the late median error exceeds
    ``diverged_ratio`` times the bound (or is non-finite), ``marginal`` otherwise."""
    if not np.isfinite(err).all():
        return "diverged"
    if stability_test(err, bound, c):
        return "stable"
    tail = slice(c.median_from, None) if len(err) > c.median_from else slice(None)
    if np.median(err[tail]) > c.diverged_ratio * np.median(bound[tail]):
        return "diverged"
    return "marginal"


def holds_below(rel: np.ndarray, threshold: float, stay_fraction: float) -> bool:
    """Reaches ``threshold`` and stays below it on ``stay_fraction`` of the later records."""
    hit = first_below(rel, np.full_like(rel, threshold))
    if hit is None:
        return False
    return bool(np.mean(rel[hit:] < threshold) >= stay_fraction)


def classify_continuous(rel: np.ndarray, c: ClassifyConfig) -> str:
    """``stable`` when the relative error reaches ``cont_small`` and holds it, ``bounded`` while it
    stays below ``cont_large``, ``diverged`` otherwise."""
    if not np.isfinite(rel).all():
        return "diverged"
    if holds_below(rel, c.cont_small, c.stay_fraction):
        return "stable"
    return "bounded" if rel.max() < c.cont_large else "diverged"


@dataclass
class SweepRow:
    parameter: str
    value: str
    median_err_sq_H0: float
    final_mean_err_sq_H0: float
    trace_gamma: float | None
    lower_bound: float | None
    median_upper_bound: float | None
    median_rel_err_l2: float | None
    final_rel_err_l2: float | None
    classification: str


def summarize(parameter: str, value: str, records: Sequence[StepRecord], c: ClassifyConfig,
              trace_gamma: float | None = None) -> SweepRow:
    err = np.array([r.err_sq_H0 for r in records])
    tail = err[c.median_from:] if len(err) > c.median_from else err
    final = err[-c.final_window:]
    if records and records[0].rel_err_l2 is not None:
        rel = np.array([r.rel_err_l2 for r in records])
        rtail = rel[c.median_from:] if len(rel) > c.median_from else rel
        return SweepRow(parameter, value, float(np.median(tail)), float(np.mean(final)), None, None, None,
                        float(np.median(rtail)), float(rel[-1]), classify_continuous(rel, c))
    ub = np.array([r.upper_bound for r in records])
    utail = ub[c.median_from:] if len(ub) > c.median_from else ub
    return SweepRow(parameter, value, float(np.median(tail)), float(np.mean(final)), trace_gamma,
                    records[0].lower_bound, float(np.median(utail)), None, None, classify_discrete(err, ub, c))


def write_summary(path: str | Path, rows: Sequence[SweepRow], header: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_header(fh, header)
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in rows:
            cells = [r.parameter, r.value] + [fmt(getattr(r, c)) for c in SUMMARY_COLUMNS[2:-1]] + [r.classification]
            fh.write(",".join(cells) + "\n")
