"""Command-line entry point: ``nsfilter {truth,observe,filter,bounds,sweep,plot}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__, experiment, kernels
from .config import ExperimentConfig, load_config
from .errors import ConfigError, MissingInputError, NsFilterError, SchemaError
from .observations import read_observations, read_trajectory, write_observations, write_trajectory
from .records import header_lines, read_records, summarize, write_header, write_records, write_summary

log = logging.getLogger("nsfilter")

TRUTH_FILE = "truth.csv"
OBS_FILE = "observations.csv"
FILTER_FILE = "filter.csv"
CONTINUOUS_FILE = "continuous.csv"
BOUNDS_FILE = "bounds.csv"
SWEEP_FILE = "sweep.csv"

SWEEP_KEYS = {
    "eta": "filter.eta",
    "alpha": "filter.alpha",
    "lambda": "observation.lambda",
    "omega": "continuous.omega",
    "sigma0": "continuous.sigma0",
}


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    overrides = {}
    for item in args.set or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = val.strip()
    if args.seed is not None:
        overrides.update({"seeds.truth": args.seed, "seeds.noise": args.seed + 1, "seeds.init": args.seed + 2})
    if overrides:
        cfg = cfg.with_values(**overrides)
    out = Path(args.out if args.out is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _header(cfg: ExperimentConfig, command: str, **extra) -> list[str]:
    backend = kernels.get_backend(None if cfg.solver.backend == "auto" else cfg.solver.backend).NAME
    return header_lines(cfg, command, [("backend", backend)] + list(extra.items()))


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInputError(f"required input {path} not found; run the upstream command first")
    return path


def _load_truth(out: Path):
    with open(_require(out / TRUTH_FILE), encoding="utf-8") as fh:
        return read_trajectory(fh)


def _check_grid(cfg: ExperimentConfig, grid) -> None:
    if grid.n != cfg.grid.n or grid.L != cfg.grid.L:
        raise SchemaError(f"input grid n={grid.n}, L={grid.L} does not match the config")


# commands ------------------------------------------------------------------

def cmd_truth(cfg: ExperimentConfig, out: Path) -> Path:
    truth = experiment.run_truth(cfg)
    path = out / TRUTH_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_trajectory(truth, fh, _header(cfg, "truth"))
    log.info("wrote %s (%d states)", path, len(truth))
    return path


def cmd_observe(cfg: ExperimentConfig, out: Path) -> Path:
    truth = _load_truth(out)
    _check_grid(cfg, truth.grid)
    obs = experiment.run_observations(cfg, truth)
    path = out / OBS_FILE
    if not obs:
        raise ConfigError("observation.steps=0 leaves nothing to observe")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_observations(obs, cfg.observation.h, fh, _header(cfg, "observe"))
    log.info("wrote %s (%d observations)", path, len(obs))
    return path


def cmd_filter(cfg: ExperimentConfig, out: Path) -> Path:
    truth = _load_truth(out)
    _check_grid(cfg, truth.grid)
    if cfg.filter.mode == "continuous":
        run = experiment.run_continuous(cfg, truth.field(0))
        path = out / CONTINUOUS_FILE
        write_records(path, run.records, _header(cfg, "filter"), continuous=True)
        log.info("wrote %s; final relative error %.3g", path, run.records[-1].rel_err_l2)
        return path
    with open(_require(out / OBS_FILE), encoding="utf-8") as fh:
        obs = read_observations(fh)
    if len(obs) > len(truth) - 1:
        raise ConfigError(f"{len(obs)} observations but only {len(truth) - 1} truth steps")
    truth.times = truth.times[: len(obs) + 1]
    truth.fields = truth.fields[: len(obs) + 1]
    run = experiment.run_discrete(cfg, truth, obs)
    path = out / FILTER_FILE
    write_records(path, run.records, _header(cfg, "filter", trace_gamma=repr(run.trace_gamma)))
    log.info("wrote %s; final squared error %.3g vs tr(Gamma) %.3g", path, run.records[-1].err_sq_H0, run.trace_gamma)
    return path


def cmd_bounds(cfg: ExperimentConfig, out: Path) -> Path:
    truth_path = out / TRUTH_FILE
    grid = experiment.grid_of(cfg)
    truth = None
    if truth_path.exists():
        truth = _load_truth(out)
        _check_grid(cfg, truth.grid)
    elif not math.isinf(cfg.observation.lam):
        _require(truth_path)
    rows = experiment.bound_rows(cfg, grid, truth)
    trace = experiment.make_noise(cfg, grid).trace
    path = out / BOUNDS_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_header(fh, _header(cfg, "bounds"))
        fh.write("step,time,trace_gamma,lower_bound,upper_bound\n")
        for r in rows:
            fh.write(f"{r.step},{r.time!r},{trace!r},{r.lower_bound!r},{r.upper_bound!r}\n")
    log.info("wrote %s", path)
    return path


def parse_sweep_value(parameter: str, text: str, cfg: ExperimentConfig) -> float:
    """Floats, ``inf``, or multiples of the observation noise such as ``10sigma``."""
    t = text.strip()
    try:
        if t.endswith("sigma"):
            factor = t[: -len("sigma")].rstrip("*") or "1"
            return float(factor) * cfg.observation.sigma
        return float(t)
    except ValueError:
        raise ConfigError(f"bad {parameter} sweep value {text!r}") from None


def _sweep_one(job):
    cfg, parameter, label, truth = job
    if parameter in ("omega", "sigma0"):
        run = experiment.run_continuous(cfg, truth.field(0))
        return summarize(parameter, label, run.records, cfg.classify)
    run = experiment.run_discrete(cfg, truth)
    return summarize(parameter, label, run.records, cfg.classify, run.trace_gamma)


def cmd_sweep(cfg: ExperimentConfig, out: Path, parameter: str, values: Sequence[str], jobs: int = 1) -> Path:
    if parameter not in SWEEP_KEYS:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {', '.join(SWEEP_KEYS)}")
    jobs_list = []
    truth = None
    if values:
        truth_path = out / TRUTH_FILE
        truth = _load_truth(out) if truth_path.exists() else experiment.run_truth(cfg)
        _check_grid(cfg, truth.grid)
    for text in values:
        v = parse_sweep_value(parameter, text, cfg)
        jobs_list.append((cfg.with_values(**{SWEEP_KEYS[parameter]: v}), parameter, text, truth))
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(j) for j in jobs_list]
    path = out / SWEEP_FILE
    write_summary(path, rows, _header(cfg, "sweep", sweep=parameter))
    for r in rows:
        log.info("%s=%s: median err %.3g -> %s", parameter, r.value, r.median_err_sq_H0, r.classification)
    return path


def cmd_plot(out: Path, csvs: Sequence[str], render: bool = True) -> list[Path]:
    from .plotting import emit

    made = []
    for c in csvs:
        script, image, panels = emit(c, out, render)
        log.info("wrote %s (%d panels)%s", script, panels, f" and {image}" if image else "")
        made.append(script if image is None else image)
    return made


# argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file (defaults when omitted)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
    common.add_argument("--seed", type=int, metavar="N", help="set seeds truth=N, noise=N+1, init=N+2")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    p = argparse.ArgumentParser(prog="nsfilter", description=__doc__)
    p.add_argument("--version", action="version", version=f"nsfilter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("truth", parents=[common], help="spin up and write the truth trajectory")
    sub.add_parser("observe", parents=[common], help="write noisy observations of the truth")
    sub.add_parser("filter", parents=[common], help="run the discrete or continuous filter")
    sub.add_parser("bounds", parents=[common], help="write the analytic error bounds")
    sw = sub.add_parser("sweep", parents=[common], help="run the filter over a list of parameter values")
    sw.add_argument("--param", required=True, choices=sorted(SWEEP_KEYS))
    sw.add_argument("--values", nargs="*", default=[], help="values, e.g. 0.04 0.4 or 10sigma; inf for lambda")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    pl = sub.add_parser("plot", parents=[common], help="emit plot scripts (and images) for record CSVs")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--no-render", action="store_true", help="write the script without running it")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg, out = _resolve(args)
        if args.command == "truth":
            cmd_truth(cfg, out)
        elif args.command == "observe":
            cmd_observe(cfg, out)
        elif args.command == "filter":
            cmd_filter(cfg, out)
        elif args.command == "bounds":
            cmd_bounds(cfg, out)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.param, args.values, args.jobs)
        elif args.command == "plot":
            for c in args.csv:
                read_records(c)
            cmd_plot(out, args.csv, not args.no_render)
    except NsFilterError as exc:
        print(f"nsfilter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
