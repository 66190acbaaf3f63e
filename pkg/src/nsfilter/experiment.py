"""Build solvers, noise models and filters from an :class:`ExperimentConfig` and run them."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .continuous import ContinuousFilterParams, ContinuousRun, split_step_run
from .discrete import FilterRun, GainOperator, StepRecord, assimilate, build_gain, lower_bound, upper_bound
from .dynamics import Solver, SolverParams
from .observations import NoiseModel, Observation, Trajectory, generate_observations, generate_truth, spin_up
from .spectral import SpectralField, WavenumberGrid, make_grid


def grid_of(cfg: ExperimentConfig) -> WavenumberGrid:
    return make_grid(cfg.grid.n, cfg.grid.L)


def make_solver(cfg: ExperimentConfig, grid: WavenumberGrid | None = None, dt: float | None = None) -> Solver:
    grid = grid_of(cfg) if grid is None else grid
    s = cfg.solver
    params = SolverParams(grid, s.nu, s.dt if dt is None else dt, s.forcing, s.forcing_amplitude)
    return Solver(params, backend=None if s.backend == "auto" else s.backend)


def absolute_lambda(cfg: ExperimentConfig, grid: WavenumberGrid) -> float:
    """Observation cutoff in absolute units; the config stores a multiple of lambda1."""
    lam = cfg.observation.lam
    return math.inf if math.isinf(lam) else lam * grid.lambda1


def make_noise(cfg: ExperimentConfig, grid: WavenumberGrid) -> NoiseModel:
    o = cfg.observation
    return NoiseModel(grid, o.sigma, o.beta, absolute_lambda(cfg, grid), cfg.seeds.noise, cfg.filter.ell, o.units)


def make_gain(cfg: ExperimentConfig, grid: WavenumberGrid) -> GainOperator:
    f = cfg.filter
    return build_gain(f.eta, f.alpha, absolute_lambda(cfg, grid), grid, f.ell)


def initial_truth(cfg: ExperimentConfig, solver: Solver) -> SpectralField:
    s = cfg.solver
    return spin_up(cfg.seeds.truth, s.t_spin, solver, s.init_amplitude, s.init_kmax)


def run_truth(cfg: ExperimentConfig, solver: Solver | None = None) -> Trajectory:
    solver = make_solver(cfg) if solver is None else solver
    return generate_truth(solver, initial_truth(cfg, solver), cfg.observation.h, cfg.observation.steps)


def run_observations(cfg: ExperimentConfig, truth: Trajectory) -> list[Observation]:
    return generate_observations(truth, make_noise(cfg, truth.grid))


def initial_estimate(cfg: ExperimentConfig, solver: Solver, u0: SpectralField) -> SpectralField:
    """``spinup``: an independent attractor state; ``truth``: ``u0`` itself; ``zero``: the zero field."""
    init = cfg.filter.init
    if init == "truth":
        return u0
    if init == "zero":
        return SpectralField.zeros(u0.grid, "vorticity")
    s = cfg.solver
    return spin_up(cfg.seeds.init, s.t_spin, solver, s.init_amplitude, s.init_kmax)


def run_discrete(cfg: ExperimentConfig, truth: Trajectory, observations: Sequence[Observation] | None = None,
                 m0: SpectralField | None = None, solver: Solver | None = None) -> FilterRun:
    solver = make_solver(cfg, truth.grid) if solver is None else solver
    if observations is None:
        observations = run_observations(cfg, truth)
    if m0 is None:
        m0 = initial_estimate(cfg, solver, truth.field(0))
    return assimilate(solver, make_gain(cfg, truth.grid), make_noise(cfg, truth.grid), truth, observations, m0,
                      cfg.observation.h, cfg.output.tracked_modes)


def continuous_params(cfg: ExperimentConfig, grid: WavenumberGrid) -> ContinuousFilterParams:
    c = cfg.continuous
    return ContinuousFilterParams(grid, c.omega, c.sigma0, c.beta, c.alpha, c.r_mode, cfg.continuous_dt,
                                  cfg.filter.ell, cfg.observation.units)


def run_continuous(cfg: ExperimentConfig, u0: SpectralField, m0: SpectralField | None = None,
                   solver: Solver | None = None) -> ContinuousRun:
    if solver is None or abs(solver.params.dt - cfg.continuous_dt) > 1e-15:
        solver = make_solver(cfg, u0.grid, cfg.continuous_dt)
    if m0 is None:
        m0 = initial_estimate(cfg, make_solver(cfg, u0.grid), u0)
    c = cfg.continuous
    return split_step_run(solver, continuous_params(cfg, u0.grid), u0, m0, c.T, c.record_every,
                          cfg.seeds.noise, cfg.output.tracked_modes, c.order)


def bound_rows(cfg: ExperimentConfig, grid: WavenumberGrid, truth: Trajectory | None) -> list[StepRecord]:
    """Per-step ``(trace_gamma, lower, upper)`` records; the partial-observation bound needs ``truth``."""
    noise = make_noise(cfg, grid)
    lb = lower_bound(make_gain(cfg, grid), noise)
    steps = cfg.observation.steps if truth is None else len(truth) - 1
    rows = []
    for j in range(steps + 1):
        if truth is None:
            ub = noise.trace
            t = j * cfg.observation.h
        else:
            ub = upper_bound(noise, truth.field(j))
            t = float(truth.times[j])
        rows.append(StepRecord(j, t, math.nan, math.nan, lb, ub))
    return rows


def error_series(records: Sequence[StepRecord]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([r.err_sq_H0 for r in records]), np.array([r.upper_bound for r in records])
