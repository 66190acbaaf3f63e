import math

import numpy as np
import pytest

from conftest import random_field
from nsfilter.continuous import (
    ContinuousFilterParams,
    build_ou_table,
    ou_step,
    split_step_run,
    stationary_variance,
)
from nsfilter.dynamics import Solver, SolverParams
from nsfilter.observations import stream_rng
from nsfilter.spectral import SpectralField, from_units, norm_sq, to_units

SHELLS = (1, 4, 25)


def test_rates_for_half_alpha(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.005, alpha=0.5)
    a = grid32.active
    np.testing.assert_allclose(p.rate[a], 100.0 / grid32.ksq[a], rtol=1e-15)
    np.testing.assert_allclose(p.amplitude[a], 0.5 / grid32.ksq[a], rtol=1e-15)
    assert np.all(p.rate[a] > 0)


def test_pde_mode_switches_noise_off(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.005, r_mode="pde")
    table = build_ou_table(p)
    assert not np.any(table.std)
    assert np.all((table.decay[grid32.active] > 0) & (table.decay[grid32.active] < 1))


def test_params_validation(grid32):
    with pytest.raises(ValueError):
        ContinuousFilterParams(grid32, -1.0)
    with pytest.raises(ValueError):
        ContinuousFilterParams(grid32, 1.0, r_mode="sde")
    with pytest.raises(ValueError):
        ContinuousFilterParams(grid32, 1.0, dt=0.0)


def test_fixed_point_without_noise(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.0)
    u = random_field(grid32, 1)
    out = ou_step(u, u, build_ou_table(p), None)
    np.testing.assert_array_equal(out.coeffs, u.coeffs)


def test_deterministic_contraction(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.0)
    table = build_ou_table(p)
    u = random_field(grid32, 1)
    m = random_field(grid32, 2)
    out = ou_step(m, u, table, None)
    a = grid32.active
    ratio = (out.coeffs - u.coeffs)[a] / (m.coeffs - u.coeffs)[a]
    np.testing.assert_allclose(ratio, np.exp(-p.rate[a] * p.dt), rtol=1e-13)


def test_ou_step_preserves_invariants(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.005)
    out = ou_step(random_field(grid32, 2), random_field(grid32, 1), build_ou_table(p), stream_rng(0, 2))
    assert out.is_valid(1e-14)


def stationary_stats(grid, omega, sigma0, steps, seed=0):
    """Empirical ``E|m_k - u_k|^2`` per shell under repeated exact steps with frozen ``u = 0``."""
    p = ContinuousFilterParams(grid, omega, sigma0)
    table = build_ou_table(p)
    rng = stream_rng(seed, 2)
    m = SpectralField.zeros(grid)
    u = SpectralField.zeros(grid)
    masks = {s: grid.ksq == s for s in SHELLS}
    acc = {s: 0.0 for s in SHELLS}
    burn = 2000
    for i in range(steps + burn):
        m = ou_step(m, u, table, rng)
        if i >= burn:
            c = to_units(m, "velocity")
            for s, mk in masks.items():
                acc[s] += float(np.mean(np.abs(c[mk]) ** 2))
    expect = stationary_variance(p)
    return {s: (acc[s] / steps, float(expect[masks[s]][0])) for s in SHELLS}


@pytest.mark.slow
def test_stationary_variance(grid32):
    for s, (got, want) in stationary_stats(grid32, 100.0, 0.005, 100_000).items():
        assert abs(got / want - 1) < 0.05, s


def ensemble_exact(grid, p, steps, runs):
    """Exact-step samples per shell, started from unit velocity amplitude on every mode.

    Each sample is rotated by the phase of its starting value, so all samples
    share the real start 1; the circular noise law is unchanged by the rotation.
    """
    table = build_ou_table(p)
    rng = stream_rng(0, 2, 1)
    u = SpectralField.zeros(grid)
    # i exp(i theta_k) with theta odd in k satisfies u_{-k} = -conj(u_k)
    start = np.where(grid.active, 1j * np.exp(1j * (0.3 * grid.k1 + 0.7 * grid.k2)), 0)
    m0 = SpectralField(grid, from_units(start, grid, "velocity"))
    phase = {s: np.conj(start[grid.ksq == s]) for s in SHELLS}
    out = {s: [] for s in SHELLS}
    for _ in range(runs):
        m = m0
        for _ in range(steps):
            m = ou_step(m, u, table, rng)
        c = to_units(m, "velocity")
        for s in SHELLS:
            out[s].append(c[grid.ksq == s] * phase[s])
    return {s: np.concatenate(v) for s, v in out.items()}


def ensemble_euler_maruyama(r, s, t, substeps, n, seed):
    """Complex OU paths ``dx = -r x dt + s dW`` from ``x = 1``, Euler-Maruyama with ``substeps``."""
    rng = np.random.default_rng(seed)
    h = t / substeps
    x = np.ones(n, dtype=np.complex128)
    for _ in range(substeps):
        dw = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x += -r * x * h + s * math.sqrt(h / 2) * dw
    return x


@pytest.mark.slow
def test_exact_step_matches_euler_maruyama(grid32):
    p = ContinuousFilterParams(grid32, 100.0, 0.005)
    steps = 2
    exact = ensemble_exact(grid32, p, steps, 6000)
    for s in SHELLS:
        k = tuple(np.argwhere(grid32.ksq == s)[0])
        em = ensemble_euler_maruyama(p.rate[k], p.amplitude[k], steps * p.dt, 100 * steps, 50_000, s)
        assert abs(np.mean(exact[s].real) / np.mean(em.real) - 1) < 0.05, s
        v_exact = np.mean(np.abs(exact[s] - np.mean(exact[s])) ** 2)
        v_em = np.mean(np.abs(em - np.mean(em)) ** 2)
        assert abs(v_exact / v_em - 1) < 0.05, s


def test_zero_omega_pde_reduces_to_forward_model(solver32):
    g = solver32.grid
    u0 = random_field(g, 1, kmax=8, amplitude=2.0)
    m0 = random_field(g, 2, kmax=8, amplitude=2.0)
    p = ContinuousFilterParams(g, 0.0, 0.0, r_mode="pde")
    run = split_step_run(solver32, p, u0, m0, 0.5, 0.25)
    np.testing.assert_array_equal(run.final_estimate, solver32.advance(m0.coeffs, 100))
    np.testing.assert_array_equal(run.final_truth, solver32.advance(u0.coeffs, 100))
    assert [r.step for r in run.records] == [0, 1, 2]
    assert run.records[-1].lower_bound is None and run.records[-1].upper_bound is None


def test_orders_agree_to_first_order(grid32):
    u0 = random_field(grid32, 1, kmax=8, amplitude=2.0)
    m0 = random_field(grid32, 2, kmax=8, amplitude=2.0)
    gap = math.sqrt(norm_sq((m0 - u0).coeffs, grid32, "velocity"))
    diffs = []
    for dt in (0.005, 0.0025):
        s = Solver(SolverParams(grid32, dt=dt))
        p = ContinuousFilterParams(grid32, 100.0, 0.0, r_mode="pde", dt=dt)
        a = split_step_run(s, p, u0, m0, dt, dt, order="nse_first").final_estimate
        b = split_step_run(s, p, u0, m0, dt, dt, order="ou_first").final_estimate
        d = math.sqrt(norm_sq(a - b, grid32, "velocity"))
        diffs.append(d)
        assert d <= 100.0 * dt * gap
    # the commutator of the two flows is second order in dt
    assert diffs[0] / diffs[1] > 3.0


def test_split_step_rejects_mismatched_dt(solver32):
    g = solver32.grid
    p = ContinuousFilterParams(g, 1.0, dt=0.01)
    with pytest.raises(ValueError):
        split_step_run(solver32, p, SpectralField.zeros(g), SpectralField.zeros(g), 0.1, 0.05)


def test_split_step_is_deterministic(solver32):
    g = solver32.grid
    u0 = random_field(g, 1, kmax=8, amplitude=2.0)
    m0 = random_field(g, 2, kmax=8, amplitude=2.0)
    p = ContinuousFilterParams(g, 100.0, 0.005)
    a = split_step_run(solver32, p, u0, m0, 0.1, 0.05, seed=4)
    b = split_step_run(solver32, p, u0, m0, 0.1, 0.05, seed=4)
    assert np.array_equal(a.final_estimate, b.final_estimate)
    assert [r.rel_err_l2 for r in a.records] == [r.rel_err_l2 for r in b.records]
