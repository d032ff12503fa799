import numpy as np
import pytest

from dyntunnel.core import (DRIVE_PERIOD, SpatialGrid, SystemParams,
                            WaveFunction, potential)
from dyntunnel.errors import ContinuationStuck
from dyntunnel.floquet import (FloquetState, floquet_spectrum, fold_splitting,
                               static_basis)
from dyntunnel.nlfloquet import (ContinuationSchedule, floquet_residual,
                                 solve_nonlinear_floquet)
from dyntunnel.propagator import PropagatorConfig


@pytest.fixture(scope="module")
def small():
    grid = SpatialGrid(16.0, 256)
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    config = PropagatorConfig(steps_per_period=512, check_boundary=False)
    return grid, params, config


def _static_energy(psi, params):
    grid = psi.grid
    k = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    a = psi.amplitudes
    kin = np.fft.ifft((params.hbar_eff * k) ** 2 / 2 * np.fft.fft(a))
    v = params.kappa * np.sqrt(1.0 + grid.x**2)
    return float(np.real(np.sum(a.conj() * (kin + v * a)) * grid.dx))


def _ground_seed(params, grid):
    """Undriven ground state as a parity-labelled Floquet seed."""
    basis = static_basis(params, grid, 32)
    amps = basis.columns[:, 0].astype(np.complex128)
    return FloquetState(WaveFunction(grid, amps), float(basis.energies[0]), 1)


def test_schedule_steps():
    s = ContinuationSchedule(step_small=0.005, step_large=0.05, switch_at=0.1)
    steps = s.steps(0.0, 0.02)
    assert steps == pytest.approx([0.005, 0.01, 0.015, 0.02])
    steps = s.steps(0.095, 0.2)
    assert steps[0] == pytest.approx(0.1)
    assert steps[1] == pytest.approx(0.15)
    assert steps[-1] == pytest.approx(0.2)
    assert s.steps(0.01, 0.01) == []
    back = s.steps(0.02, 0.01)
    assert back == pytest.approx([0.015, 0.01])


def test_linear_state_has_zero_residual(small):
    grid, params, config = small
    states = floquet_spectrum(params, grid, n_basis=48, config=config)
    # low-lying states are converged in the 48-state basis
    st0 = min(states, key=lambda s: _static_energy(s.psi0, params))
    res, _ = floquet_residual(st0.psi0, st0.eigenvalue, params, config)
    assert res < 1e-8


def test_seed_outside_basis_rejected(small):
    grid, params, config = small
    basis = static_basis(params.with_u(0.0), grid, 48)
    amps = basis.columns[:, 40].astype(np.complex128)
    seed = FloquetState(WaveFunction(grid, amps), float(basis.energies[40]),
                        int(basis.parities[40]))
    with pytest.raises(ValueError, match="norm"):
        solve_nonlinear_floquet(seed, 0.01, params, config, n_basis=16)


def test_energy_slope_matches_density_integral(small):
    """First-order perturbation oracle: dE/dU = int |phi|^4 dx at U = 0.

    Uses the undriven system so the static ground state is an exact Floquet
    state of the branch being continued."""
    grid, driven, config = small
    params = SystemParams(kappa=driven.kappa, epsilon=0.0,
                          hbar_eff=driven.hbar_eff)
    seed = _ground_seed(params.with_u(0.0), grid)
    # dE/dU at U = 0 equals int |phi|^4 dx (first-order shift of the
    # reformation phase); away from 0 the state back-reaction enters
    i4 = float(np.sum(np.abs(seed.psi0.amplitudes) ** 4) * grid.dx)
    du = 0.00125
    sched = ContinuationSchedule(step_small=du, step_large=du, switch_at=1.0)
    sols = solve_nonlinear_floquet(seed, 2 * du, params, config, n_basis=32,
                                   schedule=sched)
    assert [s.u_nl for s in sols] == pytest.approx([du, 2 * du])
    assert all(s.residual < 1e-8 for s in sols)
    slope = (sols[0].energy - seed.eigenvalue) / du
    assert slope == pytest.approx(i4, rel=0.05)
    assert sols[-1].continuation_parent == pytest.approx(du)


def test_undriven_branch_matches_imaginary_time_relaxation(small):
    """Independent oracle: at epsilon = 0 the nonlinear Floquet ground state
    is the stationary GPE state, recovered here by imaginary-time split-step
    relaxation with an independent chemical-potential readout."""
    grid, params, _ = small
    undriven = SystemParams(kappa=params.kappa, epsilon=0.0,
                            hbar_eff=params.hbar_eff)
    u_nl = 0.1
    hbar = undriven.hbar_eff
    k = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    kin = (hbar * k) ** 2 / 2
    v = potential(grid.x, 0.0, undriven)

    psi = np.exp(-grid.x**2).astype(np.complex128)
    # anneal the step: the fixed point carries an O(dtau^2) splitting bias
    for dtau, n_iter in ((0.02, 4000), (0.002, 4000)):
        half_k = np.exp(-0.5 * dtau * kin / hbar)
        for _ in range(n_iter):
            psi = np.fft.ifft(half_k * np.fft.fft(psi))
            psi = psi * np.exp(-dtau * (v + u_nl * np.abs(psi) ** 2) / hbar)
            psi = np.fft.ifft(half_k * np.fft.fft(psi))
            psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    hpsi = np.fft.ifft(kin * np.fft.fft(psi)) \
        + (v + u_nl * np.abs(psi) ** 2) * psi
    mu = float(np.real(np.sum(psi.conj() * hpsi) * grid.dx))

    config = PropagatorConfig(steps_per_period=512, check_boundary=False)
    seed = _ground_seed(undriven.with_u(0.0), grid)
    sols = solve_nonlinear_floquet(seed, u_nl, undriven, config, n_basis=32,
                                   store_all=False)
    sol = sols[-1]
    assert sol.residual < 1e-8
    # E = mu up to the quasi-energy folding ambiguity
    assert fold_splitting(sol.energy - mu, hbar) < 1e-5
    dens = np.abs(sol.state.psi0.amplitudes) ** 2
    assert np.abs(dens - np.abs(psi) ** 2).max() < 1e-4


def test_driven_continuation_reforms(small):
    grid, params, config = small
    states = floquet_spectrum(params, grid, n_basis=48, config=config)
    # take a well-converged even state and continue it in U
    def static_e(s):
        a = s.psi0.amplitudes
        kvec = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
        t = np.fft.ifft((params.hbar_eff * kvec) ** 2 / 2 * np.fft.fft(a))
        vv = params.kappa * np.sqrt(1.0 + grid.x**2)
        return float(np.real(np.sum(a.conj() * (t + vv * a)) * grid.dx))
    even = [s for s in states if s.parity == 1]
    seed = min(even, key=static_e)
    sols = solve_nonlinear_floquet(seed, 0.01, params, config, n_basis=48,
                                   n_phases=4)
    sol = sols[-1]
    res, _ = floquet_residual(sol.state.psi0, sol.energy,
                              params.with_u(0.01), config)
    assert res < 1e-7
    assert len(sol.state.snapshots) == 4
    assert sol.state.parity == 1
    # repulsive interactions raise the energy at first order
    assert sol.energy > seed.eigenvalue


def test_continuation_stuck_reports_last_good(small):
    grid, params, config = small
    seed = _ground_seed(params.with_u(0.0), grid)
    # an absurd target with a coarse basis must fail, not loop forever
    with pytest.raises(ContinuationStuck) as exc:
        solve_nonlinear_floquet(
            seed, 50.0, params, config, n_basis=8,
            schedule=ContinuationSchedule(step_small=25.0, step_large=25.0,
                                          switch_at=100.0))
    assert exc.value.last_good_u == pytest.approx(0.0)
