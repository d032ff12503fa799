import numpy as np
import pytest
import scipy.linalg as sla

from dyntunnel.core import (DRIVE_PERIOD, SpatialGrid, SystemParams,
                            WaveFunction, coherent_state, potential)
from dyntunnel.errors import BoundaryLeak, PhaseMismatch
from dyntunnel.propagator import (PropagatorConfig, evolve_stroboscopic,
                                  propagate_batch, propagate_periods,
                                  project_populations, step)


@pytest.fixture(scope="module")
def small_grid():
    return SpatialGrid(12.0, 256)


@pytest.fixture(scope="module")
def small_params():
    return SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(steps_per_period=0)
    with pytest.raises(ValueError):
        PropagatorConfig(splitting_order=3)


def test_norm_conservation_100_periods(grid, params13, config):
    psi = coherent_state(0.0, 1.09, params13, grid)
    out = propagate_periods(psi, 100, params13.with_u(0.02), config)
    assert abs(out.norm() - 1.0) < 1e-9


def test_linearity_at_zero_u(small_grid, small_params):
    config = PropagatorConfig(steps_per_period=256, check_boundary=False)
    a = coherent_state(0.0, 1.0, small_params, small_grid)
    b = coherent_state(-1.0, -0.5, small_params, small_grid)
    amps = np.stack([a.amplitudes, b.amplitudes,
                     a.amplitudes + 2j * b.amplitudes], axis=1)
    out = propagate_batch(amps, small_params, small_grid, config)
    assert np.allclose(out[:, 0] + 2j * out[:, 1], out[:, 2], atol=1e-12)


def test_nonlinear_term_breaks_linearity(small_grid, small_params):
    config = PropagatorConfig(steps_per_period=256, check_boundary=False)
    params = small_params.with_u(0.5)
    a = coherent_state(0.0, 1.0, small_params, small_grid)
    b = coherent_state(-1.0, -0.5, small_params, small_grid)
    amps = np.stack([a.amplitudes, b.amplitudes,
                     a.amplitudes + b.amplitudes], axis=1)
    out = propagate_batch(amps, params, small_grid, config)
    assert not np.allclose(out[:, 0] + out[:, 1], out[:, 2], atol=1e-6)


@pytest.mark.parametrize("order,expected", [(2, 2.0), (4, 4.0)])
def test_splitting_order_of_convergence(small_grid, small_params, order,
                                        expected):
    ref_conf = PropagatorConfig(steps_per_period=8192, splitting_order=4,
                                check_boundary=False)
    psi = coherent_state(0.5, 1.0, small_params, small_grid)
    params = small_params.with_u(0.05)
    ref = propagate_periods(psi, 1, params, ref_conf).amplitudes
    errs = []
    for spp in (128, 256):
        conf = PropagatorConfig(steps_per_period=spp, splitting_order=order,
                                check_boundary=False)
        out = propagate_periods(psi, 1, params, conf).amplitudes
        errs.append(np.sqrt(np.sum(np.abs(out - ref) ** 2) * small_grid.dx))
    measured = np.log2(errs[0] / errs[1])
    assert measured == pytest.approx(expected, abs=0.5)


def test_against_dense_exponential_oracle(small_grid, small_params):
    """Independent reference: midpoint-frozen dense matrix exponentials."""
    import scipy.fft as sfft

    grid, params = small_grid, small_params
    n = grid.n_points
    kin = sla.circulant(
        sfft.ifft(0.5 * (params.hbar_eff * grid.k) ** 2).real)
    psi = coherent_state(0.0, 1.0, params, grid)
    a = psi.amplitudes.copy()
    n_steps = 512
    dt = DRIVE_PERIOD / n_steps
    for i in range(n_steps):
        t_mid = (i + 0.5) * dt
        h = kin + np.diag(potential(grid.x, t_mid, params))
        a = sla.expm(-1j * h * dt / params.hbar_eff) @ a
    conf = PropagatorConfig(steps_per_period=2048, splitting_order=4,
                            check_boundary=False)
    out = propagate_periods(psi, 1, params, conf).amplitudes
    err = np.sqrt(np.sum(np.abs(out - a) ** 2) * grid.dx)
    assert err < 1e-3


def test_boundary_leak_detection(small_params):
    grid = SpatialGrid(6.0, 256)
    psi = coherent_state(0.0, 2.5, small_params, grid)  # flies into the wall
    conf = PropagatorConfig(steps_per_period=256)
    with pytest.raises(BoundaryLeak):
        propagate_periods(psi, 3, small_params, conf)


def test_single_step_advances_time(small_grid, small_params):
    psi = coherent_state(0.0, 1.0, small_params, small_grid)
    out = step(psi, 0.0, 0.01, small_params)
    assert out.time_tag == pytest.approx(0.01)
    assert abs(out.norm() - 1.0) < 1e-12


def test_stroboscopic_records(small_grid, small_params):
    conf = PropagatorConfig(steps_per_period=256, check_boundary=False)
    psi = coherent_state(0.0, 1.0, small_params, small_grid)
    records = evolve_stroboscopic(psi, 6, small_params, conf, store_every=2)
    assert [r.period_index for r in records] == [1, 2, 3, 4, 5, 6]
    assert all(abs(r.norm - 1.0) < 1e-12 for r in records)
    assert [r.snapshot is not None for r in records] \
        == [False, True, False, True, False, True]
    snap = records[1].snapshot
    assert snap.time_tag == pytest.approx(2 * DRIVE_PERIOD)


def test_batch_snapshots_consistent_with_final(small_grid, small_params):
    conf = PropagatorConfig(steps_per_period=256, check_boundary=False)
    psi = coherent_state(0.0, 1.0, small_params, small_grid)
    final, snaps = propagate_batch(psi.amplitudes[:, None], small_params,
                                   small_grid, conf, snapshot_every=64)
    assert len(snaps) == 4
    direct = propagate_batch(psi.amplitudes[:, None], small_params,
                             small_grid, conf)
    assert np.allclose(final, direct, atol=1e-13)
    assert np.allclose(snaps[0][:, 0], psi.amplitudes, atol=0)


def test_project_populations_phase_check(small_grid, small_params):
    psi = coherent_state(0.0, 1.0, small_params, small_grid)
    phi = WaveFunction(small_grid, psi.amplitudes, time_tag=1.0)
    with pytest.raises(PhaseMismatch):
        project_populations(psi, phi, psi)
    dp, dm, ntot = project_populations(psi, psi, psi)
    assert dp == pytest.approx(1.0)
    assert ntot == pytest.approx(2.0)  # same state used for both projectors
