import numpy as np
import pytest

from dyntunnel.classical import (PhasePoint, chaos_indicator,
                                 find_period_one_islands, integrate_classical,
                                 integrate_point, map_jacobian,
                                 poincare_section, stroboscopic_map)
from dyntunnel.core import DRIVE_PERIOD, SystemParams, potential
from dyntunnel.errors import NonFinite


def _energy(x, p, params):
    return 0.5 * p**2 + potential(x, 0.0, params.with_u(0.0))


def test_energy_conservation_undriven():
    params = SystemParams(kappa=1.3, epsilon=0.0, hbar_eff=0.5)
    x, p = 1.2, -0.4
    e0 = _energy(x, p, params)
    xf, pf = integrate_classical(x, p, 0.0, 100 * DRIVE_PERIOD, params)
    assert _energy(float(xf), float(pf), params) == pytest.approx(e0,
                                                                  abs=1e-10)


def test_integrator_fourth_order():
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    x0, p0 = 0.8, 0.9
    ref = integrate_classical(x0, p0, 0.0, DRIVE_PERIOD, params,
                              dt=DRIVE_PERIOD / 16384)
    errs = []
    for n in (128, 256):
        xf, pf = integrate_classical(x0, p0, 0.0, DRIVE_PERIOD, params,
                                     dt=DRIVE_PERIOD / n)
        errs.append(np.hypot(float(xf - ref[0]), float(pf - ref[1])))
    order = np.log2(errs[0] / errs[1])
    assert 3.5 < order < 4.5


def test_time_reversal():
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    start = PhasePoint(1.0, 0.5)
    fwd = integrate_point(start, 3 * DRIVE_PERIOD, params)
    back = integrate_point(fwd, -3 * DRIVE_PERIOD, params)
    assert back.x == pytest.approx(start.x, abs=1e-10)
    assert back.p == pytest.approx(start.p, abs=1e-10)


def test_map_jacobian_is_symplectic():
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    jxx, jxp, jpx, jpp = map_jacobian(np.array([0.5]), np.array([1.0]),
                                      params)
    det = (jxx * jpp - jxp * jpx).item()
    assert det == pytest.approx(1.0, abs=1e-5)


def test_islands_kappa13():
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    iplus, iminus = find_period_one_islands(params)
    assert iplus.sign == 1 and iminus.sign == -1
    assert iplus.elliptic and iminus.elliptic
    # the islands form a mirror pair at x ~ 0
    assert iplus.p_star == pytest.approx(-iminus.p_star, abs=1e-6)
    assert iplus.x_star == pytest.approx(-iminus.x_star, abs=1e-6)
    assert abs(iplus.x_star) < 1e-5
    assert iplus.p_star == pytest.approx(1.0927, abs=2e-3)
    # fixed point reproduces itself under the stroboscopic map
    mx, mp = stroboscopic_map(iplus.x_star, iplus.p_star, params)
    assert float(mx) == pytest.approx(iplus.x_star, abs=1e-8)
    assert float(mp) == pytest.approx(iplus.p_star, abs=1e-8)


def test_poincare_section_shapes():
    params = SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)
    seeds = [PhasePoint(0.0, 1.0), PhasePoint(0.5, -1.0)]
    sec = poincare_section(seeds, 5, params, dt=DRIVE_PERIOD / 256)
    assert len(sec.trajectories) == 2
    assert sec.trajectories[0].shape == (5, 2)
    with pytest.raises(ValueError):
        poincare_section(seeds, 0, params)


def test_phase_point_rejects_nonfinite():
    with pytest.raises(NonFinite):
        PhasePoint(np.nan, 0.0)


def test_chaos_indicator_separates_island_from_sea():
    params = SystemParams(kappa=2.3, epsilon=0.3, hbar_eff=0.5)
    iplus, _ = find_period_one_islands(params)
    seeds = [PhasePoint(iplus.x_star, iplus.p_star),  # regular
             PhasePoint(0.5, 0.3)]  # chaotic sea
    rates, flags = chaos_indicator(seeds, params, n_periods=120,
                                   dt=DRIVE_PERIOD / 512)
    assert not flags[0]
    assert flags[1]
    assert rates[1] > rates[0]
