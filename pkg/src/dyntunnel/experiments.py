"""Experiment orchestration: tunnelling-period extraction, trapping
classification, and the figure pipelines (momentum-reversal runs, rate
curves, critical-nonlinearity sweeps).

A shared pipeline object caches the expensive linear stage (islands, Floquet
spectrum, doublet, couplings) and walks the nonlinear continuation once per
parameter set, so the figure runners only pay for the GPE evolutions.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core import DRIVE_PERIOD, WaveFunction
from .classical import find_period_one_islands
from .errors import (BoundaryLeak, ContinuationStuck, DoubletNotFound,
                     SeriesTooShort)
from .floquet import (floquet_spectrum, identify_tunnelling_doublet,
                      materialize_snapshots)
from .nlfloquet import solve_nonlinear_floquet
from .propagator import (PropagatorConfig, evolve_stroboscopic,
                         project_populations)
from .twomode import (TwoModeState, compute_couplings, effective_params,
                      integrate_two_mode, is_self_trapped, linear_couplings,
                      u_crit_estimate)

TUNNELLING = "tunnelling"
TRAPPED = "trapped"
MARGINAL = "marginal"


@dataclass(frozen=True)
class RunRecord:
    """One stroboscopic GPE run projected onto the tunnelling doublet."""

    params: object
    records: list  # StroboscopicRecord series
    d_plus: np.ndarray  # complex projections per period
    d_minus: np.ndarray
    classification: str
    extracted_period: float  # drive periods; None unless tunnelling
    n_tot_floor: float

    def __post_init__(self):
        present = self.extracted_period is not None
        if (self.classification == TUNNELLING) != present:
            raise ValueError("classification and extracted_period disagree")
        if not 0.0 <= self.n_tot_floor <= 1.0 + 1e-9:
            raise ValueError("n_tot_floor outside [0, 1]")

    @property
    def z_series(self):
        return np.abs(self.d_plus) ** 2 - np.abs(self.d_minus) ** 2


def classify_series(series, trap_floor=0.1):
    """Trapping verdict and tunnelling period from a z(nT) or mean_p series.

    Returns (classification, period in drive periods or None).  Tunnelling:
    the series crosses zero; period = twice the mean crossing spacing, refined
    by the dominant discrete-spectrum peak.  Trapped: no crossing and
    min |z| > trap_floor.  Marginal otherwise.
    """
    z = np.asarray(series, dtype=float)
    if z.size < 8:
        raise SeriesTooShort(f"series of {z.size} samples is too short")
    crossings = np.where(np.diff(np.signbit(z)))[0]
    if crossings.size == 0:
        if np.min(np.abs(z)) > trap_floor:
            return TRAPPED, None
        return MARGINAL, None
    period = None
    if crossings.size >= 2:
        gaps = np.diff(crossings)
        # merge crossing clusters (sign chatter while z dwells near zero)
        keep = gaps >= 0.25 * np.median(gaps)
        if np.any(keep):
            period = 2.0 * float(np.mean(gaps[keep]))
    fft_period = _dominant_period(z)
    if period is None:
        period = fft_period
    elif fft_period is not None and abs(fft_period - period) < 0.25 * period:
        period = fft_period
    if period is None:
        return MARGINAL, None
    return TUNNELLING, float(period)


def _dominant_period(z):
    """Period of the strongest non-DC discrete-spectrum peak.

    Hann window with log-magnitude parabolic interpolation: sub-bin accurate
    for a clean oscillation, unlike raw-magnitude interpolation whose
    rectangular-window leakage biases the peak location by up to half a bin.
    Returns None when the peak sits in the DC bin or on the spectrum edge."""
    zc = z - np.mean(z)
    spec = np.abs(np.fft.rfft(zc * np.hanning(zc.size)))
    if spec.size < 4:
        return None
    k = int(np.argmax(spec[1:-1])) + 1
    if k < 2 or spec[k - 1] == 0.0 or spec[k + 1] == 0.0:
        return None
    a, b, c = np.log(spec[k - 1: k + 2])
    denom = a - 2.0 * b + c
    delta = 0.0
    if denom != 0.0:
        delta = float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))
    freq = (k + delta) / z.size
    return 1.0 / freq if freq > 0 else None


def extract_tunnelling_period(series, trap_floor=0.1):
    """Tunnelling period in drive periods, or None for trapped/marginal."""
    _, period = classify_series(series, trap_floor)
    return period


class DoubletPipeline:
    """Caches the linear stage and continuation branches for one system.

    params must carry u_nl = 0; nonlinear targets are requested per call.
    """

    def __init__(self, params, grid, config=None, n_basis=128, n_phases=32,
                 island_radius=None, trap_floor=0.1):
        if params.u_nl != 0.0:
            raise ValueError("pipeline params must have u_nl = 0")
        self.params = params
        self.grid = grid
        self.config = config or PropagatorConfig()
        self.n_basis = n_basis
        self.n_phases = n_phases
        self.island_radius = island_radius
        self.trap_floor = trap_floor
        self._islands = None
        self._doublet = None
        self._lc = None
        self._branches = {1: [], -1: []}  # continuation paths per parity

    def islands(self):
        if self._islands is None:
            self._islands = find_period_one_islands(self.params)
        return self._islands

    def doublet(self):
        if self._doublet is None:
            spectrum = floquet_spectrum(self.params, self.grid,
                                        n_basis=self.n_basis,
                                        config=self.config)
            self._doublet = identify_tunnelling_doublet(
                spectrum, self.islands(), self.params,
                radius=self.island_radius)
        return self._doublet

    def coupling_constants(self):
        """Linear couplings at unit U (cached)."""
        if self._lc is None:
            self._lc = linear_couplings(self.doublet(), self.params,
                                        self.config, self.n_phases)
        return self._lc

    def t_lin_periods(self):
        return self.doublet().t_lin / DRIVE_PERIOD

    def branch_solution(self, parity, u_target):
        """Nonlinear Floquet solution at u_target, continued incrementally.

        Solutions along the walk are cached, so requesting an ascending U
        sequence costs one continuation pass.
        """
        path = self._branches[parity]
        for sol in path:
            if abs(sol.u_nl - u_target) < 1e-12:
                return sol
        doublet = self.doublet()
        seed = doublet.u_even if parity == 1 else doublet.u_odd
        if u_target == 0.0:
            return None
        start = path[-1] if path and path[-1].u_nl < u_target else seed
        if path and path[-1].u_nl > u_target:
            start = seed  # walk forward from U = 0 for out-of-order requests
        sols = solve_nonlinear_floquet(start, u_target, self.params,
                                       self.config, n_basis=self.n_basis)
        path.extend(sols)
        return sols[-1]

    def doublet_states(self, u_nl):
        """(phi_e, phi_o) at the given nonlinearity (linear pair at U = 0)."""
        doublet = self.doublet()
        if u_nl == 0.0:
            return doublet.u_even, doublet.u_odd
        se = self.branch_solution(1, u_nl)
        so = self.branch_solution(-1, u_nl)
        return se.state, so.state

    def plus_state(self, u_nl):
        """phi_plus = (phi_e + i phi_o)/sqrt(2) at the given nonlinearity."""
        phi_e, phi_o = self.doublet_states(u_nl)
        amps = (phi_e.psi0.amplitudes + 1j * phi_o.psi0.amplitudes) \
            / np.sqrt(2.0)
        psi = WaveFunction(self.grid, amps).normalized()
        return psi, phi_e, phi_o

    def couplings_at(self, u_nl):
        """Full two-mode couplings from the nonlinear pair at u_nl."""
        if u_nl == 0.0:
            lc = self.coupling_constants()
            return lc.scaled(1e-300)  # vanishing-U limit keeps delta_e
        phi_e, phi_o = self.doublet_states(u_nl)
        p = self.params.with_u(u_nl)
        if phi_e.snapshots is None:
            phi_e = materialize_snapshots(phi_e, p, self.config, self.n_phases)
        if phi_o.snapshots is None:
            phi_o = materialize_snapshots(phi_o, p, self.config, self.n_phases)
        c = compute_couplings(phi_e, phi_o, u_nl)
        return c

    def run_gpe(self, u_nl, n_periods=1500, store_every=0):
        """Evolve phi_plus for n_periods at u_nl and classify the projection."""
        psi0, phi_e, phi_o = self.plus_state(u_nl)
        phi_p = WaveFunction(self.grid, (phi_e.psi0.amplitudes
                                         + 1j * phi_o.psi0.amplitudes)
                             / np.sqrt(2.0))
        phi_m = WaveFunction(self.grid, (phi_e.psi0.amplitudes
                                         - 1j * phi_o.psi0.amplitudes)
                             / np.sqrt(2.0))
        params = self.params.with_u(u_nl)
        records = evolve_stroboscopic(psi0, n_periods, params, self.config,
                                      store_every=1)
        dp = np.empty(n_periods, dtype=np.complex128)
        dm = np.empty(n_periods, dtype=np.complex128)
        ntot = np.empty(n_periods)
        for j, rec in enumerate(records):
            dp[j], dm[j], ntot[j] = project_populations(rec.snapshot, phi_p,
                                                        phi_m)
        # thin the stored snapshots to the requested cadence
        slim = [replace(r, snapshot=r.snapshot if store_every
                        and r.period_index % store_every == 0 else None)
                for r in records]
        z = np.abs(dp) ** 2 - np.abs(dm) ** 2
        verdict, period = classify_series(z, self.trap_floor)
        return RunRecord(params, slim, dp, dm, verdict, period,
                         float(ntot.min()))

    def run_two_mode(self, u_nl, n_periods=1500, mode="averaged"):
        """Two-mode trajectory from c_plus = 1 with couplings at u_nl."""
        coeffs = self.couplings_at(u_nl)
        initial = TwoModeState(1.0 + 0.0j, 0.0j)
        _, states = integrate_two_mode(initial, coeffs, n_periods,
                                       self.params.hbar_eff, mode=mode)
        z = np.array([s.z for s in states])
        verdict, period = classify_series(z, self.trap_floor)
        return z, verdict, period


def run_figure2(pipeline, u_list, n_periods=1500, store_every=0):
    """Momentum-reversal triptych: one RunRecord per requested nonlinearity."""
    out = []
    for u in u_list:
        out.append(pipeline.run_gpe(u, n_periods, store_every))
    return out


def run_figure3a(pipeline, u_grid, n_periods=1500):
    """Rate curves 1/T vs U from GPE, two-mode, and nonlinear splitting.

    Returns a list of row dicts; rates are per drive period, 0 for trapped
    runs, None where the estimator is unavailable (missing branch, marginal
    verdict).
    """
    rows = []
    hbar = pipeline.params.hbar_eff
    for u in u_grid:
        row = {"u": float(u), "rate_gpe": None, "rate_twomode": None,
               "rate_nl": None, "classification": None}
        try:
            rec = pipeline.run_gpe(u, n_periods)
            row["classification"] = rec.classification
            row["rate_gpe"] = _rate_of(rec.classification,
                                       rec.extracted_period)
        except ContinuationStuck:
            rows.append(row)
            continue
        try:
            _, verdict, period = pipeline.run_two_mode(u, n_periods)
            row["rate_twomode"] = _rate_of(verdict, period)
        except ContinuationStuck:
            pass
        phi_e, phi_o = pipeline.doublet_states(u)
        de = abs(phi_e.eigenvalue - phi_o.eigenvalue)
        if u == 0.0:
            de = pipeline.doublet().delta_lambda
        # |E_e - E_o| / (2 pi hbar) per time = |dE| / hbar per drive period
        row["rate_nl"] = de / hbar
        rows.append(row)
    return rows


def _rate_of(verdict, period):
    if verdict == TRAPPED:
        return 0.0
    if verdict == TUNNELLING:
        return 1.0 / period
    return None


def bisect_u_crit_two_mode(linear_coeffs, resolution=0.05, u_hi=None,
                           max_expand=40):
    """Critical U from Eq.-of-motion trapping verdicts with scaled couplings.

    Bisection on the closed-form self-trapping decision applied to the linear
    couplings scaled to each trial U; terminates when the bracket width drops
    below resolution * midpoint.
    """
    def trapped(u):
        return is_self_trapped(effective_params(linear_coeffs.scaled(u)))[0]

    lo = 0.0
    guess, degenerate = u_crit_estimate(linear_coeffs)
    if degenerate:
        return 0.0
    hi = u_hi if u_hi is not None else 2.0 * guess
    for _ in range(max_expand):
        if trapped(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        return None
    while hi - lo > resolution * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if trapped(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def bisect_u_crit_gpe(pipeline, resolution=0.05, n_periods=600, u_hi=None,
                      confirm_factor=2, max_expand=8):
    """Critical U from GPE run classifications, bisected to resolution.

    Runs start from the linear phi_plus and use short evolutions; the final
    bracket is confirmed with a confirm_factor longer run on each side.
    Marginal verdicts count as not trapped (tunnelling side), and so does a
    probe whose density spreads all the way to the box edge (strong-U
    delocalization is the opposite of island trapping).
    """
    guess, degenerate = u_crit_estimate(pipeline.coupling_constants())
    if degenerate:
        return 0.0

    def trapped(u, periods):
        try:
            rec = _linear_seed_run(pipeline, u, periods)
        except BoundaryLeak:
            return False
        return rec.classification == TRAPPED

    lo = 0.0
    hi = u_hi if u_hi is not None else 1.5 * guess
    for _ in range(max_expand):
        if trapped(hi, n_periods):
            break
        lo, hi = hi, 1.5 * hi
    else:
        return None
    while hi - lo > resolution * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if trapped(mid, n_periods):
            hi = mid
        else:
            lo = mid
    if lo > 0.0 and trapped(lo, confirm_factor * n_periods):
        hi = lo  # confirmation run overturned the tunnelling verdict
    return 0.5 * (lo + hi)


def _linear_seed_run(pipeline, u_nl, n_periods):
    """Short classification run seeded from the linear phi_plus."""
    psi0, phi_e, phi_o = pipeline.plus_state(0.0)
    phi_p = WaveFunction(pipeline.grid,
                         (phi_e.psi0.amplitudes + 1j * phi_o.psi0.amplitudes)
                         / np.sqrt(2.0))
    phi_m = WaveFunction(pipeline.grid,
                         (phi_e.psi0.amplitudes - 1j * phi_o.psi0.amplitudes)
                         / np.sqrt(2.0))
    params = pipeline.params.with_u(u_nl)
    records = evolve_stroboscopic(psi0, n_periods, params, pipeline.config,
                                  store_every=1)
    dp = np.empty(n_periods, dtype=np.complex128)
    dm = np.empty(n_periods, dtype=np.complex128)
    ntot = np.empty(n_periods)
    for j, rec in enumerate(records):
        dp[j], dm[j], ntot[j] = project_populations(rec.snapshot, phi_p,
                                                    phi_m)
    slim = [replace(r, snapshot=None) for r in records]
    z = np.abs(dp) ** 2 - np.abs(dm) ** 2
    verdict, period = classify_series(z, pipeline.trap_floor)
    return RunRecord(params, slim, dp, dm, verdict, period, float(ntot.min()))


def run_figure3bc(base_params, sweep_param, sweep_values, grid, config=None,
                  n_basis=128, n_phases=32, island_radius=None,
                  resolution=0.05, bisect_periods=600, with_gpe=True):
    """Critical-nonlinearity sweep: three estimators plus |dE| per point.

    sweep_param is "epsilon" or "hbar_eff"; base_params carries the fixed
    values (u_nl must be 0).  Points where the doublet cannot be identified
    are emitted with null estimates.  Returns a list of row dicts.
    """
    rows = []
    for value in sweep_values:
        row = {"value": float(value), "u_crit_linear": None,
               "u_crit_twomode": None, "u_crit_gpe": None, "delta_e": None}
        params = replace(base_params, **{sweep_param: float(value)})
        pipe = DoubletPipeline(params, grid, config, n_basis=n_basis,
                               n_phases=n_phases, island_radius=island_radius)
        try:
            lc = pipe.coupling_constants()
        except DoubletNotFound:
            rows.append(row)
            continue
        row["delta_e"] = abs(lc.delta_e)
        u_lin, degenerate = u_crit_estimate(lc)
        row["u_crit_linear"] = u_lin if not degenerate else 0.0
        row["u_crit_twomode"] = bisect_u_crit_two_mode(lc, resolution)
        if with_gpe:
            row["u_crit_gpe"] = bisect_u_crit_gpe(pipe, resolution,
                                                  bisect_periods)
        rows.append(row)
    return rows


def local_minima(values):
    """Indices of strict interior local minima (None entries break runs)."""
    idx = []
    for i in range(1, len(values) - 1):
        window = values[i - 1: i + 2]
        if any(v is None for v in window):
            continue
        if window[1] < window[0] and window[1] < window[2]:
            idx.append(i)
    return idx
