"""Two-mode reduction of the driven GPE on the tunnelling doublet.

Couplings are the density-overlap integrals of the even/odd Floquet pair,
periodic in time with the drive; the coupled amplitude equations for
(c_plus, c_minus) follow by projecting the GPE on the pair and rotating to
the island basis.  With period-averaged couplings the motion is generated by

    H_eff = Lambda/2 (1 - zeta) + alpha zeta^{1/2} cos(phi)
            + beta zeta cos(2 phi),          zeta = 1 - z^2,

which yields closed-form self-trapping criteria and the critical
nonlinearity estimate U_crit = 2 |dE| / |Lambda0|.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import DRIVE_PERIOD
from .errors import DegenerateDoublet, GridMismatch, PhaseMismatch, \
    ToleranceFailure


@dataclass(frozen=True)
class CouplingCoefficients:
    """Periodic overlap couplings of the doublet and their period averages.

    u_ee/u_oo/u_eo are real arrays sampled at n equally spaced drive phases;
    a_eo is complex.  e_bar and delta_e come from the pair's eigenvalues.
    source is "linear" or "nonlinear" depending on the states used.
    """

    u_ee: np.ndarray
    u_oo: np.ndarray
    u_eo: np.ndarray
    a_eo: np.ndarray
    e_bar: float
    delta_e: float
    u_nl: float
    source: str = "nonlinear"

    @property
    def u_ee_bar(self):
        return float(np.mean(self.u_ee))

    @property
    def u_oo_bar(self):
        return float(np.mean(self.u_oo))

    @property
    def u_eo_bar(self):
        return float(np.mean(self.u_eo))

    @property
    def a_eo_bar(self):
        return complex(np.mean(self.a_eo))

    def scaled(self, u_new):
        """Same frozen states, different U prefactor (couplings scale linearly)."""
        f = u_new / self.u_nl
        return CouplingCoefficients(self.u_ee * f, self.u_oo * f,
                                    self.u_eo * f, self.a_eo * f,
                                    self.e_bar, self.delta_e, u_new,
                                    self.source)


@dataclass(frozen=True)
class TwoModeState:
    c_plus: complex
    c_minus: complex

    @property
    def z(self):
        return abs(self.c_plus) ** 2 - abs(self.c_minus) ** 2

    @property
    def varphi(self):
        """Relative phase theta_minus - theta_plus (undefined at z = +-1)."""
        return float(np.angle(self.c_minus) - np.angle(self.c_plus))

    @property
    def norm_sq(self):
        return abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2


@dataclass(frozen=True)
class EffectiveHamiltonianParams:
    lambda_cap: float
    alpha: float
    beta: float
    u_nl: float

    @property
    def lambda0(self):
        return self.lambda_cap / self.u_nl

    def energy(self, z, varphi):
        zeta = 1.0 - z**2
        return (0.5 * self.lambda_cap * (1.0 - zeta)
                + self.alpha * np.sqrt(np.maximum(zeta, 0.0)) * np.cos(varphi)
                + self.beta * zeta * np.cos(2.0 * varphi))


def compute_couplings(phi_e, phi_o, u_nl):
    """Overlap couplings from two FloquetStates with materialized snapshots.

    U_ij(t) = U int |phi_i|^2 |phi_j|^2 dx, A_eo(t) = U int phi_e^2 phi_o*^2,
    evaluated at every stored drive phase; delta_e = E_e - E_o.
    """
    if phi_e.snapshots is None or phi_o.snapshots is None:
        raise ValueError("states need materialized snapshots")
    if len(phi_e.snapshots) != len(phi_o.snapshots):
        raise PhaseMismatch("states sampled at different phase counts")
    u_ee, u_oo, u_eo, a_eo = [], [], [], []
    for se, so in zip(phi_e.snapshots, phi_o.snapshots):
        if se.grid != so.grid:
            raise GridMismatch("doublet members live on different grids")
        if abs(se.time_tag - so.time_tag) > 1e-9:
            raise PhaseMismatch("snapshot phases differ between members")
        dx = se.grid.dx
        de = np.abs(se.amplitudes) ** 2
        do = np.abs(so.amplitudes) ** 2
        u_ee.append(u_nl * float(np.sum(de * de) * dx))
        u_oo.append(u_nl * float(np.sum(do * do) * dx))
        u_eo.append(u_nl * float(np.sum(de * do) * dx))
        a_eo.append(u_nl * complex(np.sum(se.amplitudes ** 2
                                          * so.amplitudes.conj() ** 2) * dx))
    e_bar = 0.5 * (phi_e.eigenvalue + phi_o.eigenvalue)
    delta_e = phi_e.eigenvalue - phi_o.eigenvalue
    source = "nonlinear" if u_nl > 0 else "linear"
    return CouplingCoefficients(np.array(u_ee), np.array(u_oo),
                                np.array(u_eo), np.array(a_eo),
                                e_bar, delta_e, u_nl, source)


def linear_couplings(doublet, params, config=None, n_phases=32):
    """Couplings built from the linear doublet at unit U (tilde-U integrals)."""
    from .floquet import materialize_snapshots

    lin = params.with_u(0.0)
    ue = materialize_snapshots(doublet.u_even, lin, config, n_phases)
    uo = materialize_snapshots(doublet.u_odd, lin, config, n_phases)
    c = compute_couplings(ue, uo, 1.0)
    # delta_e must be the folded doublet splitting, not the raw difference
    sign = 1.0 if doublet.u_even.eigenvalue >= doublet.u_odd.eigenvalue else -1.0
    return CouplingCoefficients(c.u_ee, c.u_oo, c.u_eo, c.a_eo, c.e_bar,
                                sign * doublet.delta_lambda, 1.0, "linear")


def _rhs_plus_minus(cp, cm, uee, uoo, ueo, aeo, e_bar, delta_e, hbar):
    """Right-hand side of the coupled mode equations: returns (dcp, dcm)/dt."""
    ar, ai = aeo.real, aeo.imag
    k_self = ueo - 0.5 * ar - 0.25 * uee - 0.25 * uoo
    k_cross = 0.25 * uee + 0.25 * uoo - ueo - 0.5 * ar
    out = []
    for ca, cb in ((cp, cm), (cm, cp)):
        na, nb = abs(ca) ** 2, abs(cb) ** 2
        val = (e_bar * ca + 0.5 * delta_e * cb
               + ar * nb * ca - 1j * ai * na * cb
               + k_self * na * ca
               + (1j * ai / 2.0 - 0.25 * uee + 0.25 * uoo) * nb * cb
               + k_cross * cb**2 * np.conj(ca)
               + (1j * ai / 2.0 + 0.25 * uee - 0.25 * uoo) * ca**2 * np.conj(cb))
        out.append(val / (1j * hbar))
    return out[0], out[1]


def _periodic_eval(samples, t):
    """Trigonometric interpolation of periodic samples at time t."""
    n = len(samples)
    coef = np.fft.fft(samples) / n
    freqs = np.fft.fftfreq(n, d=1.0 / n)  # integer harmonics
    # drop the unpaired Nyquist mode for even n to keep the interpolant real
    if n % 2 == 0:
        coef[n // 2] = 0.0
    return np.sum(coef * np.exp(2j * np.pi * freqs * t / DRIVE_PERIOD))


def integrate_two_mode(initial, coeffs, n_periods, hbar_eff, mode="averaged",
                       rtol=1e-10, atol=1e-12, samples_per_period=16):
    """Integrate the coupled mode equations from a normalized initial state.

    mode "averaged" uses the period-averaged couplings; "time-dependent"
    interpolates the periodic samples trigonometrically.  Returns
    (times, states) with one TwoModeState per drive period (t = nT).
    """
    hbar = hbar_eff
    if mode == "averaged":
        uee, uoo, ueo = coeffs.u_ee_bar, coeffs.u_oo_bar, coeffs.u_eo_bar
        aeo = coeffs.a_eo_bar

        def rhs(t, y):
            cp, cm = y[0] + 1j * y[1], y[2] + 1j * y[3]
            dcp, dcm = _rhs_plus_minus(cp, cm, uee, uoo, ueo, aeo,
                                       coeffs.e_bar, coeffs.delta_e, hbar)
            return [dcp.real, dcp.imag, dcm.real, dcm.imag]
    elif mode == "time-dependent":
        def rhs(t, y):
            cp, cm = y[0] + 1j * y[1], y[2] + 1j * y[3]
            dcp, dcm = _rhs_plus_minus(
                cp, cm,
                _periodic_eval(coeffs.u_ee, t).real,
                _periodic_eval(coeffs.u_oo, t).real,
                _periodic_eval(coeffs.u_eo, t).real,
                _periodic_eval(coeffs.a_eo, t),
                coeffs.e_bar, coeffs.delta_e, hbar)
            return [dcp.real, dcp.imag, dcm.real, dcm.imag]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    y0 = [initial.c_plus.real, initial.c_plus.imag,
          initial.c_minus.real, initial.c_minus.imag]
    t_end = n_periods * DRIVE_PERIOD
    t_eval = np.arange(n_periods + 1) * DRIVE_PERIOD
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise ToleranceFailure(f"two-mode integration failed: {sol.message}")
    states = [TwoModeState(complex(a, b), complex(c, d))
              for a, b, c, d in sol.y.T]
    return sol.t, states


def effective_params(coeffs):
    """Effective-Hamiltonian parameters (Lambda, alpha, beta) from averages."""
    uee, uoo, ueo = coeffs.u_ee_bar, coeffs.u_oo_bar, coeffs.u_eo_bar
    ar = coeffs.a_eo_bar.real
    lam = 0.25 * (uee + uoo) + 1.5 * ar - ueo
    alpha = 0.5 * (uee - uoo) - coeffs.delta_e
    beta = 0.5 * ueo - 0.125 * (uee + uoo) + 0.25 * ar
    return EffectiveHamiltonianParams(lam, alpha, beta, coeffs.u_nl)


def _cos_poly_range(alpha, beta):
    """Exact range of f(phi) = alpha cos(phi) + beta cos(2 phi)."""
    cands = [alpha + beta, -alpha + beta]  # phi = 0, pi
    if beta != 0.0 and abs(alpha / (4.0 * beta)) <= 1.0:
        c0 = -alpha / (4.0 * beta)
        cands.append(alpha * c0 + beta * (2.0 * c0**2 - 1.0))
    return min(cands), max(cands)


def is_self_trapped(eff):
    """Decide self-trapping for the z(0) = 1 initialization, in closed form.

    Trapped iff f(phi) = alpha cos(phi) + beta cos(2 phi) never reaches
    Lambda/2 (energy conservation forbids z = 0).  Returns (trapped, witness)
    with witness a phase solving the crossing equation when untrapped.
    """
    alpha, beta, target = eff.alpha, eff.beta, 0.5 * eff.lambda_cap
    lo, hi = _cos_poly_range(alpha, beta)
    if not (lo <= target <= hi):
        return True, None
    f = lambda phi: alpha * np.cos(phi) + beta * np.cos(2.0 * phi) - target
    # bracket between the extrema locations
    phis = [0.0, np.pi]
    if beta != 0.0 and abs(alpha / (4.0 * beta)) <= 1.0:
        phis.insert(1, float(np.arccos(-alpha / (4.0 * beta))))
    for a, b in zip(phis[:-1], phis[1:]):
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return False, a
        if fa * fb <= 0.0:
            return False, float(brentq(f, a, b))
    return False, float(phis[-1])  # numerically at the range edge


def u_crit_estimate(linear_coeffs, min_split=1e-14):
    """Critical nonlinearity 2 |dE| / |Lambda0| from linear-state couplings.

    linear_coeffs must be built at unit U (see linear_couplings), so Lambda
    evaluated there is Lambda0 itself.  Returns (u_crit, degenerate_flag).
    """
    if linear_coeffs.u_nl != 1.0:
        raise ValueError("linear couplings must be evaluated at U = 1")
    lam0 = effective_params(linear_coeffs).lambda_cap
    de = abs(linear_coeffs.delta_e)
    if de < min_split:
        return 0.0, True
    return 2.0 * de / abs(lam0), False


def reappearance_check(coeffs, marginal_band=(0.9, 1.1)):
    """Self-trapping verdict from |Lambda / 2 alpha| with full couplings.

    Returns (trapped, ratio, marginal): trapped iff ratio > 1; marginal flags
    ratios inside the declared near-critical band where the beta << alpha
    reduction is unreliable.
    """
    eff = effective_params(coeffs)
    if eff.alpha == 0.0:
        return True, np.inf, False
    ratio = abs(eff.lambda_cap / (2.0 * eff.alpha))
    return ratio > 1.0, float(ratio), marginal_band[0] <= ratio <= marginal_band[1]
