"""Linear Floquet analysis: monodromy operator, quasi-energy spectrum, and
identification of the even/odd tunnelling doublet.

The one-period evolution operator at U = 0 is represented in the truncated
eigenbasis of the time-averaged Hamiltonian H0 = p^2/2 + kappa sqrt(1 + x^2).
H0 commutes with parity, and so does the monodromy (the drive is even in x),
so the matrix is block diagonal in the parity-sorted basis and each block is
diagonalized separately; parity labels come for free.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .core import DRIVE_PERIOD, WaveFunction, potential, reflect
from .errors import BasisTooSmall, DegenerateUnresolved, DoubletNotFound
from .propagator import PropagatorConfig, propagate_batch


@dataclass(frozen=True)
class StaticBasis:
    """Lowest eigenstates of H0 on the grid, parity-labelled.

    columns: (n_points, n_basis) orthonormal w.r.t. the dx-weighted product;
    energies ascending; parities entries are +1 (even) or -1 (odd).
    """

    grid: object
    columns: np.ndarray
    energies: np.ndarray
    parities: np.ndarray

    @property
    def size(self):
        return self.columns.shape[1]

    def project(self, amps):
        return self.columns.conj().T @ amps * self.grid.dx

    def synthesize(self, coeffs):
        return self.columns @ coeffs


@dataclass(frozen=True)
class FloquetState:
    """One Floquet mode: strobe-phase state, eigenvalue, parity label.

    eigenvalue holds the quasi-energy (linear states) or the nonlinear
    eigenvalue E (nonlinear states).  snapshots, when materialized, hold the
    state at n_phases equally spaced drive phases starting at phase 0.
    """

    psi0: WaveFunction
    eigenvalue: float
    parity: int  # +1 even, -1 odd
    island_weight: float = None
    snapshots: list = None

    @property
    def grid(self):
        return self.psi0.grid


@dataclass(frozen=True)
class TunnellingDoublet:
    u_even: FloquetState
    u_odd: FloquetState
    hbar_eff: float

    @property
    def delta_lambda(self):
        return fold_splitting(self.u_even.eigenvalue - self.u_odd.eigenvalue,
                              self.hbar_eff)

    @property
    def t_lin(self):
        """Linear tunnelling period, in time units (divide by 2*pi for periods)."""
        return 2.0 * np.pi * self.hbar_eff / self.delta_lambda

    def plus_minus(self):
        """|u+-> = (|u_e> +- i |u_o>)/sqrt(2); u+ sits on the p > 0 island."""
        ae, ao = self.u_even.psi0.amplitudes, self.u_odd.psi0.amplitudes
        up = WaveFunction(self.u_even.grid, (ae + 1j * ao) / np.sqrt(2.0))
        um = WaveFunction(self.u_even.grid, (ae - 1j * ao) / np.sqrt(2.0))
        return up, um


def principal_window(lam, hbar_eff, period=DRIVE_PERIOD):
    """Fold a quasi-energy into (-pi hbar/T, pi hbar/T]."""
    width = 2.0 * np.pi * hbar_eff / period
    lam = np.mod(lam + width / 2.0, width) - width / 2.0
    if np.isscalar(lam) or lam.ndim == 0:
        return float(width / 2.0) if lam == -width / 2.0 else float(lam)
    lam[lam == -width / 2.0] = width / 2.0
    return lam


def fold_splitting(dlam, hbar_eff, period=DRIVE_PERIOD):
    """|lambda_e - lambda_o| folded into [0, pi hbar/T]."""
    width = 2.0 * np.pi * hbar_eff / period
    d = np.mod(dlam, width)
    return float(min(d, width - d))


def static_basis(params, grid, n_basis):
    """Lowest n_basis eigenstates of p^2/2 + kappa sqrt(1 + x^2).

    The kinetic operator is the spectral (FFT) differentiation matrix, i.e. a
    real symmetric circulant, so the basis is consistent with the split-step
    propagator's kinetic factor.
    """
    n = grid.n_points
    if n_basis > n:
        raise ValueError("n_basis exceeds grid size")
    kin_eigs = 0.5 * (params.hbar_eff * grid.k) ** 2
    col = sfft.ifft(kin_eigs)
    if np.abs(col.imag).max() > 1e-9 * np.abs(col.real).max():
        raise AssertionError("kinetic circulant should be real")
    h = sla.circulant(col.real)
    h[np.diag_indices(n)] += params.kappa * np.sqrt(1.0 + grid.x**2)
    vals, vecs = sla.eigh(h, subset_by_index=(0, n_basis - 1))
    vecs = vecs / np.sqrt(grid.dx)  # quadrature-orthonormal columns
    parities = np.empty(n_basis, dtype=int)
    for j in range(n_basis):
        v = vecs[:, j]
        s = float(np.real(np.vdot(v, reflect(v))) * grid.dx)
        parities[j] = 1 if s > 0 else -1
        if abs(abs(s) - 1.0) > 1e-6:
            raise DegenerateUnresolved(
                f"basis state {j} has ambiguous parity (<P> = {s:.3f})")
        # snap to exact parity: near-degenerate pairs mix slightly in eigh
        vecs[:, j] = 0.5 * (v + parities[j] * reflect(v))
    # re-orthonormalize within each parity block (ordering preserved)
    for par in (1, -1):
        idx = np.where(parities == par)[0]
        q, r = np.linalg.qr(vecs[:, idx])
        vecs[:, idx] = q * np.sign(np.diag(r)) / np.sqrt(grid.dx)
    return StaticBasis(grid, vecs.astype(np.complex128), vals, parities)


def monodromy_matrix(params, grid, basis=None, n_basis=128, config=None,
                     strobe_phase=0.0, loss_tol=1e-8, guard=0.5):
    """One-period evolution operator at U = 0 in the static eigenbasis.

    Columns are split-step propagations of the basis states over one period.
    The loss check uses a guard band: the basis is enlarged by `guard`
    (fraction of n_basis) and BasisTooSmall is raised when any propagated
    column loses more than loss_tol of its norm under projection onto the
    guarded span.  Guard-band columns themselves are not propagated; they only
    witness leakage, since truncation-edge states always shed a little weight
    just past the edge under the drive.  The returned n_basis block is snapped
    to the nearest unitary (polar decomposition), so unitarity holds to
    round-off.
    """
    if params.u_nl != 0.0:
        raise ValueError("monodromy is defined for the linear problem (U = 0)")
    config = config or PropagatorConfig()
    if basis is None:
        n_full = min(int(np.ceil(n_basis * (1.0 + guard))), grid.n_points)
        basis = static_basis(params, grid, n_full)
    else:
        n_basis = min(n_basis, basis.size)
    out = propagate_batch(basis.columns[:, :n_basis], params, grid, config,
                          t0=strobe_phase)
    while True:
        m_full = basis.project(out)
        loss = 1.0 - np.sum(np.abs(m_full) ** 2, axis=0)
        if not np.any(loss > loss_tol):
            break
        # grow the guard band; the propagated columns are reused
        n_grow = min(2 * basis.size, grid.n_points)
        if n_grow == basis.size or basis.size >= 8 * n_basis:
            raise BasisTooSmall(
                f"worst projected-norm loss {loss.max():.2e} > {loss_tol:.0e} "
                f"with a {basis.size}-state guard; increase n_basis or the box")
        basis = static_basis(params, grid, n_grow)
    m = m_full[:n_basis, :]
    # polar-unitarize per parity block: the raw matrix is block diagonal to
    # round-off, and a global SVD would mix parities through the near-null
    # space spanned by badly truncated edge columns
    par = basis.parities[:n_basis]
    u = np.zeros_like(m)
    for sign in (1, -1):
        idx = np.where(par == sign)[0]
        w, _, vh = sla.svd(m[np.ix_(idx, idx)])
        u[np.ix_(idx, idx)] = w @ vh
    return u, basis


def floquet_spectrum(params, grid, basis=None, n_basis=128, config=None,
                     strobe_phase=0.0, cross_tol=1e-6):
    """Quasi-energy spectrum and Floquet states at U = 0.

    Diagonalizes the monodromy parity block by parity block.  Returns a list
    of FloquetState sorted by quasi-energy, each with a unit-norm phase-0
    state on the grid.
    """
    m, basis = monodromy_matrix(params, grid, basis, n_basis, config,
                                strobe_phase)
    nb = m.shape[0]
    parities = basis.parities[:nb]
    hbar = params.hbar_eff
    states = []
    for par in (1, -1):
        idx = np.where(parities == par)[0]
        cross = np.abs(m[np.ix_(np.where(parities == -par)[0], idx)])
        if cross.size and cross.max() > cross_tol:
            raise DegenerateUnresolved(
                f"monodromy parity cross-block leakage {cross.max():.2e}")
        block = m[np.ix_(idx, idx)]
        mu, vecs = sla.eig(block)
        lam = principal_window(-hbar * np.angle(mu) / DRIVE_PERIOD, hbar)
        for j in range(len(mu)):
            coeffs = np.zeros(basis.size, dtype=np.complex128)
            coeffs[idx] = vecs[:, j]
            amps = basis.synthesize(coeffs)
            amps /= np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
            amps = _gauge_real(amps)
            states.append(FloquetState(WaveFunction(grid, amps, strobe_phase),
                                       float(lam[j]), par))
    states.sort(key=lambda s: s.eigenvalue)
    return states


def _gauge_real(amps):
    """Rotate the global phase so the state is as real as possible, with the
    largest-magnitude sample real positive."""
    theta = 0.5 * np.angle(np.sum(amps**2))
    a = amps * np.exp(-1j * theta)
    j = int(np.argmax(np.abs(a)))
    if a[j].real < 0:
        a = -a
    return a


def materialize_snapshots(state, params, config=None, n_phases=32):
    """Propagate a Floquet state through one period, storing n_phases states.

    Works for linear states (params.u_nl = 0) and for nonlinear Floquet states
    at their own u_nl.  Snapshot j sits at drive phase j*T/n_phases.
    """
    config = config or PropagatorConfig()
    if config.steps_per_period % n_phases != 0:
        raise ValueError("n_phases must divide steps_per_period")
    every = config.steps_per_period // n_phases
    _, snaps = propagate_batch(state.psi0.amplitudes[:, None], params,
                               state.grid, config, t0=0.0, n_periods=1,
                               snapshot_every=every)
    wfs = [WaveFunction(state.grid, s[:, 0], i * DRIVE_PERIOD / n_phases)
           for i, s in enumerate(snaps)]
    return replace(state, snapshots=wfs)


def island_weights(states, islands, params, radius=None, n_nodes=24):
    """Husimi mass of each state inside disks around the two island centres.

    radius defaults to 0.5 |p_star|.  Returns an array of m+ + m- per state.
    """
    from .husimi import island_mass_direct

    return np.array([sum(island_mass_direct(s.psi0, islands, params, radius,
                                            n_nodes))
                     for s in states])


def identify_tunnelling_doublet(spectrum, islands, params, radius=None,
                                weight_threshold=0.5, n_nodes=24):
    """Pick the even/odd pair with the largest island-localized Husimi mass.

    Fixes the relative phase of the pair so that |u+> = (|u_e> + i|u_o>)/sqrt2
    has positive mean momentum (sits on I+).
    """
    from .core import observables
    from .husimi import island_mass_direct

    weights = island_weights(spectrum, islands, params, radius, n_nodes)
    best = {}
    for st, w in zip(spectrum, weights):
        cur = best.get(st.parity)
        if cur is None or w > cur[1]:
            best[st.parity] = (st, w)
    if 1 not in best or -1 not in best:
        raise DoubletNotFound("spectrum lacks states of both parities")
    (ue, we), (uo, wo) = best[1], best[-1]
    if we < weight_threshold or wo < weight_threshold:
        raise DoubletNotFound(
            f"best island weights (even {we:.2f}, odd {wo:.2f}) below "
            f"threshold {weight_threshold}")
    ue = replace(ue, island_weight=float(we))
    uo = replace(uo, island_weight=float(wo))
    # sign convention: <u+|p|u+> > 0
    up = WaveFunction(ue.grid, (ue.psi0.amplitudes + 1j * uo.psi0.amplitudes)
                      / np.sqrt(2.0))
    if observables(up, params).mean_p < 0:
        uo = replace(uo, psi0=WaveFunction(uo.grid, -uo.psi0.amplitudes,
                                           uo.psi0.time_tag))
    return TunnellingDoublet(ue, uo, params.hbar_eff)
