"""Nonlinear Floquet states: time-periodic solutions of the driven GPE that
reform after one period up to the phase exp(-i E T / hbar_eff).

The solver minimizes the one-period reformation residual

    R(phi, E) = || propagate_T(phi) - exp(-i E T / hbar) phi ||^2

over (phi, E) with a unit-norm constraint, by Gauss-Newton in a truncated
parity-pure eigenbasis of the static Hamiltonian.  The Jacobian is built from
forward differences, with all perturbed states propagated in a single batch
so one iteration costs one batched one-period propagation.  Branches in U are
obtained by continuation from the linear tunnelling states.
"""

from dataclasses import dataclass

import numpy as np

from .core import DRIVE_PERIOD, WaveFunction
from .errors import ContinuationStuck
from .floquet import FloquetState, materialize_snapshots, static_basis
from .propagator import PropagatorConfig, propagate_batch


@dataclass(frozen=True)
class NonlinearFloquetSolution:
    state: FloquetState  # eigenvalue field holds E
    u_nl: float
    residual: float  # final squared residual
    continuation_parent: float = None  # u_nl of the seeding solution

    @property
    def energy(self):
        return self.state.eigenvalue


@dataclass(frozen=True)
class ContinuationSchedule:
    step_small: float = 0.005
    step_large: float = 0.05
    switch_at: float = 0.1

    def steps(self, u_from, u_to):
        """Monotone grid from u_from (exclusive) to u_to (inclusive)."""
        out = []
        u = u_from
        direction = 1.0 if u_to >= u_from else -1.0
        while (u_to - u) * direction > 1e-12:
            du = self.step_small if u < self.switch_at else self.step_large
            u = min(u + direction * du, u_to) if direction > 0 else \
                max(u - du, u_to)
            out.append(u)
        return out


def floquet_residual(phi0, energy, params, config=None):
    """Squared one-period reformation residual and its raw direction.

    Returns (residual, direction) where direction is the residual vector
    propagate_T(phi0) - exp(-iET/hbar) phi0 on the grid (dx-weighted norm).
    """
    config = config or PropagatorConfig()
    grid = phi0.grid
    out = propagate_batch(phi0.amplitudes[:, None], params, grid, config)[:, 0]
    r = out - np.exp(-1j * energy * DRIVE_PERIOD / params.hbar_eff) \
        * phi0.amplitudes
    return float(np.sum(np.abs(r) ** 2) * grid.dx), r


class _ReducedProblem:
    """Gauss-Newton solve of the reformation equations in a parity basis."""

    def __init__(self, basis, parity, params, config, gauge_index=None):
        idx = np.where(basis.parities == parity)[0]
        self.cols = basis.columns[:, idx]  # (n, m)
        self.m = len(idx)
        self.grid = basis.grid
        self.params = params
        self.config = config
        self.hbar = params.hbar_eff
        self.gauge_index = gauge_index

    def coeffs_of(self, amps):
        return self.cols.conj().T @ amps * self.grid.dx

    def amps_of(self, c):
        return self.cols @ c

    def _equations(self, prop_out, c, energy):
        """Residual equations for one propagated column."""
        rho = self.coeffs_of(prop_out) \
            - np.exp(-1j * energy * DRIVE_PERIOD / self.hbar) * c
        cons = np.sum(np.abs(c) ** 2) - 1.0
        gauge = c[self.gauge_index].imag
        return np.concatenate([rho.real, rho.imag, [cons, gauge]])

    def solve(self, c0, e0, tol=1e-8, max_iter=12, fd_step=1e-7):
        """Gauss-Newton iteration; returns (c, E, squared residual)."""
        m = self.m
        c = c0 / np.linalg.norm(c0)
        energy = e0
        n_var = 2 * m + 1
        best = None
        for _ in range(max_iter):
            # batch: base point plus one forward perturbation per c-variable
            batch = np.empty((self.grid.n_points, n_var), dtype=np.complex128)
            batch[:, 0] = self.amps_of(c)
            for j in range(m):
                batch[:, 1 + j] = batch[:, 0] + fd_step * self.cols[:, j]
                batch[:, 1 + m + j] = batch[:, 0] + 1j * fd_step * self.cols[:, j]
            out = propagate_batch(batch, self.params, self.grid, self.config)
            f0 = self._equations(out[:, 0], c, energy)
            res = float(np.sum(f0[:2 * m] ** 2))
            if best is None or res < best[2]:
                best = (c.copy(), energy, res)
            if res < tol and abs(f0[2 * m]) < 1e-10:
                break
            jac = np.empty((2 * m + 2, n_var))
            for j in range(m):
                dc = c.copy()
                dc[j] += fd_step
                jac[:, j] = (self._equations(out[:, 1 + j], dc, energy) - f0) \
                    / fd_step
                dc = c.copy()
                dc[j] += 1j * fd_step
                jac[:, m + j] = (self._equations(out[:, 1 + m + j], dc, energy)
                                 - f0) / fd_step
            # E-column is analytic: d rho / dE = (iT/hbar) e^{-iET/hbar} c
            de = (1j * DRIVE_PERIOD / self.hbar) \
                * np.exp(-1j * energy * DRIVE_PERIOD / self.hbar) * c
            jac[:, 2 * m] = np.concatenate([de.real, de.imag, [0.0, 0.0]])
            step, *_ = np.linalg.lstsq(jac, -f0, rcond=None)
            # damped update
            lam = 1.0
            for _ in range(6):
                cn = c + lam * (step[:m] + 1j * step[m:2 * m])
                en = energy + lam * step[2 * m]
                outn = propagate_batch(self.amps_of(cn)[:, None], self.params,
                                       self.grid, self.config)[:, 0]
                fn = self._equations(outn, cn, en)
                if np.sum(fn[:2 * m] ** 2) < res or lam < 0.05:
                    c, energy = cn, en
                    break
                lam *= 0.5
        return best


def solve_nonlinear_floquet(seed, u_target, params, config=None,
                            basis=None, n_basis=96,
                            schedule=None, tol=1e-8, store_all=True,
                            n_phases=None):
    """Continue a Floquet branch in U from a seed state to u_target.

    seed: a linear FloquetState (treated as the U = seed_u solution; the seed
    U is params.u_nl, normally 0) or a NonlinearFloquetSolution to resume.
    Returns the list of NonlinearFloquetSolution along the path (ending at
    u_target); raises ContinuationStuck (with .last_good_u) on failure.
    """
    config = config or PropagatorConfig()
    schedule = schedule or ContinuationSchedule()
    if isinstance(seed, NonlinearFloquetSolution):
        u_from = seed.u_nl
        state = seed.state
    else:
        u_from = params.u_nl
        state = seed
    grid = state.grid
    if basis is None:
        basis = static_basis(params.with_u(0.0), grid, n_basis)
    gauge_amps = state.psi0.amplitudes
    prob = _ReducedProblem(basis, state.parity, params, config)
    c = prob.coeffs_of(gauge_amps)
    cap = 1.0 - np.sum(np.abs(c) ** 2)
    if cap > 1e-8:
        raise ValueError(f"seed loses {cap:.1e} of its norm in the reduced "
                         "basis; increase n_basis")
    prob.gauge_index = int(np.argmax(np.abs(c)))
    c = c * np.exp(-1j * np.angle(c[prob.gauge_index]))
    energy = state.eigenvalue
    dx = grid.dx

    solutions = []
    parent = u_from
    for u in schedule.steps(u_from, u_target):
        du = u - parent
        # first-order eigenvalue shift from the density overlap
        amps = prob.amps_of(c)
        e_guess = energy + du * float(np.sum(np.abs(amps) ** 4) * dx)
        attempt_us = [u]
        done = False
        for _ in range(2):  # bisect the step at most twice when stuck
            ut = attempt_us[-1]
            prob.params = params.with_u(ut)
            got = prob.solve(c, e_guess, tol=tol)
            if got is not None and got[2] < tol:
                c, energy, res = got
                c = c / np.linalg.norm(c)
                c = c * np.exp(-1j * np.angle(c[prob.gauge_index]))
                if abs(ut - u) < 1e-15:
                    done = True
                    break
                e_guess = energy + (u - ut) * float(
                    np.sum(np.abs(prob.amps_of(c)) ** 4) * dx)
                attempt_us.append(u)
            else:
                attempt_us.append(parent + 0.5 * (ut - parent))
                e_guess = energy + (attempt_us[-1] - parent) * float(
                    np.sum(np.abs(prob.amps_of(c)) ** 4) * dx)
        if not done:
            raise ContinuationStuck(
                f"residual stalled near U={u:.4f}", last_good_u=parent)
        amps = prob.amps_of(c)
        amps = amps / np.sqrt(np.sum(np.abs(amps) ** 2) * dx)
        fl = FloquetState(WaveFunction(grid, amps, 0.0), float(energy),
                          state.parity)
        if n_phases:
            fl = materialize_snapshots(fl, params.with_u(u), config, n_phases)
        sol = NonlinearFloquetSolution(fl, u, res, parent)
        if store_all or u == u_target:
            solutions.append(sol)
        parent = u
    return solutions
