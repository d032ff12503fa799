"""Physical system definition: parameters, grids, wave functions, observables.

Everything works in the scaled units of the driven Hamiltonian
H = p^2/2 + kappa [1 + epsilon cos(t)] sqrt(1 + x^2), drive period T = 2*pi,
with p = -i hbar_eff d/dx.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch, GridTooNarrow, NonFinite

DRIVE_PERIOD = 2.0 * np.pi


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless physical parameters of the driven condensate."""

    kappa: float
    epsilon: float
    hbar_eff: float
    u_nl: float = 0.0
    drive_period: float = DRIVE_PERIOD

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.hbar_eff > 0:
            raise ValueError(f"hbar_eff must be > 0, got {self.hbar_eff}")
        if self.u_nl < 0:
            raise ValueError(f"u_nl must be >= 0, got {self.u_nl}")
        if self.drive_period != DRIVE_PERIOD:
            raise ValueError("drive_period is fixed at 2*pi by the scaling")

    def with_u(self, u_nl):
        return SystemParams(self.kappa, self.epsilon, self.hbar_eff, u_nl)


def potential(x, t, params):
    """Driven potential kappa [1 + epsilon cos(t)] sqrt(1 + x^2)."""
    return params.kappa * (1.0 + params.epsilon * np.cos(t)) * np.sqrt(1.0 + x**2)


def force(x, t, params):
    """Classical force -dV/dx; globally bounded by kappa (1 + epsilon)."""
    return -params.kappa * (1.0 + params.epsilon * np.cos(t)) * x / np.sqrt(1.0 + x**2)


def force_gradient(x, t, params):
    """dF/dx, used by tangent-map (variational) integration."""
    return -params.kappa * (1.0 + params.epsilon * np.cos(t)) * (1.0 + x**2) ** -1.5


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform FFT grid symmetric about x = 0 (periodic convention, x_max excluded)."""

    x_max: float
    n_points: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.x_max > 0:
            raise ValueError("x_max must be > 0")
        dx = 2.0 * self.x_max / n
        object.__setattr__(self, "x", -self.x_max + dx * np.arange(n))
        object.__setattr__(self, "k", 2.0 * np.pi * sfft.fftfreq(n, d=dx))

    @property
    def x_min(self):
        return -self.x_max

    @property
    def dx(self):
        return 2.0 * self.x_max / self.n_points

    def momenta(self, params):
        """Conjugate momentum grid p = hbar_eff * k (FFT ordering)."""
        return params.hbar_eff * self.k

    def __eq__(self, other):
        return (isinstance(other, SpatialGrid)
                and self.x_max == other.x_max and self.n_points == other.n_points)

    def __hash__(self):
        return hash((self.x_max, self.n_points))


def reflect(amplitudes):
    """Parity operation x -> -x on the periodic grid: psi[j] -> psi[(N - j) mod N]."""
    out = amplitudes[::-1].copy() if amplitudes.ndim == 1 else amplitudes[::-1, ...].copy()
    return np.roll(out, 1, axis=0)


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes on a spatial grid; unit discrete norm for physical states."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        if len(self.amplitudes) != self.grid.n_points:
            raise GridMismatch("amplitude length does not match grid")

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def normalized(self):
        a = self.amplitudes / np.sqrt(self.norm())
        return WaveFunction(self.grid, a, self.time_tag)

    def reflected(self):
        return WaveFunction(self.grid, reflect(self.amplitudes), self.time_tag)


def inner(bra, ket):
    """Grid quadrature of <bra|ket>; both must share a grid."""
    if bra.grid != ket.grid:
        raise GridMismatch("states live on different grids")
    return complex(np.vdot(bra.amplitudes, ket.amplitudes) * bra.grid.dx)


@dataclass(frozen=True)
class Observables:
    norm: float
    mean_x: float
    mean_p: float
    momentum_density: np.ndarray
    p_axis: np.ndarray


def observables(psi, params):
    """Norm, <x>, spectral <p> and unit-sum momentum density of a state.

    The momentum density is returned over an fftshift-ordered p axis so it can
    be dumped directly as a plot row.
    """
    a = psi.amplitudes
    if not np.all(np.isfinite(a)):
        raise NonFinite("wave function contains non-finite amplitudes")
    g = psi.grid
    dx = g.dx
    dens = np.abs(a) ** 2
    norm = float(np.sum(dens) * dx)
    mean_x = float(np.sum(g.x * dens) * dx / norm)
    ft = sfft.fft(a)
    p = params.hbar_eff * g.k
    # <p> = <psi| -i hbar d/dx |psi>, evaluated spectrally
    mean_p = float(np.real(np.vdot(a, sfft.ifft(p * ft))) * dx / norm)
    mom = np.abs(sfft.fftshift(ft)) ** 2
    mom /= mom.sum()
    return Observables(norm, mean_x, mean_p, mom, sfft.fftshift(p))


def coherent_state(x0, p0, params, grid):
    """Minimum-uncertainty Gaussian at (x0, p0), widths set by hbar_eff.

    Unit mass / unit drive frequency convention: sigma_x = sqrt(hbar_eff / 2).
    Raises GridTooNarrow when the Gaussian tail at the box edge exceeds 1e-12
    of the peak.
    """
    hbar = params.hbar_eff
    x = grid.x
    tail = min(abs(grid.x_min - x0), abs(grid.x_max - x0))
    if np.exp(-tail**2 / (2.0 * hbar)) > 1e-12:
        raise GridTooNarrow(
            f"coherent state at x0={x0} does not fit in |x| < {grid.x_max}")
    a = np.exp(-((x - x0) ** 2) / (2.0 * hbar) + 1j * p0 * x / hbar)
    a = a.astype(np.complex128)
    a /= np.sqrt(np.sum(np.abs(a) ** 2) * grid.dx)
    return WaveFunction(grid, a)
