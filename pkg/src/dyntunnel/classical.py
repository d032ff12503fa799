"""Classical dynamics of the driven well: symplectic integration, Poincare
sections, period-one island fixed points and a finite-time chaos indicator.

All routines are vectorized over trajectories: x and p may be arrays of equal
shape, integrated in lock-step with a fixed-step 4th-order symmetric symplectic
composition (Yoshida triple jump of velocity-Verlet substeps), so stroboscopic
times t = 2*pi*n are hit exactly.
"""

from dataclasses import dataclass

import numpy as np

from .core import DRIVE_PERIOD, force, force_gradient
from .errors import NoConvergence, NonFinite, NotElliptic

DEFAULT_DT = DRIVE_PERIOD / 2048

# Yoshida 4th-order composition weights
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float
    t: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.p) and np.isfinite(self.t)):
            raise NonFinite("phase point has non-finite coordinates")


@dataclass(frozen=True)
class PoincareSection:
    """Stroboscopic trajectories: points[i] has shape (n_periods, 2)."""

    trajectories: list
    params: object
    strobe_phase: float = 0.0


@dataclass(frozen=True)
class IslandFixedPoint:
    x_star: float
    p_star: float
    stability: float  # trace of the 2x2 monodromy Jacobian
    sign: int  # +1 for I_plus (p_star > 0), -1 for I_minus

    @property
    def elliptic(self):
        return abs(self.stability) < 2.0


def _verlet(x, p, t, dt, params):
    """One velocity-Verlet substep."""
    f0 = force(x, t, params)
    p = p + 0.5 * dt * f0
    x = x + dt * p
    f1 = force(x, t + dt, params)
    p = p + 0.5 * dt * f1
    return x, p


def _step4(x, p, t, dt, params):
    """One 4th-order composed step of size dt."""
    x, p = _verlet(x, p, t, _W1 * dt, params)
    x, p = _verlet(x, p, t + _W1 * dt, _W0 * dt, params)
    x, p = _verlet(x, p, t + (_W1 + _W0) * dt, _W1 * dt, params)
    return x, p


def _step4_tangent(x, p, dxdp, t, dt, params):
    """Composed step that also advances tangent vectors dxdp = (dx, dp)."""
    for w, t0 in ((_W1, 0.0), (_W0, _W1), (_W1, _W1 + _W0)):
        h = w * dt
        tt = t + t0 * dt
        g0 = force_gradient(x, tt, params)
        f0 = force(x, tt, params)
        dx, dp = dxdp
        dp = dp + 0.5 * h * g0 * dx
        p = p + 0.5 * h * f0
        x = x + h * p
        dx = dx + h * dp
        g1 = force_gradient(x, tt + h, params)
        dp = dp + 0.5 * h * g1 * dx
        p = p + 0.5 * h * force(x, tt + h, params)
        dxdp = (dx, dp)
    return x, p, dxdp


def integrate_classical(x, p, t0, duration, params, dt=DEFAULT_DT):
    """Advance Hamilton's equations by `duration` starting at time t0.

    x, p may be scalars or arrays. Negative durations integrate backwards.
    """
    if duration == 0:
        return x, p
    n = max(1, int(round(abs(duration) / dt)))
    h = duration / n
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    t = t0
    for i in range(n):
        x, p = _step4(x, p, t0 + i * h, h, params)
    return x, p


def integrate_point(start, duration, params, dt=DEFAULT_DT):
    """PhasePoint-in, PhasePoint-out wrapper around integrate_classical."""
    x, p = integrate_classical(start.x, start.p, start.t, duration, params, dt)
    return PhasePoint(float(x), float(p), start.t + duration)


def stroboscopic_map(x, p, params, strobe_phase=0.0, dt=DEFAULT_DT):
    """Advance by exactly one drive period from the strobe phase."""
    return integrate_classical(x, p, strobe_phase, DRIVE_PERIOD, params, dt)


def poincare_section(seeds, n_periods, params, strobe_phase=0.0, dt=DEFAULT_DT):
    """Record every seed at times strobe_phase + 2*pi*n, n = 1..n_periods."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    x = np.array([s.x for s in seeds], dtype=float)
    p = np.array([s.p for s in seeds], dtype=float)
    out = np.empty((len(seeds), n_periods, 2))
    for n in range(n_periods):
        x, p = stroboscopic_map(x, p, params, strobe_phase, dt)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise NonFinite("classical integration produced non-finite values")
        out[:, n, 0] = x
        out[:, n, 1] = p
    return PoincareSection([out[i] for i in range(len(seeds))], params, strobe_phase)


def map_jacobian(x, p, params, strobe_phase=0.0, dt=DEFAULT_DT, h=1e-6):
    """2x2 Jacobian of the stroboscopic map by central finite differences.

    Vectorized: returns arrays j = (j_xx, j_xp, j_px, j_pp) matching x's shape.
    """
    xp1, pp1 = stroboscopic_map(x + h, p, params, strobe_phase, dt)
    xm1, pm1 = stroboscopic_map(x - h, p, params, strobe_phase, dt)
    xp2, pp2 = stroboscopic_map(x, p + h, params, strobe_phase, dt)
    xm2, pm2 = stroboscopic_map(x, p - h, params, strobe_phase, dt)
    return ((xp1 - xm1) / (2 * h), (xp2 - xm2) / (2 * h),
            (pp1 - pm1) / (2 * h), (pp2 - pm2) / (2 * h))


def find_period_one_islands(params, strobe_phase=0.0, dt=DEFAULT_DT,
                            seed_window=(6.0, 3.0), n_seeds=(32, 32),
                            max_iter=40, tol=1e-11, dedupe=1e-5,
                            p_min=0.05):
    """Locate the elliptic period-one fixed points I_plus, I_minus.

    Damped Newton iteration on F(x, p) = Map(x, p) - (x, p), run in parallel
    from a rectangular seed lattice, with the Jacobian from finite differences
    of the map. Returns (I_plus, I_minus); raises NoConvergence / NotElliptic.
    """
    xs = np.linspace(-seed_window[0], seed_window[0], n_seeds[0])
    ps = np.linspace(-seed_window[1], seed_window[1], n_seeds[1])
    x, p = (a.ravel() for a in np.meshgrid(xs, ps))
    alive = np.ones(x.shape, dtype=bool)

    def residual(x, p):
        mx, mp = stroboscopic_map(x, p, params, strobe_phase, dt)
        return mx - x, mp - p

    fx, fp = residual(x, p)
    for _ in range(max_iter):
        r2 = fx**2 + fp**2
        if not np.any(alive):
            break
        jxx, jxp, jpx, jpp = map_jacobian(x, p, params, strobe_phase, dt)
        # Newton step on F = Map - Id: solve (J - I) d = -F
        axx, axp, apx, app = jxx - 1.0, jxp, jpx, jpp - 1.0
        det = axx * app - axp * apx
        det = np.where(np.abs(det) < 1e-14, np.nan, det)
        dx = (-fx * app + fp * axp) / det
        dp = (fx * apx - fp * axx) / det
        bad = ~np.isfinite(dx) | ~np.isfinite(dp)
        dx = np.where(bad, 0.0, dx)
        dp = np.where(bad, 0.0, dp)
        alive &= ~bad
        # damped update: halve until the residual decreases (3 tries, batch)
        lam = np.where(alive, 1.0, 0.0)
        for _ in range(3):
            nx, np_ = x + lam * dx, p + lam * dp
            nfx, nfp = residual(nx, np_)
            worse = (nfx**2 + nfp**2 > r2) & alive
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        x, p, fx, fp = nx, np_, nfx, nfp
        # freeze diverging iterates
        alive &= (np.abs(x) < 4 * seed_window[0]) & (np.abs(p) < 4 * seed_window[1])
        if np.all((fx**2 + fp**2)[alive] < tol**2):
            break

    r2 = fx**2 + fp**2
    ok = alive & (r2 < tol**2) & (np.abs(p) > p_min)
    if not np.any(ok):
        raise NoConvergence("Newton found no period-one fixed point with p != 0")

    # deduplicate converged roots
    roots = []
    for xi, pi in zip(x[ok], p[ok]):
        if not any((xi - a) ** 2 + (pi - b) ** 2 < dedupe**2 for a, b in roots):
            roots.append((xi, pi))

    cands = []
    for xi, pi in roots:
        jxx, jxp, jpx, jpp = map_jacobian(
            np.array([xi]), np.array([pi]), params, strobe_phase, dt)
        tr = float(jxx[0] + jpp[0])
        cands.append(IslandFixedPoint(float(xi), float(pi), tr,
                                      1 if pi > 0 else -1))

    ups = [c for c in cands if c.sign > 0 and c.elliptic]
    downs = [c for c in cands if c.sign < 0 and c.elliptic]
    if not ups or not downs:
        if cands and all(not c.elliptic for c in cands):
            raise NotElliptic("period-one orbits found but none elliptic")
        raise NoConvergence("could not locate both I+ and I- islands")
    # pick the mirror-symmetric pair: largest |p| orbits
    iplus = max(ups, key=lambda c: abs(c.p_star))
    iminus = max(downs, key=lambda c: abs(c.p_star))
    return iplus, iminus


def chaos_indicator(seeds, params, n_periods=200, strobe_phase=0.0,
                    dt=DEFAULT_DT, threshold=1e-2):
    """Finite-time tangent-map growth rate per period, and a chaos flag.

    Returns (rates, flags): rates are log-growth of a tangent vector per drive
    period; flags mark rates above `threshold` (the chaotic-sea indicator used
    by the KAM regression).
    """
    x = np.array([s.x for s in seeds], dtype=float)
    p = np.array([s.p for s in seeds], dtype=float)
    dx = np.ones_like(x)
    dp = np.zeros_like(p)
    log_growth = np.zeros_like(x)
    n_steps = int(round(DRIVE_PERIOD / dt))
    h = DRIVE_PERIOD / n_steps
    for n in range(n_periods):
        t = strobe_phase + n * DRIVE_PERIOD
        for i in range(n_steps):
            x, p, (dx, dp) = _step4_tangent(x, p, (dx, dp), t + i * h, h, params)
        mag = np.hypot(dx, dp)
        log_growth += np.log(mag)
        dx /= mag
        dp /= mag
    rates = log_growth / n_periods
    return rates, rates > threshold
