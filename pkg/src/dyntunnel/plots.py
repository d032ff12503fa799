"""Figure rendering for the CLI report paths (matplotlib, Agg backend).

Each function takes data already computed by the library and writes one PNG
next to the delimited output; nothing here feeds back into the numerics.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_poincare(path, section, islands=None):
    """Scatter the stroboscopic trajectories; mark island centres."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for traj in section.trajectories:
        ax.plot(traj[:, 0], traj[:, 1], ".", ms=0.5, color="k", alpha=0.35)
    if islands:
        for isl in islands:
            ax.plot([isl.x_star], [isl.p_star], "o", ms=7,
                    mfc="none", mec="crimson", mew=1.6)
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_title(f"stroboscopic section, kappa={section.params.kappa}, "
                 f"epsilon={section.params.epsilon}")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def render_husimi(path, qmap, islands=None, radius=None):
    """Heat map of a Husimi distribution on its phase-space lattice."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    im = ax.pcolormesh(qmap.x_centers, qmap.p_centers, qmap.values,
                       shading="auto", cmap="magma")
    fig.colorbar(im, ax=ax, label="Q(x, p)")
    if islands:
        theta = np.linspace(0.0, 2.0 * np.pi, 128)
        for isl in islands:
            if radius:
                ax.plot(isl.x_star + radius * np.cos(theta),
                        isl.p_star + radius * np.sin(theta),
                        "-", lw=1.0, color="cyan")
            ax.plot([isl.x_star], [isl.p_star], "+", color="cyan")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def render_reversal(path, run_records, hbar_eff=None):
    """Momentum heat maps plus population series for a set of runs."""
    n = len(run_records)
    fig, axes = plt.subplots(2, n, figsize=(4.0 * n, 6.0), squeeze=False)
    for col, rec in enumerate(run_records):
        dens = np.array([r.momentum_density for r in rec.records])
        periods = np.array([r.period_index for r in rec.records])
        ax = axes[0][col]
        ax.imshow(dens.T, origin="lower", aspect="auto",
                  extent=(periods[0], periods[-1], 0, dens.shape[1]),
                  cmap="viridis")
        ax.set_title(f"U={rec.params.u_nl:g} ({rec.classification})")
        ax.set_xlabel("period")
        ax.set_ylabel("momentum bin")
        ax = axes[1][col]
        ax.plot(periods, np.abs(rec.d_plus) ** 2, "k-", label="|d+|^2")
        ax.plot(periods, np.abs(rec.d_minus) ** 2, "r--", label="|d-|^2")
        ax.plot(periods, np.abs(rec.d_plus) ** 2 + np.abs(rec.d_minus) ** 2,
                "k:", label="n_tot")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("period")
        if col == 0:
            ax.set_ylabel("population")
            ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def render_rates(path, rows):
    """Tunnelling rate vs nonlinearity for the three estimators."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    u = [r["u"] for r in rows]

    def series(key):
        return [np.nan if r[key] is None else r[key] for r in rows]

    ax.plot(u, series("rate_gpe"), "k-", label="GPE")
    ax.plot(u, series("rate_twomode"), "bx", label="two-mode")
    ax.plot(u, series("rate_nl"), "o", mfc="none", mec="r",
            label="|dE| splitting")
    ax.set_xlabel("U")
    ax.set_ylabel("1/T per drive period")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def render_ucrit_sweep(path, rows, sweep_param):
    """Critical-nonlinearity estimators and |dE| along a sweep."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 6.5), sharex=True)
    v = [r["value"] for r in rows]

    def series(key):
        return [np.nan if r[key] is None else r[key] for r in rows]

    ax1.semilogy(v, series("u_crit_linear"), "bo", label="linear formula")
    ax1.semilogy(v, series("u_crit_twomode"), "o", mfc="none", mec="r",
                 label="two-mode bisection")
    ax1.semilogy(v, series("u_crit_gpe"), "kx", label="GPE bisection")
    ax1.set_ylabel("U_crit")
    ax1.legend(fontsize=8)
    ax2.semilogy(v, series("delta_e"), "ms-", label="|dE|")
    ax2.set_xlabel(sweep_param)
    ax2.set_ylabel("|dE|")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)


def render_spectrum(path, states, doublet=None):
    """Quasi-energy spectrum by parity, island weight as marker size."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for parity, color in ((1, "tab:blue"), (-1, "tab:red")):
        lam = [s.eigenvalue for s in states if s.parity == parity]
        ax.plot(lam, [parity] * len(lam), "|", ms=18, color=color,
                label="even" if parity == 1 else "odd")
    if doublet is not None:
        for st in (doublet.u_even, doublet.u_odd):
            ax.plot([st.eigenvalue], [st.parity], "o", ms=8,
                    mfc="none", mec="k")
    ax.set_yticks([-1, 1], ["odd", "even"])
    ax.set_xlabel("quasi-energy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
