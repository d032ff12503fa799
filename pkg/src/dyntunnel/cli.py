"""Command-line front end.

Every subcommand resolves a configuration (defaults < config file < --set
overrides), runs its pipeline, and writes into --out: a JSON manifest, one or
more delimited data files (CSV or JSON-lines), and a rendered figure unless
--no-plot is given.  Exit codes: 0 success, 2 configuration error,
3 numerical failure (partial outputs are left in place).
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .classical import chaos_indicator, find_period_one_islands, \
    poincare_section, PhasePoint
from .config import resolve_config, write_manifest
from .core import DRIVE_PERIOD, WaveFunction
from .errors import ConfigError, DynTunnelError
from .experiments import (DoubletPipeline, bisect_u_crit_gpe,
                          bisect_u_crit_two_mode, run_figure2, run_figure3a,
                          run_figure3bc)
from .floquet import floquet_spectrum, identify_tunnelling_doublet, \
    island_weights, materialize_snapshots
from .husimi import PhaseSpaceLattice, default_island_radius, husimi, \
    island_mass
from .nlfloquet import solve_nonlinear_floquet
from .snapshots import save_branch, save_floquet_state, write_records_csv
from .twomode import effective_params, u_crit_estimate


def _seed_lattice(cfg, seed):
    """Uniform phase-space seed lattice with deterministic sub-cell jitter."""
    xs = np.linspace(-cfg.seed_x_window, cfg.seed_x_window, cfg.lattice_nx)
    ps = np.linspace(-cfg.seed_p_window, cfg.seed_p_window, cfg.lattice_np)
    xg, pg = (a.ravel() for a in np.meshgrid(xs, ps))
    rng = np.random.default_rng(seed)
    jx = 0.5 * (xs[1] - xs[0]) * (rng.random(xg.size) - 0.5)
    jp = 0.5 * (ps[1] - ps[0]) * (rng.random(pg.size) - 0.5)
    return [PhasePoint(float(x), float(p))
            for x, p in zip(xg + jx, pg + jp)]


def _write_table(path, rows, fmt):
    """Delimited rows (list of dicts, shared keys) as CSV or JSON-lines."""
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w") as fh:
        if fmt == "jsonl":
            for row in rows:
                fh.write(json.dumps({k: row[k] for k in keys}) + "\n")
            return
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row[k]) for k in keys) + "\n")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pipeline(cfg):
    return DoubletPipeline(cfg.system_params(u_nl=0.0), cfg.grid(),
                           cfg.propagator_config(), n_basis=cfg.n_basis,
                           n_phases=cfg.n_phases,
                           island_radius=cfg.island_radius or None,
                           trap_floor=cfg.trap_floor)


def cmd_poincare(cfg, out, fmt, seed, plot):
    params = cfg.system_params(u_nl=0.0)
    seeds = _seed_lattice(cfg, seed)
    section = poincare_section(seeds, cfg.poincare_periods, params)
    rows = []
    for i, traj in enumerate(section.trajectories):
        for n in range(traj.shape[0]):
            rows.append({"seed": i, "period": n + 1,
                         "x": float(traj[n, 0]), "p": float(traj[n, 1])})
    _write_table(out / f"poincare.{fmt}", rows, fmt)
    if plot:
        from .plots import render_poincare
        islands = find_period_one_islands(params)
        render_poincare(out / "poincare.png", section, islands)


def cmd_islands(cfg, out, fmt, seed, plot):
    params = cfg.system_params(u_nl=0.0)
    islands = find_period_one_islands(params)
    seeds = _seed_lattice(cfg, seed)
    rates, flags = chaos_indicator(seeds, params,
                                   threshold=cfg.chaos_threshold)
    frac = float(np.mean(flags))
    rows = [{"sign": isl.sign, "x_star": isl.x_star, "p_star": isl.p_star,
             "trace": isl.stability, "elliptic": isl.elliptic,
             "chaotic_fraction": frac} for isl in islands]
    _write_table(out / f"islands.{fmt}", rows, fmt)
    if plot:
        from .plots import render_poincare
        section = poincare_section(seeds[:256], cfg.poincare_periods, params)
        render_poincare(out / "islands.png", section, islands)


def cmd_floquet(cfg, out, fmt, seed, plot):
    params = cfg.system_params(u_nl=0.0)
    grid, pconf = cfg.grid(), cfg.propagator_config()
    spectrum = floquet_spectrum(params, grid, n_basis=cfg.n_basis,
                                config=pconf)
    islands = find_period_one_islands(params)
    weights = island_weights(spectrum, islands, params,
                             cfg.island_radius or None)
    doublet = identify_tunnelling_doublet(spectrum, islands, params,
                                          radius=cfg.island_radius or None)
    rows = [{"index": i, "quasi_energy": s.eigenvalue, "parity": s.parity,
             "island_weight": float(w)}
            for i, (s, w) in enumerate(zip(spectrum, weights))]
    _write_table(out / f"floquet.{fmt}", rows, fmt)
    for stem, state in (("doublet_even", doublet.u_even),
                        ("doublet_odd", doublet.u_odd)):
        state = materialize_snapshots(state, params, pconf, cfg.n_phases)
        save_floquet_state(out / "states", stem, state, params)
    summary = [{"delta_lambda": doublet.delta_lambda,
                "t_lin_periods": doublet.t_lin / DRIVE_PERIOD}]
    _write_table(out / f"doublet.{fmt}", summary, fmt)
    if plot:
        from .plots import render_spectrum
        render_spectrum(out / "floquet.png", spectrum, doublet)


def cmd_husimi(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    doublet = pipe.doublet()
    lattice = PhaseSpaceLattice(-cfg.husimi_x_max, cfg.husimi_x_max,
                                -cfg.husimi_p_max, cfg.husimi_p_max,
                                cfg.husimi_nx, cfg.husimi_np)
    qmap = husimi(doublet.u_even.psi0, pipe.params, lattice)
    islands = pipe.islands()
    radius = cfg.island_radius or default_island_radius(
        islands[0], pipe.params.hbar_eff)
    mp, mm = island_mass(qmap, islands, radius)
    rows = []
    for j, p0 in enumerate(qmap.p_centers):
        for i, x0 in enumerate(qmap.x_centers):
            rows.append({"x": float(x0), "p": float(p0),
                         "q": float(qmap.values[j, i])})
    _write_table(out / f"husimi.{fmt}", rows, fmt)
    _write_table(out / f"island_mass.{fmt}",
                 [{"m_plus": mp, "m_minus": mm, "radius": radius}], fmt)
    if plot:
        from .plots import render_husimi
        render_husimi(out / "husimi.png", qmap, islands, radius)


def cmd_nlfloquet(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    rows = []
    for parity in (1, -1):
        doublet = pipe.doublet()
        seed_state = doublet.u_even if parity == 1 else doublet.u_odd
        sols = solve_nonlinear_floquet(seed_state, cfg.u_target, pipe.params,
                                       pipe.config, n_basis=cfg.n_basis)
        save_branch(out / ("branch_even" if parity == 1 else "branch_odd"),
                    sols, pipe.params)
        rows += [{"parity": parity, "u": s.u_nl, "energy": s.energy,
                  "residual": s.residual} for s in sols]
    _write_table(out / f"branches.{fmt}", rows, fmt)


def cmd_evolve(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    rec = pipe.run_gpe(cfg.u_nl, cfg.n_periods, store_every=cfg.store_every)
    write_records_csv(out / "momentum_density.csv", rec.records,
                      with_density=True)
    rows = [{"period": r.period_index, "mean_p": r.mean_p,
             "d_plus_sq": float(abs(dp) ** 2),
             "d_minus_sq": float(abs(dm) ** 2)}
            for r, dp, dm in zip(rec.records, rec.d_plus, rec.d_minus)]
    _write_table(out / f"populations.{fmt}", rows, fmt)
    _write_table(out / f"verdict.{fmt}",
                 [{"u": cfg.u_nl, "classification": rec.classification,
                   "extracted_period": rec.extracted_period,
                   "n_tot_floor": rec.n_tot_floor}], fmt)
    if plot:
        from .plots import render_reversal
        render_reversal(out / "evolve.png", [rec])


def cmd_twomode(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    z, verdict, period = pipe.run_two_mode(cfg.u_nl, cfg.n_periods)
    rows = [{"period": n, "z": float(v)} for n, v in enumerate(z)]
    _write_table(out / f"twomode.{fmt}", rows, fmt)
    _write_table(out / f"verdict.{fmt}",
                 [{"u": cfg.u_nl, "classification": verdict,
                   "extracted_period": period}], fmt)


def cmd_ucrit(cfg, out, fmt, seed, plot, with_gpe=False):
    pipe = _pipeline(cfg)
    lc = pipe.coupling_constants()
    u_lin, degenerate = u_crit_estimate(lc)
    eff = effective_params(lc)
    row = {"u_crit_linear": 0.0 if degenerate else u_lin,
           "u_crit_twomode": bisect_u_crit_two_mode(
               lc, cfg.bisect_resolution),
           "u_crit_gpe": None,
           "delta_e": abs(lc.delta_e), "lambda0": eff.lambda_cap,
           "alpha_unit_u": eff.alpha, "beta_unit_u": eff.beta}
    if with_gpe:
        row["u_crit_gpe"] = bisect_u_crit_gpe(pipe, cfg.bisect_resolution,
                                              cfg.bisect_periods)
    _write_table(out / f"ucrit.{fmt}", [row], fmt)


def cmd_fig2(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    u_list = cfg.u_list or [0.012, 0.023, 0.034]
    recs = run_figure2(pipe, u_list, cfg.n_periods,
                       store_every=cfg.store_every)
    rows = [{"u": r.params.u_nl, "classification": r.classification,
             "extracted_period": r.extracted_period,
             "n_tot_floor": r.n_tot_floor} for r in recs]
    _write_table(out / f"fig2_verdicts.{fmt}", rows, fmt)
    for rec in recs:
        tag = f"u{rec.params.u_nl:g}".replace(".", "p")
        write_records_csv(out / f"fig2_density_{tag}.csv", rec.records,
                          with_density=True)
        prows = [{"period": r.period_index,
                  "d_plus_sq": float(abs(dp) ** 2),
                  "d_minus_sq": float(abs(dm) ** 2)}
                 for r, dp, dm in zip(rec.records, rec.d_plus, rec.d_minus)]
        _write_table(out / f"fig2_populations_{tag}.{fmt}", prows, fmt)
    if plot:
        from .plots import render_reversal
        render_reversal(out / "fig2.png", recs)


def cmd_fig3a(cfg, out, fmt, seed, plot):
    pipe = _pipeline(cfg)
    u_grid = cfg.u_list or [round(0.002 * k, 3) for k in range(18)]
    rows = run_figure3a(pipe, sorted(u_grid), cfg.n_periods)
    _write_table(out / f"fig3a.{fmt}", rows, fmt)
    if plot:
        from .plots import render_rates
        render_rates(out / "fig3a.png", rows)


def cmd_fig3bc(cfg, out, fmt, seed, plot, threads=1):
    base = cfg.system_params(u_nl=0.0)
    values = cfg.sweep_values
    if not values:
        raise ConfigError("fig3bc requires sweep_values", key="sweep_values")

    def point(value):
        return run_figure3bc(base, cfg.sweep_param, [value], cfg.grid(),
                             cfg.propagator_config(), n_basis=cfg.n_basis,
                             n_phases=cfg.n_phases,
                             island_radius=cfg.island_radius or None,
                             resolution=cfg.bisect_resolution,
                             bisect_periods=cfg.bisect_periods)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]
    rows.sort(key=lambda r: r["value"])
    _write_table(out / f"fig3bc.{fmt}", rows, fmt)
    if plot:
        from .plots import render_ucrit_sweep
        render_ucrit_sweep(out / "fig3bc.png", rows, cfg.sweep_param)


def cmd_sweep(cfg, out, fmt, seed, plot, threads=1):
    """Linear doublet characterization along sweep_values (no bisections)."""
    base = cfg.system_params(u_nl=0.0)
    values = cfg.sweep_values
    if not values:
        raise ConfigError("sweep requires sweep_values", key="sweep_values")

    def point(value):
        params = replace(base, **{cfg.sweep_param: float(value)})
        pipe = DoubletPipeline(params, cfg.grid(), cfg.propagator_config(),
                               n_basis=cfg.n_basis, n_phases=cfg.n_phases,
                               island_radius=cfg.island_radius or None)
        row = {"value": float(value), "delta_lambda": None,
               "t_lin_periods": None, "p_star": None, "u_crit_linear": None}
        try:
            doublet = pipe.doublet()
        except DynTunnelError:
            return row
        row["delta_lambda"] = doublet.delta_lambda
        row["t_lin_periods"] = doublet.t_lin / DRIVE_PERIOD
        row["p_star"] = pipe.islands()[0].p_star
        u_lin, degenerate = u_crit_estimate(pipe.coupling_constants())
        row["u_crit_linear"] = 0.0 if degenerate else u_lin
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]
    rows.sort(key=lambda r: r["value"])
    _write_table(out / f"sweep.{fmt}", rows, fmt)


_COMMANDS = {
    "poincare": cmd_poincare, "islands": cmd_islands, "floquet": cmd_floquet,
    "husimi": cmd_husimi, "nlfloquet": cmd_nlfloquet, "evolve": cmd_evolve,
    "twomode": cmd_twomode, "ucrit": cmd_ucrit, "fig2": cmd_fig2,
    "fig3a": cmd_fig3a, "fig3bc": cmd_fig3bc, "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dyntunnel",
        description="Driven-well dynamical tunnelling simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=0,
                       help="seed-lattice jitter seed")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config key (repeatable)")
        if name == "ucrit":
            p.add_argument("--gpe", action="store_true",
                           help="include the GPE bisection estimate")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}",
                                  key=item)
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        text = Path(args.config).read_text() if args.config else None
        cfg = resolve_config(text, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / f"{args.command}_manifest.json", cfg,
                   command=args.command,
                   extra={"seed": args.seed, "format": args.format})
    kwargs = {}
    if args.command in ("fig3bc", "sweep"):
        kwargs["threads"] = args.threads
    if args.command == "ucrit":
        kwargs["with_gpe"] = args.gpe
    try:
        _COMMANDS[args.command](cfg, out, args.format, args.seed,
                                not args.no_plot, **kwargs)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DynTunnelError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
