"""Binary persistence of wavefunction snapshots and tabular run data.

Snapshot files ("DTWF") hold one state each: a fixed-size little-endian
header (magic, version, grid descriptor, time tag, system parameters, and
optional Floquet metadata) followed by the complex amplitudes as float64
pairs.  Floquet states reuse the same layout with a phase-index extension, so
a directory of numbered files stores one period of snapshots.  Stroboscopic
records and branch indexes go to CSV / JSON-lines.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .core import SpatialGrid, SystemParams, WaveFunction
from .floquet import FloquetState

MAGIC = b"DTWF"
VERSION = 1

# magic, version, x_min, x_max, n_points, time_tag,
# kappa, epsilon, hbar_eff, u_nl, eigenvalue, parity, phase_index, n_phases
_HEADER = struct.Struct("<4sHddqddddddqqq")


def write_snapshot(path, psi, params, eigenvalue=np.nan, parity=0,
                   phase_index=-1, n_phases=0):
    """Write one WaveFunction to a DTWF file.

    eigenvalue/parity/phase_index are Floquet metadata; the defaults mark a
    plain snapshot (parity 0 = unlabelled, phase_index -1 = not phase-indexed).
    """
    grid = psi.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.x[0], grid.x_max,
                          grid.n_points, psi.time_tag, params.kappa,
                          params.epsilon, params.hbar_eff, params.u_nl,
                          float(eigenvalue), parity, phase_index, n_phases)
    amps = np.ascontiguousarray(psi.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(amps.tobytes())


def read_snapshot(path):
    """Read a DTWF file; returns (WaveFunction, SystemParams, meta dict)."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated DTWF header")
        (magic, version, x_min, x_max, n_points, time_tag, kappa, epsilon,
         hbar, u_nl, eigenvalue, parity, phase_index, n_phases) \
            = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a DTWF file")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported DTWF version {version}")
        body = fh.read(16 * n_points)
    amps = np.frombuffer(body, dtype="<c16", count=n_points).copy()
    grid = SpatialGrid(x_max, n_points)
    if abs(grid.x[0] - x_min) > 1e-12:
        raise ValueError(f"{path}: inconsistent grid descriptor")
    params = SystemParams(kappa=kappa, epsilon=epsilon, hbar_eff=hbar,
                          u_nl=u_nl)
    meta = {"eigenvalue": eigenvalue, "parity": parity,
            "phase_index": phase_index, "n_phases": n_phases}
    return WaveFunction(grid, amps, time_tag), params, meta


def save_floquet_state(directory, stem, state, params):
    """Store a FloquetState as numbered DTWF files (one per snapshot phase).

    Without materialized snapshots only the phase-0 state is written.
    Returns the list of written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    snaps = state.snapshots or [state.psi0]
    paths = []
    for j, psi in enumerate(snaps):
        path = directory / f"{stem}_phase{j:03d}.dtwf"
        write_snapshot(path, psi, params, eigenvalue=state.eigenvalue,
                       parity=state.parity, phase_index=j,
                       n_phases=len(snaps))
        paths.append(path)
    return paths


def load_floquet_state(directory, stem):
    """Rebuild a FloquetState from the numbered files written by save."""
    directory = Path(directory)
    files = sorted(directory.glob(f"{stem}_phase*.dtwf"))
    if not files:
        raise FileNotFoundError(f"no {stem}_phase*.dtwf under {directory}")
    snaps, metas = [], []
    for f in files:
        psi, params, meta = read_snapshot(f)
        snaps.append(psi)
        metas.append(meta)
    m0 = metas[0]
    state = FloquetState(snaps[0], m0["eigenvalue"], m0["parity"],
                         snapshots=snaps if len(snaps) > 1 else None)
    return state, params


def write_records_csv(path, records, with_density=False):
    """Stroboscopic records to CSV: period_index, mean_p, mean_x, norm.

    with_density appends the momentum-density samples as extra columns
    (heat-map payload; one row per period, fftshifted momentum order).
    """
    with open(path, "w") as fh:
        cols = "period_index,mean_p,mean_x,norm"
        if with_density:
            cols += "," + ",".join(f"rho_p_{j}"
                                   for j in range(len(records[0].momentum_density)))
        fh.write(cols + "\n")
        for r in records:
            row = f"{r.period_index},{r.mean_p!r},{r.mean_x!r},{r.norm!r}"
            if with_density:
                row += "," + ",".join(repr(v) for v in r.momentum_density)
            fh.write(row + "\n")


def save_branch(directory, solutions, params):
    """Persist a nonlinear continuation branch: DTWF states + JSONL index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = directory / "branch_index.jsonl"
    with open(index, "w") as fh:
        for sol in solutions:
            stem = f"u{sol.u_nl:.6f}".replace(".", "p")
            save_floquet_state(directory, stem, sol.state,
                               params.with_u(sol.u_nl))
            fh.write(json.dumps({"u": sol.u_nl, "energy": sol.energy,
                                 "residual": sol.residual,
                                 "parity": sol.state.parity,
                                 "stem": stem}) + "\n")
    return index
