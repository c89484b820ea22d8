"""Command-line front end.

    adjoint-fp <command> --config <file> [--out <dir>] [--seed <u64>]

Commands: fp, mfg, hughes, validate, eikonal.  Exit codes: 0 ok, 2 config
error, 3 numerical failure, 4 I/O error.  All outputs are CSV/text so runs
diff cleanly; identical configs produce byte-identical output trees.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .config import (
    EikonalPayload,
    FpPayload,
    RunConfig,
    ValidatePayload,
    parse_config,
)
from .eikonal import eikonal_distance
from .errors import AdjointFpError, ConfigError, NoConvergenceError
from .grids import GridFunction, total_mass, write_grid_csv
from .marching import Trajectory
from .particles import SdeConfig, l1_distance, simulate
from .systems import FfmfgConfig, HughesConfig, solve_ffmfg, solve_fp, solve_hughes


def _write_dense_matrix(gf: GridFunction, path) -> None:
    # rows = y index, columns = x index (heat-map orientation)
    vals = gf.values
    with open(path, "w") as fh:
        for j in range(vals.shape[1]):
            fh.write(" ".join(repr(float(v)) for v in vals[:, j]) + "\n")


def emit_plotdata(traj: Trajectory, out_dir) -> list[str]:
    """Per-snapshot CSVs, a manifest mapping times to files, per-step
    diagnostics, and dense matrices for 2-D heat maps."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    written = []
    fields = sorted(traj.snapshots[0].keys())
    for k, (t, snap) in enumerate(zip(traj.times, traj.snapshots)):
        for name in fields:
            gf = snap[name]
            fname = f"{name}_{k:04d}.csv"
            write_grid_csv(gf, os.path.join(out_dir, fname))
            manifest.append(f"{repr(float(t))} {fname}")
            written.append(fname)
            if gf.grid.dim == 2:
                dense = f"{name}_{k:04d}.dense.txt"
                _write_dense_matrix(gf, os.path.join(out_dir, dense))
                written.append(dense)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(manifest) + "\n")
    with open(os.path.join(out_dir, "diagnostics.csv"), "w") as fh:
        fh.write("time,mass,min,max\n")
        for t, (mass, mn, mx) in zip(traj.step_times, traj.step_diagnostics):
            fh.write(f"{repr(float(t))},{repr(float(mass))},{repr(float(mn))},{repr(float(mx))}\n")
    return written


def _summary(traj: Trajectory, elapsed: float) -> str:
    mass, mn, _ = traj.step_diagnostics[-1]
    return f"final mass={mass:.12g} min={mn:.3e} wall={elapsed:.2f}s"


def run(cfg: RunConfig, out_dir: str | None = None, seed: int | None = None) -> int:
    out = out_dir or cfg.output_dir
    t0 = time.perf_counter()

    if cfg.command == "fp":
        payload: FpPayload = cfg.payload
        traj = solve_fp(payload.scheme, payload.u_freeze, payload.rho0, payload.integrator)
        emit_plotdata(traj, out)
        write_grid_csv(payload.u_freeze, os.path.join(out, "u_freeze.csv"))
        print(_summary(traj, time.perf_counter() - t0))
        return 0

    if cfg.command == "mfg":
        mfg_cfg: FfmfgConfig = cfg.payload
        traj = solve_ffmfg(mfg_cfg)
        emit_plotdata(traj, out)
        floored = sum(c for _, c in traj.extras.get("floored_nodes", []))
        if floored:
            print(f"density floor applied at {floored} node-evaluations")
        print(_summary(traj, time.perf_counter() - t0))
        return 0

    if cfg.command == "hughes":
        hughes_cfg: HughesConfig = cfg.payload
        traj = solve_hughes(hughes_cfg)
        emit_plotdata(traj, out)
        with open(os.path.join(out, "eikonal_iters.csv"), "w") as fh:
            fh.write("step,iterations,residual\n")
            for step, iters, res in traj.extras["eikonal_iterations"]:
                fh.write(f"{step},{iters},{repr(float(res))}\n")
        print(_summary(traj, time.perf_counter() - t0))
        return 0

    if cfg.command == "eikonal":
        payload: EikonalPayload = cfg.payload
        res = eikonal_distance(
            payload.c_field,
            wall_value=payload.wall_value,
            tol=payload.tol,
            max_iter=payload.max_iter,
        )
        if not res.converged:
            raise NoConvergenceError(res.iterations, res.residual)
        os.makedirs(out, exist_ok=True)
        write_grid_csv(res.u, os.path.join(out, "u.csv"))
        print(
            f"eikonal converged in {res.iterations} iterations "
            f"(residual {res.residual:.3e}) wall={time.perf_counter() - t0:.2f}s"
        )
        return 0

    # validate: grid solver vs particle oracle
    payload: ValidatePayload = cfg.payload
    fp = payload.fp
    traj = solve_fp(fp.scheme, fp.u_freeze, fp.rho0, fp.integrator)
    m_final = traj.snapshots[-1]["m"]
    # particles follow the physical drift, the negated Hamiltonian gradient
    drift = tuple(GridFunction(b.grid, -b.values) for b in fp.scheme.hamiltonian.b)
    sde = SdeConfig(
        drift=drift,
        epsilon=fp.scheme.epsilon,
        particles=payload.particles,
        dt=payload.dt,
        t_final=fp.integrator.t_final,
        boundary=payload.boundary,
        seed=payload.seed if seed is None else seed,
    )
    emp = simulate(sde, fp.rho0)
    dist = l1_distance(m_final, emp)
    os.makedirs(out, exist_ok=True)
    write_grid_csv(m_final, os.path.join(out, "fp_final.csv"))
    write_grid_csv(
        emp.density,
        os.path.join(out, "mc_final.csv"),
        extra_header=(
            f"# meta seed={sde.seed} particles={emp.particles} "
            f"surviving_fraction={repr(emp.surviving_fraction)}"
        ),
    )
    print(
        f"l1 distance fp vs particles = {dist:.6g} "
        f"(surviving fraction {emp.surviving_fraction:.6g}, mass {total_mass(m_final):.6g}) "
        f"wall={time.perf_counter() - t0:.2f}s"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adjoint-fp",
        description="Fokker-Planck solvers built by transposing monotone Hamilton-Jacobi schemes",
    )
    parser.add_argument("command", choices=("fp", "mfg", "hughes", "validate", "eikonal"))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, default=None, help="particle seed override")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 4

    try:
        cfg = parse_config(text)
        if cfg.command != args.command:
            print(
                f"error: config declares command {cfg.command!r}, invoked as {args.command!r}",
                file=sys.stderr,
            )
            return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return run(cfg, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AdjointFpError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
