"""Acceptance suite: one test per criterion, each printing a PASS line with
its runtime.  Run with ``pytest tests/test_acceptance.py -v -s``."""

import time

import numpy as np
import pytest

from adjoint_fp import (
    CONGESTION,
    LOG_DENSITY,
    SEMI_LAGRANGIAN,
    UPWIND,
    FfmfgConfig,
    GridFunction,
    HughesConfig,
    IntegratorSpec,
    LinearDrift,
    PowerNorm,
    SchemeSpec,
    check_adjoint,
    check_monotone,
    fp_rhs,
    hughes_grid,
    inner_product,
    linearize,
    solve_ffmfg,
    solve_fp,
    solve_hughes,
    torus_2d,
    total_mass,
    unit_torus,
)
from adjoint_fp.eikonal import eikonal_distance
from adjoint_fp.particles import SdeConfig, l1_distance, simulate


class _Budget:
    def __init__(self, number, label, seconds):
        self.number = number
        self.label = label
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        status = "PASS" if exc_type is None else "FAIL"
        print(f"ACCEPTANCE {self.number} {status} ({elapsed:.1f}s / budget {self.seconds:.0f}s): {self.label}")
        if exc_type is None:
            assert elapsed < self.seconds, f"runtime budget exceeded: {elapsed:.1f}s"
        return False


def drift_diffusion_run(n, t_final=0.25, eps=0.05):
    g = unit_torus(n)
    x = g.axis_coords(0)
    scheme = SchemeSpec(LinearDrift((GridFunction(g, np.sin(2 * np.pi * x)),)),
                        UPWIND, epsilon=eps)
    rho0 = GridFunction(g, 1.0 + 0.5 * np.cos(2 * np.pi * x))
    traj = solve_fp(scheme, GridFunction.constant(g, 0.0), rho0,
                    IntegratorSpec(t_final=t_final, snapshot_count=1))
    return g, rho0, traj


def paper_run_one():
    g = unit_torus(80)
    x = g.axis_coords(0)
    cfg = FfmfgConfig(
        coupling=LOG_DENSITY, epsilon=0.01,
        u0=GridFunction(g, 0.3 * np.cos(2 * np.pi * x)),
        rho0=GridFunction.constant(g, 1.0),
        integrator=IntegratorSpec(t_final=3.0, snapshot_count=50),
    )
    return solve_ffmfg(cfg)


def test_criterion_1_discrete_adjointness():
    with _Budget(1, "discrete adjointness, both schemes, 100 random pairs", 5):
        rng = np.random.default_rng(2024)
        g = torus_2d(32)
        for disc in (UPWIND, SEMI_LAGRANGIAN):
            scheme = SchemeSpec(PowerNorm(alpha=2.0), disc, epsilon=0.02)
            gen = linearize(scheme, GridFunction(g, rng.standard_normal(g.shape)))
            report = check_adjoint(gen, trials=100, tol=1e-12, seed=11)
            assert report.passed, f"{disc}: {report}"


def test_criterion_2_mass_conservation_paper_run():
    with _Budget(2, "mean-field game run keeps unit mass at all 51 snapshots", 30):
        traj = paper_run_one()
        assert len(traj.times) == 51
        masses = traj.diagnostics[:, 0]
        assert np.abs(masses - 1.0).max() <= 1e-9


def test_criterion_3_positivity():
    with _Budget(3, "density stays nonnegative at every step (game + spike runs)", 30):
        traj = paper_run_one()
        assert traj.min_over_steps >= -1e-12
        g = unit_torus(64)
        x = g.axis_coords(0)
        spike = np.zeros(64)
        spike[32] = 1.0 / g.cell_volume
        scheme = SchemeSpec(LinearDrift((GridFunction(g, np.sin(2 * np.pi * x)),)),
                            UPWIND, epsilon=0.05)
        traj2 = solve_fp(scheme, GridFunction.constant(g, 0.0), GridFunction(g, spike),
                         IntegratorSpec(t_final=0.5, snapshot_count=5))
        assert traj2.min_over_steps >= -1e-12


def test_criterion_4_convergence_to_reference():
    with _Budget(4, "drift-diffusion L1 self-convergence at order >= 0.8", 120):
        _, _, ref = drift_diffusion_run(512)
        m_ref = ref.snapshots[-1]["m"].values
        errs = []
        for n in (32, 64, 128):
            g, _, traj = drift_diffusion_run(n)
            sub = m_ref[:: 512 // n]
            errs.append(g.cell_volume * np.abs(traj.snapshots[-1]["m"].values - sub).sum())
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.diff(errs) < 0)
        assert np.all(orders >= 0.8), f"observed orders {orders}"


def test_criterion_5_particle_oracle_agreement():
    with _Budget(5, "grid solver within 0.08 L1 of 1e5-particle oracle", 120):
        g, rho0, traj = drift_diffusion_run(64)
        x = g.axis_coords(0)
        # particles follow the physical drift, the negated Hamiltonian gradient
        sde = SdeConfig(
            drift=(GridFunction(g, -np.sin(2 * np.pi * x)),),
            epsilon=0.05, particles=100_000, dt=0.001, t_final=0.25,
            boundary="wrap", seed=20170825,
        )
        emp = simulate(sde, rho0)
        dist = l1_distance(traj.snapshots[-1]["m"], emp)
        assert dist <= 0.08, f"L1 distance {dist}"


def test_criterion_6_congestion_traveling_wave():
    with _Budget(6, "congestion game density is a unit-speed traveling wave", 60):
        n, t_final = 200, 0.5
        g = unit_torus(n)
        x = g.axis_coords(0)
        cfg = FfmfgConfig(
            coupling=CONGESTION, epsilon=0.0, alpha=1.0, p_bar=1.0,
            u0=GridFunction(g, -0.5 * np.cos(2 * np.pi * x) / (2 * np.pi)),
            rho0=GridFunction(g, 1.0 + 0.5 * np.sin(2 * np.pi * x)),
            integrator=IntegratorSpec(t_final=t_final, snapshot_count=10),
        )
        traj = solve_ffmfg(cfg)
        m_final = traj.snapshots[-1]["m"].values
        l1 = np.array(
            [np.abs(m_final - np.roll(cfg.rho0.values, k)).sum() * g.cell_volume
             for k in range(n)]
        )
        k = int(np.argmin(l1))
        rel = l1[k] / total_mass(cfg.rho0)
        shift = k * g.dx[0]
        if shift > 0.5:
            shift -= 1.0
        speed = abs(shift) / t_final
        assert rel <= 0.1, f"profile error {rel}"
        assert abs(speed - 1.0) <= 2 * g.dx[0] / t_final, f"speed {speed}"


def test_criterion_7_hughes_reproduction():
    with _Budget(7, "evacuation run: mass drains monotonically, eikonal converges", 300):
        g = hughes_grid()  # 100 x 34 nodes on the 3 x 1 room, door on top
        xs, ys = g.meshgrid()
        rho0 = GridFunction(
            g, 0.8 * np.exp(-((xs - 2.0) ** 2 + (ys - 0.5) ** 2) / (2 * 0.25**2))
        )
        cfg = HughesConfig(grid=g, rho0=rho0,
                           integrator=IntegratorSpec(t_final=1.0, snapshot_count=10))
        traj = solve_hughes(cfg)
        masses = traj.step_diagnostics[:, 0]
        assert np.all(np.diff(masses) <= 1e-12)
        assert masses[-1] < masses[0]
        assert traj.min_over_steps >= -1e-12
        for _, _, residual in traj.extras["eikonal_iterations"]:
            assert residual <= 1e-8


def test_criterion_8_eikonal_distance_fields():
    with _Budget(8, "empty-room exit-time fields match distances within 2 dx", 30):
        n = 100
        g1 = hughes_grid(n=(n, n), domain=((0, 1), (0, 1)), exit_edge="ymax", exit_span=None)
        res1 = eikonal_distance(GridFunction.constant(g1, 1.0), tol=1e-8)
        assert res1.converged
        _, ys = g1.meshgrid()
        interior = ~g1.boundary_mask()
        assert np.abs(res1.u.values - (1.0 - ys))[interior].max() <= 2 * g1.dx[0]

        g2 = hughes_grid(n=(n, n), domain=((0, 1), (0, 1)), exit_edge="all")
        res2 = eikonal_distance(GridFunction.constant(g2, 1.0), tol=1e-8)
        assert res2.converged
        xs, ys = g2.meshgrid()
        dist = np.minimum.reduce([xs, 1 - xs, ys, 1 - ys])
        assert np.abs(res2.u.values - dist).max() <= 2 * g2.dx[0]


def test_criterion_9_monotonicity_audit():
    with _Budget(9, "20-state monotonicity audit passes; broken scheme fails", 30):
        rng = np.random.default_rng(99)
        g = torus_2d(16)
        for disc in (UPWIND, SEMI_LAGRANGIAN):
            scheme = SchemeSpec(PowerNorm(alpha=2.0), disc, epsilon=0.02)
            for _ in range(20):
                u = GridFunction(g, rng.standard_normal(g.shape))
                report = check_monotone(scheme, u, tol=1e-8)
                assert report.passed, f"{disc}: {report}"
        broken = SchemeSpec(PowerNorm(alpha=2.0), UPWIND, epsilon=0.0,
                            swap_upwind_parts=True)
        u = GridFunction(g, rng.standard_normal(g.shape))
        report = check_monotone(broken, u, tol=1e-8)
        assert not report.passed and report.worst > 1e-8
