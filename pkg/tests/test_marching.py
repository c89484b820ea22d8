import numpy as np
import pytest

from adjoint_fp import (
    RK4,
    GridFunction,
    IntegratorSpec,
    LinearDrift,
    NonFiniteError,
    OdeSystem,
    SchemeSpec,
    StepUnderflowError,
    ValidationError,
    euler_step,
    integrate,
    rk4_step,
    solve_fp,
    total_mass,
    unit_torus,
)


class TestSingleSteps:
    def test_zero_rhs_is_identity(self):
        y = np.array([1.0, -2.0, 3.0])
        zero = lambda t, s: np.zeros_like(s)
        assert np.array_equal(euler_step(zero, y, 0.3), y)
        assert np.array_equal(rk4_step(zero, y, 0.3), y)

    def test_scalar_decay_euler(self):
        decay = lambda t, s: -s
        assert euler_step(decay, np.array([1.0]), 0.1)[0] == pytest.approx(0.9)

    def test_scalar_decay_rk4_matches_exponential(self):
        decay = lambda t, s: -s
        y = rk4_step(decay, np.array([1.0]), 0.1)[0]
        assert y == pytest.approx(0.9048375)
        assert abs(y - np.exp(-0.1)) < 1e-7


class TestIntegrate:
    def test_no_dynamics_keeps_state(self):
        y0 = np.array([2.0, -1.0])
        spec = IntegratorSpec(t_final=1.0, dt=0.25, snapshot_count=4)
        traj = integrate(OdeSystem(rhs=lambda t, y: np.zeros_like(y)), y0, spec)
        assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(1.0)
        for snap in traj.snapshots:
            assert np.array_equal(snap["state"], y0)

    def test_decay_recurrence(self):
        spec = IntegratorSpec(t_final=1.0, dt=0.1, snapshot_count=1)
        traj = integrate(OdeSystem(rhs=lambda t, y: -y), np.array([1.0]), spec)
        assert traj.snapshots[-1]["state"][0] == pytest.approx(0.9**10, rel=1e-12)

    def test_snapshot_pacing(self):
        spec = IntegratorSpec(t_final=3.0, dt=0.001, snapshot_count=50)
        traj = integrate(OdeSystem(rhs=lambda t, y: -y), np.array([1.0]), spec)
        assert len(traj.times) == 51
        assert np.abs(traj.times - np.linspace(0, 3, 51)).max() <= 0.001 + 1e-12
        assert traj.times[-1] == pytest.approx(3.0, abs=1e-12)

    def test_auto_requires_cfl_provider(self):
        spec = IntegratorSpec(t_final=1.0, dt=None)
        with pytest.raises(ValidationError):
            integrate(OdeSystem(rhs=lambda t, y: -y), np.array([1.0]), spec)

    def test_nonfinite_detected_with_time(self):
        def blow_up(t, y):
            return np.full_like(y, np.nan) if t >= 0.5 else -y

        spec = IntegratorSpec(t_final=1.0, dt=0.25, snapshot_count=1)
        with pytest.raises(NonFiniteError) as err:
            integrate(OdeSystem(rhs=blow_up), np.array([1.0]), spec)
        assert 0.5 <= err.value.time <= 1.0

    def test_step_underflow(self):
        spec = IntegratorSpec(t_final=1.0, dt=None)
        system = OdeSystem(rhs=lambda t, y: -y, prepare=lambda t, y: (y, 1e-16))
        with pytest.raises(StepUnderflowError):
            integrate(system, np.array([1.0]), spec)

    def test_determinism_bit_identical(self):
        g = unit_torus(32)
        x = g.meshgrid()[0]
        b = GridFunction(g, np.sin(2 * np.pi * x))
        scheme = SchemeSpec(LinearDrift((b,)), epsilon=0.02)
        rho0 = GridFunction(g, 1.0 + 0.5 * np.cos(2 * np.pi * x))
        spec = IntegratorSpec(t_final=0.2, snapshot_count=4)
        u0 = GridFunction.constant(g, 0.0)
        a = solve_fp(scheme, u0, rho0, spec)
        b2 = solve_fp(scheme, u0, rho0, spec)
        for sa, sb in zip(a.snapshots, b2.snapshots):
            assert np.array_equal(sa["m"].values, sb["m"].values)


class TestFpRuns:
    def test_diffusion_spike_relaxes_to_uniform(self):
        # pure diffusion on the unit torus: mass constant, positivity kept,
        # long-time limit is the flat density at the initial mass
        n = 64
        g = unit_torus(n)
        vals = np.zeros(n)
        vals[n // 2] = 1.0 / g.cell_volume  # unit-mass spike
        rho0 = GridFunction(g, vals)
        scheme = SchemeSpec(LinearDrift((GridFunction.constant(g, 0.0),)), epsilon=0.05)
        spec = IntegratorSpec(t_final=5.0, snapshot_count=10)
        traj = solve_fp(scheme, GridFunction.constant(g, 0.0), rho0, spec)
        masses = traj.step_diagnostics[:, 0]
        assert np.abs(masses - 1.0).max() <= 1e-10
        assert traj.min_over_steps >= -1e-12
        final = traj.snapshots[-1]["m"].values
        assert np.abs(final - 1.0).max() <= 1e-3

    def test_mass_invariance_under_rk4(self):
        n = 48
        g = unit_torus(n)
        x = g.meshgrid()[0]
        b = GridFunction(g, np.sin(2 * np.pi * x))
        scheme = SchemeSpec(LinearDrift((b,)), epsilon=0.03)
        rho0 = GridFunction(g, 1.0 + 0.3 * np.sin(4 * np.pi * x))
        spec = IntegratorSpec(t_final=0.5, method=RK4, dt=2e-4, snapshot_count=5)
        traj = solve_fp(scheme, GridFunction.constant(g, 0.0), rho0, spec)
        m0 = total_mass(rho0)
        assert np.abs(traj.step_diagnostics[:, 0] - m0).max() <= 1e-10 * m0
