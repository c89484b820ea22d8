"""Method-of-lines integrators with positivity-aware step control.

``integrate`` advances a semi-discrete system with explicit Euler or RK4.
In Auto mode the step is ``safety * cfl_max_step`` where the CFL bound is
refreshed by the system's ``prepare`` hook whenever the generator is rebuilt
(once per step for the coupled drivers).  Euler plus Auto stepping maps
nonnegative densities to nonnegative densities for Metzler right-hand sides;
RK4 is offered for accuracy studies and carries no positivity guarantee.

Snapshots snap to completed steps (never interpolated in time) so stored
data satisfies the scheme invariants literally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFiniteError, StepUnderflowError, ValidationError

EULER = "euler"
RK4 = "rk4"


@dataclass(frozen=True)
class IntegratorSpec:
    """dt=None selects Auto stepping (requires a CFL provider)."""

    t_final: float
    method: str = EULER
    dt: float | None = None
    safety: float = 0.9
    snapshot_count: int = 50

    def __post_init__(self):
        if self.method not in (EULER, RK4):
            raise ValidationError("integrator.method", self.method)
        if not self.t_final > 0:
            raise ValidationError("integrator.t_final", "must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("integrator.dt", "must be positive or None for auto")
        if not (0 < self.safety <= 1):
            raise ValidationError("integrator.safety", "must be in (0, 1]")
        if self.snapshot_count < 1:
            raise ValidationError("integrator.snapshot_count", "must be positive")


@dataclass
class OdeSystem:
    """Hooks the integrator calls.

    rhs(t, y)        time derivative of the packed state
    prepare(t, y)    start-of-step hook; may rebuild frozen generators and
                     adjust the state (clamping); returns (y, cfl_dt or None)
    post_step(t, y)  end-of-step hook (Dirichlet masking); returns y
    unpack(y)        packed state -> named fields for snapshots
    measure(y)       (mass, min, max) of the tracked density
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    prepare: Callable[[float, np.ndarray], tuple[np.ndarray, float | None]] | None = None
    post_step: Callable[[float, np.ndarray], np.ndarray] | None = None
    unpack: Callable[[np.ndarray], dict] | None = None
    measure: Callable[[np.ndarray], tuple[float, float, float]] | None = None


@dataclass
class Trajectory:
    """Recorded snapshots plus per-step scalar diagnostics."""

    times: np.ndarray
    snapshots: list
    diagnostics: np.ndarray  # (mass, min, max) per snapshot
    step_times: np.ndarray
    step_diagnostics: np.ndarray  # (mass, min, max) per completed step
    extras: dict = field(default_factory=dict)

    @property
    def min_over_steps(self) -> float:
        return float(self.step_diagnostics[:, 1].min())

    @property
    def mass_series(self) -> np.ndarray:
        return self.step_diagnostics[:, 0]


def euler_step(rhs, state, dt, t: float = 0.0):
    return state + dt * rhs(t, state)


def rk4_step(rhs, state, dt, t: float = 0.0):
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = rhs(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _default_measure(y: np.ndarray):
    return float(y.sum()), float(y.min()), float(y.max())


def integrate(system: OdeSystem, y0: np.ndarray, spec: IntegratorSpec) -> Trajectory:
    y = np.array(y0, dtype=np.float64, copy=True)
    t = 0.0
    t_final = spec.t_final
    tiny = 1e-12 * t_final
    stepper = euler_step if spec.method == EULER else rk4_step
    measure = system.measure or _default_measure
    unpack = system.unpack or (lambda arr: {"state": arr.copy()})

    targets = np.linspace(0.0, t_final, spec.snapshot_count + 1)
    next_target = 1  # index into targets; t=0 recorded immediately

    snap_times = [0.0]
    snapshots = [unpack(y)]
    diag = [measure(y)]
    step_times = [0.0]
    step_diag = [measure(y)]

    def record_snapshot(at_t, at_y):
        snap_times.append(at_t)
        snapshots.append(unpack(at_y))
        diag.append(measure(at_y))

    prev_t, prev_y = t, y.copy()
    while t < t_final - tiny:
        if system.prepare is not None:
            y, cfl_dt = system.prepare(t, y)
        else:
            cfl_dt = None
        if spec.dt is not None:
            dt = spec.dt
        else:
            if cfl_dt is None or not np.isfinite(cfl_dt):
                if cfl_dt is None:
                    raise ValidationError(
                        "integrator.dt", "auto stepping requires a CFL-providing system"
                    )
                dt = t_final - t  # free dynamics, jump to the end
            else:
                dt = spec.safety * cfl_dt
        dt = min(dt, t_final - t)
        if dt < tiny:
            raise StepUnderflowError(t, dt)

        prev_t, prev_y = t, y.copy()
        y = stepper(system.rhs, y, dt, t)
        t = prev_t + dt
        if system.post_step is not None:
            y = system.post_step(t, y)
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(t)

        step_times.append(t)
        step_diag.append(measure(y))

        while next_target < len(targets) and targets[next_target] <= t + tiny:
            tgt = targets[next_target]
            if abs(prev_t - tgt) < abs(t - tgt) and prev_t > snap_times[-1] + tiny:
                record_snapshot(prev_t, prev_y)
            elif t > snap_times[-1] + tiny:
                record_snapshot(t, y)
            next_target += 1

    if snap_times[-1] < t_final - tiny and t >= t_final - tiny:
        record_snapshot(t, y)

    return Trajectory(
        times=np.array(snap_times),
        snapshots=snapshots,
        diagnostics=np.array(diag),
        step_times=np.array(step_times),
        step_diagnostics=np.array(step_diag),
    )
