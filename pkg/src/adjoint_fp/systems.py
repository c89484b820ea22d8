"""Drivers for coupled measure-potential systems.

* ``solve_fp``: a single Fokker-Planck equation whose drift comes from a
  frozen value function (or directly from a drift field).
* ``solve_ffmfg``: 1-D forward-forward mean-field games, both equations
  carry initial data and march forward together.  Log-density coupling:
  du/dt = -(|u_x|^2 + eps carried by the scheme) + ln(rho);  congestion
  coupling: frozen-density quadratic Hamiltonian (pbar + u_x)^2/(2 rho^a)
  with source +(3/2) rho^a, the combination whose density profile is an
  exact traveling wave for a = 1, pbar = 1 and the shipped initial data.
* ``solve_hughes``: 2-D crowd evacuation; each step freezes the density,
  solves the Eikonal equation for the exit-time potential, transports the
  density with mobility (1 - rho)^2 toward falling potential, and removes
  the mass reaching the boundary (zero-Dirichlet mask).

Density-dependent coefficients are frozen once per time step before
linearizing; the Fokker-Planck side always advances by the exact transpose
of that frozen linearization, so mass bookkeeping and positivity hold step
by step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .eikonal import EikonalResult, eikonal_distance
from .errors import NoConvergenceError, ValidationError
from .generator import cfl_max_step, fp_rhs_flat, linearize, mask_generator_rows
from .grids import EXIT, Grid, GridFunction, total_mass
from .marching import IntegratorSpec, OdeSystem, Trajectory, integrate
from .schemes import (
    UPWIND,
    LinearDrift,
    PowerNorm,
    ScaledQuadratic,
    SchemeSpec,
    hj_operator,
)

LOG_DENSITY = "log_density"
CONGESTION = "congestion"


# ---------------------------------------------------------------------------
# pure Fokker-Planck runs


def solve_fp(scheme: SchemeSpec, u_freeze: GridFunction, rho0: GridFunction,
             integrator: IntegratorSpec) -> Trajectory:
    """March dM/dt = -J^T M with J frozen at ``u_freeze``."""
    if not u_freeze.grid.compatible(rho0.grid):
        raise ValidationError("fp.rho0", "initial density grid differs from u_freeze")
    grid = rho0.grid
    gen = linearize(scheme, u_freeze)
    dt_star = cfl_max_step(gen)
    vol = grid.cell_volume

    system = OdeSystem(
        rhs=lambda t, y: fp_rhs_flat(gen, y),
        prepare=lambda t, y: (y, dt_star),
        unpack=lambda y: {"m": GridFunction(grid, y.reshape(grid.shape))},
        measure=lambda y: (vol * float(y.sum()), float(y.min()), float(y.max())),
    )
    traj = integrate(system, rho0.values.ravel(), integrator)
    traj.extras["generator"] = gen
    return traj


# ---------------------------------------------------------------------------
# forward-forward mean-field games


@dataclass(frozen=True)
class FfmfgConfig:
    coupling: str
    epsilon: float
    u0: GridFunction
    rho0: GridFunction
    integrator: IntegratorSpec
    density_floor: float = 1e-8
    alpha: float = 1.0
    p_bar: float = 0.0
    discretization: str = UPWIND
    controls: np.ndarray | None = None

    def __post_init__(self):
        if self.coupling not in (LOG_DENSITY, CONGESTION):
            raise ValidationError("mfg.coupling", self.coupling)
        grid = self.u0.grid
        if grid.dim != 1 or grid.topology != "periodic":
            raise ValidationError("mfg.grid", "needs a 1-D periodic grid")
        if not grid.compatible(self.rho0.grid):
            raise ValidationError("mfg.rho0", "initial data live on different grids")
        if np.any(self.rho0.values < 0):
            raise ValidationError("mfg.rho0", "initial density must be nonnegative")
        if total_mass(self.rho0) <= 0:
            raise ValidationError("mfg.rho0", "initial density must carry mass")
        if not self.density_floor > 0:
            raise ValidationError("mfg.density_floor", "must be positive")
        if self.epsilon < 0:
            raise ValidationError("mfg.epsilon", "must be nonnegative")
        if self.coupling == CONGESTION and self.alpha < 0:
            raise ValidationError("mfg.alpha", "must be nonnegative")
        if self.coupling == LOG_DENSITY and self.epsilon == 0.0:
            warnings.warn("log-density coupling with zero viscosity is fragile", stacklevel=2)
        if self.coupling == CONGESTION and self.epsilon != 0.0:
            warnings.warn("congestion coupling runs inviscid; epsilon is ignored", stacklevel=2)


def _slope_bound(u: GridFunction) -> np.ndarray:
    """Node-wise bound on |u_x| from the one-sided slopes."""
    from .grids import diff_backward, diff_forward

    return np.maximum(np.abs(diff_forward(u).values), np.abs(diff_backward(u).values))


def solve_ffmfg(cfg: FfmfgConfig) -> Trajectory:
    grid = cfg.u0.grid
    n = grid.num_nodes
    vol = grid.cell_volume
    floor = cfg.density_floor
    h = min(grid.dx)

    state: dict = {"gen": None, "scheme": None, "source": None}
    floored_log: list[tuple[float, int]] = []

    # The pair (u_x, rho) obeys a 2x2 first-order system whose characteristic
    # speeds exceed the density drift alone; the explicit coupled step must
    # resolve the fastest field or the value-function feedback steepens the
    # density.  The factor 2 keeps the fast field's Courant number near 1/2,
    # where the first-order dissipation dominates the Euler coupling error.

    if cfg.coupling == LOG_DENSITY:
        scheme = SchemeSpec(
            PowerNorm(g=None, alpha=2.0),
            discretization=cfg.discretization,
            epsilon=cfg.epsilon,
            controls=cfg.controls,
        )

        def coupled_wave_dt(u: GridFunction) -> float:
            v = _slope_bound(u).max()
            lam = np.sqrt(4.0 * v * v + 2.0)
            return h / (2.0 * lam)

        def prepare(t, y):
            u = GridFunction(grid, y[:n].reshape(grid.shape))
            state["gen"] = linearize(scheme, u)
            floored_log.append((t, int(np.sum(y[n:] < floor))))
            return y, min(cfl_max_step(state["gen"]), coupled_wave_dt(u))

        def rhs(t, y):
            u = GridFunction(grid, y[:n].reshape(grid.shape))
            du = -hj_operator(scheme, u).values.ravel() + np.log(np.maximum(y[n:], floor))
            dm = fp_rhs_flat(state["gen"], y[n:])
            return np.concatenate([du, dm])

    else:  # congestion: freeze rho per step for both the Hamiltonian and the source
        def coupled_wave_dt(u: GridFunction, rho_hat: np.ndarray) -> float:
            v = cfg.p_bar + _slope_bound(u)
            ra = rho_hat ** (-cfg.alpha)
            tr = cfg.alpha * v * ra
            det = -(v * ra) ** 2 * (1.0 - 0.5 * cfg.alpha) - 1.5 * cfg.alpha
            lam = 0.5 * (np.abs(tr) + np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
            lam_max = max(float(lam.max()), 1e-12)
            return h / (2.0 * lam_max)

        def prepare(t, y):
            rho_hat = np.maximum(y[n:], floor).reshape(grid.shape)
            floored_log.append((t, int(np.sum(y[n:] < floor))))
            scheme_t = SchemeSpec(
                ScaledQuadratic(c=GridFunction(grid, rho_hat ** (-cfg.alpha)), shift=cfg.p_bar),
                discretization=UPWIND,
                epsilon=0.0,
            )
            u = GridFunction(grid, y[:n].reshape(grid.shape))
            state["scheme"] = scheme_t
            state["source"] = 1.5 * rho_hat.ravel() ** cfg.alpha
            state["gen"] = linearize(scheme_t, u)
            return y, min(cfl_max_step(state["gen"]), coupled_wave_dt(u, rho_hat))

        def rhs(t, y):
            u = GridFunction(grid, y[:n].reshape(grid.shape))
            du = -hj_operator(state["scheme"], u).values.ravel() + state["source"]
            dm = fp_rhs_flat(state["gen"], y[n:])
            return np.concatenate([du, dm])

    system = OdeSystem(
        rhs=rhs,
        prepare=prepare,
        unpack=lambda y: {
            "u": GridFunction(grid, y[:n].reshape(grid.shape).copy()),
            "m": GridFunction(grid, y[n:].reshape(grid.shape).copy()),
        },
        measure=lambda y: (vol * float(y[n:].sum()), float(y[n:].min()), float(y[n:].max())),
    )
    y0 = np.concatenate([cfg.u0.values.ravel(), cfg.rho0.values.ravel()])
    traj = integrate(system, y0, cfg.integrator)
    traj.extras["floored_nodes"] = floored_log
    return traj


# ---------------------------------------------------------------------------
# Hughes crowd model


@dataclass(frozen=True)
class HughesConfig:
    grid: Grid  # bounded 2-D, exit nodes tagged EXIT
    rho0: GridFunction
    integrator: IntegratorSpec
    rho_cap: float = 0.99
    epsilon: float = 0.0
    eikonal_tol: float = 1e-8
    eikonal_max_iter: int | None = None
    eikonal_every_k: int = 1
    wall_value: float = 1e6
    field_history: bool = True

    def __post_init__(self):
        g = self.grid
        if g.dim != 2 or g.topology != "bounded":
            raise ValidationError("hughes.grid", "needs a bounded 2-D grid")
        if not np.any(g.boundary_tags == EXIT):
            raise ValidationError("hughes.grid", "no exit nodes tagged")
        if not g.compatible(self.rho0.grid):
            raise ValidationError("hughes.rho0", "initial density grid mismatch")
        if not (0 < self.rho_cap < 1):
            raise ValidationError("hughes.rho_cap", "mobility degenerates at 1; need cap in (0,1)")
        if np.any(self.rho0.values < 0) or np.any(self.rho0.values > self.rho_cap):
            raise ValidationError("hughes.rho0", "need 0 <= rho0 <= rho_cap")
        if self.eikonal_every_k < 1:
            raise ValidationError("hughes.eikonal_every_k", "must be >= 1")


def solve_eikonal(c_field: GridFunction, cfg: HughesConfig) -> EikonalResult:
    """Exit-time potential for the configured geometry: u = 0 on exit nodes,
    u = wall_value on the remaining boundary, |Du| = c_field inside."""
    return eikonal_distance(
        c_field,
        exit_mask=cfg.grid.boundary_tags == EXIT,
        wall_value=cfg.wall_value,
        tol=cfg.eikonal_tol,
        max_iter=cfg.eikonal_max_iter,
    )


def solve_hughes(cfg: HughesConfig) -> Trajectory:
    grid = cfg.grid
    shape = grid.shape
    vol = grid.cell_volume
    ring = grid.boundary_mask()

    state: dict = {"gen": None, "u": None, "step": 0}
    eikonal_log: list[tuple[int, int, float]] = []

    def prepare(t, y):
        rho = np.clip(y.reshape(shape), 0.0, cfg.rho_cap)
        rho[ring] = 0.0
        if (state["step"] % cfg.eikonal_every_k == 0) or state["u"] is None:
            res = solve_eikonal(GridFunction(grid, 1.0 / (1.0 - rho)), cfg)
            eikonal_log.append((state["step"], res.iterations, res.residual))
            if not res.converged:
                raise NoConvergenceError(res.iterations, res.residual)
            state["u"] = res.u
        scheme_t = SchemeSpec(
            ScaledQuadratic(c=GridFunction(grid, (1.0 - rho) ** 2), shift=0.0),
            discretization=UPWIND,
            epsilon=cfg.epsilon,
        )
        # boundary node equations are pinned (density 0 there); dropping
        # their rows keeps the huge wall slopes out of the CFL bound while
        # interior rows still discharge mass into exit columns
        state["gen"] = mask_generator_rows(linearize(scheme_t, state["u"]), ~ring)
        state["step"] += 1
        return rho.ravel(), cfl_max_step(state["gen"])

    def post_step(t, y):
        m = y.reshape(shape)
        m[ring] = 0.0  # mass reaching the boundary leaves the room
        return m.ravel()

    system = OdeSystem(
        rhs=lambda t, y: fp_rhs_flat(state["gen"], y),
        prepare=prepare,
        post_step=post_step,
        unpack=lambda y: {
            "u": state["u"] if state["u"] is not None else GridFunction.constant(grid, 0.0),
            "m": GridFunction(grid, y.reshape(shape).copy()),
        },
        measure=lambda y: (vol * float(y.sum()), float(y.min()), float(y.max())),
    )

    rho0 = cfg.rho0.values.copy()
    rho0[ring] = 0.0  # boundary density is pinned at zero
    traj = integrate(system, rho0.ravel(), cfg.integrator)
    traj.extras["eikonal_iterations"] = eikonal_log
    return traj


def tag_exit_segment(grid_shape: tuple[int, ...], grid: Grid, edge: str,
                     span: tuple[float, float] | None = None) -> np.ndarray:
    """Boundary tag array with EXIT on one edge (optionally restricted to a
    coordinate span along it) and WALL elsewhere on the ring."""
    from .grids import WALL, boundary_ring_mask

    tags = np.zeros(grid_shape, dtype=np.int8)
    ring = boundary_ring_mask(grid_shape)
    tags[ring] = WALL
    if edge == "all":
        tags[ring] = EXIT
        return tags
    axis, side = {"xmin": (0, 0), "xmax": (0, -1), "ymin": (1, 0), "ymax": (1, -1)}[edge]
    other = 1 - axis
    coords = grid.axis_coords(other)
    if span is None:
        inside = np.ones(len(coords), dtype=bool)
    else:
        pad = 1e-9 * (grid.hi[other] - grid.lo[other])
        inside = (coords >= span[0] - pad) & (coords <= span[1] + pad)
    idx = [slice(None)] * grid.dim
    idx[axis] = side
    edge_tags = tags[tuple(idx)]
    edge_tags[inside] = EXIT
    tags[tuple(idx)] = edge_tags
    return tags


def hughes_grid(n: tuple[int, int] = (100, 34),
                domain: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 3.0), (0.0, 1.0)),
                exit_edge: str = "ymax",
                exit_span: tuple[float, float] | None = (2.25, 3.0)) -> Grid:
    """Evacuation-room grid: rectangle with a door segment on one edge.

    The default matches a 3 x 1 room with the door on the top edge over
    x in [2.25, 3]; 100 nodes along x and 34 along y give equal spacing."""
    base = Grid(n=n, lo=(domain[0][0], domain[1][0]), hi=(domain[0][1], domain[1][1]),
                topology="bounded")
    tags = tag_exit_segment(base.shape, base, exit_edge, exit_span)
    return Grid(n=n, lo=base.lo, hi=base.hi, topology="bounded", boundary_tags=tags)
