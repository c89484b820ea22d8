"""Monte-Carlo cross-check: Euler-Maruyama particles for a drift-diffusion
density, binned back onto the solver grid.

The drift is a nodal vector field, evaluated between nodes by multilinear
interpolation; the density estimate is a plain histogram on node-centered
cells so the comparison against a grid solution is pure quadrature.  All
randomness comes from one seeded generator with a fixed per-step draw
layout, so runs are reproducible and runs sharing a seed agree path-wise on
their common time range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import GridMismatchError, ValidationError
from .grids import Grid, GridFunction, interp_many, nearest_node_index, total_mass

WRAP = "wrap"
ABSORB = "absorb"


@dataclass(frozen=True)
class SdeConfig:
    drift: tuple[GridFunction, ...]
    epsilon: float
    particles: int
    dt: float
    t_final: float
    boundary: str = WRAP
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "drift", tuple(self.drift))
        if len(self.drift) < 1:
            raise ValidationError("sde.drift", "need one component per axis")
        g = self.drift[0].grid
        if len(self.drift) != g.dim:
            raise ValidationError("sde.drift", f"expected {g.dim} components")
        if any(not comp.grid.compatible(g) for comp in self.drift):
            raise ValidationError("sde.drift", "components on different grids")
        if self.epsilon < 0:
            raise ValidationError("sde.epsilon", "must be nonnegative")
        if self.particles < 1:
            raise ValidationError("sde.particles", "need at least one particle")
        if not self.dt > 0:
            raise ValidationError("sde.dt", "must be positive")
        if self.t_final < 0 or (self.t_final > 0 and self.dt > self.t_final):
            raise ValidationError("sde.dt", "dt must not exceed t_final")
        if self.boundary not in (WRAP, ABSORB):
            raise ValidationError("sde.boundary", self.boundary)

    @property
    def grid(self) -> Grid:
        return self.drift[0].grid


@dataclass(frozen=True)
class EmpiricalDensity:
    density: GridFunction
    surviving_fraction: float
    seed: int
    particles: int

    @property
    def grid(self) -> Grid:
        return self.density.grid


@backend.njit
def _advance_1d(pos, alive, bvals, lo, dx, n, periodic_field, dt, noise_scale,
                normals, wrap, lo_dom, hi_dom):
    length = hi_dom - lo_dom
    for p in range(pos.shape[0]):
        if not alive[p]:
            continue
        b = _interp1(bvals, lo, dx, n, periodic_field, pos[p, 0])
        x = pos[p, 0] + b * dt + noise_scale * normals[p, 0]
        if wrap:
            x = lo_dom + ((x - lo_dom) % length)
        elif x < lo_dom or x > hi_dom:
            alive[p] = False
        pos[p, 0] = x


@backend.njit
def _interp1(vals, lo, dx, n, periodic, q):
    t = (q - lo) / dx
    if periodic:
        t = t % n
        i0 = int(math.floor(t))
        f = t - i0
        i0 = i0 % n
        i1 = (i0 + 1) % n
    else:
        if t < 0.0:
            t = 0.0
        if t > n - 1.0:
            t = n - 1.0
        i0 = int(math.floor(t))
        if i0 > n - 2:
            i0 = n - 2
        f = t - i0
        i1 = i0 + 1
    return (1.0 - f) * vals[i0] + f * vals[i1]


@backend.njit
def _interp2(vals, lo0, lo1, dx0, dx1, periodic, qx, qy):
    n0, n1 = vals.shape
    t0 = (qx - lo0) / dx0
    t1 = (qy - lo1) / dx1
    if periodic:
        t0 = t0 % n0
        t1 = t1 % n1
        i0 = int(math.floor(t0))
        f0 = t0 - i0
        i0 = i0 % n0
        i1 = (i0 + 1) % n0
        j0 = int(math.floor(t1))
        f1 = t1 - j0
        j0 = j0 % n1
        j1 = (j0 + 1) % n1
    else:
        if t0 < 0.0:
            t0 = 0.0
        if t0 > n0 - 1.0:
            t0 = n0 - 1.0
        if t1 < 0.0:
            t1 = 0.0
        if t1 > n1 - 1.0:
            t1 = n1 - 1.0
        i0 = int(math.floor(t0))
        if i0 > n0 - 2:
            i0 = n0 - 2
        f0 = t0 - i0
        i1 = i0 + 1
        j0 = int(math.floor(t1))
        if j0 > n1 - 2:
            j0 = n1 - 2
        f1 = t1 - j0
        j1 = j0 + 1
    return (1.0 - f0) * ((1.0 - f1) * vals[i0, j0] + f1 * vals[i0, j1]) + f0 * (
        (1.0 - f1) * vals[i1, j0] + f1 * vals[i1, j1]
    )


@backend.njit
def _advance_2d(pos, alive, b0, b1, lo0, lo1, dx0, dx1, periodic_field, dt,
                noise_scale, normals, wrap, lo_dom0, hi_dom0, lo_dom1, hi_dom1):
    len0 = hi_dom0 - lo_dom0
    len1 = hi_dom1 - lo_dom1
    for p in range(pos.shape[0]):
        if not alive[p]:
            continue
        vx = _interp2(b0, lo0, lo1, dx0, dx1, periodic_field, pos[p, 0], pos[p, 1])
        vy = _interp2(b1, lo0, lo1, dx0, dx1, periodic_field, pos[p, 0], pos[p, 1])
        x = pos[p, 0] + vx * dt + noise_scale * normals[p, 0]
        y = pos[p, 1] + vy * dt + noise_scale * normals[p, 1]
        if wrap:
            x = lo_dom0 + ((x - lo_dom0) % len0)
            y = lo_dom1 + ((y - lo_dom1) % len1)
        elif x < lo_dom0 or x > hi_dom0 or y < lo_dom1 or y > hi_dom1:
            alive[p] = False
        pos[p, 0] = x
        pos[p, 1] = y


def _advance_numpy(cfg: SdeConfig, pos, alive, dt, noise_scale, normals):
    grid = cfg.grid
    live = np.where(alive)[0]
    if live.size == 0:
        return
    b = np.stack(
        [interp_many(grid, comp.values, pos[live]) for comp in cfg.drift], axis=1
    )
    newpos = pos[live] + b * dt + noise_scale * normals[live]
    if cfg.boundary == WRAP:
        for a in range(grid.dim):
            length = grid.hi[a] - grid.lo[a]
            newpos[:, a] = grid.lo[a] + np.mod(newpos[:, a] - grid.lo[a], length)
    else:
        outside = np.zeros(live.size, dtype=bool)
        for a in range(grid.dim):
            outside |= (newpos[:, a] < grid.lo[a]) | (newpos[:, a] > grid.hi[a])
        alive[live[outside]] = False
    pos[live] = newpos


def sample_initial_positions(rho0: GridFunction, count: int, rng) -> np.ndarray:
    """Inverse-CDF draw from the histogram of rho0, uniform within each
    node-centered cell."""
    grid = rho0.grid
    weights = rho0.values.ravel()
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValidationError("sde.rho0", "need a nonnegative density with positive mass")
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(count), side="right")
    cells = np.minimum(cells, weights.size - 1)
    idx = np.unravel_index(cells, grid.shape)
    pos = np.empty((count, grid.dim))
    for a in range(grid.dim):
        centers = grid.lo[a] + grid.dx[a] * idx[a]
        pos[:, a] = centers + (rng.random(count) - 0.5) * grid.dx[a]
        if grid.topology == "bounded":
            np.clip(pos[:, a], grid.lo[a], grid.hi[a], out=pos[:, a])
    return pos


def simulate(cfg: SdeConfig, rho0: GridFunction) -> EmpiricalDensity:
    """Euler-Maruyama march to t_final; returns the binned density whose
    total mass equals the surviving fraction."""
    grid = cfg.grid
    if not grid.compatible(rho0.grid):
        raise GridMismatchError("initial density grid differs from the drift grid")
    rng = np.random.default_rng(cfg.seed)
    pos = sample_initial_positions(rho0, cfg.particles, rng)
    alive = np.ones(cfg.particles, dtype=np.bool_)

    n_steps = int(math.ceil(cfg.t_final / cfg.dt - 1e-12)) if cfg.t_final > 0 else 0
    periodic_field = grid.topology == "periodic"
    wrap = cfg.boundary == WRAP
    use_nb = backend.use_numba()
    t = 0.0
    for _ in range(n_steps):
        dt = min(cfg.dt, cfg.t_final - t)
        noise_scale = math.sqrt(2.0 * cfg.epsilon * dt) if cfg.epsilon > 0 else 0.0
        normals = (
            rng.standard_normal((cfg.particles, grid.dim))
            if cfg.epsilon > 0
            else np.zeros((cfg.particles, grid.dim))
        )
        if use_nb:
            if grid.dim == 1:
                _advance_1d(pos, alive, cfg.drift[0].values, grid.lo[0], grid.dx[0],
                            grid.n[0], periodic_field, dt, noise_scale, normals, wrap,
                            grid.lo[0], grid.hi[0])
            else:
                _advance_2d(pos, alive, cfg.drift[0].values, cfg.drift[1].values,
                            grid.lo[0], grid.lo[1], grid.dx[0], grid.dx[1],
                            periodic_field, dt, noise_scale, normals, wrap,
                            grid.lo[0], grid.hi[0], grid.lo[1], grid.hi[1])
        else:
            _advance_numpy(cfg, pos, alive, dt, noise_scale, normals)
        t += dt

    counts = np.zeros(grid.shape)
    if np.any(alive):
        idx = nearest_node_index(grid, pos[alive])
        np.add.at(counts, idx, 1.0)
    density = counts / (cfg.particles * grid.cell_volume)
    return EmpiricalDensity(
        density=GridFunction(grid, density),
        surviving_fraction=float(alive.sum()) / cfg.particles,
        seed=cfg.seed,
        particles=cfg.particles,
    )


def l1_distance(fp_result: GridFunction, mc_result: EmpiricalDensity) -> float:
    """L1 distance after rescaling the grid solution to the Monte-Carlo
    surviving fraction (both sides then carry the same total mass)."""
    if not fp_result.grid.compatible(mc_result.grid):
        raise GridMismatchError("cannot compare densities on different grids")
    mass = total_mass(fp_result)
    if mass <= 0:
        raise ValidationError("compare.fp_result", "grid solution must carry positive mass")
    scaled = fp_result.values * (mc_result.surviving_fraction / mass)
    vol = fp_result.grid.cell_volume
    return float(vol * np.abs(scaled - mc_result.density.values).sum())
