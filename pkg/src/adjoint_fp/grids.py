"""Uniform 1-D/2-D grids, grid functions and the discrete calculus.

Conventions, fixed once here and relied on everywhere else:

* arrays are row-major with axis 0 = x (and axis 1 = y in 2-D);
* periodic grids have ``n`` nodes per axis at ``lo + i*dx`` with
  ``dx = (hi - lo)/n`` (the node at ``hi`` is the node at ``lo``);
* bounded grids have ``n`` nodes per axis at ``lo + i*dx`` with
  ``dx = (hi - lo)/(n - 1)`` so nodes sit exactly on the boundary, where
  Dirichlet data lives;
* one-sided differences carry the sign ``(neighbor - center)/dx`` for both
  orientations, so ``diff_backward`` is the negative of the conventional
  backward difference;
* ``neg_laplacian`` returns the *negative* of the consistent Laplacian
  (positive definite sign convention);
* the duality product is the uniform-weight quadrature ``prod(dx) * sum(f*g)``,
  which makes every discrete integration-by-parts identity exact.

Bounded-grid difference operators use zero-gradient ghost extension (the
ghost value equals the boundary value, so differences across a wall vanish);
boundary physics is imposed by the solvers, not by this layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ValidationError

PERIODIC = "periodic"
BOUNDED = "bounded"

# boundary tag codes for bounded grids
INTERIOR = 0
EXIT = 1
WALL = 2


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on an axis-aligned box, periodic or bounded.

    ``n`` counts nodes per axis.  Bounded grids carry an int8 tag per node:
    0 interior, 1 exit, 2 wall; every node on the outer ring must be tagged.
    """

    n: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    topology: str = PERIODIC
    boundary_tags: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(n) not in (1, 2):
            raise ValidationError("grid.n", f"only 1-D and 2-D grids, got dim {len(n)}")
        if not (len(n) == len(lo) == len(hi)):
            raise ValidationError("grid.domain", "n, lo, hi must have equal length")
        if any(k < 2 for k in n):
            raise ValidationError("grid.n", f"need at least 2 nodes per axis, got {n}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValidationError("grid.domain", f"empty box {lo}..{hi}")
        if self.topology not in (PERIODIC, BOUNDED):
            raise ValidationError("grid.topology", f"unknown topology {self.topology!r}")
        if self.topology == PERIODIC:
            if self.boundary_tags is not None:
                raise ValidationError("grid.boundary_tags", "periodic grids have no boundary nodes")
        else:
            tags = self.boundary_tags
            if tags is None:
                tags = np.zeros(n, dtype=np.int8)
                ring = boundary_ring_mask(n)
                tags[ring] = WALL
            tags = np.ascontiguousarray(tags, dtype=np.int8)
            if tags.shape != n:
                raise ValidationError("grid.boundary_tags", "tag array shape mismatch")
            ring = boundary_ring_mask(n)
            if np.any(tags[~ring] != INTERIOR):
                raise ValidationError("grid.boundary_tags", "interior nodes must be untagged")
            if np.any(tags[ring] == INTERIOR):
                raise ValidationError("grid.boundary_tags", "every boundary node needs a tag")
            tags.flags.writeable = False
            object.__setattr__(self, "boundary_tags", tags)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    @property
    def dx(self) -> tuple[float, ...]:
        if self.topology == PERIODIC:
            return tuple((h - l) / k for l, h, k in zip(self.lo, self.hi, self.n))
        return tuple((h - l) / (k - 1) for l, h, k in zip(self.lo, self.hi, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.dx[axis] * np.arange(self.n[axis])

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of the outer ring (all False for periodic grids)."""
        if self.topology == PERIODIC:
            return np.zeros(self.shape, dtype=bool)
        return boundary_ring_mask(self.n)

    def compatible(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and self.lo == other.lo
            and self.hi == other.hi
            and self.topology == other.topology
        )


def boundary_ring_mask(shape: tuple[int, ...]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for axis in range(len(shape)):
        idx_lo = [slice(None)] * len(shape)
        idx_lo[axis] = 0
        mask[tuple(idx_lo)] = True
        idx_hi = [slice(None)] * len(shape)
        idx_hi[axis] = shape[axis] - 1
        mask[tuple(idx_hi)] = True
    return mask


def unit_torus(n: int) -> Grid:
    return Grid(n=(n,), lo=(0.0,), hi=(1.0,), topology=PERIODIC)


def torus_2d(n0: int, n1: int | None = None, length: float = 1.0) -> Grid:
    n1 = n0 if n1 is None else n1
    return Grid(n=(n0, n1), lo=(0.0, 0.0), hi=(length, length), topology=PERIODIC)


@dataclass(frozen=True)
class GridFunction:
    """Real values on the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValidationError(
                "gridfunction.values",
                f"shape {v.shape} does not match grid {self.grid.shape}",
            )
        object.__setattr__(self, "values", v)

    @staticmethod
    def constant(grid: Grid, c: float) -> "GridFunction":
        return GridFunction(grid, np.full(grid.shape, float(c)))

    @staticmethod
    def from_callable(grid: Grid, f) -> "GridFunction":
        return GridFunction(grid, np.asarray(f(*grid.meshgrid()), dtype=np.float64))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def _require_same_grid(f: GridFunction, g: GridFunction):
    if not f.grid.compatible(g.grid):
        raise GridMismatchError("grid functions live on different grids")


def _shift(u: np.ndarray, axis: int, offset: int, topology: str) -> np.ndarray:
    """u evaluated at the node ``offset`` steps along ``axis``; bounded grids
    clamp at the edge (zero-gradient ghost)."""
    if topology == PERIODIC:
        return np.roll(u, -offset, axis=axis)
    idx = np.clip(np.arange(u.shape[axis]) + offset, 0, u.shape[axis] - 1)
    return np.take(u, idx, axis=axis)


def diff_forward(u: GridFunction, axis: int = 0) -> GridFunction:
    """One-sided difference toward the +axis neighbor: (u[i+1] - u[i])/dx."""
    _check_axis(u.grid, axis)
    d = (_shift(u.values, axis, +1, u.grid.topology) - u.values) / u.grid.dx[axis]
    return GridFunction(u.grid, d)


def diff_backward(u: GridFunction, axis: int = 0) -> GridFunction:
    """One-sided difference toward the -axis neighbor: (u[i-1] - u[i])/dx.

    Note the sign: this is the negative of the conventional backward
    difference.
    """
    _check_axis(u.grid, axis)
    d = (_shift(u.values, axis, -1, u.grid.topology) - u.values) / u.grid.dx[axis]
    return GridFunction(u.grid, d)


def _check_axis(grid: Grid, axis: int):
    if not (0 <= axis < grid.dim):
        raise ValidationError("axis", f"axis {axis} out of range for dim {grid.dim}")


def neg_laplacian(u: GridFunction) -> GridFunction:
    """Negative discrete Laplacian: sum over axes of (2u - u_plus - u_minus)/dx^2."""
    g = u.grid
    out = np.zeros_like(u.values)
    for axis in range(g.dim):
        up = _shift(u.values, axis, +1, g.topology)
        dn = _shift(u.values, axis, -1, g.topology)
        out += (2.0 * u.values - up - dn) / g.dx[axis] ** 2
    return GridFunction(g, out)


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Duality product: uniform-weight quadrature of f*g over the box."""
    _require_same_grid(f, g)
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def total_mass(m: GridFunction) -> float:
    return float(m.grid.cell_volume * np.sum(m.values))


# ---------------------------------------------------------------------------
# interpolation


def _interp_axis_indices(grid: Grid, axis: int, coords: np.ndarray):
    """Map physical coordinates on one axis to (left index, right index, frac)."""
    n = grid.n[axis]
    t = (coords - grid.lo[axis]) / grid.dx[axis]
    if grid.topology == PERIODIC:
        t = np.mod(t, n)
        i0 = np.floor(t).astype(np.int64)
        frac = t - i0
        i0 = np.mod(i0, n)
        i1 = np.mod(i0 + 1, n)
    else:
        t = np.clip(t, 0.0, n - 1.0)
        i0 = np.minimum(np.floor(t).astype(np.int64), n - 2)
        frac = t - i0
        i1 = i0 + 1
    return i0, i1, frac


def interp_many(grid: Grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of nodal ``values`` at ``points`` (k, dim).

    Periodic grids wrap the query, bounded grids clamp it; weights are
    nonnegative and sum to one.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != grid.dim:
        raise ValidationError("points", f"expected shape (k, {grid.dim})")
    if grid.dim == 1:
        i0, i1, f = _interp_axis_indices(grid, 0, pts[:, 0])
        return (1.0 - f) * values[i0] + f * values[i1]
    i0, i1, fx = _interp_axis_indices(grid, 0, pts[:, 0])
    j0, j1, fy = _interp_axis_indices(grid, 1, pts[:, 1])
    v00 = values[i0, j0]
    v01 = values[i0, j1]
    v10 = values[i1, j0]
    v11 = values[i1, j1]
    return (
        (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01)
        + fx * ((1.0 - fy) * v10 + fy * v11)
    )


def interpolate(u: GridFunction, point) -> float:
    """Multilinear interpolation at a single point."""
    pt = np.atleast_1d(np.asarray(point, dtype=np.float64)).reshape(1, -1)
    return float(interp_many(u.grid, u.values, pt)[0])


def nearest_node_index(grid: Grid, points: np.ndarray) -> tuple[np.ndarray, ...]:
    """Index of the node whose cell contains each point (node-centered cells)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = []
    for axis in range(grid.dim):
        n = grid.n[axis]
        t = (pts[:, axis] - grid.lo[axis]) / grid.dx[axis]
        idx = np.floor(t + 0.5).astype(np.int64)
        if grid.topology == PERIODIC:
            idx = np.mod(idx, n)
        else:
            idx = np.clip(idx, 0, n - 1)
        out.append(idx)
    return tuple(out)


# ---------------------------------------------------------------------------
# CSV serialization: one row per node, index coordinates then value


def grid_header(grid: Grid) -> str:
    n = ",".join(str(k) for k in grid.n)
    dom = ";".join(f"{repr(l)},{repr(h)}" for l, h in zip(grid.lo, grid.hi))
    return f"# grid dim={grid.dim} n={n} domain={dom} topology={grid.topology}"


def write_grid_csv(gf: GridFunction, path, extra_header: str | None = None) -> None:
    lines = [grid_header(gf.grid)]
    if extra_header:
        lines.append(extra_header)
    if gf.grid.dim == 1:
        for i, v in enumerate(gf.values):
            lines.append(f"{i},{repr(float(v))}")
    else:
        n0, n1 = gf.grid.n
        vals = gf.values
        for i in range(n0):
            for j in range(n1):
                lines.append(f"{i},{j},{repr(float(vals[i, j]))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_grid_header(line: str) -> Grid:
    if not line.startswith("# grid "):
        raise ValidationError("csv", "missing grid header line")
    fields = dict(tok.split("=", 1) for tok in line[len("# grid "):].split())
    dim = int(fields["dim"])
    n = tuple(int(x) for x in fields["n"].split(","))
    lo, hi = [], []
    for span in fields["domain"].split(";"):
        a, b = span.split(",")
        lo.append(float(a))
        hi.append(float(b))
    if len(n) != dim or len(lo) != dim:
        raise ValidationError("csv", "inconsistent grid header")
    return Grid(n=n, lo=tuple(lo), hi=tuple(hi), topology=fields["topology"])


def read_grid_csv(path) -> GridFunction:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    grid = parse_grid_header(lines[0])
    rows = [ln for ln in lines[1:] if not ln.startswith("#")]
    values = np.zeros(grid.shape)
    for ln in rows:
        parts = ln.split(",")
        if grid.dim == 1:
            values[int(parts[0])] = float(parts[1])
        else:
            values[int(parts[0]), int(parts[1])] = float(parts[2])
    return GridFunction(grid, values)
