"""Exact-transpose Fokker-Planck generators.

``linearize`` freezes a scheme at a grid function U and materializes the
Jacobian J = d(operator)/dU as a sparse stencil operator.  The Fokker-Planck
right-hand side is the exact transpose with flipped sign,

    dM/dt = -J^T M,

which conserves the total mass exactly (rows of J sum to zero because the
operator is translation invariant) and preserves nonnegativity under small
enough explicit steps (off-diagonals of -J^T are nonnegative because the
scheme is monotone).  Transposition is an index swap on the sparse storage,
never a numerical approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatchError, ValidationError
from .grids import Grid, GridFunction, _interp_axis_indices
from .schemes import (
    SEMI_LAGRANGIAN,
    UPWIND,
    LinearDrift,
    PowerNorm,
    ScaledQuadratic,
    SchemeSpec,
    _check_compatible,
    sl_plan,
    upwind_slope_weights,
)


@dataclass(frozen=True)
class StencilOperator:
    """Sparse linear operator on grid functions with an explicit transpose."""

    grid: Grid
    matrix: sp.csr_matrix

    def apply(self, u: GridFunction) -> GridFunction:
        if not self.grid.compatible(u.grid):
            raise GridMismatchError("operator and operand grids differ")
        return GridFunction(self.grid, self.apply_flat(u.values.ravel()).reshape(self.grid.shape))

    def apply_flat(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def transpose(self) -> "StencilOperator":
        return StencilOperator(self.grid, self.matrix.T.tocsr())

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def max_offdiag(self) -> float:
        coo = self.matrix.tocoo()
        off = coo.row != coo.col
        return float(coo.data[off].max()) if np.any(off) else 0.0

    def nnz_per_row_max(self) -> int:
        return int(np.diff(self.matrix.indptr).max())

    def dump_text(self) -> str:
        """Coordinate format, ``row col value`` lines sorted row-major."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [
            f"{coo.row[k]} {coo.col[k]} {repr(float(coo.data[k]))}"
            for k in order
        ]
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dump_text())


def _from_triplets(grid: Grid, rows, cols, vals) -> StencilOperator:
    n = grid.num_nodes
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    mat.sum_duplicates()
    return StencilOperator(grid, mat)


def _edge_pair_triplets(grid: Grid, axis: int, step: int, scale: np.ndarray):
    """Triplets of ``scale_i * (u_i - u_{i+step*e_axis})`` per valid row;
    rows whose neighbor crosses a bounded wall contribute nothing
    (zero-gradient ghost)."""
    shape = grid.shape
    n = grid.num_nodes
    idx = np.arange(n).reshape(shape)
    if grid.topology == "periodic":
        nb = np.roll(idx, -step, axis=axis).ravel()
        valid = np.ones(n, dtype=bool)
    else:
        coords = np.arange(shape[axis]) + step
        valid_axis = (coords >= 0) & (coords < shape[axis])
        take = np.clip(coords, 0, shape[axis] - 1)
        nb = np.take(idx, take, axis=axis).ravel()
        valid = np.broadcast_to(
            valid_axis.reshape([-1 if a == axis else 1 for a in range(grid.dim)]),
            shape,
        ).ravel()
    rows = idx.ravel()[valid]
    s = scale.ravel()[valid]
    keep = s != 0.0
    rows = rows[keep]
    s = s[keep]
    nbk = nb[valid][keep]
    return ([rows, rows], [rows, nbk], [s, -s])


def _append_neg_laplacian(grid: Grid, coeff: float, rows, cols, vals):
    for axis in range(grid.dim):
        scale = np.full(grid.shape, coeff / grid.dx[axis] ** 2)
        for step in (+1, -1):
            r, c, v = _edge_pair_triplets(grid, axis, step, scale)
            rows += r
            cols += c
            vals += v


def neg_laplacian_operator(grid: Grid, coeff: float = 1.0) -> StencilOperator:
    """Stencil of the negative Laplacian scaled by ``coeff``."""
    rows, cols, vals = [], [], []
    _append_neg_laplacian(grid, coeff, rows, cols, vals)
    return _from_triplets(grid, rows, cols, vals)


def _upwind_jacobian(scheme: SchemeSpec, u: GridFunction) -> StencilOperator:
    grid = u.grid
    wf, wb = upwind_slope_weights(scheme, u)
    rows, cols, vals = [], [], []
    for axis in range(grid.dim):
        # forward slope F = -(u_i - u_{i+1})/dx, backward slope B = (u_i - u_{i-1})/dx
        r, c, v = _edge_pair_triplets(grid, axis, +1, -wf[axis] / grid.dx[axis])
        rows += r
        cols += c
        vals += v
        r, c, v = _edge_pair_triplets(grid, axis, -1, wb[axis] / grid.dx[axis])
        rows += r
        cols += c
        vals += v
    if scheme.epsilon > 0:
        _append_neg_laplacian(grid, scheme.epsilon, rows, cols, vals)
    if not rows:
        return StencilOperator(grid, sp.csr_matrix((grid.num_nodes, grid.num_nodes)))
    return _from_triplets(grid, rows, cols, vals)


def _interp_weight_triplets(grid: Grid, points: np.ndarray, row_scale: np.ndarray):
    """Triplets of ``-row_scale_i * w_k`` for the multilinear weights of each
    row's query point, matching ``interp_many`` exactly."""
    n = grid.num_nodes
    rows_base = np.arange(n)
    rows, cols, vals = [], [], []
    if grid.dim == 1:
        i0, i1, f = _interp_axis_indices(grid, 0, points[:, 0])
        for idx, w in ((i0, 1.0 - f), (i1, f)):
            rows.append(rows_base)
            cols.append(idx)
            vals.append(-row_scale * w)
    else:
        n1 = grid.n[1]
        i0, i1, fx = _interp_axis_indices(grid, 0, points[:, 0])
        j0, j1, fy = _interp_axis_indices(grid, 1, points[:, 1])
        for iarr, jarr, w in (
            (i0, j0, (1.0 - fx) * (1.0 - fy)),
            (i0, j1, (1.0 - fx) * fy),
            (i1, j0, fx * (1.0 - fy)),
            (i1, j1, fx * fy),
        ):
            rows.append(rows_base)
            cols.append(iarr * n1 + jarr)
            vals.append(-row_scale * w)
    return rows, cols, vals


def _sl_jacobian(scheme: SchemeSpec, u: GridFunction) -> StencilOperator:
    grid = u.grid
    plan = sl_plan(scheme, u)
    n = grid.num_nodes
    rows_base = np.arange(n)
    rows, cols, vals = [], [], []
    # drift part: chain * (I - W(frozen argmax)) / h
    scale = plan.chain.ravel() / plan.hgrid
    rows.append(rows_base)
    cols.append(rows_base)
    vals.append(scale.copy())
    r, c, v = _interp_weight_triplets(grid, plan.drift_points, scale)
    rows += r
    cols += c
    vals += v
    # spread part: (I - avg of axis-shifted interpolations) / h
    if plan.spread_radius > 0:
        nodes = np.stack([g.ravel() for g in grid.meshgrid()], axis=1)
        spread_scale = np.full(n, 1.0 / (2.0 * grid.dim * plan.hgrid))
        rows.append(rows_base)
        cols.append(rows_base)
        vals.append(np.full(n, 1.0 / plan.hgrid))
        for axis in range(grid.dim):
            e = np.zeros(grid.dim)
            e[axis] = plan.spread_radius
            for pts in (nodes + e, nodes - e):
                r, c, v = _interp_weight_triplets(grid, pts, spread_scale)
                rows += r
                cols += c
                vals += v
    return _from_triplets(grid, rows, cols, vals)


@dataclass(frozen=True)
class FpGenerator:
    """Scheme Jacobian frozen at one grid function, plus its exact transpose."""

    jacobian: StencilOperator
    jacobian_t: StencilOperator
    scheme: SchemeSpec
    frozen_u: GridFunction

    @property
    def grid(self) -> Grid:
        return self.jacobian.grid


def mask_generator_rows(gen: FpGenerator, keep: np.ndarray) -> FpGenerator:
    """Zero the Jacobian rows outside ``keep`` (node equations pinned by
    Dirichlet data).  Kept rows retain their columns, so flux from kept
    nodes into masked ones stays in the transpose and mass bookkeeping."""
    keep_flat = np.asarray(keep, dtype=bool).ravel()
    if keep_flat.size != gen.grid.num_nodes:
        raise ValidationError("mask", "keep mask does not match the grid")
    selector = sp.diags(keep_flat.astype(np.float64)).tocsr()
    masked = StencilOperator(gen.grid, (selector @ gen.jacobian.matrix).tocsr())
    return FpGenerator(
        jacobian=masked,
        jacobian_t=masked.transpose(),
        scheme=gen.scheme,
        frozen_u=gen.frozen_u,
    )


def linearize(scheme: SchemeSpec, u: GridFunction) -> FpGenerator:
    """Jacobian of the scheme operator at ``u``, with the upwind filter /
    argmax selections frozen (a subgradient choice at kinks)."""
    _check_compatible(scheme, u)
    if scheme.discretization == UPWIND:
        jac = _upwind_jacobian(scheme, u)
    elif scheme.discretization == SEMI_LAGRANGIAN:
        jac = _sl_jacobian(scheme, u)
    else:  # pragma: no cover - SchemeSpec validates
        raise ValidationError("scheme.discretization", scheme.discretization)
    return FpGenerator(jacobian=jac, jacobian_t=jac.transpose(), scheme=scheme, frozen_u=u)


def fp_rhs(gen: FpGenerator, m: GridFunction) -> GridFunction:
    """Fokker-Planck right-hand side -J^T M; consistent with
    div(grad_p H(x, DU) * M) + eps * Lap(M) for smooth data."""
    if not gen.grid.compatible(m.grid):
        raise GridMismatchError("density lives on a different grid")
    return GridFunction(gen.grid, -(gen.jacobian_t.apply_flat(m.values.ravel())).reshape(gen.grid.shape))


def fp_rhs_flat(gen: FpGenerator, m_flat: np.ndarray) -> np.ndarray:
    return -(gen.jacobian_t.apply_flat(m_flat))


def cfl_max_step(gen: FpGenerator) -> float:
    """Largest dt for which the explicit Euler update matrix I + dt*(-J^T)
    stays entrywise nonnegative: 1 / max |diag|, +inf for a zero diagonal."""
    d = np.abs(gen.jacobian.diagonal())
    dmax = float(d.max()) if d.size else 0.0
    return np.inf if dmax == 0.0 else 1.0 / dmax


@dataclass(frozen=True)
class AdjointReport:
    trials: int
    max_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tol

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"adjoint identity {status}: max relative defect {self.max_defect:.3e} "
            f"over {self.trials} trials (tol {self.tol:.1e})"
        )


def check_adjoint(gen: FpGenerator, trials: int = 100, tol: float = 1e-12,
                  seed: int = 0) -> AdjointReport:
    """Verify <fp_rhs(M), W> + <M, J W> = 0 for random pairs (the discrete
    integration-by-parts identity with no boundary terms)."""
    from .grids import inner_product

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = GridFunction(gen.grid, rng.standard_normal(gen.grid.shape))
        w = GridFunction(gen.grid, rng.standard_normal(gen.grid.shape))
        lhs = inner_product(fp_rhs(gen, m), w)
        rhs = inner_product(m, gen.jacobian.apply(w))
        denom = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs + rhs) / denom)
    return AdjointReport(trials=trials, max_defect=worst, tol=tol)
