"""Fokker-Planck solvers built by exact transposition of monotone
Hamilton-Jacobi discretizations, with drivers for forward-forward
mean-field games and crowd evacuation, and a particle-simulation oracle."""

from .backend import active_backend, set_backend, use_numba
from .eikonal import EikonalResult, eikonal_distance
from .errors import (
    AdjointFpError,
    ConfigError,
    GridMismatchError,
    NoConvergenceError,
    NonFiniteError,
    ParseError,
    StepUnderflowError,
    ValidationError,
)
from .generator import (
    AdjointReport,
    FpGenerator,
    StencilOperator,
    cfl_max_step,
    check_adjoint,
    fp_rhs,
    fp_rhs_flat,
    linearize,
    neg_laplacian_operator,
)
from .grids import (
    BOUNDED,
    EXIT,
    INTERIOR,
    PERIODIC,
    WALL,
    Grid,
    GridFunction,
    diff_backward,
    diff_forward,
    inner_product,
    interp_many,
    interpolate,
    neg_laplacian,
    read_grid_csv,
    torus_2d,
    total_mass,
    unit_torus,
    write_grid_csv,
)
from .marching import (
    EULER,
    RK4,
    IntegratorSpec,
    OdeSystem,
    Trajectory,
    euler_step,
    integrate,
    rk4_step,
)
from .particles import EmpiricalDensity, SdeConfig, l1_distance, simulate
from .schemes import (
    SEMI_LAGRANGIAN,
    UPWIND,
    LinearDrift,
    MonotonicityReport,
    PowerNorm,
    ScaledQuadratic,
    SchemeSpec,
    check_monotone,
    default_controls,
    hj_operator,
    neg_part,
    norm_power,
    pos_part,
)
from .systems import (
    CONGESTION,
    LOG_DENSITY,
    FfmfgConfig,
    HughesConfig,
    hughes_grid,
    solve_eikonal,
    solve_ffmfg,
    solve_fp,
    solve_hughes,
    tag_exit_segment,
)

__version__ = "0.1.0"
