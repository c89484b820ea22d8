"""Run-configuration files: flat key-value text with bracketed sections.

    # comment
    [run]
    command = mfg
    scheme = upwind
    out = out/ffmfg_log

    [grid]
    dim = 1
    n = 80
    domain = 0,1
    topology = periodic

    [mfg]
    coupling = log_density
    epsilon = 0.01
    u0 = 0.3*cos(2*pi*x)
    rho0 = 1

    [time]
    method = euler
    dt = auto
    t_final = 3
    snapshots = 50

Initial conditions are closed-form expressions over x (and y in 2-D),
evaluated at the grid nodes.  ``parse_config`` validates everything up
front; ``format_config`` is the canonical printer (parse . format is
idempotent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .expressions import ExpressionError, parse_expression
from .grids import Grid, GridFunction
from .marching import IntegratorSpec
from .schemes import (
    SEMI_LAGRANGIAN,
    UPWIND,
    LinearDrift,
    PowerNorm,
    ScaledQuadratic,
    SchemeSpec,
)
from .systems import CONGESTION, LOG_DENSITY, FfmfgConfig, HughesConfig, tag_exit_segment

COMMANDS = ("fp", "mfg", "hughes", "validate", "eikonal")
_SCHEMES = {"upwind": UPWIND, "semilagrangian": SEMI_LAGRANGIAN}


@dataclass(frozen=True)
class FpPayload:
    scheme: SchemeSpec
    u_freeze: GridFunction
    rho0: GridFunction
    integrator: IntegratorSpec


@dataclass(frozen=True)
class ValidatePayload:
    fp: FpPayload
    particles: int
    dt: float
    seed: int
    boundary: str


@dataclass(frozen=True)
class EikonalPayload:
    c_field: GridFunction
    wall_value: float
    tol: float
    max_iter: int | None


@dataclass(frozen=True)
class RunConfig:
    command: str
    scheme: str
    output_dir: str
    grid: Grid
    payload: object
    sections: tuple  # ((name, ((key, value), ...)), ...) in parse order


class _Section(dict):
    """key -> (value string, line number); remembers insertion order."""

    def __init__(self, name: str, line: int):
        super().__init__()
        self.name = name
        self.line = line


def _split_sections(text: str) -> dict[str, _Section]:
    sections: dict[str, _Section] = {}
    current: _Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, "unterminated section header")
            name = line[1:-1].strip().lower()
            if not name:
                raise ParseError(lineno, "empty section name")
            if name in sections:
                raise ParseError(lineno, f"duplicate section [{name}]")
            current = _Section(name, lineno)
            sections[name] = current
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected 'key = value'")
        if current is None:
            raise ParseError(lineno, "key outside any [section]")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        value = value.strip()
        if not key:
            raise ParseError(lineno, "empty key")
        if key in current:
            raise ParseError(lineno, f"duplicate key {key!r} in [{current.name}]")
        current[key] = (value, lineno)
    return sections


class _Reader:
    """Typed access with precise error locations."""

    def __init__(self, sections: dict[str, _Section], name: str):
        self.name = name
        self.sec = sections.get(name)

    def _raw(self, key: str, default=None, required=False):
        if self.sec is None or key not in self.sec:
            if required:
                raise ValidationError(f"{self.name}.{key}", "missing required key")
            return default
        return self.sec[key][0]

    def line(self, key: str) -> int:
        return self.sec[key][1] if self.sec and key in self.sec else -1

    def str(self, key, default=None, required=False, choices=None):
        v = self._raw(key, default, required)
        if v is None:
            return None
        v = v.strip().strip('"').strip("'").lower() if choices else v.strip().strip('"').strip("'")
        if choices and v not in choices:
            raise ValidationError(f"{self.name}.{key}", f"expected one of {choices}, got {v!r}")
        return v

    def float(self, key, default=None, required=False):
        v = self._raw(key, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ValidationError(f"{self.name}.{key}", f"not a number: {v!r}")

    def int(self, key, default=None, required=False):
        v = self._raw(key, None, required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ValidationError(f"{self.name}.{key}", f"not an integer: {v!r}")

    def expression(self, key, grid: Grid, default=None, required=False) -> GridFunction | None:
        v = self._raw(key, None, required)
        if v is None:
            if default is None:
                return None
            v = default
        try:
            return parse_expression(v).on_grid(grid)
        except ExpressionError as exc:
            raise ParseError(self.line(key) if self.line(key) > 0 else 0,
                             f"{self.name}.{key}: {exc}")

    def pair(self, key, default=None, required=False):
        v = self._raw(key, None, required)
        if v is None:
            return default
        parts = [p.strip() for p in v.split(",")]
        if len(parts) != 2:
            raise ValidationError(f"{self.name}.{key}", f"expected 'a,b', got {v!r}")
        return float(parts[0]), float(parts[1])


def _build_grid(sections) -> Grid:
    r = _Reader(sections, "grid")
    if r.sec is None:
        raise ValidationError("grid", "missing [grid] section")
    dim = r.int("dim", required=True)
    n_raw = r.str("n", required=True)
    n = tuple(int(p.strip()) for p in n_raw.split(","))
    if len(n) == 1 and dim == 2:
        n = (n[0], n[0])
    dom_raw = r.str("domain", required=True)
    lo, hi = [], []
    for span in dom_raw.split(";"):
        parts = [p.strip() for p in span.split(",")]
        if len(parts) != 2:
            raise ValidationError("grid.domain", f"expected 'lo,hi[;lo,hi]', got {dom_raw!r}")
        lo.append(float(parts[0]))
        hi.append(float(parts[1]))
    if len(lo) == 1 and dim == 2:
        lo, hi = lo * 2, hi * 2
    topology = r.str("topology", default="periodic", choices=("periodic", "bounded"))
    if len(n) != dim or len(lo) != dim:
        raise ValidationError("grid", "dim does not match n/domain")
    return Grid(n=n, lo=tuple(lo), hi=tuple(hi), topology=topology)


def _build_integrator(sections) -> IntegratorSpec:
    r = _Reader(sections, "time")
    if r.sec is None:
        raise ValidationError("time", "missing [time] section")
    dt_raw = r.str("dt", default="auto")
    dt = None if dt_raw == "auto" else float(dt_raw)
    return IntegratorSpec(
        t_final=r.float("t_final", required=True),
        method=r.str("method", default="euler", choices=("euler", "rk4")),
        dt=dt,
        safety=r.float("safety", default=0.9),
        snapshot_count=r.int("snapshots", default=50),
    )


def _build_scheme(sections, grid: Grid, discretization: str) -> tuple[SchemeSpec, GridFunction, GridFunction]:
    r = _Reader(sections, "fp")
    if r.sec is None:
        raise ValidationError("fp", "missing [fp] section")
    kind = r.str("hamiltonian", required=True,
                 choices=("linear_drift", "power_norm", "scaled_quadratic"))
    epsilon = r.float("epsilon", default=0.0)
    if kind == "linear_drift":
        comps = [r.expression("bx", grid, required=True)]
        if grid.dim == 2:
            comps.append(r.expression("by", grid, default="0"))
        ham = LinearDrift(b=tuple(comps))
    elif kind == "power_norm":
        g = r.expression("g", grid)
        ham = PowerNorm(g=g, alpha=r.float("alpha", default=2.0))
    else:
        ham = ScaledQuadratic(c=r.expression("c", grid, required=True),
                              shift=r.float("shift", default=0.0))
    scheme = SchemeSpec(ham, discretization=discretization, epsilon=epsilon)
    u_freeze = r.expression("u_freeze", grid, default="0")
    rho0 = r.expression("rho0", grid, required=True)
    if np.any(rho0.values < 0):
        raise ValidationError("fp.rho0", "initial density must be nonnegative")
    return scheme, u_freeze, rho0


def _tagged_grid(sections, section: str, grid: Grid) -> Grid:
    r = _Reader(sections, section)
    edge = r.str("exit_edge", default="ymax", choices=("xmin", "xmax", "ymin", "ymax", "all"))
    span = r.pair("exit_span", default=None)
    tags = tag_exit_segment(grid.shape, grid, edge, span)
    return Grid(n=grid.n, lo=grid.lo, hi=grid.hi, topology="bounded", boundary_tags=tags)


def parse_config(text: str) -> RunConfig:
    sections = _split_sections(text)
    run = _Reader(sections, "run")
    if run.sec is None:
        raise ValidationError("run", "missing [run] section")
    command = run.str("command", required=True, choices=COMMANDS)
    scheme_name = run.str("scheme", default="upwind", choices=tuple(_SCHEMES))
    output_dir = run.str("out", default="out")
    discretization = _SCHEMES[scheme_name]
    grid = _build_grid(sections)

    if command == "fp":
        scheme, u_freeze, rho0 = _build_scheme(sections, grid, discretization)
        payload = FpPayload(scheme, u_freeze, rho0, _build_integrator(sections))
    elif command == "validate":
        scheme, u_freeze, rho0 = _build_scheme(sections, grid, discretization)
        if not isinstance(scheme.hamiltonian, LinearDrift):
            raise ValidationError("fp.hamiltonian", "validate requires linear_drift")
        fp = FpPayload(scheme, u_freeze, rho0, _build_integrator(sections))
        sde = _Reader(sections, "sde")
        if sde.sec is None:
            raise ValidationError("sde", "missing [sde] section")
        payload = ValidatePayload(
            fp=fp,
            particles=sde.int("particles", default=100000),
            dt=sde.float("dt", required=True),
            seed=sde.int("seed", default=0),
            boundary=sde.str("boundary", default="wrap", choices=("wrap", "absorb")),
        )
    elif command == "mfg":
        r = _Reader(sections, "mfg")
        if r.sec is None:
            raise ValidationError("mfg", "missing [mfg] section")
        coupling = r.str("coupling", required=True, choices=(LOG_DENSITY, CONGESTION))
        payload = FfmfgConfig(
            coupling=coupling,
            epsilon=r.float("epsilon", default=0.0),
            u0=r.expression("u0", grid, required=True),
            rho0=r.expression("rho0", grid, required=True),
            integrator=_build_integrator(sections),
            density_floor=r.float("density_floor", default=1e-8),
            alpha=r.float("alpha", default=1.0),
            p_bar=r.float("p_bar", default=0.0),
            discretization=discretization,
        )
    elif command == "hughes":
        if discretization != UPWIND:
            raise ValidationError("run.scheme", "the crowd model uses the upwind scheme")
        r = _Reader(sections, "hughes")
        if r.sec is None:
            raise ValidationError("hughes", "missing [hughes] section")
        tagged = _tagged_grid(sections, "hughes", grid)
        payload = HughesConfig(
            grid=tagged,
            rho0=r.expression("rho0", tagged, required=True),
            integrator=_build_integrator(sections),
            rho_cap=r.float("rho_cap", default=0.99),
            epsilon=r.float("epsilon", default=0.0),
            eikonal_tol=r.float("eikonal_tol", default=1e-8),
            eikonal_max_iter=r.int("eikonal_max_iter", default=None),
            eikonal_every_k=r.int("eikonal_every_k", default=1),
            wall_value=r.float("wall_value", default=1e6),
        )
    else:  # eikonal
        r = _Reader(sections, "eikonal")
        if r.sec is None:
            raise ValidationError("eikonal", "missing [eikonal] section")
        tagged = _tagged_grid(sections, "eikonal", grid)
        payload = EikonalPayload(
            c_field=r.expression("c_field", tagged, default="1"),
            wall_value=r.float("wall_value", default=1e6),
            tol=r.float("tol", default=1e-8),
            max_iter=r.int("max_iter", default=None),
        )

    canon = tuple(
        (sec.name, tuple((k, v) for k, (v, _) in sec.items()))
        for sec in sections.values()
    )
    return RunConfig(
        command=command,
        scheme=scheme_name,
        output_dir=output_dir,
        grid=grid,
        payload=payload,
        sections=canon,
    )


def format_config(cfg: RunConfig) -> str:
    """Canonical printer; parse_config(format_config(parse_config(t))) is stable."""
    blocks = []
    for name, items in cfg.sections:
        lines = [f"[{name}]"]
        lines += [f"{k} = {v}" for k, v in items]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
