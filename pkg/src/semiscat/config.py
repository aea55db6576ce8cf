"""Run configuration: validated with pydantic, turned into grids, models and plans."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .fields import HerglotzDensity
from .geometry import DiskGrid, build_directions, build_disk_grid
from .linearize import ExperimentPlan
from .nonlinearity import NonlinearityModel
from .specfun import WaveContext


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WaveConfig(_Strict):
    k: float = Field(gt=0, description="wavenumber, 1/length")
    d: Literal[2, 3] = 2


class GridConfig(_Strict):
    R: float = Field(1.0, gt=0, description="support radius, length")
    n: int = Field(32, ge=8, description="cells per axis of the bounding cube")


class TermConfig(_Strict):
    """One profile contributing to d^l a(x, 0); profiles of equal order add up.

    gaussian: A exp(-|x - c|^2 / width^2); disk: A on |x - c| < radius;
    polynomial: A (1 - |x - c|^2 / radius^2)^power on |x - c| < radius;
    array: explicit node values (re, im).
    """

    order: int = Field(ge=1)
    kind: Literal["gaussian", "disk", "polynomial", "array"] = "gaussian"
    amplitude: float = 1.0
    amplitude_im: float = 0.0
    center: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    width: float = Field(0.4, gt=0)
    radius: float = Field(0.5, gt=0)
    power: int = Field(2, ge=0)
    re: list[float] | None = None
    im: list[float] | None = None

    @model_validator(mode="after")
    def _array_values(self):
        if self.kind == "array" and self.re is None:
            raise ValueError("array terms need 're' values")
        return self


class ModelConfig(_Strict):
    terms: list[TermConfig] = Field(default_factory=list)
    L: int | None = Field(None, ge=1, description="truncation order; default: highest term order (at least 1)")
    c0: float | None = Field(None, gt=0, description="default: max_l sup|d^l a|^(1/l), at least 1")
    eta: float | None = Field(None, gt=0, description="default: 1/(2 c0)")


class DensityConfig(_Strict):
    """random: seeded complex Gaussian samples; plane: one direction each; fourier: e^{i j theta}."""

    kind: Literal["random", "plane", "fourier"] = "random"
    count: int = Field(2, ge=1)
    directions: int = Field(32, ge=4)
    scale: float = Field(1.0, gt=0, description="sup-norm of each density before the delta^2 eps scaling")


class PlanConfig(_Strict):
    N: int = Field(1, ge=0, description="highest recovery order minus one")
    delta: float = Field(0.08, gt=0)
    delta0: float = Field(0.1, gt=0)
    densities: DensityConfig = Field(default_factory=DensityConfig)
    eps_ladder: list[float] | None = Field(None, description="default: delta/4, delta/8, delta/16")
    obs: int = Field(64, ge=4, description="number of observation directions")
    fd_scheme: Literal[1, 2] = 1
    rtol: float = Field(1e-13, ge=0)

    @model_validator(mode="after")
    def _enough_densities(self):
        if self.densities.count < self.N + 1:
            raise ValueError(f"densities.count must be at least N + 1 = {self.N + 1}")
        return self


class ForwardConfig(_Strict):
    delta: float | None = Field(None, gt=0, description="default: plan.delta")
    density: int = Field(0, ge=0, description="index of the plan density used as incident density")
    amplitude: float | None = Field(None, gt=0, description="sup-norm of g; default 0.5 delta^2")
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(200, ge=1)


class InverseConfig(_Strict):
    L: int | None = Field(None, ge=1, description="default: N + 1")
    lambda_schedule: list[float] = Field(default_factory=lambda: [1e-10], description="relative to sigma_max^2")
    max_outer: int = Field(30, ge=1)
    grid_mode: Literal["inverse_crime", "coarse"] = "inverse_crime"
    coarse_n: int | None = Field(None, ge=8, description="default: 3/4 of grid.n")
    discrepancy: bool = False


class IOConfig(_Strict):
    output: str = "out"
    seed: int = 0


class RunConfig(_Strict):
    wave: WaveConfig
    grid: GridConfig = Field(default_factory=GridConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    plan: PlanConfig = Field(default_factory=PlanConfig)
    forward: ForwardConfig = Field(default_factory=ForwardConfig)
    inverse: InverseConfig = Field(default_factory=InverseConfig)
    io: IOConfig = Field(default_factory=IOConfig)

    def effective(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_errors(exc)}") from None


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return parse_config(data)


def build_context(cfg: RunConfig) -> WaveContext:
    return WaveContext(cfg.wave.k, cfg.wave.d)


def build_grid(cfg: RunConfig) -> DiskGrid:
    return build_disk_grid(cfg.grid.R, cfg.grid.n, cfg.wave.d)


def reconstruction_grid(cfg: RunConfig) -> DiskGrid:
    if cfg.inverse.grid_mode == "inverse_crime":
        return build_grid(cfg)
    n = cfg.inverse.coarse_n or max(8, (3 * cfg.grid.n) // 4)
    return build_disk_grid(cfg.grid.R, n, cfg.wave.d)


def profile_values(term: TermConfig, grid: DiskGrid) -> np.ndarray:
    amp = complex(term.amplitude, term.amplitude_im)
    if term.kind == "array":
        re = np.asarray(term.re, dtype=float)
        im = np.zeros_like(re) if term.im is None else np.asarray(term.im, dtype=float)
        if re.shape != (len(grid),) or im.shape != re.shape:
            raise ConfigError(f"model.terms: array term needs {len(grid)} values per part")
        return amp * (re + 1j * im)
    c = np.zeros(grid.d)
    c[: min(len(term.center), grid.d)] = term.center[: grid.d]
    r2 = np.sum((grid.nodes - c) ** 2, axis=1)
    if term.kind == "gaussian":
        return amp * np.exp(-r2 / term.width ** 2)
    inside = r2 < term.radius ** 2
    if term.kind == "disk":
        return amp * inside.astype(float)
    return amp * np.where(inside, (1 - r2 / term.radius ** 2) ** term.power, 0.0)


def build_model(cfg: RunConfig, grid: DiskGrid) -> NonlinearityModel:
    top = max([t.order for t in cfg.model.terms], default=1)
    L = cfg.model.L or top
    if top > L:
        raise ConfigError(f"model.L = {L} is below the highest term order {top}")
    derivs = [np.zeros(len(grid), dtype=complex) for _ in range(L)]
    for t in cfg.model.terms:
        derivs[t.order - 1] = derivs[t.order - 1] + profile_values(t, grid)
    for dl in derivs:
        dl[grid.radii >= cfg.grid.R] = 0
    c0 = cfg.model.c0
    if c0 is None:
        roots = [np.max(np.abs(dl), initial=0.0) ** (1.0 / l) for l, dl in enumerate(derivs, start=1)]
        c0 = max(max(roots), 1.0)
    return NonlinearityModel.from_derivatives(grid, derivs, c0=c0, R=cfg.grid.R, eta=cfg.model.eta)


def build_densities(cfg: RunConfig) -> list:
    dc = cfg.plan.densities
    dirs = build_directions(dc.directions, cfg.wave.d)
    out = []
    if dc.kind == "random":
        rng = np.random.default_rng(cfg.io.seed)
        for _ in range(dc.count):
            v = rng.standard_normal(dc.directions) + 1j * rng.standard_normal(dc.directions)
            out.append(v / np.max(np.abs(v)))
    elif dc.kind == "plane":
        for j in range(dc.count):
            v = np.zeros(dc.directions, dtype=complex)
            v[(j * dc.directions) // dc.count] = 1.0
            out.append(v)
    else:
        theta = dirs.angles
        for j in range(dc.count):
            out.append(np.exp(1j * j * theta))
    return [HerglotzDensity(dirs, dc.scale * v) for v in out]


def build_plan(cfg: RunConfig) -> ExperimentPlan:
    pc = cfg.plan
    return ExperimentPlan(
        densities=build_densities(cfg),
        delta=pc.delta,
        max_order=pc.N + 1,
        obs=build_directions(pc.obs, cfg.wave.d),
        eps_ladder=None if pc.eps_ladder is None else tuple(pc.eps_ladder),
        fd_scheme=pc.fd_scheme,
        delta0=pc.delta0,
        rtol=pc.rtol,
    )


def forward_density(cfg: RunConfig) -> tuple:
    """Incident density and gate delta for the forward command."""
    dens = build_densities(cfg)
    if cfg.forward.density >= len(dens):
        raise ConfigError(f"forward.density: index {cfg.forward.density} but only {len(dens)} densities")
    delta = cfg.forward.delta or cfg.plan.delta
    amp = cfg.forward.amplitude if cfg.forward.amplitude is not None else 0.5 * delta ** 2
    g = dens[cfg.forward.density]
    return g.scaled(amp / g.norm_sup), delta
