"""Herglotz waves, the volume potential V[f](x) = int Phi(x, y) f(y) dy, and far fields.

Sign convention: plane waves are e^{-ik x.theta} both for incident Herglotz
fields and for the Herglotz operator used by the inverse solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .geometry import DirectionSet, DiskGrid
from .specfun import (
    WaveContext,
    ball_integral,
    farfield_constant,
    kernel,
    kernel_regular_part,
)

DENSE_NODE_LIMIT = 8000
_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples of a field, one per node of ``grid``."""

    grid: DiskGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.grid),):
            raise DomainError(f"field has {vals.shape} values for {len(self.grid)} nodes")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(len(grid), dtype=complex))

    def sup(self):
        return float(np.max(np.abs(self.values), initial=0.0))

    def norm(self):
        return self.grid.norm(self.values)


@dataclass(frozen=True, eq=False)
class HerglotzDensity:
    """Samples g(theta_j) of a Herglotz density on a direction set."""

    dirs: DirectionSet
    values: np.ndarray
    norm_sup: float = field(init=False)
    norm_l2: float = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.dirs),):
            raise DomainError(f"density has {vals.shape} values for {len(self.dirs)} directions")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "norm_sup", float(np.max(np.abs(vals), initial=0.0)))
        object.__setattr__(self, "norm_l2", float(np.sqrt(np.sum(np.abs(vals) ** 2 * self.dirs.weights))))

    def scaled(self, factor):
        return HerglotzDensity(self.dirs, factor * self.values)


@dataclass(frozen=True, eq=False)
class FarField:
    """Scattering amplitude samples u^inf(x_i) on observation directions."""

    obs: DirectionSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.obs),):
            raise DomainError(f"far field has {vals.shape} values for {len(self.obs)} directions")
        object.__setattr__(self, "values", vals)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * self.obs.weights)))


def herglotz_matrix(dirs: DirectionSet, ctx: WaveContext, targets):
    """Matrix mapping density samples to e^{-ik x.theta} quadrature at ``targets``."""
    phase = np.asarray(targets, dtype=float) @ dirs.dirs.T
    return np.exp(-1j * ctx.k * phase) * dirs.weights


def herglotz_wave(g: HerglotzDensity, ctx: WaveContext, targets):
    """u_in(x) = int e^{-ik x.theta} g(theta) ds(theta) by the direction-set quadrature."""
    return herglotz_matrix(g.dirs, ctx, targets) @ g.values


def far_field_matrix(grid: DiskGrid, ctx: WaveContext, obs: DirectionSet):
    """Matrix of e^{-ik xhat.y} w(y): grid samples to far-field samples."""
    return np.exp(-1j * ctx.k * (obs.dirs @ grid.nodes.T)) * grid.weights


def far_field_of_source(f: ComplexField, ctx: WaveContext, obs: DirectionSet) -> FarField:
    """u^inf(xhat) = int e^{-ik xhat.y} f(y) dy for the radiating potential of ``f``."""
    return FarField(obs, far_field_matrix(f.grid, ctx, obs) @ f.values)


def far_field_adjoint(values, obs: DirectionSet, ctx: WaveContext, grid: DiskGrid):
    """Adjoint of far_field_of_source between weighted L2 spaces: sum_i w_i e^{+ik xhat_i.y} g_i."""
    return np.exp(1j * ctx.k * (grid.nodes @ obs.dirs.T)) @ (obs.weights * np.asarray(values))


# --- exact cell integrals of the Laplace singularity --------------------------------

def _log_rect_antiderivative(u, v):
    # F with d2F/dudv = ln sqrt(u^2 + v^2)
    r2 = u * u + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(r2 > 0, u * v * (np.log(np.where(r2 > 0, r2, 1.0)) - 3), 0.0)
        b = np.where(u != 0, u * u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
        c = np.where(v != 0, v * v * np.arctan(u / np.where(v != 0, v, 1.0)), 0.0)
    return 0.5 * (a + b + c)


def _log_plus(a, r, rest2):
    # ln(a + r) with r = sqrt(a^2 + rest2), stable for a < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(np.where(a + r > 0, a + r, 1.0))
        neg = np.log(np.where(rest2 > 0, rest2, 1.0) / np.where(r - a > 0, r - a, 1.0))
    out = np.where(a >= 0, pos, neg)
    return np.where((a < 0) & (rest2 == 0), 0.0, out)


def _inv_r_box_antiderivative(x, y, z):
    # F with d3F/dxdydz = 1/sqrt(x^2 + y^2 + z^2)
    r = np.sqrt(x * x + y * y + z * z)
    out = (y * z * _log_plus(x, r, y * y + z * z)
           + x * z * _log_plus(y, r, x * x + z * z)
           + x * y * _log_plus(z, r, x * x + y * y))
    with np.errstate(divide="ignore", invalid="ignore"):
        for p, q, s in ((x, y, z), (y, x, z), (z, x, y)):
            den = p * r
            out = out - np.where(den != 0, 0.5 * p * p * np.arctan(q * s / np.where(den != 0, den, 1.0)), 0.0)
    return out


def laplace_cell_integral(lo, hi, d):
    """Integral of the Laplace fundamental solution over boxes [lo, hi] (target at origin).

    d = 2: int -ln|y|/(2 pi) dy;  d = 3: int 1/(4 pi |y|) dy.  ``lo``/``hi`` have shape (..., d).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    total = np.zeros(lo.shape[:-1])
    for corner in itertools.product((0, 1), repeat=d):
        sign = (-1) ** (d - sum(corner))
        pts = [hi[..., a] if c else lo[..., a] for a, c in enumerate(corner)]
        if d == 2:
            total = total + sign * _log_rect_antiderivative(*pts)
        else:
            total = total + sign * _inv_r_box_antiderivative(*pts)
    if d == 2:
        return -total / (2 * np.pi)
    return total / (4 * np.pi)


# --- volume potential operator --------------------------------------------------------

def _kernel_or_zero(r, ctx):
    out = np.zeros(r.shape, dtype=complex)
    pos = r > 0
    out[pos] = kernel(r[pos], ctx)
    return out


class VolumeOperator:
    """Discrete volume potential on a DiskGrid.

    ``quadrature="cell"`` treats f as piecewise constant on the grid cells and
    integrates the Laplace part of the kernel exactly over the ``near`` ring of
    cells around the target's cell; the smooth remainder and all farther cells
    use the midpoint rule.  ``quadrature="ball"`` keeps plain midpoint sums and
    replaces only the self-cell term by the integral over the equal-volume ball.
    """

    def __init__(self, grid: DiskGrid, ctx: WaveContext, quadrature="cell", near=2,
                 dense_limit=DENSE_NODE_LIMIT):
        if grid.d != ctx.d:
            raise DomainError("grid and wave context disagree on dimension")
        if quadrature not in ("cell", "ball"):
            raise DomainError(f"unknown quadrature {quadrature!r}")
        self.grid = grid
        self.ctx = ctx
        self.quadrature = quadrature
        self.near = near if quadrature == "cell" else 0
        self.dense = len(grid) <= dense_limit
        self._matrix = None
        self._offsets, self._corr = self._correction_table()

    @property
    def ball_radius(self):
        w = self.grid.h ** self.grid.d
        if self.grid.d == 2:
            return np.sqrt(w / np.pi)
        return (3 * w / (4 * np.pi)) ** (1 / 3)

    def _correction_table(self):
        """Additive corrections, by integer offset target - source, to the plain midpoint matrix."""
        grid, ctx = self.grid, self.ctx
        h, d = grid.h, grid.d
        w = h ** d
        if self.quadrature == "ball":
            return np.zeros((1, d), dtype=np.int64), np.array([ball_integral(self.ball_radius, ctx)])
        M = self.near
        offs = np.array(list(itertools.product(range(-M, M + 1), repeat=d)), dtype=np.int64)
        # source cell centre relative to target is -offset * h
        centre = -offs * h
        exact = laplace_cell_integral(centre - h / 2, centre + h / 2, d)
        r = np.linalg.norm(centre, axis=1)
        corr = exact + kernel_regular_part(r, ctx) * w - _kernel_or_zero(r, ctx) * w
        return offs, corr

    def _plain_block(self, rows):
        grid = self.grid
        diff = grid.index[rows, None, :] - grid.index[None, :, :]
        s = np.einsum("ijk,ijk->ij", diff, diff)
        uniq, inv = np.unique(s, return_inverse=True)
        vals = _kernel_or_zero(grid.h * np.sqrt(uniq.astype(float)), self.ctx)
        return vals[inv].reshape(s.shape) * grid.weights[None, :]

    def _add_corrections(self, block, rows):
        grid = self.grid
        for off, c in zip(self._offsets, self._corr):
            src = grid.lookup(grid.index[rows] - off)
            ok = src >= 0
            block[np.nonzero(ok)[0], src[ok]] += c
        return block

    @property
    def matrix(self):
        """Dense grid-to-grid matrix (assembled once, then cached)."""
        if self._matrix is None:
            if not self.dense:
                raise MemoryError(f"{len(self.grid)} nodes exceed the dense-assembly limit")
            n = len(self.grid)
            mat = np.empty((n, n), dtype=complex)
            for start in range(0, n, _CHUNK):
                rows = np.arange(start, min(n, start + _CHUNK))
                mat[rows] = self._add_corrections(self._plain_block(rows), rows)
            mat.setflags(write=False)
            self._matrix = mat
        return self._matrix

    def apply(self, values):
        """V applied to node values (a vector or a matrix of columns)."""
        values = np.asarray(values, dtype=complex)
        if self.dense:
            return self.matrix @ values
        n = len(self.grid)
        out = np.empty((n,) + values.shape[1:], dtype=complex)
        for start in range(0, n, _CHUNK):
            rows = np.arange(start, min(n, start + _CHUNK))
            out[rows] = self._add_corrections(self._plain_block(rows), rows) @ values
        return out

    def evaluate(self, values, targets):
        """V[f] at arbitrary points (on or off the grid)."""
        grid, ctx = self.grid, self.ctx
        values = np.asarray(values, dtype=complex)
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        out = np.empty(len(targets), dtype=complex)
        step = max(1, 4_000_000 // max(len(grid), 1))
        for start in range(0, len(targets), step):
            t = targets[start:start + step]
            r = np.linalg.norm(t[:, None, :] - grid.nodes[None, :, :], axis=2)
            out[start:start + step] = (_kernel_or_zero(r.ravel(), ctx).reshape(r.shape) * grid.weights) @ values
        return out + self._near_evaluate(values, targets)

    def _near_evaluate(self, values, targets):
        grid, ctx = self.grid, self.ctx
        h, d = grid.h, grid.d
        w = h ** d
        corr = np.zeros(len(targets), dtype=complex)
        if self.quadrature == "ball":
            cells = grid.cell_of(targets)
            src = grid.lookup(cells)
            ok = src >= 0
            hit = np.zeros(len(targets), dtype=bool)
            hit[ok] = np.linalg.norm(targets[ok] - grid.nodes[src[ok]], axis=1) < 1e-12 * h
            corr[hit] = self._corr[0] * values[src[hit]]
            return corr
        cells = grid.cell_of(targets)
        M = self.near
        for off in itertools.product(range(-M, M + 1), repeat=d):
            src = grid.lookup(cells + np.array(off))
            ok = np.nonzero(src >= 0)[0]
            if ok.size == 0:
                continue
            j = src[ok]
            rel = grid.nodes[j] - targets[ok]
            exact = laplace_cell_integral(rel - h / 2, rel + h / 2, d)
            r = np.linalg.norm(rel, axis=1)
            kern = exact + kernel_regular_part(r, ctx) * w - _kernel_or_zero(r, ctx) * w
            corr[ok] += kern * values[j]
        return corr


@lru_cache(maxsize=8)
def volume_operator(grid: DiskGrid, ctx: WaveContext, quadrature="cell") -> VolumeOperator:
    """Shared (cached) operator for a grid/context pair."""
    return VolumeOperator(grid, ctx, quadrature=quadrature)


def volume_potential(f: ComplexField, ctx: WaveContext, targets, quadrature="cell"):
    """V[f](x) = int Phi(x, y) f(y) dy at ``targets``."""
    return volume_operator(f.grid, ctx, quadrature).evaluate(f.values, targets)


@dataclass
class RadiationReport:
    radii: np.ndarray
    residuals: np.ndarray
    slope: float | None
    direction: np.ndarray


def verify_radiation(f: ComplexField, ctx: WaveContext, radii, direction=None) -> RadiationReport:
    """Fit the decay of |V[f](r xhat) - C_d e^{ikr} r^{-(d-1)/2} u^inf(xhat)| over ``radii``.

    The log-log slope is ``None`` when every residual vanishes.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise DomainError("need at least 3 radii")
    if np.any(np.diff(radii) <= 0):
        raise DomainError("radii must be increasing")
    if np.any(radii <= 2 * f.grid.R):
        raise DomainError("radii must exceed 2R")
    d = ctx.d
    xhat = np.zeros(d)
    xhat[0] = 1.0
    if direction is not None:
        xhat = np.asarray(direction, dtype=float)
        xhat = xhat / np.linalg.norm(xhat)
    obs = DirectionSet(xhat[None, :], np.ones(1))
    uinf = far_field_of_source(f, ctx, obs).values[0]
    near = volume_potential(f, ctx, radii[:, None] * xhat[None, :])
    lead = farfield_constant(ctx) * np.exp(1j * ctx.k * radii) / radii ** ((d - 1) / 2) * uinf
    res = np.abs(near - lead)
    scale = max(np.max(np.abs(near), initial=0.0), np.abs(uinf))
    if np.all(res <= 1e-300) or scale == 0:
        return RadiationReport(radii, res, None, xhat)
    slope = float(np.polyfit(np.log(radii), np.log(res), 1)[0])
    return RadiationReport(radii, res, slope, xhat)
