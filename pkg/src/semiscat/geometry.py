"""Quadrature grids on the ball B_R and direction sets on the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma

import numpy as np

from .errors import GridError


def ball_volume(R: float, d: int) -> float:
    return np.pi ** (d / 2) / gamma(d / 2 + 1) * R ** d


def sphere_area(d: int) -> float:
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


@dataclass(frozen=True, eq=False)
class DiskGrid:
    """Cell-centred tensor grid on [-R, R]^d keeping cells whose centre lies in B_R.

    ``index`` holds the integer cell index of each node along every axis, so
    node ``i`` sits at ``-R + (index[i] + 1/2) h``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    R: float
    h: float
    d: int
    n: int
    index: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.weights)

    @property
    def radii(self):
        return np.linalg.norm(self.nodes, axis=1)

    def lookup(self, idx):
        """Node numbers for integer cell indices (shape (..., d)); -1 where absent."""
        idx = np.asarray(idx)
        inside = np.all((idx >= 0) & (idx < self.n), axis=-1)
        flat = np.ravel_multi_index(tuple(np.clip(idx, 0, self.n - 1)[..., a] for a in range(self.d)),
                                    (self.n,) * self.d)
        out = self._table()[flat]
        return np.where(inside, out, -1)

    def _table(self):
        table = self.__dict__.get("_lookup_table")
        if table is None:
            table = np.full(self.n ** self.d, -1, dtype=np.int64)
            flat = np.ravel_multi_index(tuple(self.index.T), (self.n,) * self.d)
            table[flat] = np.arange(len(self))
            object.__setattr__(self, "_lookup_table", table)
        return table

    def cell_of(self, points):
        """Integer cell index containing each point (may fall outside the grid)."""
        return np.floor((np.asarray(points, dtype=float) + self.R) / self.h).astype(np.int64)

    def integrate(self, values):
        return np.sum(np.asarray(values) * self.weights)

    def inner(self, a, b):
        """Weighted L2(B_R) inner product <a, b> = sum a conj(b) w."""
        return np.sum(np.asarray(a) * np.conj(b) * self.weights)

    def norm(self, values):
        return float(np.sqrt(np.real(self.inner(values, values))))


def build_disk_grid(R: float, n: int, d: int) -> DiskGrid:
    """Tensor grid with ``n`` cells per axis on the bounding cube of B_R.

    Cells are kept when their centre satisfies |x| < R and carry the full cell
    volume h^d as weight.  Nodes are ordered lexicographically by cell index.
    """
    if not R > 0:
        raise GridError(f"R must be positive, got {R}")
    if d not in (2, 3):
        raise GridError(f"d must be 2 or 3, got {d}")
    if n < 8:
        raise GridError(f"need at least 8 cells per axis, got {n}")
    h = 2.0 * R / n
    axis = -R + (np.arange(n) + 0.5) * h
    index = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    nodes = axis[index]
    keep = np.sum(nodes * nodes, axis=1) < R * R
    if not keep.any():
        raise GridError("grid contains no node inside the ball")
    nodes = np.ascontiguousarray(nodes[keep])
    weights = np.full(len(nodes), h ** d)
    return DiskGrid(nodes=nodes, weights=weights, R=float(R), h=h, d=d, n=n, index=index[keep])


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Unit vectors on S^{d-1} with surface quadrature weights."""

    dirs: np.ndarray
    weights: np.ndarray

    @property
    def d(self):
        return self.dirs.shape[1]

    def __len__(self):
        return len(self.weights)

    @property
    def angles(self):
        """Polar angle in the (x1, x2) plane, in [0, 2 pi)."""
        return np.mod(np.arctan2(self.dirs[:, 1], self.dirs[:, 0]), 2 * np.pi)


def build_directions(m: int, d: int) -> DirectionSet:
    """Equispaced circle (d = 2) or Fibonacci lattice (d = 3) with equal weights."""
    if m < 4:
        raise GridError(f"need at least 4 directions, got {m}")
    if d == 2:
        theta = 2 * np.pi * np.arange(m) / m
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    elif d == 3:
        i = np.arange(m) + 0.5
        z = 1 - 2 * i / m
        phi = np.pi * (1 + np.sqrt(5.0)) * i
        s = np.sqrt(1 - z * z)
        dirs = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        raise GridError(f"d must be 2 or 3, got {d}")
    return DirectionSet(dirs=dirs, weights=np.full(m, sphere_area(d) / m))
