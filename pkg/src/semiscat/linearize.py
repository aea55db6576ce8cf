"""Multi-parameter incident fields, epsilon-grid synthesis and finite-difference linearization.

The incident density at the parameter point eps is sum_j eps_j delta^2 g_j.  Records
are keyed by ordinal tuples: entry 0 means eps_j = 0 and entry s >= 1 means
eps_j = plan.levels[s - 1].
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DomainError, GateError, MissingRecordsError, SemiscatError
from .fields import (
    ComplexField,
    FarField,
    HerglotzDensity,
    far_field_of_source,
    herglotz_wave,
    volume_operator,
)
from .forward import DELTA0, LinearScatterer, solve_nonlinear
from .geometry import DirectionSet
from .nonlinearity import NonlinearityModel
from .specfun import WaveContext

log = logging.getLogger(__name__)

# per-coordinate forward-difference stencils as (multiple of h, weight * h)
_STENCILS = {
    1: ((0, -1.0), (1, 1.0)),
    2: ((0, -1.5), (1, 2.0), (2, -0.5)),
}


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """Densities g_1..g_M, scale delta, highest derivative order and the FD ladder.

    ``max_order`` is N + 1.  ``eps_ladder`` defaults to (delta/4, delta/8, delta/16).
    Synthesis solves stop on a relative update below ``rtol`` (or ``tol`` absolute).
    """

    densities: tuple
    delta: float
    max_order: int
    obs: DirectionSet
    eps_ladder: tuple | None = None
    fd_scheme: int = 1
    delta0: float = DELTA0
    tol: float = 0.0
    rtol: float = 1e-13
    max_iter: int = 200

    def __post_init__(self):
        object.__setattr__(self, "densities", tuple(self.densities))
        if not self.densities:
            raise DomainError("plan needs at least one density")
        dirs = self.densities[0].dirs
        if any(g.dirs is not dirs and not np.array_equal(g.dirs.dirs, dirs.dirs) for g in self.densities):
            raise DomainError("all densities must share one direction set")
        if not 1 <= self.max_order <= len(self.densities):
            raise DomainError(f"max_order must lie in 1..{len(self.densities)} (one density per parameter)")
        if self.fd_scheme not in _STENCILS:
            raise DomainError("fd_scheme must be 1 or 2")
        if not 0 < self.delta < self.delta0:
            raise GateError(f"delta = {self.delta} must lie in (0, delta0 = {self.delta0})")
        ladder = self.eps_ladder
        if ladder is None:
            ladder = (self.delta / 4, self.delta / 8, self.delta / 16)
        ladder = tuple(float(h) for h in ladder)
        if not ladder or any(b >= a for a, b in zip(ladder[:-1], ladder[1:])):
            raise DomainError("eps_ladder must be non-empty and strictly decreasing")
        if ladder[-1] <= 0 or max(self.levels_for(ladder)) >= self.delta:
            raise DomainError("all stencil points must lie in (0, delta)")
        object.__setattr__(self, "eps_ladder", ladder)
        self._check_gates()

    def levels_for(self, ladder):
        mult = max(m for m, _ in _STENCILS[self.fd_scheme])
        return sorted({h * m for h in ladder for m in range(1, mult + 1)}, reverse=True)

    @property
    def levels(self):
        """Distinct nonzero epsilon values, descending; ordinal s maps to levels[s - 1]."""
        return self.levels_for(self.eps_ladder)

    @property
    def M(self):
        return len(self.densities)

    def ordinal(self, value):
        return self.levels.index(value) + 1

    def epsilon(self, index):
        lv = self.levels
        return np.array([0.0 if s == 0 else lv[s - 1] for s in index])

    def density(self, index) -> HerglotzDensity:
        """sum_j eps_j delta^2 g_j for the ordinal tuple ``index``."""
        eps = self.epsilon(index)
        vals = np.zeros(len(self.densities[0].values), dtype=complex)
        for e, g in zip(eps, self.densities):
            if e:
                vals = vals + e * self.delta ** 2 * g.values
        return HerglotzDensity(self.densities[0].dirs, vals)

    def _check_gates(self):
        # worst case: the largest level on the max_order coordinates with the biggest densities
        sups = sorted((g.norm_sup for g in self.densities), reverse=True)
        worst = self.levels[0] * self.delta ** 2 * sum(sups[: self.max_order])
        if not worst < self.delta ** 2:
            raise GateError(f"plan densities violate the gate at the largest stencil point "
                            f"(bound {worst:.3g} >= delta^2 = {self.delta ** 2:.3g}); shrink g or the ladder")


def stencil_points(plan: ExperimentPlan, subset, step):
    """Ordinal tuples and weights of the tensor forward difference on ``subset`` at step h."""
    h = plan.eps_ladder[step]
    st = _STENCILS[plan.fd_scheme]
    pts = []
    for combo in itertools.product(st, repeat=len(subset)):
        index = [0] * plan.M
        weight = 1.0
        for j, (mult, w) in zip(subset, combo):
            if mult:
                index[j] = plan.ordinal(h * mult)
            weight *= w / h
        pts.append((tuple(index), weight))
    return pts


def subset_family(plan: ExperimentPlan, subset):
    """Full tensor family: every level (or 0) on the coordinates of ``subset``, 0 elsewhere."""
    out = []
    for combo in itertools.product(range(len(plan.levels) + 1), repeat=len(subset)):
        index = [0] * plan.M
        for j, s in zip(subset, combo):
            index[j] = s
        out.append(tuple(index))
    return out


def required_indices(plan: ExperimentPlan, orders=None):
    """Sorted ordinal tuples of the tensor families of all subsets of the requested orders.

    The family of a subset contains every stencil point of its mixed derivative
    at every ladder step.
    """
    orders = range(1, plan.max_order + 1) if orders is None else orders
    need = set()
    for l in orders:
        for subset in itertools.combinations(range(plan.M), l):
            need.update(subset_family(plan, subset))
    return sorted(need)


def stencil_count(plan: ExperimentPlan):
    return len(required_indices(plan))


@dataclass
class ScatteringDataset:
    plan: ExperimentPlan
    records: dict
    provenance: str
    failures: dict = field(default_factory=dict)

    @property
    def missing(self):
        return [idx for idx in required_indices(self.plan) if idx not in self.records]

    @property
    def complete(self):
        return not self.missing

    def record(self, index) -> FarField:
        return self.records[tuple(index)]


def synthesize_dataset(model: NonlinearityModel, plan: ExperimentPlan, ctx: WaveContext, orders=None,
                       op=None, indices=None) -> ScatteringDataset:
    """Forward-solve at every required epsilon point and store the far fields.

    Failing solves are recorded in ``failures`` and leave the dataset incomplete.
    """
    op = op or volume_operator(model.grid, ctx)
    records, failures = {}, {}
    indices = required_indices(plan, orders) if indices is None else indices
    zero = np.zeros(len(plan.obs), dtype=complex)
    for idx in indices:
        if not any(idx):
            records[idx] = FarField(plan.obs, zero.copy())
            continue
        g = plan.density(idx)
        try:
            u_sc, _ = solve_nonlinear(model, g, ctx, plan.delta, tol=plan.tol, max_iter=plan.max_iter,
                                      delta0=plan.delta0, rtol=plan.rtol, op=op)
        except SemiscatError as exc:
            failures[idx] = f"{type(exc).__name__}: {exc}"
            log.warning("forward solve failed at %s: %s", idx, exc)
            continue
        u_in = herglotz_wave(g, ctx, model.grid.nodes)
        source = ComplexField(model.grid, model.evaluate_values(u_sc.values + u_in))
        records[idx] = far_field_of_source(source, ctx, plan.obs)
    return ScatteringDataset(plan, records, provenance="model", failures=failures)


def richardson_weights(steps, order):
    """Weights c with sum c = 1 cancelling h^order, h^(order+1), ... across ``steps``."""
    steps = np.asarray(steps, dtype=float)
    n = len(steps)
    scale = steps.max()
    a = np.ones((n, n))
    for m in range(1, n):
        a[m] = (steps / scale) ** (order + m - 1)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return np.linalg.solve(a, rhs)


@dataclass
class DerivativeEstimate:
    """FD estimates per ladder step plus the extrapolated value and a noise proxy."""

    per_step: np.ndarray
    extrapolated: np.ndarray
    noise: float


def _subset_of(alpha, M):
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != M:
        raise DomainError(f"alpha must have {M} entries")
    if any(a not in (0, 1) for a in alpha):
        raise DomainError("each alpha component must be 0 or 1")
    return tuple(j for j, a in enumerate(alpha) if a)


def derivative_estimate(dataset: ScatteringDataset, alpha) -> DerivativeEstimate:
    plan = dataset.plan
    subset = _subset_of(alpha, plan.M)
    if not 1 <= len(subset) <= plan.max_order:
        raise DomainError(f"|alpha| must lie in 1..{plan.max_order}")
    per_step, missing = [], []
    for step in range(len(plan.eps_ladder)):
        acc = np.zeros(len(plan.obs), dtype=complex)
        for idx, w in stencil_points(plan, subset, step):
            rec = dataset.records.get(idx)
            if rec is None:
                missing.append(idx)
            else:
                acc = acc + w * rec.values
        per_step.append(acc)
    if missing:
        raise MissingRecordsError(sorted(set(missing)))
    per_step = np.array(per_step)
    if len(per_step) == 1:
        return DerivativeEstimate(per_step, per_step[0], float("nan"))
    c = richardson_weights(plan.eps_ladder, plan.fd_scheme)
    best = c @ per_step
    # one level less of extrapolation, as a proxy for the remaining error
    c_prev = richardson_weights(plan.eps_ladder[:-1], plan.fd_scheme)
    noise = float(np.linalg.norm(c_prev @ per_step[:-1] - best))
    return DerivativeEstimate(per_step, best, noise)


def mixed_derivative(dataset: ScatteringDataset, alpha, extrapolate=True) -> FarField:
    """d^alpha u_inf at eps = 0 by tensor forward differences and Richardson extrapolation.

    With ``extrapolate=False`` the estimate at the finest ladder step is returned.
    """
    est = derivative_estimate(dataset, alpha)
    values = est.extrapolated if extrapolate else est.per_step[-1]
    return FarField(dataset.plan.obs, values)


def unit_alpha(M, subset):
    alpha = [0] * M
    for j in subset:
        alpha[j] = 1
    return tuple(alpha)


def first_order_field(q: ComplexField, g_l: HerglotzDensity, delta, ctx: WaveContext, op=None,
                      scatterer=None) -> ComplexField:
    """w solving w = V[q (w + delta^2 v_g)] by dense factorisation."""
    sc = scatterer or LinearScatterer(q, ctx, op)
    v = delta ** 2 * herglotz_wave(g_l, ctx, q.grid.nodes)
    return ComplexField(q.grid, sc.scattered(v))


def first_order_farfield(q: ComplexField, g_l: HerglotzDensity, delta, ctx: WaveContext,
                         obs: DirectionSet, op=None, scatterer=None) -> FarField:
    """Far field of the source q (w + delta^2 v_g)."""
    w = first_order_field(q, g_l, delta, ctx, op, scatterer)
    v = delta ** 2 * herglotz_wave(g_l, ctx, q.grid.nodes)
    return far_field_of_source(ComplexField(q.grid, q.values * (w.values + v)), ctx, obs)


def subset_count(M, l):
    return comb(M, l)
