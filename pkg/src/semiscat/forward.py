"""Direct scattering: Picard iteration for u_sc = V[a(., u_sc + u_in)] and dense linear solves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DivergenceError, GateError, ResonanceError
from .fields import (
    ComplexField,
    HerglotzDensity,
    far_field_of_source,
    herglotz_wave,
    volume_operator,
)
from .nonlinearity import NonlinearityModel
from .specfun import WaveContext

log = logging.getLogger(__name__)

DELTA0 = 0.1
TOL = 1e-10
MAX_ITER = 200
RCOND_MIN = 1e-13


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    contraction_estimate: float | None
    delta_used: float
    gate_margin: float
    converged: bool = True
    sup_norm: float = 0.0
    within_ball: bool = True
    ratios: list = field(default_factory=list)

    def lines(self):
        gamma = "n/a" if self.contraction_estimate is None else f"{self.contraction_estimate:.6g}"
        return [
            f"iterations: {self.iterations}",
            f"converged: {self.converged}",
            f"contraction_estimate: {gamma}",
            f"delta_used: {self.delta_used:.6g}",
            f"gate_margin: {self.gate_margin:.6g}",
            f"sup_norm_u_sc: {self.sup_norm:.6g}",
            f"within_ball: {self.within_ball}",
            "residual_history: " + " ".join(f"{r:.3e}" for r in self.residual_history),
        ]


def check_gate(g: HerglotzDensity, delta, delta0=DELTA0):
    """Reject densities outside ||g||_sup < delta^2 or gates with delta >= delta0."""
    if not 0 < delta < delta0:
        raise GateError(f"delta = {delta} must lie in (0, delta0 = {delta0})")
    if not g.norm_sup < delta ** 2:
        raise GateError(f"||g||_sup = {g.norm_sup:.6g} violates the gate delta^2 = {delta ** 2:.6g}")
    return g.norm_sup / delta ** 2


def _median_ratio(history):
    if len(history) < 3:
        return None
    h = np.asarray(history)
    prev = h[:-1]
    ok = prev > 0
    if not ok.any():
        return None
    return float(np.median(h[1:][ok] / prev[ok]))


def solve_nonlinear(model: NonlinearityModel, g: HerglotzDensity, ctx: WaveContext, delta,
                    tol=TOL, max_iter=MAX_ITER, delta0=DELTA0, rtol=0.0, w0=None, op=None):
    """Fixed point of w -> V[a(., w + u_in)] on the grid nodes, started from ``w0`` (default 0).

    Stops once the sup-norm update drops below max(tol, rtol * ||w||_sup).
    Returns the scattered field and a SolveReport.
    """
    margin = check_gate(g, delta, delta0)
    grid = model.grid
    op = op or volume_operator(grid, ctx)
    u_in = herglotz_wave(g, ctx, grid.nodes)
    w = np.zeros(len(grid), dtype=complex) if w0 is None else np.array(w0, dtype=complex)
    history = []
    for it in range(1, max_iter + 1):
        w_new = op.apply(model.evaluate_values(w + u_in))
        res = float(np.max(np.abs(w_new - w), initial=0.0))
        history.append(res)
        w = w_new
        if res <= max(tol, rtol * float(np.max(np.abs(w), initial=0.0))):
            break
        gamma = _median_ratio(history)
        if it >= 5 and gamma is not None and gamma >= 1:
            raise DivergenceError(f"Picard iteration is not contracting (gamma = {gamma:.3g}); "
                                  "delta is too large for this model")
    else:
        raise DivergenceError(f"no convergence in {max_iter} iterations (last update {history[-1]:.3e})")
    gamma = _median_ratio(history)
    if gamma is not None and gamma >= 1:
        raise DivergenceError(f"contraction estimate {gamma:.3g} >= 1")
    sup = float(np.max(np.abs(w), initial=0.0))
    ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > 0]
    report = SolveReport(iterations=len(history), residual_history=history, contraction_estimate=gamma,
                         delta_used=delta, gate_margin=margin, sup_norm=sup, within_ball=sup <= delta,
                         ratios=ratios)
    log.debug("picard converged in %d iterations, gamma=%s", len(history), gamma)
    return ComplexField(grid, w), report


class LinearScatterer:
    """LU factorisation of I - V M_q for repeated linear Lippmann-Schwinger solves."""

    def __init__(self, q: ComplexField, ctx: WaveContext, op=None):
        self.q = q
        self.grid = q.grid
        self.ctx = ctx
        self.op = op or volume_operator(q.grid, ctx)
        self.trivial = not np.any(q.values)
        if not self.trivial:
            a = np.eye(len(self.grid), dtype=complex) - self.op.matrix * q.values[None, :]
            anorm = np.linalg.norm(a, 1)
            lu, piv = sla.lu_factor(a, check_finite=False)
            rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
            if info != 0 or not rcond > RCOND_MIN:
                raise ResonanceError(f"I - V M_q is numerically singular (rcond = {rcond:.2e}); "
                                     "perturb k slightly")
            self._lu = (lu, piv)

    def solve(self, rhs):
        """(I - V M_q)^{-1} rhs."""
        rhs = np.asarray(rhs, dtype=complex)
        if self.trivial:
            return rhs.copy()
        return sla.lu_solve(self._lu, rhs, check_finite=False)

    def solve_left(self, rows):
        """rows (I - V M_q)^{-1} for a block of row vectors."""
        rows = np.asarray(rows, dtype=complex)
        if self.trivial:
            return rows.copy()
        return sla.lu_solve(self._lu, rows.T, trans=1, check_finite=False).T

    def scattered(self, u_in):
        """u_sc solving u_sc = V[q (u_in + u_sc)]; ``u_in`` may hold several columns."""
        u_in = np.asarray(u_in, dtype=complex)
        q = self.q.values.reshape((-1,) + (1,) * (u_in.ndim - 1))
        return self.solve(self.op.apply(q * u_in))

    def total(self, f):
        """T_q f = f + w with w = V[q (f + w)]."""
        return f + self.scattered(f)

    def far_field_map(self, ff_matrix):
        """FW (I - M_q V)^{-1}: maps a source s to the far field of q w + s, w = (I - V M_q)^{-1} V s."""
        if self.trivial:
            return np.array(ff_matrix, dtype=complex)
        x = self.solve_left(ff_matrix * self.q.values[None, :])
        return ff_matrix + x @ self.op.matrix


def solve_linear_total(q: ComplexField, u_in, ctx: WaveContext, op=None) -> ComplexField:
    """Scattered field of the linear problem a(x, z) = q(x) z by dense factorisation."""
    return ComplexField(q.grid, LinearScatterer(q, ctx, op).scattered(np.asarray(u_in, dtype=complex)))


def apply_Tq(q: ComplexField, f: ComplexField, ctx: WaveContext, op=None) -> ComplexField:
    """T_q f = f + w on B_R, w the radiating solution of Lap w + k^2 w + q w = -q f."""
    return ComplexField(q.grid, LinearScatterer(q, ctx, op).total(f.values))


def apply_TqH(q: ComplexField, g: HerglotzDensity, ctx: WaveContext, op=None) -> ComplexField:
    """T_q applied to the Herglotz wave of ``g`` restricted to the grid."""
    u_in = herglotz_wave(g, ctx, q.grid.nodes)
    return ComplexField(q.grid, LinearScatterer(q, ctx, op).total(u_in))


def scattered_far_field(model: NonlinearityModel, g: HerglotzDensity, ctx: WaveContext, obs, delta,
                        **solve_kw):
    """Far field of the source a(., u_sc + u_in) after a nonlinear solve."""
    u_sc, report = solve_nonlinear(model, g, ctx, delta, **solve_kw)
    u_in = herglotz_wave(g, ctx, model.grid.nodes)
    source = ComplexField(model.grid, model.evaluate_values(u_sc.values + u_in))
    return far_field_of_source(source, ctx, obs), report
