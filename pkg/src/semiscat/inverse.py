"""Order-by-order recovery of d^l a(., 0) from linearized far-field data.

Order 1: outer fixed point on q; each step solves the stacked linear system
sum_l FW[u_l q] = d_l with u_l = delta^2 T_q H g_l.
Order l >= 2: the predicted order-l derivative of a surrogate model (known lower
coefficients, zero at order l) is subtracted from the data, and the remainder
is inverted through the linear map f -> FW (I - M_q V)^{-1} [f prod_h u_h].
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DivergenceError, DomainError, IllPosedError, MissingRecordsError
from .fields import ComplexField, far_field_matrix, herglotz_matrix, herglotz_wave, volume_operator
from .forward import LinearScatterer
from .geometry import build_directions
from .linearize import (
    ScatteringDataset,
    derivative_estimate,
    stencil_points,
    synthesize_dataset,
    unit_alpha,
)
from .nonlinearity import NonlinearityModel
from .specfun import WaveContext

log = logging.getLogger(__name__)

OUTER_RTOL = 1e-4


@dataclass
class TikhonovResult:
    x: np.ndarray
    lam: float
    residual: float
    data_norm: float
    singular_values: np.ndarray = field(repr=False)


def _svd(a):
    return np.linalg.svd(a, full_matrices=False)


def tikhonov_solve(a, d, lam, relative=True, noise=None, tau=1.5, svd=None) -> TikhonovResult:
    """Minimise ||A x - d||^2 + lam ||x||^2 through the SVD.

    With ``relative`` the parameter is lam * sigma_max^2.  When ``noise`` is given the
    parameter is instead picked by the discrepancy principle ||A x - d|| = tau * noise.
    """
    a = np.asarray(a, dtype=complex)
    d = np.asarray(d, dtype=complex)
    u, s, vh = svd if svd is not None else _svd(a)
    dnorm = float(np.linalg.norm(d))
    if s.size == 0 or s[0] == 0:
        if dnorm > 0:
            raise IllPosedError("system matrix vanishes but data do not; add densities or directions")
        return TikhonovResult(np.zeros(a.shape[1], dtype=complex), 0.0, 0.0, 0.0, s)
    beta = u.conj().T @ d
    outside = max(dnorm ** 2 - float(np.sum(np.abs(beta) ** 2)), 0.0)

    def misfit(lam_abs):
        f = lam_abs / (s ** 2 + lam_abs)
        return np.sqrt(float(np.sum(np.abs(f * beta) ** 2)) + outside)

    lam_abs = lam * s[0] ** 2 if relative else lam
    if noise is not None and noise > 0:
        target = tau * noise
        lo, hi = 1e-16 * s[0] ** 2, 1e4 * s[0] ** 2
        if misfit(hi) <= target:
            lam_abs = hi
        elif misfit(lo) < target:
            lam_abs = np.exp(brentq(lambda t: misfit(np.exp(t)) - target, np.log(lo), np.log(hi), xtol=1e-6))
    if lam_abs <= 0 and s[-1] <= s[0] * a.shape[1] * np.finfo(float).eps:
        raise IllPosedError("rank-deficient system with lambda = 0; add densities/directions or regularise")
    filt = s / (s ** 2 + lam_abs)
    x = vh.conj().T @ (filt * beta)
    return TikhonovResult(x, float(lam_abs), float(np.linalg.norm(a @ x - d)), dnorm, s)


@dataclass
class ReconstructionResult:
    coefficients: list
    residuals: list
    lambdas: list
    iterations: list
    diagnostics: dict = field(default_factory=dict)


def _support(grid, R):
    return grid.radii < R


def _stack_first_order(dataset, ctx, scatterer, ff, mask, grid, densities, delta):
    rows, data, noise = [], [], 0.0
    for l, g in enumerate(densities):
        u_l = scatterer.total(delta ** 2 * herglotz_wave(g, ctx, grid.nodes))
        rows.append(ff[:, mask] * u_l[mask])
        est = derivative_estimate(dataset, unit_alpha(len(densities), (l,)))
        data.append(est.extrapolated)
        noise += est.noise ** 2 if np.isfinite(est.noise) else 0.0
    return np.vstack(rows), np.concatenate(data), float(np.sqrt(noise))


def recover_first_order(dataset: ScatteringDataset, grid, ctx: WaveContext, lam=1e-10, max_outer=30,
                        R=None, discrepancy=False, op=None):
    """Recover q = d_z a(., 0) by the outer fixed point started from the Born guess q = 0.

    Returns the field and a diagnostics dict (misfits, changes, iterations, lambda).
    """
    plan = dataset.plan
    _require(dataset, orders=(1,))
    op = op or volume_operator(grid, ctx)
    mask = _support(grid, grid.R if R is None else R)
    ff = far_field_matrix(grid, ctx, plan.obs)
    q = np.zeros(len(grid), dtype=complex)
    misfits, changes = [], []
    converged = False
    for it in range(1, max_outer + 1):
        sc = LinearScatterer(ComplexField(grid, q), ctx, op)
        a, d, noise = _stack_first_order(dataset, ctx, sc, ff, mask, grid, plan.densities, plan.delta)
        res = tikhonov_solve(a, d, lam, noise=noise if discrepancy else None)
        q_new = np.zeros(len(grid), dtype=complex)
        q_new[mask] = res.x
        nrm = np.linalg.norm(q_new)
        change = float(np.linalg.norm(q_new - q) / nrm) if nrm > 0 else 0.0
        misfits.append(res.residual / res.data_norm if res.data_norm else 0.0)
        changes.append(change)
        q = q_new
        lam_used = res.lam
        if not np.isfinite(change):
            raise DivergenceError("outer iteration produced non-finite values")
        if change < OUTER_RTOL:
            converged = True
            break
        if it >= 4 and change > 1.0 and changes[-2] > 1.0:
            raise DivergenceError(f"outer iteration diverges (relative change {change:.3g}); "
                                  "the first-order coefficient may be too large for the fixed point")
    diag = {"iterations": it, "misfits": misfits, "changes": changes, "converged": converged,
            "lambda": lam_used}
    if not converged and max_outer > 1:
        log.warning("first-order outer iteration stopped after %d steps (change %.3g)", it, changes[-1])
    return ComplexField(grid, q), diag


def _stencil_needs(plan, subsets):
    need = set()
    for s in subsets:
        for step in range(len(plan.eps_ladder)):
            need.update(i for i, _ in stencil_points(plan, s, step))
    return sorted(need)


def _require(dataset, orders):
    plan = dataset.plan
    subsets = [s for l in orders for s in itertools.combinations(range(plan.M), l)]
    missing = [i for i in _stencil_needs(plan, subsets) if i not in dataset.records]
    if missing:
        raise MissingRecordsError(missing)


def surrogate_model(grid, known, l):
    """Model with the recovered coefficients below order l and zero at order l."""
    derivs = [np.asarray(c.values if isinstance(c, ComplexField) else c, dtype=complex) for c in known[: l - 1]]
    derivs.append(np.zeros(len(grid), dtype=complex))
    roots = [np.max(np.abs(c), initial=0.0) ** (1.0 / j) for j, c in enumerate(derivs, start=1)]
    c0 = max(max(roots), 1.0)
    # the surrogate only predicts data; the analyticity radius is not a modelling constraint here
    return NonlinearityModel.from_derivatives(grid, derivs, c0=c0, eta=np.inf)


def recover_higher_order(l, known, dataset: ScatteringDataset, grid, ctx: WaveContext, lam=1e-10, R=None,
                         discrepancy=False, op=None, subsets=None):
    """Recover d_z^l a(., 0) given the lower coefficients ``known`` (orders 1..l-1).

    Returns the field and a diagnostics dict.
    """
    plan = dataset.plan
    if not 2 <= l <= plan.max_order:
        raise DomainError(f"order {l} outside 2..{plan.max_order}")
    if len(known) < l - 1:
        raise DomainError(f"order {l} needs the {l - 1} lower coefficients")
    _require(dataset, orders=(l,))
    op = op or volume_operator(grid, ctx)
    mask = _support(grid, grid.R if R is None else R)
    q = known[0] if isinstance(known[0], ComplexField) else ComplexField(grid, known[0])
    sc = LinearScatterer(q, ctx, op)
    ff_map = sc.far_field_map(far_field_matrix(grid, ctx, plan.obs))[:, mask]
    hmat = herglotz_matrix(plan.densities[0].dirs, ctx, grid.nodes)
    u = [sc.total(plan.delta ** 2 * (hmat @ g.values))[mask] for g in plan.densities]

    surrogate = surrogate_model(grid, known, l)
    subsets = list(itertools.combinations(range(plan.M), l)) if subsets is None else subsets
    # only the stencil points are synthesised for the surrogate
    predicted = synthesize_dataset(surrogate, plan, ctx, op=op, indices=_stencil_needs(plan, subsets))
    if predicted.failures:
        raise IllPosedError(f"surrogate synthesis failed at {sorted(predicted.failures)[:5]}")

    rows, data, noise2 = [], [], 0.0
    for s in subsets:
        alpha = unit_alpha(plan.M, s)
        est = derivative_estimate(dataset, alpha)
        pred = derivative_estimate(predicted, alpha)
        data.append(est.extrapolated - pred.extrapolated)
        if np.isfinite(est.noise):
            noise2 += est.noise ** 2
        prod = np.ones(int(mask.sum()), dtype=complex)
        for h in s:
            prod = prod * u[h]
        rows.append(ff_map * prod)
    a = np.vstack(rows)
    d = np.concatenate(data)
    res = tikhonov_solve(a, d, lam, noise=np.sqrt(noise2) if discrepancy else None)
    f = np.zeros(len(grid), dtype=complex)
    f[mask] = res.x
    diag = {"misfit": res.residual / res.data_norm if res.data_norm else 0.0, "lambda": res.lam,
            "subsets": len(subsets), "residual_data_norm": res.data_norm}
    return ComplexField(grid, f), diag


def recover_all(dataset: ScatteringDataset, grid, ctx: WaveContext, L=None, lambda_schedule=None,
                max_outer=30, R=None, discrepancy=False) -> ReconstructionResult:
    """Recover d_z^l a(., 0) for l = 1..L, each order reusing the lower ones."""
    plan = dataset.plan
    L = plan.max_order if L is None else L
    if not 1 <= L <= plan.max_order:
        raise DomainError(f"L must lie in 1..{plan.max_order}")
    lams = list(lambda_schedule) if lambda_schedule is not None else [1e-10] * L
    if len(lams) < L:
        lams += [lams[-1]] * (L - len(lams))
    op = volume_operator(grid, ctx)
    coeffs, residuals, lambdas, iters = [], [], [], []
    diagnostics = {"order_reached": 0}
    q, d1 = recover_first_order(dataset, grid, ctx, lams[0], max_outer, R, discrepancy, op)
    coeffs.append(q)
    residuals.append(d1["misfits"][-1])
    lambdas.append(d1["lambda"])
    iters.append(d1["iterations"])
    diagnostics["order_1"] = d1
    diagnostics["order_reached"] = 1
    for l in range(2, L + 1):
        f, dl = recover_higher_order(l, coeffs, dataset, grid, ctx, lams[l - 1], R, discrepancy, op)
        coeffs.append(f)
        residuals.append(dl["misfit"])
        lambdas.append(dl["lambda"])
        iters.append(1)
        diagnostics[f"order_{l}"] = dl
        diagnostics["order_reached"] = l
    return ReconstructionResult(coeffs, residuals, lambdas, iters, diagnostics)


def dense_range_probe(q: ComplexField, target: ComplexField, ctx: WaveContext, m_schedule=(8, 16, 32, 64),
                      lam_rel=1e-12, op=None):
    """Relative weighted-L2 residual of fitting ``target`` by T_q H over m directions, per m."""
    grid = q.grid
    sc = LinearScatterer(q, ctx, op)
    sw = np.sqrt(grid.weights)
    t = target.values * sw
    tn = np.linalg.norm(t)
    out = []
    for m in m_schedule:
        dirs = build_directions(m, ctx.d)
        basis = sc.total(herglotz_matrix(dirs, ctx, grid.nodes))
        res = tikhonov_solve(basis * sw[:, None], t, lam_rel)
        out.append(res.residual / tn if tn > 0 else 0.0)
    return np.array(out)
