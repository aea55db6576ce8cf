import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bump, random_density
from semiscat.errors import IllPosedError, MissingRecordsError
from semiscat.fields import ComplexField, HerglotzDensity, herglotz_wave
from semiscat.forward import LinearScatterer, apply_TqH
from semiscat.geometry import build_directions, build_disk_grid
from semiscat.inverse import (
    dense_range_probe,
    recover_all,
    recover_first_order,
    recover_higher_order,
    surrogate_model,
    tikhonov_solve,
)
from semiscat.linearize import ExperimentPlan, ScatteringDataset, derivative_estimate, synthesize_dataset
from semiscat.nonlinearity import NonlinearityModel
from semiscat.specfun import WaveContext

CTX = WaveContext(4.0, 2)
GRID = build_disk_grid(1.0, 20, 2)
DIRS = build_directions(32, 2)
OBS = build_directions(32, 2)
DENS = [random_density(DIRS, s, 0.3) for s in range(4)]
Q1 = 0.6 * bump(GRID, [0.15, -0.1], 0.45)
Q2 = 3.0 * bump(GRID, [-0.15, 0.2], 0.45)


def rel(a, b):
    return GRID.norm(a - b) / GRID.norm(b)


@pytest.fixture(scope="module")
def quad_data():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, Q2], c0=2.0)
    plan = ExperimentPlan(DENS, 0.08, 2, OBS)
    return synthesize_dataset(m, plan, CTX)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-12, 1e-1), st.integers(3, 30), st.integers(3, 30))
def test_tikhonov_normal_equations(seed, lam, m, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    res = tikhonov_solve(a, d, lam)
    lhs = a.conj().T @ (a @ res.x) + res.lam * res.x
    rhs = a.conj().T @ d
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_tikhonov_zero_and_degenerate():
    a = np.random.default_rng(0).standard_normal((6, 4))
    assert np.all(tikhonov_solve(a, np.zeros(6), 1e-6).x == 0)
    with pytest.raises(IllPosedError):
        tikhonov_solve(np.zeros((3, 3)), np.ones(3), 1e-6)
    with pytest.raises(IllPosedError):
        tikhonov_solve(np.ones((3, 3)), np.ones(3), 0.0)


def test_discrepancy_principle_hits_target():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((50, 20)) @ np.diag(np.geomspace(1, 1e-8, 20))
    x = rng.standard_normal(20)
    noise = 1e-4 * rng.standard_normal(50)
    res = tikhonov_solve(a, a @ x + noise, 0.0, noise=np.linalg.norm(noise), tau=1.5)
    assert res.residual == pytest.approx(1.5 * np.linalg.norm(noise), rel=1e-3)


def test_zero_dataset_gives_zero():
    plan = ExperimentPlan(DENS[:2], 0.08, 2, OBS)
    ds = synthesize_dataset(NonlinearityModel.zero(GRID, 2), plan, CTX)
    res = recover_all(ds, GRID, CTX, 2)
    assert all(np.all(c.values == 0) for c in res.coefficients)


def test_born_only_small_q():
    q = 0.01 * bump(GRID, [0.1, 0.0], 0.5)
    m = NonlinearityModel.from_derivatives(GRID, [q], c0=1.0)
    ds = synthesize_dataset(m, ExperimentPlan(DENS, 0.08, 1, OBS), CTX)
    qh, diag = recover_first_order(ds, GRID, CTX, lam=1e-10, max_outer=1)
    assert diag["iterations"] == 1
    assert rel(qh.values, q) <= 0.1


def test_first_order_inverse_crime(quad_data):
    qh, diag = recover_first_order(quad_data, GRID, CTX, lam=1e-10, max_outer=80)
    assert diag["converged"]
    assert rel(qh.values, Q1) <= 0.05
    # each linear step fits its data to the regularisation floor; the updates contract
    assert max(diag["misfits"]) <= 1e-5
    ch = diag["changes"][1:]
    assert all(b <= a for a, b in zip(ch[:-1], ch[1:]))


def test_support_enforced(quad_data):
    qh, _ = recover_first_order(quad_data, GRID, CTX, lam=1e-10, max_outer=2, R=0.8)
    assert np.all(qh.values[GRID.radii >= 0.8] == 0)


def test_higher_order_with_exact_q1(quad_data):
    f, diag = recover_higher_order(2, [ComplexField(GRID, Q1)], quad_data, GRID, CTX, lam=1e-10)
    assert rel(f.values, Q2) <= 0.1
    assert diag["subsets"] == 6


def test_surrogate_data_recovers_zero():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, 0 * Q1], c0=2.0)
    ds = synthesize_dataset(m, ExperimentPlan(DENS[:3], 0.08, 2, OBS), CTX)
    f, diag = recover_higher_order(2, [Q1], ds, GRID, CTX, lam=1e-10)
    assert GRID.norm(f.values) <= 1e-3 * GRID.norm(Q2)


def test_isolated_residual_is_linear_in_q2():
    plan = ExperimentPlan(DENS[:2], 0.08, 2, OBS)
    data = []
    for s in (1.0, 2.0):
        m = NonlinearityModel.from_derivatives(GRID, [Q1, s * Q2], c0=3.0)
        ds = synthesize_dataset(m, plan, CTX)
        data.append(derivative_estimate(ds, (1, 1)).extrapolated)
    sur = synthesize_dataset(surrogate_model(GRID, [Q1], 2), plan, CTX)
    pred = derivative_estimate(sur, (1, 1)).extrapolated
    r1, r2 = data[0] - pred, data[1] - pred
    assert np.linalg.norm(r2 - 2 * r1) <= 1e-5 * np.linalg.norm(r2)


def test_recover_all_linear_truth():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, 0 * Q1], c0=2.0)
    ds = synthesize_dataset(m, ExperimentPlan(DENS, 0.08, 2, OBS), CTX)
    res = recover_all(ds, GRID, CTX, 2, [1e-10, 1e-10])
    assert rel(res.coefficients[0].values, Q1) <= 0.05
    assert GRID.norm(res.coefficients[1].values) <= 1e-3 * GRID.norm(Q2)
    assert res.diagnostics["order_reached"] == 2


def test_recover_all_pure_quadratic_order_separation():
    m = NonlinearityModel.from_derivatives(GRID, [0 * Q1, Q2], c0=2.0)
    ds = synthesize_dataset(m, ExperimentPlan(DENS, 0.08, 2, OBS), CTX)
    res = recover_all(ds, GRID, CTX, 2)
    assert GRID.norm(res.coefficients[0].values) <= 1e-3 * GRID.norm(Q2)
    assert rel(res.coefficients[1].values, Q2) <= 0.1


def test_recover_all_cubic_chain():
    q3 = 12.0 * bump(GRID, [0.0, -0.2], 0.45)
    m = NonlinearityModel.from_derivatives(GRID, [Q1, 0 * Q1, q3], c0=3.0)
    # order 3 needs enough triples times observations to determine the unknowns
    dens = DENS + [random_density(DIRS, s, 0.3) for s in (4, 5)]
    ds = synthesize_dataset(m, ExperimentPlan(dens, 0.08, 3, build_directions(64, 2)), CTX)
    res = recover_all(ds, GRID, CTX, 3)
    assert rel(res.coefficients[0].values, Q1) <= 0.05
    assert GRID.norm(res.coefficients[1].values) <= 1e-3 * GRID.norm(q3)
    assert rel(res.coefficients[2].values, q3) <= 0.1


def test_determinism(quad_data):
    a = recover_all(quad_data, GRID, CTX, 2)
    b = recover_all(quad_data, GRID, CTX, 2)
    for x, y in zip(a.coefficients, b.coefficients):
        assert np.array_equal(x.values, y.values)


def test_missing_records_ill_posed(quad_data):
    records = {k: v for k, v in quad_data.records.items() if k != (1, 0, 0, 0)}
    ds = ScatteringDataset(quad_data.plan, records, "measured")
    with pytest.raises(MissingRecordsError):
        recover_first_order(ds, GRID, CTX)


def test_dense_range_probe():
    q = ComplexField(GRID, Q1)
    g = random_density(build_directions(16, 2), 3, 1.0)
    exact = apply_TqH(q, g, CTX)
    assert dense_range_probe(q, exact, CTX, (16,))[0] <= 1e-8
    held = random_density(build_directions(97, 2), 9, 1.0)
    target = apply_TqH(q, held, CTX)
    curve = dense_range_probe(q, target, CTX, (8, 16, 32, 64))
    assert all(b <= 1.05 * a for a, b in zip(curve[:-1], curve[1:]))
    assert curve[-1] < 1e-3 * curve[0]


def test_dense_range_free_herglotz():
    z = ComplexField.zeros(GRID)
    v = np.zeros(16, dtype=complex)
    v[[1, 6, 11]] = [1.0, -2j, 0.5]
    u_in = herglotz_wave(HerglotzDensity(build_directions(16, 2), v), CTX, GRID.nodes)
    target = ComplexField(GRID, LinearScatterer(z, CTX).total(u_in))
    assert dense_range_probe(z, target, CTX, (16, 32))[0] <= 1e-8
