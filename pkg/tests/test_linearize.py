import numpy as np
import pytest

from conftest import bump, random_density
from semiscat.errors import DomainError, GateError, MissingRecordsError
from semiscat.fields import ComplexField, far_field_of_source, herglotz_wave
from semiscat.forward import apply_TqH
from semiscat.geometry import build_directions, build_disk_grid
from semiscat.linearize import (
    ExperimentPlan,
    ScatteringDataset,
    derivative_estimate,
    first_order_farfield,
    first_order_field,
    mixed_derivative,
    required_indices,
    richardson_weights,
    stencil_points,
    synthesize_dataset,
)
from semiscat.nonlinearity import NonlinearityModel
from semiscat.specfun import WaveContext

CTX = WaveContext(3.0, 2)
GRID = build_disk_grid(1.0, 20, 2)
DIRS = build_directions(16, 2)
OBS = build_directions(24, 2)
DENS = [random_density(DIRS, s, 0.3) for s in range(3)]
Q1 = 0.5 * bump(GRID, [0.1, 0.0], 0.4)
Q2 = 3.0 * bump(GRID, [-0.1, 0.2], 0.4)


@pytest.fixture(scope="module")
def quad_dataset():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, Q2], c0=2.0)
    plan = ExperimentPlan(DENS[:2], 0.08, 2, OBS)
    return synthesize_dataset(m, plan, CTX)


def test_plan_defaults_and_validation():
    plan = ExperimentPlan(DENS, 0.08, 2, OBS)
    assert plan.eps_ladder == pytest.approx((0.02, 0.01, 0.005))
    with pytest.raises(DomainError):
        ExperimentPlan(DENS, 0.08, 2, OBS, eps_ladder=(0.01, 0.02))
    with pytest.raises(DomainError):
        ExperimentPlan(DENS, 0.08, 2, OBS, eps_ladder=(0.09,))
    with pytest.raises(DomainError):
        ExperimentPlan(DENS, 0.08, 4, OBS)
    with pytest.raises(GateError):
        ExperimentPlan(DENS, 0.12, 1, OBS)
    with pytest.raises(GateError):
        ExperimentPlan([d.scaled(100) for d in DENS], 0.08, 2, OBS)


def test_record_count_tensor_family():
    plan = ExperimentPlan(DENS[:2], 0.08, 2, OBS, eps_ladder=(0.02, 0.01))
    assert len(required_indices(plan)) == 9
    plan2 = ExperimentPlan(DENS, 0.08, 1, OBS, eps_ladder=(0.02, 0.01))
    assert len(required_indices(plan2)) == 1 + 3 * 2


def test_second_order_scheme_levels():
    plan = ExperimentPlan(DENS[:1], 0.08, 1, OBS, fd_scheme=2)
    assert plan.levels == pytest.approx([0.04, 0.02, 0.01, 0.005])
    pts = stencil_points(plan, (0,), 0)
    assert sum(w for _, w in pts) == pytest.approx(0.0)


def test_zero_model_all_zero():
    plan = ExperimentPlan(DENS[:2], 0.08, 2, OBS)
    ds = synthesize_dataset(NonlinearityModel.zero(GRID, 2), plan, CTX)
    assert ds.complete
    assert all(np.all(r.values == 0) for r in ds.records.values())
    assert np.all(mixed_derivative(ds, (1, 1)).values == 0)


def test_linear_model_records_scale_linearly():
    m = NonlinearityModel.from_derivatives(GRID, [Q1], c0=1.0)
    plan = ExperimentPlan(DENS[:1], 0.08, 1, OBS)
    ds = synthesize_dataset(m, plan, CTX)
    a, b = ds.record((1,)).values, ds.record((2,)).values
    assert np.max(np.abs(a - 2 * b)) <= 1e-10 * np.max(np.abs(a))


def test_first_order_matches_analytic_with_order_h(quad_dataset):
    est = derivative_estimate(quad_dataset, (1, 0))
    ref = first_order_farfield(ComplexField(GRID, Q1), DENS[0], 0.08, CTX, OBS).values
    errs = [np.linalg.norm(s - ref) for s in est.per_step]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.05)
    assert np.linalg.norm(est.extrapolated - ref) <= 1e-6 * np.linalg.norm(ref)


def test_second_order_scheme_is_order_h2():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, Q2], c0=2.0)
    plan = ExperimentPlan(DENS[:1], 0.08, 1, OBS, fd_scheme=2)
    ds = synthesize_dataset(m, plan, CTX)
    est = derivative_estimate(ds, (1,))
    ref = first_order_farfield(ComplexField(GRID, Q1), DENS[0], 0.08, CTX, OBS).values
    errs = [np.linalg.norm(s - ref) for s in est.per_step]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_pure_cubic_order_separation():
    m = NonlinearityModel.from_derivatives(GRID, [0 * Q1, 0 * Q1, 2 * Q2], c0=2.0)
    plan = ExperimentPlan(DENS, 0.08, 3, OBS)
    ds = synthesize_dataset(m, plan, CTX)
    top = np.linalg.norm(mixed_derivative(ds, (1, 1, 1)).values)
    assert top > 0
    for alpha in [(1, 0, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1)]:
        assert np.linalg.norm(mixed_derivative(ds, alpha).values) <= 1e-3 * top


def test_pure_quadratic_first_order_vanishes(quad_dataset):
    m = NonlinearityModel.from_derivatives(GRID, [0 * Q1, Q2], c0=2.0)
    ds = synthesize_dataset(m, quad_dataset.plan, CTX)
    top = np.linalg.norm(mixed_derivative(ds, (1, 1)).values)
    assert np.linalg.norm(mixed_derivative(ds, (1, 0)).values) <= 1e-3 * top


def test_permutation_symmetry():
    m = NonlinearityModel.from_derivatives(GRID, [Q1, Q2], c0=2.0)
    p1 = ExperimentPlan([DENS[0], DENS[1]], 0.08, 2, OBS)
    p2 = ExperimentPlan([DENS[1], DENS[0]], 0.08, 2, OBS)
    d1, d2 = synthesize_dataset(m, p1, CTX), synthesize_dataset(m, p2, CTX)
    assert np.allclose(mixed_derivative(d1, (1, 0)).values, mixed_derivative(d2, (0, 1)).values, rtol=1e-9, atol=0)
    assert np.allclose(mixed_derivative(d1, (1, 1)).values, mixed_derivative(d2, (1, 1)).values, rtol=1e-6, atol=0)


def test_determinism(quad_dataset):
    again = synthesize_dataset(NonlinearityModel.from_derivatives(GRID, [Q1, Q2], c0=2.0), quad_dataset.plan, CTX)
    assert all(np.array_equal(again.records[k].values, v.values) for k, v in quad_dataset.records.items())


def test_missing_records_error(quad_dataset):
    records = dict(quad_dataset.records)
    records.pop((1, 1))
    ds = ScatteringDataset(quad_dataset.plan, records, "measured")
    assert not ds.complete and (1, 1) in ds.missing
    with pytest.raises(MissingRecordsError) as err:
        mixed_derivative(ds, (1, 1))
    assert (1, 1) in err.value.missing


def test_alpha_validation(quad_dataset):
    with pytest.raises(DomainError):
        mixed_derivative(quad_dataset, (2, 0))
    with pytest.raises(DomainError):
        mixed_derivative(quad_dataset, (0, 0))
    with pytest.raises(DomainError):
        mixed_derivative(quad_dataset, (1,))


def test_richardson_weights_cancel_powers():
    h = np.array([0.02, 0.01, 0.005])
    c = richardson_weights(h, 1)
    assert c.sum() == pytest.approx(1.0)
    assert c @ h == pytest.approx(0.0, abs=1e-15)
    assert c @ h ** 2 == pytest.approx(0.0, abs=1e-17)


def test_first_order_field_identities():
    q = ComplexField(GRID, Q1)
    w = first_order_field(q, DENS[0], 0.08, CTX)
    v = herglotz_wave(DENS[0], CTX, GRID.nodes)
    total = apply_TqH(q, DENS[0], CTX).values
    assert np.max(np.abs(w.values + 0.08 ** 2 * v - 0.08 ** 2 * total)) <= 1e-10 * np.max(np.abs(total))
    w2 = first_order_field(q, DENS[0], 0.04, CTX)
    assert np.linalg.norm(w.values) / np.linalg.norm(w2.values) == pytest.approx(4.0, rel=1e-12)
    assert np.all(first_order_field(ComplexField.zeros(GRID), DENS[0], 0.08, CTX).values == 0)
    assert np.all(first_order_farfield(ComplexField.zeros(GRID), DENS[0], 0.08, CTX, OBS).values == 0)


def test_first_order_born_regime():
    small = 1e-4 * bump(GRID, [0.1, 0.0], 0.4)
    q = ComplexField(GRID, small)
    ff = first_order_farfield(q, DENS[0], 0.08, CTX, OBS).values
    born = far_field_of_source(ComplexField(GRID, small * 0.08 ** 2 * herglotz_wave(DENS[0], CTX, GRID.nodes)),
                               CTX, OBS).values
    assert np.max(np.abs(ff - born)) <= 1e-3 * np.max(np.abs(born))
