import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiscat.errors import AnalyticityError, DomainError
from semiscat.fields import ComplexField
from semiscat.geometry import build_disk_grid
from semiscat.nonlinearity import NonlinearityModel, validate_assumption

GRID = build_disk_grid(1.0, 12, 2)


def _derivs(seed, L, scale=1.0):
    rng = np.random.default_rng(seed)
    return [scale * (rng.standard_normal(len(GRID)) + 1j * rng.standard_normal(len(GRID))) for _ in range(L)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_derivative_roundtrip_is_exact(seed, L):
    d = _derivs(seed, L)
    m = NonlinearityModel.from_derivatives(GRID, d, c0=100.0)
    for l in range(1, L + 1):
        assert np.array_equal(m.derivative_coefficient(l).values, d[l - 1])


def test_coefficients_are_taylor_coefficients():
    d = _derivs(0, 3)
    m = NonlinearityModel.from_derivatives(GRID, d, c0=100.0)
    assert np.allclose(m.coeffs[2], d[2] / 6)
    m2 = NonlinearityModel.from_coefficients(GRID, m.coeffs, c0=100.0)
    assert np.allclose(m2.derivs[2], d[2], rtol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=0.004, allow_nan=False, allow_infinity=False))
def test_evaluate_matches_direct_power_sum(z):
    d = _derivs(1, 4, 0.5)
    m = NonlinearityModel.from_derivatives(GRID, d, c0=10.0)
    vals = np.full(len(GRID), z)
    direct = sum(d[l - 1] / np.prod(range(1, l + 1)) * z ** l for l in range(1, 5))
    assert np.allclose(m.evaluate_values(vals), direct, rtol=1e-13, atol=1e-300)


def test_zero_model_and_a_of_zero():
    m = NonlinearityModel.zero(GRID, L=3)
    assert m.is_zero()
    assert np.all(m.evaluate_values(np.full(len(GRID), 0.01)) == 0)
    m2 = NonlinearityModel.from_derivatives(GRID, _derivs(2, 2), c0=10.0)
    assert np.all(m2.evaluate_values(np.zeros(len(GRID))) == 0)


def test_analyticity_error():
    m = NonlinearityModel.from_derivatives(GRID, _derivs(3, 2), c0=2.0)
    assert m.eta == pytest.approx(0.25)
    assert m.eta_defaulted
    with pytest.raises(AnalyticityError):
        m.evaluate_values(np.full(len(GRID), 0.3))


def test_with_coefficient_and_truncated():
    m = NonlinearityModel.zero(GRID, L=1)
    f = np.ones(len(GRID))
    m3 = m.with_coefficient(3, f)
    assert m3.L == 3 and np.array_equal(m3.derivs[2], f)
    assert m3.truncated(1).L == 1
    with pytest.raises(DomainError):
        m3.derivative_coefficient(4)
    with pytest.raises(DomainError):
        m.evaluate(ComplexField.zeros(build_disk_grid(1.0, 10, 2)))


def test_construction_errors():
    with pytest.raises(DomainError):
        NonlinearityModel.from_derivatives(GRID, [], c0=1.0)
    with pytest.raises(DomainError):
        NonlinearityModel.from_derivatives(GRID, [np.zeros(3)], c0=1.0)
    with pytest.raises(DomainError):
        NonlinearityModel.from_derivatives(GRID, [np.zeros(len(GRID))], c0=0.0)
    with pytest.raises(DomainError):
        NonlinearityModel.from_derivatives(GRID, [np.zeros(len(GRID))], c0=1.0, eta=-1.0)


def test_validation_clauses():
    d = [np.full(len(GRID), 4.0), np.full(len(GRID), 9.0)]
    ok = validate_assumption(NonlinearityModel.from_derivatives(GRID, d, c0=4.0, eta=0.1))
    assert ok.passed and not ok.notes
    bad = validate_assumption(NonlinearityModel.from_derivatives(GRID, d, c0=3.5))
    assert not bad.clauses["iii"] and bad.notes
    support = validate_assumption(NonlinearityModel.from_derivatives(GRID, d, c0=4.0, R=0.5))
    assert not support.clauses["iv"]
    assert len(support.lines()) >= 4
