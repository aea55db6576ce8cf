import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiscat.errors import GridError
from semiscat.geometry import ball_volume, build_directions, build_disk_grid, sphere_area


def test_volume_formulas():
    assert ball_volume(2.0, 2) == pytest.approx(4 * np.pi)
    assert ball_volume(1.0, 3) == pytest.approx(4 * np.pi / 3)
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("d, n", [(2, 16), (2, 31), (3, 12)])
def test_grid_nodes_inside_and_weights(d, n):
    g = build_disk_grid(0.7, n, d)
    assert np.all(g.radii < 0.7)
    assert np.allclose(g.weights, g.h ** d)
    assert g.h == pytest.approx(1.4 / n)


def test_area_converges():
    errs = [abs(build_disk_grid(1.0, n, 2).weights.sum() - np.pi) for n in (16, 64, 256)]
    assert errs[2] < errs[0]
    assert errs[2] < 0.01


def test_lookup_roundtrip():
    g = build_disk_grid(1.0, 20, 2)
    assert np.array_equal(g.lookup(g.index), np.arange(len(g)))
    assert g.lookup(np.array([0, 0])) == -1
    assert g.lookup(np.array([-1, 5])) == -1
    assert np.array_equal(g.cell_of(g.nodes), g.index)


def test_grid_errors():
    with pytest.raises(GridError):
        build_disk_grid(1.0, 4, 2)
    with pytest.raises(GridError):
        build_disk_grid(-1.0, 16, 2)
    with pytest.raises(GridError):
        build_disk_grid(1.0, 16, 4)
    with pytest.raises(GridError):
        build_directions(2, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=4, max_value=300), st.sampled_from([2, 3]))
def test_directions_are_unit_with_total_area(m, d):
    s = build_directions(m, d)
    assert len(s) == m
    assert np.allclose(np.linalg.norm(s.dirs, axis=1), 1.0)
    assert s.weights.sum() == pytest.approx(sphere_area(d))


def test_circle_quadrature_exact_for_trig_polynomials():
    s = build_directions(16, 2)
    for p in range(1, 8):
        assert abs(np.sum(np.cos(p * s.angles) * s.weights)) < 1e-13


def test_fibonacci_lattice_integrates_linear_functions():
    s = build_directions(400, 3)
    assert np.allclose(s.weights @ s.dirs, 0.0, atol=0.05)
    assert np.sum(s.dirs[:, 2] ** 2 * s.weights) == pytest.approx(4 * np.pi / 3, rel=1e-2)
