import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdirk.spectral import PeriodicGrid, build_diff_matrices


def grid_2pi(n):
    return PeriodicGrid(n=n, x_left=0.0, x_right=2.0 * np.pi)


def test_sine_derivative_even_n():
    g = grid_2pi(8)
    d = build_diff_matrices(g)
    x = g.points
    assert np.max(np.abs(d.dx @ np.sin(x) - np.cos(x))) < 1e-12


def test_constant_derivative_zero():
    for n in (8, 9, 16, 101):
        g = grid_2pi(n)
        d = build_diff_matrices(g)
        assert np.max(np.abs(d.dx @ np.ones(n))) < 1e-10 * n


def test_second_derivative_odd_n():
    g = grid_2pi(9)
    d = build_diff_matrices(g)
    x = g.points
    assert np.max(np.abs(d.dxx @ np.cos(2 * x) + 4 * np.cos(2 * x))) < 1e-10


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        PeriodicGrid(n=3, x_left=0.0, x_right=1.0)


def test_bad_domain_rejected():
    with pytest.raises(ValueError):
        PeriodicGrid(n=8, x_left=1.0, x_right=1.0)


def test_grid_points_exclude_right_endpoint():
    g = PeriodicGrid(n=10, x_left=-np.pi, x_right=np.pi)
    pts = g.points
    assert pts[0] == pytest.approx(-np.pi)
    assert pts[-1] < np.pi
    assert np.allclose(np.diff(pts), g.dx)


def test_antisymmetry():
    for n in (8, 9):
        d = build_diff_matrices(grid_2pi(n)).dx
        assert np.max(np.abs(d + d.T)) < 1e-12 * n


def test_mean_preserved():
    for n in (8, 9, 32):
        d = build_diff_matrices(grid_2pi(n)).dx
        assert np.max(np.abs(np.ones(n) @ d)) < 1e-9 * n


def test_general_domain_scaling():
    # unit period: d/dx sin(2 pi x) = 2 pi cos(2 pi x)
    g = PeriodicGrid(n=16, x_left=0.0, x_right=1.0)
    d = build_diff_matrices(g)
    x = g.points
    err = np.max(np.abs(d.dx @ np.sin(2 * np.pi * x)
                        - 2 * np.pi * np.cos(2 * np.pi * x)))
    assert err < 1e-11

    g = PeriodicGrid(n=21, x_left=-np.pi, x_right=np.pi)
    d = build_diff_matrices(g)
    x = g.points
    assert np.max(np.abs(d.dx @ np.cos(3 * x) + 3 * np.sin(3 * x))) < 1e-11


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=5, max_value=64), data=st.data())
def test_trig_polynomial_exactness(n, data):
    k = data.draw(st.integers(min_value=1, max_value=max(1, (n - 1) // 2)))
    g = grid_2pi(n)
    d = build_diff_matrices(g)
    x = g.points
    err = np.max(np.abs(d.dx @ np.sin(k * x) - k * np.cos(k * x)))
    assert err < 1e-9 * n
