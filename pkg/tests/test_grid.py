import numpy as np
import pytest

from polrte.grid import GridConfig, GridError, build_grid

from conftest import make_grid


class TestBuildGrid:
    def test_point_count_and_weight_1d(self):
        g = make_grid(8, shells=(1.0,), angles=8)
        assert g.n_points == 64
        expected = (2 * np.pi / 8) * (1.0 * 2 * np.pi / 8)
        assert g.w_point.shape == (1,)
        assert g.w_point[0] == pytest.approx(expected, rel=1e-15)

    def test_point_count_2d_two_shells(self):
        g = make_grid((16, 16), shells=(0.5, 1.0), angles=16)
        assert g.n_points == 16 * 16 * 2 * 16

    def test_zero_radius_rejected(self):
        with pytest.raises(GridError, match="k=0 excluded"):
            make_grid(8, shells=(0.0,), angles=8)

    def test_negative_radius_rejected(self):
        with pytest.raises(GridError):
            make_grid(8, shells=(-1.0,), angles=8)

    def test_small_counts_rejected(self):
        with pytest.raises(GridError):
            make_grid(3, angles=8)
        with pytest.raises(GridError):
            make_grid(8, angles=3)

    def test_descending_shells_rejected(self):
        with pytest.raises(GridError):
            make_grid(8, shells=(1.0, 0.5), angles=8)

    def test_quadrature_weights_positive(self):
        g = make_grid((8, 8), shells=(0.5, 0.8, 1.1), angles=12)
        assert np.min(g.w_point) > 0


class TestDifferenceOperators:
    def test_constant_derivative_vanishes(self):
        g = make_grid(8, shells=(0.7, 1.0, 1.3), angles=8)
        f = np.full(g.shape, 3.7)
        for ax in ("x1", "x2", "theta"):
            assert np.max(np.abs(g.ddx(f, ax))) == 0.0
        for ax in ("r", "k1", "k2"):  # stencil weights cancel to rounding
            assert np.max(np.abs(g.ddx(f, ax))) < 1e-13

    def test_sin_x_derivative_second_order(self):
        errs = []
        for n in (32, 64, 128):
            g = make_grid(n, angles=4)
            x1 = g.meshgrid()[0]
            f = np.broadcast_to(np.sin(x1), g.shape).copy()
            err = np.max(np.abs(g.ddx(f, "x1") - np.cos(x1)))
            errs.append(err)
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders > 1.9) and np.all(orders < 2.1)

    def test_skew_adjointness_periodic_axes(self, rng):
        g = make_grid((8, 8), shells=(0.6, 1.0, 1.4), angles=16)
        f = rng.normal(size=g.shape)
        h = rng.normal(size=g.shape)
        scale = np.sqrt(g.integrate(f * f) * g.integrate(h * h))
        for ax in ("x1", "x2", "theta"):
            resid = g.integrate(f * g.ddx(h, ax)) + g.integrate(g.ddx(f, ax) * h)
            assert abs(resid) <= 1e-12 * scale

    def test_cartesian_k_derivative_converges(self):
        # d/dk1 of k1^2 is 2 k1 = 2 r cos(theta)
        errs = []
        for n in (16, 32, 64):
            g = make_grid(4, shells=tuple(np.linspace(0.5, 1.5, n)), angles=n)
            _x1, _x2, r, th = g.meshgrid()
            f = np.broadcast_to((r * np.cos(th)) ** 2, g.shape).copy()
            err = np.max(np.abs(g.ddx(f, "k1") - 2 * r * np.cos(th)))
            errs.append(err)
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders > 1.8) and np.all(orders < 2.2)

    def test_radial_derivative_exact_on_quadratics(self):
        g = make_grid(4, shells=tuple(np.linspace(0.5, 1.5, 7)), angles=4)
        r = g.meshgrid()[2]
        f = np.broadcast_to(1.0 + 2.0 * r + 0.5 * r ** 2, g.shape).copy()
        assert np.max(np.abs(g.ddx(f, "r") - (2.0 + r))) < 1e-12

    def test_single_shell_radial_derivative_is_zero(self, rng):
        g = make_grid(8, shells=(1.0,), angles=8)
        f = rng.normal(size=g.shape)
        assert np.max(np.abs(g.ddx(f, "r"))) == 0.0

    def test_unknown_axis(self):
        g = make_grid(8)
        with pytest.raises(GridError, match="unknown axis"):
            g.ddx(np.zeros(g.shape), "q")

    def test_field_shape_checked(self):
        g = make_grid(8)
        with pytest.raises(GridError):
            g.ddx(np.zeros((2, 2)), "x1")


class TestQuadrature:
    def test_total_volume_one_shell(self):
        g = make_grid(8, shells=(1.0,), angles=8)
        f = np.ones(g.shape)
        assert g.integrate(f) == pytest.approx(2 * np.pi * 2 * np.pi, rel=1e-14)
        assert g.total_volume() == pytest.approx(2 * np.pi * 2 * np.pi, rel=1e-14)

    def test_total_volume_multi_shell(self):
        shells = np.linspace(0.5, 1.5, 11)
        g = make_grid(8, shells=tuple(shells), angles=16)
        # trapezoid over [0.5, 1.5] of 2 pi r dr times the x volume
        expected = 2 * np.pi * np.trapezoid(2 * np.pi * shells, shells)
        assert g.integrate(np.ones(g.shape)) == pytest.approx(expected, rel=1e-13)

    def test_sin_x_integrates_to_zero(self):
        g = make_grid(32, angles=8)
        x1 = g.meshgrid()[0]
        f = np.broadcast_to(np.sin(x1), g.shape).copy()
        assert abs(g.integrate(f)) < 1e-12

    def test_cos2_theta_half_shell_measure(self):
        g = make_grid(4, shells=(1.0,), angles=16)
        th = g.meshgrid()[3]
        f = np.broadcast_to(np.cos(th) ** 2, g.shape).copy()
        # periodic trapezoid integrates cos^2 exactly: half the measure
        assert g.integrate(f) == pytest.approx(0.5 * g.total_volume(), rel=1e-13)

    def test_shell_integrate_constant(self):
        g = make_grid(6, shells=(0.5, 2.0), angles=12)
        f = np.ones(g.shape)
        val = g.shell_integrate(f, 2, 1)
        assert val == pytest.approx(2 * np.pi * 2.0, rel=1e-14)

    def test_shell_integrate_cos_zero(self):
        g = make_grid(6, shells=(1.5,), angles=12)
        th = g.meshgrid()[3]
        f = np.broadcast_to(np.cos(th), g.shape).copy()
        assert abs(g.shell_integrate(f, 0, 0)) < 1e-12

    def test_shell_integrate_cos2(self):
        g = make_grid(6, shells=(2.0,), angles=8)
        th = g.meshgrid()[3]
        f = np.broadcast_to(np.cos(th) ** 2, g.shape).copy()
        assert g.shell_integrate(f, 1, 0) == pytest.approx(2 * np.pi, rel=1e-13)

    def test_shell_integrate_bad_indices(self):
        g = make_grid(6, shells=(1.0,), angles=8)
        f = np.ones(g.shape)
        with pytest.raises(GridError):
            g.shell_integrate(f, 0, 3)
        with pytest.raises(GridError):
            g.shell_integrate(f, 99, 0)
