import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from numpy.testing import assert_allclose

from annulusgp import AnnulusGeometry, HarmonicModel, HyperParameterState, MeasurementSet, ProbeLocation, build_grid
from annulusgp.kernels import gram
from annulusgp.quadrature import (
    MIN_ORDER,
    area_average,
    circumferential_mode_integrals,
    ensemble_area_average,
    kernel_double_integral,
    kernel_line_integral,
    radial_nodes,
    sector_area_average,
    sector_weights,
)

from _helpers import annulus_points, gram_elementwise, random_data, random_instance, random_model, random_state


class TestModeIntegrals:
    @pytest.mark.parametrize("theta0", [0.0, 17.3, 200.0])
    def test_harmonics_vanish(self, theta0):
        I = circumferential_mode_integrals(HarmonicModel.up_to(20), theta0)
        assert_allclose(I[0], 2 * math.pi)
        assert np.max(np.abs(I[1:])) < 1e-10

    def test_against_trapezoid(self):
        model = HarmonicModel((1, 5, 9))
        t = np.linspace(0, 2 * math.pi, 4001)
        F = np.vstack([np.ones_like(t)] + [f(w * t) for w in model.frequencies for f in (np.sin, np.cos)])
        num = trapezoid(F, t, axis=1)
        assert_allclose(circumferential_mode_integrals(model), num, atol=1e-9)


class TestNodes:
    def test_weights_integrate_polynomials(self):
        z, w = radial_nodes(16)
        assert_allclose(w.sum(), 1.0)
        assert_allclose(w @ z**5, 1 / 6)

    def test_minimum_order(self):
        with pytest.raises(ValueError):
            radial_nodes(MIN_ORDER - 1)
        with pytest.raises(ValueError):
            radial_nodes(10.5)


class TestKernelIntegrals:
    def test_line_integral_against_tensor_quadrature(self):
        rng = np.random.default_rng(0)
        g = AnnulusGeometry()
        P, W = annulus_points(40, 48, g)
        for _ in range(5):
            data, s, model = random_instance(rng)
            ref = W @ gram_elementwise(P, data.X, s, model)
            assert_allclose(kernel_line_integral(data, s, model, g), ref, rtol=1e-10)

    def test_double_integral_against_tensor_quadrature(self):
        rng = np.random.default_rng(1)
        g = AnnulusGeometry(0.3, 1.2)
        P, W = annulus_points(24, 18, g)
        for _ in range(3):
            model = random_model(rng)
            s = random_state(rng, model)
            ref = W @ gram_elementwise(P, P, s, model) @ W
            assert_allclose(kernel_double_integral(s, model, g), ref, rtol=1e-10)

    def test_monte_carlo(self):
        rng = np.random.default_rng(2)
        g = AnnulusGeometry()
        model = HarmonicModel((1, 3))
        s = HyperParameterState([1.0, 0.8, 0.6, 0.5, 0.4], 1.0, 0.3, 0.1)
        x = np.array([[0.4, 30.0]])
        n = 200_000
        # area-uniform radius: h^2 uniform between r_inner^2 and r_outer^2
        h = np.sqrt(rng.uniform(g.r_inner**2, g.r_outer**2, n))
        r = (h - g.r_inner) / g.dh_dr
        t = rng.uniform(0, 360, n)
        vals = gram(np.column_stack([r, t]), x, s, model).ravel()
        # v is exactly the area mean of k(., x)
        mc = vals.mean()
        se = vals.std() / math.sqrt(n)
        v = kernel_line_integral(x, s, model, g)[0]
        assert abs(v - mc) < 4 * se

    def test_order_doubling(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            data, s, model = random_instance(rng)
            v1 = kernel_line_integral(data, s, model, order=64)
            v2 = kernel_line_integral(data, s, model, order=128)
            assert_allclose(v1, v2, rtol=1e-10)
            assert_allclose(kernel_double_integral(s, model, order=64),
                            kernel_double_integral(s, model, order=128), rtol=1e-10)


class TestAreaAverage:
    def test_variance_bounds(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            data, s, model = random_instance(rng)
            a = area_average(data, s, model)
            assert 0.0 <= a.variance <= a.T * (1 + 1e-12)

    def test_information_never_hurts(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            data, s, model = random_instance(rng)
            more = data.with_appended([ProbeLocation(float(rng.uniform()), float(rng.uniform(0, 360)))],
                                      [750.0])
            assert area_average(more, s, model).variance <= area_average(data, s, model).variance + 1e-12

    def test_constant_readings_give_offset(self):
        data = MeasurementSet(build_grid([0.2, 0.7], [0.0, 120.0, 240.0]), np.full(6, 745.5))
        s = HyperParameterState([1.0, 0.5, 0.5], 1.0, 0.3, 0.1)
        assert_allclose(area_average(data, s, HarmonicModel((1,))).mean, 745.5)

    def test_zero_constant_mode_gives_no_information(self):
        rng = np.random.default_rng(12)
        data = random_data(rng, 5)
        s = HyperParameterState([0.0, 1.0, 1.0], 1.0, 0.3, 0.1)
        a = area_average(data, s, HarmonicModel((2,)))
        assert a.T == 0.0 and a.variance == 0.0
        assert_allclose(a.mean, data.mean_offset)

    def test_ensemble_single_state(self):
        rng = np.random.default_rng(13)
        data, s, model = random_instance(rng)
        a = area_average(data, s, model)
        e = ensemble_area_average(data, [s], model)
        assert_allclose([e.mean, e.variance], [a.mean, a.variance], rtol=1e-14)
        assert e.n_draws == 1


class TestSector:
    def test_weights_cover_annulus(self):
        data = MeasurementSet(build_grid([0.1, 0.5, 0.9], [10.0, 100.0, 250.0]), np.arange(9.0))
        g = AnnulusGeometry()
        w = sector_weights(data, g)
        assert np.all(w > 0)
        assert_allclose(w.sum(), 360.0 * (g.r_inner + 0.5 * g.dh_dr))

    @settings(max_examples=30)
    @given(st.lists(st.integers(0, 359), min_size=1, max_size=12, unique=True))
    def test_weights_sum_any_arrangement(self, angles):
        data = MeasurementSet(build_grid([0.3, 0.8], sorted(float(a) for a in angles)),
                              np.arange(2.0 * len(angles)))
        g = AnnulusGeometry()
        assert_allclose(sector_weights(data, g).sum(), 360.0 * (g.r_inner + 0.5 * g.dh_dr))

    def test_single_rake(self):
        data = MeasurementSet(build_grid([0.5], [42.0]), [7.0])
        assert_allclose(sector_area_average(data), 7.0)

    def test_exact_for_circumferential_constant_field(self):
        # two probes, field takes value a below r = 0.5 and b above
        data = MeasurementSet(build_grid([0.25, 0.75], [0.0, 90.0, 180.0, 270.0]),
                              [1.0] * 4 + [3.0] * 4)
        g = AnnulusGeometry()
        inner = 0.5 * g.r_inner + 0.125 * g.dh_dr
        outer = 0.5 * g.r_inner + 0.375 * g.dh_dr
        assert_allclose(sector_area_average(data, g), (1.0 * inner + 3.0 * outer) / (inner + outer))

    def test_unequal_widths(self):
        data = MeasurementSet(build_grid([0.5], [0.0, 90.0]), [0.0, 4.0])
        # both rakes own half of each gap: 180 degrees each
        assert_allclose(sector_area_average(data), 2.0)
        data = MeasurementSet(build_grid([0.5], [0.0, 90.0, 180.0]), [0.0, 4.0, 8.0])
        # widths 135, 90, 135
        assert_allclose(sector_area_average(data), (4.0 * 90 + 8.0 * 135) / 360.0)
