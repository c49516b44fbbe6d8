from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from scipy import integrate, stats

from levytv.errors import ResolutionError
from levytv.levy_model import AtomMeasure, Band, DensityMeasure, LevyTriplet, StableMeasure
from levytv.spectral import (
    char_fn,
    density_on_grid,
    gaussian_mean_shift_tv,
    hellinger_sq_to_gaussian,
    numeric_tv_to_gaussian,
    product_tv_upper,
)


class TestCharFn:
    def test_pure_gaussian(self):
        assert char_fn(LevyTriplet(0.0, 1.0), 1.0, 2.0, 1.0) == pytest.approx(math.exp(-1.0))

    def test_atoms_direct(self):
        tr = LevyTriplet(0.0, 0.0, AtomMeasure((0.1,), (5.0,)))
        want = cmath.exp(5 * (cmath.exp(0.3j) - 1 - 0.3j))
        got = complex(char_fn(tr, 1.0, 1.0, 3.0))
        assert got == pytest.approx(want, rel=1e-13)
        assert abs(got) == pytest.approx(math.exp(5 * (math.cos(0.3) - 1)), rel=1e-13)
        assert abs(got) == pytest.approx(0.799861, abs=1e-6)

    def test_symmetric_real(self):
        tr = LevyTriplet(0.0, 0.3, StableMeasure(1.3))
        t = np.linspace(-50, 50, 201)
        assert np.max(np.abs(char_fn(tr, 0.5, 1.0, t).imag)) < 1e-14

    @pytest.mark.parametrize("beta,cp,cm", [(0.5, 1.0, 0.2), (1.0, 0.0, 1.0), (1.7, 2.0, 0.5)])
    def test_hermitian_and_modulus(self, beta, cp, cm):
        tr = LevyTriplet(0.4, 0.2, StableMeasure(beta, cp, cm))
        t = np.geomspace(1e-3, 1e3, 60)
        a, b = char_fn(tr, 0.7, 1.0, t), char_fn(tr, 0.7, 1.0, -t)
        assert np.allclose(a, np.conj(b), rtol=1e-13, atol=1e-300)
        assert np.all(np.abs(a) <= 1 + 1e-15)

    def test_envelope_decreasing_with_sigma(self):
        tr = LevyTriplet(0.0, 1.0, StableMeasure(0.9, 1.0, 0.3))
        vals = np.abs(char_fn(tr, 0.5, 1.0, np.array([0.0, 1.0, 10.0])))
        assert vals[0] == pytest.approx(1.0)
        assert vals[0] >= vals[1] >= vals[2]

    @pytest.mark.parametrize("beta", [0.4, 1.0, 1.6])
    def test_stable_exponent_vs_independent_quadrature(self, beta):
        # band away from zero so DensityMeasure quadrature is a fair oracle
        sm = StableMeasure(beta, 1.3, 0.6, Band(0.005, 0.8))
        dm = DensityMeasure(sm.density, Band(0.005, 0.8))
        t = np.array([-200.0, -3.0, 0.2, 17.0, 90.0])
        assert np.allclose(sm.levy_exponent(t), dm.levy_exponent(t), rtol=1e-9)


class TestDensityGrid:
    def test_standard_normal(self):
        g = density_on_grid(LevyTriplet(0.0, 1.0), 1.0, 1.0)
        x = g.x
        m = np.abs(x) <= 6
        assert np.max(np.abs(g.values[m] - stats.norm.pdf(x[m]))) <= 1e-6
        assert g.total_mass() == pytest.approx(1.0, abs=1e-4)

    def test_void_atom(self):
        tr = LevyTriplet(0.0, 0.0, AtomMeasure((0.1, -0.3), (1.2, 0.8)))
        g = density_on_grid(tr, 1.0, 1.0)
        assert g.atom[1] == pytest.approx(math.exp(-2.0))
        assert g.atom[1] == pytest.approx(0.135335, abs=1e-6)
        assert g.singular
        assert g.total_mass() == pytest.approx(1.0)

    def test_symmetric_stable_density(self):
        g = density_on_grid(LevyTriplet(0.0, 0.0, StableMeasure(1.8)), 0.5, 1.0)
        mirrored = np.concatenate([[g.values[0]], g.values[1:][::-1]])
        assert np.max(np.abs(g.values - mirrored)) < 1e-8

    @pytest.mark.parametrize("beta,eps,s2", [(1.8, 0.5, 0.0), (0.9, 0.05, 0.0), (1.2, 0.3, 0.5)])
    def test_invariants(self, beta, eps, s2):
        tr = LevyTriplet(0.1, s2, StableMeasure(beta, 1.0, 0.4))
        g = density_on_grid(tr, eps, 1.0)
        assert g.values.min() >= -1e-8
        assert g.total_mass() == pytest.approx(1.0, abs=1e-4)
        _, var = g.mean_var()
        assert var == pytest.approx(s2 + tr.measure.moment(2, 0.0, eps), rel=1e-3)

    def test_resolution_error(self):
        # finite activity, no Gaussian part: CF remainder decays slowly
        tr = LevyTriplet(0.0, 0.0, StableMeasure(1.0, band=Band(0.2, 1.0)))
        with pytest.raises(ResolutionError, match="grid"):
            density_on_grid(tr, 1.0, 1.0, grid_size=1024)

    def test_csv(self, tmp_path):
        g = density_on_grid(LevyTriplet(0.0, 1.0), 1.0, 1.0, grid_size=64)
        g.to_csv(tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "x,f" and len(lines) == 65


class TestNumericTV:
    def test_zero_for_gaussian(self):
        assert numeric_tv_to_gaussian(LevyTriplet(0.3, 2.0), 1.0, 0.7) <= 1e-6

    def test_mean_shift_oracle(self):
        # closed form 2 Phi(d/2) - 1 versus direct quadrature
        quad = 0.5 * integrate.quad(lambda x: abs(stats.norm.pdf(x) - stats.norm.pdf(x, 0.1)),
                                    -12, 12, points=[0.05])[0]
        assert gaussian_mean_shift_tv(0.1) == pytest.approx(quad, rel=1e-9)
        assert gaussian_mean_shift_tv(0.1) == pytest.approx(0.0398776, abs=1e-7)

    def test_slope_beta_09(self):
        eps = np.array([0.02, 0.04, 0.08])
        tv = [numeric_tv_to_gaussian(LevyTriplet(0.0, 0.0, StableMeasure(0.9)), e, 1.0) for e in eps]
        slope = np.polyfit(np.log(eps), np.log(tv), 1)[0]
        assert slope == pytest.approx(0.9, abs=0.15)

    def test_shift_invariance(self):
        tr = LevyTriplet(0.0, 0.0, StableMeasure(1.5, 1.0, 0.3))
        a = numeric_tv_to_gaussian(tr, 0.3, 1.0)
        b = numeric_tv_to_gaussian(tr, 0.3, 1.0, center_shift=0.37 * 0.1)
        assert abs(a - b) < 1e-6

    def test_refinement_check(self):
        tr = LevyTriplet(0.0, 0.0, StableMeasure(1.2))
        tv = numeric_tv_to_gaussian(tr, 0.2, 1.0, grid_size=1 << 14, refine_check=True)
        assert 0 < tv < 1

    def test_discrete_is_singular(self):
        tr = LevyTriplet(0.0, 0.0, AtomMeasure((0.1,), (3.0,)))
        assert numeric_tv_to_gaussian(tr, 1.0, 1.0) == 1.0

    def test_hellinger_controls_tv(self):
        tr = LevyTriplet(0.0, 0.0, StableMeasure(1.0))
        h2 = hellinger_sq_to_gaussian(tr, 0.3, 1.0)
        tv = numeric_tv_to_gaussian(tr, 0.3, 1.0)
        # H^2/2 <= TV <= sqrt(H^2 (1 - H^2/4)) for the [0, 2] convention
        assert 0.5 * h2 <= tv + 1e-9
        assert tv <= math.sqrt(h2 * (1 - h2 / 4)) + 1e-9
        assert product_tv_upper(h2, 1) >= tv - 1e-9
