import numpy as np
import pytest
from scipy import integrate
from scipy.special import ndtri as scipy_ndtri

from copularank.copula import (
    CopulaModel,
    ParameterError,
    check_symmetries,
    fgm_density,
    fgm_model,
    gaussian_density,
    gaussian_model,
    model_from_tag,
)


class TestFgmDensity:
    def test_independence(self):
        grid = np.linspace(0, 1, 11)
        uu, vv = np.meshgrid(grid, grid)
        assert np.all(fgm_density(uu, vv, 0.0) == 1.0)

    def test_corner_value(self):
        for theta in (-1.0, -0.3, 0.5, 1.0):
            assert fgm_density(0.0, 0.0, theta) == pytest.approx(1.0 + theta)

    @pytest.mark.parametrize("theta", [-1.0, -0.4, 0.7, 1.0])
    def test_integrates_to_one(self, theta):
        val, _ = integrate.dblquad(
            lambda v, u: fgm_density(u, v, theta), 0, 1, 0, 1, epsabs=1e-13
        )
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_bounds(self):
        grid = np.linspace(0, 1, 101)
        uu, vv = np.meshgrid(grid, grid)
        for theta in np.linspace(-1, 1, 9):
            c = fgm_density(uu, vv, theta)
            assert np.all(c >= 0.0)
            assert np.all(c <= 2.0)

    def test_domain_errors(self):
        with pytest.raises(ParameterError):
            fgm_density(0.5, 0.5, 1.5)
        with pytest.raises(ValueError):
            fgm_density(-0.1, 0.5, 0.5)


class TestGaussianDensity:
    def test_independence(self):
        grid = np.linspace(0.01, 0.99, 21)
        uu, vv = np.meshgrid(grid, grid)
        assert np.allclose(gaussian_density(uu, vv, 0.0), 1.0, atol=1e-12)

    def test_center_value(self):
        for rho in (-0.9, -0.2, 0.5, 0.99):
            assert gaussian_density(0.5, 0.5, rho) == pytest.approx(
                1.0 / np.sqrt(1.0 - rho * rho), rel=1e-12
            )

    def test_integrates_to_one_rho_08(self):
        val, _ = integrate.dblquad(
            lambda v, u: gaussian_density(u, v, 0.8), 0, 1, 0, 1,
            epsabs=1e-10, epsrel=1e-10,
        )
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_boundary_clamped_finite(self):
        assert np.isfinite(gaussian_density(0.0, 1.0, 0.7))
        assert np.isfinite(gaussian_density(1e-16, 0.5, -0.6))

    def test_parameter_domain(self):
        with pytest.raises(ParameterError):
            gaussian_density(0.5, 0.5, 1.0)
        with pytest.raises(ParameterError):
            gaussian_density(0.5, 0.5, -1.0)

    def test_quantile_accuracy_vs_scipy(self):
        from copularank._backend import kernels

        p = np.concatenate(
            [np.linspace(1e-12, 1 - 1e-12, 20001), [1e-15, 1 - 1e-15, 0.5]]
        )
        ours = kernels.ndtri_vec(p)
        ref = scipy_ndtri(p)
        assert np.max(np.abs(ours - ref)) < 1e-9


class TestSymmetryChecks:
    def test_fgm_exact(self):
        rep = check_symmetries(fgm_model())
        assert rep.max_exchange_violation == 0.0
        assert rep.max_sign_flip_violation == 0.0
        assert rep.passed

    def test_gaussian_tight(self):
        rep = check_symmetries(gaussian_model())
        assert rep.max_exchange_violation < 1e-12
        assert rep.max_sign_flip_violation < 1e-12
        assert rep.passed

    def test_corrupted_density_flagged(self):
        def broken(u, v, theta):
            return 1.0 + theta * (1.0 - 2.0 * np.asarray(u)) * (1.0 - 1.9 * np.asarray(v))

        model = CopulaModel("broken", 0, -1.0, 1.0, False, broken)
        rep = check_symmetries(model)
        assert not rep.passed
        assert rep.max_sign_flip_violation > rep.tolerance


class TestModelRegistry:
    def test_tags(self):
        assert model_from_tag("fgm").family == "fgm"
        assert model_from_tag("GAUSSIAN").family == "gaussian"
        with pytest.raises(ValueError):
            model_from_tag("frank")

    def test_theta_validation(self):
        fgm = fgm_model()
        assert fgm.validate_theta(1.0) == 1.0
        with pytest.raises(ParameterError):
            fgm.validate_theta(1.0001)
        gauss = gaussian_model()
        with pytest.raises(ParameterError):
            gauss.validate_theta(1.0)  # open domain
