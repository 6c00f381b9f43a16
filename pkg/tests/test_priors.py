import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import spence

from copularank.priors import (
    JeffreysPrior,
    TabulatedPrior,
    TransformedBetaPrior,
    beta_moment,
    jeffreys_fisher_info,
    moments,
    parse_prior,
    sample_prior,
    tv_distance,
)


def quad_moment(prior, j):
    lo, hi = prior.support
    val, _ = integrate.quad(lambda t: t**j * prior.density(t), lo, hi, epsabs=1e-12, limit=300)
    return val


def fisher_dilog(theta):
    """Independent route: I(theta) = ((Li2(t) - Li2(-t))/(2t) - 1)/t^2 via the
    dilogarithm, Li2(x) = spence(1 - x)."""
    li2 = lambda x: spence(1.0 - x)
    return ((li2(theta) - li2(-theta)) / (2.0 * theta) - 1.0) / theta**2


class TestBetaMoment:
    def test_zeroth(self):
        assert beta_moment(3.2, 0.7, 0) == 1.0

    def test_symmetric_odd_vanish(self):
        for alpha in (0.5, 1.0, 2.0, 6.0):
            for j in (1, 3, 5, 7):
                assert beta_moment(alpha, alpha, j) == pytest.approx(0.0, abs=1e-12)

    def test_mean_example(self):
        # E[2T - 1] = 2a/(a+b) - 1
        assert beta_moment(6, 2, 1) == pytest.approx(0.5, abs=1e-12)

    def test_mean_example_against_monte_carlo(self):
        rng = np.random.default_rng(1234)
        draws = 2.0 * rng.beta(6, 2, size=10_000_000) - 1.0
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(beta_moment(6, 2, 1) - draws.mean()) < 4 * se

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 6.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 6.0])
    def test_closed_form_matches_quadrature(self, alpha, beta):
        prior = TransformedBetaPrior(alpha, beta)
        for j in range(9):
            assert beta_moment(alpha, beta, j) == pytest.approx(
                quad_moment(prior, j), abs=1e-8
            )

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            beta_moment(0.0, 1.0, 2)
        with pytest.raises(ValueError):
            beta_moment(1.0, -1.0, 2)


class TestJeffreysFisherInfo:
    def test_at_zero(self):
        assert jeffreys_fisher_info(0.0) == pytest.approx(1.0 / 9.0, abs=1e-15)

    def test_at_one_against_odd_square_sum(self):
        # sum over k >= 0 of 1/(2k+3)^2 = pi^2/8 - 1; the endpoint uses a
        # one-million-term direct summation, whose tail is about 2.5e-7
        exact = math.pi**2 / 8.0 - 1.0
        assert jeffreys_fisher_info(1.0) == pytest.approx(exact, abs=5e-7)
        assert jeffreys_fisher_info(-1.0) == jeffreys_fisher_info(1.0)

    def test_even_in_theta(self):
        grid = np.linspace(0.0, 1.0, 33)
        assert np.allclose(
            jeffreys_fisher_info(grid), jeffreys_fisher_info(-grid), rtol=0, atol=0
        )

    @pytest.mark.parametrize("theta", [0.1, 0.35, 0.5, 0.77, 0.9, 0.99])
    def test_against_dilogarithm(self, theta):
        assert jeffreys_fisher_info(theta) == pytest.approx(
            fisher_dilog(theta), rel=1e-12
        )

    def test_vector_matches_scalar(self):
        grid = np.linspace(-0.999, 0.999, 101)
        vec = jeffreys_fisher_info(grid)
        for t, v in zip(grid, vec):
            assert v == pytest.approx(jeffreys_fisher_info(float(t)), rel=1e-14)


class TestDensities:
    def test_uniform_special_case(self):
        prior = TransformedBetaPrior(1, 1)
        grid = np.linspace(-1, 1, 17)
        assert np.allclose(prior.density(grid), 0.5, atol=1e-14)

    def test_jeffreys_symmetric(self):
        jp = JeffreysPrior()
        for t in (0.1, 0.4, 0.83):
            assert jp.density(t) == pytest.approx(jp.density(-t), rel=1e-14)

    @pytest.mark.parametrize(
        "prior",
        [
            TransformedBetaPrior(1, 1),
            TransformedBetaPrior(6, 2),
            TransformedBetaPrior(0.5, 0.5),
            JeffreysPrior(),
        ],
        ids=["uniform", "beta62", "beta-half", "jeffreys"],
    )
    def test_normalized(self, prior):
        val, _ = integrate.quad(prior.density, -1, 1, epsabs=1e-10, limit=300)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_tabulated_normalized(self):
        grid = np.linspace(-1, 1, 101)
        prior = TabulatedPrior(grid, 3.0 * (1.0 + grid**2))
        val, _ = integrate.quad(prior.density, -1, 1, epsabs=1e-10, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_support_errors(self):
        with pytest.raises(ValueError):
            TransformedBetaPrior(2, 2).density(1.5)


class TestMoments:
    def test_jeffreys_odd_exactly_zero(self, jeffreys):
        table = moments(jeffreys, 7)
        assert table[1] == 0.0 and table[3] == 0.0 and table[5] == 0.0 and table[7] == 0.0
        assert table.provenance == "quadrature"

    def test_transformed_beta_examples(self):
        assert moments(TransformedBetaPrior(2, 1), 1)[1] == pytest.approx(1 / 3, abs=1e-12)
        assert moments(TransformedBetaPrior(1, 1), 2)[2] == pytest.approx(1 / 3, abs=1e-12)

    def test_m0_always_one(self, jeffreys):
        for prior in (jeffreys, TransformedBetaPrior(3, 0.5)):
            assert moments(prior, 0)[0] == 1.0

    def test_jeffreys_even_match_quadrature(self, jeffreys):
        table = moments(jeffreys, 6)
        for j in (2, 4, 6):
            assert table[j] == pytest.approx(quad_moment(jeffreys, j), abs=1e-8)

    def test_magnitude_bound(self, jeffreys):
        for prior in (jeffreys, TransformedBetaPrior(0.7, 4.0)):
            table = moments(prior, 8)
            assert all(abs(m) <= 1.0 + 1e-12 for m in table.moments)


class TestTvDistance:
    def test_self_distance_zero(self, jeffreys):
        assert tv_distance(jeffreys, jeffreys) == pytest.approx(0.0, abs=1e-8)

    def test_paper_minimum_value(self, jeffreys):
        # TV between Jeffreys' prior and the best symmetric Beta
        assert tv_distance(jeffreys, TransformedBetaPrior(0.88, 0.88)) == pytest.approx(
            0.0082, abs=0.0005
        )

    def test_paper_minimum_location(self, jeffreys):
        alphas = np.arange(0.1, 3.0001, 0.02)
        tvs = [tv_distance(jeffreys, TransformedBetaPrior(a, a)) for a in alphas]
        best = alphas[int(np.argmin(tvs))]
        assert abs(best - 0.88) <= 0.02

    def test_triangle_inequality_spot_check(self, jeffreys):
        p = TransformedBetaPrior(1, 1)
        q = TransformedBetaPrior(2, 2)
        d_pq = tv_distance(p, q)
        d_pj = tv_distance(p, jeffreys)
        d_jq = tv_distance(jeffreys, q)
        assert d_pq <= d_pj + d_jq + 1e-9
        assert d_pj <= d_pq + d_jq + 1e-9
        assert d_jq <= d_pj + d_pq + 1e-9


class TestSampling:
    def test_uniform_ks(self, rng):
        draws = sample_prior(TransformedBetaPrior(1, 1), rng, 100_000)
        stat = stats.kstest(draws, stats.uniform(loc=-1, scale=2).cdf)
        assert stat.pvalue > 0.001

    def test_jeffreys_mean_zero(self, jeffreys, rng):
        draws = sample_prior(jeffreys, rng, 200_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean()) < 4 * se

    def test_beta62_mean(self, rng):
        draws = sample_prior(TransformedBetaPrior(6, 2), rng, 200_000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.5) < 4 * se

    def test_jeffreys_ks_against_cdf(self, jeffreys, rng):
        draws = sample_prior(jeffreys, rng, 50_000)
        grid = np.linspace(-1, 1, 2001)
        pdf = jeffreys.density(grid)
        cdf_grid = np.concatenate([[0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(grid))])
        cdf_grid /= cdf_grid[-1]
        stat = stats.kstest(draws, lambda x: np.interp(x, grid, cdf_grid))
        assert stat.pvalue > 0.001

    def test_tabulated_sampling(self, rng):
        grid = np.linspace(-1, 1, 401)
        prior = TabulatedPrior(grid, 1.0 + grid)
        draws = sample_prior(prior, rng, 100_000)
        # E[theta] under density (1+t)/2 on [-1,1] is 1/3
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 1 / 3) < 4 * se + 1e-3


class TestParsing:
    def test_jeffreys(self):
        assert isinstance(parse_prior("jeffreys"), JeffreysPrior)

    def test_beta(self):
        prior = parse_prior("beta:6,2")
        assert prior == TransformedBetaPrior(6.0, 2.0)

    def test_table(self, tmp_path):
        path = tmp_path / "prior.txt"
        grid = np.linspace(-1, 1, 51)
        np.savetxt(path, np.column_stack([grid, 1.0 + 0.5 * grid]))
        prior = parse_prior(f"table:{path}")
        assert isinstance(prior, TabulatedPrior)
        assert prior.density(0.0) == pytest.approx(0.5, abs=1e-9)

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_prior("beta:6")
        with pytest.raises(ValueError):
            parse_prior("cauchy")
