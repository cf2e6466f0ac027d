import numpy as np
import pytest
from scipy import integrate

from ..asymptotics import (MIN_REPLICATIONS, bias_term, bias_weight, confidence_interval, ks_threshold,
                           normality_diagnostic, predicted_limit, sigma_x, variance_ratio)
from ..bayes import PriorSpec, posterior_update
from ..common import DomainError, InputError, SingularityError
from ..model import sample
from ..objective import (PosteriorDraws, discrete_portfolio, grad_H_theta, linear_normal, newsvendor_exp,
                         newsvendor_weibull)
from ..risk import RiskSpec
from ..utils import stream

LN3 = np.log(3.0)


def test_sigma_x_closed_forms():
    problem = newsvendor_exp()
    params = sigma_x(problem, LN3)
    assert params.sigma_x == pytest.approx(2.0 - LN3, rel=1e-12)
    assert params.info == pytest.approx(np.array([[1.0]]))
    assert sigma_x(problem, 1.0).sigma_x == pytest.approx(3.0 * (1.0 - 2.0 * np.exp(-1.0)), rel=1e-9)
    # rate 2 halves the information scale: I = 1/4
    assert sigma_x(problem, 1.0, theta_c=2.0).sigma_x == pytest.approx(
        2.0 * abs(grad_H_theta(problem, 1.0, 2.0)[0]))

    assert sigma_x(linear_normal(), 0.5).sigma_x == pytest.approx(1.0)
    assert sigma_x(linear_normal(), 0.0).sigma_x == 0.0


def test_sigma_x_is_the_sd_of_h_for_discrete_families():
    problem = discrete_portfolio()
    x = np.array([0.4, 0.6])
    theta = problem.theta_c.theta
    costs = problem.h(x, np.arange(theta.size))
    variance = theta @ costs ** 2 - (theta @ costs) ** 2
    assert sigma_x(problem, x).sigma_x == pytest.approx(np.sqrt(variance), rel=1e-9)


def test_weibull_gradient_against_quadrature():
    problem = newsvendor_weibull()
    k, lam, p, x = problem.family.shape, 1.0, problem.params['p'], 1.0
    integral, _ = integrate.quad(lambda t: t ** k / lam ** 2 * np.exp(-t ** k / lam), 0.0, x, epsabs=1e-13)
    assert grad_H_theta(problem, x, lam) == pytest.approx([-p * integral], rel=1e-6)
    # I(lambda) = 1 / lambda^2
    assert sigma_x(problem, x, theta_c=lam).sigma_x == pytest.approx(p * integral * lam, rel=1e-6)


def test_sigma_x_monte_carlo_path():
    problem = newsvendor_exp()
    estimate = sigma_x(problem.without_analytic(), 1.0, inner_m=10 ** 6, rng=stream(40))
    assert estimate.sigma_x == pytest.approx(3.0 * (1.0 - 2.0 * np.exp(-1.0)), rel=0.02)


def test_sigma_x_singular():
    with pytest.raises(SingularityError):
        sigma_x(discrete_portfolio(), (0.4, 0.6), theta_c=(0.5, 0.5, 0.0))


def test_bias_weights():
    assert bias_weight(RiskSpec.mean()) == 0.0
    assert bias_weight(RiskSpec.mean_variance(2.0)) == 0.0
    assert bias_weight(RiskSpec.var(0.95)) == pytest.approx(1.6448536, abs=1e-7)
    assert bias_weight(RiskSpec.cvar(0.95)) == pytest.approx(2.0627128, abs=1e-7)
    assert bias_weight(RiskSpec.var(0.5)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError, match='alpha = 1'):
        bias_weight(RiskSpec.var(1.0))

    for alpha in (0.1, 0.5, 0.9, 0.99):
        assert bias_term(RiskSpec.cvar(alpha), 1.0, 100) >= bias_term(RiskSpec.var(alpha), 1.0, 100)


def test_bias_term_and_limit():
    assert bias_term(RiskSpec.var(0.95), 2.0, 100) == pytest.approx(1.6448536 * 0.2, abs=1e-7)
    assert bias_term(RiskSpec.mean(), 2.0, 100) == 0.0
    assert predicted_limit(RiskSpec.cvar(0.95), 1.0) == pytest.approx((2.0627128, 1.0), abs=1e-7)
    with pytest.raises(InputError):
        bias_term(RiskSpec.mean(), 1.0, 0)


def test_confidence_interval():
    lo, hi = confidence_interval(RiskSpec.mean(), 1.0, 2.0, 100)
    assert (lo, hi) == pytest.approx((1.0 - 1.959964 * 0.2, 1.0 + 1.959964 * 0.2), abs=1e-6)

    shift = bias_term(RiskSpec.var(0.95), 2.0, 100)
    vlo, vhi = confidence_interval(RiskSpec.var(0.95), 1.0, 2.0, 100)
    assert (vlo, vhi) == pytest.approx((lo - shift, hi - shift))

    assert confidence_interval(RiskSpec.cvar(0.9), 3.0, 0.0, 50) == (3.0, 3.0)
    narrow = confidence_interval(RiskSpec.mean(), 1.0, 2.0, 100, beta=0.5)
    assert narrow[1] - narrow[0] < hi - lo
    with pytest.raises(DomainError):
        confidence_interval(RiskSpec.mean(), 1.0, 2.0, 100, beta=1.0)


def test_normality_diagnostic():
    errors = 0.5 + 2.0 * stream(41).standard_normal(1000)
    report = normality_diagnostic(errors, 0.5, 2.0)
    assert report.replications == 1000
    assert report.sample_mean == pytest.approx(0.5, abs=0.2)
    assert report.sample_sd == pytest.approx(2.0, rel=0.1)
    assert not report.degenerate
    assert report.to_dict()['replications'] == 1000

    shifted = normality_diagnostic(errors, 1.5, 2.0)
    assert shifted.ks_stat > report.ks_stat
    assert not shifted.passes()

    narrow = normality_diagnostic(errors, 0.5, 1.0)
    assert not narrow.passes()


def test_normality_diagnostic_edge_cases():
    with pytest.raises(InputError, match='replications'):
        normality_diagnostic(np.zeros(MIN_REPLICATIONS - 1), 0.0, 1.0)
    with pytest.raises(DomainError):
        normality_diagnostic(np.zeros(MIN_REPLICATIONS), 0.0, 0.0)

    constant = normality_diagnostic(np.full(MIN_REPLICATIONS, 0.25), 0.25, 1.0)
    assert constant.degenerate
    assert constant.sample_sd == 0.0
    assert not constant.passes()


def test_ks_threshold():
    assert ks_threshold(1000) == pytest.approx(1.358099 / np.sqrt(1000), rel=1e-5)
    assert ks_threshold(100, level=0.99) > ks_threshold(100)
    with pytest.raises(InputError):
        ks_threshold(0)


def test_variance_ratio():
    assert variance_ratio([1.0, 2.0, 3.0], 2.0) == pytest.approx(0.5)
    with pytest.raises(InputError):
        variance_ratio([], 1.0)
    with pytest.raises(DomainError):
        variance_ratio([1.0], 0.0)


def test_scaled_errors_follow_the_predicted_limit():
    problem = newsvendor_exp()
    prior = PriorSpec.gamma(1.0, 1.0)
    n, replications, x = 400, 1000, LN3
    sigma = sigma_x(problem, x).sigma_x
    truth = problem.true_value(x)
    specs = [RiskSpec.mean(), RiskSpec.var(0.9), RiskSpec.cvar(0.9)]

    errors = {spec: [] for spec in specs}
    n_vars = []
    for rep in range(replications):
        post = posterior_update(prior, sample(problem.family, 1.0, n, stream(42, 'data', n, rep)))
        draws = PosteriorDraws.sample(problem, post, outer_m=2000, rng=stream(42, 'draws', n, rep))
        values = draws.values(x)
        n_vars.append(n * np.var(values))
        for spec in specs:
            errors[spec].append(np.sqrt(n) * (draws.evaluate(spec, x) - truth))

    for spec in specs:
        mean, sd = predicted_limit(spec, sigma)
        report = normality_diagnostic(errors[spec], mean, sd)
        assert abs(report.sample_mean - mean) <= 0.15 * sd
        assert report.sample_sd == pytest.approx(sd, rel=0.1)

    assert variance_ratio(n_vars, sigma) == pytest.approx(1.0, rel=0.1)


def test_var_minus_mean_matches_the_bias_term():
    problem = newsvendor_exp()
    prior = PriorSpec.gamma(1.0, 1.0)
    n, replications, x = 400, 1000, LN3
    sigma = sigma_x(problem, x).sigma_x
    var, mean = RiskSpec.var(0.9), RiskSpec.mean()

    gaps = []
    for rep in range(replications):
        post = posterior_update(prior, sample(problem.family, 1.0, n, stream(43, 'data', n, rep)))
        draws = PosteriorDraws.sample(problem, post, outer_m=2000, rng=stream(43, 'draws', n, rep))
        gaps.append(draws.evaluate(var, x) - draws.evaluate(mean, x))

    assert np.mean(gaps) == pytest.approx(bias_term(var, sigma, n), rel=0.1)
