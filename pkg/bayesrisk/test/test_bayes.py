import json
from fractions import Fraction

import numpy as np
import pytest

from ..bayes import (PosteriorState, PriorSpec, a41_components, a41_diagnostic, posterior_ball_mass,
                     posterior_moments, posterior_sample, posterior_update)
from ..common import DataError, DomainError, InputError, MomentError
from ..model import ObservationFamily, sample
from ..utils import stream

EXPONENTIAL = ObservationFamily.exponential_rate()
NORMAL = ObservationFamily.normal_known_var(4.0)
WEIBULL = ObservationFamily.weibull_known_shape(2.0)
TWO_POINT = ObservationFamily.finite_discrete([0, 1])


def test_gamma_update():
    post = posterior_update(PriorSpec.gamma(2, 1), [1.0, 2.0, 3.0, 2.0, 2.0])
    assert post.n == 5
    assert post.hyperparameters == {'alpha': 7.0, 'beta': 11.0}


def test_dirichlet_update():
    data = [0] * 3 + [1] * 7
    post = posterior_update(PriorSpec.dirichlet((1, 1), TWO_POINT), data)
    assert post.hyperparameters['alpha'].tolist() == [4.0, 8.0]
    assert post.counts == (3, 7)


def test_inv_gamma_update_on_lambda():
    post = posterior_update(PriorSpec.inv_gamma(3, 2, WEIBULL), [1.0, 2.0])
    # sum of xi^shape = 1 + 4
    assert post.hyperparameters == {'alpha': 5.0, 'beta': 7.0}


def test_normal_update():
    data = [1.0, 2.0, 4.5]
    post = posterior_update(PriorSpec.normal(0.0, 1.0, NORMAL), data)
    precision = 1.0 / 1.0 + 3 / 4.0
    assert post.hyperparameters['sigma2'] == pytest.approx(1.0 / precision, rel=1e-15)
    assert post.hyperparameters['mu'] == pytest.approx((sum(data) / 4.0) / precision, rel=1e-15)


def test_empty_update_keeps_prior():
    prior = PriorSpec.gamma(2.5, 0.5)
    post = posterior_update(prior, [])
    assert post.n == 0
    assert post.hyperparameters == {'alpha': 2.5, 'beta': 0.5}

    normal = posterior_update(PriorSpec.normal(1.0, 0.04, NORMAL), np.array([]))
    assert normal.hyperparameters == {'mu': pytest.approx(1.0), 'sigma2': pytest.approx(0.04)}


def test_batch_and_sequential_updates_agree():
    data = sample(EXPONENTIAL, 1.3, 1000, stream(3))
    prior = PriorSpec.gamma(2, 1)
    batch = posterior_update(prior, data)
    sequential = posterior_update(prior, data[:17])
    for chunk in np.array_split(data[17:], 9):
        sequential = sequential.absorb(chunk)
    reordered = posterior_update(prior, data[::-1])
    assert batch.hyperparameters == sequential.hyperparameters == reordered.hyperparameters
    assert batch.total == sequential.total == reordered.total

    counts = sample(TWO_POINT, (0.4, 0.6), 200, stream(4))
    d_batch = posterior_update(PriorSpec.dirichlet((1, 1), TWO_POINT), counts)
    d_seq = posterior_update(posterior_update(PriorSpec.dirichlet((1, 1), TWO_POINT), counts[:50]), counts[50:])
    assert d_batch.counts == d_seq.counts


def test_invalid_observations():
    with pytest.raises(DataError, match='non-negative'):
        posterior_update(PriorSpec.gamma(1, 1), [1.0, -2.0])
    with pytest.raises(DataError, match='category'):
        posterior_update(PriorSpec.dirichlet((1, 1), TWO_POINT), [0, 2])
    with pytest.raises(DataError, match='finite'):
        posterior_update(PriorSpec.normal(0, 1, NORMAL), [np.nan])


def test_prior_validation():
    with pytest.raises(DomainError, match='not conjugate'):
        PriorSpec.gamma(1, 1, family=NORMAL)
    with pytest.raises(DomainError, match='positive'):
        PriorSpec.gamma(0, 1)
    with pytest.raises(DomainError, match='positive'):
        PriorSpec.normal(0, -1, NORMAL)
    with pytest.raises(DomainError, match='components'):
        PriorSpec.dirichlet((1, 1, 1), TWO_POINT)
    with pytest.raises(DomainError, match='Unknown key'):
        PriorSpec.from_dict({'kind': 'gamma', 'alpha0': 1, 'beta0': 1, 'mu0': 0}, EXPONENTIAL)


def test_posterior_sample_means():
    post = PosteriorState.from_prior(PriorSpec.gamma(7, 11))
    draws = posterior_sample(post, 10 ** 6, stream(5))
    assert draws.shape == (10 ** 6, 1)
    assert abs(draws.mean() - 7 / 11) < 0.003

    dirichlet = PosteriorState.from_prior(PriorSpec.dirichlet((4, 8), TWO_POINT))
    d = posterior_sample(dirichlet, 10 ** 6, stream(6))
    assert d.shape == (10 ** 6, 2)
    assert np.allclose(d.sum(axis=1), 1.0)
    assert abs(d[:, 0].mean() - 1 / 3) < 0.002

    inv_gamma = PosteriorState.from_prior(PriorSpec.inv_gamma(5, 8, WEIBULL))
    lam = posterior_sample(inv_gamma, 10 ** 6, stream(7))
    assert abs(lam.mean() - 8 / 4) < 0.01


def test_posterior_sample_degenerate_normal():
    data = sample(NORMAL, 1.0, 10 ** 6, stream(8))
    post = posterior_update(PriorSpec.normal(0.0, 1.0, NORMAL), data)
    draws = posterior_sample(post, 1000, stream(9))
    assert np.all(np.abs(draws - post.hyperparameters['mu']) < 0.02)


def test_posterior_sample_reproducible():
    post = PosteriorState.from_prior(PriorSpec.gamma(7, 11))
    assert np.array_equal(posterior_sample(post, 10, stream(1, 'draws', 5)),
                          posterior_sample(post, 10, stream(1, 'draws', 5)))
    with pytest.raises(InputError):
        posterior_sample(post, 0, stream(1))


def test_posterior_moments():
    mean, cov = posterior_moments(PosteriorState.from_prior(PriorSpec.gamma(7, 11)))
    assert mean == pytest.approx([7 / 11])
    np.testing.assert_allclose(cov, [[7 / 121]])

    mean, cov = posterior_moments(PosteriorState.from_prior(PriorSpec.normal(1.0, 0.04, NORMAL)))
    assert mean == pytest.approx([1.0])
    np.testing.assert_allclose(cov, [[0.04]])

    mean, cov = posterior_moments(PosteriorState.from_prior(PriorSpec.dirichlet((4, 8), TWO_POINT)))
    assert mean == pytest.approx([1 / 3, 2 / 3])
    assert cov[0, 0] == pytest.approx((1 / 3) * (2 / 3) / 13)

    with pytest.raises(MomentError):
        posterior_moments(PosteriorState.from_prior(PriorSpec.inv_gamma(2, 1, WEIBULL)))


def test_a41_normal_variance_part():
    n = 10 ** 4
    data = sample(NORMAL, 0.5, n, stream(10))
    post = posterior_update(PriorSpec.normal(0.0, 2.0, NORMAL), data)
    bias, variance = a41_components(post, 0.5)
    assert variance == pytest.approx(n / (1 / 2.0 + n / 4.0), rel=1e-12)
    assert a41_diagnostic(post, 0.5) == pytest.approx(bias + variance)


@pytest.mark.parametrize("family, prior, theta_c, limit", [
    (EXPONENTIAL, PriorSpec.gamma(2, 1), 1.5, 1.5 ** 2),
    (NORMAL, PriorSpec.normal(0.0, 1.0, NORMAL), 0.5, 4.0),
    (WEIBULL, PriorSpec.inv_gamma(3, 1, WEIBULL), 2.0, 2.0 ** 2),
    (TWO_POINT, PriorSpec.dirichlet((1, 1), TWO_POINT), (0.3, 0.7), 2 * 0.3 * 0.7),
])
def test_a41_variance_limits(family, prior, theta_c, limit):
    n = 10 ** 4
    parts = []
    for rep in range(50):
        data = sample(family, theta_c, n, stream(11, family.kind.value, rep))
        parts.append(a41_components(posterior_update(prior, data), theta_c)[1])
    assert np.mean(parts) == pytest.approx(limit, rel=0.05)


def test_a41_needs_data():
    with pytest.raises(InputError):
        a41_components(PosteriorState.from_prior(PriorSpec.gamma(2, 1)), 1.0)


def test_posterior_ball_mass_concentrates():
    prior = PriorSpec.gamma(2, 1)
    medians = []
    for n in (10, 100, 1000, 10000):
        masses = [posterior_ball_mass(posterior_update(prior, sample(EXPONENTIAL, 1.0, n, stream(12, n, rep))), 1.0, 0.2)
                  for rep in range(100)]
        medians.append(np.median(masses))
    assert all(b >= a - 1e-9 for a, b in zip(medians, medians[1:]))
    assert medians[-1] > 0.999

    dirichlet = posterior_update(PriorSpec.dirichlet((1, 1), TWO_POINT), sample(TWO_POINT, (0.3, 0.7), 5000, stream(13)))
    assert posterior_ball_mass(dirichlet, (0.3, 0.7), 0.05, m=10 ** 4, rng=stream(14)) > 0.95
    with pytest.raises(InputError):
        posterior_ball_mass(dirichlet, (0.3, 0.7), 0.05)
    with pytest.raises(DomainError):
        posterior_ball_mass(dirichlet, (0.3, 0.7), 0.0, rng=stream(14))


def test_posterior_checkpoint_record():
    data = sample(WEIBULL, 2.0, 100, stream(15))
    post = posterior_update(PriorSpec.inv_gamma(3, 1, WEIBULL), data)
    record = json.loads(json.dumps(post.to_dict()))
    assert record['kind'] == 'inv_gamma'
    assert record['n'] == 100
    restored = PosteriorState.from_dict(record)
    assert restored.hyperparameters == post.hyperparameters
    assert restored.total == post.total
    assert isinstance(restored.total, Fraction)


def test_posterior_mean_clt():
    n, replications = 400, 1000
    prior = PriorSpec.gamma(1, 1)
    scaled = []
    for rep in range(replications):
        post = posterior_update(prior, sample(EXPONENTIAL, 1.0, n, stream(16, n, rep)))
        scaled.append(np.sqrt(n) * (posterior_moments(post)[0][0] - 1.0))
    # limit sd is sqrt(I^-1) = theta_c
    assert abs(np.mean(scaled)) <= 0.15
    assert np.std(scaled, ddof=1) == pytest.approx(1.0, rel=0.1)
