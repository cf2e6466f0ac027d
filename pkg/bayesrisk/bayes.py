"""
Conjugate posterior updates for the four observation families.

    prior        family                 posterior
    gamma        exponential_rate       Gamma(alpha0 + n, beta0 + sum xi)
    normal       normal_known_var       N(mu_n, sigma_n^2), 1/sigma_n^2 = 1/sigma0^2 + n/sigma^2
    inv_gamma    weibull_known_shape    InvGamma(alpha0 + n, beta0 + sum xi^shape)   (on lambda)
    dirichlet    finite_discrete        Dirichlet(alpha0 + (N_1, ..., N_l))

Sufficient statistics are kept as exact rationals, so absorbing a dataset in one batch or in
any sequence of pieces gives bit-identical hyperparameters.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import stats

from .common import DataError, DomainError, InputError, MomentError
from .model import FamilyKind, ObservationFamily, as_point


class PriorKind(str, Enum):
    GAMMA = 'gamma'
    NORMAL = 'normal'
    INV_GAMMA = 'inv_gamma'
    DIRICHLET = 'dirichlet'


PAIRING = {
    PriorKind.GAMMA: FamilyKind.EXPONENTIAL_RATE,
    PriorKind.NORMAL: FamilyKind.NORMAL_KNOWN_VAR,
    PriorKind.INV_GAMMA: FamilyKind.WEIBULL_KNOWN_SHAPE,
    PriorKind.DIRICHLET: FamilyKind.FINITE_DISCRETE,
}

_PRIOR_KEYS = {
    PriorKind.GAMMA: ('alpha0', 'beta0'),
    PriorKind.NORMAL: ('mu0', 'sigma02'),
    PriorKind.INV_GAMMA: ('alpha0', 'beta0'),
    PriorKind.DIRICHLET: ('alpha0',),
}


def _positive(value, name):
    if value is None or not np.isfinite(value) or value <= 0:
        raise DomainError("Prior hyperparameter {} must be positive, got {}".format(name, value))
    return float(value)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """ Conjugate prior, paired with the observation family it is conjugate to. """

    kind: PriorKind
    family: ObservationFamily
    alpha0: object = None
    beta0: float = None
    mu0: float = None
    sigma02: float = None

    def __post_init__(self):
        try:
            kind = PriorKind(self.kind)
        except ValueError:
            raise DomainError("Unknown prior '{}'".format(self.kind))
        object.__setattr__(self, 'kind', kind)
        if self.family.kind != PAIRING[kind]:
            raise DomainError("Prior {} is not conjugate to family {}".format(kind.value, self.family.kind.value))

        if kind in (PriorKind.GAMMA, PriorKind.INV_GAMMA):
            object.__setattr__(self, 'alpha0', _positive(self.alpha0, 'alpha0'))
            object.__setattr__(self, 'beta0', _positive(self.beta0, 'beta0'))
        elif kind == PriorKind.NORMAL:
            if self.mu0 is None or not np.isfinite(self.mu0):
                raise DomainError("Prior hyperparameter mu0 must be finite")
            object.__setattr__(self, 'mu0', float(self.mu0))
            object.__setattr__(self, 'sigma02', _positive(self.sigma02, 'sigma02'))
        else:
            alpha0 = tuple(_positive(a, 'alpha0') for a in np.atleast_1d(self.alpha0))
            if len(alpha0) != self.family.dim:
                raise DomainError("Dirichlet prior needs {} components".format(self.family.dim))
            object.__setattr__(self, 'alpha0', alpha0)

    @classmethod
    def gamma(cls, alpha0, beta0, family=None):
        return cls(PriorKind.GAMMA, family or ObservationFamily.exponential_rate(), alpha0=alpha0, beta0=beta0)

    @classmethod
    def normal(cls, mu0, sigma02, family):
        return cls(PriorKind.NORMAL, family, mu0=mu0, sigma02=sigma02)

    @classmethod
    def inv_gamma(cls, alpha0, beta0, family):
        return cls(PriorKind.INV_GAMMA, family, alpha0=alpha0, beta0=beta0)

    @classmethod
    def dirichlet(cls, alpha0, family):
        return cls(PriorKind.DIRICHLET, family, alpha0=tuple(alpha0))

    @classmethod
    def from_dict(cls, data, family):
        """
        Build prior from a tagged record such as {'kind': 'gamma', 'alpha0': 2, 'beta0': 1}.

        :param data: tagged record
        :param family: observation family the prior is paired with
        :rtype: PriorSpec
        """
        data = dict(data)
        if 'kind' not in data:
            raise DomainError("Prior record needs a 'kind'")
        kind = data.pop('kind')
        try:
            allowed = _PRIOR_KEYS[PriorKind(kind)]
        except ValueError:
            raise DomainError("Unknown prior '{}'".format(kind))
        unknown = set(data) - set(allowed)
        if unknown:
            raise DomainError("Unknown key(s) for prior {}: {}".format(kind, ", ".join(sorted(unknown))))
        return cls(kind, family, **data)

    def to_dict(self):
        data = {'kind': self.kind.value}
        for key in _PRIOR_KEYS[self.kind]:
            value = getattr(self, key)
            data[key] = list(value) if isinstance(value, tuple) else value
        return data


def _exact_sum(values):
    """ Exact rational sum of floats (their denominators are all powers of two). """
    ratios = [float(v).as_integer_ratio() for v in values]
    if not ratios:
        return Fraction(0)
    den = max(d for _, d in ratios)
    return Fraction(sum(num * (den // d) for num, d in ratios), den)


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """
    Posterior after absorbing n observations.

    Holds the prior and the sufficient statistics (``total`` is sum xi, or sum xi^shape for
    Weibull data; ``counts`` are the category counts for discrete data). The hyperparameters
    are derived from them on demand.
    """

    prior: PriorSpec
    n: int = 0
    total: Fraction = Fraction(0)
    counts: tuple = field(default=None)

    def __post_init__(self):
        if self.n < 0:
            raise InputError("Observation count must be non-negative")
        if self.prior.kind == PriorKind.DIRICHLET and self.counts is None:
            object.__setattr__(self, 'counts', (0,) * self.prior.family.dim)
        object.__setattr__(self, 'total', Fraction(self.total))

    @classmethod
    def from_prior(cls, prior):
        return cls(prior)

    @property
    def kind(self):
        return self.prior.kind

    @property
    def family(self):
        return self.prior.family

    @property
    def hyperparameters(self):
        prior = self.prior
        if prior.kind in (PriorKind.GAMMA, PriorKind.INV_GAMMA):
            return {'alpha': prior.alpha0 + self.n, 'beta': float(Fraction(prior.beta0) + self.total)}
        if prior.kind == PriorKind.NORMAL:
            sigma2 = prior.family.sigma2
            precision = 1.0 / prior.sigma02 + self.n / sigma2
            sigma2_n = 1.0 / precision
            mu_n = sigma2_n * (prior.mu0 / prior.sigma02 + float(self.total) / sigma2)
            return {'mu': mu_n, 'sigma2': sigma2_n}
        return {'alpha': np.asarray(prior.alpha0) + np.asarray(self.counts, dtype=float)}

    def absorb(self, data):
        """
        Sequential update with more observations.

        :param data: observations from the paired family (category indices for discrete data)
        :raises DataError: observation outside the family support
        :rtype: PosteriorState
        """
        data = np.asarray(data, dtype=float).ravel()
        if data.size == 0:
            return self
        if not np.all(np.isfinite(data)):
            raise DataError("Observations must be finite")

        family = self.family
        if family.kind == FamilyKind.FINITE_DISCRETE:
            if np.any(data != np.round(data)) or np.any(data < 0) or np.any(data >= family.dim):
                raise DataError("Discrete observations must be category indices 0..{}".format(family.dim - 1))
            counts = np.bincount(data.astype(int), minlength=family.dim)
            new_counts = tuple(int(a + b) for a, b in zip(self.counts, counts))
            return PosteriorState(self.prior, self.n + data.size, self.total, new_counts)

        if family.kind in (FamilyKind.EXPONENTIAL_RATE, FamilyKind.WEIBULL_KNOWN_SHAPE) and np.any(data < 0):
            raise DataError("Observations of {} must be non-negative".format(family.kind.value))
        if family.kind == FamilyKind.WEIBULL_KNOWN_SHAPE:
            data = np.power(data, family.shape)
        return PosteriorState(self.prior, self.n + data.size, self.total + _exact_sum(data.tolist()), self.counts)

    def distribution(self):
        """ Posterior as a frozen scipy distribution. """
        hyper = self.hyperparameters
        if self.kind == PriorKind.GAMMA:
            return stats.gamma(hyper['alpha'], scale=1.0 / hyper['beta'])
        if self.kind == PriorKind.NORMAL:
            return stats.norm(hyper['mu'], np.sqrt(hyper['sigma2']))
        if self.kind == PriorKind.INV_GAMMA:
            return stats.invgamma(hyper['alpha'], scale=hyper['beta'])
        return stats.dirichlet(hyper['alpha'])

    def to_dict(self):
        hyper = {k: v.tolist() if isinstance(v, np.ndarray) else v for k, v in self.hyperparameters.items()}
        return {
            'kind': self.kind.value,
            'family': self.family.to_dict(),
            'prior': self.prior.to_dict(),
            'hyperparameters': hyper,
            'n': self.n,
            'total': '{}/{}'.format(self.total.numerator, self.total.denominator),
            'counts': list(self.counts) if self.counts is not None else None,
        }

    @classmethod
    def from_dict(cls, data):
        family = ObservationFamily.from_dict(data['family'])
        prior = PriorSpec.from_dict(data['prior'], family)
        counts = tuple(data['counts']) if data.get('counts') is not None else None
        return cls(prior, int(data['n']), Fraction(data['total']), counts)


def posterior_update(prior, data):
    """
    Conjugate update of a prior (or of an existing posterior) with a dataset.

    :param prior: prior or posterior state to start from
    :type prior: PriorSpec | PosteriorState
    :param data: observations of the paired family
    :rtype: PosteriorState
    """
    state = prior if isinstance(prior, PosteriorState) else PosteriorState.from_prior(prior)
    return state.absorb(data)


def posterior_sample(post, m, rng):
    """
    Draw m parameter vectors from the posterior.

    Weibull posteriors give draws of lambda = scale**shape. Dirichlet draws are normalized
    Gamma draws, InvGamma draws are reciprocal Gamma draws.

    :returns: (m, l) array, one parameter vector per row
    """
    if m < 1:
        raise InputError("Number of posterior draws must be positive")
    m = int(m)
    hyper = post.hyperparameters

    if post.kind == PriorKind.GAMMA:
        draws = rng.standard_gamma(hyper['alpha'], size=m) / hyper['beta']
    elif post.kind == PriorKind.NORMAL:
        draws = rng.normal(hyper['mu'], np.sqrt(hyper['sigma2']), size=m)
    elif post.kind == PriorKind.INV_GAMMA:
        draws = hyper['beta'] / rng.standard_gamma(hyper['alpha'], size=m)
    else:
        g = rng.standard_gamma(hyper['alpha'], size=(m, len(hyper['alpha'])))
        return g / g.sum(axis=1, keepdims=True)
    return draws.reshape(m, 1)


def posterior_moments(post):
    """
    Closed-form posterior mean vector and covariance matrix.

    :raises MomentError: InvGamma posterior with alpha <= 2 (infinite variance)
    :rtype: (numpy.ndarray, numpy.ndarray)
    """
    hyper = post.hyperparameters
    if post.kind == PriorKind.GAMMA:
        a, b = hyper['alpha'], hyper['beta']
        return np.array([a / b]), np.array([[a / b ** 2]])
    if post.kind == PriorKind.NORMAL:
        return np.array([hyper['mu']]), np.array([[hyper['sigma2']]])
    if post.kind == PriorKind.INV_GAMMA:
        a, b = hyper['alpha'], hyper['beta']
        if a <= 2:
            raise MomentError("InvGamma posterior variance needs alpha > 2, got {}".format(a))
        return np.array([b / (a - 1)]), np.array([[b ** 2 / ((a - 1) ** 2 * (a - 2))]])
    alpha = hyper['alpha']
    a0 = alpha.sum()
    mean = alpha / a0
    return mean, (np.diag(mean) - np.outer(mean, mean)) / (a0 + 1)


def a41_components(post, theta_c):
    """
    The two parts of E[||sqrt(n)(theta - theta_c)||^2] under the posterior.

    :returns: (n * ||mean - theta_c||^2, n * trace(cov))
    """
    if post.n < 1:
        raise InputError("Diagnostic needs at least one observation")
    theta_c = as_point(post.family, theta_c).theta
    mean, cov = posterior_moments(post)
    return float(post.n * np.sum((mean - theta_c) ** 2)), float(post.n * np.trace(cov))


def a41_diagnostic(post, theta_c):
    """ Posterior second moment of sqrt(n)(theta - theta_c), the boundedness diagnostic. """
    bias, variance = a41_components(post, theta_c)
    return bias + variance


def posterior_ball_mass(post, theta_c, radius, m=100000, rng=None):
    """
    Posterior probability of the ball ||theta - theta_c|| <= radius.

    One-dimensional posteriors use their CDF; Dirichlet posteriors are estimated from m
    posterior draws and need rng.
    """
    if radius <= 0:
        raise DomainError("Ball radius must be positive")
    theta_c = as_point(post.family, theta_c).theta
    if post.kind != PriorKind.DIRICHLET:
        dist = post.distribution()
        return float(dist.cdf(theta_c[0] + radius) - dist.cdf(theta_c[0] - radius))
    if rng is None:
        raise InputError("Dirichlet ball mass is estimated by sampling and needs a random stream")
    draws = posterior_sample(post, m, rng)
    return float(np.mean(np.linalg.norm(draws - theta_c, axis=1) <= radius))
