"""
Law-invariant risk functionals applied to a vector of posterior samples of H(x, theta).

Each sample vector is treated as the empirical distribution putting mass 1/N on every entry:

- VaR is the left-continuous quantile inf{t: F(t) >= alpha}, i.e. the order statistic
  ceil(alpha * N); alpha = 1 gives the sample maximum.
- CVaR is the exact integral of that quantile function over (alpha, 1] divided by
  (1 - alpha), so the boundary order statistic gets a fractional weight.
- mean-variance uses the divisor-N variance.
"""

import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import stats

from .common import DomainError, InputError


class RiskKind(str, Enum):
    MEAN = 'mean'
    MEAN_VARIANCE = 'mean_variance'
    VAR = 'var'
    CVAR = 'cvar'


_SPEC_RE = re.compile(r'^\s*(?P<kind>[a-z_]+)\s*(?::\s*(?P<key>[a-z]+)\s*=\s*(?P<value>[^\s]+))?\s*$')


@dataclass(frozen=True)
class RiskSpec:
    """ Which risk functional to apply: mean, mean_variance(w), var(alpha) or cvar(alpha). """

    kind: RiskKind
    w: float = None
    alpha: float = None

    def __post_init__(self):
        try:
            kind = RiskKind(self.kind)
        except ValueError:
            raise InputError("Unknown risk functional '{}'".format(self.kind))
        object.__setattr__(self, 'kind', kind)

        if kind == RiskKind.MEAN_VARIANCE:
            if self.w is None or not np.isfinite(self.w) or self.w < 0:
                raise DomainError("mean_variance weight w must be >= 0")
            object.__setattr__(self, 'w', float(self.w))
        elif kind == RiskKind.VAR:
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise DomainError("VaR level alpha must be in (0, 1]")
            object.__setattr__(self, 'alpha', float(self.alpha))
        elif kind == RiskKind.CVAR:
            if self.alpha is None or not 0 < self.alpha < 1:
                raise DomainError("CVaR level alpha must be in (0, 1)")
            object.__setattr__(self, 'alpha', float(self.alpha))
        if kind != RiskKind.MEAN_VARIANCE and self.w is not None:
            raise InputError("Only mean_variance takes a weight w")
        if kind not in (RiskKind.VAR, RiskKind.CVAR) and self.alpha is not None:
            raise InputError("Only var and cvar take a level alpha")

    @classmethod
    def mean(cls):
        return cls(RiskKind.MEAN)

    @classmethod
    def mean_variance(cls, w):
        return cls(RiskKind.MEAN_VARIANCE, w=w)

    @classmethod
    def var(cls, alpha):
        return cls(RiskKind.VAR, alpha=alpha)

    @classmethod
    def cvar(cls, alpha):
        return cls(RiskKind.CVAR, alpha=alpha)

    @classmethod
    def parse(cls, text):
        """
        Parse config syntax: ``mean``, ``mean_variance:w=0.5``, ``var:alpha=0.95``, ``cvar:alpha=0.95``.

        :rtype: RiskSpec
        """
        match = _SPEC_RE.match(str(text))
        if not match:
            raise InputError("Cannot parse risk spec '{}'".format(text))
        kind, key, value = match.group('kind', 'key', 'value')
        if kind not in {k.value for k in RiskKind}:
            raise InputError("Unknown risk functional '{}'".format(kind))
        expected = {'mean_variance': 'w', 'var': 'alpha', 'cvar': 'alpha'}.get(kind)
        if key != expected:
            if expected is None:
                raise InputError("Risk spec '{}' takes no parameter".format(kind))
            raise InputError("Risk spec '{}' needs parameter '{}'".format(kind, expected))
        if key is None:
            return cls(kind)
        try:
            number = float(value)
        except ValueError:
            raise InputError("Invalid number '{}' in risk spec '{}'".format(value, text))
        return cls(kind, **{key: number})

    def __str__(self):
        if self.kind == RiskKind.MEAN:
            return 'mean'
        if self.kind == RiskKind.MEAN_VARIANCE:
            return 'mean_variance:w={:g}'.format(self.w)
        return '{}:alpha={:g}'.format(self.kind.value, self.alpha)

    @property
    def label(self):
        return str(self)


def _samples(samples):
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("Risk functionals need a nonempty sample vector")
    return arr


def var_alpha(samples, alpha):
    """
    Empirical value-at-risk, the ceil(alpha * N)-th order statistic.

    :param samples: nonempty sample vector
    :param alpha: level in (0, 1]; 1 gives the maximum
    :rtype: float
    """
    x = _samples(samples)
    if not 0 < alpha <= 1:
        raise DomainError("VaR level alpha must be in (0, 1]")
    if alpha == 1:
        return float(np.max(x))
    # alpha as the decimal it was written as, so 0.1 * 10 is exactly 1
    k = min(max(math.ceil(Fraction(repr(float(alpha))) * x.size), 1), x.size)
    return float(np.partition(x, k - 1)[k - 1])


def cvar_alpha(samples, alpha):
    """
    Empirical conditional value-at-risk, the integral of the empirical quantile over (alpha, 1].

    :param samples: nonempty sample vector
    :param alpha: level in (0, 1)
    :rtype: float
    """
    x = np.sort(_samples(samples))
    if not 0 < alpha < 1:
        raise DomainError("CVaR level alpha must be in (0, 1)")
    n = x.size
    upper = np.arange(1, n + 1) / n
    lower = np.maximum(np.arange(n) / n, alpha)
    weights = np.clip(upper - lower, 0.0, None)
    return float(np.dot(weights, x) / weights.sum())


def mean_variance(samples, w):
    """ Sample mean plus w times the divisor-N sample variance. """
    x = _samples(samples)
    if w < 0:
        raise DomainError("mean_variance weight w must be >= 0")
    mean = np.mean(x)
    if w == 0:
        return float(mean)
    return float(mean + w * np.var(x))


def normal_var(mu, sigma, alpha):
    """ VaR of N(mu, sigma^2): mu + sigma * Phi^{-1}(alpha). """
    if not 0 < alpha < 1:
        raise DomainError("Normal VaR level alpha must be in (0, 1)")
    if sigma < 0:
        raise DomainError("Standard deviation must be non-negative")
    if sigma == 0:
        return float(mu)
    return float(mu + sigma * stats.norm.ppf(alpha))


def normal_cvar(mu, sigma, alpha):
    """ CVaR of N(mu, sigma^2): mu + sigma * phi(Phi^{-1}(alpha)) / (1 - alpha). """
    if not 0 < alpha < 1:
        raise DomainError("Normal CVaR level alpha must be in (0, 1)")
    if sigma < 0:
        raise DomainError("Standard deviation must be non-negative")
    if sigma == 0:
        return float(mu)
    return float(mu + sigma * stats.norm.pdf(stats.norm.ppf(alpha)) / (1.0 - alpha))


def apply_risk(spec, samples):
    """
    Apply a risk functional to a sample vector.

    :type spec: RiskSpec
    :param samples: nonempty sample vector
    :rtype: float
    """
    if spec.kind == RiskKind.MEAN:
        return float(np.mean(_samples(samples)))
    if spec.kind == RiskKind.MEAN_VARIANCE:
        return mean_variance(samples, spec.w)
    if spec.kind == RiskKind.VAR:
        return var_alpha(samples, spec.alpha)
    return cvar_alpha(samples, spec.alpha)
