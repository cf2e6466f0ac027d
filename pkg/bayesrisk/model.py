"""
Parametric observation families P_theta of the random input xi.

Four families are supported, each with a conjugate prior in bayes.py:

- exponential_rate: xi ~ Expo(theta), theta is the RATE (mean 1/theta)
- normal_known_var: xi ~ N(theta, sigma2) with sigma2 known
- weibull_known_shape: xi ~ Weibull(scale, shape) with the shape known; the tracked
  coordinate is lambda = scale**shape, the quantity the InvGamma posterior lives on
- finite_discrete: xi takes the support value y_i with probability theta_i; observations
  are category indices 0..l-1 and theta is the full probability vector. Fisher information
  and gradients use the first l-1 ("free") coordinates, the last one being 1 - sum.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from .common import DomainError, InputError, SingularityError


class FamilyKind(str, Enum):
    EXPONENTIAL_RATE = 'exponential_rate'
    NORMAL_KNOWN_VAR = 'normal_known_var'
    WEIBULL_KNOWN_SHAPE = 'weibull_known_shape'
    FINITE_DISCRETE = 'finite_discrete'


# bounds of the compact parameter box used when none is given
POSITIVE_BOUNDS = (1e-8, 1e6)
REAL_BOUNDS = (-1e6, 1e6)

SIMPLEX_TOL = 1e-12

_FAMILY_KEYS = {
    FamilyKind.EXPONENTIAL_RATE: (),
    FamilyKind.NORMAL_KNOWN_VAR: ('sigma2',),
    FamilyKind.WEIBULL_KNOWN_SHAPE: ('shape',),
    FamilyKind.FINITE_DISCRETE: ('support',),
}


@dataclass(frozen=True)
class ObservationFamily:
    """ Observation family of xi together with its known (non-inferred) parameters. """

    kind: FamilyKind
    sigma2: float = None
    shape: float = None
    support: tuple = None

    def __post_init__(self):
        try:
            kind = FamilyKind(self.kind)
        except ValueError:
            raise DomainError("Unknown observation family '{}'".format(self.kind))
        object.__setattr__(self, 'kind', kind)

        given = {k for k in ('sigma2', 'shape', 'support') if getattr(self, k) is not None}
        extra = given - set(_FAMILY_KEYS[kind])
        if extra:
            raise DomainError("Family {} takes no parameter(s) {}".format(kind.value, ", ".join(sorted(extra))))

        if kind == FamilyKind.NORMAL_KNOWN_VAR:
            if self.sigma2 is None or not np.isfinite(self.sigma2) or self.sigma2 <= 0:
                raise DomainError("normal_known_var needs sigma2 > 0")
            object.__setattr__(self, 'sigma2', float(self.sigma2))
        elif kind == FamilyKind.WEIBULL_KNOWN_SHAPE:
            if self.shape is None or not np.isfinite(self.shape) or self.shape <= 0:
                raise DomainError("weibull_known_shape needs shape > 0")
            object.__setattr__(self, 'shape', float(self.shape))
        elif kind == FamilyKind.FINITE_DISCRETE:
            if self.support is None:
                raise DomainError("finite_discrete needs a support")
            support = tuple(float(y) for y in self.support)
            if len(support) < 2:
                raise DomainError("finite_discrete support needs at least two values")
            if any(b <= a for a, b in zip(support, support[1:])):
                raise DomainError("finite_discrete support values must be distinct and sorted")
            object.__setattr__(self, 'support', support)

    @classmethod
    def exponential_rate(cls):
        return cls(FamilyKind.EXPONENTIAL_RATE)

    @classmethod
    def normal_known_var(cls, sigma2):
        return cls(FamilyKind.NORMAL_KNOWN_VAR, sigma2=sigma2)

    @classmethod
    def weibull_known_shape(cls, shape):
        return cls(FamilyKind.WEIBULL_KNOWN_SHAPE, shape=shape)

    @classmethod
    def finite_discrete(cls, support):
        return cls(FamilyKind.FINITE_DISCRETE, support=tuple(support))

    @classmethod
    def from_dict(cls, data):
        """
        Build family from a tagged record such as {'kind': 'normal_known_var', 'sigma2': 4.0}.

        :param data: tagged record
        :type data: dict
        :rtype: ObservationFamily
        """
        data = dict(data)
        if 'kind' not in data:
            raise DomainError("Family record needs a 'kind'")
        kind = data.pop('kind')
        try:
            allowed = _FAMILY_KEYS[FamilyKind(kind)]
        except ValueError:
            raise DomainError("Unknown observation family '{}'".format(kind))
        unknown = set(data) - set(allowed)
        if unknown:
            raise DomainError("Unknown key(s) for family {}: {}".format(kind, ", ".join(sorted(unknown))))
        return cls(kind, **data)

    def to_dict(self):
        data = {'kind': self.kind.value}
        for key in _FAMILY_KEYS[self.kind]:
            value = getattr(self, key)
            data[key] = list(value) if isinstance(value, tuple) else value
        return data

    @property
    def dim(self):
        """ Length l of the parameter vector. """
        return len(self.support) if self.kind == FamilyKind.FINITE_DISCRETE else 1

    @property
    def free_dim(self):
        """ Number of free coordinates (l - 1 on the simplex). """
        return self.dim - 1 if self.kind == FamilyKind.FINITE_DISCRETE else 1

    @property
    def is_discrete(self):
        return self.kind == FamilyKind.FINITE_DISCRETE

    def default_bounds(self):
        if self.kind == FamilyKind.FINITE_DISCRETE:
            return np.array([(0.0, 1.0)] * self.dim)
        if self.kind == FamilyKind.NORMAL_KNOWN_VAR:
            return np.array([REAL_BOUNDS])
        return np.array([POSITIVE_BOUNDS])

    def to_free(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta[..., :-1] if self.is_discrete else theta

    def from_free(self, free):
        free = np.asarray(free, dtype=float)
        if not self.is_discrete:
            return free
        last = 1.0 - free.sum(axis=-1, keepdims=True)
        return np.concatenate([free, last], axis=-1)


@dataclass(frozen=True, eq=False)
class ParamPoint:
    """ A point theta of the compact parameter space, with its per-coordinate box. """

    theta: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.array(self.theta, dtype=float))
        bounds = np.array(self.bounds, dtype=float).reshape(-1, 2)
        if theta.ndim != 1 or bounds.shape[0] != theta.shape[0]:
            raise DomainError("Parameter point and bounds differ in length")
        if not np.all(np.isfinite(theta)):
            raise DomainError("Parameter point must be finite")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise DomainError("Parameter bounds must be ordered")
        if np.any(theta < bounds[:, 0]) or np.any(theta > bounds[:, 1]):
            raise DomainError("Parameter {} outside its bounds".format(theta.tolist()))
        theta.flags.writeable = False
        bounds.flags.writeable = False
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'bounds', bounds)

    def __len__(self):
        return len(self.theta)

    def is_interior(self):
        return bool(np.all(self.theta > self.bounds[:, 0]) and np.all(self.theta < self.bounds[:, 1]))


def make_point(family, theta, bounds=None):
    """
    Validated parameter point of a family.

    :param family: observation family
    :type family: ObservationFamily
    :param theta: parameter vector (scalar allowed for one-dimensional families)
    :param bounds: per-coordinate (lo, hi) pairs, defaults to the family's compact box
    :rtype: ParamPoint
    """
    point = ParamPoint(theta, family.default_bounds() if bounds is None else bounds)
    if len(point) != family.dim:
        raise DomainError("Family {} needs a parameter of length {}".format(family.kind.value, family.dim))
    if family.kind in (FamilyKind.EXPONENTIAL_RATE, FamilyKind.WEIBULL_KNOWN_SHAPE) and point.theta[0] <= 0:
        raise DomainError("Parameter of {} must be positive".format(family.kind.value))
    if family.is_discrete:
        if np.any(point.theta < 0) or abs(point.theta.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError("Parameter of finite_discrete must lie on the probability simplex")
    return point


def as_point(family, theta):
    if isinstance(theta, ParamPoint):
        return make_point(family, theta.theta, theta.bounds)
    return make_point(family, theta)


def require_interior(family, point):
    if not point.is_interior():
        raise SingularityError("Parameter {} is on the boundary of its box".format(point.theta.tolist()))
    if family.is_discrete and np.any(point.theta <= 0):
        raise SingularityError("Parameter {} is on the boundary of the simplex".format(point.theta.tolist()))


def _weibull_scale(family, lam):
    return np.power(lam, 1.0 / family.shape)


def logpdf(family, theta, xi):
    """
    Log density (log mass for finite_discrete) of P_theta at xi.

    Points outside the support give -inf.

    :param family: observation family
    :param theta: parameter point
    :param xi: observation(s); category indices for finite_discrete
    :returns: float for scalar xi, array otherwise
    """
    theta = as_point(family, theta).theta
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))

    if family.kind == FamilyKind.EXPONENTIAL_RATE:
        out = stats.expon.logpdf(xi, scale=1.0 / theta[0])
    elif family.kind == FamilyKind.NORMAL_KNOWN_VAR:
        out = stats.norm.logpdf(xi, loc=theta[0], scale=np.sqrt(family.sigma2))
    elif family.kind == FamilyKind.WEIBULL_KNOWN_SHAPE:
        out = stats.weibull_min.logpdf(xi, family.shape, scale=_weibull_scale(family, theta[0]))
    else:
        valid = (xi == np.round(xi)) & (xi >= 0) & (xi < family.dim)
        out = np.full(xi.shape, -np.inf)
        with np.errstate(divide='ignore'):
            out[valid] = np.log(theta[xi[valid].astype(int)])

    return float(out[0]) if scalar else out


def sample(family, theta, n, rng):
    """
    Draw n i.i.d. observations from P_theta.

    :param n: number of draws (0 gives an empty vector)
    :param rng: random stream
    :type rng: numpy.random.Generator
    :rtype: numpy.ndarray
    """
    theta = as_point(family, theta).theta
    if n < 0:
        raise InputError("Sample size must be non-negative")
    n = int(n)

    if family.is_discrete:
        if n == 0:
            return np.empty(0, dtype=int)
        return rng.choice(family.dim, size=n, p=theta)
    if n == 0:
        return np.empty(0)
    if family.kind == FamilyKind.EXPONENTIAL_RATE:
        return stats.expon.rvs(scale=1.0 / theta[0], size=n, random_state=rng)
    if family.kind == FamilyKind.NORMAL_KNOWN_VAR:
        return stats.norm.rvs(loc=theta[0], scale=np.sqrt(family.sigma2), size=n, random_state=rng)
    return stats.weibull_min.rvs(family.shape, scale=_weibull_scale(family, theta[0]), size=n, random_state=rng)


def quantile(family, thetas, u):
    """
    Inverse-CDF transform of common uniforms for a batch of parameters.

    Row j of the result holds F^{-1}_{theta_j}(u), so every parameter sees the same
    underlying uniforms (common random numbers).

    :param thetas: (m, l) array of parameter vectors
    :param u: uniforms in [0, 1)
    :returns: (m, len(u)) array of observations
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    u = np.asarray(u, dtype=float).ravel()

    if family.is_discrete:
        cum = np.cumsum(thetas, axis=1)
        idx = (u[None, None, :] >= cum[:, :, None]).sum(axis=1)
        return np.minimum(idx, family.dim - 1)

    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).eps)[None, :]
    col = thetas[:, :1]
    if family.kind == FamilyKind.EXPONENTIAL_RATE:
        return stats.expon.ppf(u, scale=1.0 / col)
    if family.kind == FamilyKind.NORMAL_KNOWN_VAR:
        return stats.norm.ppf(u, loc=col, scale=np.sqrt(family.sigma2))
    return stats.weibull_min.ppf(u, family.shape, scale=_weibull_scale(family, col))


def score(family, theta, xi):
    """
    Score d/dtheta log p(theta, xi) in free coordinates.

    :returns: (N, free_dim) array, one row per observation
    """
    point = as_point(family, theta)
    require_interior(family, point)
    theta = point.theta
    xi = np.atleast_1d(np.asarray(xi, dtype=float))

    if family.kind == FamilyKind.EXPONENTIAL_RATE:
        out = 1.0 / theta[0] - xi
    elif family.kind == FamilyKind.NORMAL_KNOWN_VAR:
        out = (xi - theta[0]) / family.sigma2
    elif family.kind == FamilyKind.WEIBULL_KNOWN_SHAPE:
        lam = theta[0]
        out = -1.0 / lam + np.power(xi, family.shape) / lam ** 2
    else:
        idx = xi.astype(int)
        onehot = (idx[:, None] == np.arange(family.dim)[None, :]).astype(float)
        return onehot[:, :-1] / theta[:-1] - onehot[:, -1:] / theta[-1]
    return out.reshape(-1, 1)


def fisher_information(family, theta):
    """
    Fisher information I(theta) carried by one observation, in free coordinates.

    :raises SingularityError: theta on the boundary of its box or of the simplex
    :rtype: numpy.ndarray
    """
    point = as_point(family, theta)
    require_interior(family, point)
    theta = point.theta

    if family.kind in (FamilyKind.EXPONENTIAL_RATE, FamilyKind.WEIBULL_KNOWN_SHAPE):
        return np.array([[1.0 / theta[0] ** 2]])
    if family.kind == FamilyKind.NORMAL_KNOWN_VAR:
        return np.array([[1.0 / family.sigma2]])
    return np.diag(1.0 / theta[:-1]) + 1.0 / theta[-1]
