"""
Decision problems and the Monte Carlo BRO objective.

A problem bundles the cost kernel h(x, xi), the observation family of xi, the decision box and
(optionally) closed forms of H(x, theta) = E_theta[h(x, xi)] and of its theta-gradient.
Conventions for the callables:

- ``h(x, xi)``: x is a (d,) vector, xi an array of any shape; returns an array shaped like xi
- ``H(x, thetas)``: thetas is an (m, l) array of parameters; returns an (m,) array
- ``grad_H(x, theta)``: theta is an (l,) vector; returns the gradient in free coordinates

Without a closed form, H is an inner Monte Carlo average over common uniforms pushed through
the family quantile function, so every parameter draw sees the same inner randomness.
"""

import functools
import inspect
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .bayes import posterior_sample
from .common import (ConfigError, DomainError, InputError, DEFAULT_INNER_M, DEFAULT_OUTER_M, GRAD_STEP,
                     MC_GRAD_STEP)
from .model import ObservationFamily, as_point, quantile, require_interior
from .risk import apply_risk
from .utils import as_box


@dataclass(frozen=True, eq=False)
class Problem:
    """ A decision problem min_x H(x, theta) over a box, with its ground-truth parameter. """

    name: str
    family: ObservationFamily
    box: np.ndarray
    h: object
    theta_c: object
    H: object = None
    grad_H: object = None
    H_true: object = None
    x_star: np.ndarray = None
    unique_optimum: bool = True
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'box', as_box(self.box))
        object.__setattr__(self, 'theta_c', as_point(self.family, self.theta_c))
        if self.H_true is None and self.H is not None:
            object.__setattr__(self, 'H_true', self.H)
        if self.x_star is not None:
            object.__setattr__(self, 'x_star', np.atleast_1d(np.asarray(self.x_star, dtype=float)))

    @property
    def d(self):
        return self.box.shape[0]

    def check_x(self, x):
        """ Decision as a (d,) vector, checked against the box. """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.d,):
            raise DomainError("Decision needs {} coordinate(s), got {}".format(self.d, x.shape))
        if np.any(x < self.box[:, 0]) or np.any(x > self.box[:, 1]):
            raise DomainError("Decision {} outside the box".format(x.tolist()))
        return x

    def without_analytic(self):
        """ Same problem evaluated through inner Monte Carlo (closed forms kept only as ground truth). """
        return replace(self, H=None, grad_H=None, H_true=self.H_true)

    def true_value(self, x):
        """ H(x, theta_c) from the closed form. """
        if self.H_true is None:
            raise InputError("Problem {} has no closed form for H".format(self.name))
        x = self.check_x(x)
        return float(self.H_true(x, self.theta_c.theta[None, :])[0])


def _mc_values(problem, x, thetas, u):
    xi = quantile(problem.family, thetas, u)
    return np.mean(problem.h(x, xi), axis=1)


def H_eval(problem, x, theta, inner_m=DEFAULT_INNER_M, rng=None):
    """
    H(x, theta): the closed form when available, otherwise an inner Monte Carlo average.

    :param problem: decision problem
    :param x: decision in the box
    :param theta: parameter point
    :param inner_m: inner sample size of the Monte Carlo path
    :param rng: random stream, required on the Monte Carlo path
    :rtype: float
    """
    x = problem.check_x(x)
    theta = as_point(problem.family, theta).theta
    if problem.H is not None:
        return float(problem.H(x, theta[None, :])[0])
    if rng is None:
        raise InputError("Monte Carlo evaluation of H needs a random stream")
    if inner_m < 1:
        raise InputError("Inner sample size must be positive")
    return float(_mc_values(problem, x, theta[None, :], rng.random(int(inner_m)))[0])


def grad_H_theta(problem, x, theta, step=None, inner_m=DEFAULT_INNER_M, rng=None):
    """
    Gradient of H(x, .) at theta, in free coordinates.

    Uses the closed-form gradient when the problem has one, otherwise central differences
    with relative step ``step`` (1e-5 on closed-form H, 1e-3 on Monte Carlo H, where both
    sides of every difference share the same inner uniforms).

    :raises SingularityError: theta on the boundary of the parameter space
    :rtype: numpy.ndarray
    """
    family = problem.family
    point = as_point(family, theta)
    require_interior(family, point)
    x = problem.check_x(x)
    if problem.grad_H is not None:
        return np.atleast_1d(np.asarray(problem.grad_H(x, point.theta), dtype=float))

    if problem.H is not None:
        step = GRAD_STEP if step is None else step
        evaluate = functools.partial(problem.H, x)
    else:
        if rng is None:
            raise InputError("Monte Carlo gradient of H needs a random stream")
        step = MC_GRAD_STEP if step is None else step
        evaluate = functools.partial(_mc_values, problem, x, u=rng.random(int(inner_m)))

    free = family.to_free(point.theta)
    lo, hi = family.to_free(point.bounds[:, 0]), family.to_free(point.bounds[:, 1])
    widths = step * np.maximum(np.abs(free), 1.0)
    # keep both sides inside the parameter box (and the simplex)
    room = np.minimum(free - lo, hi - free)
    if family.is_discrete:
        room = np.minimum(room, point.theta[-1])
    widths = np.minimum(widths, 0.5 * room)

    k = free.size
    shifts = np.diag(widths)
    rows = family.from_free(np.vstack([free + shifts, free - shifts]))
    values = np.asarray(evaluate(rows), dtype=float)
    return (values[:k] - values[k:]) / (2.0 * widths)


class PosteriorDraws:
    """
    A fixed set of posterior draws (plus common inner uniforms when H is Monte Carlo).

    Every evaluation on the same draw set is deterministic, which is what the optimizer needs
    (sample-path optimization) and lets several risk specs share one set of H values.
    """

    def __init__(self, problem, thetas, u=None):
        self.problem = problem
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if problem.H is None and u is None:
            raise InputError("Monte Carlo H needs inner uniforms")
        self.u = u

    @classmethod
    def sample(cls, problem, post, outer_m=DEFAULT_OUTER_M, inner_m=DEFAULT_INNER_M, rng=None):
        """
        Draw outer_m parameters from the posterior, then the inner uniforms if needed.

        :rtype: PosteriorDraws
        """
        if rng is None:
            raise InputError("Posterior draws need a random stream")
        if inner_m < 1:
            raise InputError("Inner sample size must be positive")
        thetas = posterior_sample(post, outer_m, rng)
        u = rng.random(int(inner_m)) if problem.H is None else None
        return cls(problem, thetas, u)

    def __len__(self):
        return self.thetas.shape[0]

    def values(self, x):
        """ Vector of H(x, theta_j) over the draw set. """
        x = self.problem.check_x(x)
        if self.problem.H is not None:
            return np.asarray(self.problem.H(x, self.thetas), dtype=float)
        return _mc_values(self.problem, x, self.thetas, self.u)

    def evaluate(self, spec, x):
        return apply_risk(spec, self.values(x))

    def objective(self, spec):
        """ x -> rho[H(x, theta)] on this draw set. """
        return functools.partial(self.evaluate, spec)


def bro_objective(problem, spec, post, x, outer_m=DEFAULT_OUTER_M, inner_m=DEFAULT_INNER_M, rng=None):
    """
    Monte Carlo BRO objective rho_{P_n}[H(x, theta)].

    VaR with alpha = 1 gives the maximum of H over the draw set, an inner approximation of
    the worst case over the parameter space.

    :param problem: decision problem
    :param spec: risk functional
    :param post: posterior state
    :param x: decision in the box
    :param rng: random stream
    :rtype: float
    """
    problem.check_x(x)
    return PosteriorDraws.sample(problem, post, outer_m, inner_m, rng).evaluate(spec, x)


def _family(family, default):
    if family is None:
        return default
    if isinstance(family, dict):
        family = ObservationFamily.from_dict(family)
    if family.kind != default.kind:
        raise DomainError("Problem needs a {} family, got {}".format(default.kind.value, family.kind.value))
    return family


def _finish(problem, analytic):
    return problem if analytic else problem.without_analytic()


def newsvendor_exp(c=1.0, p=3.0, theta_c=1.0, x_min=0.0, x_max=4.0, family=None, analytic=True):
    """
    Newsvendor with exponential demand of rate theta: h(x, xi) = c x - p min(x, xi).

    H(x, theta) = c x - p (1 - exp(-theta x)) / theta, minimized at x* = ln(p/c) / theta.
    """
    if c <= 0 or p <= 0:
        raise DomainError("Newsvendor cost c and price p must be positive")
    family = _family(family, ObservationFamily.exponential_rate())

    def h(x, xi):
        return c * x[0] - p * np.minimum(x[0], xi)

    def H(x, thetas):
        th = thetas[:, 0]
        return c * x[0] + p * np.expm1(-th * x[0]) / th

    def grad_H(x, theta):
        th, x0 = theta[0], x[0]
        return np.array([-p * np.expm1(-th * x0) / th ** 2 - p * x0 * np.exp(-th * x0) / th])

    x_star = np.log(p / c) / theta_c if p > c else 0.0
    problem = Problem('newsvendor_exp', family, [(x_min, x_max)], h, theta_c, H=H, grad_H=grad_H,
                      x_star=np.clip(x_star, x_min, x_max),
                      params=dict(c=c, p=p, theta_c=theta_c, x_min=x_min, x_max=x_max))
    return _finish(problem, analytic)


def newsvendor_weibull(c=1.0, p=3.0, shape=2.0, theta_c=1.0, x_min=0.0, x_max=4.0, family=None, analytic=True):
    """
    Newsvendor with Weibull demand; theta_c is lambda = scale**shape.

    H(x, lambda) = c x - p s Gamma(1 + 1/k) P(1/k, x^k / lambda) with s = lambda^(1/k) and P the
    regularized lower incomplete gamma function. There is no closed-form gradient, so sigma_x
    goes through central differences. x* = (lambda ln(p/c))^(1/k).
    """
    if c <= 0 or p <= 0:
        raise DomainError("Newsvendor cost c and price p must be positive")
    family = _family(family, ObservationFamily.weibull_known_shape(shape))
    k = family.shape

    def h(x, xi):
        return c * x[0] - p * np.minimum(x[0], xi)

    def H(x, thetas):
        lam = thetas[:, 0]
        scale = np.power(lam, 1.0 / k)
        expected_sales = scale * special.gamma(1.0 + 1.0 / k) * special.gammainc(1.0 / k, x[0] ** k / lam)
        return c * x[0] - p * expected_sales

    x_star = (theta_c * np.log(p / c)) ** (1.0 / k) if p > c else 0.0
    problem = Problem('newsvendor_weibull', family, [(x_min, x_max)], h, theta_c, H=H,
                      x_star=np.clip(x_star, x_min, x_max),
                      params=dict(c=c, p=p, shape=k, theta_c=theta_c, x_min=x_min, x_max=x_max))
    return _finish(problem, analytic)


def linear_normal(sigma2=4.0, theta_c=1.0, x_min=-1.0, x_max=1.0, family=None, analytic=True):
    """
    Linear cost h(x, xi) = x xi with normal xi, so H(x, theta) = x theta.

    The optimum is an end of the box; with theta_c = 0 H is flat and every x is optimal.
    """
    family = _family(family, ObservationFamily.normal_known_var(sigma2))

    def h(x, xi):
        return x[0] * xi

    def H(x, thetas):
        return x[0] * thetas[:, 0]

    def grad_H(x, theta):
        return np.array([x[0]])

    if theta_c > 0:
        x_star = x_min
    elif theta_c < 0:
        x_star = x_max
    else:
        x_star = None
    problem = Problem('linear_normal', family, [(x_min, x_max)], h, theta_c, H=H, grad_H=grad_H,
                      x_star=x_star, unique_optimum=x_star is not None and x_min < x_max,
                      params=dict(sigma2=family.sigma2, theta_c=theta_c, x_min=x_min, x_max=x_max))
    return _finish(problem, analytic)


DEFAULT_PAYOFFS = ((0.10, -0.05), (0.02, 0.03), (-0.08, 0.06))


def discrete_portfolio(payoffs=DEFAULT_PAYOFFS, theta_c=(0.3, 0.4, 0.3), risk_aversion=50.0, x_min=0.0, x_max=1.0,
                       family=None, analytic=True):
    """
    Allocation over d assets whose returns r(y_i) are read from a payoff table, one row per
    scenario of a finite_discrete family.

    h(x, xi) = -x.r(xi) + risk_aversion/2 (x.r(xi))^2, H(x, theta) = sum_i theta_i h(x, y_i).
    The optimum is unique when the payoff rows span R^d.
    """
    table = np.asarray(payoffs, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2:
        raise DomainError("Payoff table needs one row per scenario and at least two scenarios")
    if risk_aversion <= 0:
        raise DomainError("Risk aversion must be positive")
    n_scenarios, d = table.shape
    family = _family(family, ObservationFamily.finite_discrete(range(n_scenarios)))
    if family.dim != n_scenarios:
        raise DomainError("Family support and payoff table differ in length")
    scenarios = np.arange(n_scenarios)

    def h(x, xi):
        z = table[np.asarray(xi, dtype=int)] @ x
        return -z + 0.5 * risk_aversion * z ** 2

    def H(x, thetas):
        return thetas @ h(x, scenarios)

    def grad_H(x, theta):
        costs = h(x, scenarios)
        return costs[:-1] - costs[-1]

    problem = Problem('discrete_portfolio', family, [(x_min, x_max)] * d, h, tuple(theta_c), H=H, grad_H=grad_H,
                      unique_optimum=bool(np.linalg.matrix_rank(table) == d),
                      params=dict(payoffs=table.tolist(), theta_c=list(theta_c), risk_aversion=risk_aversion,
                                  x_min=x_min, x_max=x_max))
    return _finish(problem, analytic)


BUILTINS = {
    'newsvendor_exp': newsvendor_exp,
    'newsvendor_weibull': newsvendor_weibull,
    'linear_normal': linear_normal,
    'discrete_portfolio': discrete_portfolio,
}


def build_problem(name, **overrides):
    """
    Builtin problem by name with parameter overrides.

    :raises ConfigError: unknown problem name or parameter
    :rtype: Problem
    """
    if name not in BUILTINS:
        raise ConfigError("Unknown problem '{}' (known: {})".format(name, ", ".join(sorted(BUILTINS))))
    factory = BUILTINS[name]
    try:
        inspect.signature(factory).bind(**overrides)
    except TypeError as e:
        raise ConfigError("Invalid parameters for problem '{}': {}".format(name, e))
    return factory(**overrides)
