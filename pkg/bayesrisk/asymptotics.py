"""
Delta-method quantities of the BRO objective: sigma_x, the risk-specific bias terms, confidence
intervals for H(x, theta_c) and normality diagnostics of replicated, sqrt(n)-scaled errors.

For a posterior concentrating like N(theta_c, I^-1 / n), H(x, theta) is approximately
N(H(x, theta_c), sigma_x^2 / n), so each risk functional is the posterior mean plus a
deterministic multiple of sigma_x / sqrt(n):

    mean, mean_variance   0
    var(alpha)            Phi^-1(alpha)
    cvar(alpha)           phi(Phi^-1(alpha)) / (1 - alpha)
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .common import DomainError, InputError, SingularityError
from .model import as_point, fisher_information
from .objective import grad_H_theta
from .risk import RiskKind, normal_cvar, normal_var

# fewest replications a normality diagnostic accepts
MIN_REPLICATIONS = 30


@dataclass(frozen=True, eq=False)
class AsymptoticParams:
    sigma_x: float
    grad: np.ndarray
    info: np.ndarray
    n: int = None


@dataclass(frozen=True)
class NormalityReport:
    """ Sample moments and KS distance of scaled errors against their predicted normal limit. """

    sample_mean: float
    sample_sd: float
    predicted_mean: float
    predicted_sd: float
    ks_stat: float
    ks_pvalue: float
    replications: int
    degenerate: bool = False

    def passes(self, mean_tol=0.15, sd_tol=0.10, ks_max=None):
        """
        Check the report against the acceptance thresholds.

        :param mean_tol: allowed |sample_mean - predicted_mean| in units of predicted_sd
        :param sd_tol: allowed relative deviation of sample_sd from predicted_sd
        :param ks_max: largest accepted KS statistic, defaults to ks_threshold(replications)
        :rtype: bool
        """
        if self.degenerate:
            return False
        ks_max = ks_threshold(self.replications) if ks_max is None else ks_max
        return bool(abs(self.sample_mean - self.predicted_mean) <= mean_tol * self.predicted_sd
                    and abs(self.sample_sd / self.predicted_sd - 1.0) <= sd_tol
                    and self.ks_stat <= ks_max)

    def to_dict(self):
        return {
            'sample_mean': self.sample_mean,
            'sample_sd': self.sample_sd,
            'predicted_mean': self.predicted_mean,
            'predicted_sd': self.predicted_sd,
            'ks_stat': self.ks_stat,
            'ks_pvalue': self.ks_pvalue,
            'replications': self.replications,
            'degenerate': self.degenerate,
        }


def sigma_x(problem, x, theta_c=None, n=None, step=None, inner_m=None, rng=None):
    """
    Delta-method standard deviation sigma_x = sqrt(grad' I(theta_c)^-1 grad).

    Gradient and information are both taken in free coordinates, so finite_discrete
    problems work on the first l-1 probabilities.

    :param problem: decision problem
    :param x: decision
    :param theta_c: expansion point, defaults to the problem's true parameter
    :param n: dataset size, carried along for the caller
    :param rng: random stream, needed only when H is a Monte Carlo estimate
    :raises SingularityError: theta_c on the boundary or singular information
    :rtype: AsymptoticParams
    """
    family = problem.family
    point = as_point(family, problem.theta_c if theta_c is None else theta_c)
    kwargs = {} if inner_m is None else {'inner_m': inner_m}
    grad = grad_H_theta(problem, x, point, step=step, rng=rng, **kwargs)
    info = fisher_information(family, point)
    try:
        weights = np.linalg.solve(info, grad)
    except np.linalg.LinAlgError:
        raise SingularityError("Fisher information at {} is singular".format(point.theta.tolist()))
    variance = float(grad @ weights)
    return AsymptoticParams(float(np.sqrt(max(variance, 0.0))), grad, info, n)


def bias_weight(spec):
    """
    Multiple of sigma_x / sqrt(n) separating the risk objective from the posterior mean.

    :raises DomainError: VaR at alpha = 1 (worst case has no normal limit)
    :rtype: float
    """
    if spec.kind in (RiskKind.MEAN, RiskKind.MEAN_VARIANCE):
        return 0.0
    if spec.kind == RiskKind.VAR:
        if spec.alpha >= 1:
            raise DomainError("VaR at alpha = 1 has no asymptotic bias term")
        return normal_var(0.0, 1.0, spec.alpha)
    return normal_cvar(0.0, 1.0, spec.alpha)


def _check_n(n):
    if n < 1:
        raise InputError("Dataset size n must be at least 1")


def bias_term(spec, sigma_x, n):
    """
    Deterministic sqrt(n)-scale offset of a risk objective from the posterior-mean objective.

    Zero for mean and mean_variance, Phi^-1(alpha) sigma_x / sqrt(n) for VaR and
    phi(Phi^-1(alpha)) sigma_x / ((1 - alpha) sqrt(n)) for CVaR.
    """
    _check_n(n)
    return bias_weight(spec) * sigma_x / np.sqrt(n)


def predicted_limit(spec, sigma_x):
    """ Mean and standard deviation of the limit law of sqrt(n)(objective - H(x, theta_c)). """
    return bias_weight(spec) * sigma_x, float(sigma_x)


def confidence_interval(spec, estimate, sigma_x, n, beta=0.05):
    """
    Asymptotic 100(1 - beta)% confidence interval for H(x, theta_c).

    The interval is centred at the estimate minus the bias term of the risk spec and has half-width
    z_{1-beta/2} sigma_x / sqrt(n) for every spec.

    :rtype: (float, float)
    """
    if not 0 < beta < 1:
        raise DomainError("Confidence level beta must be in (0, 1)")
    _check_n(n)
    center = estimate - bias_term(spec, sigma_x, n)
    half_width = stats.norm.ppf(1.0 - beta / 2.0) * sigma_x / np.sqrt(n)
    return float(center - half_width), float(center + half_width)


def normality_diagnostic(errors, predicted_mean, predicted_sd):
    """
    Compare replicated sqrt(n)-scaled errors with N(predicted_mean, predicted_sd^2).

    The KS statistic is computed against the fully specified normal, nothing is estimated.
    Errors with zero spread are reported with ``degenerate`` set.

    :param errors: vector of R >= 30 scaled errors
    :rtype: NormalityReport
    """
    errors = np.asarray(errors, dtype=float).ravel()
    if errors.size < MIN_REPLICATIONS:
        raise InputError("Normality diagnostic needs at least {} replications, got {}".format(
            MIN_REPLICATIONS, errors.size))
    if not np.isfinite(predicted_sd) or predicted_sd <= 0:
        raise DomainError("Predicted standard deviation must be positive, got {}".format(predicted_sd))
    result = stats.kstest(errors, stats.norm(loc=predicted_mean, scale=predicted_sd).cdf)
    sample_sd = float(np.std(errors, ddof=1))
    return NormalityReport(float(np.mean(errors)), sample_sd, float(predicted_mean), float(predicted_sd),
                           float(result.statistic), float(result.pvalue), int(errors.size),
                           degenerate=sample_sd == 0)


def ks_threshold(replications, level=0.95):
    """ Asymptotic critical value of the one-sample KS statistic (about 1.36 / sqrt(R) at 95%). """
    if replications < 1:
        raise InputError("Replications must be positive")
    if not 0 < level < 1:
        raise DomainError("Level must be in (0, 1)")
    return float(stats.kstwobign.ppf(level) / np.sqrt(replications))


def variance_ratio(n_vars, sigma_x):
    """
    Mean of n Var_post[H(x, theta)] over replications divided by sigma_x^2.

    Close to 1 when the posterior variance of H decays like sigma_x^2 / n.
    """
    n_vars = np.asarray(n_vars, dtype=float).ravel()
    if n_vars.size == 0:
        raise InputError("Variance ratio needs at least one replication")
    if sigma_x <= 0:
        raise DomainError("sigma_x must be positive")
    return float(np.mean(n_vars) / sigma_x ** 2)
