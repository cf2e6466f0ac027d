# Monte Carlo budgets of the two-level BRO objective
DEFAULT_OUTER_M = 2000
DEFAULT_INNER_M = 2000

# relative steps of central differences in theta
GRAD_STEP = 1e-5
MC_GRAD_STEP = 1e-3


class BayesRiskError(Exception):
    pass


class DomainError(BayesRiskError):
    pass


class SingularityError(BayesRiskError):
    pass


class DataError(BayesRiskError):
    pass


class InputError(BayesRiskError):
    pass


class MomentError(BayesRiskError):
    pass


class ConfigError(BayesRiskError):
    pass


class ExperimentError(BayesRiskError):
    pass
