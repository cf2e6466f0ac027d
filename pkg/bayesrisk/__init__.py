from . import common

from .bayes import PriorSpec, PosteriorState, posterior_update, posterior_sample, posterior_moments
from .common import (BayesRiskError, ConfigError, DataError, DomainError, ExperimentError, InputError, MomentError,
                     SingularityError)
from .model import ObservationFamily, make_point
from .objective import PosteriorDraws, Problem, bro_objective, build_problem
from .optimize import OptimizerConfig, SolveResult, minimize, solution_deviation
from .risk import RiskSpec, apply_risk
from .version import __version__
