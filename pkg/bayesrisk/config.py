"""
Experiment configuration: a YAML file with one section per module, validated by pydantic.

    problem:
      name: newsvendor_exp
      params: {c: 1.0, p: 3.0, theta_c: 1.0}
    prior: {kind: gamma, alpha0: 2.0, beta0: 1.0}
    risk:
      specs: [mean, "mean_variance:w=1", "var:alpha=0.95", "cvar:alpha=0.95"]
    experiment:
      seed: 20240101
      n_list: [100, 1000]
      replications: 100
      x_list: [1.0]
    optimizer: {method: grid_refine, grid_points: 101}
    output_dir: results

Unknown keys anywhere are errors. Validation errors are reported with the YAML line of the
offending key and its dotted path.
"""

from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .bayes import PriorSpec
from .common import BayesRiskError, ConfigError, DEFAULT_INNER_M, DEFAULT_OUTER_M
from .objective import build_problem
from .optimize import OptimizerConfig
from .risk import RiskSpec
from .utils import generate_checksum

MAX_SEED = 2 ** 64


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class ProblemSection(_Section):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self):
        return build_problem(self.name, **self.params)

    @model_validator(mode='after')
    def _check_builds(self):
        try:
            self.build()
        except BayesRiskError as e:
            raise ValueError(str(e))
        return self


class PriorSection(_Section):
    kind: Literal['gamma', 'normal', 'inv_gamma', 'dirichlet']
    alpha0: Optional[Union[float, List[float]]] = None
    beta0: Optional[float] = None
    mu0: Optional[float] = None
    sigma02: Optional[float] = None


class RiskSection(_Section):
    specs: List[str] = Field(min_length=1)

    @field_validator('specs')
    @classmethod
    def _parse(cls, specs):
        for text in specs:
            try:
                RiskSpec.parse(text)
            except BayesRiskError as e:
                raise ValueError(str(e))
        return specs


class ExperimentSection(_Section):
    seed: int = Field(ge=0, lt=MAX_SEED)
    n_list: List[int] = Field(min_length=1)
    replications: int = Field(default=1, gt=0)
    outer_m: int = Field(default=DEFAULT_OUTER_M, gt=0)
    inner_m: int = Field(default=DEFAULT_INNER_M, gt=0)
    x_list: List[List[float]] = Field(default_factory=list)
    beta: float = Field(default=0.05, gt=0, lt=1)
    plug_in: bool = False
    workers: int = Field(default=1, gt=0)

    @field_validator('n_list')
    @classmethod
    def _positive_sizes(cls, n_list):
        if any(n < 1 for n in n_list):
            raise ValueError("dataset sizes must be positive")
        return n_list

    @field_validator('x_list', mode='before')
    @classmethod
    def _scalars_to_vectors(cls, x_list):
        if isinstance(x_list, list):
            return [x if isinstance(x, (list, tuple)) else [x] for x in x_list]
        return x_list


class OptimizerSection(_Section):
    method: Optional[Literal['grid_refine', 'nelder_mead']] = None
    grid_points: int = Field(default=101, ge=3)
    refine_rounds: int = Field(default=3, ge=0)
    nm_budget: int = Field(default=500, gt=0)
    tol_x: float = Field(default=1e-6, gt=0)
    tol_f: float = Field(default=1e-9, ge=0)


class ExperimentConfig(_Section):
    """ Validated experiment configuration. """

    problem: ProblemSection
    prior: PriorSection
    risk: RiskSection
    experiment: ExperimentSection
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    output_dir: str = 'results'

    @model_validator(mode='after')
    def _check_pairing(self):
        problem = self.problem.build()
        try:
            PriorSpec.from_dict(self.prior.model_dump(exclude_none=True), problem.family)
            for x in self.experiment.x_list:
                problem.check_x(x)
        except BayesRiskError as e:
            raise ValueError(str(e))
        return self

    def build_problem(self):
        return self.problem.build()

    def build_prior(self, family=None):
        family = family or self.build_problem().family
        return PriorSpec.from_dict(self.prior.model_dump(exclude_none=True), family)

    def risk_specs(self):
        return [RiskSpec.parse(text) for text in self.risk.specs]

    def optimizer_config(self):
        return OptimizerConfig(**self.optimizer.model_dump())

    @property
    def seed(self):
        return self.experiment.seed

    def config_hash(self):
        """ First 12 hex digits of the SHA-1 of the canonical config, without output_dir and workers. """
        data = self.model_dump(mode='json', exclude={'output_dir': True, 'experiment': {'workers'}})
        return generate_checksum(data)[:12]


def _key_lines(node, path=(), lines=None):
    """ Map of dotted path -> 1-based line of every key and item in a composed YAML tree. """
    lines = {} if lines is None else lines
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = path + (str(key_node.value),)
            lines['.'.join(key_path)] = key_node.start_mark.line + 1
            _key_lines(value_node, key_path, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            item_path = path + (str(i),)
            lines['.'.join(item_path)] = item.start_mark.line + 1
            _key_lines(item, item_path, lines)
    return lines


def _locate(loc, lines):
    parts = [str(p) for p in loc]
    while parts:
        line = lines.get('.'.join(parts))
        if line is not None:
            return line
        parts.pop()
    return 1


def _format_errors(path, exc, lines):
    messages = []
    for err in exc.errors():
        loc = '.'.join(str(p) for p in err['loc']) or '<root>'
        msg = err['msg']
        if msg.startswith('Value error, '):
            msg = msg[len('Value error, '):]
        messages.append("{}:{}: {}: {}".format(path, _locate(err['loc'], lines), loc, msg))
    return "\n".join(messages)


def parse_config(text, path='<config>', seed=None, workers=None, out=None):
    """
    Validate configuration text, applying command-line overrides first.

    :param text: YAML document
    :param path: file name used in error messages
    :raises ConfigError: YAML syntax error or invalid configuration
    :rtype: ExperimentConfig
    """
    try:
        data = yaml.safe_load(text)
        lines = _key_lines(yaml.compose(text)) if data is not None else {}
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError("{}:{}: invalid YAML: {}".format(path, line, getattr(e, 'problem', e)))
    if not isinstance(data, dict):
        raise ConfigError("{}:1: configuration must be a mapping of sections".format(path))

    if seed is not None or workers is not None:
        section = data.setdefault('experiment', {})
        if not isinstance(section, dict):
            raise ConfigError("{}:{}: experiment: section must be a mapping".format(path, lines.get('experiment', 1)))
        if seed is not None:
            section['seed'] = seed
        if workers is not None:
            section['workers'] = workers
    if out is not None:
        data['output_dir'] = str(out)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(path, e, lines))


def load_config(path, seed=None, workers=None, out=None):
    """
    Read and validate an experiment configuration file.

    :param path: YAML file path
    :param seed: overrides experiment.seed
    :param workers: overrides experiment.workers
    :param out: overrides output_dir
    :raises ConfigError: unreadable file or invalid configuration
    :rtype: ExperimentConfig
    """
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("Cannot read config {}: {}".format(path, e))
    return parse_config(text, str(path), seed, workers, out)
