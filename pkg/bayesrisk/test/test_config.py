import os
import shutil
import tempfile

import pytest

from ..common import ConfigError
from ..config import load_config, parse_config
from ..optimize import Method
from ..risk import RiskSpec

TMP_DIR = tempfile.gettempdir()

CONFIG = """\
problem:
  name: newsvendor_exp
  params: {c: 1.0, p: 3.0, theta_c: 1.0}
prior: {kind: gamma, alpha0: 2.0, beta0: 1.0}
risk:
  specs: [mean, "var:alpha=0.95", "cvar:alpha=0.95"]
experiment:
  seed: 7
  n_list: [10, 100]
  replications: 2
  x_list: [1.0, [2.0]]
optimizer: {method: grid_refine, grid_points: 51}
output_dir: results
"""


def test_parse_valid():
    config = parse_config(CONFIG)
    assert config.seed == 7
    assert config.experiment.x_list == [[1.0], [2.0]]
    assert config.experiment.outer_m == 2000
    assert config.experiment.beta == 0.05
    assert config.risk_specs() == [RiskSpec.mean(), RiskSpec.var(0.95), RiskSpec.cvar(0.95)]
    assert config.optimizer_config().method == Method.GRID_REFINE
    assert config.optimizer_config().grid_points == 51

    problem = config.build_problem()
    assert problem.name == 'newsvendor_exp'
    prior = config.build_prior()
    assert prior.alpha0 == 2.0 and prior.beta0 == 1.0


def test_config_hash():
    base = parse_config(CONFIG)
    assert len(base.config_hash()) == 12
    assert parse_config(CONFIG).config_hash() == base.config_hash()
    # run-location settings do not change the hash
    assert parse_config(CONFIG, workers=8, out='elsewhere').config_hash() == base.config_hash()
    assert parse_config(CONFIG, seed=8).config_hash() != base.config_hash()
    assert parse_config(CONFIG.replace('replications: 2', 'replications: 3')).config_hash() != base.config_hash()


def test_overrides():
    config = parse_config(CONFIG, seed=2 ** 64 - 1, workers=4, out='out')
    assert config.seed == 2 ** 64 - 1
    assert config.experiment.workers == 4
    assert config.output_dir == 'out'


def test_unknown_key_reports_line_and_path():
    text = CONFIG.replace('  replications: 2', '  replications: 2\n  repetitions: 5')
    with pytest.raises(ConfigError) as e:
        parse_config(text, path='bad.yaml')
    assert 'bad.yaml:11: experiment.repetitions' in str(e.value)

    with pytest.raises(ConfigError, match='<config>:1: extra: Extra inputs'):
        parse_config('extra: 1\n' + CONFIG)


def test_missing_seed():
    text = CONFIG.replace('  seed: 7\n', '')
    with pytest.raises(ConfigError, match='experiment.seed: Field required'):
        parse_config(text)
    assert parse_config(text, seed=11).seed == 11


def test_invalid_values():
    with pytest.raises(ConfigError, match='risk.specs'):
        parse_config(CONFIG.replace('"var:alpha=0.95"', '"var:alpha=1.5"'))
    with pytest.raises(ConfigError, match='not conjugate'):
        parse_config(CONFIG.replace('{kind: gamma, alpha0: 2.0, beta0: 1.0}', '{kind: normal, mu0: 0.0, sigma02: 1.0}'))
    with pytest.raises(ConfigError, match="Unknown problem 'inventory'"):
        parse_config(CONFIG.replace('name: newsvendor_exp', 'name: inventory'))
    with pytest.raises(ConfigError, match='outside the box'):
        parse_config(CONFIG.replace('x_list: [1.0, [2.0]]', 'x_list: [5.0]'))
    with pytest.raises(ConfigError, match='experiment.n_list'):
        parse_config(CONFIG.replace('n_list: [10, 100]', 'n_list: [10, 0]'))
    with pytest.raises(ConfigError, match='experiment.seed'):
        parse_config(CONFIG.replace('seed: 7', 'seed: -1'))
    with pytest.raises(ConfigError, match='optimizer.grid_points'):
        parse_config(CONFIG.replace('grid_points: 51', 'grid_points: 2'))


def test_invalid_documents():
    with pytest.raises(ConfigError, match='invalid YAML'):
        parse_config('problem: [unclosed')
    with pytest.raises(ConfigError, match='mapping'):
        parse_config('- just\n- a list\n')
    with pytest.raises(ConfigError, match='mapping'):
        parse_config('')


def test_load_config():
    config_dir = os.path.join(TMP_DIR, 'bayesrisk_test_config')
    if os.path.exists(config_dir):
        shutil.rmtree(config_dir)
    os.makedirs(config_dir)

    path = os.path.join(config_dir, 'newsvendor.yaml')
    with open(path, 'w') as f:
        f.write(CONFIG)
    assert load_config(path, seed=3).seed == 3

    with pytest.raises(ConfigError, match='Cannot read config'):
        load_config(os.path.join(config_dir, 'missing.yaml'))
    shutil.rmtree(config_dir)
