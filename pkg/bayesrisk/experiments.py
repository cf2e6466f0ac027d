"""
Replicated BRO experiments. Start an experiment: (does not block)

job = run_experiment_async(config, 'consistency')

Then wait until all replications are done - either by periodically calling
experiment_is_running(job) that just returns True/False, or by calling experiment_wait(job)
that blocks the current thread. To write the CSV and summary.json, call experiment_finalize(job).

Every replication (n, rep) is one task on a thread pool. It draws its data and posterior
samples from streams keyed by (seed, stage, n, rep) and returns its rows, which are written
sorted by (n, rep); the output does not depend on the number of workers.
"""

import json
import logging
import os
import threading
import time
import concurrent.futures

import numpy as np
import pandas as pd

from .asymptotics import (MIN_REPLICATIONS, bias_weight, confidence_interval, normality_diagnostic,
                          predicted_limit, sigma_x, variance_ratio)
from .bayes import posterior_moments, posterior_update
from .common import BayesRiskError, DataError, ExperimentError
from .model import sample
from .objective import PosteriorDraws
from .optimize import argmin_set, minimize, solution_deviation, true_solution
from .risk import RiskKind, RiskSpec, apply_risk
from .utils import stream, write_json
from .version import __version__

SUBCOMMANDS = ('consistency', 'normality', 'coverage', 'optimal_value', 'tradeoff')

COLUMNS = ['subcommand', 'seed', 'config_hash', 'n', 'rep', 'spec', 'x', 'objective', 'true_value', 'error',
           'scaled_error', 'ci_lo', 'ci_hi', 'covered', 'x_star', 'min_value', 'min_error', 'deviation', 'n_var',
           'sigma_x']
FLOAT_COLUMNS = ['objective', 'true_value', 'error', 'scaled_error', 'ci_lo', 'ci_hi', 'min_value', 'min_error',
                 'deviation', 'n_var', 'sigma_x']

SUMMARY_FILE = 'summary.json'
LOG_FILE = 'bayesrisk-log.txt'

# normality runs the KS diagnostic on R scaled errors per (n, spec, x)
MIN_REPLICATIONS_BY_SUBCOMMAND = {'normality': 100, 'optimal_value': MIN_REPLICATIONS}


def format_vector(x):
    """ Decision vector as text for a single CSV cell, e.g. '1.09861229' or '0.5;0.25'. """
    return ';'.join('{:.9g}'.format(v) for v in np.atleast_1d(x))


def experiment_logger(out_dir):
    """ Logger writing to <out_dir>/bayesrisk-log.txt, set up once per output directory. """
    log = logging.getLogger('bayesrisk.' + os.path.abspath(out_dir))
    log.setLevel(logging.DEBUG)   # log everything (it would otherwise log just warnings+errors)
    if not log.handlers:
        # loggers are cached, so add the handler only the first time
        log_handler = logging.FileHandler(os.path.join(out_dir, LOG_FILE))
        log_handler.setFormatter(logging.Formatter('%(asctime)s %(message)s'))
        log.addHandler(log_handler)
    return log


class ExperimentJob:
    """ Keeps all the important data about a pending experiment """

    def __init__(self, config, subcommand, log):
        self.config = config                         # validated ExperimentConfig
        self.subcommand = subcommand                 # one of SUBCOMMANDS
        self.log = log                               # logger writing into the output directory
        self.problem = config.build_problem()
        self.prior = config.build_prior(self.problem.family)
        self.specs = config.risk_specs()
        self.opt_cfg = config.optimizer_config()
        self.seed = config.seed
        self.config_hash = config.config_hash()
        self.out_dir = config.output_dir
        self.x_list = [np.asarray(x, dtype=float) for x in config.experiment.x_list]
        self.sigmas = {}                             # index into x_list -> sigma_x at theta_c
        self.true_set = None                         # optimal set S of H(., theta_c)
        self.total_tasks = 0                         # number of (n, rep) replications
        self.completed_tasks = 0                     # replications already finished
        self.is_cancelled = False                    # whether the experiment has been cancelled
        self.executor = None                         # ThreadPoolExecutor running the replications
        self.futures = []                            # list of futures submitted to the executor
        self.results = {}                            # (n, rep) -> rows of that replication
        self.started = time.time()
        self.wall_time = None
        self._lock = threading.Lock()

    @property
    def csv_path(self):
        return os.path.join(self.out_dir, '{}_{}.csv'.format(self.subcommand, self.config_hash))

    def row(self, n, rep, spec, **values):
        row = dict.fromkeys(COLUMNS)
        row.update(subcommand=self.subcommand, seed=self.seed, config_hash=self.config_hash, n=n, rep=rep,
                   spec=spec.label)
        row.update(values)
        return row

    def draws(self, n, rep):
        """ Dataset from P_theta_c, its posterior, and a fixed posterior draw set for replication (n, rep). """
        cfg = self.config.experiment
        data = sample(self.problem.family, self.problem.theta_c, n, stream(self.seed, 'data', n, rep))
        post = posterior_update(self.prior, data)
        draws = PosteriorDraws.sample(self.problem, post, cfg.outer_m, cfg.inner_m,
                                      stream(self.seed, 'draws', n, rep))
        return post, draws

    def sigma_at(self, x, theta=None, key=()):
        """ sigma_x of a decision; Monte Carlo H uses its own keyed stream. """
        rng = stream(self.seed, 'sigma', *key) if self.problem.H is None else None
        return sigma_x(self.problem, x, theta, inner_m=self.config.experiment.inner_m, rng=rng).sigma_x


def _check_limit_specs(job):
    for spec in job.specs:
        if spec.kind == RiskKind.VAR and spec.alpha >= 1:
            raise ExperimentError("Spec {} has no normal limit, {} cannot use it".format(spec, job.subcommand))


def _prepare(job):
    """ Per-experiment checks and quantities shared by all replications. """
    cfg = job.config.experiment
    needs_x = job.subcommand in ('normality', 'coverage')
    if needs_x and not job.x_list:
        raise ExperimentError("{} needs a nonempty experiment.x_list".format(job.subcommand))
    minimum = MIN_REPLICATIONS_BY_SUBCOMMAND.get(job.subcommand, 1)
    if cfg.replications < minimum:
        raise ExperimentError("{} needs at least {} replications, got {}".format(
            job.subcommand, minimum, cfg.replications))
    if job.subcommand in ('normality', 'coverage', 'optimal_value'):
        _check_limit_specs(job)
    if job.subcommand == 'optimal_value' and not job.problem.unique_optimum:
        raise ExperimentError("Problem {} does not have a unique optimum; optimal-value limits are only "
                              "verified for a singleton optimal set".format(job.problem.name))

    if job.subcommand in ('consistency', 'optimal_value'):
        job.true_set = true_solution(job.problem, job.opt_cfg)
    if job.subcommand in ('normality', 'coverage'):
        for i, x in enumerate(job.x_list):
            job.sigmas[i] = job.sigma_at(x, key=(i,))
    if job.subcommand == 'optimal_value':
        job.sigmas['x_star'] = job.sigma_at(job.true_set[0], key=('x_star',))


def _consistency_task(job, n, rep):
    post, draws = job.draws(n, rep)
    box = job.problem.box
    min_true = job.problem.true_value(job.true_set[0])
    rows = []
    for spec in job.specs:
        objective = draws.objective(spec)
        solved = minimize(objective, box, job.opt_cfg)
        s_n = argmin_set(objective, box, job.opt_cfg.grid_points, job.opt_cfg.tol_f)
        solve = dict(x_star=format_vector(solved.x_star), min_value=solved.value, min_error=solved.value - min_true,
                     deviation=solution_deviation(s_n, job.true_set))
        if not job.x_list:
            rows.append(job.row(n, rep, spec, **solve))
        for x in job.x_list:
            value = draws.evaluate(spec, x)
            true_value = job.problem.true_value(x)
            rows.append(job.row(n, rep, spec, x=format_vector(x), objective=value, true_value=true_value,
                                error=value - true_value, scaled_error=np.sqrt(n) * (value - true_value), **solve))
    return rows


def _normality_task(job, n, rep):
    post, draws = job.draws(n, rep)
    rows = []
    for spec in job.specs:
        for i, x in enumerate(job.x_list):
            values = draws.values(x)
            value = draws.evaluate(spec, x)
            true_value = job.problem.true_value(x)
            rows.append(job.row(n, rep, spec, x=format_vector(x), objective=value, true_value=true_value,
                                error=value - true_value, scaled_error=np.sqrt(n) * (value - true_value),
                                n_var=n * float(np.var(values)), sigma_x=job.sigmas[i]))
    return rows


def _coverage_task(job, n, rep):
    post, draws = job.draws(n, rep)
    beta = job.config.experiment.beta
    plug_in = job.config.experiment.plug_in
    theta_hat = posterior_moments(post)[0] if plug_in else None
    rows = []
    for i, x in enumerate(job.x_list):
        sig = job.sigma_at(x, theta_hat, key=(i, n, rep)) if plug_in else job.sigmas[i]
        true_value = job.problem.true_value(x)
        for spec in job.specs:
            value = draws.evaluate(spec, x)
            lo, hi = confidence_interval(spec, value, sig, n, beta)
            rows.append(job.row(n, rep, spec, x=format_vector(x), objective=value, true_value=true_value,
                                error=value - true_value, scaled_error=np.sqrt(n) * (value - true_value),
                                ci_lo=lo, ci_hi=hi, covered=bool(lo <= true_value <= hi), sigma_x=sig))
    # rows ordered by spec, then x
    order = {spec.label: k for k, spec in enumerate(job.specs)}
    return sorted(rows, key=lambda r: order[r['spec']])


def _optimal_value_task(job, n, rep):
    post, draws = job.draws(n, rep)
    min_true = job.problem.true_value(job.true_set[0])
    rows = []
    for spec in job.specs:
        solved = minimize(draws.objective(spec), job.problem.box, job.opt_cfg)
        error = solved.value - min_true
        rows.append(job.row(n, rep, spec, true_value=min_true, x_star=format_vector(solved.x_star),
                            min_value=solved.value, min_error=error, scaled_error=np.sqrt(n) * error,
                            deviation=solution_deviation(solved.x_star.reshape(1, -1), job.true_set),
                            sigma_x=job.sigmas['x_star']))
    return rows


def _tradeoff_task(job, n, rep):
    post, draws = job.draws(n, rep)
    beta = job.config.experiment.beta
    mean = RiskSpec.mean()
    rows = []
    for spec in job.specs:
        solved = minimize(draws.objective(spec), job.problem.box, job.opt_cfg)
        posterior_mean = draws.evaluate(mean, solved.x_star)
        true_value = job.problem.true_value(solved.x_star)
        sig = job.sigma_at(solved.x_star, key=('tradeoff', n, rep))
        values = dict(x_star=format_vector(solved.x_star), min_value=solved.value, objective=posterior_mean,
                      true_value=true_value, error=posterior_mean - true_value, sigma_x=sig)
        if spec.kind != RiskKind.VAR or spec.alpha < 1:
            values['ci_lo'], values['ci_hi'] = confidence_interval(spec, solved.value, sig, n, beta)
        rows.append(job.row(n, rep, spec, **values))
    return rows


TASKS = {
    'consistency': _consistency_task,
    'normality': _normality_task,
    'coverage': _coverage_task,
    'optimal_value': _optimal_value_task,
    'tradeoff': _tradeoff_task,
}


def _do_replication(job, n, rep):
    """ runs in worker thread """
    if job.is_cancelled:
        return
    rows = TASKS[job.subcommand](job, n, rep)
    with job._lock:
        job.results[(n, rep)] = rows
        job.completed_tasks += 1
    job.log.debug("replication n={} rep={} done".format(n, rep))


def run_experiment_async(config, subcommand):
    """
    Starts an experiment and returns the pending job.

    :param config: validated configuration
    :type config: ExperimentConfig
    :param subcommand: one of consistency, normality, coverage, optimal_value, tradeoff
    :raises ExperimentError: experiment refused for this configuration
    :rtype: ExperimentJob
    """
    if subcommand not in SUBCOMMANDS:
        raise ExperimentError("Unknown experiment '{}'".format(subcommand))
    os.makedirs(config.output_dir, exist_ok=True)
    log = experiment_logger(config.output_dir)
    job = ExperimentJob(config, subcommand, log)

    log.info("--- version: bayesrisk/" + __version__)
    log.info("--- start {} seed={} config={}".format(subcommand, job.seed, job.config_hash))
    try:
        _prepare(job)
    except BayesRiskError as e:
        log.error("--- {} refused: {}".format(subcommand, e))
        raise

    cfg = config.experiment
    tasks = [(n, rep) for n in cfg.n_list for rep in range(cfg.replications)]
    job.total_tasks = len(tasks)
    log.info("will run {} replications on {} worker(s)".format(job.total_tasks, cfg.workers))

    job.executor = concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers)
    for n, rep in tasks:
        job.futures.append(job.executor.submit(_do_replication, job, n, rep))
    return job


def experiment_wait(job):
    """ blocks until all replications are finished """
    concurrent.futures.wait(job.futures)


def experiment_is_running(job):
    """
    Returns true/false depending on whether we have some pending replications

    It also forwards any exceptions from workers. If an exception is raised, it is advised
    to call experiment_cancel() to abort the job.
    """
    for future in job.futures:
        if future.done() and future.exception() is not None:
            raise future.exception()
    return any(not future.done() for future in job.futures)


def experiment_cancel(job):
    """
    To be called (from main thread) to cancel a running experiment.
    Returns once all replications in progress have exited.
    """
    job.is_cancelled = True
    job.executor.shutdown(wait=True)
    job.log.info("--- {} cancelled".format(job.subcommand))


def _frame(job):
    rows = [row for key in sorted(job.results) for row in job.results[key]]
    frame = pd.DataFrame(rows, columns=COLUMNS)
    for column in FLOAT_COLUMNS:
        frame[column] = frame[column].astype(float)
    return frame


def _report(errors, mean, sd):
    try:
        return normality_diagnostic(errors, mean, sd).to_dict()
    except BayesRiskError as e:
        return {'error': str(e), 'predicted_mean': mean, 'predicted_sd': sd}


def summarize(job, frame):
    """ Summary tables (and normality reports) of a finished experiment, as JSON-ready records. """
    specs = {spec.label: spec for spec in job.specs}
    if job.subcommand == 'consistency':
        frame = frame.assign(abs_error=frame['error'].abs(), abs_min_error=frame['min_error'].abs())
        table = frame.groupby(['spec', 'n'], sort=False).agg(
            median_abs_error=('abs_error', 'median'), median_deviation=('deviation', 'median'),
            median_abs_min_error=('abs_min_error', 'median'))
        return {'table': table.reset_index().to_dict(orient='records')}

    if job.subcommand == 'coverage':
        table = frame.assign(covered=frame['covered'].astype(float)).groupby(
            ['spec', 'n', 'x'], sort=False).agg(coverage=('covered', 'mean'), replications=('covered', 'size'))
        return {'beta': job.config.experiment.beta, 'plug_in': job.config.experiment.plug_in,
                'table': table.reset_index().to_dict(orient='records')}

    if job.subcommand == 'normality':
        reports = []
        for (label, n, x), group in frame.groupby(['spec', 'n', 'x'], sort=False):
            sig = float(group['sigma_x'].iloc[0])
            mean, sd = predicted_limit(specs[label], sig)
            record = {'spec': label, 'n': int(n), 'x': x, 'sigma_x': sig}
            record.update(_report(group['scaled_error'].to_numpy(), mean, sd))
            if specs[label].kind == RiskKind.MEAN_VARIANCE and sig > 0:
                record['variance_ratio'] = variance_ratio(group['n_var'].to_numpy(), sig)
            reports.append(record)
        return {'reports': reports}

    if job.subcommand == 'optimal_value':
        sig = job.sigmas['x_star']
        reports = []
        for (label, n), group in frame.groupby(['spec', 'n'], sort=False):
            mean = bias_weight(specs[label]) * sig
            record = {'spec': label, 'n': int(n), 'x_star': format_vector(job.true_set[0]), 'sigma_x': sig}
            record.update(_report(group['scaled_error'].to_numpy(), mean, sig))
            reports.append(record)
        return {'reports': reports}

    table = frame.groupby(['spec', 'n'], sort=False).agg(
        x_star=('x_star', 'first'), min_value=('min_value', 'mean'), posterior_mean=('objective', 'mean'),
        sigma_x=('sigma_x', 'mean'))
    table['half_width_scale'] = table['sigma_x'] / np.sqrt(table.index.get_level_values('n').to_numpy())
    return {'table': table.reset_index().to_dict(orient='records')}


def _merge_summary(path, subcommand, entry):
    summary = {}
    if os.path.exists(path):
        with open(path, 'r') as f:
            summary = json.load(f)
    summary[subcommand] = entry
    write_json(summary, path)


def experiment_finalize(job):
    """
    To be called when the experiment is finished: writes the CSV and merges the summary into
    summary.json. Any exception from the workers is re-raised here.

    :returns: path of the written CSV
    """
    job.executor.shutdown(wait=True)

    # make sure any exceptions from threads are not lost
    for future in job.futures:
        if future.exception() is not None:
            job.log.error("--- {} failed: {}".format(job.subcommand, future.exception()))
            raise future.exception()

    if job.is_cancelled or job.completed_tasks != job.total_tasks:
        raise ExperimentError("Experiment did not complete all {} replications".format(job.total_tasks))

    frame = _frame(job)
    frame.to_csv(job.csv_path, index=False, float_format='%.9g')
    job.wall_time = time.time() - job.started

    entry = {'config_hash': job.config_hash, 'seed': job.seed, 'csv': os.path.basename(job.csv_path),
             'rows': len(frame), 'wall_time': job.wall_time}
    entry.update(summarize(job, frame))
    _merge_summary(os.path.join(job.out_dir, SUMMARY_FILE), job.subcommand, entry)

    job.log.info("--- {} finished: {} rows in {:.1f} s".format(job.subcommand, len(frame), job.wall_time))
    return job.csv_path


def run_experiment(config, subcommand):
    """ Blocking version of run_experiment_async() followed by experiment_finalize(). """
    job = run_experiment_async(config, subcommand)
    experiment_wait(job)
    return experiment_finalize(job)


def read_samples(path):
    """
    Read a text file with one number per line.

    :raises DataError: unreadable file or non-numeric line
    :rtype: numpy.ndarray
    """
    try:
        return np.loadtxt(path, dtype=float, ndmin=1)
    except (OSError, ValueError) as e:
        raise DataError("Cannot read samples from {}: {}".format(path, e))


def solve_once(config, data=None, specs=None, log=None):
    """
    Single BRO solve: posterior from data (or from a dataset of size n_list[0] drawn from
    P_theta_c), one fixed posterior draw set, then one minimization per risk spec.

    :param config: validated configuration
    :param data: observations; generated from the config seed when None
    :param specs: risk specs overriding the config list
    :returns: posterior state and {spec label: SolveResult}
    """
    problem = config.build_problem()
    prior = config.build_prior(problem.family)
    cfg = config.experiment
    if data is None:
        n = cfg.n_list[0]
        data = sample(problem.family, problem.theta_c, n, stream(config.seed, 'data', n, 0))
    post = posterior_update(prior, data)
    draws = PosteriorDraws.sample(problem, post, cfg.outer_m, cfg.inner_m, stream(config.seed, 'draws', post.n, 0))
    opt_cfg = config.optimizer_config()
    specs = specs or config.risk_specs()

    def _solve(spec):
        result = minimize(draws.objective(spec), problem.box, opt_cfg, log)
        if log:
            log.info("solve {}: {}".format(spec.label, result.to_dict()))
        return result

    # the draw set is read-only, so specs can be solved on several workers
    with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        solved = list(executor.map(_solve, specs))
    return post, {spec.label: result for spec, result in zip(specs, solved)}


def risk_eval(samples, specs):
    """ Apply each risk spec to a sample vector; returns (label, value) pairs. """
    return [(spec.label, apply_risk(spec, samples)) for spec in specs]
