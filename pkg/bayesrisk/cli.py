#!/usr/bin/env python3

"""
Command line interface of the bayesrisk package. When installed with pip, this script is
installed as 'bayesrisk' command line tool (defined in setup.py). If you have installed the module
but the tool is not available, you may need to fix your PATH (e.g. add ~/.local/bin where
pip puts these tools).
"""

import os
import sys
import time
import traceback
import click
import pandas as pd

from bayesrisk import BayesRiskError, RiskSpec
from bayesrisk.config import load_config
from bayesrisk.experiments import (experiment_cancel, experiment_finalize, experiment_is_running,
                                   experiment_logger, read_samples, risk_eval, run_experiment_async, solve_once)
from bayesrisk.utils import write_json


def _print_unhandled_exception():
    """ Outputs details of an unhandled exception that is being handled right now """
    click.secho("Unhandled exception!", fg='red')
    for line in traceback.format_exception(*sys.exc_info()):
        click.echo(line)


def _fail(e):
    click.secho('Error: ' + str(e), fg='red')
    sys.exit(1)


def config_options(f):
    """ --config/--seed/--workers/--out options shared by the experiment commands """
    f = click.option('--out', type=click.Path(file_okay=False), help='Output directory (overrides output_dir)')(f)
    f = click.option('--workers', type=click.IntRange(min=1), help='Number of worker threads')(f)
    f = click.option('--seed', type=click.IntRange(min=0, max=2 ** 64 - 1), help='Experiment seed (overrides config)')(f)
    f = click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                     help='YAML experiment configuration')(f)
    return f


def _run(subcommand, config_path, seed, workers, out):
    job = None
    try:
        config = load_config(config_path, seed=seed, workers=workers, out=out)
        job = run_experiment_async(config, subcommand)

        with click.progressbar(length=job.total_tasks, label=subcommand) as bar:
            last_completed = 0
            while experiment_is_running(job):
                time.sleep(1/10)  # 100ms
                completed = job.completed_tasks
                bar.update(completed - last_completed)  # the update() needs increment only
                last_completed = completed
            bar.update(job.total_tasks - last_completed)

        csv_path = experiment_finalize(job)
        click.echo('Written {} ({:.1f} s)'.format(csv_path, job.wall_time))
    except KeyboardInterrupt:
        print("Cancelling...")
        if job is not None:
            experiment_cancel(job)
        sys.exit(1)
    except BayesRiskError as e:
        _fail(e)
    except Exception:
        _print_unhandled_exception()
        sys.exit(1)


@click.group()
def cli():
    pass


@cli.command()
@config_options
def consistency(config_path, seed, workers, out):
    """Errors of the BRO objective and solution-set deviation across dataset sizes"""
    _run('consistency', config_path, seed, workers, out)


@cli.command()
@config_options
def normality(config_path, seed, workers, out):
    """Scaled objective errors against their predicted normal limits"""
    _run('normality', config_path, seed, workers, out)


@cli.command()
@config_options
def coverage(config_path, seed, workers, out):
    """Empirical coverage of the asymptotic confidence intervals"""
    _run('coverage', config_path, seed, workers, out)


@cli.command('optimal-value')
@config_options
def optimal_value(config_path, seed, workers, out):
    """Scaled error of the optimal BRO value (problems with a unique optimum)"""
    _run('optimal_value', config_path, seed, workers, out)


@cli.command()
@config_options
def tradeoff(config_path, seed, workers, out):
    """Posterior-mean performance and interval width of BRO solutions per risk spec"""
    _run('tradeoff', config_path, seed, workers, out)


@cli.command()
@config_options
@click.option('--data', 'data_path', type=click.Path(dir_okay=False),
              help='Observations, one per line (default: a dataset of size n_list[0] drawn from the true model)')
@click.option('--spec', 'spec_texts', multiple=True, help='Risk spec, may be repeated (default: config list)')
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False), help='Write optimizer traces to this CSV')
def solve(config_path, seed, workers, out, data_path, spec_texts, trace_path):
    """Single BRO solve, one line per risk spec"""
    try:
        config = load_config(config_path, seed=seed, workers=workers, out=out)
        data = read_samples(data_path) if data_path else None
        specs = [RiskSpec.parse(text) for text in spec_texts] or None
        os.makedirs(config.output_dir, exist_ok=True)
        log = experiment_logger(config.output_dir)
        log.info("--- start solve seed={} config={}".format(config.seed, config.config_hash()))
        post, results = solve_once(config, data, specs, log)
    except BayesRiskError as e:
        _fail(e)
    except Exception:
        _print_unhandled_exception()
        sys.exit(1)

    for label, result in results.items():
        click.echo('{} x_star={} value={:.9g} status={}'.format(
            label, ';'.join('{:.9g}'.format(v) for v in result.x_star), result.value, result.status.value))

    record = {'config_hash': config.config_hash(), 'seed': config.seed, 'posterior': post.to_dict(),
              'results': {label: result.to_dict() for label, result in results.items()}}
    write_json(record, os.path.join(config.output_dir, 'solve_{}.json'.format(config.config_hash())))
    if trace_path:
        frames = [result.trace_frame().assign(spec=label) for label, result in results.items()]
        pd.concat(frames, ignore_index=True).to_csv(trace_path, index=False, float_format='%.9g')


@cli.command('risk-eval')
@click.argument('samples', type=click.Path(dir_okay=False))
@click.option('--spec', 'spec_texts', multiple=True, required=True, help='Risk spec, may be repeated')
def risk_eval_cmd(samples, spec_texts):
    """Apply risk functionals to a file of samples (one number per line)"""
    try:
        specs = [RiskSpec.parse(text) for text in spec_texts]
        values = risk_eval(read_samples(samples), specs)
    except BayesRiskError as e:
        _fail(e)
    for label, value in values:
        click.echo('{} {:.9g}'.format(label, value))


if __name__ == '__main__':
    cli()
