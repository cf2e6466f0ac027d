"""
Minimization of a deterministic objective over a decision box, and solution-set deviation.

The objective is whatever callable x -> float the caller passes; for BRO it is built on one
fixed posterior draw set (PosteriorDraws.objective), so repeated evaluations agree exactly.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy import optimize as sp_optimize
from scipy.spatial.distance import cdist

from .common import InputError
from .utils import as_box, as_points


class Method(str, Enum):
    GRID_REFINE = 'grid_refine'
    NELDER_MEAD = 'nelder_mead'


class Status(str, Enum):
    CONVERGED = 'converged'
    NOT_CONVERGED = 'not_converged'
    FLAT = 'flat'


# box shrink factor per refinement round
SHRINK = 4.0


@dataclass(frozen=True)
class OptimizerConfig:
    """ Settings of minimize(); method None picks grid_refine for d=1 and nelder_mead otherwise. """

    method: Method = None
    grid_points: int = 101
    refine_rounds: int = 3
    nm_budget: int = 500
    tol_x: float = 1e-6
    tol_f: float = 1e-9

    def __post_init__(self):
        if self.method is not None:
            object.__setattr__(self, 'method', Method(self.method))
        if self.grid_points < 3:
            raise InputError("grid_points must be at least 3")
        if self.refine_rounds < 0 or self.nm_budget < 1:
            raise InputError("Optimizer budgets must be positive")
        if self.tol_x <= 0 or self.tol_f < 0:
            raise InputError("Optimizer tolerances must be positive")

    def method_for(self, d):
        if self.method is not None:
            return self.method
        return Method.GRID_REFINE if d == 1 else Method.NELDER_MEAD


@dataclass
class SolveResult:
    x_star: np.ndarray
    value: float
    evaluations: int
    status: Status = Status.CONVERGED
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status != Status.NOT_CONVERGED

    def to_dict(self):
        return {
            'x_star': self.x_star.tolist(),
            'value': self.value,
            'evaluations': self.evaluations,
            'status': self.status.value,
        }

    def trace_frame(self):
        """ Trace as a table with columns iteration, x_0..x_{d-1}, value. """
        rows = []
        for i, (x, value) in enumerate(self.trace):
            row = {'iteration': i}
            row.update({'x_{}'.format(j): xj for j, xj in enumerate(x)})
            row['value'] = value
            rows.append(row)
        return pd.DataFrame(rows)


class _Recorder:
    """ Wraps the objective, counting evaluations and keeping the (x, value) trace. """

    def __init__(self, objective):
        self.objective = objective
        self.trace = []

    def __call__(self, x):
        x = np.array(x, dtype=float)
        value = float(self.objective(x))
        self.trace.append((x, value))
        return value


def grid(box, grid_points):
    """ Tensor grid with grid_points per dimension, as a (grid_points^d, d) array. """
    box = as_box(box)
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.column_stack([m.ravel() for m in mesh])


def _grid_refine(recorder, box, cfg, log):
    full = box.copy()
    current = box.copy()
    best_x, best_value = None, np.inf
    for round_index in range(cfg.refine_rounds + 1):
        points = np.clip(grid(current, cfg.grid_points), full[:, 0], full[:, 1])
        values = np.array([recorder(x) for x in points])
        i = int(np.argmin(values))
        if round_index == 0 and values.max() - values.min() <= cfg.tol_f:
            return points[i], float(values[i]), Status.FLAT
        if values[i] < best_value:
            best_x, best_value = points[i], float(values[i])
        if log:
            log.debug("grid round {}: x={} value={}".format(round_index, best_x.tolist(), best_value))

        half = (current[:, 1] - current[:, 0]) / (2.0 * SHRINK)
        lo = np.clip(best_x - half, full[:, 0], full[:, 1] - 2.0 * half)
        current = np.column_stack([lo, np.minimum(lo + 2.0 * half, full[:, 1])])
    return best_x, best_value, Status.CONVERGED


def _nelder_mead(recorder, box, cfg, log):
    x0 = box.mean(axis=1)
    res = sp_optimize.minimize(recorder, x0, method='Nelder-Mead', bounds=[tuple(b) for b in box],
                               options={'maxfev': cfg.nm_budget, 'xatol': cfg.tol_x, 'fatol': cfg.tol_f})
    x_star = np.clip(res.x, box[:, 0], box[:, 1])
    value = recorder(x_star)
    values = np.array([v for _, v in recorder.trace])
    if values.max() - values.min() <= cfg.tol_f:
        status = Status.FLAT
    elif res.success:
        status = Status.CONVERGED
    else:
        status = Status.NOT_CONVERGED
        if log:
            log.warning("nelder-mead stopped before tolerance: " + str(res.message))
    return x_star, value, status


def minimize(objective, box, cfg=None, log=None):
    """
    Minimize a deterministic objective over a box.

    grid_refine evaluates a grid, shrinks the box around the best point by a factor 4 and
    repeats refine_rounds times; nelder_mead runs scipy's bounded simplex from the box centre.
    When the budget runs out first the best point so far is returned with status
    ``not_converged``; an objective constant on the first grid/simplex gives status ``flat``.

    :param objective: callable x -> float, x a (d,) vector
    :param box: sequence of (lo, hi) pairs
    :type cfg: OptimizerConfig
    :param log: optional reference to a logger
    :type log: logging.Logger
    :rtype: SolveResult
    """
    box = as_box(box)
    cfg = cfg or OptimizerConfig()
    recorder = _Recorder(objective)
    if cfg.method_for(box.shape[0]) == Method.GRID_REFINE:
        x_star, value, status = _grid_refine(recorder, box, cfg, log)
    else:
        x_star, value, status = _nelder_mead(recorder, box, cfg, log)
    return SolveResult(np.asarray(x_star, dtype=float), value, len(recorder.trace), status, recorder.trace)


def argmin_set(objective, box, grid_points=101, tol_f=1e-9):
    """
    Grid proxy of the argmin set: all grid points within tol_f of the grid minimum.

    :rtype: numpy.ndarray of shape (k, d)
    """
    if grid_points < 2:
        raise InputError("grid_points must be at least 2")
    points = grid(box, grid_points)
    values = np.array([float(objective(x)) for x in points])
    return points[values <= values.min() + tol_f]


def solution_deviation(a, b):
    """
    One-sided deviation D(A, B) = max over a in A of the Euclidean distance from a to B.

    :param a: nonempty finite set of points (scalars or vectors)
    :param b: nonempty finite set of points
    :rtype: float
    """
    a, b = as_points(a), as_points(b)
    if a.size == 0 or b.size == 0:
        raise InputError("Deviation needs two nonempty sets")
    if a.shape[1] != b.shape[1]:
        raise InputError("Point sets differ in dimension")
    return float(cdist(a, b).min(axis=1).max())


def true_solution(problem, cfg=None):
    """
    Optimal set S of the true objective H(., theta_c) for a problem.

    Uses the problem's closed-form optimum when known. A problem without a unique optimum gets the
    grid proxy of its whole argmin set, the same proxy argmin_set gives for S_n.

    :rtype: numpy.ndarray of shape (k, d)
    """
    cfg = cfg or OptimizerConfig()
    if problem.x_star is not None:
        return problem.x_star.reshape(1, problem.d)
    if not problem.unique_optimum:
        return argmin_set(problem.true_value, problem.box, cfg.grid_points, cfg.tol_f)
    result = minimize(problem.true_value, problem.box, cfg)
    if result.status == Status.FLAT:
        return grid(problem.box, cfg.grid_points)
    return result.x_star.reshape(1, problem.d)
