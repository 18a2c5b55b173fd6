"""Sample-average acquisition functions and the two-step lookahead.

All one-step functions reduce along axis 0 (the draw axis), so an ``(M, n)``
matrix of generality samples scores ``n`` candidates at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregation import AggregationSpec, aggregate_samples
from .gp import GPModel, gaussian_draws

KINDS = ("ucb", "ucbe", "ei", "pv", "ra")
DEFAULT_BETA = {"ucb": 0.5, "ucbe": 5.0}

M_ONE_STEP = 512
M_FANTASY = 3
M_INNER = 64


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown acquisition {self.kind!r}; expected one of {KINDS}")
        if self.beta is None:
            object.__setattr__(self, "beta", DEFAULT_BETA.get(self.kind, 0.0))
        if self.beta < 0:
            raise ValueError("beta must be non-negative")


def ucb(samples: np.ndarray, beta: float) -> np.ndarray:
    """Sample mean plus ``beta`` times the sample standard deviation (``n - 1`` denominator)."""
    samples = np.asarray(samples, dtype=np.float64)
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return mean
    return mean + beta * samples.std(axis=0, ddof=1)


def ei(samples: np.ndarray, incumbent: float) -> np.ndarray:
    """Mean improvement over ``incumbent``; with no finite incumbent, the plain sample mean."""
    samples = np.asarray(samples, dtype=np.float64)
    if not np.isfinite(incumbent):
        return samples.mean(axis=0)
    return np.maximum(samples - incumbent, 0.0).mean(axis=0)


def pv(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    return samples.var(axis=0, ddof=1)


def ra(rng: np.random.Generator, size=None):
    """Uniform values in ``[0, 1)`` from the campaign stream."""
    return rng.random(size)


def evaluate(spec: AcquisitionSpec, samples: np.ndarray, incumbent: float | None = None,
             random_values: np.ndarray | None = None) -> np.ndarray:
    """Score each column of ``samples``; ``ra`` needs pre-drawn ``random_values``."""
    if spec.kind in ("ucb", "ucbe"):
        return ucb(samples, spec.beta)
    if spec.kind == "pv":
        return pv(samples)
    if spec.kind == "ei":
        return ei(samples, -np.inf if incumbent is None else incumbent)
    if random_values is None:
        raise ValueError("random acquisition needs pre-drawn values")
    return np.asarray(random_values, dtype=np.float64)


def first_argmax(values: np.ndarray) -> int:
    """Argmax with ties resolved to the lowest index."""
    return int(np.argmax(np.asarray(values)))


def phi_mean_estimate(spec: AggregationSpec, mean: np.ndarray, phi_samples: np.ndarray,
                      n_x: int, n_w: int, task_ids=None) -> np.ndarray:
    """Posterior expectation of the generality per parameter point.

    Exact for the mean kind (linearity), otherwise the sample average.
    """
    if spec.kind == "mean":
        return mean.reshape(n_x, n_w).mean(axis=1)
    return phi_samples.mean(axis=0)


def incumbent_value(phi_mean: np.ndarray, evaluated_x: np.ndarray) -> float:
    """Best expected generality among parameter points that have any observation."""
    if len(evaluated_x) == 0:
        return -np.inf
    return float(np.max(phi_mean[evaluated_x]))


@dataclass(frozen=True, eq=False)
class LookaheadPlan:
    """Common random numbers for one acquisition round of two-step lookahead.

    ``fantasy_normals`` drive the fantasy values, ``fantasy_tasks`` give the task
    used when a candidate is scored without one, ``inner_base`` drives the
    fantasy-posterior draws and ``inner_random`` the ``ra`` inner acquisition.
    """

    fantasy_normals: np.ndarray  # (m,)
    fantasy_tasks: np.ndarray  # (m,)
    inner_base: np.ndarray  # (m_inner, n_x * n_w)
    inner_random: np.ndarray  # (m, n_x)

    @property
    def m(self) -> int:
        return self.fantasy_normals.size

    @classmethod
    def draw(cls, rng: np.random.Generator, n_x: int, n_w: int,
             m: int = M_FANTASY, m_inner: int = M_INNER) -> LookaheadPlan:
        if m < 1 or m_inner < 1:
            raise ValueError("fantasy and inner draw counts must be positive")
        return cls(
            fantasy_normals=rng.standard_normal(m),
            fantasy_tasks=rng.integers(0, n_w, size=m),
            inner_base=rng.standard_normal((m_inner, n_x * n_w)),
            inner_random=rng.random((m, n_x)),
        )


def inner_value(model: GPModel, agg_std: AggregationSpec, inner: AcquisitionSpec,
                base: np.ndarray, random_values: np.ndarray | None, task_ids=None) -> float:
    """Max over parameter points of the one-step acquisition on ``model``'s generality posterior."""
    space = model.space
    n_x, n_w = space.n_x, space.n_w
    grid = space.grid()
    mean, cov = model.posterior(grid)
    draws = gaussian_draws(mean, cov, base).reshape(-1, n_x, n_w)
    phi = aggregate_samples(draws, agg_std, task_ids)
    incumbent = None
    if inner.kind == "ei":
        incumbent = incumbent_value(
            phi_mean_estimate(agg_std, mean, phi, n_x, n_w), model.evaluated_x()
        )
    return float(np.max(evaluate(inner, phi, incumbent, random_values)))


def fantasy_values(model: GPModel, x0: int, tasks: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Fantasy outcomes at ``(x0, tasks[j])`` driven by ``normals[j]`` (standardized units)."""
    q = np.stack([np.full(len(tasks), x0), tasks], axis=1)
    mean, var = model.posterior(q, full_cov=False)
    return mean + np.sqrt(var) * normals


def two_step_la(model: GPModel, x0: int, agg_std: AggregationSpec, inner: AcquisitionSpec,
                plan: LookaheadPlan, w: int | None = None, task_ids=None) -> float:
    """Two-step lookahead value of parameter point ``x0``.

    For each fantasy the model is conditioned on a draw at ``(x0, w)`` (or at the
    plan's task when ``w`` is None), the inner acquisition is maximized over all
    parameter points, and the maxima are averaged. ``agg_std`` must already be
    expressed in the model's standardized units.
    """
    tasks = plan.fantasy_tasks if w is None else np.full(plan.m, w)
    ys = fantasy_values(model, x0, tasks, plan.fantasy_normals)
    total = 0.0
    for j in range(plan.m):
        fantasy = model.condition_on_fantasy(x0, int(tasks[j]), float(ys[j]))
        total += inner_value(fantasy, agg_std, inner, plan.inner_base,
                             plan.inner_random[j], task_ids)
    return total / plan.m
