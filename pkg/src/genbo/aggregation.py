"""Generality aggregations: reduce per-task outcomes to one score per parameter point.

Acquisition works on posterior samples and uses a sigmoid for the threshold
kind; evaluation (:func:`true_generality`) counts strictly above the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .core import LookupSurface

KINDS = ("mean", "threshold", "mse", "min")

DEFAULT_TEMPERATURE = 0.01

# Native-unit thresholds used for the four reaction benchmarks (% or kcal/mol).
DATASET_THRESHOLDS = {
    "pd-coupling": 7.5,
    "ns-acetal": 2.0,
    "borylation": 90.0,
    "deoxyfluorination": 90.0,
}


@dataclass(frozen=True)
class AggregationSpec:
    """How per-task outcomes are reduced.

    ``threshold`` and ``optima`` are in outcome units; ``temperature`` is the
    sigmoid sharpness applied to standardized outcomes during acquisition.
    """

    kind: str = "mean"
    threshold: float | None = None
    temperature: float = DEFAULT_TEMPERATURE
    optima: Mapping[str, float] | None = field(default=None, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown aggregation kind {self.kind!r}; expected one of {KINDS}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.kind == "threshold" and self.threshold is None:
            raise ValueError("threshold aggregation needs a threshold")
        if self.kind == "mse" and not self.optima:
            raise ValueError("mse aggregation needs per-task optima")
        if self.optima is not None:
            object.__setattr__(self, "optima", dict(self.optima))

    def check_tasks(self, task_ids: Sequence[str]) -> None:
        if self.kind == "mse":
            missing = [w for w in task_ids if w not in self.optima]
            if missing:
                raise ValueError(f"mse aggregation lacks optima for tasks {missing}")

    def optima_vector(self, task_ids: Sequence[str]) -> np.ndarray:
        self.check_tasks(task_ids)
        return np.array([self.optima[w] for w in task_ids], dtype=np.float64)

    def standardized(self, mean: float, scale: float) -> AggregationSpec:
        """The same aggregation expressed for outcomes mapped by ``(y - mean) / scale``."""
        thr = None if self.threshold is None else (self.threshold - mean) / scale
        opt = None
        if self.optima is not None:
            opt = {k: (v - mean) / scale for k, v in self.optima.items()}
        return AggregationSpec(self.kind, thr, self.temperature, opt)


def aggregate_samples(
    samples: np.ndarray,
    spec: AggregationSpec,
    task_ids: Sequence[str] | None = None,
) -> np.ndarray:
    """Aggregate over the last axis (tasks) of ``samples``.

    A ``(M, n_tasks)`` matrix for one candidate gives ``M`` generality samples;
    leading axes are carried through, so ``(M, n_x, n_tasks)`` gives ``(M, n_x)``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n_tasks = samples.shape[-1]
    if task_ids is not None and len(task_ids) != n_tasks:
        raise ValueError(f"samples have {n_tasks} task columns, expected {len(task_ids)}")
    if spec.kind == "mean":
        return samples.mean(axis=-1)
    if spec.kind == "min":
        return samples.min(axis=-1)
    if spec.kind == "threshold":
        return expit((samples - spec.threshold) / spec.temperature).sum(axis=-1)
    if task_ids is None:
        raise ValueError("mse aggregation needs the task ids of the sample columns")
    opt = spec.optima_vector(task_ids)
    return -np.mean((opt - samples) ** 2, axis=-1)


def hard_aggregate(values: np.ndarray, spec: AggregationSpec, task_ids: Sequence[str]) -> np.ndarray:
    """Evaluation form of the aggregation on true outcomes (last axis = tasks)."""
    values = np.asarray(values, dtype=np.float64)
    if spec.kind == "threshold":
        return (values > spec.threshold).sum(axis=-1).astype(np.float64)
    return aggregate_samples(values, spec, task_ids)


def generality_table(surface: LookupSurface, task_ids: Sequence[str], spec: AggregationSpec) -> np.ndarray:
    """True generality of every parameter point of ``surface`` on ``task_ids``."""
    if len(task_ids) == 0:
        raise ValueError("empty task set")
    return hard_aggregate(surface.column_block(task_ids), spec, task_ids)


def true_generality(surface: LookupSurface, x_id: str, task_ids: Sequence[str], spec: AggregationSpec) -> float:
    if len(task_ids) == 0:
        raise ValueError("empty task set")
    row = np.array([surface.resolve(x_id, w) for w in task_ids])
    return float(hard_aggregate(row, spec, task_ids))
