"""Campaign loop: initialize, then fit / acquire / observe until the budget is spent."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .acquisition import M_FANTASY, M_INNER, M_ONE_STEP, first_argmax
from .aggregation import AggregationSpec, aggregate_samples, generality_table
from .core import GeneralityProblem, Observation, ObservationSet
from .gp import GPModel, PairSpace, fit_indices, gaussian_draws
from .strategies import Policy, StrategySpec, apply_w_mode, bandit_recommend, parse_strategy

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("strategy", "seed", "iteration", "evals_used", "x_id", "w_id", "y",
                      "rec_x_id", "true_generality", "gap")
SUMMARY_COLUMNS = ("strategy", "evals_used", "mean_gap", "sem_gap", "n_seeds")


@dataclass(frozen=True)
class CampaignSettings:
    n_init: int = 2
    m_outer: int = M_ONE_STEP
    m_fantasy: int = M_FANTASY
    m_inner: int = M_INNER


@dataclass(frozen=True)
class EvaluationRecord:
    iteration: int
    evals_used: int
    x_id: str
    w_id: str
    y: float
    rec_x_id: str
    true_generality: float
    gap: float


@dataclass
class Trajectory:
    strategy: str
    seed: int
    records: list[EvaluationRecord] = field(default_factory=list)
    y0: float = math.nan
    y_star: float = math.nan
    error: str | None = None

    @property
    def evals_used(self) -> int:
        return self.records[-1].evals_used if self.records else 0

    @property
    def final_recommendation(self) -> str | None:
        return self.records[-1].rec_x_id if self.records else None

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap if self.records else math.nan

    def gap_at(self, evals: int) -> float:
        """GAP of the recommendation available after ``evals`` evaluations (carried forward)."""
        value = math.nan
        for rec in self.records:
            if rec.evals_used > evals:
                break
            value = rec.gap
        return value

    def rows(self) -> list[tuple]:
        return [
            (self.strategy, self.seed, r.iteration, r.evals_used, r.x_id, r.w_id, r.y,
             r.rec_x_id, r.true_generality, r.gap)
            for r in self.records
        ]


def gap(y_k: float, y_0: float, y_star: float) -> float:
    """Normalized progress ``(y_k - y_0) / (y_star - y_0)``; a flat problem scores 1."""
    if y_star == y_0:
        return 1.0
    return (y_k - y_0) / (y_star - y_0)


def recommend(model: GPModel, agg_std: AggregationSpec, rng: np.random.Generator,
              m: int = M_ONE_STEP, task_ids=None) -> int:
    """Parameter index maximizing the posterior expectation of the generality.

    The mean kind uses the exact Gaussian mean; other kinds average ``m`` draws.
    """
    space = model.space
    n_x, n_w = space.n_x, space.n_w
    grid = space.grid()
    if agg_std.kind == "mean":
        mean, _ = model.posterior(grid, full_cov=False)
        return first_argmax(mean.reshape(n_x, n_w).mean(axis=1))
    mean, cov = model.posterior(grid)
    draws = gaussian_draws(mean, cov, rng.standard_normal((m, grid.shape[0])))
    phi = aggregate_samples(draws.reshape(m, n_x, n_w), agg_std, task_ids)
    return first_argmax(phi.mean(axis=0))


def run_campaign(problem: GeneralityProblem, strategy: StrategySpec | str, seed: int,
                 settings: CampaignSettings = CampaignSettings()) -> Trajectory:
    """Run one seeded campaign; every random choice comes from one generator."""
    spec = parse_strategy(strategy) if isinstance(strategy, str) else strategy
    budget = int(problem.budget)
    n_x, n_w = problem.n_x, problem.n_w
    x_ids, w_ids = problem.x_ids, problem.train_ids
    if spec.family != "bandit" and budget < settings.n_init:
        raise ValueError(f"budget {budget} is smaller than n_init {settings.n_init}")
    if spec.uses_model and settings.n_init < 1:
        raise ValueError(f"{spec.name} needs n_init >= 1 to fit its first model")
    single_index = None
    if spec.w_mode.kind == "single":
        if spec.w_mode.task not in w_ids:
            raise ValueError(f"single-mode task {spec.w_mode.task!r} is not a train task")
        single_index = problem.w_index(spec.w_mode.task)

    rng = np.random.default_rng(seed)
    table = problem.oracle.column_block(w_ids)
    truth = generality_table(problem.oracle, w_ids, problem.aggregation)
    y_star = float(truth.max())
    policy = Policy(spec, n_x, n_w, settings.m_outer, settings.m_fantasy, settings.m_inner)
    space = PairSpace.from_problem(problem) if spec.uses_model else None
    data = ObservationSet()
    idx: list[tuple[int, int]] = []
    model: GPModel | None = None
    agg_std = problem.aggregation

    def observe(x: int, w: int) -> float:
        y = float(table[x, w])
        data.append(Observation(x_ids[x], w_ids[w], y))
        idx.append((x, w))
        policy.observe(x, w, y)
        return y

    def refresh() -> int:
        nonlocal model, agg_std
        if spec.family == "bandit":
            return bandit_recommend(policy.bandit)
        if spec.family == "random":
            return int(rng.integers(0, n_x))
        model = fit_indices(space, np.array(idx), np.array([o.y for o in data]))
        agg_std = problem.aggregation.standardized(model.y_mean, model.y_scale)
        return recommend(model, agg_std, rng, settings.m_outer, w_ids)

    traj = Trajectory(spec.label, seed, y_star=y_star)
    initial: list[tuple[int, int, float]] = []
    if spec.family != "bandit" and settings.n_init > 0:
        allowed_w = [single_index] if single_index is not None else list(range(n_w))
        pool = [(x, w) for x in range(n_x) for w in allowed_w]
        if settings.n_init > len(pool):
            raise ValueError(f"n_init {settings.n_init} exceeds {len(pool)} candidate pairs")
        for p in rng.choice(len(pool), size=settings.n_init, replace=False):
            x, w = pool[int(p)]
            initial.append((x, w, observe(x, w)))
    rec = refresh() if (initial or not spec.uses_model) else 0
    y0 = float(truth[rec])
    traj.y0 = y0
    for i, (x, w, y) in enumerate(initial, start=1):
        traj.records.append(EvaluationRecord(0, i, x_ids[x], w_ids[w], y, x_ids[rec], y0, 0.0))

    evals = len(initial)
    iteration = 0
    while evals < budget:
        iteration += 1
        pair = policy.propose(model, agg_std, rng, w_ids)
        pairs = apply_w_mode(spec.w_mode, pair, n_w, single_index)[: budget - evals]
        observed = [(x, w, observe(x, w)) for x, w in pairs]
        prev_rec = rec
        rec = refresh()
        for i, (x, w, y) in enumerate(observed):
            evals += 1
            r = rec if i == len(observed) - 1 else prev_rec
            tg = float(truth[r])
            traj.records.append(EvaluationRecord(iteration, evals, x_ids[x], w_ids[w], y,
                                                 x_ids[r], tg, gap(tg, y0, y_star)))
    log.debug("%s seed %d: final gap %.4f", spec.label, seed, traj.final_gap)
    return traj


def _run_one(args) -> Trajectory:
    problem, spec, seed, settings = args
    try:
        return run_campaign(problem, spec, seed, settings)
    except Exception as exc:  # recorded per campaign; the caller decides the exit status
        log.error("campaign %s seed %d failed: %s", spec.label, seed, exc)
        return Trajectory(spec.label, seed, error=f"{type(exc).__name__}: {exc}")


def run_many(problem: GeneralityProblem, strategies: Sequence[StrategySpec], seeds: Sequence[int],
             settings: CampaignSettings = CampaignSettings(), jobs: int | None = None) -> list[Trajectory]:
    """Run every (strategy, seed) campaign; results come back in (strategy, seed) order."""
    tasks = [(problem, s, int(seed), settings) for s in strategies for seed in seeds]
    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, min(jobs, len(tasks)))
    if jobs == 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    evals_used: int
    mean_gap: float
    sem_gap: float
    n_seeds: int


def aggregate_runs(trajectories: Iterable[Trajectory]) -> list[SummaryRow]:
    """Mean and standard error of GAP per evaluation count, per strategy.

    Runs shorter than the longest carry their final value forward.
    """
    groups: dict[str, list[Trajectory]] = {}
    for t in trajectories:
        if t.error is None and t.records:
            groups.setdefault(t.strategy, []).append(t)
    rows = []
    for name, runs in groups.items():
        horizon = max(t.evals_used for t in runs)
        for e in range(1, horizon + 1):
            values = np.array([t.gap_at(e) for t in runs])
            values = values[~np.isnan(values)]
            if values.size == 0:
                continue
            sem = 0.0
            if values.size > 1 and np.ptp(values) > 0:
                sem = float(values.std(ddof=1) / math.sqrt(values.size))
            rows.append(SummaryRow(name, e, float(values.mean()), sem, int(values.size)))
    return rows


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    write_csv(path, TRAJECTORY_COLUMNS, traj.rows())


def write_summary(rows: Sequence[SummaryRow], path: str | Path) -> None:
    write_csv(path, SUMMARY_COLUMNS,
              [(r.strategy, r.evals_used, r.mean_gap, r.sem_gap, r.n_seeds) for r in rows])
