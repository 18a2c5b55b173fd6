"""Per-round policies choosing the next (parameter, task) pair.

Strategy names follow ``seq-1la-<ax>-<aw>``, ``seq-2la-<ax>-<aw>``,
``joint-2la-<a>``, ``bandit`` and ``random``, where the acquisition slots take
``ucb``, ``ucbe``, ``ei``, ``pv`` or ``ra``. Ties always go to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    M_FANTASY,
    M_INNER,
    M_ONE_STEP,
    AcquisitionSpec,
    LookaheadPlan,
    evaluate,
    first_argmax,
    incumbent_value,
    phi_mean_estimate,
    two_step_la,
)
from .aggregation import AggregationSpec, aggregate_samples
from .gp import GPModel, gaussian_draws

FAMILIES = ("seq1la", "seq2la", "joint2la", "bandit", "random")
W_ACQUISITIONS = ("pv", "ra", "ucb", "ucbe")

STANDARD_STRATEGIES = (
    "seq-1la-ucb-pv",
    "seq-1la-ucbe-pv",
    "seq-1la-ucb-ra",
    "seq-1la-ra-ra",
    "seq-2la-ucb-pv",
    "seq-2la-ei-pv",
    "seq-2la-ucb-ra",
    "joint-2la-ei",
    "joint-2la-ucb",
    "bandit",
    "random",
)


@dataclass(frozen=True)
class WMode:
    """Task-selection override: ``adaptive``, ``complete`` or ``single`` on one task id."""

    kind: str = "adaptive"
    task: str | None = None

    def __post_init__(self):
        if self.kind not in ("adaptive", "complete", "single"):
            raise ValueError(f"unknown w-mode {self.kind!r}")
        if (self.kind == "single") != (self.task is not None):
            raise ValueError("single w-mode needs exactly one task id")

    @classmethod
    def parse(cls, text: str | None) -> WMode:
        if text is None or text == "adaptive":
            return cls()
        if text == "complete":
            return cls("complete")
        if text.startswith("single:") and len(text) > len("single:"):
            return cls("single", text[len("single:"):])
        raise ValueError(f"bad w-mode {text!r}; use adaptive, complete or single:<id>")

    def __str__(self) -> str:
        return f"single:{self.task}" if self.kind == "single" else self.kind


@dataclass(frozen=True)
class StrategySpec:
    family: str
    alpha_x: AcquisitionSpec | None = None
    alpha_w: AcquisitionSpec | None = None
    w_mode: WMode = field(default_factory=WMode)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown strategy family {self.family!r}")
        if self.family in ("seq1la", "seq2la"):
            if self.alpha_x is None or self.alpha_w is None:
                raise ValueError(f"{self.family} needs alpha_x and alpha_w")
            if self.alpha_w.kind not in W_ACQUISITIONS:
                raise ValueError(f"task acquisition must be one of {W_ACQUISITIONS}")
        if self.family == "joint2la" and self.alpha_x is None:
            raise ValueError("joint2la needs an acquisition")

    @property
    def name(self) -> str:
        if self.family in ("bandit", "random"):
            return self.family
        if self.family == "joint2la":
            return f"joint-2la-{self.alpha_x.kind}"
        step = "1la" if self.family == "seq1la" else "2la"
        return f"seq-{step}-{self.alpha_x.kind}-{self.alpha_w.kind}"

    @property
    def label(self) -> str:
        """Name plus a ``[w-mode]`` suffix for non-adaptive modes, used as the output key."""
        if self.w_mode.kind == "adaptive":
            return self.name
        return f"{self.name}[{self.w_mode}]"

    @property
    def uses_model(self) -> bool:
        return self.family not in ("bandit", "random")


def parse_strategy(name: str, w_mode: str | WMode | None = None) -> StrategySpec:
    """Parse a strategy name, optionally with a ``[w-mode]`` suffix."""
    text = name.strip()
    if text.endswith("]") and "[" in text:
        text, suffix = text[:-1].split("[", 1)
        if w_mode is not None and str(w_mode) != suffix:
            raise ValueError(f"conflicting w-modes for {name!r}")
        w_mode = suffix
    mode = w_mode if isinstance(w_mode, WMode) else WMode.parse(w_mode)
    if text in ("bandit", "random"):
        return StrategySpec(text, w_mode=mode)
    parts = text.split("-")
    try:
        if parts[0] == "seq" and len(parts) == 4 and parts[1] in ("1la", "2la"):
            family = "seq1la" if parts[1] == "1la" else "seq2la"
            return StrategySpec(family, AcquisitionSpec(parts[2]), AcquisitionSpec(parts[3]), mode)
        if parts[0] == "joint" and len(parts) == 3 and parts[1] == "2la":
            return StrategySpec("joint2la", AcquisitionSpec(parts[2]), None, mode)
    except ValueError as exc:
        raise ValueError(f"bad strategy {name!r}: {exc}") from None
    raise ValueError(f"unknown strategy {name!r}; known: {', '.join(STANDARD_STRATEGIES)}")


def select_w(model: GPModel, x: int, alpha_w: AcquisitionSpec, rng: np.random.Generator) -> int:
    """Task with the best one-step score of ``g(x, w)``."""
    n_w = model.space.n_w
    if alpha_w.kind == "ra":
        return first_argmax(rng.random(n_w))
    q = np.stack([np.full(n_w, x), np.arange(n_w)], axis=1)
    mean, var = model.posterior(q, full_cov=False)
    if alpha_w.kind == "pv":
        return first_argmax(var)
    return first_argmax(mean + alpha_w.beta * np.sqrt(var))


def seq_1la_select(model: GPModel, agg_std: AggregationSpec, alpha_x: AcquisitionSpec,
                   alpha_w: AcquisitionSpec, rng: np.random.Generator,
                   m: int = M_ONE_STEP, task_ids=None) -> tuple[int, int]:
    """Pick ``x`` by ``alpha_x`` on generality samples, then ``w`` by ``alpha_w`` at that ``x``."""
    space = model.space
    n_x, n_w = space.n_x, space.n_w
    if n_x == 0 or n_w == 0:
        raise ValueError("empty candidate set")
    grid = space.grid()
    base = rng.standard_normal((m, grid.shape[0]))
    mean, cov = model.posterior(grid)
    draws = gaussian_draws(mean, cov, base).reshape(m, n_x, n_w)
    phi = aggregate_samples(draws, agg_std, task_ids)
    incumbent = None
    if alpha_x.kind == "ei":
        incumbent = incumbent_value(phi_mean_estimate(agg_std, mean, phi, n_x, n_w),
                                    model.evaluated_x())
    random_values = rng.random(n_x) if alpha_x.kind == "ra" else None
    x = first_argmax(evaluate(alpha_x, phi, incumbent, random_values))
    return x, select_w(model, x, alpha_w, rng)


def seq_2la_select(model: GPModel, agg_std: AggregationSpec, alpha_x: AcquisitionSpec,
                   alpha_w: AcquisitionSpec, rng: np.random.Generator,
                   m: int = M_FANTASY, m_inner: int = M_INNER, task_ids=None) -> tuple[int, int]:
    """Pick ``x`` by two-step lookahead of ``alpha_x``; ``w`` by one-step ``alpha_w``.

    Each candidate fantasizes at the plan's uniformly drawn tasks, shared by all
    candidates in the round.
    """
    space = model.space
    plan = LookaheadPlan.draw(rng, space.n_x, space.n_w, m, m_inner)
    scores = [two_step_la(model, x0, agg_std, alpha_x, plan, task_ids=task_ids)
              for x0 in range(space.n_x)]
    x = first_argmax(scores)
    return x, select_w(model, x, alpha_w, rng)


def joint_2la_scores(model: GPModel, agg_std: AggregationSpec, alpha: AcquisitionSpec,
                     plan: LookaheadPlan, task_ids=None) -> np.ndarray:
    space = model.space
    scores = np.empty((space.n_x, space.n_w))
    for x0 in range(space.n_x):
        for w0 in range(space.n_w):
            scores[x0, w0] = two_step_la(model, x0, agg_std, alpha, plan, w=w0, task_ids=task_ids)
    return scores


def joint_2la_select(model: GPModel, agg_std: AggregationSpec, alpha: AcquisitionSpec,
                     rng: np.random.Generator, m: int = M_FANTASY, m_inner: int = M_INNER,
                     task_ids=None) -> tuple[int, int]:
    """Maximize the two-step lookahead jointly over every (x, w) pair."""
    space = model.space
    if space.n_x == 0 or space.n_w == 0:
        raise ValueError("empty candidate set")
    plan = LookaheadPlan.draw(rng, space.n_x, space.n_w, m, m_inner)
    scores = joint_2la_scores(model, agg_std, alpha, plan, task_ids)
    flat = first_argmax(scores.ravel())
    return flat // space.n_w, flat % space.n_w


class BanditState:
    """Per-arm pull counts and reward sums for UCB1-Tuned."""

    def __init__(self, n_arms: int):
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.sums = np.zeros(n_arms)
        self.sumsq = np.zeros(n_arms)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.sumsq[arm] += reward * reward


def ucb1_tuned_score(mean: float, var: float, n: int, n_j: int) -> float:
    """``mean + sqrt(ln n / n_j * min(1/4, var + sqrt(2 ln n / n_j)))``."""
    log_n = math.log(n)
    v = var + math.sqrt(2.0 * log_n / n_j)
    return mean + math.sqrt(log_n / n_j * min(0.25, v))


def bandit_select(state: BanditState, n_w: int, rng: np.random.Generator) -> tuple[int, int]:
    """Next arm: each arm once in order, then UCB1-Tuned; task drawn uniformly."""
    unpulled = np.flatnonzero(state.counts == 0)
    if unpulled.size:
        x = int(unpulled[0])
    else:
        n = state.total
        means = state.sums / state.counts
        var = np.maximum(state.sumsq / state.counts - means**2, 0.0)
        scores = [ucb1_tuned_score(means[j], var[j], n, int(state.counts[j]))
                  for j in range(state.counts.size)]
        x = first_argmax(scores)
    return x, int(rng.integers(0, n_w))


def bandit_recommend(state: BanditState) -> int:
    """Most-pulled arm."""
    return first_argmax(state.counts)


def apply_w_mode(w_mode: WMode, pair: tuple[int, int], n_w: int,
                 single_index: int | None = None) -> list[tuple[int, int]]:
    """Expand a proposed pair into this round's evaluations."""
    x, w = pair
    if w_mode.kind == "adaptive":
        return [(x, w)]
    if w_mode.kind == "single":
        if single_index is None:
            raise ValueError("single w-mode needs the task's index")
        return [(x, single_index)]
    return [(x, j) for j in range(n_w)]


class Policy:
    """Stateful strategy bound to one campaign."""

    def __init__(self, spec: StrategySpec, n_x: int, n_w: int, m_outer: int = M_ONE_STEP,
                 m_fantasy: int = M_FANTASY, m_inner: int = M_INNER):
        self.spec = spec
        self.n_x = n_x
        self.n_w = n_w
        self.m_outer = m_outer
        self.m_fantasy = m_fantasy
        self.m_inner = m_inner
        self.bandit = BanditState(n_x) if spec.family == "bandit" else None

    def propose(self, model: GPModel | None, agg_std: AggregationSpec,
                rng: np.random.Generator, task_ids=None) -> tuple[int, int]:
        spec = self.spec
        if spec.family == "random":
            return int(rng.integers(0, self.n_x)), int(rng.integers(0, self.n_w))
        if spec.family == "bandit":
            return bandit_select(self.bandit, self.n_w, rng)
        if model is None:
            raise ValueError(f"{spec.name} needs a fitted model")
        if spec.family == "seq1la":
            return seq_1la_select(model, agg_std, spec.alpha_x, spec.alpha_w, rng,
                                  self.m_outer, task_ids)
        if spec.family == "seq2la":
            return seq_2la_select(model, agg_std, spec.alpha_x, spec.alpha_w, rng,
                                  self.m_fantasy, self.m_inner, task_ids)
        return joint_2la_select(model, agg_std, spec.alpha_x, rng, self.m_fantasy,
                                self.m_inner, task_ids)

    def observe(self, x: int, w: int, y: float) -> None:
        if self.bandit is not None:
            self.bandit.update(x, y)
