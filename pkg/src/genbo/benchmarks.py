"""Benchmark surfaces: file I/O, synthetic generation, task splits and grid-search analysis."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .aggregation import AggregationSpec, generality_table, true_generality
from .core import (
    Fingerprint,
    LookupSurface,
    MissingCellError,
    ParameterPoint,
    SurfaceFormatError,
    TaskPoint,
)
from .tanimoto import tanimoto_matrix

SURFACE_COLUMNS = ("x_id", "w_id", "y", "x_bits", "w_bits")
SPLIT_METHODS = ("random", "fps", "average")

__all__ = [
    "LookupSurface", "load_surface", "write_surface", "synthetic_surface", "SplitSpec",
    "split_tasks", "grid_search_optimum", "normalized_generality_score",
    "transferability_sweep", "SweepResult",
]


def load_surface(path: str | Path) -> LookupSurface:
    """Read a complete surface CSV (``x_id, w_id, y, x_bits, w_bits``)."""
    path = Path(path)
    x_hex: dict[str, str] = {}
    w_hex: dict[str, str] = {}
    cells: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SurfaceFormatError(f"{path}: empty file") from None
        missing = [c for c in SURFACE_COLUMNS if c not in header]
        if missing:
            raise SurfaceFormatError(f"{path}: missing columns {missing}")
        col = {c: header.index(c) for c in SURFACE_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise SurfaceFormatError(f"{path}:{lineno}: expected {len(header)} fields")
            x_id, w_id = row[col["x_id"]].strip(), row[col["w_id"]].strip()
            try:
                y = float(row[col["y"]])
            except ValueError:
                raise SurfaceFormatError(f"{path}:{lineno}: bad outcome {row[col['y']]!r}") from None
            if not math.isfinite(y):
                raise SurfaceFormatError(f"{path}:{lineno}: non-finite outcome")
            for ident, text, seen, what in ((x_id, row[col["x_bits"]], x_hex, "parameter"),
                                            (w_id, row[col["w_bits"]], w_hex, "task")):
                text = text.strip().lower()
                if ident in seen and seen[ident] != text:
                    raise SurfaceFormatError(
                        f"{path}:{lineno}: inconsistent fingerprint for {what} {ident!r}")
                seen.setdefault(ident, text)
            if (x_id, w_id) in cells:
                raise SurfaceFormatError(f"{path}:{lineno}: duplicate cell ({x_id}, {w_id})")
            cells[(x_id, w_id)] = y
    if not cells:
        raise SurfaceFormatError(f"{path}: no data rows")
    for x_id in x_hex:
        for w_id in w_hex:
            if (x_id, w_id) not in cells:
                raise MissingCellError(f"{path}: missing cell ({x_id}, {w_id})")
    try:
        params = [ParameterPoint(i, Fingerprint.from_hex(h)) for i, h in x_hex.items()]
        tasks = [TaskPoint(i, Fingerprint.from_hex(h)) for i, h in w_hex.items()]
    except SurfaceFormatError as exc:
        raise SurfaceFormatError(f"{path}: {exc}") from None
    table = np.array([[cells[(x, w)] for w in w_hex] for x in x_hex])
    try:
        return LookupSurface(params, tasks, table)
    except Exception as exc:
        raise SurfaceFormatError(f"{path}: {exc}") from None


def write_surface(surface: LookupSurface, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SURFACE_COLUMNS)
        for i, p in enumerate(surface.parameter_points):
            xh = p.features.to_hex()
            for j, t in enumerate(surface.task_points):
                writer.writerow((p.id, t.id, repr(float(surface.table[i, j])), xh,
                                 t.features.to_hex()))


def _random_bits(rng: np.random.Generator, n: int, n_bits: int, density: float) -> np.ndarray:
    bits = rng.random((n, n_bits)) < density
    empty = ~bits.any(axis=1)
    bits[empty, rng.integers(0, n_bits, size=int(empty.sum()))] = True
    return bits


def _component_grid(n_x: int) -> list[tuple[int, int]]:
    """First ``n_x`` (primary, secondary) component pairs of a near-square pool."""
    n_primary = max(1, math.ceil(math.sqrt(n_x)))
    n_secondary = math.ceil(n_x / n_primary)
    return [(a, b) for a in range(n_primary) for b in range(n_secondary)][:n_x]


def synthetic_surface(seed: int, n_x: int, n_w: int, needle_fraction: float = 0.25,
                      noise_scale: float = 0.05, n_bits: int = 1024,
                      density: float = 0.05) -> LookupSurface:
    """Needle-in-a-haystack surface with one planted dominant condition.

    Conditions are (primary, secondary) component pairs, e.g. catalyst and
    base, featurized as the concatenation of the two component fingerprints.
    Most cells are ``|N(0, noise_scale)|``. ``ceil(needle_fraction * n_x)``
    planted conditions score in [0.6, 1.0] on random, overlapping task subsets;
    they share one primary component where possible, so good conditions are
    neighbours in fingerprint space. The dominant one covers more tasks at
    higher values and always has the best mean; ``meta['dominant']`` names it.
    """
    if n_x < 1 or n_w < 1 or n_bits < 1:
        raise ValueError(f"degenerate surface size n_x={n_x}, n_w={n_w}, n_bits={n_bits}")
    if not 0 < needle_fraction <= 1:
        raise ValueError("needle_fraction must be in (0, 1]")
    if noise_scale < 0:
        raise ValueError("noise_scale must be non-negative")
    rng = np.random.default_rng(seed)
    pairs = _component_grid(n_x)
    primary = _random_bits(rng, max(a for a, _ in pairs) + 1, n_bits, density)
    secondary = _random_bits(rng, max(b for _, b in pairs) + 1, n_bits, density)
    x_bits = np.array([np.concatenate([primary[a], secondary[b]]) for a, b in pairs])
    w_bits = _random_bits(rng, n_w, n_bits, density)
    table = np.abs(rng.normal(0.0, noise_scale, size=(n_x, n_w)))

    n_needles = max(1, math.ceil(needle_fraction * n_x))
    good = int(rng.integers(0, primary.shape[0]))
    family = [i for i, (a, _) in enumerate(pairs) if a == good]
    rest = [i for i in range(n_x) if i not in family]
    needles = [int(i) for i in rng.permutation(family)[:n_needles]]
    if len(needles) < n_needles:
        needles += [int(i) for i in rng.permutation(rest)[: n_needles - len(needles)]]
    dominant = needles[0]
    k_dominant = max(1, math.ceil(0.6 * n_w))
    k_other = max(1, math.floor(0.4 * n_w))
    cover = rng.choice(n_w, size=k_dominant, replace=False)
    table[dominant, cover] = rng.uniform(0.8, 1.0, size=k_dominant)
    for x in needles[1:]:
        cover = rng.choice(n_w, size=k_other, replace=False)
        table[x, cover] = rng.uniform(0.6, 0.9, size=k_other)
    means = table.mean(axis=1)
    others = np.delete(np.arange(n_x), dominant)
    while others.size and means[others].max() >= means[dominant]:
        table[others] *= 0.9
        means = table.mean(axis=1)

    wx = len(str(n_x - 1))
    ww = len(str(n_w - 1))
    params = [ParameterPoint(f"C{i:0{wx}d}", Fingerprint(x_bits[i]), (f"P{a}", f"Q{b}"))
              for i, (a, b) in enumerate(pairs)]
    tasks = [TaskPoint(f"S{j:0{ww}d}", Fingerprint(w_bits[j])) for j in range(n_w)]
    meta = {"seed": seed, "dominant": params[dominant].id,
            "needles": [params[i].id for i in needles]}
    return LookupSurface(params, tasks, table, meta)


@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    method: str = "random"
    seed: int = 0

    def __post_init__(self):
        if self.method not in SPLIT_METHODS:
            raise ValueError(f"unknown split method {self.method!r}; expected one of "
                             f"{{{', '.join(SPLIT_METHODS)}}}")


def _similarity(tasks: Sequence[TaskPoint]) -> np.ndarray:
    return tanimoto_matrix(np.array([t.features.bits for t in tasks]),
                           np.array([t.features.bits for t in tasks]))


def split_tasks(tasks: Sequence[TaskPoint], spec: SplitSpec) -> tuple[list[TaskPoint], list[TaskPoint]]:
    """Choose ``spec.n_train`` tasks; the rest (in input order) form the test set.

    ``fps`` returns the train tasks in pick order: lowest index first, then
    repeatedly the task farthest (1 - Tanimoto) from everything chosen.
    ``average`` takes the tasks most similar on average to the other tasks.
    """
    n = len(tasks)
    if not 1 <= spec.n_train < n:
        raise ValueError(f"n_train must be in [1, {n - 1}], got {spec.n_train}")
    if spec.method == "random":
        rng = np.random.default_rng(spec.seed)
        chosen = sorted(int(i) for i in rng.choice(n, size=spec.n_train, replace=False))
    elif spec.method == "fps":
        dist = 1.0 - _similarity(tasks)
        chosen = [0]
        nearest = dist[0].copy()
        while len(chosen) < spec.n_train:
            nearest[chosen] = -np.inf
            nxt = int(np.argmax(nearest))
            chosen.append(nxt)
            nearest = np.minimum(nearest, dist[nxt])
    else:
        sim = _similarity(tasks)
        np.fill_diagonal(sim, 0.0)
        avg = sim.sum(axis=1) / (n - 1)
        chosen = [int(i) for i in np.argsort(-avg, kind="stable")[: spec.n_train]]
    picked = set(chosen)
    return [tasks[i] for i in chosen], [t for i, t in enumerate(tasks) if i not in picked]


def grid_search_optimum(surface: LookupSurface, task_ids: Sequence[str],
                        agg: AggregationSpec) -> tuple[str, float]:
    """Exhaustive argmax of the true generality; ties go to the lowest index."""
    values = generality_table(surface, task_ids, agg)
    best = int(np.argmax(values))
    return surface.parameter_points[best].id, float(values[best])


def normalized_generality_score(surface: LookupSurface, x_id: str, test_ids: Sequence[str],
                                agg: AggregationSpec) -> float:
    """Test-set generality of ``x_id`` rescaled so the worst condition is 0 and the best 1."""
    values = generality_table(surface, test_ids, agg)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return 1.0
    v = true_generality(surface, x_id, test_ids, agg)
    return (v - lo) / (hi - lo)


@dataclass
class SweepResult:
    rows: list[tuple[str, int, int, float]]  # method, n_train, split_seed, score
    summary: list[tuple[str, int, float, float, int]]  # method, n_train, mean, sem, n_splits
    rho: dict[str, float]

    def mean_score(self, method: str, n_train: int) -> float:
        for m, n, mean, _, _ in self.summary:
            if m == method and n == n_train:
                return mean
        raise KeyError((method, n_train))


def held_out_split(surface: LookupSurface, split_seed: int,
                   test_fraction: float) -> tuple[list[TaskPoint], list[TaskPoint]]:
    """Random (train pool, test set) partition of every task of ``surface``."""
    n = len(surface.task_points)
    n_test = min(n - 1, max(1, round(test_fraction * n)))
    order = np.random.default_rng(split_seed).permutation(n)
    test_idx = set(int(i) for i in order[:n_test])
    pool = [t for i, t in enumerate(surface.task_points) if i not in test_idx]
    test = [t for i, t in enumerate(surface.task_points) if i in test_idx]
    return pool, test


def transferability_sweep(surface: LookupSurface, sizes: Sequence[int], agg: AggregationSpec,
                          n_splits: int = 30, methods: Sequence[str] = SPLIT_METHODS,
                          test_fraction: float = 0.5, seed0: int = 0) -> SweepResult:
    """Grid-search on subsampled train sets and score the optimum on a held-out test set.

    Each split seed fixes one (train pool, test set) partition; every method and
    size then subsamples that pool. ``rho`` is Spearman's correlation between
    size and mean score per method.
    """
    for m in methods:
        SplitSpec(1, m)
    if not sizes:
        raise ValueError("no train sizes given")
    rows: list[tuple[str, int, int, float]] = []
    for split in range(seed0, seed0 + n_splits):
        pool, test = held_out_split(surface, split, test_fraction)
        too_big = [s for s in sizes if not 1 <= s < len(pool)]
        if too_big:
            raise ValueError(f"train sizes {too_big} exceed the train pool of {len(pool)} tasks")
        test_ids = [t.id for t in test]
        for method in methods:
            for size in sizes:
                train, _ = split_tasks(pool, SplitSpec(size, method, split))
                x_best, _ = grid_search_optimum(surface, [t.id for t in train], agg)
                rows.append((method, size, split,
                             normalized_generality_score(surface, x_best, test_ids, agg)))
    summary = []
    rho = {}
    for method in methods:
        means = []
        for size in sizes:
            scores = np.array([r[3] for r in rows if r[0] == method and r[1] == size])
            sem = float(scores.std(ddof=1) / math.sqrt(scores.size)) if scores.size > 1 else 0.0
            summary.append((method, size, float(scores.mean()), sem, int(scores.size)))
            means.append(float(scores.mean()))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = stats.spearmanr(list(sizes), means).statistic if len(sizes) > 1 else math.nan
        rho[method] = float(r)
    return SweepResult(rows, summary, rho)
