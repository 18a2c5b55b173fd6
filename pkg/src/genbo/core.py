"""Domain types: fingerprints, search spaces, observations and problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

if TYPE_CHECKING:
    from .aggregation import AggregationSpec

DEFAULT_BITS = 1024


class GenboError(Exception):
    """Base class for errors raised by this package."""


class MissingCellError(GenboError, KeyError):
    """A (parameter, task) pair is not present in a lookup surface."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class SurfaceFormatError(GenboError, ValueError):
    """A surface file is malformed or internally inconsistent."""


class ProblemError(GenboError, ValueError):
    """A problem definition violates one of its invariants."""


class Fingerprint:
    """Immutable fixed-width binary feature vector."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] | np.ndarray):
        if not isinstance(bits, (np.ndarray, list, tuple)):
            bits = list(bits)
        arr = np.array(bits, dtype=bool).ravel()
        arr.setflags(write=False)
        self._bits = arr

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return self._bits.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return len(self) == len(other) and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash((len(self), np.packbits(self._bits).tobytes()))

    def __repr__(self) -> str:
        return f"Fingerprint(len={len(self)}, on={int(self._bits.sum())})"

    def to_hex(self) -> str:
        """Lowercase hex, most-significant nibble first, padded to ``ceil(L/4)`` chars."""
        length = len(self)
        n_chars = max(1, math.ceil(length / 4))
        if length == 0:
            return "0"
        value = int("".join("1" if b else "0" for b in self._bits), 2)
        return format(value, f"0{n_chars}x")

    @classmethod
    def from_hex(cls, text: str, length: int | None = None) -> Fingerprint:
        text = text.strip().lower()
        if not text or any(c not in "0123456789abcdef" for c in text):
            raise SurfaceFormatError(f"malformed hex fingerprint {text!r}")
        if length is None:
            length = 4 * len(text)
        value = int(text, 16)
        if value.bit_length() > length:
            raise SurfaceFormatError(f"hex fingerprint {text!r} exceeds {length} bits")
        return cls([int(c) for c in format(value, f"0{length}b")])

    @staticmethod
    def concat(parts: Sequence[Fingerprint]) -> Fingerprint:
        return Fingerprint(np.concatenate([p.bits for p in parts]) if parts else [])


@dataclass(frozen=True)
class ParameterPoint:
    """A candidate parameter set, e.g. a catalyst/base combination."""

    id: str
    features: Fingerprint
    component_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskPoint:
    id: str
    features: Fingerprint


@dataclass(frozen=True)
class Observation:
    x_id: str
    w_id: str
    y: float

    def __post_init__(self):
        if not math.isfinite(self.y):
            raise ValueError(f"non-finite outcome for ({self.x_id}, {self.w_id}): {self.y}")


class ObservationSet:
    """Append-only list of observations owned by a single campaign.

    Repeated ``(x_id, w_id)`` pairs are allowed and kept as separate entries.
    """

    def __init__(self, observations: Iterable[Observation] = ()):
        self._obs: list[Observation] = list(observations)

    def append(self, obs: Observation) -> None:
        self._obs.append(obs)

    def __len__(self) -> int:
        return len(self._obs)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self._obs)

    def __getitem__(self, i: int) -> Observation:
        return self._obs[i]

    def x_ids(self) -> list[str]:
        return [o.x_id for o in self._obs]


def _check_unique(points: Sequence, what: str) -> None:
    seen: set[str] = set()
    for p in points:
        if p.id in seen:
            raise ProblemError(f"duplicate {what} id {p.id!r}")
        seen.add(p.id)


def _check_width(points: Sequence, what: str) -> None:
    widths = {len(p.features) for p in points}
    if len(widths) > 1:
        raise ProblemError(f"{what} fingerprints have mixed widths {sorted(widths)}")


class LookupSurface:
    """Complete tabulated oracle ``y[x, w]`` over discrete parameter and task sets."""

    def __init__(
        self,
        parameter_points: Sequence[ParameterPoint],
        task_points: Sequence[TaskPoint],
        table: np.ndarray,
        meta: dict | None = None,
    ):
        self.parameter_points = tuple(parameter_points)
        self.task_points = tuple(task_points)
        table = np.array(table, dtype=np.float64)
        if table.shape != (len(self.parameter_points), len(self.task_points)):
            raise SurfaceFormatError(
                f"table shape {table.shape} does not match "
                f"{len(self.parameter_points)} x {len(self.task_points)} points"
            )
        if not np.all(np.isfinite(table)):
            raise SurfaceFormatError("surface contains non-finite outcomes")
        _check_unique(self.parameter_points, "parameter")
        _check_unique(self.task_points, "task")
        _check_width(self.parameter_points, "parameter")
        _check_width(self.task_points, "task")
        table.setflags(write=False)
        self.table = table
        self.meta = dict(meta or {})
        self._x_index = {p.id: i for i, p in enumerate(self.parameter_points)}
        self._w_index = {t.id: j for j, t in enumerate(self.task_points)}

    @property
    def x_ids(self) -> list[str]:
        return [p.id for p in self.parameter_points]

    @property
    def w_ids(self) -> list[str]:
        return [t.id for t in self.task_points]

    def x_index(self, x_id: str) -> int:
        try:
            return self._x_index[x_id]
        except KeyError:
            raise MissingCellError(f"unknown parameter id {x_id!r}") from None

    def w_index(self, w_id: str) -> int:
        try:
            return self._w_index[w_id]
        except KeyError:
            raise MissingCellError(f"unknown task id {w_id!r}") from None

    def task(self, w_id: str) -> TaskPoint:
        return self.task_points[self.w_index(w_id)]

    def resolve(self, x_id: str, w_id: str) -> float:
        if x_id not in self._x_index or w_id not in self._w_index:
            raise MissingCellError(f"no cell for pair ({x_id!r}, {w_id!r})")
        return float(self.table[self._x_index[x_id], self._w_index[w_id]])

    def column_block(self, w_ids: Sequence[str]) -> np.ndarray:
        """Outcomes for every parameter point on the given tasks, shape ``(n_x, len(w_ids))``."""
        return self.table[:, [self.w_index(w) for w in w_ids]]


def resolve(oracle: LookupSurface, x_id: str, w_id: str) -> float:
    """Look up ``f(x; w)``; deterministic, no noise added."""
    return oracle.resolve(x_id, w_id)


@dataclass(frozen=True)
class GeneralityProblem:
    parameter_space: tuple[ParameterPoint, ...]
    train_tasks: tuple[TaskPoint, ...]
    test_tasks: tuple[TaskPoint, ...]
    oracle: LookupSurface
    aggregation: AggregationSpec
    budget: int
    _x_index: dict = field(init=False, repr=False, compare=False)
    _w_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("parameter_space", "train_tasks", "test_tasks"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.parameter_space:
            raise ProblemError("empty parameter space")
        if not self.train_tasks:
            raise ProblemError("empty train task set")
        if int(self.budget) < 1:
            raise ProblemError(f"budget must be positive, got {self.budget}")
        _check_unique(self.parameter_space, "parameter")
        _check_unique(self.train_tasks, "train task")
        _check_unique(self.test_tasks, "test task")
        _check_width(self.parameter_space, "parameter")
        _check_width(tuple(self.train_tasks) + tuple(self.test_tasks), "task")
        overlap = {t.id for t in self.train_tasks} & {t.id for t in self.test_tasks}
        if overlap:
            raise ProblemError(f"train and test tasks overlap: {sorted(overlap)}")
        for p in self.parameter_space:
            self.oracle.x_index(p.id)
        for t in self.train_tasks + self.test_tasks:
            self.oracle.w_index(t.id)
        self.aggregation.check_tasks([t.id for t in self.train_tasks])
        object.__setattr__(self, "_x_index", {p.id: i for i, p in enumerate(self.parameter_space)})
        object.__setattr__(self, "_w_index", {t.id: j for j, t in enumerate(self.train_tasks)})

    @property
    def n_x(self) -> int:
        return len(self.parameter_space)

    @property
    def n_w(self) -> int:
        return len(self.train_tasks)

    @property
    def x_ids(self) -> list[str]:
        return [p.id for p in self.parameter_space]

    @property
    def train_ids(self) -> list[str]:
        return [t.id for t in self.train_tasks]

    def x_index(self, x_id: str) -> int:
        return self._x_index[x_id]

    def w_index(self, w_id: str) -> int:
        return self._w_index[w_id]

    @classmethod
    def from_surface(
        cls,
        surface: LookupSurface,
        aggregation: AggregationSpec,
        budget: int,
        train_ids: Sequence[str] | None = None,
        test_ids: Sequence[str] | None = None,
    ) -> GeneralityProblem:
        """Build a problem over every parameter point of ``surface``.

        Without ``train_ids`` all tasks are training tasks; without ``test_ids``
        the test set is every remaining task.
        """
        if train_ids is None:
            train_ids = surface.w_ids
        train = [surface.task(w) for w in train_ids]
        if test_ids is None:
            chosen = set(train_ids)
            test = [t for t in surface.task_points if t.id not in chosen]
        else:
            test = [surface.task(w) for w in test_ids]
        return cls(surface.parameter_points, train, test, surface, aggregation, budget)
