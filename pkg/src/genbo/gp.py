"""Exact GP regression over (parameter, task) pairs with a Tanimoto kernel.

A joint input is the concatenation ``x_features + w_features``. Because the
Tanimoto similarity only needs intersection and bit counts, those are
precomputed per component in :class:`PairSpace` and combined on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from . import tanimoto
from .core import Fingerprint, GenboError, GeneralityProblem, ObservationSet

NOISE_BOUNDS = (1e-6, 1.0)
OUTPUTSCALE_BOUNDS = (1e-3, 1e3)
FIT_JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
SAMPLE_JITTERS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4)
# (outputscale, noise) starting points for the marginal-likelihood search
DEFAULT_STARTS = ((1.0, 1e-2), (0.3, 1e-4), (3.0, 1e-1))


class NumericalError(GenboError, ArithmeticError):
    """A covariance matrix could not be factorized even with maximal jitter."""


def tanimoto_kernel(a: Fingerprint, b: Fingerprint, outputscale: float = 1.0) -> float:
    """``outputscale * |a & b| / (|a| + |b| - |a & b|)``; two empty vectors give 0."""
    if len(a) != len(b):
        raise ValueError(f"fingerprint length mismatch: {len(a)} vs {len(b)}")
    if not outputscale > 0:
        raise ValueError("outputscale must be positive")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits)) + int(np.count_nonzero(b.bits)) - inter
    return outputscale * inter / union if union else 0.0


class PairSpace:
    """Index space of joint points ``(i, j)`` with ``i`` over parameters and ``j`` over tasks."""

    def __init__(self, x_bits: np.ndarray, w_bits: np.ndarray):
        self.x_bits = np.atleast_2d(np.asarray(x_bits, dtype=bool))
        self.w_bits = np.atleast_2d(np.asarray(w_bits, dtype=bool))
        self.sx = tanimoto.intersection_counts(self.x_bits, self.x_bits)
        self.sw = tanimoto.intersection_counts(self.w_bits, self.w_bits)
        self.cx = np.ascontiguousarray(np.diag(self.sx))
        self.cw = np.ascontiguousarray(np.diag(self.sw))

    @classmethod
    def from_points(cls, parameter_points: Sequence, task_points: Sequence) -> PairSpace:
        return cls(
            np.array([p.features.bits for p in parameter_points]),
            np.array([t.features.bits for t in task_points]),
        )

    @classmethod
    def from_problem(cls, problem: GeneralityProblem) -> PairSpace:
        return cls.from_points(problem.parameter_space, problem.train_tasks)

    @property
    def n_x(self) -> int:
        return self.x_bits.shape[0]

    @property
    def n_w(self) -> int:
        return self.w_bits.shape[0]

    def grid(self) -> np.ndarray:
        """Every pair, parameter-major: row ``i * n_w + j`` is ``(i, j)``."""
        ii, jj = np.meshgrid(np.arange(self.n_x), np.arange(self.n_w), indexing="ij")
        return np.stack([ii.ravel(), jj.ravel()], axis=1)

    def joint_bits(self, idx: np.ndarray) -> np.ndarray:
        idx = np.atleast_2d(idx)
        return np.concatenate([self.x_bits[idx[:, 0]], self.w_bits[idx[:, 1]]], axis=1)

    def similarity(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        return tanimoto.pair_tanimoto(
            self.sx, self.sw, self.cx, self.cw, a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        )


def _cholesky(a: np.ndarray, jitters: Sequence[float]) -> tuple[np.ndarray, float]:
    eye = np.eye(a.shape[0])
    for jitter in jitters:
        try:
            return np.linalg.cholesky(a + jitter * eye if jitter else a), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(f"cholesky failed with jitter up to {jitters[-1]:g}")


def gaussian_draws(mean: np.ndarray, cov: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Map standard-normal ``base`` of shape ``(M, P)`` to draws from ``N(mean, cov)``."""
    chol, _ = _cholesky(cov, SAMPLE_JITTERS)
    return mean[None, :] + base @ chol.T


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    values: np.ndarray  # (m, P)
    point_index: np.ndarray  # (P, 2) pair indices per column

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class GPModel:
    """Zero-mean GP on standardized targets. Immutable; conditioning returns a new model."""

    space: PairSpace
    train_idx: np.ndarray
    y: np.ndarray
    outputscale: float
    noise: float
    y_mean: float
    y_scale: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @classmethod
    def build(
        cls,
        space: PairSpace,
        train_idx: np.ndarray,
        y: np.ndarray,
        outputscale: float,
        noise: float,
        y_mean: float = 0.0,
        y_scale: float = 1.0,
        jitter: float | None = None,
    ) -> GPModel:
        """Factorize ``K + noise * I`` for fixed hyperparameters (``y`` already standardized)."""
        train_idx = np.asarray(train_idx, dtype=np.int64).reshape(-1, 2)
        y = np.asarray(y, dtype=np.float64)
        if train_idx.shape[0] == 0:
            raise ValueError("cannot build a GP on an empty dataset")
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite training targets")
        k = outputscale * space.similarity(train_idx, train_idx)
        k[np.diag_indices_from(k)] += noise
        chol, used = _cholesky(k, FIT_JITTERS if jitter is None else (jitter,))
        alpha = cho_solve((chol, True), y)
        return cls(space, train_idx, y, float(outputscale), float(noise),
                   float(y_mean), float(y_scale), chol, alpha, used)

    @property
    def n(self) -> int:
        return self.train_idx.shape[0]

    def evaluated_x(self) -> np.ndarray:
        return np.unique(self.train_idx[:, 0])

    def _cross(self, queries: np.ndarray) -> np.ndarray:
        return self.outputscale * self.space.similarity(queries, self.train_idx)

    def posterior(self, queries: np.ndarray, full_cov: bool = True):
        """Latent predictive mean and covariance (or variance) in standardized units."""
        queries = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
        kq = self._cross(queries)
        mean = kq @ self.alpha
        v = solve_triangular(self.chol, kq.T, lower=True)
        if not full_cov:
            prior = self.outputscale * _self_similarity(self.space, queries)
            return mean, np.maximum(prior - np.einsum("ij,ij->j", v, v), 0.0)
        cov = self.outputscale * self.space.similarity(queries, queries) - v.T @ v
        cov = 0.5 * (cov + cov.T)
        evals, evecs = np.linalg.eigh(cov)
        if evals[0] < -1e-10:
            cov = (evecs * np.maximum(evals, 0.0)) @ evecs.T
            cov = 0.5 * (cov + cov.T)
        return mean, cov

    def variance(self, queries: np.ndarray) -> np.ndarray:
        return self.posterior(queries, full_cov=False)[1]

    def sample(self, queries: np.ndarray, m: int | None = None, seed=None,
               base: np.ndarray | None = None) -> SampleMatrix:
        """Joint posterior draws; pass ``base`` to reuse common random numbers."""
        queries = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
        if base is None:
            if m is None or m < 1:
                raise ValueError("need m >= 1 draws or explicit base samples")
            base = np.random.default_rng(seed).standard_normal((m, queries.shape[0]))
        mean, cov = self.posterior(queries)
        return SampleMatrix(gaussian_draws(mean, cov, base), queries)

    def condition_on_fantasy(self, x: int, w: int, y_fantasy: float) -> GPModel:
        """Add one standardized observation with frozen hyperparameters.

        Extends the Cholesky factor by one row; if the new pivot is not
        positive, refactorizes from scratch instead.
        """
        q = np.array([[x, w]], dtype=np.int64)
        train_idx = np.vstack([self.train_idx, q])
        y = np.append(self.y, y_fantasy)
        k_new = self._cross(q)[0]
        k_qq = self.outputscale * _self_similarity(self.space, q)[0] + self.noise + self.jitter
        row = solve_triangular(self.chol, k_new, lower=True)
        pivot = k_qq - row @ row
        if not pivot > 1e-12 * max(k_qq, 1e-300):
            return GPModel.build(self.space, train_idx, y, self.outputscale, self.noise,
                                 self.y_mean, self.y_scale)
        n = self.n
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = self.chol
        chol[n, :n] = row
        chol[n, n] = np.sqrt(pivot)
        alpha = cho_solve((chol, True), y)
        return GPModel(self.space, train_idx, y, self.outputscale, self.noise,
                       self.y_mean, self.y_scale, chol, alpha, self.jitter)

    def to_native(self, mean: np.ndarray, var: np.ndarray | None = None):
        native_mean = self.y_mean + self.y_scale * np.asarray(mean)
        if var is None:
            return native_mean
        return native_mean, self.y_scale**2 * np.asarray(var)


def _self_similarity(space: PairSpace, idx: np.ndarray) -> np.ndarray:
    counts = space.cx[idx[:, 0]] + space.cw[idx[:, 1]]
    return (counts > 0).astype(np.float64)


def standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    y = np.asarray(y, dtype=np.float64)
    mean = float(y.mean())
    scale = float(y.std())
    if not scale > 1e-12:
        scale = 1.0
    return (y - mean) / scale, mean, scale


def _neg_log_marginal(theta: np.ndarray, gram: np.ndarray, y: np.ndarray):
    outputscale, noise = np.exp(theta)
    n = y.size
    k = outputscale * gram
    k[np.diag_indices(n)] += noise
    try:
        chol, _ = _cholesky(k, FIT_JITTERS)
    except NumericalError:
        return 1e25, np.zeros(2)
    alpha = cho_solve((chol, True), y)
    nll = 0.5 * y @ alpha + np.log(np.diag(chol)).sum() + 0.5 * n * np.log(2 * np.pi)
    inner = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(n))
    grad = -0.5 * np.array([
        outputscale * np.sum(inner * gram),
        noise * np.trace(inner),
    ])
    return nll, grad


def fit_indices(
    space: PairSpace,
    train_idx: np.ndarray,
    y: np.ndarray,
    hyperparams: tuple[float, float] | None = None,
    starts: Sequence[tuple[float, float]] = DEFAULT_STARTS,
) -> GPModel:
    """Standardize ``y`` and fit a GP at pair indices ``train_idx``.

    Without ``hyperparams`` the (outputscale, noise) pair maximizes the log
    marginal likelihood over the box bounds with L-BFGS-B, from each start.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64).reshape(-1, 2)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot fit a GP on an empty dataset")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite training targets")
    ys, mean, scale = standardize(y)
    if hyperparams is None:
        gram = space.similarity(train_idx, train_idx)
        bounds = [np.log(OUTPUTSCALE_BOUNDS), np.log(NOISE_BOUNDS)]
        best = None
        for start in starts:
            x0 = np.clip(np.log(start), [b[0] for b in bounds], [b[1] for b in bounds])
            res = minimize(_neg_log_marginal, x0, args=(gram, ys), jac=True,
                           method="L-BFGS-B", bounds=bounds)
            if best is None or res.fun < best.fun:
                best = res
        hyperparams = tuple(float(v) for v in np.exp(best.x))
    outputscale, noise = hyperparams
    return GPModel.build(space, train_idx, ys, outputscale, noise, mean, scale)


def fit(dataset: ObservationSet, problem: GeneralityProblem, hyperparams=None,
        space: PairSpace | None = None) -> GPModel:
    """Fit the surrogate to every observation in ``dataset``."""
    if len(dataset) == 0:
        raise ValueError("cannot fit a GP on an empty dataset")
    space = space or PairSpace.from_problem(problem)
    idx = np.array([[problem.x_index(o.x_id), problem.w_index(o.w_id)] for o in dataset])
    y = np.array([o.y for o in dataset])
    return fit_indices(space, idx, y, hyperparams)
