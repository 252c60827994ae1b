"""Exact Gaussian-process regression with a Matern-5/2 kernel.

Zero prior mean, a single lengthscale shared across all input dimensions,
and Cholesky-based exact inference.  Data sets stay small (tens to a few
hundred points), so any mutation simply drops the cached factorization and
the next query refits from scratch; this keeps incremental and batch
construction numerically identical.

The kernel over Euclidean distance d is

    k(d) = variance * (1 + d/l + d^2 / (3 l^2)) * exp(-d / l)

with lengthscale l.  Observation noise enters only on the Gram diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

__all__ = [
    "KernelParams",
    "Posterior",
    "GpModel",
    "NumericalError",
    "matern52",
    "gram_matrix",
    "fit_hyperparameters",
]

# Diagonal jitter escalation used when the Cholesky factorization of
# (K + noise_variance * I) fails: 0, then 1e-10 up to 1e-6 in x10 steps.
JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class NumericalError(RuntimeError):
    """Factorization failed even after full jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 hyperparameters plus observation noise.

    ``lengthscale`` and ``variance`` are the two kernel parameters;
    ``noise_variance`` is the diagonal observation-noise term needed for
    stable exact inference.  The defaults were selected empirically: they
    recover the per-mode utility structure from 20 noise-free points and
    keep the noisy training runs convergent.
    """

    lengthscale: float = 4.0
    variance: float = 4.0
    noise_variance: float = 0.1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not (math.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ValueError(
                f"noise_variance must be non-negative, got {self.noise_variance}"
            )

    def to_dict(self) -> dict:
        return {
            "lengthscale": self.lengthscale,
            "variance": self.variance,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(
            lengthscale=float(d["lengthscale"]),
            variance=float(d["variance"]),
            noise_variance=float(d["noise_variance"]),
        )


@dataclass(frozen=True)
class Posterior:
    """Posterior mean and (clamped, non-negative) variance at one point."""

    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def matern52(distance, params: KernelParams):
    """Evaluate the Matern-5/2 kernel at one or more distances.

    Accepts a scalar or an ndarray of non-negative distances and returns
    the same shape.  k(0) = variance, strictly decreasing, positive for
    finite d.
    """
    d = np.asarray(distance, dtype=float)
    if not np.all(np.isfinite(d)):
        raise ValueError("distance must be finite")
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    t = d / params.lengthscale
    k = params.variance * (1.0 + t + t * t / 3.0) * np.exp(-t)
    if np.ndim(distance) == 0:
        return float(k)
    return k


def gram_matrix(inputs, params: KernelParams) -> np.ndarray:
    """Kernel matrix over all input pairs (Euclidean distance).

    ``inputs`` is an (n, D) array or a list of equal-length vectors.
    The result is exactly symmetric with ``params.variance`` on the
    diagonal; observation noise is *not* added here.
    """
    X = _as_input_matrix(inputs)
    return matern52(cdist(X, X), params)


def _as_input_matrix(inputs) -> np.ndarray:
    rows = [np.asarray(r, dtype=float) for r in inputs]
    if not rows:
        raise ValueError("inputs must be non-empty")
    dim = rows[0].shape
    if len(dim) != 1:
        raise ValueError("each input must be a 1-D vector")
    for r in rows:
        if r.shape != dim:
            raise ValueError(f"input dimension mismatch: {r.shape} vs {dim}")
    return np.vstack(rows)


class GpModel:
    """Zero-mean exact GP over D-dimensional inputs.

    The first added point fixes D.  ``add_data_point`` invalidates the
    cached Cholesky factor; ``predict`` / ``log_marginal_likelihood``
    rebuild it lazily, escalating diagonal jitter through
    ``JITTER_LEVELS`` before giving up with :class:`NumericalError`.

    Single-writer: do not interleave mutation with prediction from other
    threads.  Read-only prediction on a model nobody mutates is safe.
    """

    def __init__(self, params: KernelParams | None = None):
        self._params = params if params is not None else KernelParams()
        self._X: np.ndarray | None = None  # (n, D)
        self._y: np.ndarray | None = None  # (n,)
        self._cache: tuple[np.ndarray, np.ndarray, float] | None = None
        #: number of predictions whose computed variance was negative and
        #: got clamped to zero (numerical diagnostic).
        self.variance_clamps = 0

    # -- basic accessors ---------------------------------------------------

    @property
    def params(self) -> KernelParams:
        return self._params

    @params.setter
    def params(self, new: KernelParams) -> None:
        self._params = new
        self._cache = None

    @property
    def n_points(self) -> int:
        return 0 if self._y is None else int(self._y.shape[0])

    @property
    def dim(self) -> int | None:
        return None if self._X is None else int(self._X.shape[1])

    @property
    def inputs(self) -> np.ndarray:
        if self._X is None:
            return np.empty((0, 0))
        return self._X.copy()

    @property
    def targets(self) -> np.ndarray:
        if self._y is None:
            return np.empty((0,))
        return self._y.copy()

    # -- mutation ----------------------------------------------------------

    def add_data_point(self, x, y: float) -> "GpModel":
        """Append one observation; the factorization cache is dropped."""
        xv = np.asarray(x, dtype=float)
        if xv.ndim != 1:
            raise ValueError("x must be a 1-D vector")
        if not np.all(np.isfinite(xv)):
            raise ValueError("x must be finite")
        yv = float(y)
        if not math.isfinite(yv):
            raise ValueError("y must be finite")
        if self._X is None:
            self._X = xv[None, :]
            self._y = np.array([yv])
        else:
            if xv.shape[0] != self._X.shape[1]:
                raise ValueError(
                    f"x has dimension {xv.shape[0]}, model expects {self._X.shape[1]}"
                )
            self._X = np.vstack([self._X, xv])
            self._y = np.append(self._y, yv)
        self._cache = None
        return self

    # -- inference ---------------------------------------------------------

    def _factorization(self) -> tuple[np.ndarray, np.ndarray, float]:
        """Lower Cholesky factor of (K + noise I [+ jitter I]) and alpha."""
        if self._cache is not None:
            return self._cache
        if self._X is None:
            raise ValueError("model has no data")
        n = self._X.shape[0]
        K = gram_matrix(self._X, self._params)
        K[np.diag_indices_from(K)] += self._params.noise_variance
        for jitter in JITTER_LEVELS:
            K_try = K if jitter == 0.0 else K + jitter * np.eye(n)
            try:
                L = np.linalg.cholesky(K_try)
            except np.linalg.LinAlgError:
                continue
            alpha = solve_triangular(
                L.T, solve_triangular(L, self._y, lower=True), lower=False
            )
            self._cache = (L, alpha, jitter)
            return self._cache
        raise NumericalError(
            f"Cholesky failed for n={n} even with jitter {JITTER_LEVELS[-1]:g}"
        )

    def predict(self, x) -> Posterior:
        """Exact posterior at a single query point."""
        xv = np.asarray(x, dtype=float)
        if xv.ndim != 1:
            raise ValueError("x must be a 1-D vector")
        means, variances = self.predict_batch(xv[None, :])
        return Posterior(float(means[0]), float(variances[0]))

    def predict_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances at an (m, D) block of queries."""
        Xq = np.asarray(X, dtype=float)
        if Xq.ndim != 2:
            raise ValueError("X must be an (m, D) array")
        if not np.all(np.isfinite(Xq)):
            raise ValueError("query points must be finite")
        if self._X is None:
            return (
                np.zeros(Xq.shape[0]),
                np.full(Xq.shape[0], self._params.variance),
            )
        if Xq.shape[1] != self._X.shape[1]:
            raise ValueError(
                f"query dimension {Xq.shape[1]} != model dimension {self._X.shape[1]}"
            )
        L, alpha, _ = self._factorization()
        K_star = matern52(cdist(Xq, self._X), self._params)  # (m, n)
        means = K_star @ alpha
        v = solve_triangular(L, K_star.T, lower=True)  # (n, m)
        variances = self._params.variance - np.einsum("ij,ij->j", v, v)
        neg = variances < 0
        if np.any(neg):
            self.variance_clamps += int(np.count_nonzero(neg))
            variances = np.where(neg, 0.0, variances)
        return means, variances

    def predict_mean_batch(self, X) -> np.ndarray:
        """Posterior means only; skips the variance solve."""
        Xq = np.asarray(X, dtype=float)
        if self._X is None:
            return np.zeros(Xq.shape[0])
        _, alpha, _ = self._factorization()
        K_star = matern52(cdist(Xq, self._X), self._params)
        return K_star @ alpha

    def log_marginal_likelihood(self) -> float:
        """-1/2 y^T (K+noise I)^-1 y - 1/2 log det(K+noise I) - n/2 log 2pi."""
        if self.n_points < 1:
            raise ValueError("log marginal likelihood needs at least one data point")
        L, alpha, _ = self._factorization()
        n = self.n_points
        return float(
            -0.5 * self._y @ alpha
            - np.sum(np.log(np.diag(L)))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        """JSON-ready snapshot: params, inputs (row-major), targets."""
        return {
            "params": self._params.to_dict(),
            "inputs": [] if self._X is None else self._X.tolist(),
            "targets": [] if self._y is None else self._y.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpModel":
        model = cls(KernelParams.from_dict(d["params"]))
        inputs = d.get("inputs") or []
        targets = d.get("targets") or []
        if len(inputs) != len(targets):
            raise ValueError("inputs and targets must have equal length")
        if inputs:
            model._X = np.asarray(inputs, dtype=float)
            if model._X.ndim != 2:
                raise ValueError("inputs must be a row-major matrix")
            model._y = np.asarray(targets, dtype=float)
        return model


def fit_hyperparameters(model: GpModel, grid) -> KernelParams:
    """Grid-search type-II maximum likelihood.

    Returns the grid element with the highest log marginal likelihood on
    the model's current data; ties go to the earliest element.  Grid
    points whose factorization fails are skipped; if all fail a
    :class:`NumericalError` is raised.  The model's own params are left
    untouched.
    """
    candidates = list(grid)
    if not candidates:
        raise ValueError("hyperparameter grid must be non-empty")
    if model.n_points < 2:
        raise ValueError("hyperparameter fitting needs at least two data points")
    original = model.params
    best: KernelParams | None = None
    best_lml = -math.inf
    try:
        for cand in candidates:
            model.params = cand
            try:
                lml = model.log_marginal_likelihood()
            except NumericalError:
                continue
            if lml > best_lml:
                best, best_lml = cand, lml
    finally:
        model.params = original
    if best is None:
        raise NumericalError("every grid point failed to factorize")
    return best
