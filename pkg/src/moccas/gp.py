"""Independent exact Gaussian-process surrogates, one per objective.

Each model is an exact GP with an ARD squared-exponential kernel. Posteriors
return analytic input gradients of the mean and standard deviation, which the
smooth acquisition differentiates through. Conditioning on a new observation
reuses the incremental Cholesky extension, so one update costs O(t^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

from . import linalg
from .errors import AllCandidatesFailed, DimensionMismatch, NotPositiveDefinite

_STD_GRAD_FLOOR = 1e-12
_SCALE_FLOOR = 1e-8


@dataclass
class KernelParams:
    """ARD squared-exponential kernel hyperparameters.

    k(x, x') = signal_variance * exp(-0.5 * sum_j ((x_j - x'_j) / lengthscales_j)^2)
    with observation noise variance added on the Gram diagonal.
    """

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        self.lengthscales = np.asarray(self.lengthscales, dtype=float)
        if self.lengthscales.ndim != 1:
            raise ValueError("lengthscales must be a vector")
        if not np.all(np.isfinite(self.lengthscales)) or np.any(self.lengthscales <= 0):
            raise ValueError("lengthscales must be finite and strictly positive")
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be strictly positive")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be strictly positive")


@dataclass
class Posterior:
    mean: float
    std: float
    mean_grad: np.ndarray
    std_grad: np.ndarray


def kernel_eval(params: KernelParams, x1: np.ndarray, x2: np.ndarray) -> float:
    """Kernel value for a single pair of points."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    d = params.lengthscales.shape[0]
    if a.shape != (d,) or b.shape != (d,):
        raise DimensionMismatch(
            f"expected vectors of length {d}, got {a.shape} and {b.shape}"
        )
    z = (a - b) / params.lengthscales
    return float(params.signal_variance * np.exp(-0.5 * np.dot(z, z)))


def _kernel_cross(params: KernelParams, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    # (na, nb) kernel matrix between two point sets.
    sq = cdist(xa / params.lengthscales, xb / params.lengthscales, "sqeuclidean")
    return params.signal_variance * np.exp(-0.5 * sq)


@dataclass
class GpModel:
    """Exact GP conditioned on t observations (t may be 0 for the prior)."""

    params: KernelParams
    train_inputs: np.ndarray
    train_targets: np.ndarray
    factor: linalg.SpdFactor | None
    alpha: np.ndarray

    @property
    def num_train(self) -> int:
        return self.train_inputs.shape[0]

    def posterior(self, x: np.ndarray) -> Posterior:
        return posterior(self, x)

    def posterior_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return posterior_batch(self, x)

    def condition(self, x_new: np.ndarray, y_new: float) -> "GpModel":
        return condition(self, x_new, y_new)


def fit_gp(
    params: KernelParams, inputs: np.ndarray, targets: np.ndarray, base_jitter: float = 0.0
) -> GpModel:
    """Build a GpModel from scratch on the given data (t >= 0 rows)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    d = params.lengthscales.shape[0]
    if x.size == 0:
        x = x.reshape(0, d)
    if x.shape[1] != d:
        raise DimensionMismatch(f"inputs have {x.shape[1]} columns, expected {d}")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch("inputs and targets disagree on t")
    if x.shape[0] == 0:
        return GpModel(params, x, y, None, np.zeros(0))
    gram = _kernel_cross(params, x, x)
    gram[np.diag_indices_from(gram)] += params.noise_variance
    factor = linalg.cholesky(gram, base_jitter=base_jitter)
    alpha = linalg.solve_spd(factor, y)
    return GpModel(params, x, y, factor, alpha)


def posterior(model: GpModel, x: np.ndarray) -> Posterior:
    """Posterior mean/std at x with analytic input gradients.

    mean(x)     = k_t(x)^T (K + s2 I)^{-1} y
    var(x)      = k(x, x) - k_t(x)^T (K + s2 I)^{-1} k_t(x), clamped at 0
    std_grad is zeroed where std < 1e-12 (sqrt is not differentiable at 0).
    """
    p = model.params
    d = p.lengthscales.shape[0]
    xq = np.asarray(x, dtype=float)
    if xq.shape != (d,):
        raise DimensionMismatch(f"query has shape {xq.shape}, expected ({d},)")
    if model.num_train == 0:
        return Posterior(0.0, math.sqrt(p.signal_variance), np.zeros(d), np.zeros(d))

    k_vec = _kernel_cross(p, model.train_inputs, xq[None, :]).ravel()
    mean = float(k_vec @ model.alpha)
    w = linalg.solve_spd(model.factor, k_vec)
    var = p.signal_variance - float(k_vec @ w)
    var = max(var, 0.0)
    std = math.sqrt(var)

    # d k(x_s, x) / d x = k_s * (x_s - x) / lengthscales^2, rows of J (t, d)
    jac = k_vec[:, None] * (model.train_inputs - xq[None, :]) / p.lengthscales**2
    mean_grad = jac.T @ model.alpha
    var_grad = -2.0 * (jac.T @ w)
    if std < _STD_GRAD_FLOOR:
        std_grad = np.zeros(d)
    else:
        std_grad = var_grad / (2.0 * std)
    return Posterior(mean, std, mean_grad, std_grad)


def posterior_batch(model: GpModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior means and stds at many points (no gradients)."""
    p = model.params
    xq = np.atleast_2d(np.asarray(x, dtype=float))
    if xq.shape[1] != p.lengthscales.shape[0]:
        raise DimensionMismatch("query dimension mismatch")
    n = xq.shape[0]
    if model.num_train == 0:
        return np.zeros(n), np.full(n, math.sqrt(p.signal_variance))
    kmat = _kernel_cross(p, model.train_inputs, xq)  # (t, n)
    means = kmat.T @ model.alpha
    half = solve_triangular(model.factor.lower, kmat, lower=True)
    var = p.signal_variance - np.einsum("ij,ij->j", half, half)
    np.maximum(var, 0.0, out=var)
    return means, np.sqrt(var)


def condition(model: GpModel, x_new: np.ndarray, y_new: float) -> GpModel:
    """Return a new model conditioned on one more observation (O(t^2))."""
    p = model.params
    xn = np.asarray(x_new, dtype=float)
    if xn.shape != (p.lengthscales.shape[0],):
        raise DimensionMismatch("x_new dimension mismatch")
    if model.num_train == 0:
        return fit_gp(p, xn[None, :], np.array([float(y_new)]))
    k_vec = _kernel_cross(p, model.train_inputs, xn[None, :]).ravel()
    diag = kernel_eval(p, xn, xn) + p.noise_variance
    factor = linalg.extend_factor(model.factor, k_vec, diag)
    inputs = np.vstack([model.train_inputs, xn[None, :]])
    targets = np.append(model.train_targets, float(y_new))
    alpha = linalg.solve_spd(factor, targets)
    return GpModel(p, inputs, targets, factor, alpha)


def log_marginal_likelihood(
    params: KernelParams, inputs: np.ndarray, targets: np.ndarray
) -> float:
    """Exact GP log marginal likelihood of the data under params."""
    model = fit_gp(params, inputs, targets)
    n = model.num_train
    log_det_half = float(np.sum(np.log(np.diag(model.factor.lower))))
    return (
        -0.5 * float(model.train_targets @ model.alpha)
        - log_det_half
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def prefit_hyperparams(
    inputs: np.ndarray, targets: np.ndarray, grid: list[KernelParams]
) -> KernelParams:
    """Pick the grid element with the largest exact log marginal likelihood.

    Grid elements whose Gram matrix cannot be factorized are skipped. Ties
    resolve to the earliest grid element (strictly-greater replacement).
    """
    if len(grid) == 0:
        raise ValueError("hyperparameter grid is empty")
    if np.asarray(inputs).shape[0] < 2:
        raise ValueError("prefit needs at least 2 samples")
    best: KernelParams | None = None
    best_lml = -math.inf
    for cand in grid:
        try:
            lml = log_marginal_likelihood(cand, inputs, targets)
        except NotPositiveDefinite:
            continue
        if lml > best_lml:
            best = cand
            best_lml = lml
    if best is None:
        raise AllCandidatesFailed("every grid element failed to factorize")
    return best


def default_hyper_grid(
    dim: int,
    noise_variance: float = 1e-2,
    n_lengthscales: int = 5,
    n_signal: int = 5,
) -> list[KernelParams]:
    """Log-spaced shared-lengthscale x signal-variance grid.

    Intended for standardized inputs: lengthscales span [0.1*sqrt(d), 10*sqrt(d)]
    and signal variance spans [0.1, 10].
    """
    root_d = math.sqrt(dim)
    lengthscales = np.geomspace(0.1 * root_d, 10.0 * root_d, n_lengthscales)
    signals = np.geomspace(0.1, 10.0, n_signal)
    return [
        KernelParams(np.full(dim, ell), float(sv), noise_variance)
        for ell in lengthscales
        for sv in signals
    ]


def ucb(models, x: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimistic prediction U_i = mean_i + sqrt(beta) * std_i per objective.

    Returns (U, grad) with U of length m and grad of shape (m, d), rows
    mean_grad + sqrt(beta) * std_grad.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    root_beta = math.sqrt(beta)
    xq = np.asarray(x, dtype=float)
    values = np.empty(len(models))
    grads = np.empty((len(models), xq.shape[0]))
    for i, model in enumerate(models):
        post = model.posterior(xq)
        values[i] = post.mean + root_beta * post.std
        grads[i] = post.mean_grad + root_beta * post.std_grad
    return values, grads


def predict_batch(models, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stack posterior means and stds over models: two (n, m) arrays."""
    means = []
    stds = []
    for model in models:
        mu, sd = model.posterior_batch(x)
        means.append(mu)
        stds.append(sd)
    return np.column_stack(means), np.column_stack(stds)


def ucb_batch(models, x: np.ndarray, beta: float) -> np.ndarray:
    """UCB predictions for many points: (n, m) array."""
    means, stds = predict_batch(models, x)
    return means + math.sqrt(beta) * stds


@dataclass
class Standardizer:
    """Frozen z-score statistics fitted once on the prefit subset."""

    x_shift: np.ndarray
    x_scale: np.ndarray
    y_shift: np.ndarray
    y_scale: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray, outcomes: np.ndarray) -> "Standardizer":
        x = np.asarray(inputs, dtype=float)
        y = np.asarray(outcomes, dtype=float)
        x_scale = x.std(axis=0)
        y_scale = y.std(axis=0)
        # near-constant columns are left unscaled
        x_scale = np.where(x_scale > _SCALE_FLOOR, x_scale, 1.0)
        y_scale = np.where(y_scale > _SCALE_FLOOR, y_scale, 1.0)
        return cls(x.mean(axis=0), x_scale, y.mean(axis=0), y_scale)

    def transform_inputs(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.x_shift) / self.x_scale

    def transform_target(self, y, objective: int):
        return (np.asarray(y, dtype=float) - self.y_shift[objective]) / self.y_scale[
            objective
        ]


@dataclass
class StandardizedGp:
    """GP over standardized data exposing posteriors in original units.

    Wraps one inner GpModel per objective. Inputs are z-scored with the
    frozen Standardizer statistics; the target is z-scored per objective.
    Posterior means/stds and their gradients are mapped back to the original
    input/outcome units, so downstream geometry sees unscaled values.
    """

    inner: GpModel
    scaler: Standardizer
    objective: int

    @classmethod
    def fit(
        cls,
        params: KernelParams,
        scaler: Standardizer,
        objective: int,
        inputs: np.ndarray,
        targets: np.ndarray,
    ) -> "StandardizedGp":
        z_in = scaler.transform_inputs(inputs) if np.asarray(inputs).size else inputs
        z_t = scaler.transform_target(targets, objective)
        return cls(fit_gp(params, z_in, z_t), scaler, objective)

    @property
    def num_train(self) -> int:
        return self.inner.num_train

    def posterior(self, x: np.ndarray) -> Posterior:
        post = self.inner.posterior(self.scaler.transform_inputs(x))
        ys = self.scaler.y_scale[self.objective]
        return Posterior(
            mean=post.mean * ys + self.scaler.y_shift[self.objective],
            std=post.std * ys,
            mean_grad=post.mean_grad * ys / self.scaler.x_scale,
            std_grad=post.std_grad * ys / self.scaler.x_scale,
        )

    def posterior_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu, sd = self.inner.posterior_batch(self.scaler.transform_inputs(x))
        ys = self.scaler.y_scale[self.objective]
        return mu * ys + self.scaler.y_shift[self.objective], sd * ys

    def condition(self, x_new: np.ndarray, y_new: float) -> "StandardizedGp":
        z_x = self.scaler.transform_inputs(x_new)
        z_y = float(self.scaler.transform_target(y_new, self.objective))
        return StandardizedGp(self.inner.condition(z_x, z_y), self.scaler, self.objective)
