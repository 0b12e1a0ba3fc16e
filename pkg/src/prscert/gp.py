"""Exact Gaussian-process regression with a squared-exponential kernel.

Models are immutable: :func:`add_sample` returns a new model.  Inputs are
expected in normalised box coordinates (the unit cube), which is what makes
the default unit length scale meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.spatial.distance

JITTER_START = 1e-10
JITTER_MAX = 1e-6


class GPFitError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelParams:
    signal_var: float = 1.0
    lengthscale: float | tuple = 1.0
    noise_std: float = 1e-8

    def __post_init__(self):
        if not self.signal_var > 0:
            raise ValueError("signal variance must be positive")
        if not np.all(np.asarray(self.lengthscale, dtype=float) > 0):
            raise ValueError("length scales must be positive")
        if not self.noise_std >= 0:
            raise ValueError("noise standard deviation must be non-negative")

    def scales(self, dim: int) -> np.ndarray:
        ell = np.asarray(self.lengthscale, dtype=float)
        if ell.ndim == 0:
            return np.full(dim, float(ell))
        if ell.shape != (dim,):
            raise ValueError(f"expected {dim} length scales, got {ell.size}")
        return ell


def kernel_se(x, x2, p: KernelParams = KernelParams()) -> float:
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {x2.size}")
    d = (x - x2) / p.scales(x.size)
    return float(p.signal_var * np.exp(-0.5 * d @ d))


def kernel_matrix(X1, X2, p: KernelParams) -> np.ndarray:
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X1.shape[1] != X2.shape[1]:
        raise ValueError(f"dimension mismatch: {X1.shape[1]} vs {X2.shape[1]}")
    ell = p.scales(X1.shape[1])
    sq = scipy.spatial.distance.cdist(X1 / ell, X2 / ell, "sqeuclidean")
    return p.signal_var * np.exp(-0.5 * sq)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GPModel:
    X: np.ndarray
    y: np.ndarray
    params: KernelParams
    L: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def _cholesky(K: np.ndarray, noise_var: float):
    n = K.shape[0]
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K + (noise_var + jitter) * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise GPFitError("kernel matrix not positive definite") from None


def fit(X, y, params: KernelParams = KernelParams(), dim: int | None = None) -> GPModel:
    """Factor ``K + sigma_n^2 I`` (plus escalating jitter if needed) for the data."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        if dim is None:
            dim = X.shape[1] if X.ndim == 2 else None
        if dim is None:
            raise ValueError("dim is required for an empty model")
        X = X.reshape(0, dim)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if dim in (None, 1) else X.reshape(-1, dim)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError("inputs and targets differ in length")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs and targets must be finite")
    if X.shape[0] == 0:
        return GPModel(_frozen(X), _frozen(y), params, _frozen(np.zeros((0, 0))), _frozen(np.zeros(0)))
    K = kernel_matrix(X, X, params)
    L, jitter = _cholesky(K, params.noise_std ** 2)
    alpha = scipy.linalg.cho_solve((L, True), y)
    return GPModel(_frozen(X), _frozen(y), params, _frozen(L), _frozen(alpha), jitter)


def posterior_batch(gp: GPModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at the rows of ``Xq``."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != gp.dim:
        raise ValueError(f"dimension mismatch: query has {Xq.shape[1]}, model has {gp.dim}")
    prior = np.full(Xq.shape[0], gp.params.signal_var)
    if gp.m == 0:
        return np.zeros(Xq.shape[0]), prior
    Ks = kernel_matrix(gp.X, Xq, gp.params)
    mu = Ks.T @ gp.alpha
    v = scipy.linalg.solve_triangular(gp.L, Ks, lower=True, check_finite=False)
    var = prior - (v * v).sum(0)
    return mu, np.maximum(var, 0.0)


def posterior(gp: GPModel, x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != gp.dim:
        raise ValueError(f"dimension mismatch: query has {x.size}, model has {gp.dim}")
    mu, var = posterior_batch(gp, x[None, :])
    return float(mu[0]), float(var[0])


def add_sample(gp: GPModel, x, y: float) -> GPModel:
    """Model conditioned on one more observation (full refit)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != gp.dim:
        raise ValueError(f"dimension mismatch: sample has {x.size}, model has {gp.dim}")
    return fit(np.vstack([gp.X, x]), np.append(gp.y, y), gp.params)


def log_marginal_likelihood(X, y, params: KernelParams) -> float:
    gp = fit(X, y, params)
    n = gp.m
    return float(-0.5 * gp.y @ gp.alpha - np.log(np.diag(gp.L)).sum() - 0.5 * n * np.log(2 * np.pi))


def tune_hyperparameters(X, y, params: KernelParams) -> KernelParams:
    """Maximise the log marginal likelihood over signal variance and length scales.

    Optional; the certification loop always uses the fixed kernel it is given.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    theta0 = np.concatenate([[np.log(params.signal_var)], np.log(params.scales(d))])

    def nll(theta):
        p = KernelParams(float(np.exp(theta[0])), tuple(np.exp(theta[1:])), params.noise_std)
        try:
            return -log_marginal_likelihood(X, y, p)
        except GPFitError:
            return 1e10

    bounds = [(np.log(1e-4), np.log(1e4))] + [(np.log(1e-2), np.log(1e2))] * d
    res = scipy.optimize.minimize(nll, theta0, method="L-BFGS-B", bounds=bounds)
    return KernelParams(float(np.exp(res.x[0])), tuple(float(v) for v in np.exp(res.x[1:])),
                        params.noise_std)


def to_dict(gp: GPModel) -> dict:
    ell = np.asarray(gp.params.lengthscale, dtype=float)
    return {
        "dim": gp.dim,
        "params": {
            "signal_var": gp.params.signal_var,
            "lengthscale": float(ell) if ell.ndim == 0 else ell.tolist(),
            "noise_std": gp.params.noise_std,
        },
        "inputs": gp.X.tolist(),
        "targets": gp.y.tolist(),
    }


def from_dict(doc: dict) -> GPModel:
    p = doc["params"]
    ell = p["lengthscale"]
    params = KernelParams(float(p["signal_var"]), tuple(ell) if isinstance(ell, list) else float(ell),
                          float(p["noise_std"]))
    return fit(np.asarray(doc["inputs"], dtype=float).reshape(-1, int(doc["dim"])), doc["targets"],
               params, dim=int(doc["dim"]))


def save(gp: GPModel, path) -> None:
    Path(path).write_text(json.dumps(to_dict(gp), indent=1) + "\n")


def load(path) -> GPModel:
    return from_dict(json.loads(Path(path).read_text()))
