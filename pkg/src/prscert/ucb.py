"""GP-UCB sampling of the critical eigenvalue over a box.

Each iteration samples the maximiser of ``mu + sqrt(beta) * sigma`` and
conditions the GP on the oracle value there.  The loop stops when the largest
posterior standard deviation on the probe grid drops below ``tol_sigma``, when
the certificate value ``p_m`` stops moving for ``patience`` iterations while
the point attaining it is resolved to within ``tol_sigma``, or at
``max_samples``.

When the maximiser is a point the model already knows to within
``tol_sigma`` (typically an earlier sample), the iteration samples the probe
point of largest posterior variance instead, since repeating a deterministic
evaluation carries no information.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from . import gp as gpr
from .box import SubspaceBox
from .errors import OracleError


@dataclass(frozen=True)
class BetaSchedule:
    """``practical``: beta = z^2 with z the two-sided normal quantile at 1 - delta.

    ``theoretical``: beta_m = 2 B^2 + 300 gamma_m ln^3(m / delta), with the
    RKHS-norm bound ``B`` and information gain ``gamma`` supplied by the user
    (a constant or a function of m).
    """

    mode: str = "practical"
    delta: float = 0.05
    rkhs_norm: float = 1.0
    gamma: float | Callable[[int], float] = 1.0

    def __post_init__(self):
        if self.mode not in ("practical", "theoretical"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")

    def with_delta(self, delta: float) -> "BetaSchedule":
        return BetaSchedule(self.mode, delta, self.rkhs_norm, self.gamma)


def beta(schedule: BetaSchedule, m: int) -> float:
    if schedule.mode == "practical":
        z = norm.ppf(1.0 - schedule.delta / 2.0)
        return float(z * z)
    if m < 1:
        raise ValueError("theoretical beta needs m >= 1")
    gamma = schedule.gamma(m) if callable(schedule.gamma) else schedule.gamma
    log_term = math.log(m / schedule.delta)
    if log_term <= 0.0:
        warnings.warn(f"ln(m/delta) = {log_term:.3g} <= 0; clamped to 0", RuntimeWarning, stacklevel=2)
        log_term = 0.0
    return float(2.0 * schedule.rkhs_norm ** 2 + 300.0 * gamma * log_term ** 3)


@dataclass(frozen=True)
class UcbConfig:
    max_samples: int = 200
    grid_density: int = 21
    refine_iters: int = 30
    tol_sigma: float = 1e-3
    tol_p: float = 1e-4
    patience: int = 3
    seed: int = 0
    max_grid_points: int = 20000
    n_starts: int = 3
    min_samples: int | None = None
    kernel: gpr.KernelParams = gpr.KernelParams(lengthscale=0.2)

    def __post_init__(self):
        if self.grid_density < 2:
            raise ValueError("grid density must be at least 2")
        for name in ("max_samples", "refine_iters", "patience", "max_grid_points", "n_starts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.tol_sigma > 0 and self.tol_p > 0):
            raise ValueError("tolerances must be positive")

    def effective_density(self, n_free: int) -> int:
        """Points per free dimension, reduced so the grid stays under ``max_grid_points``."""
        if n_free == 0:
            return 1
        d = self.grid_density
        while d > 2 and d ** n_free > self.max_grid_points:
            d -= 1
        return d

    def min_samples_for(self, dim: int) -> int:
        return dim + 1 if self.min_samples is None else self.min_samples


def acquisition(gp: gpr.GPModel, x, beta_value: float) -> float:
    if beta_value < 0:
        raise ValueError("beta must be non-negative")
    mu, var = gpr.posterior(gp, x)
    return mu + math.sqrt(beta_value) * math.sqrt(var)


def probe_grid(box: SubspaceBox, cfg: UcbConfig) -> np.ndarray:
    """Tensor grid over the box in unit coordinates, lexicographic (first name slowest)."""
    lo, hi = box.unit_bounds
    free = hi > lo
    d = cfg.effective_density(int(free.sum()))
    axes = [np.linspace(a, b, d) if f else np.array([a]) for a, b, f in zip(lo, hi, free)]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, box.dim)


def upper_bound_grid(gp: gpr.GPModel, U, beta_value: float):
    """Posterior mean, standard deviation and ``mu + sqrt(beta) sigma`` at the rows of ``U``."""
    mu, var = gpr.posterior_batch(gp, U)
    sigma = np.sqrt(var)
    return mu, sigma, mu + math.sqrt(beta_value) * sigma


def _ucb_values(gp, X, sqrt_beta):
    mu, var = gpr.posterior_batch(gp, X)
    return mu + sqrt_beta * np.sqrt(var)


def maximize_acquisition(gp: gpr.GPModel, box: SubspaceBox, beta_value: float,
                         cfg: UcbConfig = UcbConfig(), grid: np.ndarray | None = None):
    """Maximise ``mu + sqrt(beta) sigma`` over the box.

    Coarse grid scan, then a coordinate pattern search from the best
    ``n_starts`` grid points.  Ties go to the lowest grid index.  Returns the
    maximiser in unit coordinates and its value.
    """
    if beta_value < 0:
        raise ValueError("beta must be non-negative")
    sb = math.sqrt(beta_value)
    G = probe_grid(box, cfg) if grid is None else grid
    vals = _ucb_values(gp, G, sb)
    order = np.argsort(-vals, kind="stable")
    lo, hi = box.unit_bounds
    free = hi > lo
    d_eff = cfg.effective_density(int(free.sum()))
    h0 = np.where(free, (hi - lo) / max(d_eff - 1, 1), 0.0)
    best_x, best_v = G[order[0]].copy(), float(vals[order[0]])
    for start in order[:cfg.n_starts]:
        x, fx = G[start].copy(), float(vals[start])
        h = h0.copy()
        for _ in range(cfg.refine_iters):
            cands = []
            for j in np.flatnonzero(free):
                for s in (-1.0, 1.0):
                    c = x.copy()
                    c[j] = min(max(c[j] + s * h[j], lo[j]), hi[j])
                    cands.append(c)
            if not cands:
                break
            cands = np.array(cands)
            cv = _ucb_values(gp, cands, sb)
            k = int(np.argmax(cv))
            if cv[k] > fx:
                x, fx = cands[k], float(cv[k])
            else:
                h = h / 2.0
        if fx > best_v:
            best_x, best_v = x, fx
    return best_x, best_v


def upper_bound_max(gp: gpr.GPModel, box: SubspaceBox, beta_value: float,
                    cfg: UcbConfig = UcbConfig(), grid: np.ndarray | None = None):
    """``p = max over the box of mu + sqrt(beta) sigma`` and where it is attained."""
    return maximize_acquisition(gp, box, beta_value, cfg, grid)


@dataclass
class UcbRecord:
    iteration: int
    z: tuple
    value: float
    acquisition: float
    sigma_max: float
    p: float


@dataclass
class UcbHistory:
    names: tuple
    records: list = field(default_factory=list)
    timings_ms: list = field(default_factory=list)
    stop_reason: str = ""
    error: Exception | None = None

    def __len__(self):
        return len(self.records)

    def to_table(self) -> str:
        """Tab-separated history; floats use round-trip precision."""
        head = ["iteration", *self.names, "lambda_c", "acquisition", "sigma_max", "p_m"]
        lines = ["\t".join(head)]
        for r in self.records:
            vals = [str(r.iteration), *(repr(float(v)) for v in r.z),
                    *(repr(float(v)) for v in (r.value, r.acquisition, r.sigma_max, r.p))]
            lines.append("\t".join(vals))
        return "\n".join(lines) + "\n"

    def timing_table(self) -> str:
        lines = ["iteration\tms"]
        lines += [f"{r.iteration}\t{t:.3f}" for r, t in zip(self.records, self.timings_ms)]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_table(text: str) -> "UcbHistory":
        rows = [ln.split("\t") for ln in text.strip().splitlines()]
        head = rows[0]
        names = tuple(head[1:-4])
        h = UcbHistory(names)
        for r in rows[1:]:
            nums = [float(v) for v in r[1:]]
            h.records.append(UcbRecord(int(r[0]), tuple(nums[:len(names)]), *nums[len(names):]))
        return h


def _indicators(gp, box, schedule, cfg, grid):
    """Largest probe-grid sigma, ``p_m``, and sigma where ``p_m`` is attained."""
    _, var = gpr.posterior_batch(gp, grid)
    sigma_max = float(np.sqrt(var.max()))
    x, p = upper_bound_max(gp, box, beta(schedule, gp.m + 1), cfg, grid)
    return sigma_max, p, math.sqrt(gpr.posterior(gp, x)[1])


def run_ucb_loop(oracle, box: SubspaceBox, schedule: BetaSchedule, cfg: UcbConfig = UcbConfig(),
                 gp0: gpr.GPModel | None = None, on_error: str = "raise"):
    """Sequential GP-UCB sampling of ``oracle`` over ``box``.

    ``oracle`` maps a ``{name: value}`` dict to a float.  ``gp0`` warm-starts
    the model (its inputs must use this box's unit coordinates).  With
    ``on_error="stop"`` an :class:`OracleError` ends the loop and is stored on
    the history instead of propagating.  Returns ``(gp, history)``.
    """
    if on_error not in ("raise", "stop"):
        raise ValueError("on_error must be 'raise' or 'stop'")
    model = gp0 if gp0 is not None else gpr.fit(np.zeros((0, box.dim)), [], cfg.kernel, dim=box.dim)
    history = UcbHistory(box.names)
    grid = probe_grid(box, cfg)
    lo, hi = box.unit_bounds
    min_m = cfg.min_samples_for(int((hi > lo).sum()))
    p_prev = None
    streak = 0
    if model.m > 0:
        sigma_max, p_prev, _ = _indicators(model, box, schedule, cfg, grid)
        if sigma_max < cfg.tol_sigma:
            history.stop_reason = "sigma"
            return model, history
    it = 0
    while model.m < cfg.max_samples:
        it += 1
        t0 = time.perf_counter()
        b = beta(schedule, model.m + 1)
        x, acq = maximize_acquisition(model, box, b, cfg, grid)
        if model.m > 0 and math.sqrt(gpr.posterior(model, x)[1]) < cfg.tol_sigma:
            # The maximiser is already known to within tol_sigma, so a
            # deterministic oracle would add nothing there; explore instead.
            x = grid[int(np.argmax(gpr.posterior_batch(model, grid)[1]))].copy()
            acq = acquisition(model, x, b)
        if not (np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)):
            raise AssertionError("sample left the box")
        z = box.as_target(x)
        try:
            y = float(oracle(z))
        except OracleError as exc:
            if on_error == "raise":
                raise
            history.error = exc
            history.stop_reason = "oracle_error"
            return model, history
        model = gpr.add_sample(model, x, y)
        sigma_max, p, sigma_hat = _indicators(model, box, schedule, cfg, grid)
        history.records.append(UcbRecord(it, tuple(z[n] for n in box.names), y, acq, sigma_max, p))
        history.timings_ms.append(1e3 * (time.perf_counter() - t0))
        if sigma_max < cfg.tol_sigma:
            history.stop_reason = "sigma"
            return model, history
        # p only counts as settled once its maximiser is itself resolved
        settled = p_prev is not None and abs(p - p_prev) < cfg.tol_p and sigma_hat < cfg.tol_sigma
        streak = streak + 1 if settled else 0
        p_prev = p
        if streak >= cfg.patience and model.m >= min_m:
            history.stop_reason = "p_stable"
            return model, history
    history.stop_reason = "max_samples"
    return model, history
