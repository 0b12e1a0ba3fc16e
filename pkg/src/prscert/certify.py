"""Probabilistic robust stability certificates over boxes of operating points.

A box is certified when ``p = max mu + sqrt(beta) sigma`` of the final GP is
negative.  When it is not, :func:`subspace_search` shrinks the box about its
stable anchor and :func:`confidence_search` relaxes the confidence level.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gp as gpr
from .box import SubspaceBox
from .errors import OracleError
from .ucb import (BetaSchedule, UcbConfig, UcbHistory, beta, maximize_acquisition, probe_grid,
                  run_ucb_loop, upper_bound_max)

PRS = "PRS"
NOT_CERTIFIED = "NOT_CERTIFIED"
ABORTED = "ABORTED_INFEASIBLE"
VERDICTS = (PRS, NOT_CERTIFIED, ABORTED)


class SearchFailure(RuntimeError):
    """A fallback search has no answer (unstable anchor, or no confidence level works)."""


@dataclass
class Certificate:
    verdict: str
    delta: float
    beta_mode: str
    beta: float
    p_m: float
    x_hat: dict
    m: int
    stop_reason: str
    box: SubspaceBox
    grid: dict
    wall_time_s: float = 0.0
    error: str | None = None
    search: dict = field(default_factory=dict)
    gp: gpr.GPModel | None = field(default=None, repr=False)
    history: UcbHistory | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict != ABORTED and (self.verdict == PRS) != (self.p_m < 0):
            raise ValueError("verdict disagrees with the sign of p_m")

    @property
    def certified(self) -> bool:
        return self.verdict == PRS

    def to_dict(self) -> dict:
        """Machine-readable form.  Wall time is left out so equal runs give equal files."""
        doc = {
            "verdict": self.verdict,
            "delta": self.delta,
            "beta_mode": self.beta_mode,
            "beta": self.beta,
            "p_m": _num(self.p_m),
            "x_hat": dict(self.x_hat),
            "m": self.m,
            "stop_reason": self.stop_reason,
            "box": self.box.to_dict(),
            "grid": dict(self.grid),
        }
        if self.error is not None:
            doc["error"] = self.error
        if self.search:
            doc["search"] = dict(self.search)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        return cls(doc["verdict"], float(doc["delta"]), doc["beta_mode"], float(doc["beta"]),
                   float(doc["p_m"]) if doc["p_m"] is not None else math.nan,
                   {k: float(v) for k, v in doc["x_hat"].items()}, int(doc["m"]),
                   doc["stop_reason"], SubspaceBox.from_dict(doc["box"]), dict(doc["grid"]),
                   error=doc.get("error"), search=dict(doc.get("search", {})))

    def report(self, validation: "ValidationReport | None" = None) -> str:
        """Human-readable summary."""
        lines = [
            f"verdict        {self.verdict}",
            f"delta          {self.delta:g}",
            f"beta           {self.beta:.6g} ({self.beta_mode})",
            f"p_m            {self.p_m:.6g}",
            f"samples        {self.m}",
            f"stopped by     {self.stop_reason}",
            f"wall time      {self.wall_time_s:.3f} s",
            f"grid           {self.grid['points']} points ({self.grid['density']} per free dim), "
            f"{self.grid['refine_iters']} refinement steps from {self.grid['starts']} starts",
            "argmax x_hat",
        ]
        lines += [f"  {k:<6} {v:.6f}" for k, v in self.x_hat.items()]
        lines.append("box")
        for n, a, b in zip(self.box.names, self.box.lower, self.box.upper):
            lines.append(f"  {n:<6} [{a:.6f}, {b:.6f}]")
        if self.error:
            lines.append(f"error          {self.error}")
        for k, v in self.search.items():
            lines.append(f"{k:<14} {v}")
        if validation is not None:
            lines.append("")
            lines.append(validation.report())
        return "\n".join(lines) + "\n"


def _num(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _grid_meta(box: SubspaceBox, cfg: UcbConfig) -> dict:
    lo, hi = box.unit_bounds
    n_free = int((hi > lo).sum())
    d = cfg.effective_density(n_free)
    return {"density": d, "points": d ** n_free, "refine_iters": cfg.refine_iters,
            "starts": cfg.n_starts}


def _warm_start(box: SubspaceBox, samples, cfg: UcbConfig):
    inside = [(z, y) for z, y in samples if box.contains(z)]
    if not inside:
        return None
    X = np.array([box.to_unit(z) for z, _ in inside])
    return gpr.fit(X, [y for _, y in inside], cfg.kernel, dim=box.dim)


def certify_prs(oracle, box: SubspaceBox, delta: float, schedule: BetaSchedule = BetaSchedule(),
                cfg: UcbConfig = UcbConfig(), infeasible: str = "abort",
                gp0: gpr.GPModel | None = None) -> Certificate:
    """Run the UCB loop on ``box`` and certify it when ``p_m < 0``.

    ``infeasible`` decides what an oracle failure means: ``"abort"`` gives an
    ``ABORTED_INFEASIBLE`` certificate, ``"violate"`` counts the failing point
    as unstable (``NOT_CERTIFIED`` with ``p_m = inf``).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if infeasible not in ("abort", "violate"):
        raise ValueError("infeasible must be 'abort' or 'violate'")
    sched = schedule.with_delta(delta)
    t0 = time.perf_counter()
    model, hist = run_ucb_loop(oracle, box, sched, cfg, gp0=gp0, on_error="stop")
    grid = probe_grid(box, cfg)
    b = beta(sched, model.m + 1)
    meta = _grid_meta(box, cfg)
    if hist.error is not None:
        z = hist.error.z or {}
        x_hat = {n: float(z.get(n, v)) for n, v in zip(box.names, box.lower)}
        verdict, p = (ABORTED, math.nan) if infeasible == "abort" else (NOT_CERTIFIED, math.inf)
        return Certificate(verdict, delta, sched.mode, b, p, x_hat, model.m, hist.stop_reason, box,
                           meta, time.perf_counter() - t0, error=str(hist.error), gp=model,
                           history=hist)
    x, p = upper_bound_max(model, box, b, cfg, grid)
    x_hat = box.as_target(x)
    verdict = PRS if p < 0 else NOT_CERTIFIED
    return Certificate(verdict, delta, sched.mode, b, float(p), x_hat, model.m, hist.stop_reason,
                       box, meta, time.perf_counter() - t0, gp=model, history=hist)


def _samples_of(cert: Certificate):
    if cert.gp is None or cert.gp.m == 0:
        return []
    return [(cert.box.from_unit(x), float(y)) for x, y in zip(cert.gp.X, cert.gp.y)]


def subspace_search(oracle, box: SubspaceBox, delta: float, schedule: BetaSchedule = BetaSchedule(),
                    cfg: UcbConfig = UcbConfig(), tol: float = 1e-2, infeasible: str = "abort"):
    """Largest box ``box.shrink(alpha)`` (bisection on alpha) that certifies.

    Every trial box gets its own UCB run, warm-started from all samples so far
    that fall inside it.  Returns ``(sub_box, certificate)``; the contraction
    factor is recorded under ``certificate.search["alpha"]``.
    """
    if box.base is None:
        raise ValueError("subspace search needs a base point")
    anchor = {n: float(v) for n, v in zip(box.names, box.base)}
    try:
        lam0 = float(oracle(anchor))
    except OracleError as exc:
        raise SearchFailure(f"no anchor for subspace search ({exc})") from exc
    if lam0 >= 0:
        raise SearchFailure(f"no anchor for subspace search (lambda_c at base = {lam0:.4g})")
    samples = [(box.base.copy(), lam0)]

    def attempt(alpha):
        sub = box.shrink(alpha)
        cert = certify_prs(oracle, sub, delta, schedule, cfg, infeasible, _warm_start(sub, samples, cfg))
        samples.extend(_samples_of(cert))
        cert.search = {"alpha": alpha}
        return sub, cert

    sub, cert = attempt(1.0)
    if cert.certified:
        return sub, cert
    lo, hi = 0.0, 1.0
    best = None
    n_trials = 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        sub, cert = attempt(mid)
        n_trials += 1
        if cert.certified:
            lo, best = mid, (sub, cert)
        else:
            hi = mid
    if best is None:
        best = attempt(0.0)
        n_trials += 1
    best[1].search["trials"] = n_trials
    return best


def confidence_search(gp: gpr.GPModel, box: SubspaceBox, delta: float, cfg: UcbConfig = UcbConfig(),
                      schedule: BetaSchedule = BetaSchedule(), tol: float = 1e-3):
    """Smallest ``delta' >= delta`` (to within ``tol``) for which ``gp`` certifies ``box``.

    Returns ``(delta', certificate)``.  Raises :class:`SearchFailure` when the
    posterior mean itself reaches zero somewhere, since no confidence level
    can then give a negative bound.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    grid = probe_grid(box, cfg)
    meta = _grid_meta(box, cfg)

    def bound(d):
        b = beta(schedule.with_delta(d), gp.m + 1)
        x, p = upper_bound_max(gp, box, b, cfg, grid)
        return b, x, p

    def make(d, b, x, p):
        verdict = PRS if p < 0 else NOT_CERTIFIED
        return Certificate(verdict, d, schedule.mode, b, float(p), box.as_target(x), gp.m,
                           "confidence_search", box, meta, gp=gp, search={"delta_start": delta})

    b, x, p = bound(delta)
    if p < 0:
        return delta, make(delta, b, x, p)
    _, mu_max = maximize_acquisition(gp, box, 0.0, cfg, grid)
    if mu_max >= 0:
        raise SearchFailure("subspace mean-unstable; no δ′ exists")
    lo, hi = delta, 1.0
    b, x, p = bound(hi)
    if p >= 0:
        raise SearchFailure("no δ′ exists (bound stays non-negative as δ′ → 1)")
    best = (hi, b, x, p)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        b, x, p = bound(mid)
        if p < 0:
            hi, best = mid, (mid, b, x, p)
        else:
            lo = mid
    return best[0], make(*best)


@dataclass
class ValidationReport:
    n: int
    n_unstable: int
    n_above_bound: int
    max_lambda: float
    seed: int

    @property
    def coverage(self) -> float:
        return 1.0 if self.n == 0 else 1.0 - self.n_above_bound / self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "n_unstable": self.n_unstable, "n_above_bound": self.n_above_bound,
                "coverage": self.coverage, "max_lambda": _num(self.max_lambda), "seed": self.seed}

    def report(self) -> str:
        lines = [f"validation     {self.n} uniform samples (seed {self.seed})",
                 f"  lambda_c >= 0        {self.n_unstable}",
                 f"  above upper bound    {self.n_above_bound}",
                 f"  bound coverage       {self.coverage:.4f}"]
        if self.n:
            lines.append(f"  max lambda_c         {self.max_lambda:.6g}")
        return "\n".join(lines)


def validate_certificate(oracle, cert: Certificate, box: SubspaceBox | None = None, n: int = 1000,
                         seed: int = 0) -> ValidationReport:
    """Monte-Carlo check of a certificate against the true oracle.

    Draws ``n`` uniform points in ``box`` (default: the certified box) and
    counts those with ``lambda_c >= 0`` and those above the GP upper bound
    ``mu + sqrt(beta) sigma``.
    """
    box = cert.box if box is None else box
    if n == 0:
        return ValidationReport(0, 0, 0, math.nan, seed)
    if cert.gp is None:
        raise ValueError("certificate carries no GP model")
    rng = np.random.default_rng(seed)
    Z = box.lower + rng.random((n, box.dim)) * (box.upper - box.lower)
    lam = np.array([oracle(dict(zip(box.names, map(float, z)))) for z in Z])
    mu, var = gpr.posterior_batch(cert.gp, np.array([cert.box.to_unit(z) for z in Z]))
    ub = mu + math.sqrt(cert.beta) * np.sqrt(var)
    return ValidationReport(n, int((lam >= 0).sum()), int((lam > ub).sum()), float(lam.max()), seed)
