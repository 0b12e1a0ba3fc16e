"""Command-line interface: ``prscert certify | search | surface``.

Exit status: 0 certified (or search succeeded), 2 not certified, 3 aborted on
an infeasible operating point, 4 search has no answer, 1 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gp as gpr
from .box import SubspaceBox, load_box
from .certify import (ABORTED, PRS, Certificate, SearchFailure, certify_prs, confidence_search,
                      subspace_search, validate_certificate)
from .netmodel import LambdaOracle, NetworkError, bundled_network_path, load_network
from .ucb import BetaSchedule, UcbConfig, probe_grid, upper_bound_grid

EXIT_PRS, EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_ABORTED, EXIT_NO_ANSWER = 0, 1, 2, 3, 4


@dataclass
class RunConfig:
    network: Path
    subspace: Path
    out: Path
    delta: float = 0.05
    beta_mode: str = "practical"
    rkhs_norm: float = 1.0
    gamma: float = 1.0
    ucb: UcbConfig = field(default_factory=UcbConfig)
    infeasible: str = "abort"
    validate: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("--delta must lie in (0, 1)")
        if self.validate < 0:
            raise ValueError("--validate must be non-negative")

    @property
    def schedule(self) -> BetaSchedule:
        return BetaSchedule(self.beta_mode, self.delta, self.rkhs_norm, self.gamma)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("subspace", type=Path, help="subspace spec (JSON)")
    common.add_argument("--network", type=Path, default=None,
                        help="network file (JSON); default: bundled calibrated WSCC 9-bus")
    common.add_argument("--delta", type=float, default=0.05)
    common.add_argument("--beta-mode", choices=("practical", "theoretical"), default="practical")
    common.add_argument("--rkhs-norm", type=float, default=1.0, help="theoretical beta only")
    common.add_argument("--gamma", type=float, default=1.0, help="theoretical beta only")
    common.add_argument("--max-samples", type=int, default=200)
    common.add_argument("--tol-sigma", type=float, default=1e-3)
    common.add_argument("--tol-p", type=float, default=1e-4)
    common.add_argument("--patience", type=int, default=3)
    common.add_argument("--grid-density", type=int, default=21)
    common.add_argument("--lengthscale", type=float, default=0.2,
                        help="kernel length scale in box-normalised units")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--infeasible", choices=("abort", "violate"), default="abort")
    common.add_argument("--validate", type=int, default=0, metavar="N",
                        help="Monte-Carlo check with N uniform samples")
    common.add_argument("--out", type=Path, default=Path("prscert-out"))

    ap = argparse.ArgumentParser(prog="prscert", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("certify", parents=[common], help="certify a box")
    s = sub.add_parser("search", parents=[common], help="fallback search for a box that fails")
    s.add_argument("--mode", choices=("subspace", "confidence"), default="subspace")
    f = sub.add_parser("surface", parents=[common], help="export the GP bound over a 2-D box")
    f.add_argument("--density", type=int, default=21)
    f.add_argument("--truth", action="store_true", help="also evaluate the oracle at every grid point")
    return ap


def config_from_args(args) -> RunConfig:
    ucb = UcbConfig(max_samples=args.max_samples, grid_density=args.grid_density,
                    tol_sigma=args.tol_sigma, tol_p=args.tol_p, patience=args.patience,
                    seed=args.seed, kernel=gpr.KernelParams(lengthscale=args.lengthscale))
    return RunConfig(args.network or bundled_network_path("wscc9.json"), args.subspace, args.out,
                     args.delta, args.beta_mode, args.rkhs_norm, args.gamma, ucb, args.infeasible,
                     args.validate)


def _setup(cfg: RunConfig):
    """Network oracle and box.  Quantities outside the box are pinned at the
    network's base point, overridden by the spec's ``fixed`` entries."""
    net = load_network(cfg.network)
    box, fixed = load_box(cfg.subspace)
    if box.base is None and all(n in net.base_point for n in box.names):
        base = np.array([net.base_point[n] for n in box.names])
        if box.contains(base):
            box = SubspaceBox(box.names, box.lower, box.upper, base)
    pinned = {**net.base_point, **fixed}
    return LambdaOracle(net, pinned), box


def _write_run(cfg: RunConfig, cert: Certificate, oracle, box) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    validation = None
    if cfg.validate and cert.verdict != ABORTED:
        validation = validate_certificate(oracle, cert, box, cfg.validate, cfg.ucb.seed)
        (cfg.out / "validation.json").write_text(json.dumps(validation.to_dict(), indent=2) + "\n")
    (cfg.out / "certificate.json").write_text(cert.to_json())
    (cfg.out / "report.txt").write_text(cert.report(validation))
    if cert.history is not None:
        (cfg.out / "history.tsv").write_text(cert.history.to_table())
        (cfg.out / "timing.tsv").write_text(cert.history.timing_table())
    if cert.gp is not None:
        gpr.save(cert.gp, cfg.out / "gp.json")


def _status(cert: Certificate) -> int:
    return {PRS: EXIT_PRS, ABORTED: EXIT_ABORTED}.get(cert.verdict, EXIT_NOT_CERTIFIED)


def cmd_certify(cfg: RunConfig) -> int:
    oracle, box = _setup(cfg)
    cert = certify_prs(oracle, box, cfg.delta, cfg.schedule, cfg.ucb, cfg.infeasible)
    _write_run(cfg, cert, oracle, box)
    print(f"{cert.verdict}  p_m={cert.p_m:.6g}  m={cert.m}  ({cert.stop_reason})")
    return _status(cert)


def box_table(box: SubspaceBox) -> str:
    """Per-dimension min, max and width of a box."""
    lines = ["name\tmin\tmax\tdelta"]
    for n, a, b in zip(box.names, box.lower, box.upper):
        lines.append(f"{n}\t{float(a)!r}\t{float(b)!r}\t{float(b - a)!r}")
    return "\n".join(lines) + "\n"


def cmd_search(cfg: RunConfig, mode: str) -> int:
    oracle, box = _setup(cfg)
    try:
        if mode == "subspace":
            found, cert = subspace_search(oracle, box, cfg.delta, cfg.schedule, cfg.ucb,
                                          infeasible=cfg.infeasible)
            _write_run(cfg, cert, oracle, found)
            (cfg.out / "box.json").write_text(json.dumps(found.to_dict(), indent=2) + "\n")
            (cfg.out / "box.tsv").write_text(box_table(found))
            print(f"{cert.verdict}  alpha={cert.search['alpha']:g}")
            print(box_table(found), end="")
        else:
            first = certify_prs(oracle, box, cfg.delta, cfg.schedule, cfg.ucb, cfg.infeasible)
            if first.verdict == ABORTED:
                _write_run(cfg, first, oracle, box)
                print(f"{first.verdict}: {first.error}")
                return EXIT_ABORTED
            d2, cert = confidence_search(first.gp, box, cfg.delta, cfg.ucb, cfg.schedule)
            cert.history = first.history
            _write_run(cfg, cert, oracle, box)
            (cfg.out / "confidence.json").write_text(
                json.dumps({"delta": cfg.delta, "delta_prime": d2}, indent=2) + "\n")
            print(f"{cert.verdict}  delta'={d2:.6g}  confidence={1 - d2:.4%}")
    except SearchFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_ANSWER
    return _status(cert)


def surface_table(cert: Certificate, density: int, oracle=None) -> str:
    """Rows ``(c1, c2, mu, sigma, mu + sqrt(beta) sigma[, lambda_c])`` over a density x density grid."""
    box = cert.box
    lo, hi = box.unit_bounds
    if int((hi > lo).sum()) != 2 or box.dim != 2:
        raise ValueError("surface export needs a box with exactly two free dimensions")
    grid_cfg = UcbConfig(grid_density=density, max_grid_points=max(density ** 2, 1))
    U = probe_grid(box, grid_cfg)
    mu, sigma, ub = upper_bound_grid(cert.gp, U, cert.beta)
    head = [*box.names, "mu", "sigma", "upper"] + (["lambda_c"] if oracle is not None else [])
    lines = ["\t".join(head)]
    for u, a, s, b in zip(U, mu, sigma, ub):
        z = box.as_target(u)
        row = [repr(z[n]) for n in box.names] + [repr(float(a)), repr(float(s)), repr(float(b))]
        if oracle is not None:
            row.append(repr(float(oracle(z))))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def cmd_surface(cfg: RunConfig, density: int = 21, truth: bool = False) -> int:
    oracle, box = _setup(cfg)
    if box.dim != 2:
        raise ValueError("surface export needs exactly two dimensions in the subspace spec")
    cert = certify_prs(oracle, box, cfg.delta, cfg.schedule, cfg.ucb, cfg.infeasible)
    _write_run(cfg, cert, oracle, box)
    if cert.verdict == ABORTED:
        print(f"{cert.verdict}: {cert.error}")
        return EXIT_ABORTED
    (cfg.out / "surface.tsv").write_text(surface_table(cert, density, oracle if truth else None))
    print(f"{cert.verdict}  p_m={cert.p_m:.6g}  m={cert.m}  surface: {density * density} rows")
    return _status(cert)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "search":
            return cmd_search(cfg, args.mode)
        return cmd_surface(cfg, args.density, args.truth)
    except (OSError, ValueError, KeyError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
