"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from prscert import gp as gpr
from prscert.box import SubspaceBox
from prscert.certify import PRS, certify_prs, confidence_search, subspace_search, validate_certificate
from prscert.gp import KernelParams
from prscert.netmodel import (BASE_POINT, DaeModel, LambdaOracle, calibrate_base_loads,
                              critical_eigenvalue, descriptor_eigenvalues, eval_lambda_c, linearize,
                              map_sample_to_equilibrium, reduce_jacobian, remove_reference_mode,
                              solve_power_flow, wscc9)
from prscert.ucb import BetaSchedule, UcbConfig, beta, upper_bound_max

from naive_gp import posterior as naive_posterior
from test_dynamics import fd_jacobians, operating_points, rel_err

RESULTS = []

REFERENCE_BOXES = {
    "X1": {"Pg1": (0.909, 2.119), "Qg1": (0.852, 1.988)},
    "X2": {"Pg2": (2.338, 3.503), "Qg2": (0.895, 1.341)},
    "X3": {"Pg3": (1.143, 1.914), "Qg3": (0.354, 0.824)},
}
HALF_WIDTH = {"Pg": 0.15, "Qg": 0.15, "Vm": 0.03}


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def net():
    return wscc9()


@pytest.fixture(scope="module")
def oracle(net):
    return LambdaOracle(net, BASE_POINT)


def reference_box(name):
    return SubspaceBox.from_bounds(REFERENCE_BOXES[name], BASE_POINT)


def nine_dim_box():
    bounds = {k: (v - HALF_WIDTH[k[:2]], v + HALF_WIDTH[k[:2]]) for k, v in BASE_POINT.items()}
    return SubspaceBox.from_bounds(bounds, BASE_POINT)


@pytest.fixture(scope="module")
def searches(oracle):
    """Subspace searches from the three reference boxes and the 9-D box, timed together."""
    t0 = time.perf_counter()
    out = {}
    for name in REFERENCE_BOXES:
        out[name] = subspace_search(oracle, reference_box(name), 0.05)
    out["9D"] = subspace_search(oracle, nine_dim_box(), 0.05)
    return out, time.perf_counter() - t0


def test_criterion_01_gp_exactness():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(1, 21))
        p = KernelParams(float(rng.uniform(0.5, 2.0)), tuple(rng.uniform(0.1, 1.0, d)),
                         float(rng.uniform(1e-2, 1.0)))
        X, y, Q = rng.random((m, d)), rng.normal(size=m), rng.random((10, d))
        mu, var = gpr.posterior_batch(gpr.fit(X, y, p), Q)
        mu0, var0 = naive_posterior(X, y, Q, p.signal_var, p.lengthscale, p.noise_std)
        worst = max(worst, np.abs(mu - mu0).max(), np.abs(var - var0).max())
    dt = time.perf_counter() - t0
    record(1, worst < 1e-10 and dt < 5, f"GP vs dense reference max error {worst:.2e} (tol 1e-10), {dt:.2f} s")


def test_criterion_02_eigenvalue_exactness():
    rng = np.random.default_rng(2)
    errs = [abs(critical_eigenvalue(np.diag([-1.0, -3.0])) + 1.0),
            abs(critical_eigenvalue([[0.0, 1.0], [-2.0, -3.0]]) + 1.0)]
    block = np.zeros((5, 5))
    block[0, 0] = -0.5
    block[1:3, 1:3] = [[-1.0, 2.0], [-2.0, -1.0]]
    block[3, 3] = -4.0
    block[4, 4] = -2.5
    for _ in range(20):
        while True:
            S = rng.normal(size=(5, 5))
            if np.linalg.cond(S) < 1e2:
                break
        errs.append(abs(critical_eigenvalue(S @ block @ np.linalg.inv(S)) + 0.5))
    worst = max(errs)
    record(2, worst < 1e-8, f"analytic spectra max error {worst:.2e} (tol 1e-8)")


def test_criterion_03_linearization(net):
    worst = 0.0
    for z in operating_points(10, seed=7):
        eq = map_sample_to_equilibrium(net, z)
        model = DaeModel(net)
        jac = model.jacobians(eq.x, eq.y)
        for an, fd in zip((jac.A, jac.B, jac.C, jac.D), fd_jacobians(model, eq)):
            worst = max(worst, rel_err(an, fd))
    jac = linearize(net, map_sample_to_equilibrium(net, BASE_POINT))
    lam_r = np.linalg.eigvals(reduce_jacobian(jac))
    lam_p = descriptor_eigenvalues(jac)
    gap = max(np.min(np.abs(lam_p - lam)) / max(1.0, abs(lam)) for lam in lam_r)
    ok = worst < 1e-5 and gap < 1e-6 and lam_p.size == lam_r.size
    record(3, ok, f"FD relative error {worst:.2e} (tol 1e-5); pencil vs J_r {gap:.2e} (tol 1e-6)")


def test_criterion_04_base_point():
    t0 = time.perf_counter()
    net = calibrate_base_loads(wscc9(calibrated=False), BASE_POINT)
    eq = solve_power_flow(net, {k: BASE_POINT[k] for k in ("Pg2", "Pg3", "Vm1", "Vm2", "Vm3")})
    q = eq.quantities(net)
    lam = eval_lambda_c(net, BASE_POINT)
    dt = time.perf_counter() - t0
    err = max(abs(q[k] - BASE_POINT[k]) for k in ("Pg1", "Qg1", "Qg2", "Qg3"))
    record(4, err <= 1e-3 and lam < 0 and dt < 1,
           f"Pg1={q['Pg1']:.4f} Qg=({q['Qg1']:.4f},{q['Qg2']:.4f},{q['Qg3']:.4f}) "
           f"max dev {err:.1e}, lambda_c={lam:.4f}, {dt:.2f} s")


def test_criterion_05_bound_coverage(oracle):
    box = SubspaceBox.from_bounds({"Vm3": (0.98, 1.07)}, BASE_POINT)
    cfg = UcbConfig(tol_sigma=1e-3, patience=200)
    t0 = time.perf_counter()
    cert = certify_prs(oracle, box, 0.05, BetaSchedule(), cfg)
    v = np.linspace(0.98, 1.07, 200)
    lam = np.array([oracle({"Vm3": x}) for x in v])
    mu, var = gpr.posterior_batch(cert.gp, box.to_unit(v[:, None]))
    covered = np.mean(lam <= mu + 2 * np.sqrt(var))
    dt = time.perf_counter() - t0
    record(5, covered >= 0.95 and dt < 60 and cert.stop_reason == "sigma",
           f"|V3| box: {covered:.1%} of 200 points under mu+2sigma after {cert.m} samples "
           f"(stopped by {cert.stop_reason}), {dt:.1f} s")


def test_criterion_06_soundness(oracle, searches):
    found, _ = searches
    t0 = time.perf_counter()
    lines = []
    ok = True
    for name, (box, cert) in found.items():
        rep = validate_certificate(oracle, cert, box, n=1000, seed=6)
        ok &= cert.verdict == PRS and rep.n_unstable == 0
        lines.append(f"{name}: {rep.n_unstable}/1000 unstable")
    dt = time.perf_counter() - t0
    record(6, ok and dt < 300, "; ".join(lines) + f", {dt:.1f} s")


def test_criterion_07_reference_boxes_fail(oracle):
    verdicts = {n: certify_prs(oracle, reference_box(n), 0.05) for n in REFERENCE_BOXES}
    ok = all(c.verdict == "NOT_CERTIFIED" for c in verdicts.values())
    record(7, ok, ", ".join(f"{n} {c.verdict} (p_m={c.p_m:.3f})" for n, c in verdicts.items()))


def test_criterion_08_subspace_search(searches):
    found, dt = searches
    ok = dt < 600
    parts = []
    for name, (box, cert) in found.items():
        parent = nine_dim_box() if name == "9D" else reference_box(name)
        strict = bool(np.any(box.lower > parent.lower) or np.any(box.upper < parent.upper))
        nonempty = bool(np.all(box.upper > box.lower))
        good = (cert.verdict == PRS and box.contains(parent.base) and parent.contains_box(box)
                and strict and nonempty)
        ok &= good
        parts.append(f"{name} alpha={cert.search['alpha']:.3f} {cert.verdict}")
    record(8, ok, "; ".join(parts) + f", {dt:.0f} s total")


def test_criterion_09_confidence_search():
    s2 = 0.1 ** 2
    noise_var = s2 / (1 - s2)
    model = gpr.fit([[0.0]], [-0.1 * (1 + noise_var)], KernelParams(noise_std=math.sqrt(noise_var)))
    box = SubspaceBox(("a",), [0.5], [0.5])
    d2, cert = confidence_search(model, box, 0.05)
    below = upper_bound_max(model, box, beta(BetaSchedule(delta=d2 - 1e-3), model.m + 1))[1]
    ok = abs(d2 - 0.3173) <= 2e-3 and cert.verdict == PRS and below >= 0
    record(9, ok, f"delta'={d2:.5f} (target 0.3173 +/- 2e-3); bound at delta'-1e-3 = {below:.2e}")


def test_criterion_10_performance(oracle):
    box = SubspaceBox.from_bounds({"Pg2": (2.0, 2.4), "Pg3": (1.3, 1.6)})
    t0 = time.perf_counter()
    cert = certify_prs(oracle, box, 0.05, BetaSchedule(), UcbConfig(max_samples=60))
    dt = time.perf_counter() - t0
    record(10, cert.verdict == PRS and cert.m <= 60 and dt < 60,
           f"2-D certification: {cert.verdict} with {cert.m} samples in {dt:.2f} s")


def test_criterion_11_determinism(oracle):
    box = SubspaceBox.from_bounds({"Pg1": (1.45, 1.58), "Qg1": (1.36, 1.48)}, BASE_POINT)
    runs = [certify_prs(oracle, box, 0.05, BetaSchedule(), UcbConfig(seed=5)) for _ in range(2)]
    same = (runs[0].to_json() == runs[1].to_json()
            and runs[0].history.to_table() == runs[1].history.to_table())
    record(11, same, f"two runs, {runs[0].m} samples each: identical certificate and history = {same}")
