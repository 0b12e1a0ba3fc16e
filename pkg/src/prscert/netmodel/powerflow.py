"""Newton power flow, load calibration and operating-target realisation.

Operating quantities are addressed by name:

``Pg<b>``, ``Qg<b>``, ``Vm<b>``
    active/reactive output and terminal voltage of the generator at bus ``b``;
``kP<b>``, ``kQ<b>``
    active/reactive load scale factor at load bus ``b`` (1.0 = network data).

All three solvers share one damped Newton engine whose unknowns are bus
angles, free voltage magnitudes and (optionally) free load scale factors.
When there are more free load scales than equations need, each step is the
one that keeps the scales closest, in least squares, to a reference.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from ..errors import (CalibrationError, InfeasibleTarget, OverdeterminedTarget,
                      PowerFlowDiverged, SingularJacobian)
from .dynamics import DaeModel, EquilibriumPoint, initialize_machines
from .network import Load, NetworkModel

_NAME = re.compile(r"^(Pg|Qg|Vm|kP|kQ)(\d+)$")

PF_TOL = 1e-10
MAX_ITER = 50


def parse_name(name: str) -> tuple[str, int]:
    mt = _NAME.match(name)
    if mt is None:
        raise ValueError(f"unknown operating quantity {name!r}")
    return mt.group(1), int(mt.group(2))


def check_target(net: NetworkModel, z: Mapping[str, float]) -> dict[str, float]:
    """Validate names and values of an operating target; returns a plain dict."""
    gen_buses = {g.bus for g in net.generators}
    load_buses = {ld.bus for ld in net.loads}
    out = {}
    for name, value in z.items():
        kind, bus = parse_name(name)
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"{name}: value must be finite")
        if kind in ("Pg", "Qg", "Vm") and bus not in gen_buses:
            raise ValueError(f"{name}: no generator at bus {bus}")
        if kind in ("kP", "kQ") and bus not in load_buses:
            raise ValueError(f"{name}: no load at bus {bus}")
        out[name] = value
    return out


@dataclass
class _Problem:
    """One Newton solve: which quantities are fixed, targeted or free."""

    vm_set: np.ndarray          # voltage setpoints (gen buses), start values elsewhere
    pg_set: np.ndarray          # per-bus scheduled generation (non-slack gens)
    p_load0: np.ndarray
    q_load0: np.ndarray
    kp: np.ndarray              # per-bus load scales (1 where no load)
    kq: np.ndarray
    p_slack: float | None = None         # slack active output target
    q_target: dict | None = None         # bus index -> reactive output target
    free_v: tuple = ()                   # gen bus indices whose |V| is released
    free_k: tuple = ()                   # (('P'|'Q'), bus index) load scales released
    reg: np.ndarray | None = None        # regulariser R; objective ||R k - rho||^2
    rho: np.ndarray | None = None


@dataclass
class _Solution:
    vm: np.ndarray
    va: np.ndarray
    kp: np.ndarray
    kq: np.ndarray
    residual: np.ndarray
    labels: list
    converged: bool
    iterations: int

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def _layout(net: NetworkModel, prob: _Problem):
    types = [b.type for b in net.buses]
    n = net.n_bus
    slack = net.slack_index
    qt = prob.q_target or {}
    p_rows = [i for i in range(n) if i != slack or prob.p_slack is not None]
    q_rows = [i for i in range(n) if types[i] == "PQ" or i in qt]
    th_cols = [i for i in range(n) if i != slack]
    v_cols = [i for i in range(n) if types[i] == "PQ" or i in prob.free_v]
    return p_rows, q_rows, th_cols, v_cols


def _newton(net: NetworkModel, prob: _Problem, va0=None, vm0=None,
            tol=PF_TOL, max_iter=MAX_ITER) -> _Solution:
    Y = net.ybus()
    n = net.n_bus
    slack = net.slack_index
    p_rows, q_rows, th_cols, v_cols = _layout(net, prob)
    k_cols = list(prob.free_k)
    n_s = len(th_cols) + len(v_cols)
    n_eq = len(p_rows) + len(q_rows)
    if n_eq - n_s > len(k_cols):
        raise OverdeterminedTarget("overdetermined target")

    vm = prob.vm_set.copy() if vm0 is None else np.array(vm0, dtype=float)
    va = np.zeros(n) if va0 is None else np.array(va0, dtype=float)
    for i in range(n):
        if i not in v_cols:
            vm[i] = prob.vm_set[i]
    kp, kq = prob.kp.copy(), prob.kq.copy()
    qt = prob.q_target or {}

    p_spec = prob.pg_set.copy()
    if prob.p_slack is not None:
        p_spec[slack] = prob.p_slack
    q_spec = np.zeros(n)
    for i, q in qt.items():
        q_spec[i] = q

    labels = [f"P{net.buses[i].id}" for i in p_rows] + [f"Q{net.buses[i].id}" for i in q_rows]

    def residual(vm, va, kp, kq):
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        dp = p_spec - kp * prob.p_load0 - S.real
        dq = q_spec - kq * prob.q_load0 - S.imag
        return np.concatenate([dp[p_rows], dq[q_rows]])

    def jacobian(vm, va):
        V = vm * np.exp(1j * va)
        Ibus = Y @ V
        diagV = np.diag(V)
        dS_dth = 1j * diagV @ np.conj(np.diag(Ibus) - Y @ diagV)
        dS_dV = diagV @ np.conj(Y @ np.diag(V / vm)) + np.conj(np.diag(Ibus)) @ np.diag(V / vm)
        J = np.zeros((n_eq, n_s + len(k_cols)))
        P, Q = len(p_rows), len(q_rows)
        nt = len(th_cols)
        J[:P, :nt] = -dS_dth.real[np.ix_(p_rows, th_cols)]
        J[:P, nt:n_s] = -dS_dV.real[np.ix_(p_rows, v_cols)]
        J[P:, :nt] = -dS_dth.imag[np.ix_(q_rows, th_cols)]
        J[P:, nt:n_s] = -dS_dV.imag[np.ix_(q_rows, v_cols)]
        for j, (kind, b) in enumerate(k_cols):
            if kind == "P" and b in p_rows:
                J[p_rows.index(b), n_s + j] = -prob.p_load0[b]
            if kind == "Q" and b in q_rows:
                J[P + q_rows.index(b), n_s + j] = -prob.q_load0[b]
        return J

    def kvec(kp, kq):
        return np.array([kp[b] if kind == "P" else kq[b] for kind, b in k_cols])

    def apply(vm, va, kp, kq, step):
        vm, va, kp, kq = vm.copy(), va.copy(), kp.copy(), kq.copy()
        nt = len(th_cols)
        va[th_cols] += step[:nt]
        vm[v_cols] += step[nt:n_s]
        for j, (kind, b) in enumerate(k_cols):
            if kind == "P":
                kp[b] += step[n_s + j]
            else:
                kq[b] += step[n_s + j]
        return vm, va, kp, kq

    r = residual(vm, va, kp, kq)
    it = 0
    for it in range(1, max_iter + 1):
        if not np.all(np.isfinite(r)):
            break
        J = jacobian(vm, va)
        if k_cols:
            R = prob.reg if prob.reg is not None else np.eye(len(k_cols))
            rho = prob.rho if prob.rho is not None else np.zeros(R.shape[0])
            H = np.zeros((J.shape[1], J.shape[1]))
            H[n_s:, n_s:] = R.T @ R
            grad = np.zeros(J.shape[1])
            grad[n_s:] = R.T @ (R @ kvec(kp, kq) - rho)
            K = np.block([[H, J.T], [J, np.zeros((n_eq, n_eq))]])
            rhs = np.concatenate([-grad, -r])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            step = sol[:J.shape[1]]
        else:
            try:
                if np.linalg.cond(J) > 1e14:
                    raise np.linalg.LinAlgError
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                raise SingularJacobian("power flow Jacobian singular during Newton step") from None
        rn = np.max(np.abs(r))
        if rn < tol and np.max(np.abs(step), initial=0.0) < 1e-9:
            return _Solution(vm, va, kp, kq, r, labels, True, it - 1)
        # Backtracking on the max-norm mismatch; full steps inside the
        # quadratic basin so the regularised steps can slide along the manifold.
        alpha = 1.0
        while True:
            cand = apply(vm, va, kp, kq, alpha * step)
            r_new = residual(*cand)
            rn_new = np.max(np.abs(r_new)) if np.all(np.isfinite(r_new)) else np.inf
            if rn_new < (1 - 1e-4 * alpha) * rn or rn_new < 1e-6:
                break
            alpha *= 0.5
            if alpha < 1e-4:
                return _Solution(vm, va, kp, kq, r, labels, rn < tol, it)
        vm, va, kp, kq = cand
        r = r_new
    ok = bool(np.all(np.isfinite(r))) and np.max(np.abs(r)) < tol
    return _Solution(vm, va, kp, kq, r, labels, ok, it)


def _base_problem(net: NetworkModel, setpoints: Mapping[str, float]) -> _Problem:
    n = net.n_bus
    vm = np.array([b.v_set if b.type != "PQ" else 1.0 for b in net.buses])
    pg = np.zeros(n)
    for g in net.generators:
        pg[net.bus_index(g.bus)] = g.p_set
    p0, q0 = net.load_vectors()
    kp, kq = np.ones(n), np.ones(n)
    for name, value in setpoints.items():
        kind, bus = parse_name(name)
        i = net.bus_index(bus)
        if kind == "Vm":
            vm[i] = value
        elif kind == "Pg" and i != net.slack_index:
            pg[i] = value
        elif kind == "kP":
            kp[i] = value
        elif kind == "kQ":
            kq[i] = value
    return _Problem(vm_set=vm, pg_set=pg, p_load0=p0, q_load0=q0, kp=kp, kq=kq)


def _equilibrium(net: NetworkModel, sol: _Solution, prob: _Problem, controls=None) -> EquilibriumPoint:
    Y = net.ybus()
    V = sol.vm * np.exp(1j * sol.va)
    S = V * np.conj(Y @ V)
    p_load = sol.kp * prob.p_load0
    q_load = sol.kq * prob.q_load0
    gb = net.gen_bus_indices
    pg = S.real[gb] + p_load[gb]
    qg = S.imag[gb] + q_load[gb]
    gen_p = np.zeros(net.n_bus)
    gen_q = np.zeros(net.n_bus)
    gen_p[gb], gen_q[gb] = pg, qg
    mismatch = float(np.max(np.abs(np.concatenate([gen_p - p_load - S.real, gen_q - q_load - S.imag]))))
    x, y, tm, vref = initialize_machines(net, sol.vm, sol.va, pg, qg)
    ctrl = {}
    for ld in net.loads:
        i = net.bus_index(ld.bus)
        ctrl[f"kP{ld.bus}"] = float(sol.kp[i])
        ctrl[f"kQ{ld.bus}"] = float(sol.kq[i])
    if controls:
        ctrl.update(controls)
    return EquilibriumPoint(vm=sol.vm, va=sol.va, pg=pg, qg=qg, p_load=p_load, q_load=q_load,
                            x=x, y=y, tm=tm, vref=vref, mismatch=mismatch, controls=ctrl)


def solve_power_flow(net: NetworkModel, setpoints: Mapping[str, float] | None = None,
                     max_iter: int = MAX_ITER, tol: float = PF_TOL) -> EquilibriumPoint:
    """Newton-Raphson power flow from a flat start.

    ``setpoints`` may set ``Pg`` of non-slack machines, ``Vm`` of generator
    buses and load scales; anything omitted falls back to the network data.
    The slack output and all reactive outputs are results.
    """
    setpoints = check_target(net, setpoints or {})
    for name in setpoints:
        kind, bus = parse_name(name)
        if kind == "Qg" or (kind == "Pg" and net.bus_index(bus) == net.slack_index):
            raise ValueError(f"{name} is a power-flow output; use map_sample_to_equilibrium")
    prob = _base_problem(net, setpoints)
    sol = _newton(net, prob, max_iter=max_iter, tol=tol)
    if not sol.converged:
        raise PowerFlowDiverged("power flow diverged", z=setpoints, residual=sol.norm)
    return _equilibrium(net, sol, prob)


def calibrate_base_loads(net: NetworkModel, base: Mapping[str, float], tol: float = 1e-3) -> NetworkModel:
    """Rescale loads so the power flow at ``base`` reproduces its slack and reactive outputs.

    ``base`` holds ``Pg``, ``Qg`` and ``Vm`` for every machine.  The six load
    scale factors are chosen as close as possible to a pure proportional
    scaling (one common factor for P, one for Q) while matching the slack
    active output and every reactive output.
    """
    base = check_target(net, base)
    prob = _base_problem(net, {k: v for k, v in base.items() if k[:2] in ("Pg", "Vm")})
    slack = net.slack_index
    prob.p_slack = base[f"Pg{net.buses[slack].id}"]
    prob.q_target = {net.bus_index(g.bus): base[f"Qg{g.bus}"] for g in net.generators}
    load_idx = sorted({net.bus_index(ld.bus) for ld in net.loads})
    prob.free_k = tuple(("P", i) for i in load_idx) + tuple(("Q", i) for i in load_idx)
    nl = len(load_idx)
    centre = np.eye(nl) - np.full((nl, nl), 1.0 / nl)
    prob.reg = np.block([[centre, np.zeros((nl, nl))], [np.zeros((nl, nl)), centre]])
    prob.rho = np.zeros(2 * nl)
    sol = _newton(net, prob, max_iter=100)

    loads = []
    for ld in net.loads:
        i = net.bus_index(ld.bus)
        loads.append(Load(ld.bus, ld.p * sol.kp[i], ld.q * sol.kq[i]))
    gens = tuple(replace(g, p_set=base.get(f"Pg{g.bus}", g.p_set)) for g in net.generators)
    buses = tuple(replace(b, v_set=base.get(f"Vm{b.id}", b.v_set)) for b in net.buses)
    out = replace(net, loads=tuple(loads), generators=gens, buses=buses, base_point=dict(base))

    check = {}
    try:
        eq = solve_power_flow(out)
        q = eq.quantities(out)
        for name in [f"Pg{net.buses[slack].id}"] + [f"Qg{g.bus}" for g in net.generators]:
            check[name] = q[name] - base[name]
    except (PowerFlowDiverged, SingularJacobian):
        check = {lab: float(v) for lab, v in zip(sol.labels, sol.residual)}
        raise CalibrationError("load calibration failed", residuals=check) from None
    if not sol.converged or max(abs(v) for v in check.values()) > tol:
        if not sol.converged:
            check = {lab: float(v) for lab, v in zip(sol.labels, sol.residual)}
        raise CalibrationError("load calibration residual above tolerance", residuals=check)
    return out


def map_sample_to_equilibrium(net: NetworkModel, z: Mapping[str, float],
                              tol: float = PF_TOL) -> EquilibriumPoint:
    """Realise a named operating target as an equilibrium.

    ``Pg`` of non-slack machines, ``Vm`` and load scales are applied directly.
    Derived quantities are matched by releasing free controls: a reactive
    target ``Qg<b>`` first releases the voltage setpoint at bus ``b``; the
    slack output and any reactive target whose voltage is pinned are then
    absorbed by the load scale factors not named in ``z``, moved as little as
    possible from the network data.
    """
    z = check_target(net, z)
    direct = {k: v for k, v in z.items()
              if not (k.startswith("Qg") or (k.startswith("Pg") and net.bus_index(parse_name(k)[1]) == net.slack_index))}
    derived = {k: v for k, v in z.items() if k not in direct}
    prob = _base_problem(net, direct)
    slack = net.slack_index
    q_target, free_v, leftover = {}, [], 0
    for name, value in derived.items():
        kind, bus = parse_name(name)
        i = net.bus_index(bus)
        if kind == "Pg":
            prob.p_slack = value
            leftover += 1
        else:
            q_target[i] = value
            if f"Vm{bus}" not in z:
                free_v.append(i)
            else:
                leftover += 1
    prob.q_target = q_target
    prob.free_v = tuple(free_v)
    if leftover:
        free_k = []
        for kind in ("P", "Q"):
            for ld in net.loads:
                if f"k{kind}{ld.bus}" not in z:
                    free_k.append((kind, net.bus_index(ld.bus)))
        if len(free_k) < leftover:
            raise OverdeterminedTarget("overdetermined target", z=z)
        prob.free_k = tuple(free_k)
        prob.rho = np.array([prob.kp[b] if kind == "P" else prob.kq[b] for kind, b in free_k])
    sol = _newton(net, prob, tol=tol, max_iter=100 if leftover else MAX_ITER)
    if not sol.converged:
        raise InfeasibleTarget("infeasible operating target", z=z, residual=sol.norm)
    if np.any(sol.vm < 0.5) or np.any(sol.vm > 1.5):
        raise InfeasibleTarget("infeasible operating target: bus voltage outside [0.5, 1.5] pu",
                               z=z, residual=float(np.max(np.abs(sol.vm - 1.0))))
    eq = _equilibrium(net, sol, prob)
    q = eq.quantities(net)
    worst = max((abs(q[k] - v) for k, v in z.items()), default=0.0)
    if worst > 1e-6:
        raise InfeasibleTarget("infeasible operating target", z=z, residual=worst)
    return eq


def dae_residuals(net: NetworkModel, eq: EquilibriumPoint) -> tuple[float, float]:
    """``(max |f|, max |g|)`` at an equilibrium."""
    model = DaeModel(net)
    f = model.f(eq.x, eq.y, eq.tm, eq.vref)
    g = model.g(eq.x, eq.y, eq.p_load, eq.q_load)
    return float(np.max(np.abs(f))), float(np.max(np.abs(g)))
