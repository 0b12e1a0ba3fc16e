"""Two-axis machine / IEEE Type-I exciter DAE model of the network.

State layout, grouped by variable (m machines)::

    x = [delta(m), omega(m), Eq'(m), Ed'(m), Efd(m), RF(m), VR(m)]
    y = [Id(m), Iq(m), theta(n), V(n)]

Algebraic equations are ordered ``[stator d (m), stator q (m), P balance (n),
Q balance (n)]``.  Stator resistance is neglected and loads are constant
power.  Speeds are in per-unit, angles in radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import AlgebraicSingularity, EigensolveFailed
from .network import NetworkModel

STATE_NAMES = ("delta", "omega", "Eqp", "Edp", "Efd", "RF", "VR")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class MachineArrays:
    """Vectorised machine and exciter parameters in generator order."""

    H: np.ndarray
    D: np.ndarray
    xd: np.ndarray
    xdp: np.ndarray
    xq: np.ndarray
    xqp: np.ndarray
    Td0: np.ndarray
    Tq0: np.ndarray
    KA: np.ndarray
    TA: np.ndarray
    KE: np.ndarray
    TE: np.ndarray
    KF: np.ndarray
    TF: np.ndarray
    AE: np.ndarray
    BE: np.ndarray

    @classmethod
    def from_network(cls, net: NetworkModel) -> "MachineArrays":
        gm = [g.machine for g in net.generators]
        ge = [g.exciter for g in net.generators]

        def col(objs, attr):
            return np.array([getattr(o, attr) for o in objs], dtype=float)

        return cls(
            H=col(gm, "H"), D=col(gm, "D"), xd=col(gm, "xd"), xdp=col(gm, "xd_p"),
            xq=col(gm, "xq"), xqp=col(gm, "xq_p"), Td0=col(gm, "Td0_p"), Tq0=col(gm, "Tq0_p"),
            KA=col(ge, "KA"), TA=col(ge, "TA"), KE=col(ge, "KE"), TE=col(ge, "TE"),
            KF=col(ge, "KF"), TF=col(ge, "TF"), AE=col(ge, "AE"), BE=col(ge, "BE"),
        )


@dataclass(frozen=True)
class EquilibriumPoint:
    """A converged power-flow solution with machine states initialised on it."""

    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray
    x: np.ndarray
    y: np.ndarray
    tm: np.ndarray
    vref: np.ndarray
    mismatch: float
    controls: dict = field(default_factory=dict)

    def quantities(self, net: NetworkModel) -> dict[str, float]:
        """Operating quantities by name (``Pg1``, ``Qg2``, ``Vm3`` ...)."""
        out = {}
        for k, g in enumerate(net.generators):
            out[f"Pg{g.bus}"] = float(self.pg[k])
            out[f"Qg{g.bus}"] = float(self.qg[k])
            out[f"Vm{g.bus}"] = float(self.vm[net.bus_index(g.bus)])
        out.update(self.controls)
        return out


@dataclass(frozen=True)
class DaeJacobians:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        nx, ny = self.A.shape[0], self.D.shape[0]
        if not (self.A.shape == (nx, nx) and self.B.shape == (nx, ny)
                and self.C.shape == (ny, nx) and self.D.shape == (ny, ny)):
            raise ValueError("inconsistent Jacobian block shapes")

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])


class DaeModel:
    """Residual functions ``f(x, y)`` and ``g(x, y)`` for a fixed network.

    ``tm``, ``vref`` and the load vectors are inputs held constant during
    linearisation; they come from the equilibrium.
    """

    def __init__(self, net: NetworkModel):
        self.net = net
        self.p = MachineArrays.from_network(net)
        self.m = len(net.generators)
        self.n = net.n_bus
        self.gb = np.array(net.gen_bus_indices)
        self.Y = net.ybus()
        self.ws = net.omega_s

    @property
    def nx(self) -> int:
        return 7 * self.m

    @property
    def ny(self) -> int:
        return 2 * self.m + 2 * self.n

    def split_x(self, x):
        m = self.m
        return [x[i * m:(i + 1) * m] for i in range(7)]

    def split_y(self, y):
        m, n = self.m, self.n
        return y[:m], y[m:2 * m], y[2 * m:2 * m + n], y[2 * m + n:]

    def saturation(self, efd):
        return self.p.AE * np.exp(self.p.BE * efd)

    def f(self, x, y, tm, vref):
        p = self.p
        delta, omega, eqp, edp, efd, rf, vr = self.split_x(x)
        Id, Iq, th, V = self.split_y(y)
        te = edp * Id + eqp * Iq + (p.xqp - p.xdp) * Id * Iq
        return np.concatenate([
            self.ws * (omega - 1.0),
            (tm - te - p.D * (omega - 1.0)) / (2.0 * p.H),
            (-eqp - (p.xd - p.xdp) * Id + efd) / p.Td0,
            (-edp + (p.xq - p.xqp) * Iq) / p.Tq0,
            (-(p.KE + self.saturation(efd)) * efd + vr) / p.TE,
            (-rf + p.KF / p.TF * efd) / p.TF,
            (-vr + p.KA * rf - p.KA * p.KF / p.TF * efd + p.KA * (vref - V[self.gb])) / p.TA,
        ])

    def network_injection(self, th, V):
        Vc = V * np.exp(1j * th)
        return Vc * np.conj(self.Y @ Vc)

    def g(self, x, y, p_load, q_load):
        p = self.p
        delta, omega, eqp, edp, efd, rf, vr = self.split_x(x)
        Id, Iq, th, V = self.split_y(y)
        ang = delta - th[self.gb]
        vg = V[self.gb]
        s = np.sin(ang)
        c = np.cos(ang)
        pgen = np.zeros(self.n)
        qgen = np.zeros(self.n)
        pgen[self.gb] = Id * vg * s + Iq * vg * c
        qgen[self.gb] = Id * vg * c - Iq * vg * s
        S = self.network_injection(th, V)
        return np.concatenate([
            edp - vg * s + p.xqp * Iq,
            eqp - vg * c - p.xdp * Id,
            pgen - p_load - S.real,
            qgen - q_load - S.imag,
        ])

    def network_derivatives(self, th, V):
        """Partials of complex injections ``S`` w.r.t. angles and magnitudes."""
        Vc = V * np.exp(1j * th)
        Ibus = self.Y @ Vc
        diagV = np.diag(Vc)
        dS_dth = 1j * diagV @ np.conj(np.diag(Ibus) - self.Y @ diagV)
        Vnorm = Vc / V
        dS_dV = diagV @ np.conj(self.Y @ np.diag(Vnorm)) + np.conj(np.diag(Ibus)) @ np.diag(Vnorm)
        return dS_dth, dS_dV

    def jacobians(self, x, y) -> DaeJacobians:
        p, m, n, gb = self.p, self.m, self.n, self.gb
        delta, omega, eqp, edp, efd, rf, vr = self.split_x(x)
        Id, Iq, th, V = self.split_y(y)
        r = np.arange(m)
        ix = {name: i * m + r for i, name in enumerate(STATE_NAMES)}
        iId, iIq = r, m + r
        ith, iV = 2 * m + np.arange(n), 2 * m + n + np.arange(n)

        A = np.zeros((self.nx, self.nx))
        A[ix["delta"], ix["omega"]] = self.ws
        A[ix["omega"], ix["omega"]] = -p.D / (2 * p.H)
        A[ix["omega"], ix["Eqp"]] = -Iq / (2 * p.H)
        A[ix["omega"], ix["Edp"]] = -Id / (2 * p.H)
        A[ix["Eqp"], ix["Eqp"]] = -1.0 / p.Td0
        A[ix["Eqp"], ix["Efd"]] = 1.0 / p.Td0
        A[ix["Edp"], ix["Edp"]] = -1.0 / p.Tq0
        se = self.saturation(efd)
        A[ix["Efd"], ix["Efd"]] = -(p.KE + se + efd * p.BE * se) / p.TE
        A[ix["Efd"], ix["VR"]] = 1.0 / p.TE
        A[ix["RF"], ix["RF"]] = -1.0 / p.TF
        A[ix["RF"], ix["Efd"]] = p.KF / p.TF ** 2
        A[ix["VR"], ix["VR"]] = -1.0 / p.TA
        A[ix["VR"], ix["RF"]] = p.KA / p.TA
        A[ix["VR"], ix["Efd"]] = -p.KA * p.KF / (p.TF * p.TA)

        B = np.zeros((self.nx, self.ny))
        B[ix["omega"], iId] = -(edp + (p.xqp - p.xdp) * Iq) / (2 * p.H)
        B[ix["omega"], iIq] = -(eqp + (p.xqp - p.xdp) * Id) / (2 * p.H)
        B[ix["Eqp"], iId] = -(p.xd - p.xdp) / p.Td0
        B[ix["Edp"], iIq] = (p.xq - p.xqp) / p.Tq0
        B[ix["VR"], iV[gb]] = -p.KA / p.TA

        ang = delta - th[gb]
        vg = V[gb]
        s, c = np.sin(ang), np.cos(ang)
        rsd, rsq = r, m + r
        rP, rQ = 2 * m + np.arange(n), 2 * m + n + np.arange(n)

        C = np.zeros((self.ny, self.nx))
        C[rsd, ix["Edp"]] = 1.0
        C[rsd, ix["delta"]] = -vg * c
        C[rsq, ix["Eqp"]] = 1.0
        C[rsq, ix["delta"]] = vg * s
        C[rP[gb], ix["delta"]] = Id * vg * c - Iq * vg * s
        C[rQ[gb], ix["delta"]] = -Id * vg * s - Iq * vg * c

        Dm = np.zeros((self.ny, self.ny))
        Dm[rsd, iIq] = p.xqp
        Dm[rsd, ith[gb]] = vg * c
        Dm[rsd, iV[gb]] = -s
        Dm[rsq, iId] = -p.xdp
        Dm[rsq, ith[gb]] = -vg * s
        Dm[rsq, iV[gb]] = -c
        dS_dth, dS_dV = self.network_derivatives(th, V)
        Dm[np.ix_(rP, ith)] = -dS_dth.real
        Dm[np.ix_(rP, iV)] = -dS_dV.real
        Dm[np.ix_(rQ, ith)] = -dS_dth.imag
        Dm[np.ix_(rQ, iV)] = -dS_dV.imag
        Dm[rP[gb], iId] = vg * s
        Dm[rP[gb], iIq] = vg * c
        Dm[rP[gb], ith[gb]] += -Id * vg * c + Iq * vg * s
        Dm[rP[gb], iV[gb]] += Id * s + Iq * c
        Dm[rQ[gb], iId] = vg * c
        Dm[rQ[gb], iIq] = -vg * s
        Dm[rQ[gb], ith[gb]] += Id * vg * s + Iq * vg * c
        Dm[rQ[gb], iV[gb]] += Id * c - Iq * s
        return DaeJacobians(A, B, C, Dm)

    def angle_indices(self) -> np.ndarray:
        return np.arange(self.m)


def initialize_machines(net: NetworkModel, vm, va, pg, qg):
    """Machine and exciter states consistent with a power-flow solution.

    Returns ``(x, y, tm, vref)``; every derivative is zero at ``(x, y)``.
    """
    p = MachineArrays.from_network(net)
    gb = np.array(net.gen_bus_indices)
    vt = vm[gb] * np.exp(1j * va[gb])
    ig = np.conj((pg + 1j * qg) / vt)
    delta = np.angle(vt + 1j * p.xq * ig)
    rot = np.exp(-1j * (delta - np.pi / 2))
    idq = ig * rot
    vdq = vt * rot
    Id, Iq = idq.real, idq.imag
    Vd, Vq = vdq.real, vdq.imag
    edp = (p.xq - p.xqp) * Iq
    eqp = Vq + p.xdp * Id
    efd = eqp + (p.xd - p.xdp) * Id
    vr = (p.KE + p.AE * np.exp(p.BE * efd)) * efd
    rf = p.KF / p.TF * efd
    vref = vm[gb] + vr / p.KA
    tm = edp * Id + eqp * Iq + (p.xqp - p.xdp) * Id * Iq
    x = np.concatenate([delta, np.ones_like(delta), eqp, edp, efd, rf, vr])
    y = np.concatenate([Id, Iq, va, vm])
    return x, y, tm, vref


def linearize(net: NetworkModel, eq: EquilibriumPoint) -> DaeJacobians:
    """Analytic Jacobian blocks ``A = df/dx``, ``B = df/dy``, ``C = dg/dx``, ``D = dg/dy``."""
    return DaeModel(net).jacobians(eq.x, eq.y)


def reduce_jacobian(jacs: DaeJacobians) -> np.ndarray:
    """Eliminate the algebraic variables: ``A - B D^{-1} C``.

    Uses an LU factorisation of ``D``.  Raises :class:`AlgebraicSingularity`
    when ``D`` is singular or its condition number exceeds ``1e12``.
    """
    D = jacs.D
    if not np.all(np.isfinite(D)):
        raise AlgebraicSingularity("algebraic singularity at operating point")
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise AlgebraicSingularity("algebraic singularity at operating point")
    lu = scipy.linalg.lu_factor(D, check_finite=False)
    return jacs.A - jacs.B @ scipy.linalg.lu_solve(lu, jacs.C, check_finite=False)


def critical_eigenvalue(M) -> float:
    """Largest real part over the spectrum of ``M`` (dense QR with balancing)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise EigensolveFailed("eigensolve failed: non-finite matrix entries")
    try:
        lam = scipy.linalg.eigvals(M, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveFailed(f"eigensolve failed: {exc}") from exc
    if lam.size == 0 or not np.all(np.isfinite(lam)):
        raise EigensolveFailed("eigensolve failed")
    return float(np.max(lam.real))


def remove_reference_mode(Jr, angle_idx, ref: int = 0) -> np.ndarray:
    """Rewrite rotor angles relative to machine ``ref`` and drop its angle.

    A common shift of every rotor and bus angle leaves the network unchanged,
    so ``Jr`` always carries a structural zero eigenvalue along the all-angles
    direction.  In relative-angle coordinates that direction is a zero column,
    and deleting it leaves exactly the remaining spectrum.
    """
    Jr = np.asarray(Jr)
    n = Jr.shape[0]
    angle_idx = np.asarray(angle_idx)
    r = angle_idx[ref]
    T = np.eye(n)
    Tinv = np.eye(n)
    for i in angle_idx:
        if i != r:
            T[i, r] = -1.0
            Tinv[i, r] = 1.0
    Jz = T @ Jr @ Tinv
    keep = np.delete(np.arange(n), r)
    return Jz[np.ix_(keep, keep)]


def descriptor_eigenvalues(jacs: DaeJacobians) -> np.ndarray:
    """Finite generalized eigenvalues of the pencil ``([[A, B], [C, D]], diag(I, 0))``."""
    nx, ny = jacs.A.shape[0], jacs.D.shape[0]
    E = np.zeros((nx + ny, nx + ny))
    E[:nx, :nx] = np.eye(nx)
    alpha, beta = scipy.linalg.eigvals(jacs.full, E, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-10 * np.maximum(np.abs(alpha), 1.0)
    return alpha[finite] / beta[finite]
