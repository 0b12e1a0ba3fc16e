"""The critical-eigenvalue oracle ``lambda_c(z)``."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import InfeasibleTarget, OracleError
from .dynamics import (DaeModel, critical_eigenvalue, linearize, reduce_jacobian,
                       remove_reference_mode)
from .network import NetworkModel
from .powerflow import check_target, dae_residuals, map_sample_to_equilibrium

V_RAIL = (0.5, 1.5)
RESIDUAL_TOL = 1e-8


def reduced_state_matrix(net: NetworkModel, z: Mapping[str, float]) -> np.ndarray:
    """State matrix at ``z`` with the angle-reference mode removed (20x20 for 9-bus)."""
    eq = map_sample_to_equilibrium(net, z)
    fres, gres = dae_residuals(net, eq)
    if eq.mismatch > RESIDUAL_TOL or fres > RESIDUAL_TOL or gres > RESIDUAL_TOL:
        raise OracleError("equilibrium residual above tolerance", z=z,
                          residual=max(eq.mismatch, fres, gres))
    Jr = reduce_jacobian(linearize(net, eq))
    return remove_reference_mode(Jr, DaeModel(net).angle_indices())


def eval_lambda_c(net: NetworkModel, z: Mapping[str, float]) -> float:
    """Largest real part of the small-signal spectrum at operating target ``z``.

    Negative means the operating point is small-signal stable.  Errors from
    the power flow, the algebraic reduction or the eigensolver propagate with
    ``z`` attached.
    """
    z = check_target(net, z)
    for name, value in z.items():
        if name.startswith("Vm") and not V_RAIL[0] <= value <= V_RAIL[1]:
            raise InfeasibleTarget(f"{name}={value} outside the [{V_RAIL[0]}, {V_RAIL[1]}] pu rail", z=z)
    try:
        return critical_eigenvalue(reduced_state_matrix(net, z))
    except OracleError as exc:
        if exc.z is None:
            exc.z = dict(z)
        raise


class LambdaOracle:
    """Callable wrapper ``z -> lambda_c`` over a shared, read-only network.

    ``fixed`` quantities are merged under every sample (sample values win).
    """

    def __init__(self, net: NetworkModel, fixed: Mapping[str, float] | None = None):
        self.net = net
        self.fixed = dict(fixed or {})

    def __call__(self, z: Mapping[str, float]) -> float:
        return eval_lambda_c(self.net, {**self.fixed, **z})
