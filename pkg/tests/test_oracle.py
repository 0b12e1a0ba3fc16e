import numpy as np
import pytest

from prscert.errors import InfeasibleTarget, OracleError
from prscert.netmodel import BASE_POINT, eval_lambda_c, reduced_state_matrix


def test_base_point_stable(net):
    assert eval_lambda_c(net, BASE_POINT) < 0


def test_deterministic(net):
    z = {"Pg1": 1.6, "Qg1": 1.45}
    a = eval_lambda_c(net, {**BASE_POINT, **z})
    b = eval_lambda_c(net, {**BASE_POINT, **z})
    assert a == b


def test_voltage_rail(net):
    with pytest.raises(InfeasibleTarget) as info:
        eval_lambda_c(net, {"Vm2": 1.7})
    assert info.value.z == {"Vm2": 1.7}


def test_errors_carry_target(net):
    with pytest.raises(OracleError) as info:
        eval_lambda_c(net, {"Pg2": 50.0})
    assert info.value.z is not None
    assert "Pg2" in str(info.value)


def test_reduced_matrix_size(net):
    assert reduced_state_matrix(net, BASE_POINT).shape == (20, 20)


def _path(oracle, n):
    t = np.linspace(0.0, 1.0, n + 1)
    a, b = np.array([1.45, 1.36]), np.array([1.59, 1.49])
    return np.array([oracle({"Pg1": p, "Qg1": q}) for p, q in (a + np.outer(t, b - a))])


def test_path_continuity(oracle):
    lam = _path(oracle, 100)
    jumps = np.abs(np.diff(lam))
    assert jumps.max() < 10 * np.median(jumps)


def test_halving_step_does_not_grow_jumps(oracle):
    coarse = np.abs(np.diff(_path(oracle, 20))).max()
    fine = np.abs(np.diff(_path(oracle, 40))).max()
    assert fine <= coarse + 1e-12
