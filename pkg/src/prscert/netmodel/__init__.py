from .dynamics import (DaeJacobians, DaeModel, EquilibriumPoint, critical_eigenvalue,
                       descriptor_eigenvalues, initialize_machines, linearize,
                       reduce_jacobian, remove_reference_mode)
from .network import (NetworkError, NetworkModel, bundled_network_path, load_network,
                      save_network, wscc9)
from .oracle import LambdaOracle, eval_lambda_c, reduced_state_matrix
from .powerflow import (calibrate_base_loads, check_target, dae_residuals,
                        map_sample_to_equilibrium, solve_power_flow)

BASE_POINT = {
    "Pg1": 1.515, "Pg2": 2.922, "Pg3": 1.523,
    "Qg1": 1.421, "Qg2": 1.119, "Qg3": 0.590,
    "Vm1": 1.040, "Vm2": 1.025, "Vm3": 1.025,
}
