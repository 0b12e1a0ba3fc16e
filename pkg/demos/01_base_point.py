# %% [markdown]
# # Base operating point of the 9-bus system
# Load the standard WSCC data, rescale the loads so the heavy dispatch
# (Pg2 = 2.922, Pg3 = 1.523) reproduces the target slack and reactive
# outputs, then look at the small-signal spectrum there.

# %%
import numpy as np

from prscert.netmodel import (BASE_POINT, DaeModel, calibrate_base_loads, linearize,
                              map_sample_to_equilibrium, reduce_jacobian, remove_reference_mode,
                              solve_power_flow, wscc9)

std = wscc9(calibrated=False)
eq = solve_power_flow(std)
print("standard case  Pg =", np.round(eq.pg, 4), " Qg =", np.round(eq.qg, 4))

# %%
net = calibrate_base_loads(std, BASE_POINT)
for ld in net.loads:
    print(f"bus {ld.bus}: P = {ld.p:.4f}  Q = {ld.q:.4f}")

eq = solve_power_flow(net)
q = eq.quantities(net)
print({k: round(v, 4) for k, v in q.items()})

# %% [markdown]
# The reduced state matrix carries one structural zero from the common
# rotor-angle rotation.  Writing angles relative to machine 1 removes it.

# %%
eq = map_sample_to_equilibrium(net, BASE_POINT)
Jr = reduce_jacobian(linearize(net, eq))
Jz = remove_reference_mode(Jr, DaeModel(net).angle_indices())
lam = np.linalg.eigvals(Jz)
lam = lam[np.argsort(-lam.real)]
print("rightmost eigenvalues:", np.round(lam[:6], 4))
print("lambda_c =", lam.real.max())
