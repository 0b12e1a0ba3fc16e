# %% [markdown]
# # A GP model of lambda_c along |V3|
# Three UCB samples on the 1-D box 0.98 <= |V3| <= 1.07, the posterior band
# around them, and the same model after the loop has run to convergence.

# %%
import numpy as np

from prscert import gp as gpr
from prscert.box import SubspaceBox
from prscert.netmodel import BASE_POINT, LambdaOracle, wscc9
from prscert.ucb import BetaSchedule, UcbConfig, run_ucb_loop

oracle = LambdaOracle(wscc9(), BASE_POINT)
box = SubspaceBox.from_bounds({"Vm3": (0.98, 1.07)})
v = np.linspace(0.98, 1.07, 10)
truth = np.array([oracle({"Vm3": x}) for x in v])

# %%
model, hist = run_ucb_loop(oracle, box, BetaSchedule(), UcbConfig(max_samples=3, patience=50))
mu, var = gpr.posterior_batch(model, box.to_unit(v[:, None]))
print("samples at", [round(r.z[0], 4) for r in hist.records])
print(" Vm3     true     mu      2 sigma")
for row in zip(v, truth, mu, 2 * np.sqrt(var)):
    print("  ".join(f"{x:7.4f}" for x in row))

# %%
model, hist = run_ucb_loop(oracle, box, BetaSchedule(), UcbConfig(patience=200))
mu, var = gpr.posterior_batch(model, box.to_unit(v[:, None]))
print(f"{model.m} samples, stopped by {hist.stop_reason}")
print("max |mu - true| =", np.abs(mu - truth).max(), " max sigma =", np.sqrt(var).max())
