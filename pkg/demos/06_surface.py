# %% [markdown]
# # Upper-bound surface over (|V2|, |V3|)
# Export mu, sigma and the bound on a 21 x 21 grid, next to the true
# lambda_c, for plotting with any external tool.

# %%
import numpy as np

from prscert.box import SubspaceBox
from prscert.certify import certify_prs
from prscert.cli import surface_table
from prscert.netmodel import BASE_POINT, LambdaOracle, wscc9

oracle = LambdaOracle(wscc9(), BASE_POINT)
box = SubspaceBox.from_bounds({"Vm2": (1.0, 1.04), "Vm3": (1.0, 1.04)})
cert = certify_prs(oracle, box, 0.05)
print(cert.verdict, cert.p_m, cert.m)

table = surface_table(cert, 21, oracle)
rows = np.array([[float(x) for x in ln.split("\t")] for ln in table.splitlines()[1:]])
print(rows.shape, "max sigma", rows[:, 3].max(), "max |mu - true|", np.abs(rows[:, 2] - rows[:, 5]).max())

# %% [markdown]
# Points where the bound is non-positive form the region the model vouches for.

# %%
inside = rows[:, 4] <= 0
print(f"{inside.mean():.1%} of the grid has mu + 2 sigma <= 0")
print("any of those truly unstable?", bool(np.any(rows[inside, 5] >= 0)))
