# %% [markdown]
# # Relaxing the confidence level
# Instead of shrinking, keep the box and ask for the smallest delta' whose
# bound mu + sqrt(beta(delta')) sigma is negative everywhere.  This only
# works when the posterior mean itself is negative on the whole box.

# %%
import math

from prscert import gp as gpr
from prscert.box import SubspaceBox
from prscert.certify import SearchFailure, certify_prs, confidence_search
from prscert.gp import KernelParams
from prscert.netmodel import BASE_POINT, LambdaOracle, wscc9
from prscert.ucb import UcbConfig

# a hand-built model with mean -0.1 and standard deviation 0.1 at one point
s2 = 0.01
noise = s2 / (1 - s2)
model = gpr.fit([[0.0]], [-0.1 * (1 + noise)], KernelParams(noise_std=math.sqrt(noise)))
point = SubspaceBox(("a",), [0.5], [0.5])
d2, cert = confidence_search(model, point, 0.05)
print(f"delta' = {d2:.4f}  (one-sigma two-sided level is 0.3173)")

# %% [markdown]
# On the real oracle: a box stopped early, before its bound went negative.

# %%
oracle = LambdaOracle(wscc9(), BASE_POINT)
box = SubspaceBox.from_bounds({"Pg2": (2.0, 2.4), "Pg3": (1.3, 1.6)})
early = certify_prs(oracle, box, 0.01, cfg=UcbConfig(max_samples=35))
print(early.verdict, early.p_m)
try:
    d2, cert = confidence_search(early.gp, box, 0.01)
    print(f"certified at delta' = {d2:.4f} (confidence {1 - d2:.2%})")
except SearchFailure as exc:
    print(exc)
