# %% [markdown]
# # Certifying boxes
# The three wide boxes around single machines all contain unstable operating
# points, so none of them can be certified.  A box made of the base point
# alone certifies immediately.

# %%
from prscert.box import SubspaceBox
from prscert.certify import certify_prs
from prscert.netmodel import BASE_POINT, LambdaOracle, wscc9

oracle = LambdaOracle(wscc9(), BASE_POINT)

boxes = {
    "X1": {"Pg1": (0.909, 2.119), "Qg1": (0.852, 1.988)},
    "X2": {"Pg2": (2.338, 3.503), "Qg2": (0.895, 1.341)},
    "X3": {"Pg3": (1.143, 1.914), "Qg3": (0.354, 0.824)},
}
for name, bounds in boxes.items():
    cert = certify_prs(oracle, SubspaceBox.from_bounds(bounds, BASE_POINT), 0.05)
    print(f"{name}: {cert.verdict:14s} p_m = {cert.p_m:.4f}  at {cert.x_hat}  ({cert.m} samples)")

# %%
cert = certify_prs(oracle, SubspaceBox.point({"Pg1": BASE_POINT["Pg1"]}), 0.05)
print(cert.report())

# %% [markdown]
# A lightly loaded box in the (Pg2, Pg3) plane is stable throughout.

# %%
cert = certify_prs(oracle, SubspaceBox.from_bounds({"Pg2": (2.0, 2.4), "Pg3": (1.3, 1.6)}), 0.05)
print(cert.verdict, cert.p_m, cert.m, cert.stop_reason)
