# %% [markdown]
# # Shrinking a box about the base point
# The (Pg1, |V1|) box reaches an unstable corner.  Bisection on a common
# contraction factor finds a smaller box around the base point that does
# certify.

# %%
from prscert.box import SubspaceBox
from prscert.certify import subspace_search, validate_certificate
from prscert.cli import box_table
from prscert.netmodel import BASE_POINT, LambdaOracle, wscc9

oracle = LambdaOracle(wscc9(), BASE_POINT)
box = SubspaceBox.from_bounds({"Pg1": (1.3, 1.75), "Vm1": (1.0, 1.08)}, BASE_POINT)

found, cert = subspace_search(oracle, box, 0.05)
print(f"alpha = {cert.search['alpha']:.4f} after {cert.search['trials']} trial boxes")
print(box_table(found))

# %%
rep = validate_certificate(oracle, cert, found, n=300, seed=0)
print(rep.report())
