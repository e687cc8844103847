"""
Proximal operators by hand
==========================

The solvers in this package are built from three shrinkage maps. This
script pokes at each one on small matrices so their behaviour is easy to
see in the printed output.

Run with ``python3 notebooks/01_proximal_operators.py``.
"""

# %%
import numpy as np

from crt.prox import norm_l21, norm_nuclear, prox_l21_columns, prox_nuclear, soft_threshold, svd

rng = np.random.default_rng(0)
np.set_printoptions(precision=3, suppress=True)

# %% [markdown]
# Singular value thresholding subtracts ``tau`` from every singular value
# and drops the ones that go negative. The rank falls as ``tau`` grows.

# %%
m = rng.standard_normal((6, 6))
print("singular values:", svd(m).sigma)
for tau in (0.0, 0.5, 1.5, 3.0):
    out, sigma = prox_nuclear(m, tau, return_sigma=True)
    print(f"tau={tau:3.1f} rank={np.count_nonzero(sigma):d} nuclear={norm_nuclear(out):.3f}")

# %% [markdown]
# Column shrinkage acts on whole columns: short ones vanish, long ones are
# pulled towards zero without changing direction. This is what lets the
# robust loss ignore a few badly corrupted training images.

# %%
p = np.array([[3.0, 0.3, 0.0], [4.0, 0.4, 2.0]])
print("column norms before:", np.linalg.norm(p, axis=0))
print("column norms after :", np.linalg.norm(prox_l21_columns(p, 1.0), axis=0))
print("l2,1 norm before/after:", norm_l21(p), norm_l21(prox_l21_columns(p, 1.0)))

# %% [markdown]
# Entrywise soft thresholding is the same idea one scalar at a time.

# %%
print(soft_threshold(np.array([[2.0, -0.5, -3.0]]), 1.0))
