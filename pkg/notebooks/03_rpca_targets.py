"""
Clean targets from RPCA
=======================

On real data nobody hands us the clean training images. A low-rank plus
sparse split of the corrupted training matrix stands in for them. Here we
plant a known split and watch it come back.
"""

# %%
import numpy as np

from crt.rpca import rpca_decompose, rpca_default_lambda, rpca_objective

rng = np.random.default_rng(2)
n = 30
low = rng.standard_normal((n, 2)) @ rng.standard_normal((2, n))
spikes = np.zeros((n, n))
where = rng.choice(n * n, 45, replace=False)
spikes.flat[where] = rng.choice([-5.0, 5.0], 45)
x = low + spikes

# %%
lam = rpca_default_lambda(n, n)
res = rpca_decompose(x, lam)
print(f"lambda={lam:.4f} iterations={res.report.iterations} converged={res.report.converged}")
print("relative error of the low-rank part:", np.linalg.norm(res.low_rank - low) / np.linalg.norm(low))
print("support of the sparse part recovered:", np.array_equal(np.abs(res.sparse) > 1, spikes != 0))

# %% [markdown]
# Sweeping ``lambda`` moves mass between the two pieces: large values leave
# everything in the low-rank part, tiny values push everything to the
# sparse part.

# %%
for lam in (1e-3, 0.05, lam, 1.0, 100.0):
    r = rpca_decompose(x, lam)
    rank = np.linalg.matrix_rank(r.low_rank, 1e-6)
    nnz = np.count_nonzero(np.abs(r.sparse) > 1e-8)
    print(f"lambda {lam:8.4f}  rank {rank:2d}  sparse nnz {nnz:4d}  objective {rpca_objective(x, r.low_rank, lam):9.3f}")
