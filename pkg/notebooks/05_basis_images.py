"""
Looking at the learned transformation
=====================================

Every column of ``A`` is itself an image. Writing the first few as PGM
files shows what the transformation has learned. It also writes a
corrupted test image next to its recovery.
"""

# %%
from pathlib import Path

import numpy as np

from crt.corruption import CorruptionSpec, apply_corruption
from crt.matrix_io import export_image_pgm
from crt.rpca import synthesize_ground_truth
from crt.solver import export_basis, fit_robust, recover
from crt.harness import make_template_dataset, psnr

out = Path("notebook_output/basis")
ds = make_template_dataset(n_per_class=30, seed=3)
noisy, _ = apply_corruption(ds, CorruptionSpec("cross", 0.10, seed=3))

train = np.arange(ds.data.shape[1]) % 5 != 0
z = noisy.data[:, train]
z0 = synthesize_ground_truth(z)
model, report = fit_robust(z0, z, lam=0.2)
print(f"fit in {report.iterations} iterations, rank {np.linalg.matrix_rank(model.a, 1e-6)}")

# %%
paths = export_basis(model, ds.height, ds.width, out, count=32)
print(f"wrote {len(paths)} basis images to {out}/")

# %%
j = int(np.flatnonzero(~train)[0])
x = noisy.data[:, j]
y = recover(model, x)
export_image_pgm(ds.data[:, j], ds.height, ds.width, out / "test_clean.pgm")
export_image_pgm(x, ds.height, ds.width, out / "test_corrupted.pgm")
export_image_pgm(y, ds.height, ds.width, out / "test_recovered.pgm")
print(f"PSNR corrupted {psnr(x, ds.data[:, j]):.2f} dB -> recovered {psnr(y, ds.data[:, j]):.2f} dB")
