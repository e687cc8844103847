"""Corruption recovery transformations.

Learn one ``p x p`` matrix ``A`` from paired clean/corrupted training images
so that ``A @ x`` approximately removes the corruption from unseen images.
"""

from .classify import (
    PcaModel,
    SrcSolution,
    knn_classify,
    knn_predict,
    pca_fit,
    pca_project,
    src_classify,
    src_fit,
    src_identity,
)
from .corruption import CorruptionSpec, apply_corruption, make_mask
from .harness import ExperimentConfig, MetricsTable, psnr, run_cv
from .matrix_io import (
    DatasetManifest,
    LabeledDataset,
    export_image_pgm,
    load_dataset,
    load_matrix,
    save_matrix,
)
from .prox import norm_l21, norm_nuclear, prox_l21_columns, prox_nuclear, soft_threshold
from .rpca import RpcaResult, rpca_decompose, rpca_default_lambda, synthesize_ground_truth
from .solver import (
    CrtModel,
    SolverConfig,
    SolverReport,
    export_basis,
    fit_ridge,
    fit_robust,
    load_model,
    objective,
    recover,
    save_model,
)

__version__ = "0.1.0"
