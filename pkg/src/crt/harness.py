"""Cross-validated recognition experiments.

A run corrupts the whole dataset (optional), splits it into stratified
folds, and for every fold and pipeline builds features for the training
and test columns, classifies the test columns and records accuracy plus the
PSNR of the pipeline's image estimate against the clean test images.

Pipelines
    ``raw``            corrupted pixels as-is.
    ``pca:D``          projection onto the top ``D`` principal directions.
    ``crt:LAM[:LOSS]`` RPCA-cleaned training set ``Z0``, CRT learned on
                       ``(Z0, Z)``, test columns mapped through ``A``.

Classifiers
    ``knn:K``          K-nearest neighbours (K = 1 or 3 in practice).
    ``src[:GAMMA]``    sparse representation classification.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import knn_predict, pca_fit, pca_project, pca_reconstruct, src_predict
from .corruption import CorruptionSpec, apply_corruption
from .matrix_io import LabeledDataset, load_dataset, parse_key_values
from .rpca import synthesize_ground_truth
from .solver import SolverConfig, fit_robust, recover

log = logging.getLogger(__name__)

PSNR_CAP = 100.0
CSV_HEADER = ("pipeline", "classifier", "param", "fold", "accuracy", "psnr")


def psnr(x, ref) -> float:
    """Peak signal-to-noise ratio in dB for signals on ``[0, 1]``.

    Identical inputs give :data:`PSNR_CAP` (100 dB) instead of infinity.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if x.shape != ref.shape:
        raise ValueError(f"length mismatch: {x.size} vs {ref.size}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def mean_psnr(x, ref) -> float:
    """Average of per-column PSNR values."""
    x = np.asarray(x)
    ref = np.asarray(ref)
    return float(np.mean([psnr(x[:, j], ref[:, j]) for j in range(x.shape[1])]))


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class Pipeline:
    kind: str
    param: str = ""

    @classmethod
    def parse(cls, text: str) -> "Pipeline":
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "raw" and len(parts) == 1:
            return cls("raw")
        if kind == "pca" and len(parts) == 2:
            int(parts[1])
            return cls("pca", parts[1])
        if kind == "crt" and len(parts) in (2, 3):
            float(parts[1])
            loss = parts[2] if len(parts) == 3 else "l21"
            if loss not in ("l21", "frobenius"):
                raise ValueError(f"unknown CRT loss {loss!r}")
            return cls("crt", ":".join([parts[1], loss]) if loss != "l21" else parts[1])
        raise ValueError(f"bad pipeline spec {text!r}")

    @property
    def crt_lambda(self) -> float:
        return float(self.param.split(":")[0])

    @property
    def crt_loss(self) -> str:
        bits = self.param.split(":")
        return bits[1] if len(bits) > 1 else "l21"


@dataclass(frozen=True)
class Classifier:
    kind: str
    param: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Classifier":
        parts = text.strip().split(":")
        if parts[0] == "knn" and len(parts) == 2:
            return cls("knn", int(parts[1]))
        if parts[0] == "src" and len(parts) in (1, 2):
            return cls("src", float(parts[1]) if len(parts) == 2 else None)
        raise ValueError(f"bad classifier spec {text!r}")

    @property
    def name(self) -> str:
        if self.kind == "knn":
            return f"{self.param}-NN"
        return "SRC" if self.param is None else f"SRC({self.param:g})"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a cross-validation run.

    ``compare_against`` picks the training features for the CRT pipeline:
    ``"z0"`` (the RPCA-cleaned training set) or ``"az"`` (training columns
    mapped through the learned transformation).
    """

    manifest: str | None = None
    corruption: CorruptionSpec | None = None
    pipelines: tuple = (Pipeline("raw"),)
    classifiers: tuple = (Classifier("knn", 1),)
    folds: int = 5
    seed: int = 0
    out_dir: str | None = None
    rpca_lambda: float | None = None
    rpca_per_class: bool = False
    compare_against: str = "z0"
    solver: SolverConfig = field(default_factory=SolverConfig)
    src_max_iter: int = 2000

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.compare_against not in ("z0", "az"):
            raise ValueError("compare_against must be 'z0' or 'az'")
        if self.manifest is not None and not Path(self.manifest).exists():
            raise FileNotFoundError(self.manifest)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def load_experiment_config(path) -> ExperimentConfig:
    """Parse a ``key=value`` experiment file.

    Keys: manifest, corruption (block|cross|saltpepper|none), fraction,
    corruption_seed, fill, pipelines and classifiers (comma-separated specs),
    folds, seed, out, rpca_lambda, rpca_per_class, compare (z0|az), mu0,
    rho, mu_max, tol, max_iter. Relative paths resolve against the file.
    """
    kv = parse_key_values(path)
    base = Path(path).parent
    known = {
        "manifest", "corruption", "fraction", "corruption_seed", "fill", "pipelines",
        "classifiers", "folds", "seed", "out", "rpca_lambda", "rpca_per_class",
        "compare", "mu0", "rho", "mu_max", "tol", "max_iter", "src_max_iter",
    }
    unknown = set(kv) - known
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    if "manifest" not in kv:
        raise ValueError(f"{path}: 'manifest' is required")
    corruption = None
    kind = kv.get("corruption", "none")
    if kind != "none":
        corruption = CorruptionSpec(
            kind=kind,
            fraction=float(kv.get("fraction", 0.10)),
            seed=int(kv.get("corruption_seed", kv.get("seed", 0))),
            fill=kv.get("fill") or None,
        )
    defaults = SolverConfig()
    solver = SolverConfig(
        mu0=float(kv.get("mu0", defaults.mu0)),
        rho=float(kv.get("rho", defaults.rho)),
        mu_max=float(kv.get("mu_max", defaults.mu_max)),
        tol=float(kv.get("tol", defaults.tol)),
        max_iter=int(kv.get("max_iter", defaults.max_iter)),
    )
    rpca_lambda = kv.get("rpca_lambda")
    return ExperimentConfig(
        manifest=str(base / kv["manifest"]),
        corruption=corruption,
        pipelines=tuple(Pipeline.parse(s) for s in kv.get("pipelines", "raw").split(",")),
        classifiers=tuple(Classifier.parse(s) for s in kv.get("classifiers", "knn:1").split(",")),
        folds=int(kv.get("folds", 5)),
        seed=int(kv.get("seed", 0)),
        out_dir=str(base / kv["out"]) if "out" in kv else None,
        rpca_lambda=float(rpca_lambda) if rpca_lambda else None,
        rpca_per_class=_BOOL[kv.get("rpca_per_class", "false").lower()],
        compare_against=kv.get("compare", "z0"),
        solver=solver,
        src_max_iter=int(kv.get("src_max_iter", 2000)),
    )


# --------------------------------------------------------------------------
# results

@dataclass
class MetricsTable:
    """Fold-level accuracy and PSNR per (pipeline, classifier, param)."""

    rows: list = field(default_factory=list)

    def add(self, pipeline, classifier, param, fold, accuracy, psnr_db):
        self.rows.append((pipeline, classifier, param, int(fold), float(accuracy), float(psnr_db)))

    def keys(self):
        return sorted({r[:3] for r in self.rows})

    def fold_values(self, pipeline, classifier, param="", column="accuracy"):
        col = CSV_HEADER.index(column)
        vals = [r for r in self.rows if r[:3] == (pipeline, classifier, param)]
        return [r[col] for r in sorted(vals, key=lambda r: r[3])]

    def mean_accuracy(self, pipeline, classifier, param="") -> float:
        vals = self.fold_values(pipeline, classifier, param)
        if not vals:
            raise KeyError((pipeline, classifier, param))
        return float(np.mean(vals))

    def mean_psnr(self, pipeline, classifier, param="") -> float:
        return float(np.mean(self.fold_values(pipeline, classifier, param, "psnr")))

    def to_csv(self, path) -> None:
        """Fold rows sorted by key, then one ``fold=mean`` row per key."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in sorted(self.rows, key=lambda r: (r[:3], r[3])):
                w.writerow([row[0], row[1], row[2], row[3], repr(row[4]), repr(row[5])])
            for key in self.keys():
                w.writerow([*key, "mean", repr(self.mean_accuracy(*key)), repr(self.mean_psnr(*key))])

    def summary(self) -> str:
        lines = [f"{'pipeline':10s} {'param':14s} {'classifier':10s} {'accuracy':>9s} {'psnr':>8s}"]
        for key in self.keys():
            lines.append(
                f"{key[0]:10s} {key[2]:14s} {key[1]:10s} "
                f"{self.mean_accuracy(*key):9.4f} {self.mean_psnr(*key):8.2f}"
            )
        return "\n".join(lines)


# --------------------------------------------------------------------------
# folds and pipelines

def stratified_folds(labels, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample.

    Each class is shuffled, the classes are concatenated in label order and
    samples are dealt to folds round-robin, so fold sizes differ by at most
    one and every class is spread evenly.
    """
    labels = np.asarray(labels)
    counts = np.bincount(labels)
    if labels.size < folds or counts.min() < folds:
        raise ValueError(
            f"dataset too small for {folds} stratified folds "
            f"(smallest class has {counts.min()} samples)"
        )
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in range(counts.size)])
    assignment = np.empty(labels.size, dtype=np.int64)
    assignment[order] = np.arange(labels.size) % folds
    return assignment


def _features(pipeline: Pipeline, z, x, config: ExperimentConfig, train_labels, cache=None):
    """Return (train_features, test_features, test_image_estimate).

    ``cache`` is a per-fold dict; the RPCA target is stored there so a grid
    of CRT pipelines on the same fold shares it.
    """
    if pipeline.kind == "raw":
        return z, x, x
    if pipeline.kind == "pca":
        model = pca_fit(z, int(pipeline.param))
        return pca_project(model, z), pca_project(model, x), pca_reconstruct(model, x)
    if pipeline.kind == "crt":
        cache = {} if cache is None else cache
        if "z0" not in cache:
            ds = LabeledDataset(z, train_labels, 1, z.shape[0])
            cache["z0"] = synthesize_ground_truth(ds, config.rpca_lambda, config.solver, config.rpca_per_class)
        z0 = cache["z0"]
        model, _ = fit_robust(z0, z, pipeline.crt_lambda, pipeline.crt_loss, config.solver)
        y = recover(model, x)
        train = z0 if config.compare_against == "z0" else recover(model, z)
        return train, y, y
    raise ValueError(f"unknown pipeline {pipeline.kind!r}")


def _classify(clf: Classifier, train, labels, test, config):
    if clf.kind == "knn":
        return knn_predict(train, labels, test, int(clf.param))
    return src_predict(train, labels, test, clf.param, config.src_max_iter)


def run_cv(config: ExperimentConfig, dataset: LabeledDataset | None = None) -> MetricsTable:
    """Run the cross-validation described by ``config``.

    ``dataset`` overrides ``config.manifest``. If ``config.out_dir`` is set
    the table is also written there as ``metrics.csv``.
    """
    if dataset is None:
        if config.manifest is None:
            raise ValueError("either a dataset or config.manifest is required")
        dataset = load_dataset(config.manifest)
    clean = dataset
    noisy = apply_corruption(dataset, config.corruption)[0] if config.corruption else dataset
    fold_of = stratified_folds(dataset.labels, config.folds, config.seed)

    table = MetricsTable()
    for fold in range(config.folds):
        test = fold_of == fold
        z, x = noisy.data[:, ~test], noisy.data[:, test]
        z_labels, x_labels = noisy.labels[~test], noisy.labels[test]
        x_clean = clean.data[:, test]
        cache: dict = {}
        for pipe in config.pipelines:
            train_f, test_f, estimate = _features(pipe, z, x, config, z_labels, cache)
            quality = mean_psnr(estimate, x_clean)
            for clf in config.classifiers:
                pred = _classify(clf, train_f, z_labels, test_f, config)
                acc = float(np.mean(pred == x_labels))
                table.add(pipe.kind, clf.name, pipe.param, fold, acc, quality)
                log.info("fold %d %s %s %s acc=%.4f psnr=%.2f", fold, pipe.kind, pipe.param, clf.name, acc, quality)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "metrics.csv")
    return table


# --------------------------------------------------------------------------
# synthetic data

def make_template_dataset(
    n_per_class: int = 40,
    n_classes: int = 3,
    height: int = 16,
    width: int = 16,
    noise: float = 0.02,
    separation: float = 0.25,
    seed: int = 0,
) -> LabeledDataset:
    """Images built from class-specific rank-1 templates plus Gaussian noise.

    All templates share a common smooth rank-1 background ``0.5 * g h^T``;
    class ``c`` adds ``separation`` times its own rank-1 pattern. Each image
    is its class template times a brightness in ``[0.9, 1.1]`` plus
    ``N(0, noise^2)`` pixel noise, clipped to ``[0, 1]``.
    """
    rng = np.random.default_rng(seed)
    rows = np.linspace(0, np.pi, height)
    cols = np.linspace(0, np.pi, width)
    base = 0.5 * np.outer(0.6 + 0.4 * np.sin(rows), 0.6 + 0.4 * np.sin(cols))
    templates = []
    for _ in range(n_classes):
        u = rng.uniform(0.0, 1.0, height)
        v = rng.uniform(0.0, 1.0, width)
        templates.append(base + separation * np.outer(u, v))
    data, labels = [], []
    for c, t in enumerate(templates):
        for _ in range(n_per_class):
            img = t * rng.uniform(0.9, 1.1) + noise * rng.standard_normal(t.shape)
            data.append(np.clip(img, 0.0, 1.0).ravel())
            labels.append(c)
    return LabeledDataset(np.array(data).T, np.array(labels), height, width)


def make_blob_dataset(n_per_class: int = 20, dim: int = 16, spread: float = 0.1, seed: int = 0) -> LabeledDataset:
    """Two Gaussian blobs, one per class, centred far apart in ``[0, 1]^dim``."""
    rng = np.random.default_rng(seed)
    centres = np.stack([np.full(dim, 0.25), np.full(dim, 0.75)])
    data = np.concatenate([c + spread * rng.standard_normal((n_per_class, dim)) for c in centres])
    labels = np.repeat([0, 1], n_per_class)
    return LabeledDataset(data.T, labels, 1, dim)
