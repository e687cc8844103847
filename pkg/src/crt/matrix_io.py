"""Matrix and dataset file formats, plus PGM image export.

Matrices are plain 2-D ``float64`` numpy arrays whose columns are samples
(vectorized images). Images are vectorized row-major: pixel ``(r, c)`` of an
``h x w`` image lives at index ``r * w + c``.

Binary ``CRTM`` layout (little-endian)::

    b"CRTM" | uint32 rows | uint32 cols | rows*cols float64, column-major
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CRTM"
_HEADER = struct.Struct("<4sII")


class MatrixFormatError(ValueError):
    """Raised when a matrix file cannot be parsed."""


class DatasetError(ValueError):
    """Raised when a dataset or its manifest violates its invariants."""


def _check_finite(m: np.ndarray, path) -> None:
    bad = np.argwhere(~np.isfinite(m))
    if bad.size:
        r, c = bad[0]
        raise MatrixFormatError(f"{path}: non-finite value at index ({r}, {c})")


def _infer_format(path) -> str:
    return "csv" if str(path).lower().endswith((".csv", ".txt")) else "binary"


def save_matrix(m, path, format: str | None = None) -> None:
    """Write a 2-D array as CRTM binary or CSV.

    CSV stores one matrix row per line with 17 significant digits, enough
    for an exact float64 round-trip.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if 0 in m.shape:
        raise ValueError("zero dimension rejected")
    _check_finite(m, path)
    fmt = format or _infer_format(path)
    if fmt == "binary":
        rows, cols = m.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, rows, cols))
            fh.write(m.astype("<f8").tobytes(order="F"))
    elif fmt == "csv":
        with open(path, "w", newline="\n") as fh:
            for row in m:
                fh.write(",".join(f"{v:.17g}" for v in row))
                fh.write("\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, format: str | None = None) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`.

    Raises
    ------
    MatrixFormatError
        On a bad magic number, a dimension mismatch, ragged CSV rows or a
        non-finite entry (the message names the offending index).
    """
    fmt = format or _infer_format(path)
    if fmt == "binary":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise MatrixFormatError(f"{path}: malformed header (file too short)")
        magic, rows, cols = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise MatrixFormatError(f"{path}: malformed header (bad magic {magic!r})")
        if rows == 0 or cols == 0:
            raise MatrixFormatError(f"{path}: zero dimension rejected")
        payload = raw[_HEADER.size:]
        if len(payload) != 8 * rows * cols:
            raise MatrixFormatError(
                f"{path}: dimension mismatch, header declares {rows}x{cols} "
                f"but payload holds {len(payload) / 8:g} values"
            )
        m = np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F")
        m = m.astype(np.float64)
    elif fmt == "csv":
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append([float(tok) for tok in line.split(",")])
                except ValueError as exc:
                    raise MatrixFormatError(f"{path}: line {lineno + 1}: {exc}") from None
        if not rows:
            raise MatrixFormatError(f"{path}: zero dimension rejected")
        width = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != width:
                raise MatrixFormatError(
                    f"{path}: dimension mismatch, row {i} has {len(r)} values, expected {width}"
                )
        m = np.array(rows, dtype=np.float64)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    _check_finite(m, path)
    return m


def load_labels(path) -> np.ndarray:
    """Read integer labels, whitespace or newline separated."""
    text = Path(path).read_text().replace(",", " ").split()
    try:
        return np.array([int(t) for t in text], dtype=np.int64)
    except ValueError as exc:
        raise DatasetError(f"{path}: bad label: {exc}") from None


def save_labels(labels, path) -> None:
    with open(path, "w", newline="\n") as fh:
        for v in np.asarray(labels, dtype=np.int64):
            fh.write(f"{v}\n")


@dataclass(frozen=True)
class LabeledDataset:
    """A ``p x n`` data matrix with one integer label per column.

    Labels must be contiguous class ids starting at 0 and
    ``height * width`` must equal ``p``.
    """

    data: np.ndarray
    labels: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if data.ndim != 2:
            raise DatasetError(f"data must be 2-D, got shape {data.shape}")
        if self.height * self.width != data.shape[0]:
            raise DatasetError(
                f"geometry {self.height}x{self.width} does not match {data.shape[0]} rows"
            )
        if labels.shape != (data.shape[1],):
            raise DatasetError(
                f"label count mismatch: {labels.size} labels for {data.shape[1]} columns"
            )
        classes = np.unique(labels)
        if classes.size and not np.array_equal(classes, np.arange(classes.size)):
            raise DatasetError(f"non-contiguous labels: {classes.tolist()}")
        data.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.data[:, idx], self.labels[idx], self.height, self.width)


@dataclass(frozen=True)
class DatasetManifest:
    data_path: str
    labels_path: str
    height: int
    width: int
    value_min: float = 0.0
    value_max: float = 255.0


_MANIFEST_KEYS = ("data_path", "labels_path", "height", "width", "value_min", "value_max")


def parse_key_values(path) -> dict[str, str]:
    """Parse a ``key=value`` text file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines()):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno + 1}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_key_values(values: dict, path) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in values.items():
            fh.write(f"{key}={value}\n")


def load_manifest(path) -> DatasetManifest:
    """Read a manifest; relative paths resolve against its directory."""
    kv = parse_key_values(path)
    missing = [k for k in ("data_path", "labels_path", "height", "width") if k not in kv]
    if missing:
        raise DatasetError(f"{path}: manifest missing keys {missing}")
    unknown = set(kv) - set(_MANIFEST_KEYS)
    if unknown:
        raise DatasetError(f"{path}: unknown manifest keys {sorted(unknown)}")
    base = Path(path).parent
    return DatasetManifest(
        data_path=str(base / kv["data_path"]),
        labels_path=str(base / kv["labels_path"]),
        height=int(kv["height"]),
        width=int(kv["width"]),
        value_min=float(kv.get("value_min", 0.0)),
        value_max=float(kv.get("value_max", 255.0)),
    )


def write_manifest(manifest: DatasetManifest, path) -> None:
    base = Path(path).parent.resolve()

    def rel(p):
        return os.path.relpath(Path(p).resolve(), base)

    write_key_values(
        {
            "data_path": rel(manifest.data_path),
            "labels_path": rel(manifest.labels_path),
            "height": manifest.height,
            "width": manifest.width,
            "value_min": repr(float(manifest.value_min)),
            "value_max": repr(float(manifest.value_max)),
        },
        path,
    )


def load_dataset(manifest: DatasetManifest | str | os.PathLike) -> LabeledDataset:
    """Load a dataset and rescale pixels linearly from the declared value
    range onto ``[0, 1]``."""
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    for p in (manifest.data_path, manifest.labels_path):
        if not Path(p).exists():
            raise DatasetError(f"manifest references missing file {p}")
    if manifest.value_max <= manifest.value_min:
        raise DatasetError("value_max must exceed value_min")
    raw = load_matrix(manifest.data_path)
    labels = load_labels(manifest.labels_path)
    if manifest.height * manifest.width != raw.shape[0]:
        raise DatasetError(
            f"declared geometry {manifest.height}x{manifest.width} does not match "
            f"{raw.shape[0]} rows in {manifest.data_path}"
        )
    data = (raw - manifest.value_min) / (manifest.value_max - manifest.value_min)
    return LabeledDataset(data, labels, manifest.height, manifest.width)


def save_dataset(dataset: LabeledDataset, directory, stem: str = "data") -> DatasetManifest:
    """Write ``dataset`` (already in ``[0, 1]``) plus a manifest into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        data_path=str(directory / f"{stem}.crtm"),
        labels_path=str(directory / f"{stem}_labels.txt"),
        height=dataset.height,
        width=dataset.width,
        value_min=0.0,
        value_max=1.0,
    )
    save_matrix(dataset.data, manifest.data_path)
    save_labels(dataset.labels, manifest.labels_path)
    write_manifest(manifest, directory / f"{stem}.manifest")
    return manifest


def to_gray_bytes(v) -> np.ndarray:
    """Affinely map ``v`` onto 0..255 (min to 0, max to 255, half-up rounding).

    A constant vector maps to 128 everywhere.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 128, dtype=np.uint8)
    scaled = (v - lo) / (hi - lo) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def export_image_pgm(v, height: int, width: int, path) -> None:
    """Write a vectorized image as a binary (P5) PGM with maxval 255."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != height * width:
        raise ValueError(
            f"length mismatch: vector has {v.size} entries, image is {height}x{width}"
        )
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(to_gray_bytes(v).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary PGM into a ``(height, width)`` uint8 array."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MatrixFormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != b"P5" or maxval > 255:
        raise MatrixFormatError(f"{path}: only 8-bit P5 images are supported")
    pixels = np.frombuffer(raw[pos:pos + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise MatrixFormatError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).copy()


def pgm_header_length(height: int, width: int) -> int:
    return len(f"P5\n{width} {height}\n255\n")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))
