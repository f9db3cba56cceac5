"""Synthetic data generation and file formats.

Blobs are isotropic Gaussians around centers drawn uniformly in a box.
CSV files round-trip float64 exactly through 17 significant digits.
The IDX reader handles the common big-endian image and label layout,
scaling pixel bytes into [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .clustering import Dataset
from .errors import BadMagic, DimensionMismatch, TruncatedFile

__all__ = [
    "BlobsSpec",
    "make_blobs",
    "save_csv",
    "load_csv",
    "load_idx",
    "train_test_split",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class BlobsSpec:
    n_samples: int
    n_features: int
    n_centers: int
    center_std: float = 1.0
    box_half_width: float = 10.0
    seed: int = 0


def make_blobs(spec: BlobsSpec, return_centers: bool = False):
    """Sample points around uniformly placed centers, deterministically.

    Each point picks a center uniformly at random, so center counts are
    multinomial, then adds isotropic Gaussian noise of the given std.
    Labels are the center indices.
    """
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform(
        -spec.box_half_width, spec.box_half_width, (spec.n_centers, spec.n_features)
    )
    labels = rng.integers(0, spec.n_centers, spec.n_samples)
    points = centers[labels] + rng.normal(
        0.0, spec.center_std, (spec.n_samples, spec.n_features)
    )
    data = Dataset(points, labels.astype(np.int64))
    if return_centers:
        return data, centers
    return data


def save_csv(path, data, with_labels: bool = False) -> None:
    """Write rows as comma-separated values at full float64 precision."""
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    labels = data.labels if isinstance(data, Dataset) else None
    if with_labels and labels is None:
        raise ValueError("no labels to write")
    with open(path, "w") as fh:
        for i in range(len(X)):
            row = ",".join(f"{v:.17g}" for v in X[i])
            if with_labels:
                row = f"{row},{int(labels[i])}"
            fh.write(row + "\n")


def load_csv(path, labels: bool = False) -> Dataset:
    """Read a CSV written by :func:`save_csv`.

    With ``labels=True`` the last column is split off as integer labels.
    """
    raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if labels:
        if raw.shape[1] < 2:
            raise DimensionMismatch("labeled file needs at least two columns")
        return Dataset(raw[:, :-1], raw[:, -1].astype(np.int64))
    return Dataset(raw)


def _read_exact(fh, n, path):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFile(f"{path}: expected {n} more bytes, got {len(buf)}")
    return buf


def load_idx(images_path, labels_path=None) -> Dataset:
    """Read big-endian IDX image data, optionally with an IDX label file.

    Pixels are scaled from bytes into [0, 1]; each image becomes one
    flat row.
    """
    with open(images_path, "rb") as fh:
        magic, count, n_rows, n_cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagic(f"{images_path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
        payload = _read_exact(fh, count * n_rows * n_cols, images_path)
    X = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    X = X.reshape(count, n_rows * n_cols)
    labels = None
    if labels_path is not None:
        with open(labels_path, "rb") as fh:
            magic, n_items = struct.unpack(">II", _read_exact(fh, 8, labels_path))
            if magic != IDX_LABELS_MAGIC:
                raise BadMagic(f"{labels_path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
            if n_items != count:
                raise DimensionMismatch(f"{n_items} labels for {count} images")
            labels = np.frombuffer(_read_exact(fh, n_items, labels_path), dtype=np.uint8)
        labels = labels.astype(np.int64)
    return Dataset(X, labels)


def train_test_split(data: Dataset, test_fraction: float, seed: int = 0):
    """Deterministic shuffled split; returns (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    n = data.n_samples
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx = order[:n_test]
    train_idx = order[n_test:]
    lab = data.labels
    return (
        Dataset(data.X[train_idx], None if lab is None else lab[train_idx]),
        Dataset(data.X[test_idx], None if lab is None else lab[test_idx]),
    )
