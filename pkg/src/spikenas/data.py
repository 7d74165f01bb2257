"""Dataset ingestion and batch selection.

Binary files follow the classic layouts: 3073-byte records (label byte
+ 3072 channel-major pixel bytes) for the 10-class set and 3074-byte
records (coarse + fine label bytes + pixels) for the 100-class set.
Handles keep raw uint8 pixels and scale to [0, 1] on access.  A seeded
synthetic generator with class-dependent mean shifts backs fast tests.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetUnavailable,
    InsufficientData,
    LabelOutOfRange,
    MalformedRecord,
)

DATA_DIR_ENV = "SPIKENAS_DATA_DIR"

IMAGE_SHAPE = (3, 32, 32)
_PIXELS = 3 * 32 * 32
RECORD_BYTES_10 = 1 + _PIXELS
RECORD_BYTES_100 = 2 + _PIXELS


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable record store; pixels stay uint8 until sampled."""

    pixels: np.ndarray  # (n, 3, 32, 32) uint8
    labels: np.ndarray  # (n,) int64
    num_classes: int
    coarse_labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def scaled(self, indices: np.ndarray | None = None) -> np.ndarray:
        """Float pixels in [0, 1] for the given records (all by default)."""
        raw = self.pixels if indices is None else self.pixels[indices]
        return raw.astype(np.float32) / 255.0


@dataclass(frozen=True, eq=False)
class ImageBatch:
    pixels: np.ndarray  # (s, 3, 32, 32) float32 in [0, 1]
    labels: np.ndarray  # (s,) int64


def load_cifar10(path: str | os.PathLike) -> Dataset:
    """Parse one 10-class binary file into a dataset handle."""
    raw = _read_records(path, RECORD_BYTES_10)
    labels = raw[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise LabelOutOfRange(f"label {labels.max()} exceeds 9 in {path}")
    pixels = raw[:, 1:].reshape(-1, *IMAGE_SHAPE)
    return Dataset(pixels=pixels, labels=labels, num_classes=10)


def load_cifar100(path: str | os.PathLike) -> Dataset:
    """Parse one 100-class binary file; the fine label is the class."""
    raw = _read_records(path, RECORD_BYTES_100)
    coarse = raw[:, 0].astype(np.int64)
    fine = raw[:, 1].astype(np.int64)
    if fine.size and fine.max() > 99:
        raise LabelOutOfRange(f"fine label {fine.max()} exceeds 99 in {path}")
    pixels = raw[:, 2:].reshape(-1, *IMAGE_SHAPE)
    return Dataset(pixels=pixels, labels=fine, num_classes=100, coarse_labels=coarse)


def _read_records(path: str | os.PathLike, record_bytes: int) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetUnavailable(f"no such dataset file: {path}")
    data = path.read_bytes()
    if len(data) % record_bytes:
        raise MalformedRecord(
            f"{path} is {len(data)} bytes, not a multiple of {record_bytes}"
        )
    return np.frombuffer(data, dtype=np.uint8).reshape(-1, record_bytes)


def write_cifar10(path: str | os.PathLike, dataset: Dataset) -> None:
    """Serialize a dataset into the 10-class binary record layout."""
    n = len(dataset)
    out = np.empty((n, RECORD_BYTES_10), dtype=np.uint8)
    out[:, 0] = dataset.labels.astype(np.uint8)
    out[:, 1:] = dataset.pixels.reshape(n, _PIXELS)
    Path(path).write_bytes(out.tobytes())


def write_cifar100(path: str | os.PathLike, dataset: Dataset) -> None:
    """Serialize a dataset into the 100-class binary record layout."""
    n = len(dataset)
    coarse = dataset.coarse_labels
    if coarse is None:
        coarse = np.zeros(n, dtype=np.int64)
    out = np.empty((n, RECORD_BYTES_100), dtype=np.uint8)
    out[:, 0] = coarse.astype(np.uint8)
    out[:, 1] = dataset.labels.astype(np.uint8)
    out[:, 2:] = dataset.pixels.reshape(n, _PIXELS)
    Path(path).write_bytes(out.tobytes())


def sample_batch(dataset: Dataset, num_samples: int, seed: int) -> ImageBatch:
    """Seeded draw of `num_samples` distinct records, order included."""
    if num_samples < 1:
        raise ValueError(f"batch size must be positive, got {num_samples}")
    if num_samples > len(dataset):
        raise InsufficientData(
            f"requested {num_samples} samples from {len(dataset)} records"
        )
    indices = np.random.default_rng(seed).permutation(len(dataset))[:num_samples]
    return ImageBatch(pixels=dataset.scaled(indices), labels=dataset.labels[indices])


def synth_dataset(num_records: int, classes: int, seed: int,
                  class_shift: float = 0.03, noise: float = 0.25,
                  base_level: float = 0.25) -> Dataset:
    """Seeded pseudo-random dataset with class-dependent mean pixel levels.

    Class k images are uniform noise around `base_level + k * class_shift`,
    quantized to uint8 so files written from the handle round-trip exactly.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, size=num_records, dtype=np.int64)
    means = base_level + labels.astype(np.float64) * class_shift
    values = means[:, None, None, None] + rng.uniform(
        -noise, noise, size=(num_records, *IMAGE_SHAPE)
    )
    pixels = np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)
    return Dataset(pixels=pixels, labels=labels, num_classes=classes)


# Conventional file names inside a data directory.
_CIFAR10_SUBDIR = "cifar-10-batches-bin"
_CIFAR100_SUBDIR = "cifar-100-binary"


def load_dataset(name: str, data_dir: str | os.PathLike | None = None,
                 seed: int = 0) -> Dataset:
    """Load a dataset by name: cifar10, cifar100, or synth.

    Real datasets are searched in `data_dir` (falling back to the
    SPIKENAS_DATA_DIR environment variable), accepting either the files
    directly or the conventional extraction subdirectory.
    """
    name = name.lower()
    if name == "synth":
        return synth_dataset(512, 10, seed)
    if name not in ("cifar10", "cifar100"):
        raise DatasetUnavailable(f"unknown dataset {name!r}")
    root = Path(data_dir) if data_dir is not None else _env_data_dir()
    if root is None:
        raise DatasetUnavailable(
            f"no data directory given for {name}; pass --data-dir or set {DATA_DIR_ENV}"
        )
    if name == "cifar10":
        files = _find_files(root, _CIFAR10_SUBDIR,
                            [f"data_batch_{i}.bin" for i in range(1, 6)],
                            fallback=["test_batch.bin"])
        parts = [load_cifar10(f) for f in files]
    else:
        files = _find_files(root, _CIFAR100_SUBDIR, ["train.bin"],
                            fallback=["test.bin"])
        parts = [load_cifar100(f) for f in files]
    if len(parts) == 1:
        return parts[0]
    coarse = None
    if all(p.coarse_labels is not None for p in parts):
        coarse = np.concatenate([p.coarse_labels for p in parts])
    return Dataset(
        pixels=np.concatenate([p.pixels for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        num_classes=parts[0].num_classes,
        coarse_labels=coarse,
    )


def _env_data_dir() -> Path | None:
    value = os.environ.get(DATA_DIR_ENV)
    return Path(value) if value else None


def _find_files(root: Path, subdir: str, names: list[str],
                fallback: list[str] = ()) -> list[Path]:
    """Training files win; test files are used only when no train file exists."""
    for candidates in (names, fallback):
        for base in (root, root / subdir):
            found = [base / n for n in candidates if (base / n).is_file()]
            if found:
                return found
    raise DatasetUnavailable(f"no dataset files among {list(names)} under {root}")
