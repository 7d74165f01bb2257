"""Training-free architecture score.

For each spiking stage, the pairwise Hamming distances between the
samples' firing codes form a kernel matrix whose (i, j) entry is
``neurons - alpha * hamming(f_i, f_j)``.  The architecture score is the
log of the absolute determinant of the sum of these kernels; a batch
whose codes are indistinguishable yields a singular sum and the score
collapses to the -inf sentinel, which loses against any finite score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arch import NetworkArch
from .errors import DegenerateBatch
from .snn import BinaryCodes, LIFParams, forward_collect_codes, init_weights

NEG_INF = float("-inf")

# A pivot below this fraction of the max row norm marks the matrix singular.
PIVOT_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Pairwise code-similarity kernel of one spiking stage."""

    entries: np.ndarray
    num_neurons: int
    alpha: float


@dataclass(frozen=True)
class ScoreResult:
    """Score value with its singularity flag and optional diagnostics."""

    value: float
    singular: bool
    kernels: tuple[tuple[str, KernelMatrix], ...] | None = None

    def __post_init__(self) -> None:
        if self.singular != (self.value == NEG_INF):
            raise ValueError("singular flag must accompany the -inf sentinel")


def hamming_kernel(codes: np.ndarray, alpha: float = 1.0) -> KernelMatrix:
    """Kernel matrix of one bit matrix (samples x neurons).

    Distances are computed on bit-packed rows with a popcount; the
    diagonal is exactly the neuron count.
    """
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise ValueError(f"expected a 2-D bit matrix, got shape {codes.shape}")
    num_samples, num_neurons = codes.shape
    if num_samples < 2:
        raise DegenerateBatch(f"need >= 2 samples for pairwise distances, got {num_samples}")
    if num_neurons < 1:
        raise ValueError("bit matrix must have at least one neuron column")
    packed = np.packbits(codes.astype(np.uint8, copy=False), axis=1)
    xored = packed[:, None, :] ^ packed[None, :, :]
    distances = np.bitwise_count(xored).sum(axis=2, dtype=np.int64)
    entries = num_neurons - alpha * distances.astype(np.float64)
    return KernelMatrix(entries=entries, num_neurons=num_neurons, alpha=alpha)


def log_abs_det(matrix: np.ndarray) -> tuple[float, bool]:
    """log|det| by partially pivoted triangular elimination.

    Returns (value, singular); singular is True when any pivot magnitude
    drops to PIVOT_RTOL times the max row norm of the input.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    row_norm = np.abs(a).sum(axis=1).max() if n else 0.0
    tol = PIVOT_RTOL * row_norm
    total = 0.0
    for k in range(n):
        pivot_row = k + int(np.argmax(np.abs(a[k:, k])))
        pivot = abs(a[pivot_row, k])
        if pivot <= tol:
            return NEG_INF, True
        if pivot_row != k:
            a[[k, pivot_row]] = a[[pivot_row, k]]
        total += math.log(pivot)
        a[k + 1:, k] /= a[k, k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return total, False


def network_score(all_codes: BinaryCodes, alpha: float = 1.0,
                  keep_kernels: bool = False) -> ScoreResult:
    """Score from per-stage codes: log|det| of the summed kernels."""
    total = None
    kept: list[tuple[str, KernelMatrix]] = []
    for name, codes in zip(all_codes.layer_names, all_codes.matrices):
        kernel = hamming_kernel(codes, alpha)
        total = kernel.entries if total is None else total + kernel.entries
        if keep_kernels:
            kept.append((name, kernel))
    value, singular = log_abs_det(total)
    return ScoreResult(value=value, singular=singular,
                       kernels=tuple(kept) if keep_kernels else None)


def score_candidate(net: NetworkArch, batch: np.ndarray, lif: LIFParams,
                    seed: int, alpha: float = 1.0, *, code_mode: str = "any",
                    input_coding: str = "direct",
                    keep_kernels: bool = False) -> ScoreResult:
    """Initialize, simulate, and score one candidate network."""
    weights = init_weights(net, seed)
    codes = forward_collect_codes(net, weights, batch, lif, code_mode=code_mode,
                                  input_coding=input_coding, coding_seed=seed)
    return network_score(codes, alpha, keep_kernels=keep_kernels)


def write_kernel_dump(path, result: ScoreResult) -> None:
    """Write retained kernels and their sum as space-separated matrices."""
    if result.kernels is None:
        raise ValueError("score was computed without keep_kernels")
    total = None
    with open(path, "w", encoding="utf-8") as fh:
        for name, kernel in result.kernels:
            fh.write(f"# layer {name} neurons={kernel.num_neurons} alpha={kernel.alpha}\n")
            _write_matrix(fh, kernel.entries)
            total = kernel.entries if total is None else total + kernel.entries
        fh.write("# sum\n")
        _write_matrix(fh, total)


def _write_matrix(fh, matrix: np.ndarray) -> None:
    for row in matrix:
        fh.write(" ".join(repr(float(v)) for v in row))
        fh.write("\n")
