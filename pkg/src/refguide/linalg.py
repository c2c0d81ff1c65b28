"""Dense 2-D matrix operations shared by the attention kernels.

Matrices are plain numpy arrays: 2-D, C-contiguous (row-major), float32 or
float64, at least one row and one column, all entries finite. ``as_matrix``
enforces that on the way in; the exported operations preserve it for finite
inputs. Arithmetic is numpy's, which is deterministic run-to-run on a fixed
build -- the property the reproducibility tests pin down.
"""

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible; the message names both shapes."""


def as_matrix(data, dtype=None) -> np.ndarray:
    """Validate ``data`` as a matrix, optionally casting to ``dtype``."""
    a = np.asarray(data, dtype=dtype)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got array of shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"matrix must have at least one row and column, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return np.ascontiguousarray(a)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product ``a @ b``."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def row_softmax(a: np.ndarray) -> np.ndarray:
    """Softmax over each row, stabilized by subtracting the row maximum.

    The shift keeps ``exp`` bounded by 1 regardless of logit magnitude and
    cancels exactly in the normalization, so the result is the textbook
    softmax without its overflow. Every row sums to 1 and every entry lies
    in (0, 1].
    """
    if not np.isfinite(a).all():
        raise ValueError("row_softmax requires finite logits")
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def frobenius_norm(a: np.ndarray) -> float:
    """sqrt of the sum of squared entries, accumulated in float64."""
    return float(np.sqrt(np.sum(np.square(a, dtype=np.float64))))


def stack_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rows of ``a`` followed by rows of ``b``; column counts must match."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"cannot stack rows of {a.shape} on top of {b.shape}: column counts differ")
    return np.concatenate([a, b], axis=0)
