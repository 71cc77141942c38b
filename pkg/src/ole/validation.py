"""Input validation helpers used by every module.

All pipeline math runs on float64 matrices with unit-normalized rows;
these helpers coerce and check inputs once at module boundaries.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonFiniteValueError,
    ValidationError,
)

UNIT_NORM_TOL = 1e-6


def as_float_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a C-contiguous float64 2-D array and check finiteness."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {m.shape}")
    m = np.ascontiguousarray(m)
    check_finite(m, name)
    return m


def check_finite(m: np.ndarray, name: str = "matrix") -> None:
    if m.size and not np.all(np.isfinite(m)):
        bad = int(np.flatnonzero(~np.isfinite(m).all(axis=-1))[0]) if m.ndim == 2 else None
        raise NonFiniteValueError(f"{name} contains non-finite values", row=bad)


def check_unit_rows(m: np.ndarray, name: str = "matrix", tol: float = UNIT_NORM_TOL) -> None:
    """Every row must have Euclidean norm within ``tol`` of one."""
    if m.shape[0] == 0:
        return
    norms = np.linalg.norm(m, axis=1)
    off = np.abs(norms - 1.0)
    if np.any(off > tol):
        row = int(np.argmax(off))
        raise ValidationError(
            f"{name} row {row} has norm {norms[row]:.9f}, expected 1 within {tol:g}"
        )


def check_same_dim(d_a: int, d_b: int, what: str = "inputs") -> None:
    if d_a != d_b:
        raise DimensionMismatchError(f"{what} disagree on dimensionality: {d_a} vs {d_b}")


def check_positive(value: float, name: str) -> None:
    if not value > 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
