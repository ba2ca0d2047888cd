"""Dense symmetric-positive-definite linear algebra for exact GP inference.

Factorizations are plain dense Cholesky with an escalating jitter schedule,
plus an O(n^2) bordered extension used for incremental GP conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

# Retries multiply the jitter by 10, starting from max(base_jitter, 1e-10).
_JITTER_RETRIES = 9
_MIN_JITTER = 1e-10
_SYMMETRY_ATOL = 1e-10


@dataclass
class SpdFactor:
    """Lower-triangular Cholesky factor of an SPD matrix plus applied jitter.

    Satisfies ``lower @ lower.T == A + jitter_applied * I`` within 1e-8
    relative Frobenius error, where ``A`` is the matrix that was factorized.
    Treated as immutable after construction.
    """

    dim: int
    lower: np.ndarray
    jitter_applied: float


def _jitter_schedule(base_jitter: float):
    yield float(base_jitter)
    start = max(base_jitter, _MIN_JITTER)
    for k in range(_JITTER_RETRIES):
        level = start * 10.0**k
        if level > base_jitter:
            yield level


def cholesky(matrix: np.ndarray, base_jitter: float = 0.0) -> SpdFactor:
    """Factor a symmetric positive-definite matrix as L @ L.T.

    Parameters
    ----------
    matrix : ndarray, shape (n, n)
        Symmetric matrix (checked to 1e-10 absolute).
    base_jitter : float
        First diagonal jitter to try. On failure the jitter escalates
        tenfold per retry from max(base_jitter, 1e-10).

    Returns
    -------
    SpdFactor
        Factor with the smallest jitter level that succeeded.

    Raises
    ------
    DimensionMismatch
        If the matrix is not square.
    NotPositiveDefinite
        If every jitter level fails.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 1:
        raise DimensionMismatch("matrix must be at least 1x1")
    if base_jitter < 0:
        raise ValueError("base_jitter must be >= 0")
    if not np.allclose(a, a.T, rtol=0.0, atol=_SYMMETRY_ATOL):
        raise ValueError("matrix is not symmetric within 1e-10 absolute")

    eye = np.eye(n)
    for jitter in _jitter_schedule(base_jitter):
        try:
            lower = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(lower)):
            return SpdFactor(dim=n, lower=lower, jitter_applied=jitter)
    raise NotPositiveDefinite(
        f"cholesky failed for all jitter levels up to "
        f"{max(base_jitter, _MIN_JITTER) * 10.0 ** (_JITTER_RETRIES - 1):g}"
    )


def solve_spd(factor: SpdFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = rhs by forward then backward substitution.

    ``rhs`` may be a vector of length n or a matrix with n rows; the
    solution has the same shape.
    """
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != factor.dim:
        raise DimensionMismatch(
            f"rhs has leading dimension {b.shape[0]}, factor dim is {factor.dim}"
        )
    half = solve_triangular(factor.lower, b, lower=True)
    return solve_triangular(factor.lower, half, lower=True, trans="T")


def extend_factor(factor: SpdFactor, new_row: np.ndarray, new_diag: float) -> SpdFactor:
    """Extend a factor to cover one appended row/column of the SPD matrix.

    Given the factor of A (n x n), returns the factor of the bordered
    matrix [[A, b], [b^T, d]] in O(n^2), where b = new_row and d = new_diag.
    The new diagonal entry receives the factor's existing jitter; if the
    Schur complement is still non-positive the jitter escalates on that
    entry only (recorded in jitter_applied).
    """
    b = np.asarray(new_row, dtype=float)
    if b.shape != (factor.dim,):
        raise DimensionMismatch(
            f"new_row has shape {b.shape}, expected ({factor.dim},)"
        )
    ell = solve_triangular(factor.lower, b, lower=True)
    schur_base = float(new_diag) - float(ell @ ell)
    for jitter in _jitter_schedule(factor.jitter_applied):
        schur = schur_base + jitter
        if schur > 0.0:
            n = factor.dim
            lower = np.zeros((n + 1, n + 1))
            lower[:n, :n] = factor.lower
            lower[n, :n] = ell
            lower[n, n] = np.sqrt(schur)
            return SpdFactor(
                dim=n + 1,
                lower=lower,
                jitter_applied=max(factor.jitter_applied, jitter),
            )
    raise NotPositiveDefinite(
        "Schur complement non-positive at every jitter level; "
        "extension would not be positive definite"
    )
