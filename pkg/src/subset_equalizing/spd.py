"""Dense symmetric positive definite helpers.

Matrices are plain ``numpy.ndarray`` objects of shape ``(n, n)``; vectors are
shape ``(n,)``. Everything is float64 and small (n is at most a few dozen).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg as sla

SPD_TOLERANCE = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be SPD is not (within tolerance)."""


@dataclass(frozen=True)
class SpdCheck:
    """Outcome of :func:`assert_spd`.

    ``ok`` is True iff the matrix is exactly symmetric and its smallest
    eigenvalue exceeds the tolerance. Otherwise ``message`` says why, and
    ``entry`` / ``min_eigenvalue`` point at the offending value.
    """

    ok: bool
    message: str = ""
    entry: Optional[Tuple[int, int]] = None
    min_eigenvalue: Optional[float] = None

    def __bool__(self) -> bool:
        return self.ok


def _as_square(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def spd_from_factor(X) -> np.ndarray:
    """Return ``X.T @ X`` with bit-exact symmetry.

    The product is averaged with its transpose; since floating-point addition
    is commutative, ``(a + b) / 2 == (b + a) / 2`` and the result is exactly
    symmetric.
    """
    X = _as_square(X, "factor")
    A = X.T @ X
    return (A + A.T) / 2.0


def assert_spd(A, tol: float = SPD_TOLERANCE) -> SpdCheck:
    """Check symmetry and positive definiteness, returning a report."""
    try:
        A = _as_square(A)
    except ValueError as exc:
        return SpdCheck(False, str(exc))
    asym = np.argwhere(A != A.T)
    if asym.size:
        i, j = (int(v) for v in asym[0])
        return SpdCheck(False, f"not symmetric at entry ({i}, {j})", entry=(i, j))
    lam = float(np.linalg.eigvalsh(A)[0])
    if not lam > tol:
        return SpdCheck(
            False,
            f"smallest eigenvalue {lam:.6g} is not above tolerance {tol:g}",
            min_eigenvalue=lam,
        )
    return SpdCheck(True, min_eigenvalue=lam)


def require_spd(A, tol: float = SPD_TOLERANCE) -> np.ndarray:
    """Like :func:`assert_spd` but raises on violation; returns ``A`` as an array."""
    report = assert_spd(A, tol)
    if not report.ok:
        raise NotPositiveDefiniteError(report.message)
    return np.asarray(A, dtype=float)


def solve_spd(A, b) -> np.ndarray:
    """Solve ``A x = b`` through a Cholesky factorization.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization breaks down.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from None
    x = sla.cho_solve(factor, b, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise NotPositiveDefiniteError("solve produced non-finite values")
    return x


def solve_spd_many(A, b) -> np.ndarray:
    """Batched :func:`solve_spd` for stacks ``A`` (m, n, n) and ``b`` (m, n)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from None
    y = np.linalg.solve(L, b[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]


def spectral_radius(A) -> float:
    """Largest eigenvalue of an SPD matrix."""
    return float(np.linalg.eigvalsh(np.asarray(A, dtype=float))[-1])


def min_eigenvalue(A) -> float:
    """Smallest eigenvalue of an SPD matrix."""
    return float(np.linalg.eigvalsh(np.asarray(A, dtype=float))[0])


def random_spd(n: int, rng: np.random.Generator, max_attempts: int = 100) -> np.ndarray:
    """Draw ``X.T @ X`` with i.i.d. standard-normal ``X``.

    A singular draw has probability zero; one that fails the SPD check is
    simply redrawn.
    """
    for _ in range(max_attempts):
        A = spd_from_factor(rng.standard_normal((n, n)))
        if assert_spd(A).ok:
            return A
    raise NotPositiveDefiniteError(f"no SPD draw in {max_attempts} attempts")
