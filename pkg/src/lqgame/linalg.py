"""Small dense linear-algebra helpers shared by the filter and solver."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import DegenerateSignalError

#: Minimum-eigenvalue threshold used for positive-definiteness checks.
EPS_PD = 1e-10


def sym(M: np.ndarray) -> np.ndarray:
    """Return the symmetric part ``(M + M.T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def min_eig(M: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``M`` (``inf`` if empty)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return math.inf
    return float(np.linalg.eigvalsh(sym(M))[0])


def rcond(M: np.ndarray) -> float:
    """Reciprocal 2-norm condition number of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def solve_right(X: np.ndarray, S: np.ndarray, *, threshold: float, what: str) -> np.ndarray:
    """Compute ``X @ inv(S)`` for symmetric ``S`` with a linear solve.

    Parameters
    ----------
    X : ndarray, shape (a, b)
    S : ndarray, shape (b, b)
        Symmetrized before solving.
    threshold : float
        Raise when the reciprocal condition number of ``S`` falls below it.
    what : str
        Label used in the error message.
    """
    S = sym(S)
    rc = rcond(S)
    if rc < threshold:
        raise DegenerateSignalError(f"{what}: matrix is numerically singular (rcond={rc:.3e})")
    return np.linalg.solve(S, np.asarray(X, dtype=float).T).T


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric positive-semidefinite square root via an eigendecomposition.

    Negative eigenvalues produced by round-off are clipped to zero.
    """
    M = sym(M)
    if M.size == 0:
        return M.copy()
    w, V = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    return sym((V * np.sqrt(w)) @ V.T)


def exact_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum, independent of the order of the inputs."""
    return math.fsum(float(v) for v in values)
