"""Small Hermitian-matrix helpers shared by rates and optimizer."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

LN2 = float(np.log(2.0))


def herm(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().swapaxes(-1, -2))


def logdet_pd(A: np.ndarray) -> float:
    """Natural log-determinant of a Hermitian positive definite matrix.

    Raises numpy.linalg.LinAlgError when A is not positive definite.
    """
    c = np.linalg.cholesky(A)
    return 2.0 * float(np.sum(np.log(np.diagonal(c).real)))


def inv_pd(A: np.ndarray) -> np.ndarray:
    c, low = sla.cho_factor(A, lower=True, check_finite=False)
    return herm(sla.cho_solve((c, low), np.eye(A.shape[0], dtype=A.dtype), check_finite=False))


def logdet_inv_pd(A: np.ndarray) -> tuple[float, np.ndarray]:
    """Log-determinant and inverse from a single Cholesky factorization."""
    c = np.linalg.cholesky(A)
    ld = 2.0 * float(np.sum(np.log(np.diagonal(c).real)))
    ci = sla.solve_triangular(c, np.eye(A.shape[0], dtype=c.dtype), lower=True,
                              check_finite=False)
    return ld, ci.conj().T @ ci


def floor_eigs(A: np.ndarray, floor: float) -> np.ndarray:
    """Return A with eigenvalues raised to at least ``floor``."""
    w, U = np.linalg.eigh(herm(A))
    if w.min() >= floor:
        return A
    return herm((U * np.maximum(w, floor)) @ U.conj().T)
