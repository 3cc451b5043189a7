"""Capacity-constraint transform, log-det variational bound, and the closed
forms of the auxiliary matrices used by the alternating inner loop."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .._linalg import LN2, herm, inv_pd, logdet_pd
from ..rates import UnifiedProblem


@dataclass(frozen=True)
class TransformedConstraints:
    """Fronthaul capacity constraints with the per-RU RF times eliminated.

    For every nonempty subset S of the RUs with positive RF capacity,
    ``sum_m r_m G_m(S) <= (1 - alpha0) G(S) + offset(S)``. RUs with zero RF
    capacity are kept apart in ``fso_only`` with ``r_m <= C_fso_m``.
    """

    subsets: tuple
    G_m: tuple            # per subset, array aligned with the subset's RUs
    G: np.ndarray
    offset: np.ndarray    # sum_m G_m(S) C_fso_m
    fso_only: tuple
    C_fso: np.ndarray
    C_rf: np.ndarray

    def rows(self, alpha0: float) -> tuple[np.ndarray, np.ndarray]:
        """Rows (A, b) of ``A r <= b``, each subset row divided by G(S)."""
        M = self.C_fso.size
        A = np.zeros((len(self.subsets) + len(self.fso_only), M))
        b = np.zeros(A.shape[0])
        for i, S in enumerate(self.subsets):
            A[i, list(S)] = self.G_m[i] / self.G[i]
            b[i] = (1.0 - alpha0) + self.offset[i] / self.G[i]
        for j, m in enumerate(self.fso_only, start=len(self.subsets)):
            A[j, m] = 1.0
            b[j] = self.C_fso[m]
        return A, b

    def satisfied(self, r, alpha0: float, rtol: float = 0.0) -> bool:
        A, b = self.rows(alpha0)
        lhs = A @ np.asarray(r, dtype=float)
        return bool(np.all(lhs <= b + rtol * np.maximum(np.abs(b), 1.0)))


def lemma1_transform(C_fso, C_rf) -> TransformedConstraints:
    C_fso = np.asarray(C_fso, dtype=float)
    C_rf = np.asarray(C_rf, dtype=float)
    pos = [m for m in range(C_rf.size) if C_rf[m] > 0]
    subsets, G_m, G, offset = [], [], [], []
    for size in range(1, len(pos) + 1):
        for S in itertools.combinations(pos, size):
            prod = float(np.prod(C_rf[list(S)]))
            gm = np.array([prod / C_rf[m] for m in S])
            subsets.append(S)
            G_m.append(gm)
            G.append(prod)
            offset.append(float(gm @ C_fso[list(S)]))
    fso_only = tuple(m for m in range(C_rf.size) if C_rf[m] <= 0)
    return TransformedConstraints(
        subsets=tuple(subsets), G_m=tuple(G_m), G=np.array(G), offset=np.array(offset),
        fso_only=fso_only, C_fso=C_fso, C_rf=C_rf,
    )


def lemma2_value(X: np.ndarray, Y: np.ndarray) -> float:
    """log2|Y| - Tr(YX)/ln2 + J/ln2, maximized by Y = X^-1."""
    J = X.shape[0]
    sign, ld = np.linalg.slogdet(Y)
    if sign.real <= 0:
        return -np.inf
    return float((ld - np.trace(Y @ X).real + J) / LN2)


def closed_form_B(D: np.ndarray, up: UnifiedProblem) -> np.ndarray:
    """Optimal B_k = (W_k + D)^-1 for every user."""
    return np.stack([inv_pd(herm(up.W[k] + D)) for k in range(up.K)])


def closed_form_A(D: np.ndarray, up: UnifiedProblem) -> list[np.ndarray]:
    """Optimal A(S) = (C(S) + D_S + sigma2 I)^-1 for every rate subset."""
    out = []
    for S, C in zip(up.subsets, up.C):
        idx = up.antennas(S)
        X = C + D[np.ix_(idx, idx)] + up.sigma2 * np.eye(idx.size)
        out.append(inv_pd(herm(X)))
    return out


def surrogate_objective(alpha0: float, D: np.ndarray, B, up: UnifiedProblem) -> float:
    """Weighted sum rate with each interference log-det replaced by its
    variational lower bound at B_k (bits/s)."""
    J = up.MN
    total = 0.0
    for k in range(up.K):
        if up.mu[k] == 0:
            continue
        sign, ldB = np.linalg.slogdet(B[k])
        val = logdet_pd(herm(up.V[k] + D)) + ldB - np.trace(B[k] @ (up.W[k] + D)).real + J
        total += up.mu[k] * val / LN2
    return float(alpha0 * up.W_rf * total)


def rate_upper_bound(S, D: np.ndarray, A: np.ndarray, up: UnifiedProblem) -> float:
    """Upper bound (bits per sample) on the quantizer information term of S
    for a fixed auxiliary matrix A; tight at A = closed_form_A."""
    i = up.subset_index(S)
    idx = up.antennas(up.subsets[i])
    DS = herm(D[np.ix_(idx, idx)])
    X = up.C[i] + DS + up.sigma2 * np.eye(idx.size)
    sign, ldA = np.linalg.slogdet(A)
    return float((-ldA + np.trace(A @ X).real - idx.size - logdet_pd(DS)) / LN2)
