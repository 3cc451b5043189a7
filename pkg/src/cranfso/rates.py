"""Unified problem data, detector rates, quantizer rate requirements and
feasibility of an operating point.

Users inside a :class:`UnifiedProblem` are stored in SIC decoding order
(ascending weight, ties by original index); ``up.order`` maps back.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from ._linalg import LN2, floor_eigs, herm, inv_pd, logdet_pd
from .channel import CapacityVector
from .sysmodel import SystemConfig, noise_powers

FEAS_RTOL = 1e-6
DIST_FLOOR = 1e-12


class Quantizer(str, enum.Enum):
    AVQ = "avq"
    RVQ = "rvq"
    DSC = "dsc"


class Detector(str, enum.Enum):
    MMSE = "mmse"
    SIC = "sic"


@dataclass(frozen=True)
class SchemePair:
    quantizer: Quantizer
    detector: Detector

    @classmethod
    def parse(cls, quantizer: str, detector: str) -> "SchemePair":
        return cls(Quantizer(quantizer.lower()), Detector(detector.lower()))

    def __str__(self) -> str:
        return f"{self.quantizer.value}/{self.detector.value}"


ALL_PAIRS = tuple(SchemePair(q, d) for q in Quantizer for d in Detector)


def check_weights(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must be nonnegative and sum to one, got {mu}")
    return mu


def selection_matrix(A, size: int) -> np.ndarray:
    """0/1 matrix of shape |A| x size picking the (0-based) indices in A."""
    A = np.asarray(A, dtype=int).ravel()
    if A.size and (A.min() < 0 or A.max() >= size):
        raise IndexError(f"indices {A.tolist()} out of range for size {size}")
    E = np.zeros((A.size, size))
    E[np.arange(A.size), A] = 1.0
    return E


def antenna_indices(S, N: int) -> np.ndarray:
    """Antenna index set of the RUs in S (0-based, sorted)."""
    return np.concatenate([np.arange(m * N, (m + 1) * N) for m in sorted(S)])


def rate_subsets(quantizer: Quantizer, M: int) -> list[tuple[int, ...]]:
    if quantizer is Quantizer.DSC:
        return [S for size in range(1, M + 1) for S in itertools.combinations(range(M), size)]
    return [(m,) for m in range(M)]


def pattern_blocks(quantizer: Quantizer, M: int, N: int) -> list[tuple[int, ...]]:
    """Antenna groups whose cross terms may be nonzero in D."""
    if quantizer is Quantizer.AVQ:
        return [(i,) for i in range(M * N)]
    if quantizer is Quantizer.RVQ:
        return [tuple(range(m * N, (m + 1) * N)) for m in range(M)]
    return [tuple(range(M * N))]


def pattern_mask(quantizer: Quantizer, M: int, N: int) -> np.ndarray:
    mask = np.zeros((M * N, M * N), dtype=bool)
    for blk in pattern_blocks(quantizer, M, N):
        mask[np.ix_(blk, blk)] = True
    return mask


def check_distortion(D: np.ndarray, quantizer: Quantizer, M: int, N: int) -> list[str]:
    """Violations of the distortion-matrix invariants (empty when valid)."""
    bad = []
    if D.shape != (M * N, M * N):
        return [f"shape {D.shape} != {(M * N, M * N)}"]
    scale = max(float(np.abs(np.trace(D))), 1e-300)
    if np.max(np.abs(D - D.conj().T)) > 1e-12 * scale:
        bad.append("Hermitian")
    if np.linalg.eigvalsh(herm(D)).min() < -1e-10 * scale:
        bad.append("PSD")
    if np.any(D[~pattern_mask(quantizer, M, N)] != 0):
        bad.append("pattern")
    return bad


@dataclass(frozen=True, eq=False)
class UnifiedProblem:
    pair: SchemePair
    M: int
    N: int
    K: int
    sigma2: float
    H: np.ndarray          # MN x K, columns in decoding order
    powers: np.ndarray     # per user, decoding order
    mu: np.ndarray         # weights, decoding order
    order: np.ndarray      # original user index of each sorted position
    V: np.ndarray          # (K, MN, MN)
    W: np.ndarray          # (K, MN, MN)
    subsets: tuple         # rate-constraint subsets of RUs (0-based)
    antenna_sets: tuple    # zero-pattern antenna sets
    C: tuple               # C(S) per subset
    C_fso: np.ndarray
    C_rf: np.ndarray
    W_rf: float
    f_s: float

    @property
    def MN(self) -> int:
        return self.M * self.N

    def subset_index(self, S) -> int:
        S = tuple(sorted(S))
        try:
            return self.subsets.index(S)
        except ValueError:
            raise ValueError(f"subset {S} not a rate constraint of {self.pair}") from None

    def antennas(self, S) -> np.ndarray:
        return antenna_indices(S, self.N)


def build_unified(cfg: SystemConfig, H: np.ndarray, caps: CapacityVector,
                  pair: SchemePair, mu, powers=None) -> UnifiedProblem:
    """Assemble the constant data of the unified weighted sum-rate problem."""
    mu = check_weights(mu)
    K = H.shape[1]
    if mu.size != K:
        raise ValueError("one weight per user required")
    powers = np.full(K, cfg.P_k_w) if powers is None else np.asarray(powers, dtype=float)
    sigma2, _ = noise_powers(cfg)
    order = np.argsort(mu, kind="stable")
    Hs, Ps, mus = H[:, order], powers[order], mu[order]
    MN = H.shape[0]
    eye = np.eye(MN)
    outer = np.einsum("ik,jk,k->kij", Hs, Hs.conj(), Ps)  # P_k h_k h_k^H
    total = outer.sum(axis=0)
    V = np.empty((K, MN, MN), dtype=complex)
    Wk = np.empty_like(V)
    for k in range(K):
        if pair.detector is Detector.MMSE:
            V[k] = total + sigma2 * eye
            Wk[k] = total - outer[k] + sigma2 * eye
        else:
            V[k] = outer[k:].sum(axis=0) + sigma2 * eye
            Wk[k] = outer[k + 1:].sum(axis=0) + sigma2 * eye
    V, Wk = herm(V), herm(Wk)
    subsets = rate_subsets(pair.quantizer, cfg.M)
    C = []
    for S in subsets:
        HS = Hs[antenna_indices(S, cfg.N)]
        cov = herm((HS * Ps) @ HS.conj().T)
        C.append(np.diag(np.diag(cov)) if pair.quantizer is Quantizer.AVQ else cov)
    return UnifiedProblem(
        pair=pair, M=cfg.M, N=cfg.N, K=K, sigma2=sigma2, H=Hs, powers=Ps, mu=mus,
        order=order, V=V, W=Wk, subsets=tuple(subsets),
        antenna_sets=tuple(pattern_blocks(pair.quantizer, cfg.M, cfg.N)), C=tuple(C),
        C_fso=np.asarray(caps.C_fso, dtype=float), C_rf=np.asarray(caps.C_rf, dtype=float),
        W_rf=cfg.W_rf_hz, f_s=cfg.f_s_hz,
    )


def user_rate(alpha0: float, D: np.ndarray, k: int, up: UnifiedProblem) -> float:
    """Rate in bits/s of the k-th user in decoding order."""
    if alpha0 == 0:
        return 0.0
    ratio = logdet_pd(up.V[k] + D) - logdet_pd(up.W[k] + D)
    return max(alpha0 * up.W_rf * ratio / LN2, 0.0)


def user_rates(alpha0: float, D: np.ndarray, up: UnifiedProblem) -> np.ndarray:
    return np.array([user_rate(alpha0, D, k, up) for k in range(up.K)])


def weighted_sum_rate(alpha0: float, D: np.ndarray, up: UnifiedProblem) -> float:
    return float(up.mu @ user_rates(alpha0, D, up))


def mmse_filter(D: np.ndarray, H: np.ndarray, powers, sigma2: float, k: int,
                variant: str = "direct", block: int | None = None):
    """Linear receive filter for column k of H and its output SINR.

    ``direct`` inverts the interference-plus-noise covariance; ``woodbury``
    builds the MMSE filter from the inverse of D + sigma2*I, which is
    block diagonal with blocks of size ``block`` for AVQ/RVQ.
    """
    powers = np.asarray(powers, dtype=float)
    MN = H.shape[0]
    h = H[:, k]
    if variant == "direct":
        others = np.delete(np.arange(H.shape[1]), k)
        Ho = H[:, others]
        Q = (Ho * powers[others]) @ Ho.conj().T + D + sigma2 * np.eye(MN)
        m = np.linalg.solve(Q, h)
    elif variant == "woodbury":
        Dbar = D + sigma2 * np.eye(MN)
        Dinv = _blockwise_inv(Dbar, block or MN)
        DH = Dinv @ H
        core = np.diag(1.0 / powers) + H.conj().T @ DH
        m = powers[k] * (Dinv @ h - DH @ np.linalg.solve(core, DH.conj().T @ h))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return m, _sinr(m, H, powers, D, sigma2, k)


def _blockwise_inv(A: np.ndarray, block: int) -> np.ndarray:
    if A.shape[0] % block:
        raise ValueError("block size must divide the matrix size")
    out = np.zeros_like(A)
    for i in range(0, A.shape[0], block):
        sl = slice(i, i + block)
        out[sl, sl] = inv_pd(A[sl, sl])
    return out


def _sinr(m, H, powers, D, sigma2, k) -> float:
    gains = np.abs(m.conj() @ H) ** 2 * powers
    noise = np.real(m.conj() @ (D @ m)) + sigma2 * np.real(m.conj() @ m)
    return float(gains[k] / (gains.sum() - gains[k] + noise))


def distortion_block(D: np.ndarray, S, up: UnifiedProblem) -> np.ndarray:
    idx = up.antennas(S)
    return D[np.ix_(idx, idx)]


def quantizer_requirement(S, D: np.ndarray, alpha0: float, up: UnifiedProblem) -> float:
    """Minimum total quantizer output rate (bits/s) of the RUs in S."""
    i = up.subset_index(S)
    DS = herm(distortion_block(D, up.subsets[i], up))
    scale = max(float(np.trace(DS).real), 1e-300)
    if np.linalg.eigvalsh(DS).min() < -1e-10 * scale:
        raise ValueError(f"distortion block for S={S} is not positive semidefinite")
    DS = floor_eigs(DS, DIST_FLOOR * up.sigma2)
    X = up.C[i] + DS + up.sigma2 * np.eye(DS.shape[0])
    return alpha0 * up.f_s * (logdet_pd(X) - logdet_pd(DS)) / LN2


def feasibility(alpha, D: np.ndarray, r, up: UnifiedProblem) -> list[str]:
    """Names of violated rate/capacity constraints; empty means feasible.

    ``alpha`` is (alpha_0, ..., alpha_M); unallocated (idle) time is allowed,
    so the fractions need only sum to at most one.
    """
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    bad = []
    if np.any(alpha < -1e-12) or alpha.sum() > 1 + 1e-9:
        bad.append("alpha in simplex")
    for S in up.subsets:
        req = quantizer_requirement(S, D, alpha[0], up)
        if r[list(S)].sum() < req - FEAS_RTOL * max(abs(req), 1.0):
            bad.append("C1 S={" + ",".join(str(m + 1) for m in S) + "}")
    cap = up.C_fso + alpha[1:] * up.C_rf
    for m in range(up.M):
        if r[m] > cap[m] + FEAS_RTOL * max(cap[m], 1.0):
            bad.append(f"C2 m={m + 1}")
    return bad
