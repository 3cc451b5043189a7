"""Log-barrier Newton solver for the distortion/rate subproblem of one
alternating step (B_k and, for M-ACO, A(S) held fixed).

D is parameterized by the real coordinates of the entries its sparsity
pattern allows (diagonal values, real and imaginary parts of the upper
triangle), so the zero pattern holds by construction. Positive
definiteness of every constrained block follows from the -log|D_S| term
inside the rate constraint: the barrier is infinite outside the domain and
the line search never leaves it.

All internal quantities are normalized: matrices by the noise power and
rates by the RF bandwidth, so the objective is in bits/s/Hz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .._linalg import LN2, herm
from ..rates import Detector, UnifiedProblem, pattern_mask
from . import _kernels as kern
from .options import SolverOptions
from .transforms import TransformedConstraints


class SubproblemError(RuntimeError):
    pass


class _Infeasible(Exception):
    pass


class PatternBasis:
    """Real coordinates of a Hermitian matrix with a fixed zero pattern."""

    def __init__(self, mask: np.ndarray):
        n = mask.shape[0]
        self.n = n
        self.jj, self.ll = np.nonzero(np.triu(mask, 1))
        q = self.jj.size
        self.q = q
        self.p = n + 2 * q
        d = np.arange(n)
        re = n + np.arange(q)
        im = n + q + np.arange(q)
        one = np.ones(q)
        self._a = np.concatenate([d, self.jj, self.ll, self.jj, self.ll])
        self._b = np.concatenate([d, self.ll, self.jj, self.ll, self.jj])
        self._c = np.concatenate([np.ones(n), one, one, 1j * one, -1j * one])
        self._owner = np.concatenate([d, re, re, im, im])

    def to_matrix(self, theta: np.ndarray) -> np.ndarray:
        return kern.build_d(np.asarray(theta, dtype=float), self.n, self.jj, self.ll)

    def from_matrix(self, D: np.ndarray) -> np.ndarray:
        z = D[self.jj, self.ll]
        return np.concatenate([np.diagonal(D).real, z.real, z.imag])

    def entries(self, idx: np.ndarray):
        """Elementary entries (local row, local column, coefficient, parameter)
        of the principal block D[idx, idx]."""
        pos = -np.ones(self.n, dtype=int)
        pos[idx] = np.arange(idx.size)
        keep = (pos[self._a] >= 0) & (pos[self._b] >= 0)
        return pos[self._a[keep]], pos[self._b[keep]], self._c[keep], self._owner[keep]

    def linear(self, G: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        """Coefficients g with Tr(G D[idx, idx]) = g @ theta."""
        idx = np.arange(self.n) if idx is None else idx
        a, b, c, own = self.entries(idx)
        return np.bincount(own, weights=(c * G[b, a]).real, minlength=self.p)


class InnerProblem:
    """Barrier function of the subproblem in normalized units.

    Variables are z = (theta, r_hat): pattern coordinates of D / sigma2 and
    quantizer rates divided by the RF bandwidth. ``B=None`` builds only the
    constraint part (used to find feasible starting points).
    """

    def __init__(self, up: UnifiedProblem, alpha0: float, B, A, tc: TransformedConstraints):
        s2 = up.sigma2
        self.up = up
        self.alpha0 = float(alpha0)
        self.exact = A is None
        self.basis = basis = PatternBasis(pattern_mask(up.pair.quantizer, up.M, up.N))
        self.p = p = basis.p
        self.M = up.M
        n = up.MN
        self.cf = up.f_s / up.W_rf
        terms = []          # (antenna indices, constant, kind, weight, subset)
        gB = np.zeros(p)
        obj_const = 0.0
        if B is not None:
            B = np.asarray(B) * s2
            if up.pair.detector is Detector.MMSE:
                terms.append((np.arange(n), up.V[0] / s2, kern.OBJ, float(up.mu.sum()), 0))
            else:
                for k in range(up.K):
                    if up.mu[k] > 0:
                        terms.append((np.arange(n), up.V[k] / s2, kern.OBJ, float(up.mu[k]), 0))
            gB = basis.linear(herm(np.einsum("k,kij->ij", up.mu, B)))
            for k in range(up.K):
                if up.mu[k] > 0:
                    _, ldB = np.linalg.slogdet(B[k])
                    obj_const += up.mu[k] * (ldB - np.trace(B[k] @ (up.W[k] / s2)).real + n)
        nS = len(up.subsets)
        self.nS = nS
        members = np.zeros((nS, up.M))
        gA = np.zeros((nS, p))
        constA = np.zeros(nS)
        for i, S in enumerate(up.subsets):
            members[i, list(S)] = 1.0
            idx = up.antennas(S)
            X = up.C[i] / s2 + np.eye(idx.size)
            terms.append((idx, np.zeros_like(X), kern.DRATE, 0.0, i))
            if self.exact:
                terms.append((idx, X, kern.XRATE, 0.0, i))
            else:
                Ai = herm(np.asarray(A[i]) * s2)
                _, ldA = np.linalg.slogdet(Ai)
                gA[i] = basis.linear(Ai, idx)
                constA[i] = -ldA + np.trace(Ai @ X).real - idx.size
        self.members = members
        nt = len(terms)
        nmax = max(t[0].size for t in terms)
        ents = [basis.entries(t[0]) for t in terms]
        emax = max(e[0].size for e in ents)
        t_n = np.array([t[0].size for t in terms], dtype=np.int64)
        t_idx = np.zeros((nt, nmax), dtype=np.int64)
        t_const = np.zeros((nt, nmax, nmax), dtype=complex)
        e_cnt = np.zeros(nt, dtype=np.int64)
        e_a = np.zeros((nt, emax), dtype=np.int64)
        e_b = np.zeros((nt, emax), dtype=np.int64)
        e_c = np.zeros((nt, emax), dtype=complex)
        e_par = np.zeros((nt, emax), dtype=np.int64)
        for k, ((idx, const, _, _, _), (a, b, c, own)) in enumerate(zip(terms, ents)):
            m = idx.size
            t_idx[k, :m] = idx
            t_const[k, :m, :m] = const
            e_cnt[k] = a.size
            e_a[k, :a.size], e_b[k, :a.size], e_c[k, :a.size], e_par[k, :a.size] = a, b, c, own
        t_kind = np.array([t[2] for t in terms], dtype=np.int64)
        t_w = np.array([t[3] for t in terms])
        t_s = np.array([t[4] for t in terms], dtype=np.int64)
        A_rows, b_rows = tc.rows(alpha0)
        A_rows = A_rows * up.W_rf
        b_rows = b_rows.copy()
        if tc.fso_only:
            k0 = len(tc.subsets)
            A_rows[k0:] /= up.W_rf
            b_rows[k0:] /= up.W_rf
        self.A_rows, self.b_rows = A_rows, b_rows
        self.n_constraints = nS + A_rows.shape[0]
        self._geom = (n, basis.jj.astype(np.int64), basis.ll.astype(np.int64),
                      t_n, t_idx, t_const, t_kind, t_w, t_s)
        self._ents = (e_cnt, e_a, e_b, e_c, e_par)
        self._lin = (gB, float(obj_const), gA, constA, members, self.alpha0, self.cf)
        self._rows = (A_rows, b_rows)

    # -- pieces -----------------------------------------------------------
    def _eval(self, theta, r):
        ok, obj, s = kern.evaluate(np.asarray(theta, dtype=float), np.asarray(r, dtype=float),
                                   *self._geom, *self._lin)
        if not ok:
            raise _Infeasible
        return obj, s

    def objective(self, theta: np.ndarray) -> float:
        """Surrogate objective in bits/s/Hz (raises _Infeasible off-domain)."""
        return self._eval(theta, np.zeros(self.M))[0]

    def rate_terms(self, theta: np.ndarray) -> np.ndarray:
        """Quantizer information term (bits/sample) of every rate subset."""
        _, s = self._eval(theta, np.zeros(self.M))
        if self.alpha0 == 0:
            raise ValueError("rate terms are scaled by alpha0 and need alpha0 > 0")
        return -s / (self.alpha0 * self.cf)

    def slacks(self, theta, r) -> tuple[np.ndarray, np.ndarray]:
        _, s = self._eval(theta, r)
        return s, self.b_rows - self.A_rows @ np.asarray(r, dtype=float)

    # -- barrier ----------------------------------------------------------
    def value(self, z: np.ndarray, t: float) -> float:
        return kern.barrier_value(np.asarray(z, dtype=float), float(t), self.p,
                                  *self._geom, *self._lin, *self._rows)

    def derivatives(self, z: np.ndarray, t: float):
        """Barrier value, gradient and Newton matrix at a feasible z.

        For the exact (non-convex) rate constraint the concave part of the
        constraint curvature is left out, which keeps the Newton matrix
        positive definite.
        """
        ok, F, g, H = kern.barrier_derivatives(np.asarray(z, dtype=float), float(t), self.p,
                                               *self._geom, *self._ents, *self._lin, *self._rows)
        if not ok:
            raise _Infeasible
        return F, g, H

    def path_follow(self, z: np.ndarray, t: float, opts: SolverOptions):
        z, t, steps, status = kern.path_follow(
            np.asarray(z, dtype=float), float(t), float(opts.barrier_mu),
            float(opts.subproblem_tol), float(opts.newton_tol), int(opts.max_newton),
            float(self.n_constraints), self.p, *self._geom, *self._ents, *self._lin, *self._rows)
        if status == 1:
            raise SubproblemError(f"iterate left the barrier domain at t={t:g}")
        if status == 2:
            raise SubproblemError(f"Newton system could not be solved at t={t:g}")
        return z, t, steps


def _largest_rates(prob: InnerProblem) -> np.ndarray:
    """Largest r_m each RU could use on its own under the capacity rows."""
    Ar, br = prob.A_rows, prob.b_rows
    with np.errstate(divide="ignore"):
        cap = np.where(Ar > 0, br[:, None] / Ar, np.inf).min(axis=0)
    return np.where(np.isfinite(cap), cap, 1.0)


def _spread_distortion(prob: InnerProblem, D: np.ndarray, attempts: int = 80) -> np.ndarray:
    """Scale up only the RUs whose own quantizer output exceeds the rate
    they could ever be given, leaving the other RUs' distortion alone."""
    cap = _largest_rates(prob)
    single = {int(np.flatnonzero(row)[0]): i
              for i, row in enumerate(prob.members) if row.sum() == 1}
    N = prob.up.N
    for _ in range(attempts):
        try:
            need = prob.alpha0 * prob.cf * prob.rate_terms(prob.basis.from_matrix(D))
        except _Infeasible:
            return D
        grow = np.ones(prob.M)
        for m, i in single.items():
            if need[i] >= cap[m]:
                grow[m] = 2.0
        if np.all(grow == 1.0):
            return D
        g = np.sqrt(np.repeat(grow, N))
        D = herm(D * np.outer(g, g))
    return D


def _strict_start(prob: InnerProblem, D_start: np.ndarray, growth: float = 2.0,
                  attempts: int = 80, min_slack: float = 1e-9) -> np.ndarray:
    """Strictly feasible (theta, r_hat): the rate vector maximizing the
    smallest relative constraint slack, with D inflated until that slack
    exceeds ``min_slack``."""
    basis, M = prob.basis, prob.M
    D = herm(D_start)
    Ar, br = prob.A_rows, prob.b_rows
    if np.any(br <= 0):
        raise SubproblemError(f"no fronthaul capacity left at alpha0={prob.alpha0:g}")
    # capacities can span many decades (deep FSO fades), so each r_m is
    # measured against the largest value its own rows allow
    scale = _largest_rates(prob)
    width = prob.members @ scale
    nb = prob.nS
    A_ub = np.zeros((nb + Ar.shape[0], M + 1))
    A_ub[:nb, :M] = -prob.members * scale / width[:, None]
    A_ub[nb:, :M] = Ar * scale / br[:, None]
    A_ub[:, M] = 1.0
    c = np.zeros(M + 1)
    c[M] = -1.0
    bounds = [(None, None)] * M + [(None, 1.0)]
    for attempt in range(attempts):
        theta = basis.from_matrix(D)
        try:
            R = prob.rate_terms(theta)
        except _Infeasible:
            D = D + np.eye(D.shape[0])
            continue
        b_ub = np.concatenate([-prob.alpha0 * prob.cf * R / width, np.ones(Ar.shape[0])])
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status == 0 and -res.fun > min_slack:
            r = res.x[:M] * scale
            s, u = prob.slacks(theta, r)
            if np.all(s > 0) and np.all(u > 0):
                return np.concatenate([theta, r])
        D = D * (1.05 if attempt == 0 else growth)
    raise SubproblemError(f"no strictly feasible point found at alpha0={prob.alpha0:g}")


def feasible_distortion(alpha0: float, up: UnifiedProblem, tc: TransformedConstraints,
                        D0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(D, r) strictly feasible for the exact rate constraints, obtained by
    scaling D0 up until the fronthaul can carry the quantizer output."""
    prob = InnerProblem(up, alpha0, None, None, tc)
    if alpha0 <= 0:
        return D0.copy(), np.zeros(up.M)
    # D0 itself is kept whenever it already admits the margin; the margin
    # survives roundoff when M-ACO re-evaluates the tight bound at this D
    D = _spread_distortion(prob, herm(D0 / up.sigma2))
    z = _strict_start(prob, D, min_slack=1e-3)
    return prob.basis.to_matrix(z[:prob.p]) * up.sigma2, z[prob.p:] * up.W_rf


@dataclass
class InnerSolution:
    D: np.ndarray
    r: np.ndarray
    T: float                 # surrogate objective, bits/s
    newton_steps: int
    t_final: float = 0.0     # barrier weight at exit
    kept_incoming: bool = False


def solve_inner_subproblem(alpha0: float, B, A, up: UnifiedProblem, tc: TransformedConstraints,
                           opts: SolverOptions, D_start: np.ndarray,
                           r_start: np.ndarray | None = None) -> InnerSolution:
    """Maximize the surrogate weighted sum rate over (D, r) for fixed B
    (and fixed A for M-ACO; ``A=None`` selects the exact rate constraint).

    The result is never worse than the incoming point ``(D_start, r_start)``
    when that point is feasible.
    """
    s2, W = up.sigma2, up.W_rf
    if alpha0 <= 0:
        return InnerSolution(D=D_start.copy(), r=np.zeros(up.M), T=0.0, newton_steps=0)
    prob = InnerProblem(up, alpha0, B, A, tc)
    z = _strict_start(prob, D_start / s2)
    z, t, steps = prob.path_follow(z, opts.barrier_t0, opts)
    theta, r = z[:prob.p], z[prob.p:]
    try:
        T = prob.objective(theta)
    except _Infeasible:
        raise SubproblemError("solution left the objective domain") from None
    if not np.isfinite(T):
        raise SubproblemError("non-finite objective at the solution")
    sol = InnerSolution(D=prob.basis.to_matrix(theta) * s2, r=r * W, T=T * W,
                        newton_steps=steps, t_final=t)
    if r_start is not None:
        theta0 = prob.basis.from_matrix(D_start / s2)
        try:
            s, u = prob.slacks(theta0, np.asarray(r_start) / W)
            if np.all(s >= 0) and np.all(u >= 0):
                T0 = prob.objective(theta0) * W
                if T0 > sol.T:
                    return InnerSolution(D=D_start.copy(), r=np.asarray(r_start, float).copy(),
                                         T=T0, newton_steps=steps, t_final=t,
                                         kept_incoming=True)
        except _Infeasible:
            pass
    return sol
