"""Reference solutions used to cross-check the optimizer.

Nothing here calls into ``cranfso.optimizer`` numerics or ``cranfso._linalg``:
the single-link problem is solved by root bracketing on scalars, small
diagonal-distortion problems by exhaustive search, and the two constraint
transforms are checked against direct reformulations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import CapacityVector, ChannelRealization
from .rates import Quantizer, UnifiedProblem
from .sysmodel import SystemConfig, noise_powers

_LN2 = math.log(2.0)


# -- single user, single RU, single antenna -------------------------------

@dataclass(frozen=True)
class ScalarOracle:
    alpha0: float            # maximizer
    d: float                 # distortion at the maximizer (W)
    rate: float              # bits/s
    grid: np.ndarray         # alpha0 grid
    profile: np.ndarray      # rate along the grid, bits/s
    log_d: np.ndarray        # ln d* along the grid (-inf at alpha0 = 0)
    residual: float          # max |F(alpha0, d*)| / fronthaul capacity over the grid
    max_second_diff: float   # largest second difference of profile / W_rf
    concave: bool


class _ScalarLink:
    """Rate and fronthaul balance of the K=M=N=1 problem in log-distortion."""

    def __init__(self, cfg: SystemConfig, gain: float, c_fso: float, c_rf: float):
        self.sigma2 = noise_powers(cfg)[0]
        self.signal = cfg.P_k_w * gain
        self.W = cfg.W_rf_hz
        self.fs = cfg.f_s_hz
        self.c_fso = c_fso
        self.c_rf = c_rf
        self.l_sig = math.log(self.signal + self.sigma2)
        self.l_noise = math.log(self.sigma2)

    def capacity(self, a):
        return (1.0 - a) * self.c_rf + self.c_fso

    def balance(self, a, x):
        """F(alpha0, d) with d = exp(x): quantizer rate minus fronthaul capacity."""
        info = (np.logaddexp(self.l_sig, x) - x) / _LN2
        return a * self.fs * info - self.capacity(a)

    def rate(self, a, x):
        gain = (np.logaddexp(self.l_sig, x) - np.logaddexp(self.l_noise, x)) / _LN2
        return a * self.W * gain

    def root(self, a: np.ndarray, iters: int = 400) -> np.ndarray:
        """ln d* solving F(alpha0, d) = 0 (F is decreasing in d)."""
        a = np.asarray(a, dtype=float)
        lo = np.full(a.shape, self.l_noise - 2.0e4)
        hi = np.full(a.shape, self.l_noise + 2.0e2)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            pos = self.balance(a, mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(np.abs(lo), 1.0)):
                break
        x = 0.5 * (lo + hi)
        return np.where(a > 0, x, -np.inf)

    def profile(self, a):
        x = self.root(a)
        R = np.where(a > 0, self.rate(a, np.where(a > 0, x, 0.0)), 0.0)
        return x, R


def scalar_oracle(cfg: SystemConfig, channel: ChannelRealization | complex,
                  caps: CapacityVector, grid_points: int = 2001) -> ScalarOracle:
    """Optimum of the single-link problem over alpha0 by grid search with
    bisection for the binding distortion, refined by ternary search."""
    if (cfg.K, cfg.M, cfg.N, cfg.L) != (1, 1, 1, 1):
        raise ValueError("scalar oracle needs K = M = N = L = 1")
    h = channel.H[0, 0] if isinstance(channel, ChannelRealization) else channel
    link = _ScalarLink(cfg, abs(complex(h)) ** 2, float(np.ravel(caps.C_fso)[0]),
                       float(np.ravel(caps.C_rf)[0]))
    grid = np.linspace(0.0, 1.0, grid_points)
    if link.capacity(1.0) <= 0:
        grid = grid[:-1]
    x, R = link.profile(grid)
    pos = grid > 0
    res = np.abs(link.balance(grid[pos], x[pos])) / link.capacity(grid[pos])
    second = np.diff(R, 2) / link.W
    i = int(np.argmax(R))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    for _ in range(100):
        m1, m2 = lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0
        if link.profile(np.array([m1]))[1][0] < link.profile(np.array([m2]))[1][0]:
            lo = m1
        else:
            hi = m2
    a_star = 0.5 * (lo + hi)
    xs, Rs = link.profile(np.array([a_star]))
    if Rs[0] < R[i]:
        a_star, xs, Rs = grid[i], x[i:i + 1], R[i:i + 1]
    return ScalarOracle(
        alpha0=float(a_star), d=float(np.exp(xs[0])), rate=float(Rs[0]), grid=grid,
        profile=R, log_d=x, residual=float(res.max()) if res.size else 0.0,
        max_second_diff=float(second.max()) if second.size else 0.0,
        concave=bool(second.size == 0 or second.max() <= 1e-9),
    )


# -- exhaustive search for diagonal distortion ----------------------------

@dataclass(frozen=True)
class BruteForceResult:
    alpha0: float
    D: np.ndarray
    r: np.ndarray
    T: float                 # weighted sum rate, bits/s
    grid_slack: float        # largest T change to a neighbouring grid point, bits/s
    feasible_points: int


def _slogdet(X) -> np.ndarray:
    sign, ld = np.linalg.slogdet(X)
    if np.any(sign.real <= 0):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return ld


def distortion_grid(sigma2: float, points: int = 61, lo: float = 1e-4, hi: float = 1e4):
    return sigma2 * np.logspace(math.log10(lo), math.log10(hi), points)


def brute_force_small(up: UnifiedProblem, grids=None, alpha0: float | None = None,
                      bisect_iters: int = 60) -> BruteForceResult:
    """Best grid point of the weighted sum-rate problem with diagonal D.

    Each free distortion parameter runs over its own grid (default: 61
    log-spaced values over [1e-4, 1e4] times the noise power). For a given D
    the objective grows linearly in alpha0 while fronthaul feasibility only
    shrinks, so the best alpha0 is the largest feasible one; it is found by
    bisection unless ``alpha0`` pins it.
    """
    if up.pair.quantizer is Quantizer.DSC or (up.pair.quantizer is Quantizer.RVQ and up.N > 1):
        raise ValueError("brute force covers diagonal distortion patterns only")
    MN = up.MN
    if MN > 3:
        raise ValueError("brute force limited to at most three distortion parameters")
    C_fso, C_rf = up.C_fso, up.C_rf
    if grids is None:
        grids = [distortion_grid(up.sigma2)] * MN
    mesh = np.meshgrid(*grids, indexing="ij")
    shape = mesh[0].shape
    d = np.stack([m.ravel() for m in mesh], axis=1)                # (G, MN)
    Dg = np.zeros((d.shape[0], MN, MN), dtype=complex)
    Dg[:, np.arange(MN), np.arange(MN)] = d

    # bits per sample needed by each RU (singleton subsets)
    info = np.zeros((d.shape[0], up.M))
    for i, S in enumerate(up.subsets):
        idx = up.antennas(S)
        cov = np.real(np.diagonal(up.C[i]))
        num = cov[None, :] + d[:, idx] + up.sigma2
        info[:, S[0]] = np.sum(np.log2(num / d[:, idx]), axis=1)
    gain = np.zeros(d.shape[0])
    for k in range(up.K):
        if up.mu[k] > 0:
            gain += up.mu[k] * (_slogdet(up.V[k] + Dg) - _slogdet(up.W[k] + Dg)) / _LN2
    gain *= up.W_rf

    def fits(a):
        need = a[:, None] * up.f_s * info
        excess = np.maximum(need - C_fso, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(C_rf > 0, excess / np.where(C_rf > 0, C_rf, 1.0),
                            np.where(excess > 0, np.inf, 0.0))
        return frac.sum(axis=1) <= 1.0 - a

    if alpha0 is None:
        lo = np.zeros(d.shape[0])
        hi = np.ones(d.shape[0])
        ok_hi = fits(hi)
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            ok = fits(mid)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        a = np.where(ok_hi, 1.0, lo)
        feasible = np.ones(d.shape[0], dtype=bool)
    else:
        a = np.full(d.shape[0], float(alpha0))
        feasible = fits(a)
    T = np.where(feasible, a * gain, -np.inf)
    if not np.any(np.isfinite(T)):
        raise ValueError("no feasible grid point")
    best = int(np.argmax(T))
    Tg = T.reshape(shape)
    pos = np.unravel_index(best, shape)
    slack = 0.0
    for offs in np.ndindex(*([3] * len(shape))):
        q = tuple(p + o - 1 for p, o in zip(pos, offs))
        if all(0 <= qq < s for qq, s in zip(q, shape)) and np.isfinite(Tg[q]):
            slack = max(slack, abs(Tg[q] - T[best]))
    r = a[best] * up.f_s * info[best]
    return BruteForceResult(alpha0=float(a[best]), D=Dg[best], r=r, T=float(T[best]),
                            grid_slack=float(slack), feasible_points=int(np.isfinite(T).sum()))


# -- randomized checks of the two constraint transforms -------------------

@dataclass
class CheckReport:
    name: str
    trials: int
    failures: int
    max_error: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _alpha_exists(r, alpha0, C_fso, C_rf) -> bool:
    # smallest RF time per RU, then check it fits in the frame
    need = 0.0
    for rm, cf, cr in zip(r, C_fso, C_rf):
        excess = rm - cf
        if excess > 0:
            if cr <= 0:
                return False
            need += excess / cr
    return need <= 1.0 - alpha0


def _random_pd(rng: np.random.Generator, J: int) -> np.ndarray:
    G = rng.standard_normal((J, J)) + 1j * rng.standard_normal((J, J))
    return G @ G.conj().T / J + 0.1 * np.eye(J)


def lemma_checkers(rng: np.random.Generator, trials: int = 10_000, lemma2_trials: int = 1000,
                   transform: Callable | None = None, value: Callable | None = None,
                   J: int = 4) -> list[CheckReport]:
    """Randomized checks of the RF-time elimination and of the log-det
    variational bound; ``transform`` / ``value`` default to the optimizer's
    implementations and can be swapped to inject faults."""
    if transform is None or value is None:
        from .optimizer.transforms import lemma1_transform, lemma2_value
        transform = transform or lemma1_transform
        value = value or lemma2_value
    reports = []
    for M in (1, 2, 3):
        bad = 0
        both = {"feasible": 0, "infeasible": 0}
        for _ in range(trials):
            C_rf = rng.uniform(50e6, 500e6, M)
            C_fso = rng.uniform(0.0, 50e6, M)
            a0 = rng.uniform(0.0, 1.0)
            r = rng.uniform(0.0, 1.5 * (C_fso + (1.0 - a0) * C_rf / M))
            ref = _alpha_exists(r, a0, C_fso, C_rf)
            got = transform(C_fso, C_rf).satisfied(r, a0)
            both["feasible" if ref else "infeasible"] += 1
            bad += int(ref != got)
        reports.append(CheckReport(f"capacity transform M={M}", trials, bad, float(bad), 0.0, both))
    eq_err, viol, worst = 0.0, 0, -np.inf
    for _ in range(lemma2_trials):
        X = _random_pd(rng, J)
        Xi = np.linalg.inv(X)
        Xi = 0.5 * (Xi + Xi.conj().T)
        target = -np.linalg.slogdet(X)[1] / _LN2
        eq_err = max(eq_err, abs(value(X, Xi) - target))
        G = rng.standard_normal((J, J)) + 1j * rng.standard_normal((J, J))
        Y = G @ G.conj().T * rng.uniform(0.05, 3.0)
        gap = value(X, Y) - target
        worst = max(worst, gap)
        viol += int(gap > 1e-9)
    reports.append(CheckReport("log-det bound equality", lemma2_trials, int(eq_err > 1e-9),
                               eq_err, 1e-9))
    reports.append(CheckReport("log-det bound inequality", lemma2_trials, viol,
                               max(worst, 0.0), 1e-9))
    return reports
