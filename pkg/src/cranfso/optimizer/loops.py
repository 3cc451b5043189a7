"""Alternating inner loop over (B, A, D, r) and golden-section search over
the access time fraction alpha0."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..rates import UnifiedProblem, user_rates
from .barrier import SubproblemError, feasible_distortion, solve_inner_subproblem
from .options import SolverOptions, Variant
from .transforms import TransformedConstraints, closed_form_A, closed_form_B, lemma1_transform

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class InfeasibleAllocation(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeAllocation:
    alpha0: float
    alpha_m: np.ndarray
    idle: float

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.alpha0], self.alpha_m])


def recover_alpha(r, alpha0: float, C_fso, C_rf, tol: float = 1e-6) -> TimeAllocation:
    """Smallest RF fronthaul time per RU carrying the rates r; what remains of
    the frame after access and fronthaul is reported as idle."""
    r = np.asarray(r, dtype=float)
    C_fso = np.asarray(C_fso, dtype=float)
    C_rf = np.asarray(C_rf, dtype=float)
    excess = np.maximum(r - C_fso, 0.0)
    alpha_m = np.zeros_like(r)
    pos = C_rf > 0
    alpha_m[pos] = excess[pos] / C_rf[pos]
    if np.any(excess[~pos] > tol * np.maximum(C_fso[~pos], 1.0)):
        raise InfeasibleAllocation("rate exceeds FSO capacity of an RU without RF link")
    idle = 1.0 - alpha0 - alpha_m.sum()
    if idle < -tol:
        raise InfeasibleAllocation(f"time fractions exceed the frame by {-idle:.3g}")
    if idle < 0:
        alpha_m *= (1.0 - alpha0) / alpha_m.sum()
        idle = 0.0
    return TimeAllocation(float(alpha0), alpha_m, float(idle))


@dataclass
class InnerResult:
    alpha0: float
    D: np.ndarray
    r: np.ndarray
    T: float                       # surrogate objective at exit, bits/s
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True


def aco_inner(alpha0: float, up: UnifiedProblem, tc: TransformedConstraints,
              opts: SolverOptions, variant: Variant | None = None) -> InnerResult:
    """Alternate closed-form auxiliary updates with the convex (D, r) step
    until the surrogate changes by at most ``opts.aco_epsilon_bps``."""
    variant = Variant(variant or opts.variant)
    D = opts.d0_scale * up.sigma2 * np.eye(up.MN)
    # the surrogate rate bound is only feasible around a point that already
    # meets the exact rate constraints, so start from one
    D, _ = feasible_distortion(alpha0, up, tc, D)
    r = None
    T_prev = 0.0
    history = []
    for it in range(1, opts.n_max + 1):
        B = closed_form_B(D, up)
        A = closed_form_A(D, up) if variant is Variant.MACO else None
        sol = solve_inner_subproblem(alpha0, B, A, up, tc, opts, D, r)
        D, r = sol.D, sol.r
        history.append(sol.T)
        if abs(sol.T - T_prev) <= opts.aco_epsilon_bps:
            return InnerResult(alpha0, D, r, sol.T, it, history, True)
        T_prev = sol.T
    return InnerResult(alpha0, D, r, T_prev, opts.n_max, history, False)


@dataclass
class GssResult:
    alpha0: float
    best: InnerResult
    iterations: int
    probes: list          # (alpha0, T) in evaluation order
    intervals: list = field(default_factory=list)   # (lo, hi) after each iteration


def gss_outer(up: UnifiedProblem, tc: TransformedConstraints, opts: SolverOptions,
              inner: Callable[[float], InnerResult] | None = None) -> GssResult:
    """Golden-section search of the inner optimum over alpha0 in [0, 1].

    ``inner`` maps alpha0 to an :class:`InnerResult` (defaults to the
    alternating loop); only its ``T`` is used to steer the search.
    """
    if inner is None:
        def inner(a):
            return aco_inner(a, up, tc, opts)
    rho = 1.0 - 1.0 / GOLDEN
    lo, hi = 0.0, 1.0
    probes = []
    cache: dict[float, InnerResult] = {}

    def evaluate(a: float) -> InnerResult:
        if a not in cache:
            cache[a] = inner(a)
            probes.append((a, cache[a].T))
        return cache[a]

    it = 0
    intervals = []
    a1 = a2 = None
    while abs(hi - lo) > opts.gss_epsilon:
        delta = hi - lo
        # one probe carries over from the previous interval
        if a1 is None:
            a1 = lo + rho * delta
        if a2 is None:
            a2 = hi - rho * delta
        r1, r2 = evaluate(a1), evaluate(a2)
        if r1.T >= r2.T:
            hi, a2, a1 = a2, a1, None
        else:
            lo, a1, a2 = a1, a2, None
        it += 1
        intervals.append((lo, hi))
    mid = 0.5 * (lo + hi)
    res = evaluate(mid)
    return GssResult(mid, res, it, probes, intervals)


@dataclass
class SolveResult:
    alpha: TimeAllocation
    D: np.ndarray
    r: np.ndarray
    rates: np.ndarray          # per user, original order, bits/s
    wsr: float                 # weighted sum rate at the returned point, bits/s
    surrogate: float
    gss_iterations: int
    aco_iterations: int
    probes: list
    converged: bool
    wall_time: float


def solve(up: UnifiedProblem, opts: SolverOptions | None = None) -> SolveResult:
    """Weighted sum-rate maximization over (alpha, D, r) for one channel block."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    tc = lemma1_transform(up.C_fso, up.C_rf)
    try:
        g = gss_outer(up, tc, opts)
    except (SubproblemError, np.linalg.LinAlgError) as exc:
        raise SubproblemError(f"{up.pair}: {exc}") from exc
    best = g.best
    alloc = recover_alpha(best.r, g.alpha0, up.C_fso, up.C_rf)
    sorted_rates = user_rates(g.alpha0, best.D, up)
    rates = np.empty_like(sorted_rates)
    rates[up.order] = sorted_rates
    return SolveResult(
        alpha=alloc, D=best.D, r=best.r, rates=rates, wsr=float(up.mu @ sorted_rates),
        surrogate=best.T, gss_iterations=g.iterations, aco_iterations=best.iterations,
        probes=g.probes, converged=best.converged, wall_time=time.perf_counter() - t0,
    )
