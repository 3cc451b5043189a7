"""Weighted sum-rate maximization: golden-section search over the access
time, alternating convex optimization over distortion and rates inside."""
from .barrier import (InnerSolution, PatternBasis, SubproblemError, feasible_distortion,
                      solve_inner_subproblem)
from .loops import (GOLDEN, GssResult, InfeasibleAllocation, InnerResult, SolveResult,
                    TimeAllocation, aco_inner, gss_outer, recover_alpha, solve)
from .options import SolverOptions, Variant
from .transforms import (TransformedConstraints, closed_form_A, closed_form_B, lemma1_transform,
                         lemma2_value, rate_upper_bound, surrogate_objective)

__all__ = [
    "GOLDEN", "GssResult", "InfeasibleAllocation", "InnerResult", "InnerSolution",
    "PatternBasis", "SolveResult", "SolverOptions", "SubproblemError", "TimeAllocation",
    "TransformedConstraints", "Variant", "aco_inner", "closed_form_A", "closed_form_B",
    "feasible_distortion", "gss_outer", "lemma1_transform", "lemma2_value", "rate_upper_bound",
    "recover_alpha", "solve", "solve_inner_subproblem", "surrogate_objective",
]
