"""Seeded Monte Carlo experiments producing plot-ready tables.

Every experiment is split into independent tasks (one per channel block and
grid point) that can run in a process pool; rows are gathered in task order,
so the output does not depend on the number of workers.
"""
from __future__ import annotations

import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, TextIO

import numpy as np

from . import __version__
from .channel import capacities, draw_realization
from .optimizer import SolverOptions, Variant, aco_inner, gss_outer, lemma1_transform, solve
from .oracles import brute_force_small, lemma_checkers, scalar_oracle
from .rates import ALL_PAIRS, Detector, Quantizer, SchemePair, build_unified, user_rates
from .sysmodel import SystemConfig, config_from_dict

MBPS = 1e-6
SWEEP_POINTS = 21


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    pairs: tuple = ALL_PAIRS
    kappas: tuple = ()              # dB/km; empty means the config value
    blocks: int = 100
    seed: int = 0
    variant: Variant = Variant.MACO
    mu_points: int = 11
    powers_dbm: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    antennas: tuple = ()            # RU antenna counts; empty means the config value

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError("block count must be at least 1")
        if self.mu_points < 2:
            raise ValueError("the weight grid needs at least two points")

    def describe(self) -> dict[str, Any]:
        d = asdict(self)
        d["pairs"] = [str(p) for p in self.pairs]
        d["variant"] = Variant(self.variant).value
        return d


@dataclass
class ResultTable:
    kind: str
    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    def write(self, out: TextIO) -> None:
        for key, value in self.meta.items():
            if key == "config":
                for name, v in value.items():
                    out.write(f"# config.{name}: {_fmt(v)}\n")
            else:
                out.write(f"# {key}: {value}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0.0:
            return "0"
        return format(v, ".10g")
    return str(v)


def build_id(kind: str, cfg: SystemConfig, spec: ExperimentSpec) -> str:
    blob = json.dumps({"version": __version__, "kind": kind, "config": cfg.to_dict(),
                       "spec": spec.describe()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _metadata(kind: str, cfg: SystemConfig, spec: ExperimentSpec) -> dict[str, Any]:
    return {
        "cranfso": __version__,
        "experiment": kind,
        "build": build_id(kind, cfg, spec),
        "seed": spec.seed,
        "blocks": spec.blocks,
        "pairs": " ".join(str(p) for p in spec.pairs),
        "variant": Variant(spec.variant).value,
        "units": "rates in Mbps, alpha0 dimensionless, kappa in dB/km",
        "config": cfg.to_dict(),
    }


def _run(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _kappas(cfg: SystemConfig, spec: ExperimentSpec) -> tuple:
    return tuple(spec.kappas) or (cfg.kappa_db_per_km,)


def _problem(cfg: SystemConfig, seed: int, block: int, pair: SchemePair, mu):
    real = draw_realization(cfg, seed, block)
    caps = capacities(cfg, real)
    return build_unified(cfg, real.H, caps, pair, mu)


def equal_weights(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


# -- sum rate versus alpha0 -------------------------------------------------

def _sweep_task(task):
    cfg_d, seed, block, pair_s, variant = task
    cfg = config_from_dict(cfg_d)
    pair = SchemePair.parse(*pair_s.split("/"))
    up = _problem(cfg, seed, block, pair, equal_weights(cfg.K))
    opts = SolverOptions.from_config(cfg, variant=variant)
    tc = lemma1_transform(up.C_fso, up.C_rf)
    rows = []
    for a in np.linspace(0.0, 1.0, SWEEP_POINTS):
        res = aco_inner(float(a), up, tc, opts)
        rates = user_rates(res.alpha0, res.D, up)
        rows.append(["grid", float(a), rates.sum(), float(up.mu @ rates), res.iterations,
                     res.converged])
    g = gss_outer(up, tc, opts)
    rates = user_rates(g.alpha0, g.best.D, up)
    rows.append(["gss", g.alpha0, rates.sum(), float(up.mu @ rates), g.best.iterations,
                 g.best.converged])
    return rows


def run_sweep_alpha(cfg: SystemConfig, spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Sum rate over a 21-point alpha0 grid plus the golden-section optimum,
    per (kappa, block, scheme pair)."""
    keys, tasks = [], []
    for kappa in _kappas(cfg, spec):
        ck = cfg.replace(kappa_db_per_km=kappa)
        for block in range(spec.blocks):
            for pair in spec.pairs:
                keys.append((kappa, block, pair))
                tasks.append((ck.to_dict(), spec.seed, block, str(pair),
                              Variant(spec.variant).value))
    rows = []
    for (kappa, block, pair), out in zip(keys, _run(_sweep_task, tasks, workers)):
        for point, a, total, wsr, its, conv in out:
            rows.append([kappa, block, pair.quantizer.value, pair.detector.value, point, a,
                         total * MBPS, wsr * MBPS, its, conv])
    cols = ["kappa_db_per_km", "block", "quantizer", "detector", "point", "alpha0",
            "sum_rate_mbps", "weighted_sum_rate_mbps", "aco_iterations", "converged"]
    return ResultTable("sweep-alpha", cols, rows, _metadata("sweep-alpha", cfg, spec))


# -- rate region ------------------------------------------------------------

def weight_grid(K: int, points: int) -> list[np.ndarray]:
    """Weight vectors with the first user's weight on a uniform grid and the
    remainder shared equally by the others."""
    if K == 1:
        return [np.ones(1)]
    return [np.array([m1] + [(1.0 - m1) / (K - 1)] * (K - 1))
            for m1 in np.linspace(0.0, 1.0, points)]


def vmac_rates(cfg: SystemConfig, seed: int, block: int, mu) -> np.ndarray:
    """Weighted-sum-optimal rates of the virtual MAC (no quantization, no
    fronthaul limit), per user in original order."""
    up = _problem(cfg, seed, block, SchemePair(Quantizer.AVQ, Detector.SIC), mu)
    sorted_rates = user_rates(1.0, np.zeros((up.MN, up.MN)), up)
    out = np.empty_like(sorted_rates)
    out[up.order] = sorted_rates
    return out


def _region_task(task):
    cfg_d, seed, block, pair_s, variant, mu = task
    cfg = config_from_dict(cfg_d)
    mu = np.asarray(mu)
    if pair_s == "vmac":
        return vmac_rates(cfg, seed, block, mu), 1.0
    pair = SchemePair.parse(*pair_s.split("/"))
    up = _problem(cfg, seed, block, pair, mu)
    res = solve(up, SolverOptions.from_config(cfg, variant=variant))
    return res.rates, res.alpha.alpha0


def run_rate_region(cfg: SystemConfig, spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Per-user rates maximizing each weighted sum on a weight grid, averaged
    over blocks, together with the virtual-MAC bound."""
    grid = weight_grid(cfg.K, spec.mu_points)
    labels = [str(p) for p in spec.pairs] + ["vmac"]
    keys, tasks = [], []
    for kappa in _kappas(cfg, spec):
        ck = cfg.replace(kappa_db_per_km=kappa)
        for label in labels:
            for i, mu in enumerate(grid):
                for block in range(spec.blocks):
                    keys.append((kappa, label, i))
                    tasks.append((ck.to_dict(), spec.seed, block, label,
                                  Variant(spec.variant).value, tuple(mu)))
    sums: dict[tuple, list] = {}
    for key, (rates, a0) in zip(keys, _run(_region_task, tasks, workers)):
        acc = sums.setdefault(key, [np.zeros(cfg.K), 0.0])
        acc[0] = acc[0] + rates
        acc[1] += a0
    rows = []
    for (kappa, label, i), (rates, a0) in sums.items():
        q, d = label.split("/") if "/" in label else (label, "-")
        mean = rates / spec.blocks
        rows.append([kappa, q, d, i, *grid[i], *(mean * MBPS), mean.sum() * MBPS,
                     a0 / spec.blocks])
    cols = (["kappa_db_per_km", "quantizer", "detector", "mu_index"]
            + [f"mu{k + 1}" for k in range(cfg.K)]
            + [f"rate{k + 1}_mbps" for k in range(cfg.K)] + ["sum_rate_mbps", "alpha0_mean"])
    return ResultTable("rate-region", cols, rows, _metadata("rate-region", cfg, spec))


# -- sum rate versus user transmit power -----------------------------------

def _power_task(task):
    cfg_d, seed, block, pair_s, variant = task
    cfg = config_from_dict(cfg_d)
    pair = SchemePair.parse(*pair_s.split("/"))
    up = _problem(cfg, seed, block, pair, equal_weights(cfg.K))
    res = solve(up, SolverOptions.from_config(cfg, variant=variant))
    return float(res.rates.sum()), res.alpha.alpha0


def run_sum_rate_vs_power(cfg: SystemConfig, spec: ExperimentSpec,
                          workers: int = 1) -> ResultTable:
    """Block-averaged sum rate over a grid of user powers, per antenna count
    and scheme pair."""
    antennas = tuple(spec.antennas) or (cfg.N,)
    keys, tasks = [], []
    for kappa in _kappas(cfg, spec):
        for n in antennas:
            for pair in spec.pairs:
                for p in spec.powers_dbm:
                    ck = cfg.replace(kappa_db_per_km=kappa, N=int(n), P_k_dbm=float(p))
                    for block in range(spec.blocks):
                        keys.append((kappa, int(n), str(pair), float(p)))
                        tasks.append((ck.to_dict(), spec.seed, block, str(pair),
                                      Variant(spec.variant).value))
    sums: dict[tuple, list] = {}
    for key, (total, a0) in zip(keys, _run(_power_task, tasks, workers)):
        acc = sums.setdefault(key, [0.0, 0.0])
        acc[0] += total
        acc[1] += a0
    rows = []
    for (kappa, n, label, p), (total, a0) in sums.items():
        q, d = label.split("/")
        rows.append([kappa, n, q, d, p, total / spec.blocks * MBPS, a0 / spec.blocks])
    cols = ["kappa_db_per_km", "antennas", "quantizer", "detector", "power_dbm",
            "sum_rate_mbps", "alpha0_mean"]
    return ResultTable("sum-rate", cols, rows, _metadata("sum-rate", cfg, spec))


# -- oracle cross-checks ------------------------------------------------------

SCALAR_RTOL = 0.01
BRUTE_RTOL = 0.02


def _check_row(name, trials, failures, max_error, tol):
    return [name, trials, failures, max_error, tol, "pass" if failures == 0 else "FAIL"]


def run_oracle_check(cfg: SystemConfig, spec: ExperimentSpec, workers: int = 1,
                     transform: Callable | None = None, lemma_trials: int = 10_000,
                     brute_blocks: int | None = None) -> ResultTable:
    """Pipeline against the independent oracles; exit code 2 on any failure."""
    opts = SolverOptions.from_config(cfg, variant=spec.variant)
    rows = []
    c1 = cfg.replace(K=1, M=1, N=1, L=1)
    fails, worst, oracle_fail = 0, 0.0, 0
    for block in range(spec.blocks):
        real = draw_realization(c1, spec.seed, block)
        caps = capacities(c1, real)
        ref = scalar_oracle(c1, real, caps)
        up = build_unified(c1, real.H, caps, SchemePair(Quantizer.AVQ, Detector.MMSE), [1.0])
        got = solve(up, opts).wsr
        err = abs(got - ref.rate) / ref.rate
        worst = max(worst, err)
        fails += int(err > SCALAR_RTOL)
        oracle_fail += int(ref.residual > 1e-10 or not ref.concave)
    rows.append(_check_row("scalar oracle vs pipeline", spec.blocks, fails, worst, SCALAR_RTOL))
    rows.append(_check_row("scalar oracle root and concavity", spec.blocks, oracle_fail,
                           0.0, 1e-10))
    c2 = cfg.replace(K=2, M=1, N=2)
    nb = spec.blocks if brute_blocks is None else brute_blocks
    detectors = sorted({p.detector for p in spec.pairs}, key=lambda d: d.value) or [Detector.SIC]
    for det in detectors:
        fails, worst, n = 0, 0.0, 0
        for block in range(nb):
            up = _problem(c2, spec.seed, block, SchemePair(Quantizer.AVQ, det), equal_weights(2))
            ref = brute_force_small(up)
            got = solve(up, opts).wsr
            low = (ref.T - got) / ref.T
            high = got - (ref.T + ref.grid_slack)
            worst = max(worst, low)
            fails += int(low > BRUTE_RTOL or high > 0)
            n += 1
        rows.append(_check_row(f"brute force vs pipeline avq/{det.value}", n, fails, worst,
                               BRUTE_RTOL))
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    for rep in lemma_checkers(rng, trials=lemma_trials, transform=transform):
        rows.append(_check_row(rep.name, rep.trials, rep.failures, rep.max_error, rep.tolerance))
    cols = ["check", "trials", "failures", "max_error", "tolerance", "status"]
    table = ResultTable("oracle-check", cols, rows, _metadata("oracle-check", cfg, spec))
    table.exit_code = 0 if all(r[2] == 0 for r in rows) else 2
    return table


RUNNERS: dict[str, Callable[..., ResultTable]] = {
    "sweep-alpha": run_sweep_alpha,
    "rate-region": run_rate_region,
    "sum-rate": run_sum_rate_vs_power,
    "oracle-check": run_oracle_check,
}


def pairs_from(quantizers: Iterable[str], detectors: Iterable[str]) -> tuple:
    return tuple(SchemePair.parse(q, d) for q in quantizers for d in detectors)


__all__ = ["ExperimentSpec", "ResultTable", "RUNNERS", "build_id", "pairs_from",
           "run_oracle_check", "run_rate_region", "run_sum_rate_vs_power", "run_sweep_alpha",
           "vmac_rates", "weight_grid"]
