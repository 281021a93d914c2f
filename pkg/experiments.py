"""
Monte Carlo harnesses: estimator convergence along one realization, empirical
large-deviation rates of the estimators, and the two-state rate curve.
"""

import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from analytic import dm1_exponent, two_state_exponent, two_state_J
from errors import ConfigurationError, InsufficientDataError, ParameterError
from estimators import (
    block_exponent, extremal_estimate, markov_exponent_from_trace,
)
from lindley import lindley_recursion
from models import (
    SEED_MODULUS, ConvergenceConfig, ConvergenceRow, Dm1Spec, EstimatorKind,
    EstimatorSpec, ExponentEstimate, McLdpConfig, McLdpResult,
    McLdpRow, ProcessSpec, RateCurve, RateCurveKind, RootOpts, Trace, TwoStateSpec,
)
from processes import sample, state_values

logger = logging.getLogger(__name__)

INSUFFICIENT = "insufficient"

# Replicas per task handed to a worker process
CHUNK_SIZE = 250


# ============================================================================
# SHARED
# ============================================================================

def check_compatible(process: ProcessSpec, estimator: EstimatorSpec):
    """Raise ConfigurationError when the estimator cannot run on the process."""
    if estimator.kind == EstimatorKind.MARKOV and isinstance(process, Dm1Spec):
        raise ConfigurationError(
            "the Markov estimator needs a finite-valued process; D/M/1 increments are continuous"
        )
    if estimator.kind == EstimatorKind.BLOCK and estimator.block_size < 1:
        raise ParameterError(f"block size must be >= 1, got {estimator.block_size}")
    if estimator.kind == EstimatorKind.EXTREMAL and estimator.w0 < 0:
        raise ParameterError(f"initial wait must be >= 0, got {estimator.w0}")


def reference_exponent(process: ProcessSpec) -> float:
    """Analytic theta* of a process family with a known closed form or equation."""
    if isinstance(process, TwoStateSpec):
        return two_state_exponent(process.alpha, process.beta)
    if isinstance(process, Dm1Spec):
        return dm1_exponent(process.alpha, process.beta)
    raise ConfigurationError(
        f"no analytic exponent for family {process.family.value}; supply theta_star_ref explicitly"
    )


def estimate_prefixes(trace: Trace, estimator: EstimatorSpec, checkpoints: Sequence[int],
                      states: Optional[Sequence[float]] = None,
                      opts: RootOpts = RootOpts()) -> List[Optional[ExponentEstimate]]:
    """
    Estimator evaluated on trace.prefix(k) for each checkpoint k.

    None marks a checkpoint without enough data (k < B, k < 2, or a Markov
    estimate with unvisited states).
    """
    waits = None
    if estimator.kind == EstimatorKind.EXTREMAL:
        waits = lindley_recursion(trace, estimator.w0)

    results: List[Optional[ExponentEstimate]] = []
    for k in checkpoints:
        try:
            if estimator.kind == EstimatorKind.BLOCK:
                results.append(block_exponent(trace.prefix(k), estimator.block_size, opts))
            elif estimator.kind == EstimatorKind.MARKOV:
                results.append(markov_exponent_from_trace(trace.prefix(k), states, opts))
            else:
                results.append(extremal_estimate(waits.prefix(k)))
        except InsufficientDataError as e:
            logger.debug("checkpoint n=%d: %s", k, e)
            results.append(None)
    return results


def _markov_states(process: ProcessSpec, estimator: EstimatorSpec):
    if estimator.states is not None:
        return estimator.states
    return state_values(process)


# ============================================================================
# CONVERGENCE (one realization, growing prefixes)
# ============================================================================

def run_convergence(cfg: ConvergenceConfig, opts: RootOpts = RootOpts()) -> List[ConvergenceRow]:
    """Estimator recomputed at each checkpoint of a single realization of length n_max."""
    cfg.validate()
    check_compatible(cfg.process, cfg.estimator)
    process = replace(cfg.process, n=cfg.n_max, seed=cfg.seed)
    process.validate()
    logger.info("convergence run: %s, %s estimator, n_max=%d, seed=%d",
                process.family.value, cfg.estimator.kind.value, cfg.n_max, cfg.seed)

    trace = sample(process)
    estimates = estimate_prefixes(
        trace, cfg.estimator, cfg.checkpoints, _markov_states(process, cfg.estimator), opts
    )
    rows = []
    for k, est in zip(cfg.checkpoints, estimates):
        if est is None:
            rows.append(ConvergenceRow(n=int(k), estimate=math.nan, status=INSUFFICIENT))
        else:
            rows.append(ConvergenceRow(n=int(k), estimate=est.value, status=est.status.value))
    return rows


def convergence_table(rows: Iterable[ConvergenceRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [{'n': r.n, 'estimate': r.estimate, 'status': r.status} for r in rows],
        columns=['n', 'estimate', 'status'],
    )


# ============================================================================
# MONTE CARLO LARGE DEVIATIONS
# ============================================================================

def _run_replicas(process: ProcessSpec, estimator: EstimatorSpec, n_list: Tuple[int, ...],
                  x_list: Tuple[float, ...], theta_ref: float, seeds: Sequence[int],
                  opts: RootOpts) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exceedance counts over a batch of replicas.

    Returns (counts[len(n_list), len(x_list)], insufficient[len(n_list)]).
    Module-level so worker processes can unpickle it.
    """
    n_max = max(n_list)
    states = _markov_states(process, estimator)
    counts = np.zeros((len(n_list), len(x_list)), dtype=np.int64)
    insufficient = np.zeros(len(n_list), dtype=np.int64)
    for seed in seeds:
        trace = sample(replace(process, n=n_max, seed=int(seed)))
        estimates = estimate_prefixes(trace, estimator, n_list, states, opts)
        for i, est in enumerate(estimates):
            if est is None:
                insufficient[i] += 1
                continue
            for j, x in enumerate(x_list):
                if est.exceeds(theta_ref, x):
                    counts[i, j] += 1
    return counts, insufficient


def empirical_rate(count: int, m: int, n: int) -> float:
    """-(1/n) log(count/m); +inf when count is 0."""
    if count <= 0:
        return math.inf
    return math.log(m / count) / n


def run_mc_ldp(cfg: McLdpConfig, opts: RootOpts = RootOpts(), progress: bool = False) -> McLdpResult:
    """
    Count, over m replicas, the events theta*(n) - theta*_ref > x.

    Replica r is seeded base_seed + r and draws one realization of length
    max(n_list); every n is evaluated on its prefix. Batches are merged by
    integer addition, so the table does not depend on the worker count.
    """
    cfg.validate()
    check_compatible(cfg.process, cfg.estimator)
    if cfg.base_seed + cfg.m - 1 >= SEED_MODULUS:
        raise ParameterError(f"base_seed + m - 1 must fit in 64 bits, got base_seed={cfg.base_seed}")
    theta_ref = cfg.theta_star_ref if cfg.theta_star_ref is not None else reference_exponent(cfg.process)
    n_list = tuple(int(n) for n in cfg.n_list)
    x_list = tuple(float(x) for x in cfg.x_list)
    replace(cfg.process, n=max(n_list), seed=cfg.base_seed).validate()

    logger.info("mc-ldp: %s, %s estimator, m=%d, n=%s, x=%s, theta*_ref=%.10g, workers=%d",
                cfg.process.family.value, cfg.estimator.kind.value, cfg.m,
                list(n_list), list(x_list), theta_ref, cfg.workers)

    seeds = [cfg.base_seed + r for r in range(cfg.m)]
    batches = [seeds[i:i + CHUNK_SIZE] for i in range(0, cfg.m, CHUNK_SIZE)]
    counts = np.zeros((len(n_list), len(x_list)), dtype=np.int64)
    insufficient = np.zeros(len(n_list), dtype=np.int64)

    with tqdm(total=cfg.m, desc="replicas", unit="rep", disable=not progress, file=sys.stderr) as bar:
        if cfg.workers == 1:
            for batch in batches:
                c, ins = _run_replicas(cfg.process, cfg.estimator, n_list, x_list, theta_ref, batch, opts)
                counts += c
                insufficient += ins
                bar.update(len(batch))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                futures = {
                    ex.submit(_run_replicas, cfg.process, cfg.estimator, n_list, x_list,
                              theta_ref, batch, opts): len(batch)
                    for batch in batches
                }
                for fut in as_completed(futures):
                    c, ins = fut.result()
                    counts += c
                    insufficient += ins
                    bar.update(futures[fut])

    rows = []
    for i, n in enumerate(n_list):
        if insufficient[i]:
            logger.warning("n=%d: %d of %d replicas had too little data (counted as non-exceedances)",
                           n, insufficient[i], cfg.m)
        for j, x in enumerate(x_list):
            count = int(counts[i, j])
            rows.append(McLdpRow(n=n, x=x, count=count, m=cfg.m, rate=empirical_rate(count, cfg.m, n)))

    return McLdpResult(
        rows=rows,
        theta_star_ref=float(theta_ref),
        m=cfg.m,
        seeds={'base_seed': cfg.base_seed, 'first': seeds[0], 'last': seeds[-1]},
        insufficient={int(n): int(insufficient[i]) for i, n in enumerate(n_list)},
    )


def mc_ldp_table(result: McLdpResult) -> pd.DataFrame:
    return pd.DataFrame(
        [{'n': r.n, 'x': r.x, 'count': r.count, 'm': r.m, 'rate': r.rate} for r in result.rows],
        columns=['n', 'x', 'count', 'm', 'rate'],
    )


# ============================================================================
# RATE CURVES
# ============================================================================

def rate_curve_two_state(alpha: float, beta: float, x_grid: Iterable[float]) -> RateCurve:
    """J(x) of the two-state Markov estimator on an increasing positive grid."""
    xs = [float(x) for x in x_grid]
    if not xs:
        raise ParameterError("x grid must not be empty")
    if any(x <= 0 for x in xs):
        raise ParameterError(f"x grid must be positive, got min {min(xs)}")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ParameterError("x grid must be strictly increasing")
    theta_star = two_state_exponent(alpha, beta)
    curve = RateCurve(
        points=[(x, two_state_J(alpha, beta, x)) for x in xs],
        kind=RateCurveKind.J_TWO_STATE,
        meta={'alpha': alpha, 'beta': beta, 'theta_star': theta_star},
    )
    curve.validate()
    return curve


def convexity_violation(curve: RateCurve, tol: float = 1e-12) -> Optional[Tuple[float, float, float]]:
    """
    First consecutive triple (x1, x2, x3) whose middle value lies above the
    chord through its neighbours; None when the sampled curve is convex.
    """
    xs, ys = curve.xs, curve.values
    for i in range(1, len(xs) - 1):
        y1, y2, y3 = ys[i - 1], ys[i], ys[i + 1]
        if not (np.isfinite(y1) and np.isfinite(y2) and np.isfinite(y3)):
            continue
        x1, x2, x3 = xs[i - 1], xs[i], xs[i + 1]
        chord = ((x3 - x2) * y1 + (x2 - x1) * y3) / (x3 - x1)
        if y2 > chord + tol:
            return float(x1), float(x2), float(x3)
    return None


def rate_curve_table(curve: RateCurve) -> pd.DataFrame:
    return pd.DataFrame(curve.points, columns=['x', curve.value_column])


def curve_metadata(curve: RateCurve) -> Dict[str, object]:
    meta = {'kind': curve.kind.value}
    meta.update(curve.meta)
    return meta
