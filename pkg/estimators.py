"""
Estimators of Loynes' exponent theta* and of rate functions.

Three families:
    block     sCGF MLE on block sums, lambda(theta) = (1/B) log mean exp(theta Y)
    markov    empirical transition matrix, lambda(theta) = log rho(Pi_hat D_theta)
    extremal  log(n) / max(1, W(1), ..., W(n)) on waiting times

The first two share the root finder exponent_from_scgf:
theta*(n) = sup{theta : lambda(theta) <= 0}.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp

from analytic import is_irreducible, log_tilted_radius, stationary_distribution
from errors import (
    ConfigurationError, InsufficientDataError, ParameterError, StateDomainError,
)
from lindley import block_sums
from models import (
    BlockedTrace, EstimatorKind, ExponentEstimate, ExponentStatus, RateCurve,
    RateCurveKind, RootOpts, SupOpts, Trace, TraceKind, TransitionEstimate,
)

logger = logging.getLogger(__name__)

# A trace with more distinct values than this is not treated as finite-valued
MAX_INFERRED_STATES = 64
STATE_MATCH_TOL = 1e-12


# ============================================================================
# sCGF EVALUATORS
# ============================================================================

def block_scgf(blocked: BlockedTrace, theta: float) -> float:
    """
    (1/B) log((1/K) sum_i exp(theta Y(i))), evaluated by log-sum-exp.

    Exactly 0 at theta = 0.
    """
    K = len(blocked)
    if K == 0:
        raise InsufficientDataError("block sCGF needs at least one block")
    if theta == 0:
        return 0.0
    return float((logsumexp(theta * blocked.blocks) - math.log(K)) / blocked.block_size)


def _check_state_values(f: Sequence[float], size: int) -> np.ndarray:
    values = np.asarray(f, dtype=float)
    if values.shape != (size,):
        raise ParameterError(f"value map must have {size} entries, got {values.shape}")
    if np.any(values == 0.0) or not np.all(np.isfinite(values)):
        raise ParameterError(f"state values must be finite and nonzero, got {values.tolist()}")
    return values


def _require_usable(est: TransitionEstimate):
    if not est.fully_visited:
        missing = [s for s, seen in zip(est.states, est.visited) if not seen]
        raise InsufficientDataError(f"states never left in the trace: {missing}")
    if not is_irreducible(est.pi_hat):
        raise InsufficientDataError("empirical transition matrix is not irreducible")


def markov_scgf(est: TransitionEstimate, f: Sequence[float], theta: float) -> float:
    """log rho(Pi_hat D_theta), D_theta = diag(exp(theta f(i)))."""
    _require_usable(est)
    values = _check_state_values(f, est.size)
    return log_tilted_radius(est.pi_hat, values, theta)


@dataclass(frozen=True, eq=False)
class ScgfEvaluator:
    """
    theta -> lambda_hat(n, theta) with its provenance.

    Build with block_evaluator or markov_evaluator; those validate the data
    once so evaluation inside root finding stays cheap.
    """
    source: EstimatorKind
    blocked: Optional[BlockedTrace] = None
    estimate: Optional[TransitionEstimate] = None
    f: Optional[Tuple[float, ...]] = None

    def __call__(self, theta: float) -> float:
        if self.source == EstimatorKind.BLOCK:
            return block_scgf(self.blocked, theta)
        return log_tilted_radius(self.estimate.pi_hat, self.f, theta)

    @property
    def drift(self) -> float:
        """Right derivative at 0: the empirical mean growth rate per step."""
        if self.source == EstimatorKind.BLOCK:
            return float(np.mean(self.blocked.blocks)) / self.blocked.block_size
        phi = stationary_distribution(self.estimate.pi_hat)
        return float(phi @ np.asarray(self.f, dtype=float))

    @property
    def flat(self) -> bool:
        """True when lambda_hat vanishes identically (all blocks zero)."""
        if self.source == EstimatorKind.BLOCK:
            return bool(np.all(self.blocked.blocks == 0.0))
        return False

    def describe(self) -> dict:
        if self.source == EstimatorKind.BLOCK:
            return {'source': 'block', 'B': self.blocked.block_size,
                    'blocks': len(self.blocked), 'dropped': self.blocked.dropped}
        return {'source': 'markov', 'states': list(self.estimate.states),
                'transitions': self.estimate.transitions}


def block_evaluator(blocked: BlockedTrace) -> ScgfEvaluator:
    if len(blocked) == 0:
        raise InsufficientDataError("block sCGF needs at least one block")
    return ScgfEvaluator(source=EstimatorKind.BLOCK, blocked=blocked)


def markov_evaluator(est: TransitionEstimate, f: Optional[Sequence[float]] = None) -> ScgfEvaluator:
    """Markov sCGF evaluator; f defaults to the state values themselves."""
    _require_usable(est)
    values = _check_state_values(est.states if f is None else f, est.size)
    return ScgfEvaluator(
        source=EstimatorKind.MARKOV, estimate=est, f=tuple(float(v) for v in values)
    )


def scgf_curve(scgf: ScgfEvaluator, thetas: Iterable[float]) -> pd.DataFrame:
    """Table with columns theta, lambda_hat."""
    grid = [float(t) for t in thetas]
    return pd.DataFrame({'theta': grid, 'lambda_hat': [scgf(t) for t in grid]})


# ============================================================================
# ROOT FINDING
# ============================================================================

def exponent_from_scgf(scgf: ScgfEvaluator, opts: RootOpts = RootOpts()) -> ExponentEstimate:
    """
    theta*(n) = sup{theta : lambda_hat(theta) <= 0}.

    - all blocks zero, or lambda_hat <= 0 on the whole search range: infinite
    - nonnegative drift (lambda_hat > 0 right of 0): zero
    - otherwise the positive root, bracketed by doubling from 1 and solved
      with Brent's method
    """
    if scgf.flat:
        logger.info("flat sCGF: exponent is infinite")
        return ExponentEstimate(math.inf, ExponentStatus.INFINITE)

    if scgf.drift >= 0.0:
        logger.info("nonnegative drift %.6g: exponent is zero", scgf.drift)
        return ExponentEstimate(0.0, ExponentStatus.ZERO, residual=0.0)

    iterations = 0
    theta_lo = 0.0
    theta_hi = 1.0
    value = scgf(theta_hi)
    while value <= 0.0:
        theta_lo = theta_hi
        theta_hi *= 2.0
        iterations += 1
        if theta_hi > opts.theta_cap:
            logger.info("lambda_hat <= 0 up to theta=%g: exponent is infinite", theta_lo)
            return ExponentEstimate(math.inf, ExponentStatus.INFINITE, iterations=iterations)
        value = scgf(theta_hi)

    if theta_lo == 0.0:
        # root below 1: halve until lambda_hat <= 0
        probe = theta_hi
        while True:
            probe *= 0.5
            iterations += 1
            if probe < opts.zero_probe:
                logger.info("lambda_hat > 0 down to theta=%g: exponent is zero", probe)
                return ExponentEstimate(0.0, ExponentStatus.ZERO, residual=0.0,
                                        iterations=iterations)
            if scgf(probe) <= 0.0:
                theta_lo = probe
                break
            theta_hi = probe

    logger.debug("root bracket [%.17g, %.17g]", theta_lo, theta_hi)
    root, info = brentq(
        scgf, theta_lo, theta_hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps,
        maxiter=opts.max_iter, full_output=True, disp=False,
    )
    residual = abs(scgf(root))
    if not info.converged or residual > opts.tol:
        logger.warning("root finder: converged=%s residual=%.3g after %d iterations",
                       info.converged, residual, info.iterations)
    return ExponentEstimate(
        value=float(root),
        status=ExponentStatus.ROOT,
        residual=residual,
        iterations=iterations + info.iterations,
        bracket=(theta_lo, theta_hi),
    )


def block_exponent(trace: Trace, B: int = 1, opts: RootOpts = RootOpts()) -> ExponentEstimate:
    """Block estimator theta*(n) on an increments trace."""
    return exponent_from_scgf(block_evaluator(block_sums(trace, B)), opts)


# ============================================================================
# MARKOV ESTIMATOR
# ============================================================================

def infer_states(trace: Trace) -> Tuple[float, ...]:
    """Sorted distinct values of a finite-valued trace."""
    states = np.unique(trace.values)
    if states.size > MAX_INFERRED_STATES:
        raise ConfigurationError(
            f"trace has {states.size} distinct values; the Markov estimator needs a "
            f"finite-valued trace (at most {MAX_INFERRED_STATES} states) or an explicit state list"
        )
    return tuple(float(s) for s in states)


def markov_mle(trace: Trace, states: Sequence[float]) -> TransitionEstimate:
    """
    Empirical transition matrix from the n - 1 pairs (X(k-1), X(k)), k = 2..n.

    Rows of states never left are all zero (0/0 := 0) and flagged unvisited.
    """
    state_arr = np.asarray(states, dtype=float)
    if state_arr.ndim != 1 or state_arr.size == 0:
        raise ParameterError("state list must be a nonempty sequence")
    if np.unique(state_arr).size != state_arr.size:
        raise ParameterError(f"state list has duplicates: {state_arr.tolist()}")
    if len(trace) < 2:
        raise InsufficientDataError("Markov MLE needs at least 2 observations")

    M = state_arr.size
    distance = np.abs(trace.values[:, np.newaxis] - state_arr[np.newaxis, :])
    index = np.argmin(distance, axis=1)
    matched = distance[np.arange(len(trace)), index] <= STATE_MATCH_TOL * np.maximum(1.0, np.abs(state_arr[index]))
    if not np.all(matched):
        bad = int(np.argmin(matched))
        raise StateDomainError(
            f"trace value {trace.values[bad]!r} at position {bad + 1} is not in states {state_arr.tolist()}"
        )

    counts = np.bincount(index[:-1] * M + index[1:], minlength=M * M).reshape(M, M)
    totals = counts.sum(axis=1)
    visited = totals > 0
    pi_hat = np.zeros((M, M), dtype=float)
    np.divide(counts, totals[:, np.newaxis], out=pi_hat, where=visited[:, np.newaxis])
    if not np.all(visited):
        logger.debug("Markov MLE: unvisited states %s", state_arr[~visited].tolist())
    return TransitionEstimate(
        states=tuple(float(s) for s in state_arr),
        pi_hat=pi_hat,
        visited=visited,
        counts=counts,
    )


def markov_exponent(est: TransitionEstimate, f: Optional[Sequence[float]] = None,
                    opts: RootOpts = RootOpts()) -> ExponentEstimate:
    """Markov estimator theta*(n) from a transition estimate."""
    return exponent_from_scgf(markov_evaluator(est, f), opts)


def markov_exponent_from_trace(trace: Trace, states: Optional[Sequence[float]] = None,
                               opts: RootOpts = RootOpts()) -> ExponentEstimate:
    """Markov estimator on a finite-valued increments trace; states inferred when None."""
    if states is None:
        states = infer_states(trace)
    return markov_exponent(markov_mle(trace, states), None, opts)


# ============================================================================
# EXTREMAL ESTIMATOR
# ============================================================================

def extremal_exponent(waits: Trace) -> float:
    """log(n) / max(1, W(1), ..., W(n))."""
    if waits.kind != TraceKind.WAITS:
        raise ParameterError(f"extremal estimator needs a waits trace, got kind={waits.kind.value}")
    n = len(waits)
    if n < 2:
        raise InsufficientDataError(f"extremal estimator needs n >= 2, got n={n}")
    return math.log(n) / max(1.0, float(waits.values.max()))


def extremal_estimate(waits: Trace) -> ExponentEstimate:
    return ExponentEstimate(extremal_exponent(waits), ExponentStatus.DIRECT)


# ============================================================================
# RATE FUNCTION ESTIMATOR
# ============================================================================

def legendre_rate(scgf: ScgfEvaluator, x: float, opts: SupOpts = SupOpts()) -> float:
    """
    sup over theta in [-cap, cap] of theta x - lambda_hat(theta).

    The map is concave, so bounded Brent finds the interior maximum. When the
    best value sits at an end of the range and is still rising there
    (compared with half the cap) the supremum is reported as +inf.
    """
    cap = opts.theta_cap

    def gain(theta: float) -> float:
        return theta * x - scgf(theta)

    result = minimize_scalar(
        lambda t: -gain(t), bounds=(-cap, cap), method='bounded',
        options={'xatol': opts.xatol, 'maxiter': 500},
    )
    value = -float(result.fun)
    theta_best = float(result.x)
    for end in (cap, -cap):
        end_value = gain(end)
        if end_value >= value or abs(theta_best - end) <= 1e-6 * cap:
            if end_value - gain(end / 2.0) > 1e-9 * (1.0 + abs(end_value)):
                return math.inf
            value = max(value, end_value)
    value = max(value, gain(0.0))
    return max(0.0, value)


def legendre_rate_curve(scgf: ScgfEvaluator, x_grid: Iterable[float],
                        opts: SupOpts = SupOpts()) -> RateCurve:
    """I_hat(n, x) sampled on an increasing grid."""
    xs = [float(x) for x in x_grid]
    curve = RateCurve(
        points=[(x, legendre_rate(scgf, x, opts)) for x in xs],
        kind=RateCurveKind.I_HAT,
        meta=scgf.describe(),
    )
    curve.validate()
    return curve
