"""
Estimator comparison service: every estimator family on one trace.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from errors import ConfigurationError, InsufficientDataError
from estimators import block_exponent, extremal_estimate, markov_exponent_from_trace
from lindley import lindley_recursion
from models import EstimatorKind, ExponentEstimate, RootOpts, Trace

logger = logging.getLogger(__name__)


def _delta(value: float, reference: Optional[float]) -> Dict[str, float]:
    if reference is None or not math.isfinite(value):
        return {'delta': math.nan, 'delta_pct': math.nan}
    delta = value - reference
    delta_pct = (delta / reference * 100) if reference > 0 else math.nan
    return {'delta': delta, 'delta_pct': delta_pct}


def _row(kind: EstimatorKind, n: int, estimate: Optional[ExponentEstimate],
         reference: Optional[float], note: str = "") -> Dict[str, Any]:
    if estimate is None:
        return {
            'estimator': kind.value, 'n': n, 'value': math.nan, 'status': 'unavailable',
            'residual': math.nan, 'delta': math.nan, 'delta_pct': math.nan, 'note': note,
        }
    row = {
        'estimator': kind.value,
        'n': n,
        'value': estimate.value,
        'status': estimate.status.value,
        'residual': estimate.residual,
    }
    row.update(_delta(estimate.value, reference))
    row['note'] = note
    return row


def compare_estimators(increments: Trace, B: int = 1, states: Optional[Sequence[float]] = None,
                       theta_star_ref: Optional[float] = None, w0: float = 0.0,
                       opts: RootOpts = RootOpts()) -> Dict[str, Any]:
    """
    Run the block, Markov and extremal estimators on one increments trace.

    The Markov estimator is skipped (status 'unavailable') when the trace is
    not finite-valued or leaves some state unvisited. Deltas are taken against
    theta_star_ref when given.

    Returns:
        {'rows': [...], 'reference': float or None, 'n': int}
    """
    n = len(increments)
    rows: List[Dict[str, Any]] = []

    try:
        rows.append(_row(EstimatorKind.BLOCK, n, block_exponent(increments, B, opts),
                         theta_star_ref, note=f"B={B}"))
    except InsufficientDataError as e:
        rows.append(_row(EstimatorKind.BLOCK, n, None, theta_star_ref, note=str(e)))

    try:
        rows.append(_row(EstimatorKind.MARKOV, n,
                         markov_exponent_from_trace(increments, states, opts), theta_star_ref))
    except (ConfigurationError, InsufficientDataError) as e:
        logger.info("Markov estimator skipped: %s", e)
        rows.append(_row(EstimatorKind.MARKOV, n, None, theta_star_ref, note=str(e)))

    try:
        waits = lindley_recursion(increments, w0)
        rows.append(_row(EstimatorKind.EXTREMAL, n, extremal_estimate(waits), theta_star_ref,
                         note=f"w0={w0:g}"))
    except InsufficientDataError as e:
        rows.append(_row(EstimatorKind.EXTREMAL, n, None, theta_star_ref, note=str(e)))

    return {'rows': rows, 'reference': theta_star_ref, 'n': n}


def comparison_table(comparison: Dict[str, Any]) -> pd.DataFrame:
    return pd.DataFrame(
        comparison['rows'],
        columns=['estimator', 'n', 'value', 'status', 'residual', 'delta', 'delta_pct', 'note'],
    )
