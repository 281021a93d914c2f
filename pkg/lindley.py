"""
Deterministic transforms of traces: Lindley recursion, partial sums, block sums.
"""

import logging
import math

import numpy as np

from errors import InsufficientDataError, ParameterError
from models import BlockedTrace, Trace, TraceKind

logger = logging.getLogger(__name__)


def _require_increments(trace: Trace):
    if trace.kind != TraceKind.INCREMENTS:
        raise ParameterError(f"expected an increments trace, got kind={trace.kind.value}")


def lindley_recursion(increments: Trace, w0: float = 0.0) -> Trace:
    """
    Waiting times W(k) = max(W(k-1) + X(k), 0) for k = 1..n with W(0) = w0.

    Evaluated through the reflection identity
    W(k) = S(k) - min(-w0, min_{j<=k} S(j)), S the partial sums, so every
    output is >= 0 and paths from different w0 agree bit for bit once the
    larger one has hit zero.
    """
    _require_increments(increments)
    if not (math.isfinite(w0) and w0 >= 0.0):
        raise ParameterError(f"initial wait w0 must be finite and >= 0, got {w0}")
    S = np.cumsum(increments.values)
    floor = np.minimum(np.minimum.accumulate(S), -float(w0))
    waits = S - floor
    origin = dict(increments.origin)
    origin['w0'] = float(w0)
    return Trace(waits, TraceKind.WAITS, origin)


def partial_sums(increments: Trace) -> np.ndarray:
    """S(k) = X(1) + ... + X(k), k = 1..n."""
    _require_increments(increments)
    if len(increments) == 0:
        raise InsufficientDataError("partial sums need a nonempty trace")
    return np.cumsum(increments.values)


def block_sums(increments: Trace, B: int) -> BlockedTrace:
    """
    Non-overlapping block sums of B consecutive increments.

    The trailing n mod B increments are dropped and reported.
    """
    _require_increments(increments)
    if isinstance(B, bool) or not isinstance(B, (int, np.integer)) or B < 1:
        raise ParameterError(f"block size B must be a positive integer, got {B!r}")
    n = len(increments)
    if n < B:
        raise InsufficientDataError(f"trace of length {n} is shorter than block size {B}")
    K = n // B
    blocks = increments.values[:K * B].reshape(K, B).sum(axis=1)
    dropped = n - K * B
    if dropped:
        logger.debug("block_sums B=%d dropped %d trailing increments", B, dropped)
    return BlockedTrace(block_size=int(B), blocks=blocks, dropped=dropped)


def loynes_supremum(increments: Trace) -> float:
    """max over k >= 0 of S(k), with the empty sum S(0) = 0."""
    S = partial_sums(increments)
    return max(0.0, float(S.max()))


def reversed_waits(increments: Trace) -> Trace:
    """
    Lindley recursion from w0 = 0 driven by the time-reversed trace.

    Its last value equals loynes_supremum of the original trace.
    """
    _require_increments(increments)
    flipped = Trace(increments.values[::-1], TraceKind.INCREMENTS, dict(increments.origin))
    return lindley_recursion(flipped, 0.0)
