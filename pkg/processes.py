"""
Increment generators for the two-state, finite Markov and D/M/1 families.

Every sampler is a pure function of its spec: numpy's PCG64 generator is seeded
with spec.seed, so the same spec always yields the same trace.

Markov emission convention: X(0) is the initial state and is not emitted; the
trace holds f(X(1)), ..., f(X(n)). When no initial state is given, X(0) is drawn
from the stationary law using the first uniform of the stream.
"""

import logging

import numpy as np

import storage
from analytic import stationary_distribution, two_state_matrix
from errors import ParameterError
from models import (
    Dm1Spec, FiniteMarkovSpec, ProcessSpec, Trace, TraceKind, TwoStateSpec,
)

logger = logging.getLogger(__name__)

TWO_STATE_VALUES = (-1.0, 1.0)


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit generator (PCG64) for a seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def two_state_as_finite_markov(spec: TwoStateSpec) -> FiniteMarkovSpec:
    """The two-state chain written as a finite Markov spec on (-1, +1)."""
    return FiniteMarkovSpec(
        Pi=two_state_matrix(spec.alpha, spec.beta).tolist(),
        f=TWO_STATE_VALUES,
        n=spec.n,
        seed=spec.seed,
        init=None,
    )


def _markov_path(P: np.ndarray, init, n: int, rng: np.random.Generator) -> np.ndarray:
    """State indices X(1..n) of a chain started at init (or stationary when None)."""
    cumulative = np.cumsum(P, axis=1)
    cumulative[:, -1] = 1.0
    if init is None:
        phi = np.cumsum(stationary_distribution(P))
        phi[-1] = 1.0
        state = int(np.searchsorted(phi, rng.random(), side='right'))
    else:
        state = int(init)
    uniforms = rng.random(n)
    path = np.empty(n, dtype=np.int64)
    for k in range(n):
        state = int(np.searchsorted(cumulative[state], uniforms[k], side='right'))
        path[k] = state
    return path


def sample_finite_markov(spec: FiniteMarkovSpec) -> Trace:
    """Trace of f(X(1)), ..., f(X(n)) for a finite irreducible chain."""
    spec.validate()
    logger.debug("sampling finite Markov chain M=%d n=%d seed=%d", len(spec.f), spec.n, spec.seed)
    rng = make_rng(spec.seed)
    path = _markov_path(spec.matrix, spec.init, spec.n, rng)
    values = np.asarray(spec.f, dtype=float)[path]
    return Trace(values, TraceKind.INCREMENTS, spec.to_dict())


def sample_two_state(spec: TwoStateSpec) -> Trace:
    """
    Two-state chain on {-1, +1} started from its stationary law.

    Uses exactly the random stream of the equivalent finite Markov spec, so both
    samplers return identical traces for the same seed.
    """
    spec.validate()
    trace = sample_finite_markov(two_state_as_finite_markov(spec))
    return Trace(trace.values, TraceKind.INCREMENTS, spec.to_dict())


def sample_dm1(spec: Dm1Spec) -> Trace:
    """
    i.i.d. D/M/1 increments X = E/alpha - 1/beta, E standard exponential.

    E = -log U with U = 1 - uniform in (0, 1], so log 0 never occurs.
    The first `warmup` draws are discarded.
    """
    spec.validate()
    logger.debug("sampling D/M/1 increments alpha=%g beta=%g n=%d seed=%d",
                 spec.alpha, spec.beta, spec.n, spec.seed)
    rng = make_rng(spec.seed)
    u = 1.0 - rng.random(spec.warmup + spec.n)
    values = -np.log(u[spec.warmup:]) / spec.alpha - 1.0 / spec.beta
    return Trace(values, TraceKind.INCREMENTS, spec.to_dict())


def sample(spec: ProcessSpec) -> Trace:
    """Dispatch on the spec's family."""
    if isinstance(spec, TwoStateSpec):
        return sample_two_state(spec)
    if isinstance(spec, FiniteMarkovSpec):
        return sample_finite_markov(spec)
    if isinstance(spec, Dm1Spec):
        return sample_dm1(spec)
    raise ParameterError(f"Unsupported process spec: {type(spec).__name__}")


def state_values(spec: ProcessSpec):
    """Sorted distinct values a finite-valued process can emit; None for D/M/1."""
    if isinstance(spec, TwoStateSpec):
        return TWO_STATE_VALUES
    if isinstance(spec, FiniteMarkovSpec):
        return tuple(sorted(set(spec.f)))
    return None


def load_trace(path, kind=TraceKind.INCREMENTS) -> Trace:
    """Ingest an external trace CSV (see storage.load_trace)."""
    return storage.load_trace(path, kind)
