"""
Data models for the Loynes exponent toolkit.
"""

from dataclasses import dataclass, field, asdict
from typing import List, Optional, Dict, Any, Tuple, Union
from enum import Enum
import math

import numpy as np

from errors import ParameterError
import config


SEED_MODULUS = 2 ** 64


class ProcessFamily(str, Enum):
    """Increment process families."""
    TWO_STATE = "two-state"
    FINITE_MARKOV = "finite-markov"
    DM1 = "dm1"


class TraceKind(str, Enum):
    """What a trace records."""
    INCREMENTS = "increments"
    WAITS = "waits"


class ExponentStatus(str, Enum):
    """How an exponent estimate was obtained."""
    ROOT = "root"
    ZERO = "zero"
    INFINITE = "infinite"
    DIRECT = "direct"  # extremal estimator, no root finding


class EstimatorKind(str, Enum):
    """Estimator families for θ*."""
    BLOCK = "block"
    MARKOV = "markov"
    EXTREMAL = "extremal"


class RateCurveKind(str, Enum):
    """Provenance of a sampled rate curve."""
    J_TWO_STATE = "J_two_state"
    I_HAT = "I_hat"
    MC_LDP = "mc_ldp"


def _check_seed(seed: Any) -> None:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_MODULUS:
        raise ParameterError(f"seed must fit in 64 unsigned bits, got {seed}")


def _check_count(n: Any) -> None:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")


# ============================================================================
# PROCESS SPECS
# ============================================================================

@dataclass(frozen=True)
class TwoStateSpec:
    """Two-state chain on {-1,+1}; alpha = P(-1 -> +1), beta = P(+1 -> -1)."""
    alpha: float
    beta: float
    n: int
    seed: int

    family = ProcessFamily.TWO_STATE

    def validate(self):
        """Raise ParameterError unless 0 < alpha < beta < 1."""
        if not (0.0 < self.alpha < self.beta < 1.0):
            raise ParameterError(
                f"two-state chain needs 0 < alpha < beta < 1 (negative drift), "
                f"got alpha={self.alpha}, beta={self.beta}"
            )
        _check_count(self.n)
        _check_seed(self.seed)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        data = asdict(self)
        data['family'] = self.family.value
        return data


@dataclass(frozen=True)
class FiniteMarkovSpec:
    """Finite irreducible Markov chain emitting f(state)."""
    Pi: Tuple[Tuple[float, ...], ...]
    f: Tuple[float, ...]
    n: int
    seed: int
    init: Optional[int] = None  # None: X(0) drawn from the stationary law

    family = ProcessFamily.FINITE_MARKOV

    def __post_init__(self):
        object.__setattr__(self, 'Pi', tuple(tuple(float(p) for p in row) for row in self.Pi))
        object.__setattr__(self, 'f', tuple(float(v) for v in self.f))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.Pi, dtype=float)

    def validate(self):
        """Raise ParameterError unless Pi is stochastic and irreducible and f is nonzero."""
        from analytic import is_irreducible

        P = self.matrix
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ParameterError(f"Pi must be a nonempty square matrix, got shape {P.shape}")
        m = P.shape[0]
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise ParameterError("Pi must have finite nonnegative entries")
        row_sums = P.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-12):
            raise ParameterError(f"rows of Pi must sum to 1, got row sums {row_sums.tolist()}")
        if not is_irreducible(P):
            raise ParameterError("Pi must be irreducible")
        if len(self.f) != m:
            raise ParameterError(f"f must have {m} values, got {len(self.f)}")
        if any(v == 0.0 or not math.isfinite(v) for v in self.f):
            raise ParameterError(f"f values must be finite and nonzero, got {list(self.f)}")
        if self.init is not None and not (0 <= int(self.init) < m):
            raise ParameterError(f"init must be a state index in [0, {m}), got {self.init}")
        _check_count(self.n)
        _check_seed(self.seed)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            'family': self.family.value,
            'Pi': [list(row) for row in self.Pi],
            'f': list(self.f),
            'n': self.n,
            'seed': self.seed,
            'init': self.init,
        }


@dataclass(frozen=True)
class Dm1Spec:
    """D/M/1 increments X = Exp(alpha) - 1/beta."""
    alpha: float
    beta: float
    n: int
    seed: int
    warmup: int = 0  # draws discarded before the first emitted increment

    family = ProcessFamily.DM1

    def validate(self):
        """Raise ParameterError unless alpha > beta > 0."""
        if not (self.beta > 0.0 and self.alpha > self.beta):
            raise ParameterError(
                f"D/M/1 increments need alpha > beta > 0 (negative drift), "
                f"got alpha={self.alpha}, beta={self.beta}"
            )
        if self.warmup < 0:
            raise ParameterError(f"warmup must be nonnegative, got {self.warmup}")
        _check_count(self.n)
        _check_seed(self.seed)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        data = asdict(self)
        data['family'] = self.family.value
        return data


ProcessSpec = Union[TwoStateSpec, FiniteMarkovSpec, Dm1Spec]


def process_spec_from_dict(data: Dict[str, Any]) -> ProcessSpec:
    """Create a process spec from its dictionary form."""
    data = dict(data)
    family = data.pop('family', None)
    try:
        if family == ProcessFamily.TWO_STATE.value:
            return TwoStateSpec(**data)
        if family == ProcessFamily.FINITE_MARKOV.value:
            return FiniteMarkovSpec(**data)
        if family == ProcessFamily.DM1.value:
            return Dm1Spec(**data)
    except TypeError as e:
        raise ParameterError(f"Invalid {family} spec: {e}")
    raise ParameterError(f"Unknown process family: {family!r}")


# ============================================================================
# TRACES
# ============================================================================

@dataclass(frozen=True, eq=False)
class Trace:
    """Finite sequence of observed increments or waiting times."""
    values: np.ndarray
    kind: TraceKind = TraceKind.INCREMENTS
    origin: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'kind', TraceKind(self.kind))

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def seed(self) -> Optional[int]:
        seed = self.origin.get('seed')
        return int(seed) if seed is not None else None

    def prefix(self, k: int) -> 'Trace':
        """First k values, same kind and origin."""
        return Trace(self.values[:k], self.kind, dict(self.origin))


@dataclass(frozen=True, eq=False)
class BlockedTrace:
    """Non-overlapping block sums Y(i) of B consecutive increments."""
    block_size: int
    blocks: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        blocks = np.array(self.blocks, dtype=float).reshape(-1)
        blocks.setflags(write=False)
        object.__setattr__(self, 'blocks', blocks)

    def __len__(self) -> int:
        return int(self.blocks.shape[0])


# ============================================================================
# ESTIMATES
# ============================================================================

@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    """Empirical transition matrix with 0/0 := 0."""
    states: Tuple[float, ...]
    pi_hat: np.ndarray
    visited: np.ndarray
    counts: Optional[np.ndarray] = None  # None when built from a known matrix

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def fully_visited(self) -> bool:
        return bool(np.all(self.visited))

    @property
    def transitions(self) -> int:
        return int(self.counts.sum()) if self.counts is not None else 0

    @classmethod
    def from_matrix(cls, Pi, states) -> 'TransitionEstimate':
        """Wrap a known stochastic matrix (every state counts as visited)."""
        P = np.array(Pi, dtype=float)
        return cls(
            states=tuple(float(s) for s in states),
            pi_hat=P,
            visited=np.ones(P.shape[0], dtype=bool),
            counts=None,
        )


@dataclass(frozen=True)
class ExponentEstimate:
    """Estimate of Loynes' exponent with diagnostics."""
    value: float
    status: ExponentStatus
    residual: float = float('nan')
    iterations: int = 0
    bracket: Optional[Tuple[float, float]] = None

    def exceeds(self, reference: float, x: float) -> bool:
        """True when value - reference > x; an infinite estimate always exceeds."""
        if self.status == ExponentStatus.INFINITE:
            return True
        return self.value - reference > x

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'value': self.value,
            'status': self.status.value,
            'residual': self.residual,
            'iterations': self.iterations,
        }


@dataclass(frozen=True)
class RootOpts:
    """Root-finder settings for θ*(n) = sup{θ: λ̂(θ) ≤ 0}."""
    tol: float = config.ROOT_TOL
    theta_cap: float = config.THETA_CAP
    max_iter: int = config.ROOT_MAX_ITER
    zero_probe: float = config.ZERO_PROBE


@dataclass(frozen=True)
class SupOpts:
    """Settings for the Legendre supremum over θ."""
    theta_cap: float = config.SUP_THETA_CAP
    xatol: float = config.SUP_XATOL


@dataclass
class RateCurve:
    """Sampled map x -> rate value."""
    points: List[Tuple[float, float]]
    kind: RateCurveKind
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    @property
    def value_column(self) -> str:
        return "J" if self.kind == RateCurveKind.J_TWO_STATE else self.kind.value

    def validate(self):
        """Raise ParameterError unless x is strictly increasing and values are nonnegative."""
        xs = self.xs
        if xs.size > 1 and np.any(np.diff(xs) <= 0):
            raise ParameterError("rate curve x values must be strictly increasing")
        if np.any(self.values < 0):
            raise ParameterError("rate curve values must be nonnegative")


# ============================================================================
# EXPERIMENTS
# ============================================================================

@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and its knobs."""
    kind: EstimatorKind
    block_size: int = 1
    states: Optional[Tuple[float, ...]] = None  # Markov state values; None: inferred
    w0: float = 0.0  # initial wait for the extremal estimator

    def __post_init__(self):
        object.__setattr__(self, 'kind', EstimatorKind(self.kind))
        if self.states is not None:
            object.__setattr__(self, 'states', tuple(float(s) for s in self.states))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            'kind': self.kind.value,
            'block_size': self.block_size,
            'states': list(self.states) if self.states is not None else None,
            'w0': self.w0,
        }


@dataclass(frozen=True)
class ConvergenceConfig:
    """One realization, estimator recomputed on growing prefixes."""
    process: ProcessSpec
    estimator: EstimatorSpec
    n_max: int
    checkpoints: Tuple[int, ...]
    seed: int

    def validate(self):
        """Raise ParameterError on inconsistent checkpoints."""
        _check_count(self.n_max)
        _check_seed(self.seed)
        cps = list(self.checkpoints)
        if not cps:
            raise ParameterError("at least one checkpoint is required")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ParameterError(f"checkpoints must be increasing, got {cps}")
        if cps[0] < 1 or cps[-1] > self.n_max:
            raise ParameterError(f"checkpoints must lie in [1, {self.n_max}], got {cps}")


@dataclass(frozen=True)
class McLdpConfig:
    """Monte Carlo probe of the estimator's large deviations."""
    process: ProcessSpec
    estimator: EstimatorSpec
    m: int
    n_list: Tuple[int, ...]
    x_list: Tuple[float, ...]
    base_seed: int
    theta_star_ref: Optional[float] = None
    workers: int = config.DEFAULT_WORKERS

    def validate(self):
        """Raise ParameterError on invalid replica counts or grids."""
        _check_seed(self.base_seed)
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ParameterError(f"replica count m must be >= 1, got {self.m!r}")
        if not self.n_list:
            raise ParameterError("n_list must not be empty")
        for n in self.n_list:
            _check_count(n)
        xs = list(self.x_list)
        if not xs or any(x <= 0 for x in xs):
            raise ParameterError(f"x_list must hold positive values, got {xs}")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ParameterError(f"x_list must be strictly increasing, got {xs}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class ConvergenceRow:
    """Estimate at one checkpoint of a realization."""
    n: int
    estimate: float
    status: str


@dataclass(frozen=True)
class McLdpRow:
    """Exceedance count and empirical rate for one (n, x)."""
    n: int
    x: float
    count: int
    m: int
    rate: float


@dataclass
class McLdpResult:
    """Table of empirical exceedance rates."""
    rows: List[McLdpRow]
    theta_star_ref: float
    m: int
    seeds: Dict[str, int]
    insufficient: Dict[int, int] = field(default_factory=dict)

    def counts(self, n: int) -> List[int]:
        return [row.count for row in self.rows if row.n == n]

    def rates(self, n: int) -> List[float]:
        return [row.rate for row in self.rows if row.n == n]


@dataclass
class RunManifest:
    """Everything needed to reproduce a command-line run."""
    command: List[str]
    parameters: Dict[str, Any]
    base_seed: Optional[int]
    version: str = config.ARTIFACT_VERSION
    outputs: List[str] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        """Create from dictionary."""
        return cls(
            command=list(data.get('command', [])),
            parameters=dict(data.get('parameters', {})),
            base_seed=data.get('base_seed'),
            version=data.get('version', config.ARTIFACT_VERSION),
            outputs=list(data.get('outputs', [])),
            notes=dict(data.get('notes', {})),
        )
