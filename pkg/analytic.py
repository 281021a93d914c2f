"""
Closed-form and numerically exact quantities: Perron roots, stationary laws,
the two-state example (exponent, H, J) and the D/M/1 exponent.
"""

import logging
import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import expit, xlogy

import config
from errors import ParameterError

logger = logging.getLogger(__name__)


# ============================================================================
# MATRICES
# ============================================================================

def is_irreducible(M) -> bool:
    """True when the support digraph of M is strongly connected."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        return False
    n_components, _ = connected_components(
        csr_matrix(A != 0), directed=True, connection='strong'
    )
    return n_components == 1


def _check_nonnegative_square(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ParameterError(f"expected a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("matrix entries must be finite")
    if np.any(A < 0):
        raise ParameterError("matrix entries must be nonnegative")
    return A


def log_perron_root(A: np.ndarray, squarings: int = config.POWER_SQUARINGS) -> float:
    """
    log of the Perron root of an irreducible nonnegative matrix, without input checks.

    Repeated squaring in log scale: with A^(2^k) = exp(2^k L_k) M_k and max M_k = 1,
    L_(k+1) = L_k + log max(M_k M_k) / 2^(k+1). Products of nonnegative matrices
    keep every entry to relative accuracy, so the result does not depend on the
    size of rho. Returns -inf for a nilpotent matrix.
    """
    n = A.shape[0]
    if n == 1:
        return math.log(A[0, 0]) if A[0, 0] > 0.0 else -math.inf
    scale = float(A.max())
    if scale == 0.0:
        return -math.inf
    M = A / scale
    log_rho = math.log(scale)
    weight = 1.0
    for _ in range(squarings):
        S = M @ M
        peak = float(S.max())
        if peak == 0.0:
            return -math.inf
        weight *= 0.5
        log_rho += weight * math.log(peak)
        S /= peak
        if np.allclose(S, M, rtol=config.POWER_RTOL, atol=0.0):
            # fixed point: every later step adds the same log(peak) with halving weight
            return log_rho + weight * math.log(peak)
        M = S
    return log_rho + weight * math.log(float(M.sum(axis=1).max()))


def perron_root(A: np.ndarray) -> float:
    """Perron root of an irreducible nonnegative matrix, without input checks."""
    if A.shape[0] == 1:
        return float(A[0, 0])
    return math.exp(log_perron_root(A))


def spectral_radius(M) -> float:
    """
    Spectral radius of a square nonnegative irreducible matrix.

    A direct sum of irreducible blocks (no support edges between strongly
    connected components, e.g. the identity) is accepted: its radius is the
    largest block radius. Raises ParameterError for negative entries or any
    other reducible support.
    """
    A = _check_nonnegative_square(M)
    n_components, labels = connected_components(
        csr_matrix(A != 0), directed=True, connection='strong'
    )
    if n_components == 1:
        return perron_root(A)
    rows, cols = np.nonzero(A)
    if np.any(labels[rows] != labels[cols]):
        raise ParameterError("spectral_radius needs an irreducible matrix (support is reducible)")
    radii = []
    for label in range(n_components):
        idx = np.flatnonzero(labels == label)
        radii.append(perron_root(A[np.ix_(idx, idx)]))
    return max(radii)


def stationary_distribution(Pi) -> np.ndarray:
    """Stationary law phi (phi Pi = phi, sum phi = 1) of an irreducible stochastic matrix."""
    P = _check_nonnegative_square(Pi)
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    system = P.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        phi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        raise ParameterError("stationary law is not unique (matrix not irreducible)")
    phi = np.clip(phi, 0.0, None)
    return phi / phi.sum()


def tilted_matrix(Pi, f: Sequence[float], theta: float) -> np.ndarray:
    """Pi D_theta with D_theta = diag(exp(theta f(i)))."""
    P = np.asarray(Pi, dtype=float)
    return P * np.exp(theta * np.asarray(f, dtype=float))[np.newaxis, :]


def log_tilted_radius(Pi, f: Sequence[float], theta: float) -> float:
    """
    log rho(Pi D_theta), scaled so exp never overflows.

    With c = max f (theta >= 0) or min f (theta < 0):
    log rho(Pi D_theta) = theta c + log rho(Pi diag(exp(theta (f - c)))).
    """
    values = np.asarray(f, dtype=float)
    c = float(values.max()) if theta >= 0 else float(values.min())
    return theta * c + log_perron_root(tilted_matrix(Pi, values - c, theta))


# ============================================================================
# TWO-STATE EXAMPLE
# ============================================================================

def _check_two_state(alpha: float, beta: float):
    if not (0.0 < alpha < beta < 1.0):
        raise ParameterError(
            f"two-state example needs 0 < alpha < beta < 1, got alpha={alpha}, beta={beta}"
        )


def two_state_matrix(alpha: float, beta: float) -> np.ndarray:
    """Transition matrix on states (-1, +1)."""
    return np.array([[1.0 - alpha, alpha], [beta, 1.0 - beta]])


def two_state_exponent(alpha: float, beta: float) -> float:
    """theta* = log((1 - alpha) / (1 - beta))."""
    _check_two_state(alpha, beta)
    return math.log1p(-alpha) - math.log1p(-beta)


def two_state_H(alpha: float, beta: float, a: float, b: float) -> float:
    """
    Rate function of the empirical transition matrix at A(a, b).

    Stationary-weighted relative entropy of the rows of A against Pi; +inf
    outside a, b in (0, 1).
    """
    _check_two_state(alpha, beta)
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        return math.inf
    row_minus = xlogy(1.0 - a, (1.0 - a) / (1.0 - alpha)) + xlogy(a, a / alpha)
    row_plus = xlogy(b, b / beta) + xlogy(1.0 - b, (1.0 - b) / (1.0 - beta))
    value = (b / (a + b)) * row_minus + (a / (a + b)) * row_plus
    return max(0.0, float(value))


def two_state_J(alpha: float, beta: float, x: float) -> float:
    """
    Rate function of theta*(n) for the Markov estimator:
    J(x) = inf over a of H(A(a, 1 - (1 - a) e^{-x})).

    The feasible a lie in (max(0, 1 - e^x), 1). They are scanned on a logit grid
    (dense near both ends), then the best bracket is refined with bounded Brent.
    """
    _check_two_state(alpha, beta)
    if math.isnan(x) or math.isinf(x):
        return math.inf
    lo = max(0.0, -math.expm1(x))
    width = 1.0 - lo
    if width <= 0.0:
        return math.inf
    decay = math.exp(-x)

    def objective(u: float) -> float:
        a = lo + width * float(expit(u))
        one_minus_a = width * float(expit(-u))
        b = 1.0 - one_minus_a * decay
        return two_state_H(alpha, beta, a, b)

    span = 36.0
    grid = np.linspace(-span, span, config.J_SCAN_POINTS)
    scan = np.array([objective(u) for u in grid])
    if not np.any(np.isfinite(scan)):
        return math.inf
    best = int(np.nanargmin(scan))
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, grid.size - 1)]
    refined = minimize_scalar(
        objective, bounds=(left, right), method='bounded',
        options={'xatol': config.J_REFINE_WIDTH},
    )
    value = min(float(scan[best]), float(refined.fun))
    return max(0.0, value)


# ============================================================================
# D/M/1
# ============================================================================

def dm1_residual(alpha: float, beta: float, theta: float) -> float:
    """log(alpha / (alpha - theta)) - theta / beta."""
    return -math.log1p(-theta / alpha) - theta / beta


def dm1_exponent(alpha: float, beta: float) -> float:
    """
    Positive root theta* < alpha of log(alpha / (alpha - theta)) - theta / beta = 0.

    Solved in s = log(alpha / (alpha - theta)), where the equation reads
    s = r (1 - e^{-s}) with r = alpha / beta > 1; theta = alpha (1 - e^{-s}).
    """
    if not (beta > 0.0 and alpha > beta):
        raise ParameterError(
            f"D/M/1 exponent needs alpha > beta > 0, got alpha={alpha}, beta={beta}"
        )
    r = alpha / beta

    def h(s: float) -> float:
        return s + r * math.expm1(-s)

    s_lo = 1e-3 * (r - 1.0) / r
    s_hi = r + 1.0
    s_star = brentq(h, s_lo, s_hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    theta = -alpha * math.expm1(-s_star)
    if theta >= alpha:
        theta = math.nextafter(alpha, 0.0)
    logger.debug("dm1 exponent alpha=%g beta=%g -> %.17g (residual %.3g)",
                 alpha, beta, theta, dm1_residual(alpha, beta, theta))
    return theta
