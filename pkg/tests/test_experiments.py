import math

import numpy as np
import pytest

from errors import ConfigurationError, ParameterError
from estimators import block_exponent, extremal_exponent
from experiments import (
    INSUFFICIENT, check_compatible, convergence_table, convexity_violation,
    empirical_rate, estimate_prefixes, mc_ldp_table, rate_curve_table,
    rate_curve_two_state, reference_exponent, run_convergence, run_mc_ldp,
)
from helpers import (
    ALPHA, BETA, DM1_ALPHA, DM1_BETA, THETA_DM1, THETA_TWO_STATE, increments,
)
from lindley import lindley_recursion
from models import (
    ConvergenceConfig, Dm1Spec, EstimatorKind, EstimatorSpec, FiniteMarkovSpec,
    McLdpConfig, RateCurve, RateCurveKind, TwoStateSpec,
)
from processes import sample

BLOCK = EstimatorSpec(EstimatorKind.BLOCK)
MARKOV = EstimatorSpec(EstimatorKind.MARKOV)
EXTREMAL = EstimatorSpec(EstimatorKind.EXTREMAL)

NEGATIVE_CONSTANT = FiniteMarkovSpec(Pi=[[1.0]], f=[-1.0], n=1, seed=0)


def dm1(n=1, seed=0):
    return Dm1Spec(DM1_ALPHA, DM1_BETA, n=n, seed=seed)


def two_state(n=1, seed=0):
    return TwoStateSpec(ALPHA, BETA, n=n, seed=seed)


# ---------------------------------------------------------------------------
# two-state rate curve
# ---------------------------------------------------------------------------

def test_rate_curve_two_state_shape():
    grid = np.sort(np.append(np.linspace(0.01, 1.5, 150), THETA_TWO_STATE))
    curve = rate_curve_two_state(ALPHA, BETA, grid)
    assert curve.kind == RateCurveKind.J_TWO_STATE
    assert curve.meta['theta_star'] == pytest.approx(THETA_TWO_STATE)

    values = dict(curve.points)
    assert values[THETA_TWO_STATE] <= 1e-8
    others = [v for x, v in curve.points if x != THETA_TWO_STATE]
    assert min(others) > 0.0

    witness = convexity_violation(curve)
    assert witness is not None
    x1, x2, x3 = witness
    assert x1 < x2 < x3
    assert x2 > THETA_TWO_STATE


def test_rate_curve_two_state_rejects_bad_grids():
    with pytest.raises(ParameterError):
        rate_curve_two_state(ALPHA, BETA, [])
    with pytest.raises(ParameterError):
        rate_curve_two_state(ALPHA, BETA, [0.0, 0.5])
    with pytest.raises(ParameterError):
        rate_curve_two_state(ALPHA, BETA, [0.5, 0.2])
    with pytest.raises(ParameterError):
        rate_curve_two_state(BETA, ALPHA, [0.5])


def test_convexity_violation_on_convex_and_concave_samples():
    xs = np.linspace(0.0, 2.0, 21)
    convex = RateCurve(points=[(x, x * x) for x in xs], kind=RateCurveKind.I_HAT)
    assert convexity_violation(convex) is None
    concave = RateCurve(points=[(x, math.sqrt(x)) for x in xs], kind=RateCurveKind.I_HAT)
    assert convexity_violation(concave) == pytest.approx((0.0, 0.1, 0.2))


def test_convexity_violation_skips_infinite_values():
    curve = RateCurve(points=[(0.0, 0.0), (1.0, 5.0), (2.0, math.inf), (3.0, 1.0)],
                      kind=RateCurveKind.I_HAT)
    assert convexity_violation(curve) is None


def test_rate_curve_table_columns():
    curve = rate_curve_two_state(ALPHA, BETA, [0.1, 0.2])
    assert list(rate_curve_table(curve).columns) == ['x', 'J']
    i_hat = RateCurve(points=[(0.1, 0.0)], kind=RateCurveKind.I_HAT)
    assert list(rate_curve_table(i_hat).columns) == ['x', 'I_hat']


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def test_reference_exponent():
    assert reference_exponent(two_state()) == pytest.approx(THETA_TWO_STATE, abs=1e-15)
    assert reference_exponent(dm1()) == pytest.approx(THETA_DM1, abs=1e-5)
    with pytest.raises(ConfigurationError):
        reference_exponent(NEGATIVE_CONSTANT)


def test_markov_estimator_is_incompatible_with_dm1():
    with pytest.raises(ConfigurationError):
        check_compatible(dm1(), MARKOV)
    check_compatible(two_state(), MARKOV)
    check_compatible(dm1(), EXTREMAL)


def test_estimate_prefixes_matches_direct_evaluation():
    trace = sample(dm1(n=400, seed=9))
    checkpoints = [50, 200, 400]
    block = estimate_prefixes(trace, BLOCK, checkpoints)
    extremal = estimate_prefixes(trace, EXTREMAL, checkpoints)
    waits = lindley_recursion(trace, 0.0)
    for k, b, e in zip(checkpoints, block, extremal):
        assert b.value == block_exponent(trace.prefix(k), 1).value
        assert e.value == extremal_exponent(waits.prefix(k))


def test_estimate_prefixes_marks_short_prefixes():
    trace = increments(-1, 2, -3, -1, 1, -2)
    results = estimate_prefixes(trace, EstimatorSpec(EstimatorKind.BLOCK, block_size=4), [2, 6])
    assert results[0] is None
    assert results[1] is not None


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def test_convergence_negative_constant_is_infinite_everywhere():
    cfg = ConvergenceConfig(process=NEGATIVE_CONSTANT, estimator=BLOCK, n_max=50,
                            checkpoints=(10, 20, 50), seed=3)
    rows = run_convergence(cfg)
    assert [r.n for r in rows] == [10, 20, 50]
    assert all(r.status == 'infinite' and r.estimate == math.inf for r in rows)


def test_convergence_is_deterministic_and_uses_prefixes():
    cfg = ConvergenceConfig(process=dm1(), estimator=BLOCK, n_max=1000,
                            checkpoints=(100, 500, 1000), seed=77)
    first = run_convergence(cfg)
    assert first == run_convergence(cfg)
    trace = sample(dm1(n=1000, seed=77))
    for row in first:
        assert row.estimate == block_exponent(trace.prefix(row.n), 1).value


def test_convergence_reports_insufficient_checkpoints():
    cfg = ConvergenceConfig(process=dm1(), estimator=EstimatorSpec(EstimatorKind.BLOCK, block_size=10),
                            n_max=100, checkpoints=(5, 100), seed=1)
    rows = run_convergence(cfg)
    assert rows[0].status == INSUFFICIENT
    assert math.isnan(rows[0].estimate)
    assert rows[1].status != INSUFFICIENT


def test_convergence_rejects_markov_on_dm1():
    cfg = ConvergenceConfig(process=dm1(), estimator=MARKOV, n_max=100, checkpoints=(100,), seed=1)
    with pytest.raises(ConfigurationError):
        run_convergence(cfg)


def test_convergence_rejects_bad_checkpoints():
    cfg = ConvergenceConfig(process=dm1(), estimator=BLOCK, n_max=100, checkpoints=(50, 20), seed=1)
    with pytest.raises(ParameterError):
        run_convergence(cfg)


def test_convergence_table_columns():
    cfg = ConvergenceConfig(process=two_state(), estimator=MARKOV, n_max=500,
                            checkpoints=(250, 500), seed=4)
    table = convergence_table(run_convergence(cfg))
    assert list(table.columns) == ['n', 'estimate', 'status']
    assert len(table) == 2


@pytest.mark.slow
def test_block_estimator_converges_on_dm1():
    errors = []
    for seed in range(20):
        cfg = ConvergenceConfig(process=dm1(), estimator=BLOCK, n_max=50_000,
                                checkpoints=(50_000,), seed=seed)
        errors.append(abs(run_convergence(cfg)[0].estimate - THETA_DM1))
    assert float(np.median(errors)) < 0.02


@pytest.mark.slow
def test_extremal_estimator_band_on_dm1():
    estimates = []
    for seed in range(20):
        cfg = ConvergenceConfig(process=dm1(), estimator=EXTREMAL, n_max=100_000,
                                checkpoints=(100_000,), seed=seed)
        estimates.append(run_convergence(cfg)[0].estimate)
    assert 0.12 <= float(np.median(estimates)) <= 0.30


# ---------------------------------------------------------------------------
# Monte Carlo large deviations
# ---------------------------------------------------------------------------

def test_empirical_rate():
    assert empirical_rate(0, 100, 10) == math.inf
    assert empirical_rate(100, 100, 10) == 0.0
    assert empirical_rate(1, 100, 10) == pytest.approx(math.log(100) / 10)


def small_mc_config(workers=1, **overrides):
    params = dict(process=two_state(), estimator=MARKOV, m=300, n_list=(50, 100),
                  x_list=(0.02, 0.04, 0.08), base_seed=1000, workers=workers)
    params.update(overrides)
    return McLdpConfig(**params)


def test_mc_ldp_is_independent_of_worker_count():
    serial = run_mc_ldp(small_mc_config(workers=1))
    parallel = run_mc_ldp(small_mc_config(workers=2))
    assert serial.rows == parallel.rows
    assert serial.insufficient == parallel.insufficient
    assert serial.seeds == {'base_seed': 1000, 'first': 1000, 'last': 1299}


def test_mc_ldp_counts_decrease_in_x():
    result = run_mc_ldp(small_mc_config(estimator=BLOCK, process=dm1()))
    assert result.theta_star_ref == pytest.approx(THETA_DM1, abs=1e-5)
    for n in (50, 100):
        counts = result.counts(n)
        assert counts == sorted(counts, reverse=True)
        assert all(0 <= c <= 300 for c in counts)


def test_mc_ldp_counts_infinite_estimates_as_exceedances():
    cfg = McLdpConfig(process=NEGATIVE_CONSTANT, estimator=BLOCK, m=5, n_list=(3,),
                      x_list=(0.1, 10.0), base_seed=0, theta_star_ref=1.0)
    result = run_mc_ldp(cfg)
    assert result.counts(3) == [5, 5]
    assert result.rates(3) == [0.0, 0.0]


def test_mc_ldp_needs_reference_for_general_chains():
    cfg = McLdpConfig(process=NEGATIVE_CONSTANT, estimator=BLOCK, m=5, n_list=(3,),
                      x_list=(0.1,), base_seed=0)
    with pytest.raises(ConfigurationError):
        run_mc_ldp(cfg)


def test_mc_ldp_rejects_seed_overflow():
    with pytest.raises(ParameterError):
        run_mc_ldp(small_mc_config(base_seed=2 ** 64 - 1, m=2))


def test_mc_ldp_rejects_bad_grids():
    with pytest.raises(ParameterError):
        run_mc_ldp(small_mc_config(x_list=(0.04, 0.02)))
    with pytest.raises(ParameterError):
        run_mc_ldp(small_mc_config(n_list=()))


def test_mc_ldp_table_columns():
    table = mc_ldp_table(run_mc_ldp(small_mc_config(m=20)))
    assert list(table.columns) == ['n', 'x', 'count', 'm', 'rate']
    assert len(table) == 6


@pytest.mark.slow
def test_mc_ldp_rates_increase_in_x_at_desk_scale():
    cfg = McLdpConfig(process=dm1(), estimator=BLOCK, m=10_000, n_list=(50, 100, 200, 400),
                      x_list=(0.02, 0.04, 0.08), base_seed=1)
    result = run_mc_ldp(cfg)
    for n in cfg.n_list:
        rates = result.rates(n)
        assert all(b > a for a, b in zip(rates, rates[1:]))
