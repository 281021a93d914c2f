import math

import pytest

from compare_service import compare_estimators, comparison_table
from helpers import ALPHA, BETA, DM1_ALPHA, DM1_BETA, THETA_TWO_STATE, increments
from models import Dm1Spec, TwoStateSpec
from processes import sample


def by_estimator(result):
    return {row['estimator']: row for row in result['rows']}


def test_compare_two_state_trace():
    trace = sample(TwoStateSpec(ALPHA, BETA, n=20_000, seed=12))
    result = compare_estimators(trace, B=20, theta_star_ref=THETA_TWO_STATE)
    rows = by_estimator(result)

    assert result['n'] == 20_000
    assert result['reference'] == THETA_TWO_STATE
    assert list(rows) == ['block', 'markov', 'extremal']
    markov = rows['markov']
    assert markov['status'] == 'root'
    assert markov['delta'] == pytest.approx(markov['value'] - THETA_TWO_STATE)
    assert markov['delta_pct'] == pytest.approx(markov['delta'] / THETA_TWO_STATE * 100)
    assert rows['block']['note'] == "B=20"
    assert rows['extremal']['status'] == 'direct'


def test_compare_skips_markov_on_continuous_trace():
    trace = sample(Dm1Spec(DM1_ALPHA, DM1_BETA, n=2000, seed=3))
    rows = by_estimator(compare_estimators(trace))
    assert rows['markov']['status'] == 'unavailable'
    assert math.isnan(rows['markov']['value'])
    assert rows['block']['status'] == 'root'


def test_compare_without_reference_leaves_deltas_empty():
    rows = by_estimator(compare_estimators(increments(-1, 1, -1, -1, 1, -1)))
    for row in rows.values():
        assert math.isnan(row['delta'])
        assert math.isnan(row['delta_pct'])


def test_compare_single_observation():
    rows = by_estimator(compare_estimators(increments(-1.0)))
    assert rows['block']['status'] == 'infinite'
    assert rows['markov']['status'] == 'unavailable'
    assert rows['extremal']['status'] == 'unavailable'


def test_compare_infinite_estimate_has_no_delta():
    rows = by_estimator(compare_estimators(increments(-1.0, -1.0, -1.0), theta_star_ref=0.5))
    assert rows['block']['value'] == math.inf
    assert math.isnan(rows['block']['delta'])


def test_comparison_table_columns():
    table = comparison_table(compare_estimators(increments(-1, 1, -1, -1, 1, -1)))
    assert list(table.columns) == [
        'estimator', 'n', 'value', 'status', 'residual', 'delta', 'delta_pct', 'note',
    ]
    assert len(table) == 3
