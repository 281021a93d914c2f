import math

import numpy as np
import pytest

from errors import DataFormatError, EmptyInputError, ParameterError
from helpers import ALPHA, BETA, DM1_ALPHA, DM1_BETA
from models import Dm1Spec, FiniteMarkovSpec, Trace, TraceKind, TwoStateSpec
from processes import (
    load_trace, sample, sample_dm1, sample_finite_markov, sample_two_state,
    two_state_as_finite_markov,
)
from storage import save_trace


# ---------------------------------------------------------------------------
# two-state chain
# ---------------------------------------------------------------------------

def test_two_state_values_are_plus_minus_one():
    trace = sample_two_state(TwoStateSpec(ALPHA, BETA, n=1000, seed=3))
    assert set(np.unique(trace.values)) <= {-1.0, 1.0}
    assert trace.kind == TraceKind.INCREMENTS


def test_two_state_single_sample():
    trace = sample_two_state(TwoStateSpec(0.3, 0.6, n=1, seed=11))
    assert len(trace) == 1
    assert trace.values[0] in (-1.0, 1.0)


def test_two_state_occupancy_matches_stationary_law():
    trace = sample_two_state(TwoStateSpec(ALPHA, BETA, n=100_000, seed=42))
    p = ALPHA / (ALPHA + BETA)
    lam = 1.0 - ALPHA - BETA
    # Markov-chain standard error of the occupancy fraction
    se = math.sqrt(p * (1 - p) * (1 + lam) / (1 - lam) / len(trace))
    assert abs(np.mean(trace.values == 1.0) - p) < 4 * se


def test_two_state_transition_frequency():
    values = sample_two_state(TwoStateSpec(ALPHA, BETA, n=100_000, seed=7)).values
    from_plus = values[:-1] == 1.0
    leave = np.sum(from_plus & (values[1:] == -1.0))
    visits = np.sum(from_plus)
    sigma = math.sqrt(BETA * (1 - BETA) / visits)
    assert abs(leave / visits - BETA) < 4 * sigma


def test_two_state_matches_finite_markov_embedding():
    spec = TwoStateSpec(ALPHA, BETA, n=5000, seed=99)
    a = sample_two_state(spec)
    b = sample_finite_markov(two_state_as_finite_markov(spec))
    np.testing.assert_array_equal(a.values, b.values)


def test_sampling_is_deterministic():
    spec = TwoStateSpec(0.1, 0.2, n=2000, seed=2024)
    np.testing.assert_array_equal(sample(spec).values, sample(spec).values)
    other = sample(TwoStateSpec(0.1, 0.2, n=2000, seed=2025))
    assert not np.array_equal(sample(spec).values, other.values)


@pytest.mark.parametrize("alpha, beta", [(0.2, 0.1), (0.0, 0.5), (0.5, 1.0), (0.3, 0.3)])
def test_two_state_rejects_invalid_parameters(alpha, beta):
    with pytest.raises(ParameterError):
        sample_two_state(TwoStateSpec(alpha, beta, n=10, seed=1))


def test_two_state_rejects_bad_seed_and_length():
    with pytest.raises(ParameterError):
        sample_two_state(TwoStateSpec(ALPHA, BETA, n=0, seed=1))
    with pytest.raises(ParameterError):
        sample_two_state(TwoStateSpec(ALPHA, BETA, n=10, seed=-1))
    with pytest.raises(ParameterError):
        sample_two_state(TwoStateSpec(ALPHA, BETA, n=10, seed=2 ** 64))


# ---------------------------------------------------------------------------
# finite Markov chain
# ---------------------------------------------------------------------------

def test_finite_markov_absorbing_singleton():
    trace = sample_finite_markov(FiniteMarkovSpec(Pi=[[1.0]], f=[-1.0], n=3, seed=0))
    np.testing.assert_array_equal(trace.values, [-1.0, -1.0, -1.0])


def test_finite_markov_emits_successor_states():
    spec = FiniteMarkovSpec(Pi=[[0.0, 1.0], [1.0, 0.0]], f=[-1.0, 1.0], n=4, seed=5, init=0)
    np.testing.assert_array_equal(sample_finite_markov(spec).values, [1.0, -1.0, 1.0, -1.0])


def test_finite_markov_values_in_support():
    spec = FiniteMarkovSpec(
        Pi=[[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.4, 0.4, 0.2]],
        f=[-2.0, -0.5, 1.5], n=3000, seed=8,
    )
    assert set(np.unique(sample_finite_markov(spec).values)) <= {-2.0, -0.5, 1.5}


@pytest.mark.parametrize("Pi, f", [
    ([[0.5, 0.4], [0.5, 0.5]], [-1.0, 1.0]),      # row does not sum to 1
    ([[1.0, 0.0], [0.5, 0.5]], [-1.0, 1.0]),      # reducible
    ([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0]),       # zero value
    ([[0.5, 0.5], [0.5, 0.5]], [-1.0]),           # wrong length
    ([[1.2, -0.2], [0.5, 0.5]], [-1.0, 1.0]),     # negative entry
])
def test_finite_markov_rejects_invalid_specs(Pi, f):
    with pytest.raises(ParameterError):
        sample_finite_markov(FiniteMarkovSpec(Pi=Pi, f=f, n=10, seed=1))


def test_finite_markov_rejects_bad_initial_state():
    with pytest.raises(ParameterError):
        sample_finite_markov(FiniteMarkovSpec(Pi=[[0.5, 0.5], [0.5, 0.5]], f=[-1, 1], n=5, seed=1, init=2))


# ---------------------------------------------------------------------------
# D/M/1
# ---------------------------------------------------------------------------

def test_dm1_mean():
    trace = sample_dm1(Dm1Spec(DM1_ALPHA, DM1_BETA, n=100_000, seed=17))
    assert np.mean(trace.values) == pytest.approx(1 / DM1_ALPHA - 1 / DM1_BETA, abs=0.02)


def test_dm1_support_bound():
    trace = sample_dm1(Dm1Spec(2.0, 0.5, n=20_000, seed=4))
    assert trace.values.min() >= -1 / 0.5


def test_dm1_tail_probability():
    trace = sample_dm1(Dm1Spec(DM1_ALPHA, DM1_BETA, n=100_000, seed=23))
    expected = math.exp(-DM1_ALPHA * (0.9 + 1 / DM1_BETA))
    assert expected == pytest.approx(0.1353, abs=1e-4)
    assert np.mean(trace.values > 0.9) == pytest.approx(expected, abs=0.005)


def test_dm1_warmup_discards_leading_draws():
    full = sample_dm1(Dm1Spec(1.0, 0.5, n=110, seed=12))
    warm = sample_dm1(Dm1Spec(1.0, 0.5, n=100, seed=12, warmup=10))
    np.testing.assert_array_equal(warm.values, full.values[10:])


@pytest.mark.parametrize("alpha, beta", [(1.0, 1.0), (0.5, 1.0), (1.0, 0.0)])
def test_dm1_rejects_nonnegative_drift(alpha, beta):
    with pytest.raises(ParameterError):
        sample_dm1(Dm1Spec(alpha, beta, n=10, seed=1))


def test_dm1_rejects_negative_warmup():
    with pytest.raises(ParameterError):
        sample_dm1(Dm1Spec(1.0, 0.5, n=10, seed=1, warmup=-1))


# ---------------------------------------------------------------------------
# external traces
# ---------------------------------------------------------------------------

def test_load_trace_plain_lines(write_text):
    trace = load_trace(write_text("t.csv", "1.0\n-2.0\n"))
    np.testing.assert_array_equal(trace.values, [1.0, -2.0])
    assert trace.origin['source'] == 'external'


def test_load_trace_accepts_header_and_typographic_minus(write_text):
    trace = load_trace(write_text("t.csv", "value\n1.0\n−2.0\n"))
    np.testing.assert_array_equal(trace.values, [1.0, -2.0])


def test_load_trace_keeps_seed_comment(write_text):
    trace = load_trace(write_text("t.csv", "# seed=18446744073709551615\nvalue\n0.5\n"))
    assert trace.seed == 2 ** 64 - 1


def test_load_trace_empty_file(write_text):
    with pytest.raises(EmptyInputError):
        load_trace(write_text("empty.csv", ""))


def test_load_trace_header_only(write_text):
    with pytest.raises(EmptyInputError):
        load_trace(write_text("header.csv", "value\n"))


def test_load_trace_reports_line_number(write_text):
    with pytest.raises(DataFormatError) as info:
        load_trace(write_text("bad.csv", "value\n1.0\nabc\n"))
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_load_trace_rejects_negative_waits(write_text):
    with pytest.raises(DataFormatError):
        load_trace(write_text("w.csv", "1.0\n-0.5\n"), TraceKind.WAITS)


def test_trace_round_trip(tmp_path):
    original = sample_dm1(Dm1Spec(DM1_ALPHA, DM1_BETA, n=500, seed=31))
    path = tmp_path / "trace.csv"
    save_trace(original, path)
    loaded = load_trace(path)
    np.testing.assert_array_equal(loaded.values, original.values)
    assert loaded.seed == 31


def test_trace_values_are_read_only():
    trace = Trace([1.0, 2.0])
    with pytest.raises(ValueError):
        trace.values[0] = 5.0
