import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from gen import random_formula, random_instance, random_matrix
from vidrefine.automaton import ConfidenceMatrix
from vidrefine.checker import compile_monitor, oracle_satisfaction, satisfaction_probability
from vidrefine.errors import MonitorBlowup, TooLargeForOracle
from vidrefine.logic import (
    Always, And, Atom, Eventually, Next, Not, Or, PropositionSet, Seq, Until, desugar_seq,
    evaluate_trace, trace_from_masks,
)

P = PropositionSet(["p"])
PQ = PropositionSet(["p", "q"])
p, q = Atom(PQ[0]), Atom(PQ[1])


def prob(props, rows, f):
    return satisfaction_probability(props, ConfidenceMatrix(rows), f).probability


@pytest.mark.parametrize("props,rows,f,expected", [
    (P, [[0.5, 0.5]], Eventually(Atom(P[0])), 0.75),
    (P, [[0.9, 0.8]], Always(Atom(P[0])), 0.72),
    (PQ, [[1, 1], [0.5, 0.5]], Until(p, q), 0.75),
    (P, [[1.0]], Atom(P[0]), 1.0),
    (P, [[0.3]], Not(Atom(P[0])), 0.7),
    (PQ, [[0.9], [0.8]], And(p, q), 0.72),
    (P, [[0.9]], Next(Atom(P[0])), 0.0),
    (P, [[0.0, 0.6]], Next(Atom(P[0])), 0.6),
    (PQ, [[0.5, 0.0], [0.0, 0.5]], Seq(p, q), 0.25),
])
def test_examples(props, rows, f, expected):
    assert prob(props, rows, f) == pytest.approx(expected, abs=1e-12)
    assert oracle_satisfaction(props, ConfidenceMatrix(rows), f).probability == pytest.approx(expected, abs=1e-12)


def test_canonical_monitor_sizes():
    assert compile_monitor(Eventually(p)).n_states == 2
    assert compile_monitor(Always(p)).n_states == 2
    assert compile_monitor(p).n_states <= 3


def test_monitor_refuses_seq_and_respects_cap():
    with pytest.raises(ValueError):
        compile_monitor(Seq(p, q))
    with pytest.raises(MonitorBlowup):
        compile_monitor(Until(p, Next(q)), cap=1)


def test_monitor_matches_trace_semantics_exhaustively():
    rng = random.Random(2)
    traces = [m for n in range(1, 5) for m in itertools.product(range(4), repeat=n)]
    for _ in range(150):
        f = desugar_seq(random_formula(rng, PQ, 4))
        mon = compile_monitor(f)
        for masks in traces:
            assert mon.accepts(masks) == evaluate_trace(f, trace_from_masks(masks, 2)), (f, masks)


def test_monitor_ignores_unmentioned_propositions():
    props = PropositionSet(["a", "b", "c"])
    mon = compile_monitor(Eventually(Atom(props[2])))
    assert mon.props == (2,)
    assert mon.accepts([0b011, 0b100])
    assert not mon.accepts([0b011, 0b011])


def test_oracle_bound():
    props = PropositionSet(["a", "b", "c"])
    C = ConfidenceMatrix([[0.5] * 7] * 3)
    with pytest.raises(TooLargeForOracle):
        oracle_satisfaction(props, C, Atom(props[0]))
    # the DP has no such limit
    assert satisfaction_probability(props, C, Atom(props[0])).probability == pytest.approx(0.5)


def test_certainty_gives_trace_value():
    rng = random.Random(4)
    for _ in range(200):
        props, C, f = random_instance(rng)
        C = ConfidenceMatrix((C.values > 0.5).astype(float))
        masks = [sum(1 << i for i in range(C.n_props) if frame[i] == 1.0) for frame in C.frames()]
        expected = evaluate_trace(desugar_seq(f), trace_from_masks(masks, C.n_props))
        assert satisfaction_probability(props, C, f).probability == float(expected)


def test_determinism():
    rng = random.Random(9)
    props, C, f = random_instance(rng)
    a = satisfaction_probability(props, C, f)
    b = satisfaction_probability(props, C, f)
    assert a.probability == b.probability
    assert a.to_json() == {"probability": a.probability, "method": "dp"}


def test_long_video_runs():
    props = PropositionSet(["a", "b", "c", "d"])
    rng = random.Random(0)
    C = random_matrix(rng, 4, 60)
    f = Always(Or(Atom(props[0]), Eventually(And(Atom(props[1]), Next(Atom(props[3]))))))
    r = satisfaction_probability(props, C, f).probability
    assert 0.0 <= r <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dp_equals_oracle_property(seed):
    rng = random.Random(seed)
    props, C, f = random_instance(rng)
    dp = satisfaction_probability(props, C, f).probability
    assert dp == pytest.approx(oracle_satisfaction(props, C, f).probability, abs=1e-9)
    assert dp + satisfaction_probability(props, C, Not(f)).probability == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 2), st.integers(0, 3), st.floats(0, 1))
def test_monotone_in_positive_atoms(seed, i, j, bump):
    rng = random.Random(seed)
    props, C, f = random_instance(rng, positive=True)
    i, j = i % C.n_props, j % C.n_frames
    vals = C.values.copy()
    vals[i, j] = vals[i, j] + (1 - vals[i, j]) * bump
    low = satisfaction_probability(props, C, f).probability
    high = satisfaction_probability(props, ConfidenceMatrix(vals), f).probability
    assert high >= low - 1e-12
