import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vidrefine.calibration import (
    IDENTITY, CalibrationModel, LabeledScore, TokenProb, apply_calibration, fit_calibration,
    load_pairs, optimal_threshold, roc_auc, roc_curve, threshold_accuracy, token_confidence,
    verdict_probability,
)
from vidrefine.errors import DegenerateDataset, EmptyResponse

SEPARABLE = [(0.9, True), (0.8, True), (0.3, False), (0.2, False)]


def planted(n, cut, noise, seed):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0, 1, n)
    y = (s >= cut) ^ (rng.uniform(0, 1, n) < noise)
    return list(zip(s.tolist(), y.tolist()))


@pytest.mark.parametrize("tokens,expected", [
    ([("Yes", 0.9)], 0.9),
    ([("Y", 0.9), ("es", 0.8)], 0.72),
    ([("No", 1.0)], 1.0),
])
def test_token_confidence(tokens, expected):
    assert token_confidence(tokens) == pytest.approx(expected)
    assert token_confidence([TokenProb(t, p) for t, p in tokens]) == pytest.approx(expected)


def test_token_confidence_order_invariant():
    toks = [("a", 0.9), ("b", 0.5), ("c", 0.7)]
    assert token_confidence(toks) == pytest.approx(token_confidence(toks[::-1]))


def test_token_validation():
    with pytest.raises(EmptyResponse):
        token_confidence([])
    with pytest.raises(ValueError):
        TokenProb("x", 0.0)
    assert TokenProb.from_logprob("Yes", math.log(0.25)).probability == pytest.approx(0.25)
    assert TokenProb.from_logprob("Yes", 1e-9).probability == 1.0


def test_verdict_polarity():
    assert verdict_probability(True, 0.9) == 0.9
    assert verdict_probability(False, 1.0) == 0.0


def test_threshold_examples():
    assert optimal_threshold(SEPARABLE) == 0.8
    assert threshold_accuracy(SEPARABLE, 0.8) == 1.0
    assert optimal_threshold([(0.6, True), (0.6, False)]) == 0.6
    assert threshold_accuracy([(0.6, True), (0.6, False)], 0.6) == 0.5


def test_threshold_tie_goes_to_smallest():
    data = [(0.1, False), (0.4, True), (0.5, False), (0.9, True)]
    # 0.4 and 0.9 both give accuracy 0.75
    assert optimal_threshold(data) == 0.4


def test_threshold_beats_majority():
    data = planted(300, 0.3, 0.25, 1)
    t = optimal_threshold(data)
    prior = np.mean([y for _, y in data])
    assert threshold_accuracy(data, t) >= max(prior, 1 - prior)


def test_planted_cut_recovered():
    t = optimal_threshold(planted(1000, 0.55, 0.1, 0))
    assert abs(t - 0.55) <= 0.05


def test_degenerate():
    with pytest.raises(DegenerateDataset):
        optimal_threshold([(0.1, True), (0.2, True)])
    with pytest.raises(DegenerateDataset):
        roc_curve([])


def test_roc_separable_passes_through_corner():
    pts = roc_curve(SEPARABLE)
    assert (0.0, 1.0) in pts
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    assert roc_auc(pts) == pytest.approx(1.0)


def test_roc_monotone_and_reflection():
    data = planted(400, 0.5, 0.3, 2)
    pts = roc_curve(data)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        assert x1 >= x0 and y1 >= y0
    flipped = roc_curve([(s, not y) for s, y in data])
    assert sorted((y, x) for x, y in pts) == pytest.approx(sorted(flipped))
    assert roc_auc(pts) + roc_auc(flipped) == pytest.approx(1.0)


def test_roc_random_labels_near_half():
    rng = np.random.default_rng(3)
    s = rng.uniform(0, 1, 10_000)
    y = rng.permutation(s >= 0.5)
    assert abs(roc_auc(roc_curve(list(zip(s, y)))) - 0.5) <= 0.05


@pytest.mark.parametrize("t,raw,expected", [
    (0.5, 0.3, 0.3), (0.5, 0.77, 0.77), (0.8, 0.8, 0.5), (0.8, 0.9, 0.75), (0.8, 0.4, 0.25),
    (0.8, 0.0, 0.0), (0.8, 1.0, 1.0),
])
def test_mapping(t, raw, expected):
    assert apply_calibration(CalibrationModel(t), raw) == pytest.approx(expected, abs=1e-15)


def test_threshold_maps_to_half_exactly():
    for t in (0.1, 0.37, 0.55, 0.8, 0.999):
        assert apply_calibration(CalibrationModel(t), t) == 0.5


@given(st.floats(0.001, 0.999), st.floats(0, 1), st.floats(0, 1))
def test_mapping_monotone(t, r1, r2):
    m = CalibrationModel(t)
    lo, hi = sorted((r1, r2))
    assert m(lo) <= m(hi)
    assert 0.0 <= m(lo) <= 1.0


def test_identity():
    assert IDENTITY.threshold == 0.5
    for r in np.linspace(0, 1, 11):
        assert IDENTITY(r) == pytest.approx(r)


def test_model_validation_and_file(tmp_path):
    with pytest.raises(ValueError):
        CalibrationModel(0.0)
    with pytest.raises(ValueError):
        CalibrationModel(1.0)
    m = CalibrationModel(0.62)
    m.save(tmp_path / "m.json")
    assert CalibrationModel.load(tmp_path / "m.json") == m


def test_fit_clamps_extreme_thresholds():
    m, acc = fit_calibration([(0.0, True), (0.0, False), (0.0, True)])
    assert 0 < m.threshold < 1e-5
    assert acc == pytest.approx(2 / 3)


def test_load_pairs(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("score,label\n0.9,1\n0.2,0\n\n0.4,1\n")
    assert load_pairs(path) == [LabeledScore(0.9, True), LabeledScore(0.2, False), LabeledScore(0.4, True)]
    path.write_text("0.9,yes\n")
    with pytest.raises(ValueError):
        load_pairs(path)
