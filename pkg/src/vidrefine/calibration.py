"""Turning detector token probabilities into calibrated proposition confidences."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDataset, EmptyResponse


@dataclass(frozen=True)
class TokenProb:
    token: str
    probability: float

    def __post_init__(self):
        if not 0.0 < self.probability <= 1.0:
            raise ValueError(f"token probability must be in (0, 1], got {self.probability}")

    @classmethod
    def from_logprob(cls, token: str, logprob: float) -> "TokenProb":
        return cls(token, min(1.0, math.exp(logprob)))


def token_confidence(tokens: Sequence[TokenProb | tuple[str, float]]) -> float:
    """Confidence in an emitted response: product of its token probabilities."""
    if not tokens:
        raise EmptyResponse("response contained no tokens")
    conf = 1.0
    for t in tokens:
        p = t.probability if isinstance(t, TokenProb) else float(t[1])
        conf *= p
    return min(1.0, max(0.0, conf))


def verdict_probability(is_yes: bool, confidence: float) -> float:
    """Probability that the proposition holds, given a Yes/No verdict and its confidence."""
    return confidence if is_yes else 1.0 - confidence


# ---------------------------------------------------------------------------
# Threshold search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledScore:
    score: float
    label: bool

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def _arrays(data: Iterable[LabeledScore | tuple[float, bool]]) -> tuple[np.ndarray, np.ndarray]:
    scores, labels = [], []
    for item in data:
        if isinstance(item, LabeledScore):
            scores.append(item.score)
            labels.append(item.label)
        else:
            scores.append(float(item[0]))
            labels.append(bool(item[1]))
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if y.size == 0 or y.all() or not y.any():
        raise DegenerateDataset("need at least one positive and one negative example")
    return s, y


def _sweep(s: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate thresholds (ascending unique scores) with TP and FP counts at ``score >= t``."""
    candidates = np.unique(s)
    order = np.argsort(s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # index of first element >= candidate
    first = np.searchsorted(s_sorted, candidates, side="left")
    pos_suffix = np.concatenate([np.cumsum(y_sorted[::-1])[::-1], [0]])
    neg_suffix = np.concatenate([np.cumsum(~y_sorted[::-1])[::-1], [0]])
    return candidates, pos_suffix[first], neg_suffix[first]


def threshold_accuracy(data, threshold: float) -> float:
    s, y = _arrays(data)
    return float(np.mean((s >= threshold) == y))


def optimal_threshold(data) -> float:
    """Accuracy-maximizing threshold over the observed scores; ties go to the smallest."""
    s, y = _arrays(data)
    candidates, tp, fp = _sweep(s, y)
    n_neg = int((~y).sum())
    correct = tp + (n_neg - fp)
    return float(candidates[int(np.argmax(correct))])


def roc_curve(data) -> list[tuple[float, float]]:
    """(FPR, TPR) points, one per candidate threshold plus the (0,0) and (1,1) anchors."""
    s, y = _arrays(data)
    _, tp, fp = _sweep(s, y)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    points = [(0.0, 0.0), (1.0, 1.0)]
    points += [(float(f) / n_neg, float(t) / n_pos) for t, f in zip(tp, fp)]
    return sorted(points)


def roc_auc(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


# ---------------------------------------------------------------------------
# Calibration mapping
# ---------------------------------------------------------------------------

# keeps both linear pieces non-degenerate
THRESHOLD_MARGIN = 1e-6


@dataclass(frozen=True)
class CalibrationModel:
    """Two-piece linear map sending ``[0, t)`` onto ``[0, 0.5)`` and ``[t, 1]`` onto ``[0.5, 1]``."""

    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"calibration threshold must be in (0, 1), got {self.threshold}")

    def __call__(self, raw: float) -> float:
        return apply_calibration(self, raw)

    def to_json(self) -> dict:
        return {"threshold": self.threshold}

    @classmethod
    def from_json(cls, data: dict) -> "CalibrationModel":
        return cls(float(data["threshold"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationModel":
        return cls.from_json(json.loads(Path(path).read_text()))


IDENTITY = CalibrationModel(0.5)


def apply_calibration(m: CalibrationModel, raw: float) -> float:
    raw = min(1.0, max(0.0, float(raw)))
    t = m.threshold
    if raw < t:
        return 0.5 * raw / t
    return min(1.0, 0.5 + 0.5 * (raw - t) / (1.0 - t))


def fit_calibration(data) -> tuple[CalibrationModel, float]:
    """Fit the threshold and report its accuracy on ``data``."""
    data = list(data)
    t = optimal_threshold(data)
    acc = threshold_accuracy(data, t)
    t = min(1.0 - THRESHOLD_MARGIN, max(THRESHOLD_MARGIN, t))
    return CalibrationModel(t), acc


def load_pairs(path: str | Path) -> list[LabeledScore]:
    """Read ``score,label`` rows (label 1 or 0); a non-numeric first row is skipped as a header."""
    out = []
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                score = float(row[0])
            except ValueError:
                if n == 0:
                    continue
                raise
            label = row[1].strip()
            if label not in ("0", "1"):
                raise ValueError(f"row {n + 1}: label must be 0 or 1, got {label!r}")
            out.append(LabeledScore(score, label == "1"))
    return out
