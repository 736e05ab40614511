"""Counterfactual diagnosis: which proposition blocks satisfaction, and where.

The weakest proposition is the one whose confidences, forced to 1.0 on every
frame, raise the satisfaction probability the most. Its most impacted frame is
found by scoring each video prefix ``1..n`` with that proposition forced to
1.0 at frame ``n`` and every other entry nudged up by ``gamma``.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .automaton import ConfidenceMatrix, check_dimensions
from .checker import satisfaction_probability
from .errors import IndexOutOfRange
from .logic import Formula, PropositionSet

DEFAULT_GAMMA = 1e-4
MAX_GAMMA = 0.01
# values closer than this count as tied
TIE_EPS = 1e-12


@dataclass(frozen=True)
class DiagnosisReport:
    base_probability: float
    deltas: tuple[float, ...]
    weakest: int
    frame_scores: tuple[float, ...]
    impacted_index: int  # 1-based frame index
    gamma: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["deltas"] = list(self.deltas)
        d["frame_scores"] = list(self.frame_scores)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "DiagnosisReport":
        return cls(
            base_probability=float(data["base_probability"]),
            deltas=tuple(float(x) for x in data["deltas"]),
            weakest=int(data["weakest"]),
            frame_scores=tuple(float(x) for x in data["frame_scores"]),
            impacted_index=int(data["impacted_index"]),
            gamma=float(data["gamma"]),
        )


def forced_confidence_set(C: ConfidenceMatrix, i: int) -> ConfidenceMatrix:
    return C.with_row(i, 1.0)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def weakest_proposition(
    props: PropositionSet,
    C: ConfidenceMatrix,
    f: Formula,
    *,
    base: float | None = None,
    workers: int = 1,
) -> tuple[int, tuple[float, ...]]:
    """Return ``(index, deltas)``; ties go to the smallest index."""
    check_dimensions(props, C)
    if base is None:
        base = satisfaction_probability(props, C, f).probability

    def delta(i: int) -> float:
        return satisfaction_probability(props, forced_confidence_set(C, i), f).probability - base

    deltas = tuple(_map(delta, range(len(props)), workers))
    top = max(deltas)
    best = min(i for i, d in enumerate(deltas) if d >= top - TIE_EPS)
    return best, deltas


def _segment_matrix(C: ConfidenceMatrix, weakest: int, n: int, offsets: np.ndarray) -> ConfidenceMatrix:
    seg = np.minimum(C.values[:, :n] + offsets[:, :n], 1.0)
    seg[weakest, n - 1] = 1.0
    return ConfidenceMatrix(seg)


def localize_frame(
    props: PropositionSet,
    C: ConfidenceMatrix,
    f: Formula,
    weakest: int,
    gamma: float = DEFAULT_GAMMA,
    *,
    noise_seed: int | None = None,
    workers: int = 1,
) -> tuple[int, tuple[float, ...]]:
    """Return ``(n_star, frame_scores)`` with ``n_star`` 1-based; ties go to the largest n.

    With ``noise_seed`` set, each entry receives an independent uniform offset
    in ``[0, gamma]`` instead of the fixed ``gamma``.
    """
    check_dimensions(props, C)
    if not 0 <= weakest < len(props):
        raise IndexOutOfRange(f"proposition index {weakest} outside 0..{len(props) - 1}")
    if not 0.0 <= gamma <= MAX_GAMMA:
        raise ValueError(f"gamma must lie in [0, {MAX_GAMMA}], got {gamma}")

    if noise_seed is None:
        offsets = np.full(C.values.shape, gamma)
    else:
        rng = random.Random(noise_seed)
        offsets = np.array([[rng.uniform(0.0, gamma) for _ in range(C.n_frames)] for _ in range(C.n_props)])

    def score(n: int) -> float:
        return satisfaction_probability(props, _segment_matrix(C, weakest, n, offsets), f).probability

    z = tuple(_map(score, range(1, C.n_frames + 1), workers))
    top = max(z)
    best = max(k for k, v in enumerate(z) if v >= top - TIE_EPS)
    return best + 1, z


def diagnose(
    props: PropositionSet,
    C: ConfidenceMatrix,
    f: Formula,
    gamma: float = DEFAULT_GAMMA,
    *,
    noise_seed: int | None = None,
    workers: int = 1,
) -> DiagnosisReport:
    base = satisfaction_probability(props, C, f).probability
    weakest, deltas = weakest_proposition(props, C, f, base=base, workers=workers)
    n_star, z = localize_frame(props, C, f, weakest, gamma, noise_seed=noise_seed, workers=workers)
    return DiagnosisReport(
        base_probability=base,
        deltas=deltas,
        weakest=weakest,
        frame_scores=z,
        impacted_index=n_star,
        gamma=gamma,
    )
