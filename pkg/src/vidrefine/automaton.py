"""Confidence matrices and the layered DTMC built from them.

Layer ``j`` (1-based frame index) holds one state per proposition valuation
whose probability under frame ``j``'s confidences is non-zero. Every retained
state of layer ``j-1`` moves to every retained state of layer ``j`` with that
valuation's probability, so inbound edge weights depend on the destination
label only. The last layer feeds an absorbing, label-free terminal state.

Labels are bit patterns: bit ``i`` set means proposition ``i`` holds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, LayerOutOfRange, TooManyPropositions
from .logic import PropositionSet

PRUNE_FLOOR = 1e-12
MAX_PROPOSITIONS = 12


class ConfidenceMatrix:
    """Read-only grid of per-proposition, per-frame confidences in [0, 1].

    ``values[i, j]`` is the confidence of proposition ``i`` in frame ``j``
    (both 0-based here; frames are 1-based everywhere else).
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"confidence matrix must be non-empty 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("confidences must lie in [0, 1]")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "ConfidenceMatrix":
        return cls(rows)

    @classmethod
    def from_frames(cls, frames: Sequence[Sequence[float]]) -> "ConfidenceMatrix":
        """Build from frame-major data (``frames[j][i]``)."""
        return cls(np.array(frames, dtype=float).T)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_props(self) -> int:
        return self._values.shape[0]

    @property
    def n_frames(self) -> int:
        return self._values.shape[1]

    def rows(self) -> list[list[float]]:
        return self._values.tolist()

    def frames(self) -> list[list[float]]:
        return self._values.T.tolist()

    def with_row(self, i: int, value: float) -> "ConfidenceMatrix":
        if not 0 <= i < self.n_props:
            raise IndexOutOfRange(f"proposition index {i} outside 0..{self.n_props - 1}")
        arr = self._values.copy()
        arr[i, :] = value
        return ConfidenceMatrix(arr)

    def prefix(self, n: int) -> "ConfidenceMatrix":
        if not 1 <= n <= self.n_frames:
            raise IndexOutOfRange(f"prefix length {n} outside 1..{self.n_frames}")
        return ConfidenceMatrix(self._values[:, :n])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfidenceMatrix):
            return NotImplemented
        return self._values.shape == other._values.shape and bool(np.array_equal(self._values, other._values))

    def __hash__(self) -> int:
        return hash((self._values.shape, self._values.tobytes()))

    def __repr__(self) -> str:
        return f"ConfidenceMatrix({self.rows()!r})"

    # -- scores file ---------------------------------------------------------

    def to_json(self, props: PropositionSet) -> dict:
        check_dimensions(props, self)
        return {"propositions": list(props.texts), "frames": self.n_frames, "scores": self.frames()}

    @classmethod
    def from_json(cls, data: Mapping) -> tuple[PropositionSet, "ConfidenceMatrix"]:
        props = PropositionSet(data["propositions"])
        scores = data["scores"]
        if "frames" in data and int(data["frames"]) != len(scores):
            raise DimensionMismatch(f"'frames' is {data['frames']} but {len(scores)} score rows given")
        if any(len(row) != len(props) for row in scores):
            raise DimensionMismatch("every score row needs one entry per proposition")
        return props, cls.from_frames(scores)


def load_scores(path: str | Path) -> tuple[PropositionSet, ConfidenceMatrix]:
    return ConfidenceMatrix.from_json(json.loads(Path(path).read_text()))


def save_scores(props: PropositionSet, C: ConfidenceMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(C.to_json(props), indent=2) + "\n")


def check_dimensions(props: Sequence, C: ConfidenceMatrix) -> None:
    if C.n_props != len(props):
        raise DimensionMismatch(f"{len(props)} propositions but confidence matrix has {C.n_props} rows")


@dataclass(frozen=True)
class State:
    id: int
    layer: int
    label: int | None  # None for the initial and terminal states
    kind: str  # "initial" | "frame" | "terminal"


@dataclass(frozen=True, eq=False)
class VideoAutomaton:
    props: PropositionSet
    n_frames: int
    states: tuple[State, ...]
    transitions: Mapping[tuple[int, int], float]
    initial: int
    terminal: int
    _succ: tuple[tuple[tuple[int, float], ...], ...] = field(repr=False)

    def successors(self, sid: int) -> tuple[tuple[int, float], ...]:
        return self._succ[sid]

    def layer(self, j: int) -> tuple[State, ...]:
        if not 0 <= j <= self.n_frames + 1:
            raise LayerOutOfRange(f"layer {j} outside 0..{self.n_frames + 1}")
        return tuple(s for s in self.states if s.layer == j)

    def label_set(self, s: State | int) -> frozenset[int]:
        s = self.states[s] if isinstance(s, int) else s
        if s.label is None:
            return frozenset()
        return frozenset(i for i in range(len(self.props)) if (s.label >> i) & 1)

    def label_name(self, s: State | int) -> str:
        s = self.states[s] if isinstance(s, int) else s
        if s.label is None:
            return s.kind
        return "".join("1" if (s.label >> i) & 1 else "0" for i in range(len(self.props)))

    def to_dot(self) -> str:
        lines = ["digraph video_automaton {", "  rankdir=LR;"]
        for s in self.states:
            shape = "doublecircle" if s.kind == "terminal" else "circle"
            lines.append(f'  s{s.id} [shape={shape}, label="{self.label_name(s)}\\nL{s.layer}"];')
        for (a, b), p in self.transitions.items():
            lines.append(f'  s{a} -> s{b} [label="{p:.6g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def label_probability(frame_conf: Sequence[float], label: int) -> float:
    """Probability of one valuation under independent per-proposition confidences."""
    pr = 1.0
    for i, c in enumerate(frame_conf):
        pr *= c if (label >> i) & 1 else 1.0 - c
    return pr


def build_automaton(
    props: PropositionSet,
    C: ConfidenceMatrix,
    *,
    max_props: int = MAX_PROPOSITIONS,
    floor: float = PRUNE_FLOOR,
) -> VideoAutomaton:
    check_dimensions(props, C)
    n_props = len(props)
    if n_props > max_props:
        raise TooManyPropositions(f"{n_props} propositions exceeds the cap of {max_props}")

    states = [State(0, 0, None, "initial")]
    transitions: dict[tuple[int, int], float] = {}
    previous = [0]
    for j, frame_conf in enumerate(C.frames(), start=1):
        current = []
        for k in range(1 << n_props):
            pr = label_probability(frame_conf, k)
            if pr < floor:
                continue
            sid = len(states)
            states.append(State(sid, j, k, "frame"))
            current.append(sid)
            for q in previous:
                transitions[(q, sid)] = pr
        previous = current

    terminal = len(states)
    states.append(State(terminal, C.n_frames + 1, None, "terminal"))
    for q in previous:
        transitions[(q, terminal)] = 1.0
    transitions[(terminal, terminal)] = 1.0

    succ: list[list[tuple[int, float]]] = [[] for _ in states]
    for (a, b), p in transitions.items():
        succ[a].append((b, p))
    return VideoAutomaton(
        props=props,
        n_frames=C.n_frames,
        states=tuple(states),
        transitions=MappingProxyType(transitions),
        initial=0,
        terminal=terminal,
        _succ=tuple(tuple(s) for s in succ),
    )


def layer_distribution(a: VideoAutomaton, j: int) -> dict[int, float]:
    """Marginal label distribution at frame ``j`` (1-based), by forward propagation."""
    if not 1 <= j <= a.n_frames:
        raise LayerOutOfRange(f"layer {j} outside 1..{a.n_frames}")
    mass = {a.initial: 1.0}
    for _ in range(j):
        nxt: dict[int, float] = {}
        for sid, m in mass.items():
            for dst, p in a.successors(sid):
                nxt[dst] = nxt.get(dst, 0.0) + m * p
        mass = nxt
    out: dict[int, float] = {}
    for sid, m in mass.items():
        label = a.states[sid].label
        out[label] = out.get(label, 0.0) + m
    return out


def outgoing_mass(a: VideoAutomaton) -> Iterable[tuple[State, float]]:
    for s in a.states:
        yield s, sum(p for _, p in a.successors(s.id))
