"""Exact satisfaction probability of a formula over a video automaton.

The formula is compiled into a deterministic monitor by formula progression.
Monitor states are positive boolean combinations (kept in absorbed DNF) of
obligations on the remainder of the trace:

* ``S(phi)`` -- the remainder is non-empty and ``phi`` holds at its start
* ``W(phi)`` -- the remainder is empty, or ``phi`` holds at its start

Reading a letter replaces each obligation by the progression of ``phi``
through that letter; at the end of the trace ``S`` is false and ``W`` true.
The reachable state space is minimized before use.

Probabilities are then obtained by a forward sweep over the product of the
automaton layers and the monitor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .automaton import ConfidenceMatrix, build_automaton, check_dimensions
from .errors import MonitorBlowup, TooLargeForOracle
from .logic import (
    Always, And, Atom, Eventually, Formula, Implies, Next, Not, Or, PropositionSet, Seq,
    Until, desugar_seq, evaluate_trace, free_propositions, has_seq,
)

MONITOR_STATE_CAP = 4096
ORACLE_BOUND = 20

# ---------------------------------------------------------------------------
# Negation normal form (internal, tuple encoded so nodes hash cheaply)
# ---------------------------------------------------------------------------
#   ("lit", i, positive)   ("and", a, b)   ("or", a, b)
#   ("X", a)  strong next  ("WX", a) weak next
#   ("G", a)  ("F", a)  ("U", a, b)  ("R", a, b)


def _nnf(f: Formula, neg: bool = False) -> tuple:
    if isinstance(f, Atom):
        return ("lit", f.prop.index, not neg)
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        return ("or" if neg else "and", _nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Or):
        return ("and" if neg else "or", _nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Implies):
        return _nnf(Or(Not(f.left), f.right), neg)
    if isinstance(f, Next):
        return ("WX" if neg else "X", _nnf(f.arg, neg))
    if isinstance(f, Always):
        return ("F" if neg else "G", _nnf(f.arg, neg))
    if isinstance(f, Eventually):
        return ("G" if neg else "F", _nnf(f.arg, neg))
    if isinstance(f, Until):
        if neg:
            # !(a U b) == !a R !b
            return ("R", _nnf(f.left, True), _nnf(f.right, True))
        return ("U", _nnf(f.left), _nnf(f.right))
    if isinstance(f, Seq):
        raise ValueError("Seq must be desugared before monitor compilation")
    raise TypeError(f"not a formula: {f!r}")


def _empty_value(g: tuple) -> bool:
    """Value of an obligation on an empty remainder (only used to pick the initial state)."""
    op = g[0]
    if op == "and":
        return _empty_value(g[1]) and _empty_value(g[2])
    if op == "or":
        return _empty_value(g[1]) or _empty_value(g[2])
    return op in ("WX", "G", "R")


# ---------------------------------------------------------------------------
# Absorbed DNF over obligations
# ---------------------------------------------------------------------------

_TRUE: frozenset = frozenset([frozenset()])
_FALSE: frozenset = frozenset()


def _absorb(cubes) -> frozenset:
    cleaned = set()
    for cube in cubes:
        # S(phi) implies W(phi)
        strong = {g for kind, g in cube if kind == "S"}
        cleaned.add(frozenset(o for o in cube if not (o[0] == "W" and o[1] in strong)))
    ordered = sorted(cleaned, key=len)
    kept: list[frozenset] = []
    for cube in ordered:
        if not any(k <= cube for k in kept):
            kept.append(cube)
    return frozenset(kept)


def _or(a: frozenset, b: frozenset) -> frozenset:
    if a == _TRUE or b == _TRUE:
        return _TRUE
    return _absorb(a | b)


def _and(a: frozenset, b: frozenset) -> frozenset:
    if not a or not b:
        return _FALSE
    if a == _TRUE:
        return b
    if b == _TRUE:
        return a
    return _absorb(x | y for x in a for y in b)


def _obl(kind: str, g: tuple) -> frozenset:
    return frozenset([frozenset([(kind, g)])])


class _Progressor:
    def __init__(self):
        self._memo: dict[tuple[tuple, int], frozenset] = {}

    def prog(self, g: tuple, letter: int) -> frozenset:
        key = (g, letter)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        op = g[0]
        if op == "lit":
            res = _TRUE if bool((letter >> g[1]) & 1) == g[2] else _FALSE
        elif op == "and":
            res = _and(self.prog(g[1], letter), self.prog(g[2], letter))
        elif op == "or":
            res = _or(self.prog(g[1], letter), self.prog(g[2], letter))
        elif op == "X":
            res = _obl("S", g[1])
        elif op == "WX":
            res = _obl("W", g[1])
        elif op == "G":
            res = _and(self.prog(g[1], letter), _obl("W", g))
        elif op == "F":
            res = _or(self.prog(g[1], letter), _obl("S", g))
        elif op == "U":
            res = _or(self.prog(g[2], letter), _and(self.prog(g[1], letter), _obl("S", g)))
        elif op == "R":
            res = _and(self.prog(g[2], letter), _or(self.prog(g[1], letter), _obl("W", g)))
        else:
            raise AssertionError(op)
        self._memo[key] = res
        return res

    def step(self, state: frozenset, letter: int) -> frozenset:
        out = _FALSE
        for cube in state:
            acc = _TRUE
            for _kind, g in cube:
                acc = _and(acc, self.prog(g, letter))
                if not acc:
                    break
            out = _or(out, acc)
            if out == _TRUE:
                break
        return out


def _accepting(state: frozenset) -> bool:
    return any(all(kind == "W" for kind, _ in cube) for cube in state)


# ---------------------------------------------------------------------------
# Monitor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonitorAutomaton:
    """Deterministic, total monitor over valuations of ``props``.

    ``props`` lists the global proposition indices the formula mentions;
    transitions are indexed by the local letter formed from those bits, and
    :meth:`step` accepts a global label bit pattern.
    """

    props: tuple[int, ...]
    initial: int
    transitions: tuple[tuple[int, ...], ...]
    accepting: tuple[bool, ...]

    @property
    def n_states(self) -> int:
        return len(self.accepting)

    def local_letter(self, label: int) -> int:
        letter = 0
        for bit, i in enumerate(self.props):
            if (label >> i) & 1:
                letter |= 1 << bit
        return letter

    def step(self, state: int, label: int) -> int:
        return self.transitions[state][self.local_letter(label)]

    def accepts(self, labels: Sequence[int]) -> bool:
        s = self.initial
        for label in labels:
            s = self.step(s, label)
        return self.accepting[s]


def compile_monitor(f: Formula, cap: int = MONITOR_STATE_CAP) -> MonitorAutomaton:
    if has_seq(f):
        raise ValueError("Seq must be desugared before monitor compilation")
    g = _nnf(f)
    props = tuple(sorted(p.index for p in free_propositions(f)))
    # global letter for every local letter
    letters = []
    for local in range(1 << len(props)):
        letters.append(sum(1 << i for bit, i in enumerate(props) if (local >> bit) & 1))

    progressor = _Progressor()
    init = _obl("W" if _empty_value(g) else "S", g)
    index = {init: 0}
    order = [init]
    table: list[list[int]] = []
    k = 0
    while k < len(order):
        row = []
        for letter in letters:
            nxt = progressor.step(order[k], letter)
            if nxt not in index:
                if len(order) >= cap:
                    raise MonitorBlowup(cap)
                index[nxt] = len(order)
                order.append(nxt)
            row.append(index[nxt])
        table.append(row)
        k += 1
    accepting = [_accepting(s) for s in order]
    return _minimize(props, table, accepting)


def _minimize(props: tuple[int, ...], table: list[list[int]], accepting: list[bool]) -> MonitorAutomaton:
    """Moore partition refinement; block numbering follows first discovery from state 0."""
    block = [int(a) for a in accepting]
    while True:
        signature = [(block[s], tuple(block[t] for t in table[s])) for s in range(len(table))]
        ids: dict[tuple, int] = {}
        refined = [ids.setdefault(sig, len(ids)) for sig in signature]
        if len(ids) == len(set(block)):
            break
        block = refined
    # renumber blocks in BFS order from the initial state
    order: dict[int, int] = {block[0]: 0}
    rep: dict[int, int] = {block[0]: 0}
    queue = [0]
    while queue:
        s = queue.pop(0)
        for t in table[s]:
            if block[t] not in order:
                order[block[t]] = len(order)
                rep[block[t]] = t
                queue.append(t)
    n = len(order)
    transitions = [None] * n
    acc = [False] * n
    for b, new in order.items():
        s = rep[b]
        transitions[new] = tuple(order[block[t]] for t in table[s])
        acc[new] = accepting[s]
    return MonitorAutomaton(props=props, initial=0, transitions=tuple(transitions), accepting=tuple(acc))


# ---------------------------------------------------------------------------
# Satisfaction probability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SatisfactionResult:
    probability: float
    formula: Formula
    n_frames: int
    method: str  # "dp" | "oracle"

    def to_json(self) -> dict:
        return {"probability": self.probability, "method": self.method}


def satisfaction_probability(
    props: PropositionSet,
    C: ConfidenceMatrix,
    f: Formula,
    *,
    monitor_cap: int = MONITOR_STATE_CAP,
) -> SatisfactionResult:
    automaton = build_automaton(props, C)
    monitor = compile_monitor(desugar_seq(f), monitor_cap)

    labels = [s.label for s in automaton.states]
    letter_of = [monitor.local_letter(l) if l is not None else 0 for l in labels]
    terminal = automaton.terminal

    dist: dict[tuple[int, int], float] = {(automaton.initial, monitor.initial): 1.0}
    for _ in range(C.n_frames):
        nxt: dict[tuple[int, int], float] = {}
        for (sid, m), mass in dist.items():
            row = monitor.transitions[m]
            for dst, p in automaton.successors(sid):
                key = (dst, row[letter_of[dst]])
                nxt[key] = nxt.get(key, 0.0) + mass * p
        dist = nxt

    prob = 0.0
    for (sid, m), mass in dist.items():
        # every surviving path now sits on the last frame layer, one step from the terminal
        assert any(dst == terminal for dst, _ in automaton.successors(sid))
        if monitor.accepting[m]:
            prob += mass
    return SatisfactionResult(min(1.0, max(0.0, prob)), f, C.n_frames, "dp")


def oracle_satisfaction(props: PropositionSet, C: ConfidenceMatrix, f: Formula, *, bound: int = ORACLE_BOUND) -> SatisfactionResult:
    """Brute-force sum over every label sequence, evaluated with the trace semantics."""
    check_dimensions(props, C)
    n_props, n_frames = C.n_props, C.n_frames
    if n_props * n_frames > bound:
        raise TooLargeForOracle(n_frames, n_props, bound)
    g = desugar_seq(f)
    conf = C.frames()
    valuations = list(itertools.product((False, True), repeat=n_props))
    per_frame = []
    for frame in conf:
        options = []
        for val in valuations:
            w = 1.0
            for c, v in zip(frame, val):
                w *= c if v else 1.0 - c
            if w > 0.0:
                options.append((frozenset(i for i, v in enumerate(val) if v), w))
        per_frame.append(options)

    total = 0.0
    for combo in itertools.product(*per_frame):
        w = 1.0
        for _, wk in combo:
            w *= wk
        if evaluate_trace(g, [label for label, _ in combo], 0):
            total += w
    return SatisfactionResult(min(1.0, max(0.0, total)), f, n_frames, "oracle")
