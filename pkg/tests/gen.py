"""Random instance generators shared by the property tests."""

from __future__ import annotations

import random

from vidrefine.automaton import ConfidenceMatrix
from vidrefine.logic import (
    Always, And, Atom, Eventually, Implies, Next, Not, Or, PropositionSet, Seq, Until,
)

UNARY = {"not": Not, "next": Next, "always": Always, "eventually": Eventually}
BINARY = {"and": And, "or": Or, "implies": Implies, "until": Until, "seq": Seq}
POSITIVE_UNARY = {"next": Next, "always": Always, "eventually": Eventually}
POSITIVE_BINARY = {"and": And, "or": Or, "until": Until, "seq": Seq}


def random_formula(rng: random.Random, props, depth: int, *, positive: bool = False):
    """Formula with operator nesting depth at most ``depth`` (atoms have depth 0).

    ``positive`` excludes negation and implication.
    """
    unary = POSITIVE_UNARY if positive else UNARY
    binary = POSITIVE_BINARY if positive else BINARY
    if depth <= 0 or rng.random() < 0.2:
        return Atom(rng.choice(list(props)))
    ops = list(unary) + list(binary)
    op = rng.choice(ops)
    if op in unary:
        return unary[op](random_formula(rng, props, depth - 1, positive=positive))
    return binary[op](
        random_formula(rng, props, depth - 1, positive=positive),
        random_formula(rng, props, depth - 1, positive=positive),
    )


def random_props(rng: random.Random, max_props: int = 3) -> PropositionSet:
    return PropositionSet([f"p{i}" for i in range(rng.randint(1, max_props))])


def random_matrix(rng: random.Random, n_props: int, n_frames: int, *, extremes: float = 0.3) -> ConfidenceMatrix:
    """Entries are 0 or 1 with probability ``extremes``, otherwise uniform."""
    def entry():
        if rng.random() < extremes:
            return float(rng.randint(0, 1))
        return rng.random()
    return ConfidenceMatrix([[entry() for _ in range(n_frames)] for _ in range(n_props)])


def random_instance(rng: random.Random, *, max_frames: int = 4, max_props: int = 3, depth: int = 4, positive: bool = False):
    props = random_props(rng, max_props)
    C = random_matrix(rng, len(props), rng.randint(1, max_frames))
    return props, C, random_formula(rng, props, depth, positive=positive)
