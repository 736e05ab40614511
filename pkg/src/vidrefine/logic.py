"""Temporal-logic propositions, formula AST, concrete syntax and finite-trace semantics.

Concrete syntax (ASCII, with a few unicode aliases accepted on input)::

    formula  := implies
    implies  := or ( "->" implies )?
    or       := and ( "|" and )*
    and      := binary ( "&" binary )*
    binary   := unary ( ("U" | "X") binary )?      # right associative
    unary    := ("!" | "G" | "F" | "X") unary | primary
    primary  := '"' proposition text '"' | "(" formula ")"

A binary ``X`` between two formulas is the sequencing operator used by the
decomposer ("phi1 now, phi2 strictly later"); it is kept as a ``Seq`` node by
the parser and removed by :func:`desugar_seq`. Implication is rewritten to
``!a | b`` while parsing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import FormulaSyntaxError, IndexOutOfRange, UnknownProposition

# ---------------------------------------------------------------------------
# Propositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Proposition:
    index: int
    text: str

    def __str__(self) -> str:
        return self.text


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


class PropositionSet(Sequence[Proposition]):
    """Ordered, duplicate-free collection of atomic propositions."""

    def __init__(self, texts: Iterable[str]):
        props = []
        seen: dict[str, int] = {}
        for i, raw in enumerate(texts):
            text = raw.strip()
            if not text:
                raise ValueError(f"proposition {i} is empty")
            if '"' in text:
                raise ValueError(f"proposition {text!r} may not contain double quotes")
            key = _norm(text)
            if key in seen:
                raise ValueError(f"duplicate proposition {text!r}")
            seen[key] = i
            props.append(Proposition(i, text))
        self._props = tuple(props)
        self._by_key = seen

    def __getitem__(self, i):  # type: ignore[override]
        return self._props[i]

    def __len__(self) -> int:
        return len(self._props)

    def __iter__(self) -> Iterator[Proposition]:
        return iter(self._props)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropositionSet):
            return NotImplemented
        return self._props == other._props

    def __hash__(self) -> int:
        return hash(self._props)

    def __repr__(self) -> str:
        return f"PropositionSet({list(self.texts)!r})"

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(p.text for p in self._props)

    def lookup(self, text: str) -> Proposition:
        try:
            return self._props[self._by_key[_norm(text)]]
        except KeyError:
            raise UnknownProposition(text) from None

    def atom(self, text: str) -> "Atom":
        return Atom(self.lookup(text))


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    prop: Proposition


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class Always(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class Eventually(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Seq(Formula):
    left: Formula
    right: Formula


UNARY = (Not, Next, Always, Eventually)
BINARY = (And, Or, Implies, Until, Seq)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, UNARY):
        return (f.arg,)
    return (f.left, f.right)


def walk(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_propositions(f: Formula) -> frozenset[Proposition]:
    return frozenset(n.prop for n in walk(f) if isinstance(n, Atom))


def depth(f: Formula) -> int:
    kids = children(f)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def has_seq(f: Formula) -> bool:
    return any(isinstance(n, Seq) for n in walk(f))


def desugar_seq(f: Formula) -> Formula:
    """Rewrite every ``Seq(a, b)`` into ``a & X F b``."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, Seq):
        return And(desugar_seq(f.left), Next(Eventually(desugar_seq(f.right))))
    if isinstance(f, UNARY):
        return type(f)(desugar_seq(f.arg))
    return type(f)(desugar_seq(f.left), desugar_seq(f.right))


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------

_UNARY_SYM = {Not: "!", Next: "X", Always: "G", Eventually: "F"}
_BINARY_SYM = {And: "&", Or: "|", Implies: "->", Until: "U", Seq: "X"}


def to_text(f: Formula) -> str:
    """Render ``f`` in the concrete syntax; binary nodes are fully parenthesized."""
    if isinstance(f, Atom):
        return f'"{f.prop.text}"'
    if isinstance(f, UNARY):
        return f"{_UNARY_SYM[type(f)]} {to_text(f.arg)}"
    return f"({to_text(f.left)} {_BINARY_SYM[type(f)]} {to_text(f.right)})"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SYMBOLS = [
    ("->", "IMPLIES"), ("=>", "IMPLIES"), ("⇒", "IMPLIES"), ("→", "IMPLIES"),
    ("&&", "AND"), ("&", "AND"), ("∧", "AND"),
    ("||", "OR"), ("|", "OR"), ("∨", "OR"),
    ("!", "NOT"), ("~", "NOT"), ("¬", "NOT"),
    ("[]", "G"), ("□", "G"), ("<>", "F"), ("◇", "F"), ("◊", "F"), ("♢", "F"),
    ("𝖷", "X"), ("𝖴", "U"),
    ("(", "LPAREN"), (")", "RPAREN"),
]
_LETTER_OPS = {"G": "G", "F": "F", "X": "X", "U": "U"}
_WORD = re.compile(r"\w+")


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            end = text.find('"', i + 1)
            if end < 0:
                raise FormulaSyntaxError(i, "closing quote", text)
            tokens.append(_Token("ATOM", text[i + 1:end], i))
            i = end + 1
            continue
        for sym, kind in _SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(_Token(kind, sym, i))
                i += len(sym)
                break
        else:
            m = _WORD.match(text, i)
            word = m.group(0) if m else ""
            if word == "U" or (word and set(word) <= {"G", "F", "X"}):
                # stacked unary letters such as "GF" expand to one token each
                for k, letter in enumerate(word):
                    tokens.append(_Token(_LETTER_OPS[letter], letter, i + k))
                i += len(word)
            else:
                raise FormulaSyntaxError(i, "operator, '(' or quoted proposition", text)
    tokens.append(_Token("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, props: PropositionSet):
        self.text = text
        self.props = props
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def take(self, kind: str, expected: str) -> _Token:
        if self.tok.kind != kind:
            raise FormulaSyntaxError(self.tok.pos, expected, self.text)
        t = self.tok
        self.i += 1
        return t

    def parse(self) -> Formula:
        f = self.implies()
        self.take("EOF", "end of input")
        return f

    def implies(self) -> Formula:
        left = self.or_()
        if self.tok.kind == "IMPLIES":
            self.i += 1
            return Or(Not(left), self.implies())
        return left

    def or_(self) -> Formula:
        f = self.and_()
        while self.tok.kind == "OR":
            self.i += 1
            f = Or(f, self.and_())
        return f

    def and_(self) -> Formula:
        f = self.binary()
        while self.tok.kind == "AND":
            self.i += 1
            f = And(f, self.binary())
        return f

    def binary(self) -> Formula:
        left = self.unary()
        if self.tok.kind == "U":
            self.i += 1
            return Until(left, self.binary())
        if self.tok.kind == "X":
            self.i += 1
            return Seq(left, self.binary())
        return left

    def unary(self) -> Formula:
        kind = self.tok.kind
        ctor = {"NOT": Not, "G": Always, "F": Eventually, "X": Next}.get(kind)
        if ctor is not None:
            self.i += 1
            return ctor(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        t = self.tok
        if t.kind == "ATOM":
            self.i += 1
            return Atom(self.props.lookup(t.value))
        if t.kind == "LPAREN":
            self.i += 1
            f = self.implies()
            self.take("RPAREN", "')'")
            return f
        raise FormulaSyntaxError(t.pos, "quoted proposition, '(' or unary operator", self.text)


def parse_formula(text: str, props: PropositionSet) -> Formula:
    return _Parser(text, props).parse()


def quote_propositions(text: str, props: PropositionSet) -> str:
    """Quote bare proposition mentions so free-form specifications become parseable.

    Longest proposition texts are matched first (case-insensitive, on word
    boundaries); already-quoted spans are left untouched.
    """
    ordered = sorted(props, key=lambda p: len(p.text), reverse=True)
    patterns = [
        (p, re.compile(r"(?<![\w])" + r"\s+".join(map(re.escape, p.text.split())) + r"(?![\w])", re.I))
        for p in ordered
    ]
    out: list[str] = []
    i = 0
    while i < len(text):
        if text[i] == '"':
            end = text.find('"', i + 1)
            end = len(text) if end < 0 else end + 1
            out.append(text[i:end])
            i = end
            continue
        for p, pat in patterns:
            m = pat.match(text, i)
            if m:
                out.append(f'"{p.text}"')
                i = m.end()
                break
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Finite-trace semantics
# ---------------------------------------------------------------------------

Trace = Sequence[frozenset[int]]


def make_trace(labels: Iterable[Iterable[int | Proposition]]) -> tuple[frozenset[int], ...]:
    return tuple(
        frozenset(x.index if isinstance(x, Proposition) else int(x) for x in label)
        for label in labels
    )


def trace_from_masks(masks: Iterable[int], n_props: int) -> tuple[frozenset[int], ...]:
    return tuple(frozenset(i for i in range(n_props) if (m >> i) & 1) for m in masks)


def evaluate_trace(f: Formula, t: Trace, at: int = 0) -> bool:
    """Truth of ``f`` at position ``at`` of the finite trace ``t``.

    ``Next`` is strong: it is false at the last position.
    """
    if not 0 <= at < len(t):
        raise IndexOutOfRange(f"position {at} outside trace of length {len(t)}")
    return _holds(f, t, at)


def _holds(f: Formula, t: Trace, at: int) -> bool:
    if isinstance(f, Atom):
        return f.prop.index in t[at]
    if isinstance(f, Not):
        return not _holds(f.arg, t, at)
    if isinstance(f, And):
        return _holds(f.left, t, at) and _holds(f.right, t, at)
    if isinstance(f, Or):
        return _holds(f.left, t, at) or _holds(f.right, t, at)
    if isinstance(f, Implies):
        return (not _holds(f.left, t, at)) or _holds(f.right, t, at)
    if isinstance(f, Next):
        return at + 1 < len(t) and _holds(f.arg, t, at + 1)
    if isinstance(f, Always):
        return all(_holds(f.arg, t, k) for k in range(at, len(t)))
    if isinstance(f, Eventually):
        return any(_holds(f.arg, t, k) for k in range(at, len(t)))
    if isinstance(f, Until):
        for k in range(at, len(t)):
            if _holds(f.right, t, k):
                return True
            if not _holds(f.left, t, k):
                return False
        return False
    if isinstance(f, Seq):
        raise ValueError("Seq must be desugared before evaluation")
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Spec file
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spec:
    """A proposition set with its formula; the on-disk decomposition output."""

    propositions: PropositionSet
    formula: Formula

    @classmethod
    def from_text(cls, propositions: Iterable[str], formula: str) -> "Spec":
        props = PropositionSet(propositions)
        return cls(props, parse_formula(formula, props))

    def to_json(self) -> dict:
        return {"propositions": list(self.propositions.texts), "formula": to_text(self.formula)}

    @classmethod
    def from_json(cls, data: dict) -> "Spec":
        return cls.from_text(data["propositions"], data["formula"])


def load_spec(path: str | Path) -> Spec:
    return Spec.from_json(json.loads(Path(path).read_text()))


def save_spec(spec: Spec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_json(), indent=2) + "\n")
