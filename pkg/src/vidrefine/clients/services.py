"""Typed operations over the service backends: decompose, score, continue, generate, edit."""

from __future__ import annotations

import ast
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..automaton import ConfidenceMatrix
from ..calibration import IDENTITY, CalibrationModel, apply_calibration, token_confidence, verdict_probability
from ..errors import AmbiguousVerdict, EmptyResponse, MalformedDecomposition, ServiceError, VidRefineError
from ..logic import Proposition, PropositionSet, Spec, parse_formula, quote_propositions
from ..videoio import FrameSequence, VideoHandle, image_size
from . import prompts
from .base import (
    ChatBackend, ClientConfig, ImageEditBackend, VideoBackend, call_with_retries, user_message,
)

# ---------------------------------------------------------------------------
# Prompt -> (propositions, formula)
# ---------------------------------------------------------------------------

_PROPS_RE = re.compile(r"(?:output|input)[\s_]+propositions\W*?:\W*?(\[.*?\])", re.I | re.S)
_SPEC_RE = re.compile(r"(?:output)[\s_]+specification[^:\n]*:[\s*_`]*(.+)", re.I)


@dataclass(frozen=True)
class DecompositionResult:
    spec: Spec
    raw: str

    @property
    def propositions(self) -> PropositionSet:
        return self.spec.propositions

    @property
    def formula(self):
        return self.spec.formula


def _parse_list(text: str) -> list[str]:
    try:
        value = ast.literal_eval(text)
        if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
            return [v.strip() for v in value]
    except (ValueError, SyntaxError):
        pass
    inner = text.strip()[1:-1]
    return [item.strip().strip("'\"`‘’“” ") for item in inner.split(",") if item.strip()]


def parse_decomposition(raw: str) -> Spec:
    """Extract the proposition list and specification from a decomposer reply."""
    m_props = _PROPS_RE.search(raw)
    if not m_props:
        raise MalformedDecomposition(raw, "no proposition list found")
    m_spec = _SPEC_RE.search(raw)
    if not m_spec:
        raise MalformedDecomposition(raw, "no specification found")
    texts = _parse_list(m_props.group(1))
    if not texts:
        raise MalformedDecomposition(raw, "empty proposition list")
    try:
        props = PropositionSet(texts)
    except ValueError as exc:
        raise MalformedDecomposition(raw, str(exc)) from exc
    spec_text = m_spec.group(1).strip().strip("`*_ ").rstrip(".")
    try:
        formula = parse_formula(quote_propositions(spec_text, props), props)
    except VidRefineError as exc:
        raise MalformedDecomposition(raw, str(exc)) from exc
    return Spec(props, formula)


class Decomposer:
    def __init__(self, backend: ChatBackend, config: ClientConfig | None = None, sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self.config = config or ClientConfig()
        self.sleep = sleep

    def messages(self, prompt: str, retry_reason: str | None = None) -> list[dict]:
        user = prompts.DECOMPOSE_USER.format(prompt=prompt)
        if retry_reason is not None:
            user += prompts.DECOMPOSE_RETRY_SUFFIX.format(reason=retry_reason)
        return [{"role": "system", "content": prompts.DECOMPOSE_SYSTEM}, user_message(user)]

    def decompose(self, prompt: str) -> DecompositionResult:
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        reason = None
        raw = ""
        for _ in range(2):
            msgs = self.messages(prompt, reason)
            raw = call_with_retries(lambda: self.backend.complete(msgs).text, self.config, self.sleep)
            try:
                return DecompositionResult(parse_decomposition(raw), raw)
            except MalformedDecomposition as exc:
                reason = exc.reason
        raise MalformedDecomposition(raw, reason or "")


# ---------------------------------------------------------------------------
# Frame scoring
# ---------------------------------------------------------------------------

_VERDICT_STRIP = " \t\r\n.!'\"`"


def parse_verdict(text: str) -> bool:
    word = text.strip(_VERDICT_STRIP).lower()
    if word == "yes":
        return True
    if word == "no":
        return False
    raise AmbiguousVerdict(text)


class FrameScorer:
    def __init__(
        self,
        backend: ChatBackend,
        calibration: CalibrationModel = IDENTITY,
        config: ClientConfig | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.calibration = calibration
        self.config = config or ClientConfig()
        self.sleep = sleep

    def messages(self, prop: Proposition | str, frame: bytes) -> list[dict]:
        return [user_message(prompts.DETECT.format(proposition=str(prop)), [frame])]

    def score(self, prop: Proposition | str, frame: bytes) -> float:
        msgs = self.messages(prop, frame)
        resp = call_with_retries(lambda: self.backend.complete(msgs, logprobs=True), self.config, self.sleep)
        is_yes = parse_verdict(resp.text)
        try:
            conf = token_confidence(resp.tokens)
        except EmptyResponse as exc:
            raise ServiceError(200, "detector response carried no token probabilities") from exc
        return apply_calibration(self.calibration, verdict_probability(is_yes, conf))

    def score_matrix(self, props: PropositionSet, seq: FrameSequence) -> ConfidenceMatrix:
        jobs = [(i, n) for n in range(len(seq)) for i in range(len(props))]

        def run(job):
            i, n = job
            return self.score(props[i], seq[n].image)

        if self.config.parallelism > 1:
            with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
                values = list(pool.map(run, jobs))
        else:
            values = [run(j) for j in jobs]
        grid = [[0.0] * len(seq) for _ in props]
        for (i, n), v in zip(jobs, values):
            grid[i][n] = v
        return ConfidenceMatrix(grid)


# ---------------------------------------------------------------------------
# Continuation prompts
# ---------------------------------------------------------------------------


class ContinuationWriter:
    feedback_template = prompts.FEEDBACK_TEMPLATE

    def __init__(self, backend: ChatBackend, config: ClientConfig | None = None, sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self.config = config or ClientConfig()
        self.sleep = sleep

    def messages(self, original: str, weakest: Proposition | str) -> list[dict]:
        text = str(weakest).strip()
        if not text:
            raise ValueError("weakest proposition text must be non-empty")
        feedback = self.feedback_template.format(proposition=text)
        return [
            {"role": "system", "content": prompts.CONTINUATION_SYSTEM},
            user_message(prompts.CONTINUATION_USER.format(original=original, feedback=feedback)),
        ]

    def continuation(self, original: str, weakest: Proposition | str) -> str:
        msgs = self.messages(original, weakest)
        text = call_with_retries(lambda: self.backend.complete(msgs).text, self.config, self.sleep).strip()
        if not text:
            raise ServiceError(200, "empty continuation prompt")
        return text


# ---------------------------------------------------------------------------
# Generation and keyframe editing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    image: bytes | None = None

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValueError("generation prompt must be non-empty")


class VideoGenerator:
    def __init__(self, backend: VideoBackend, config: ClientConfig | None = None, sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self.config = config or ClientConfig()
        self.sleep = sleep

    def generate(self, req: GenerationRequest, dest: str | Path) -> VideoHandle:
        return call_with_retries(lambda: self.backend.generate(req.prompt, req.image, Path(dest)), self.config, self.sleep)


class KeyframeEditor:
    def __init__(
        self,
        backend: ImageEditBackend,
        config: ClientConfig | None = None,
        max_pixels: int = 4096 * 4096,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.config = config or ClientConfig()
        self.max_pixels = max_pixels
        self.sleep = sleep

    def instruction(self, weakest: Proposition | str) -> str:
        return prompts.EDIT_KEYFRAME.format(proposition=str(weakest))

    def edit(self, frame: bytes, weakest: Proposition | str) -> bytes:
        w, h = image_size(frame)
        if w * h > self.max_pixels:
            raise ValueError(f"keyframe has {w * h} pixels, budget is {self.max_pixels}")
        text = self.instruction(weakest)
        return call_with_retries(lambda: self.backend.edit(frame, text), self.config, self.sleep)

