"""Clients for the language, vision, video-generation and image-editing services."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..calibration import IDENTITY, CalibrationModel
from .base import AuditLog, ChatResponse, ClientConfig, call_with_retries
from .http import HttpChatBackend, HttpImageEditBackend, HttpVideoBackend
from .mock import Scenario, ScriptedChatBackend, ScriptedImageEditBackend, ScriptedVideoBackend
from .services import (
    ContinuationWriter, DecompositionResult, Decomposer, FrameScorer, GenerationRequest,
    KeyframeEditor, VideoGenerator, parse_decomposition, parse_verdict,
)

SERVICE_KEYS = ("llm", "vlm", "t2v", "editor")
DEFAULT_KEY_ENV = {"llm": "NSE_LLM_API_KEY", "vlm": "NSE_VLM_API_KEY", "t2v": "NSE_T2V_API_KEY", "editor": "NSE_EDITOR_API_KEY"}


@dataclass
class Clients:
    decomposer: Decomposer
    scorer: FrameScorer
    writer: ContinuationWriter
    generator: VideoGenerator
    editor: KeyframeEditor | None
    audit: AuditLog = field(default_factory=AuditLog)

    @classmethod
    def from_scenario(cls, scenario: Scenario | dict | str | Path, calibration: CalibrationModel = IDENTITY,
                      configs: dict[str, ClientConfig] | None = None) -> "Clients":
        if isinstance(scenario, (str, Path)):
            scenario = Scenario.load(scenario)
        elif isinstance(scenario, dict):
            scenario = Scenario(scenario)
        cfg = _configs(configs, backoff=0.0)
        audit = AuditLog()
        nosleep = lambda _s: None  # noqa: E731
        return cls(
            decomposer=Decomposer(ScriptedChatBackend(scenario, "llm", audit), cfg["llm"], nosleep),
            scorer=FrameScorer(ScriptedChatBackend(scenario, "vlm", audit), calibration, cfg["vlm"], nosleep),
            writer=ContinuationWriter(ScriptedChatBackend(scenario, "llm", audit), cfg["llm"], nosleep),
            generator=VideoGenerator(ScriptedVideoBackend(scenario, audit), cfg["t2v"], nosleep),
            editor=KeyframeEditor(ScriptedImageEditBackend(scenario, audit), cfg["editor"], sleep=nosleep),
            audit=audit,
        )

    @classmethod
    def from_config(cls, configs: dict[str, ClientConfig | dict], calibration: CalibrationModel = IDENTITY) -> "Clients":
        cfg = _configs(configs)
        audit = AuditLog()
        llm = HttpChatBackend(cfg["llm"], audit=audit)
        editor = None
        if cfg["editor"].base_url:
            editor = KeyframeEditor(HttpImageEditBackend(cfg["editor"], audit=audit), cfg["editor"])
        return cls(
            decomposer=Decomposer(llm, cfg["llm"]),
            scorer=FrameScorer(HttpChatBackend(cfg["vlm"], audit=audit), calibration, cfg["vlm"]),
            writer=ContinuationWriter(llm, cfg["llm"]),
            generator=VideoGenerator(HttpVideoBackend(cfg["t2v"], audit=audit), cfg["t2v"]),
            editor=editor,
            audit=audit,
        )


def _configs(configs, **defaults) -> dict[str, ClientConfig]:
    configs = dict(configs or {})
    unknown = set(configs) - set(SERVICE_KEYS)
    if unknown:
        raise ValueError(f"unknown client sections: {sorted(unknown)}")
    out = {}
    for key in SERVICE_KEYS:
        c = configs.get(key)
        if isinstance(c, ClientConfig):
            out[key] = c
        else:
            data = {"api_key_env": DEFAULT_KEY_ENV[key], **defaults, **(c or {})}
            out[key] = ClientConfig.from_json(data)
    return out


__all__ = [
    "AuditLog", "ChatResponse", "ClientConfig", "Clients", "ContinuationWriter", "DecompositionResult",
    "Decomposer", "FrameScorer", "GenerationRequest", "HttpChatBackend", "HttpImageEditBackend",
    "HttpVideoBackend", "KeyframeEditor", "Scenario", "ScriptedChatBackend", "ScriptedImageEditBackend",
    "ScriptedVideoBackend", "VideoGenerator", "call_with_retries", "parse_decomposition", "parse_verdict",
]
