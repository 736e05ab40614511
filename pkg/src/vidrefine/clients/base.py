"""Shared client plumbing: configuration, retries, audit log and backend protocols."""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Protocol, TypeVar

from ..calibration import TokenProb
from ..errors import GenerationTimeout, ServiceError
from ..videoio import VideoHandle

log = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class ClientConfig:
    base_url: str = ""
    model: str = ""
    api_key_env: str = "NSE_API_KEY"
    timeout: float = 60.0
    max_retries: int = 2
    parallelism: int = 4
    backoff: float = 1.0
    poll_interval: float = 5.0
    max_wait: float = 900.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @classmethod
    def from_json(cls, data: dict | None) -> "ClientConfig":
        data = data or {}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown client config keys: {sorted(unknown)}")
        return cls(**data)

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


def is_retryable(exc: BaseException) -> bool:
    if isinstance(exc, GenerationTimeout):
        return True
    if isinstance(exc, ServiceError):
        return exc.status is None or exc.status == 429 or exc.status >= 500
    return False


def call_with_retries(fn: Callable[[], T], config: ClientConfig, sleep: Callable[[float], None] = time.sleep) -> T:
    """Run ``fn`` with exponential backoff on transient failures."""
    attempt = 0
    while True:
        try:
            return fn()
        except Exception as exc:
            if not is_retryable(exc) or attempt >= config.max_retries:
                raise
            delay = config.backoff * (2 ** attempt)
            log.warning("transient failure (%s); retry %d/%d in %.1fs", exc, attempt + 1, config.max_retries, delay)
            sleep(delay)
            attempt += 1


class AuditLog:
    """Append-only JSONL record of service requests and responses."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def write(self, service: str, request: dict, response: dict | str) -> None:
        if self.path is None:
            return
        line = json.dumps({"service": service, "request": _elide(request), "response": _elide(response)}, sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(line + "\n")


def _elide(obj):
    if isinstance(obj, dict):
        return {k: _elide(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_elide(v) for v in obj]
    if isinstance(obj, str) and obj.startswith("data:") and len(obj) > 96:
        return obj[:48] + f"...<{len(obj)} chars>"
    return obj


def image_data_url(img: bytes, mime: str = "image/png") -> str:
    return f"data:{mime};base64," + base64.b64encode(img).decode("ascii")


def decode_image(data: str) -> bytes:
    if data.startswith("data:"):
        data = data.split(",", 1)[1]
    return base64.b64decode(data)


# ---------------------------------------------------------------------------
# Backend protocols (wire implementations and scripted mocks both satisfy these)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tokens: tuple[TokenProb, ...] = ()


class ChatBackend(Protocol):
    def complete(self, messages: list[dict], *, logprobs: bool = False) -> ChatResponse: ...


class VideoBackend(Protocol):
    def generate(self, prompt: str, image: bytes | None, dest: Path) -> VideoHandle: ...


class ImageEditBackend(Protocol):
    def edit(self, image: bytes, instruction: str) -> bytes: ...


def user_message(text: str, images: list[bytes] | tuple[bytes, ...] = ()) -> dict:
    if not images:
        return {"role": "user", "content": text}
    parts: list[dict] = [{"type": "text", "text": text}]
    parts += [{"type": "image_url", "image_url": {"url": image_data_url(img)}} for img in images]
    return {"role": "user", "content": parts}


def message_text(msg: dict) -> str:
    content = msg.get("content", "")
    if isinstance(content, str):
        return content
    return "\n".join(p.get("text", "") for p in content if p.get("type") == "text")


def message_images(msg: dict) -> list[bytes]:
    content = msg.get("content", "")
    if isinstance(content, str):
        return []
    return [decode_image(p["image_url"]["url"]) for p in content if p.get("type") == "image_url"]
