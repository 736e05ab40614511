"""Scenario-driven stand-ins for the external services.

A scenario file is JSON with one ordered rule list per service::

    {
      "llm":    [{"match": {...}, "response": {"text": "..."}}],
      "vlm":    [{"match": {...}, "response": {"verdict": "Yes", "p": 0.9}}],
      "t2v":    [{"match": {...}, "response": {"frames": ["tag", ...], "fps": 1}}],
      "editor": [{"match": {...}, "response": {"tag": "edited"}}],
      "fail_first": {"vlm": 0}
    }

The first rule whose matcher accepts the request answers it. Matcher keys
(all optional, all must hold): ``contains`` / ``system_contains`` (case
insensitive substring of the user / system text), ``frame_tag`` (tag embedded
in the attached image), ``call`` (0-based index of the call to that service),
``has_image`` (bool). ``fail_first`` makes a service answer its first ``k``
calls with a 503 so retry behaviour can be exercised.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from ..calibration import TokenProb
from ..errors import ServiceError
from ..videoio import VideoHandle, frame_tag, image_size, tagged_frame, write_frame_dir
from .base import AuditLog, ChatResponse, message_images, message_text

SERVICES = ("llm", "vlm", "t2v", "editor")


class Scenario:
    def __init__(self, data: dict):
        unknown = set(data) - set(SERVICES) - {"fail_first", "name", "description"}
        if unknown:
            raise ValueError(f"unknown scenario sections: {sorted(unknown)}")
        self.name = data.get("name", "")
        self.rules = {s: list(data.get(s, [])) for s in SERVICES}
        self.fail_first = {s: int(data.get("fail_first", {}).get(s, 0)) for s in SERVICES}

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls(json.loads(Path(path).read_text()))


class _Scripted:
    service = ""

    def __init__(self, scenario: Scenario, audit: AuditLog | None = None):
        self.scenario = scenario
        self.audit = audit or AuditLog()
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def _answer(self, request: dict) -> dict:
        with self._lock:
            index = len(self.calls)
            self.calls.append(request)
        if index < self.scenario.fail_first[self.service]:
            raise ServiceError(503, f"scripted transient failure #{index + 1}")
        for rule in self.scenario.rules[self.service]:
            if _matches(rule.get("match", {}), request, index):
                self.audit.write(self.service, request, rule["response"])
                return rule["response"]
        raise ServiceError(404, f"no scripted {self.service} response for {request}")


def _matches(matcher: dict, request: dict, index: int) -> bool:
    for key, want in matcher.items():
        if key == "contains":
            if want.lower() not in request.get("text", "").lower():
                return False
        elif key == "system_contains":
            if want.lower() not in request.get("system", "").lower():
                return False
        elif key == "frame_tag":
            if request.get("frame_tag") != want:
                return False
        elif key == "call":
            if index != want:
                return False
        elif key == "has_image":
            if bool(request.get("has_image")) != bool(want):
                return False
        else:
            raise ValueError(f"unknown matcher key {key!r}")
    return True


class ScriptedChatBackend(_Scripted):
    """Serves both the language model (``llm``) and the frame detector (``vlm``)."""

    def __init__(self, scenario: Scenario, service: str = "llm", audit: AuditLog | None = None):
        super().__init__(scenario, audit)
        self.service = service

    def complete(self, messages: list[dict], *, logprobs: bool = False) -> ChatResponse:
        system = "\n".join(message_text(m) for m in messages if m.get("role") == "system")
        user = "\n".join(message_text(m) for m in messages if m.get("role") == "user")
        images = [img for m in messages for img in message_images(m)]
        request = {"system": system, "text": user, "has_image": bool(images)}
        if images:
            request["frame_tag"] = frame_tag(images[0])
        resp = self._answer(request)
        if "verdict" in resp:
            text = resp["verdict"]
            tokens = (TokenProb(text, float(resp.get("p", 1.0))),)
        else:
            text = resp.get("text", "")
            tokens = tuple(TokenProb(t, float(p)) for t, p in resp.get("tokens", []))
        return ChatResponse(text, tokens if logprobs else ())


class ScriptedVideoBackend(_Scripted):
    service = "t2v"

    def generate(self, prompt: str, image: bytes | None, dest: Path) -> VideoHandle:
        request = {"text": prompt, "has_image": image is not None}
        if image is not None:
            request["frame_tag"] = frame_tag(image)
        resp = self._answer(request)
        size = tuple(resp.get("size", (16, 16)))
        frames = [tagged_frame(tag, size) for tag in resp["frames"]]
        return write_frame_dir(dest, frames, float(resp.get("fps", 1.0)))


class ScriptedImageEditBackend(_Scripted):
    service = "editor"

    def edit(self, image: bytes, instruction: str) -> bytes:
        resp = self._answer({"text": instruction, "has_image": True, "frame_tag": frame_tag(image)})
        if "tag" in resp:
            return tagged_frame(resp["tag"], image_size(image))
        return image
