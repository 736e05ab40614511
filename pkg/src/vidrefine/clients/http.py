"""Wire-protocol backends built on httpx.

* chat: ``POST {base_url}/chat/completions`` with an OpenAI-style messages
  array and ``"logprobs": true`` when token probabilities are needed.
* video: ``POST {base_url}/generations`` returns ``{"id"}``; poll
  ``GET {base_url}/generations/{id}`` until ``status`` is ``succeeded``
  (then download ``output_url``) or ``failed``.
* image edit: ``POST {base_url}/images/edits`` with ``{"prompt", "image"}``,
  answered by ``{"image": <base64 png>}``.
"""

from __future__ import annotations

import io
import time
import zipfile
from pathlib import Path
from typing import Callable

import httpx

from ..calibration import TokenProb
from ..errors import GenerationTimeout, ServiceError
from ..videoio import MediaTool, VideoHandle, open_video
from .base import AuditLog, ChatResponse, ClientConfig, decode_image, image_data_url


class _HttpBase:
    service = "http"

    def __init__(self, config: ClientConfig, *, client: httpx.Client | None = None, audit: AuditLog | None = None):
        self.config = config
        self.audit = audit or AuditLog()
        headers = {}
        key = config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = client or httpx.Client(timeout=config.timeout)
        self.headers = headers

    def _url(self, path: str) -> str:
        if path.startswith("http://") or path.startswith("https://"):
            return path
        return self.config.base_url.rstrip("/") + "/" + path.lstrip("/")

    def _request(self, method: str, path: str, payload: dict | None = None) -> httpx.Response:
        try:
            resp = self.client.request(method, self._url(path), json=payload, headers=self.headers, timeout=self.config.timeout)
        except httpx.HTTPError as exc:
            raise ServiceError(None, str(exc)) from exc
        if resp.status_code >= 400:
            raise ServiceError(resp.status_code, resp.text)
        return resp

    def _json(self, method: str, path: str, payload: dict | None = None) -> dict:
        resp = self._request(method, path, payload)
        try:
            data = resp.json()
        except ValueError:
            raise ServiceError(resp.status_code, resp.text) from None
        self.audit.write(self.service, {"method": method, "path": path, "body": payload}, data)
        return data


class HttpChatBackend(_HttpBase):
    service = "chat"

    def complete(self, messages: list[dict], *, logprobs: bool = False) -> ChatResponse:
        payload = {"model": self.config.model, "messages": messages, "temperature": 0}
        if logprobs:
            payload["logprobs"] = True
        data = self._json("POST", "chat/completions", payload)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
            tokens: tuple[TokenProb, ...] = ()
            if logprobs:
                entries = (choice.get("logprobs") or {}).get("content") or []
                tokens = tuple(TokenProb.from_logprob(e["token"], float(e["logprob"])) for e in entries)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ServiceError(200, f"malformed chat response: {exc}") from exc
        return ChatResponse(text, tokens)


class HttpVideoBackend(_HttpBase):
    service = "video"

    def __init__(
        self,
        config: ClientConfig,
        *,
        client: httpx.Client | None = None,
        audit: AuditLog | None = None,
        tool: MediaTool | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        super().__init__(config, client=client, audit=audit)
        self.tool = tool
        self.sleep = sleep
        self.clock = clock

    def generate(self, prompt: str, image: bytes | None, dest: Path) -> VideoHandle:
        payload = {"model": self.config.model, "prompt": prompt, "image": image_data_url(image) if image else None}
        job = self._json("POST", "generations", payload)
        job_id = job.get("id")
        if not job_id:
            raise ServiceError(200, f"generation job has no id: {job}")
        deadline = self.clock() + self.config.max_wait
        while True:
            status = self._json("GET", f"generations/{job_id}")
            state = status.get("status")
            if state == "succeeded":
                return self._download(status, Path(dest))
            if state == "failed":
                raise ServiceError(200, f"generation failed: {status.get('error', '')}")
            if self.clock() >= deadline:
                raise GenerationTimeout(f"job {job_id} still {state!r} after {self.config.max_wait}s")
            self.sleep(self.config.poll_interval)

    def _download(self, status: dict, dest: Path) -> VideoHandle:
        url = status.get("output_url")
        if not url:
            raise ServiceError(200, "finished job has no output_url")
        resp = self._request("GET", url)
        dest.mkdir(parents=True, exist_ok=True)
        ctype = resp.headers.get("content-type", "")
        if "zip" in ctype:
            # a zipped native frame directory
            with zipfile.ZipFile(io.BytesIO(resp.content)) as zf:
                zf.extractall(dest)
            return open_video(dest)
        out = dest / "video.mp4"
        out.write_bytes(resp.content)
        return open_video(out, self.tool)


class HttpImageEditBackend(_HttpBase):
    service = "image-edit"

    def edit(self, image: bytes, instruction: str) -> bytes:
        data = self._json("POST", "images/edits", {"model": self.config.model, "prompt": instruction, "image": image_data_url(image)})
        try:
            return decode_image(data["image"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ServiceError(200, f"malformed edit response: {exc}") from exc
