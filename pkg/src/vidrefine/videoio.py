"""Frame sampling, trimming and stitching.

Two backing forms are supported:

* a native frame directory: ``frame_00000.png, frame_00001.png, ...`` plus a
  ``meta.json`` holding ``{"fps": ..., "duration": ...}``. All operations on it
  are bit-exact.
* a container file (mp4 etc.), handled by shelling out to ffmpeg/ffprobe.

ffmpeg invocations used for container files::

    probe    ffprobe -v error -select_streams v:0
                     -show_entries stream=width,height,r_frame_rate:format=duration -of json IN
    frame    ffmpeg -v error -ss T -i IN -frames:v 1 -f image2pipe -vcodec png -
    trim     ffmpeg -v error -y -i IN -t DURATION -c copy OUT          (stream copy)
    suffix   ffmpeg -v error -y -ss START -i IN -c copy OUT
    scale    ffmpeg -v error -y -i IN -vf scale=W:H OUT
    stitch   ffmpeg -v error -y -f concat -safe 0 -i LIST -c copy OUT  (concat demuxer)
"""

from __future__ import annotations

import io
import json
import math
import shutil
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from PIL import Image, PngImagePlugin

from .errors import EmptyVideo, IncompatibleStreams, IndexOutOfRange, ResampleError, UnreadableVideo

FRAME_PATTERN = "frame_{:05d}.png"
META_FILE = "meta.json"
TAG_KEY = "vidrefine.tag"
_EPS = 1e-9


@dataclass(frozen=True)
class Frame:
    image: bytes
    timestamp: float


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple[Frame, ...]
    rate: float

    def __post_init__(self):
        if not self.frames:
            raise EmptyVideo("frame sequence is empty")
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("frame timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    def timestamp(self, n: int) -> float:
        """Timestamp of the 1-based frame ``n``."""
        return self.frames[n - 1].timestamp


@dataclass(frozen=True)
class VideoHandle:
    path: Path
    kind: str  # "frames" | "container"
    duration: float
    fps: float

    def __post_init__(self):
        if self.kind not in ("frames", "container"):
            raise ValueError(f"unknown video kind {self.kind!r}")
        if self.duration <= 0:
            raise EmptyVideo(f"{self.path}: duration must be positive")


# ---------------------------------------------------------------------------
# External media tool
# ---------------------------------------------------------------------------

Runner = Callable[..., subprocess.CompletedProcess]


@dataclass
class MediaTool:
    ffmpeg: str = "ffmpeg"
    ffprobe: str = "ffprobe"
    runner: Runner = field(default=subprocess.run, repr=False)

    def _run(self, args: list[str]) -> bytes:
        try:
            proc = self.runner(args, capture_output=True, check=False)
        except FileNotFoundError as exc:
            raise UnreadableVideo(f"media tool not found: {args[0]}") from exc
        if proc.returncode != 0:
            err = proc.stderr.decode(errors="replace") if isinstance(proc.stderr, bytes) else str(proc.stderr)
            raise UnreadableVideo(f"{args[0]} failed ({proc.returncode}): {err.strip()}")
        return proc.stdout

    def probe(self, path: Path) -> tuple[float, float, int, int]:
        """Return ``(duration, fps, width, height)``."""
        out = self._run([
            self.ffprobe, "-v", "error", "-select_streams", "v:0",
            "-show_entries", "stream=width,height,r_frame_rate:format=duration",
            "-of", "json", str(path),
        ])
        try:
            info = json.loads(out)
            stream = info["streams"][0]
            fps = float(Fraction(stream["r_frame_rate"]))
            return float(info["format"]["duration"]), fps, int(stream["width"]), int(stream["height"])
        except (ValueError, KeyError, IndexError, ZeroDivisionError) as exc:
            raise UnreadableVideo(f"unexpected ffprobe output for {path}") from exc

    def extract_frame(self, path: Path, t: float) -> bytes:
        return self._run([
            self.ffmpeg, "-v", "error", "-ss", f"{t:.6f}", "-i", str(path),
            "-frames:v", "1", "-f", "image2pipe", "-vcodec", "png", "-",
        ])

    def trim(self, src: Path, dst: Path, duration: float) -> None:
        self._run([self.ffmpeg, "-v", "error", "-y", "-i", str(src), "-t", f"{duration:.6f}", "-c", "copy", str(dst)])

    def suffix(self, src: Path, dst: Path, start: float) -> None:
        self._run([self.ffmpeg, "-v", "error", "-y", "-ss", f"{start:.6f}", "-i", str(src), "-c", "copy", str(dst)])

    def scale(self, src: Path, dst: Path, width: int, height: int) -> None:
        self._run([self.ffmpeg, "-v", "error", "-y", "-i", str(src), "-vf", f"scale={width}:{height}", str(dst)])

    def concat(self, parts: Sequence[Path], dst: Path) -> None:
        listing = dst.with_suffix(".concat.txt")
        listing.write_text("".join(f"file '{Path(p).resolve()}'\n" for p in parts))
        self._run([self.ffmpeg, "-v", "error", "-y", "-f", "concat", "-safe", "0", "-i", str(listing), "-c", "copy", str(dst)])


# ---------------------------------------------------------------------------
# Frame directories
# ---------------------------------------------------------------------------


def frame_files(path: Path) -> list[Path]:
    return sorted(Path(path).glob("frame_*.png"))


def write_frame_dir(dest: str | Path, images: Sequence[bytes], fps: float) -> VideoHandle:
    if not images:
        raise EmptyVideo("cannot write a video without frames")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    for old in frame_files(dest):
        old.unlink()
    for k, img in enumerate(images):
        (dest / FRAME_PATTERN.format(k)).write_bytes(img)
    duration = len(images) / fps
    (dest / META_FILE).write_text(json.dumps({"fps": fps, "duration": duration}, indent=2) + "\n")
    return VideoHandle(dest, "frames", duration, fps)


def open_video(path: str | Path, tool: MediaTool | None = None) -> VideoHandle:
    path = Path(path)
    if path.is_dir():
        meta_path = path / META_FILE
        try:
            meta = json.loads(meta_path.read_text())
            fps = float(meta["fps"])
        except (OSError, ValueError, KeyError) as exc:
            raise UnreadableVideo(f"{path}: missing or invalid {META_FILE}") from exc
        count = len(frame_files(path))
        if count == 0:
            raise EmptyVideo(f"{path}: no frames")
        return VideoHandle(path, "frames", float(meta.get("duration", count / fps)), fps)
    if not path.exists():
        raise UnreadableVideo(f"{path}: no such file")
    duration, fps, _, _ = (tool or MediaTool()).probe(path)
    return VideoHandle(path, "container", duration, fps)


def _images(v: VideoHandle) -> list[bytes]:
    return [p.read_bytes() for p in frame_files(v.path)]


def image_size(img: bytes) -> tuple[int, int]:
    with Image.open(io.BytesIO(img)) as im:
        return im.size


def resize_png(img: bytes, size: tuple[int, int]) -> bytes:
    with Image.open(io.BytesIO(img)) as im:
        info = PngImagePlugin.PngInfo()
        for k, v in getattr(im, "text", {}).items():
            info.add_text(k, v)
        out = io.BytesIO()
        im.resize(size).save(out, format="PNG", pnginfo=info)
        return out.getvalue()


def tagged_frame(tag: str, size: tuple[int, int] = (16, 16)) -> bytes:
    """Solid-colour PNG carrying ``tag`` in a text chunk (used by scripted generators)."""
    digest = sum((k + 1) * ord(ch) for k, ch in enumerate(tag))
    color = (digest * 37 % 256, digest * 91 % 256, digest * 53 % 256)
    info = PngImagePlugin.PngInfo()
    info.add_text(TAG_KEY, tag)
    out = io.BytesIO()
    Image.new("RGB", size, color).save(out, format="PNG", pnginfo=info)
    return out.getvalue()


def frame_tag(img: bytes) -> str | None:
    try:
        with Image.open(io.BytesIO(img)) as im:
            return getattr(im, "text", {}).get(TAG_KEY)
    except Exception:
        return None


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _n_samples(duration: float, rate: float) -> int:
    return max(1, math.floor(duration * rate + _EPS))


def sample_frames(v: VideoHandle, rate: float, tool: MediaTool | None = None) -> FrameSequence:
    """Sample uniformly at ``rate`` frames/second starting from the first frame."""
    if rate <= 0:
        raise ValueError(f"sampling rate must be positive, got {rate}")
    if rate > v.fps + _EPS:
        raise ResampleError(f"sampling rate {rate} exceeds source fps {v.fps}")
    n = _n_samples(v.duration, rate)
    times = [k / rate for k in range(n)]
    if v.kind == "frames":
        files = frame_files(v.path)
        if not files:
            raise UnreadableVideo(f"{v.path}: no frames")
        picks = [min(len(files) - 1, math.floor(t * v.fps + _EPS)) for t in times]
        frames = tuple(Frame(files[i].read_bytes(), t) for i, t in zip(picks, times))
    else:
        tool = tool or MediaTool()
        frames = tuple(Frame(tool.extract_frame(v.path, t), t) for t in times)
    return FrameSequence(frames, rate)


def _cut_time(seq: FrameSequence, n_star: int) -> float:
    if not 1 <= n_star <= len(seq):
        raise IndexOutOfRange(f"n* = {n_star} outside 1..{len(seq)}")
    # keep the keyframe's whole sampling interval
    return seq.timestamp(n_star) + 1.0 / seq.rate


def trim(v: VideoHandle, seq: FrameSequence, n_star: int, dest: str | Path, tool: MediaTool | None = None) -> VideoHandle:
    """Keep ``[0, timestamp(n*)]`` including the keyframe's sampling interval."""
    cut = _cut_time(seq, n_star)
    if n_star == len(seq):
        return v
    dest = Path(dest)
    if v.kind == "frames":
        images = _images(v)
        keep = max(1, min(len(images), round(cut * v.fps)))
        return write_frame_dir(dest, images[:keep], v.fps)
    tool = tool or MediaTool()
    dest.parent.mkdir(parents=True, exist_ok=True)
    tool.trim(v.path, dest, cut)
    return VideoHandle(dest, "container", min(cut, v.duration), v.fps)


def remainder(v: VideoHandle, seq: FrameSequence, n_star: int, dest: str | Path, tool: MediaTool | None = None) -> VideoHandle:
    """The part of ``v`` that :func:`trim` drops."""
    cut = _cut_time(seq, n_star)
    dest = Path(dest)
    if v.kind == "frames":
        images = _images(v)
        keep = max(1, min(len(images), round(cut * v.fps)))
        if keep >= len(images):
            raise EmptyVideo("nothing remains after the cut")
        return write_frame_dir(dest, images[keep:], v.fps)
    if cut >= v.duration - _EPS:
        raise EmptyVideo("nothing remains after the cut")
    tool = tool or MediaTool()
    dest.parent.mkdir(parents=True, exist_ok=True)
    tool.suffix(v.path, dest, cut)
    return VideoHandle(dest, "container", v.duration - cut, v.fps)


def stitch(prefix: VideoHandle, segment: VideoHandle, dest: str | Path, tool: MediaTool | None = None) -> VideoHandle:
    """Concatenate ``prefix`` then ``segment``; the segment is resized to the prefix resolution."""
    if prefix.kind != segment.kind:
        raise IncompatibleStreams(f"cannot stitch {prefix.kind} with {segment.kind}")
    dest = Path(dest)
    if prefix.kind == "frames":
        if abs(prefix.fps - segment.fps) > _EPS:
            raise IncompatibleStreams(f"fps mismatch: {prefix.fps} vs {segment.fps}")
        head, tail = _images(prefix), _images(segment)
        if not tail:
            raise EmptyVideo("segment has no frames")
        if not head:
            raise EmptyVideo("prefix has no frames")
        size = image_size(head[0])
        tail = [img if image_size(img) == size else resize_png(img, size) for img in tail]
        return write_frame_dir(dest, head + tail, prefix.fps)

    tool = tool or MediaTool()
    dest.parent.mkdir(parents=True, exist_ok=True)
    _, _, w, h = tool.probe(prefix.path)
    _, _, sw, sh = tool.probe(segment.path)
    seg_path = segment.path
    if (sw, sh) != (w, h):
        seg_path = dest.with_name(dest.stem + ".segment-scaled" + segment.path.suffix)
        tool.scale(segment.path, seg_path, w, h)
    tool.concat([prefix.path, seg_path], dest)
    return VideoHandle(dest, "container", prefix.duration + segment.duration, prefix.fps)


def copy_video(v: VideoHandle, dest: str | Path) -> VideoHandle:
    dest = Path(dest)
    if v.kind == "frames":
        return write_frame_dir(dest, _images(v), v.fps)
    dest.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(v.path, dest)
    return VideoHandle(dest, "container", v.duration, v.fps)
