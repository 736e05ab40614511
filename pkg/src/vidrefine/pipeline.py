"""The generate / verify / diagnose / trim / regenerate / stitch loop.

Workspace layout for one run::

    run-<id>/manifest.json
    run-<id>/requests.jsonl              service audit log
    run-<id>/iter-<k>/video/             video verified in pass k (k = 0 is the first generation)
    run-<id>/iter-<k>/scores.json
    run-<id>/iter-<k>/diagnosis.json     only when pass k leads to a refinement
    run-<id>/iter-<k>/trimmed/, keyframe.png, segment/

Manifest paths are relative to the run directory so a rerun of the same
scenario reproduces the manifest byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .automaton import ConfidenceMatrix, save_scores
from .calibration import IDENTITY, CalibrationModel
from .checker import satisfaction_probability
from .clients import Clients, ClientConfig, GenerationRequest
from .clients.services import ContinuationWriter, DecompositionResult, FrameScorer
from .diagnosis import DEFAULT_GAMMA, diagnose
from .errors import ClientFailure, VidRefineError
from .logic import Spec, to_text
from .videoio import FrameSequence, MediaTool, VideoHandle, sample_frames, stitch, trim

log = logging.getLogger(__name__)

STOP_REASONS = ("threshold_met", "iteration_cap", "already_satisfied", "client_failure")


@dataclass(frozen=True)
class RefinementConfig:
    threshold: float = 0.7
    max_iterations: int | None = None  # None: one pass per proposition
    gamma: float = DEFAULT_GAMMA
    sampling_rate: float = 1.0
    edit_keyframe: bool = False
    workspace: str = "runs"
    run_id: str | None = None
    noise_seed: int | None = None
    workers: int = 1
    calibration: str | None = None  # path to a calibration model file
    clients: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")

    def iteration_cap(self, n_props: int) -> int:
        return self.max_iterations if self.max_iterations is not None else max(1, n_props)

    def client_configs(self) -> dict[str, ClientConfig]:
        return {k: ClientConfig.from_json(v) for k, v in self.clients.items()}

    def load_calibration(self) -> CalibrationModel:
        return CalibrationModel.load(self.calibration) if self.calibration else IDENTITY

    @classmethod
    def from_json(cls, data: dict) -> "RefinementConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RefinementConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class RunManifest:
    prompt: str
    run_id: str
    config: dict
    feedback_template: str
    decomposition: dict | None = None
    verifications: list[dict] = field(default_factory=list)
    iterations: list[dict] = field(default_factory=list)
    final_probability: float | None = None
    final_video: str | None = None
    stop_reason: str | None = None
    failure: dict | None = None

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def save(self, path: Path) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(self.dumps())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _verify(video: VideoHandle, spec: Spec, scorer: FrameScorer, rate: float,
            tool: MediaTool | None = None) -> tuple[float, ConfidenceMatrix, FrameSequence]:
    seq = sample_frames(video, rate, tool)
    C = scorer.score_matrix(spec.propositions, seq)
    prob = satisfaction_probability(spec.propositions, C, spec.formula).probability
    return prob, C, seq


def verify_once(video: VideoHandle, decomposition: Spec | DecompositionResult, scorer: FrameScorer,
                rate: float = 1.0, tool: MediaTool | None = None) -> tuple[float, ConfidenceMatrix]:
    """Score every (proposition, sampled frame) pair and check the formula."""
    spec = decomposition.spec if isinstance(decomposition, DecompositionResult) else decomposition
    prob, C, _ = _verify(video, spec, scorer, rate, tool)
    return prob, C


def default_run_id(prompt: str, cfg: RefinementConfig) -> str:
    key = json.dumps({"prompt": prompt, "threshold": cfg.threshold, "max_iterations": cfg.max_iterations,
                      "gamma": cfg.gamma, "rate": cfg.sampling_rate, "edit": cfg.edit_keyframe}, sort_keys=True)
    return hashlib.sha256(key.encode()).hexdigest()[:12]


class _Stage:
    """Re-raise domain errors from one pipeline stage as ClientFailure."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, VidRefineError) and not isinstance(exc, ClientFailure):
            raise ClientFailure(self.name, exc) from exc
        return False


def refine(prompt: str, cfg: RefinementConfig, clients: Clients, tool: MediaTool | None = None) -> tuple[VideoHandle | None, RunManifest]:
    run_id = cfg.run_id or default_run_id(prompt, cfg)
    run_dir = Path(cfg.workspace) / f"run-{run_id}"
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    clients.audit.path = run_dir / "requests.jsonl"
    manifest_path = run_dir / "manifest.json"

    def rel(p: Path) -> str:
        return Path(os.path.relpath(p, run_dir)).as_posix()

    manifest = RunManifest(
        prompt=prompt,
        run_id=run_id,
        config={
            "threshold": cfg.threshold,
            "max_iterations": cfg.max_iterations,
            "gamma": cfg.gamma,
            "sampling_rate": cfg.sampling_rate,
            "edit_keyframe": cfg.edit_keyframe,
            "noise_seed": cfg.noise_seed,
        },
        feedback_template=ContinuationWriter.feedback_template,
    )
    video: VideoHandle | None = None
    try:
        with _Stage("generate"):
            video = clients.generator.generate(GenerationRequest(prompt), run_dir / "iter-0" / "video")
        with _Stage("decompose"):
            decomposition = clients.decomposer.decompose(prompt)
        spec = decomposition.spec
        props = spec.propositions
        kappa = cfg.iteration_cap(len(props))
        manifest.config["iteration_cap"] = kappa
        manifest.decomposition = {
            "propositions": list(props.texts),
            "formula": to_text(spec.formula),
            "raw": decomposition.raw,
        }
        manifest.save(manifest_path)

        k = 0
        while True:
            iter_dir = run_dir / f"iter-{k}"
            iter_dir.mkdir(parents=True, exist_ok=True)
            with _Stage("score"):
                prob, C, seq = _verify(video, spec, clients.scorer, cfg.sampling_rate, tool)
            save_scores(props, C, iter_dir / "scores.json")
            manifest.verifications.append({
                "pass": k, "video": rel(video.path), "frames": len(seq),
                "scores": rel(iter_dir / "scores.json"), "probability": prob,
            })
            manifest.final_probability = prob
            manifest.final_video = rel(video.path)
            log.info("pass %d: P = %.6f over %d frames", k, prob, len(seq))

            if prob >= cfg.threshold:
                manifest.stop_reason = "already_satisfied" if k == 0 else "threshold_met"
                break
            if k >= kappa:
                manifest.stop_reason = "iteration_cap"
                break

            report = diagnose(props, C, spec.formula, cfg.gamma, noise_seed=cfg.noise_seed, workers=cfg.workers)
            (iter_dir / "diagnosis.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
            record = {
                "iteration": k + 1,
                "scores": rel(iter_dir / "scores.json"),
                "probability": prob,
                "diagnosis": report.to_json(),
                "weakest_proposition": props[report.weakest].text,
                "keyframe_index": report.impacted_index,
            }
            if max(report.deltas) <= 0.0:
                # forcing any single proposition cannot help; regenerating is futile
                record["skipped"] = "no proposition improves satisfaction"
                manifest.iterations.append(record)
                manifest.stop_reason = "iteration_cap"
                break

            weakest = props[report.weakest]
            n_star = report.impacted_index
            with _Stage("trim"):
                trimmed = trim(video, seq, n_star, iter_dir / "trimmed", tool)
            keyframe = seq[n_star - 1].image
            (iter_dir / "keyframe.png").write_bytes(keyframe)
            record["trimmed"] = rel(trimmed.path)
            record["keyframe"] = rel(iter_dir / "keyframe.png")
            if cfg.edit_keyframe:
                if clients.editor is None:
                    raise ClientFailure("edit_keyframe", VidRefineError("no image editor configured"))
                with _Stage("edit_keyframe"):
                    keyframe = clients.editor.edit(keyframe, weakest)
                (iter_dir / "keyframe-edited.png").write_bytes(keyframe)
                record["edited_keyframe"] = rel(iter_dir / "keyframe-edited.png")
            with _Stage("continuation"):
                t_new = clients.writer.continuation(prompt, weakest)
            record["t_new"] = t_new
            with _Stage("generate"):
                segment = clients.generator.generate(GenerationRequest(t_new, keyframe), iter_dir / "segment")
            record["segment"] = rel(segment.path)
            with _Stage("stitch"):
                video = stitch(trimmed, segment, run_dir / f"iter-{k + 1}" / "video", tool)
            record["video"] = rel(video.path)
            manifest.iterations.append(record)
            manifest.save(manifest_path)
            k += 1
    except ClientFailure as exc:
        log.error("run %s stopped: %s", run_id, exc)
        manifest.stop_reason = "client_failure"
        manifest.failure = {"stage": exc.stage, "error": f"{type(exc.cause).__name__}: {exc.cause}"}

    manifest.save(manifest_path)
    return video, manifest


def run_dir_for(cfg: RefinementConfig, manifest: RunManifest) -> Path:
    return Path(cfg.workspace) / f"run-{manifest.run_id}"
