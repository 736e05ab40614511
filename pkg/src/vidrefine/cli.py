"""Command-line entry point.

JSON results go to stdout, diagnostics to stderr. Exit status: 0 success,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .automaton import load_scores, save_scores
from .calibration import fit_calibration, load_pairs, roc_auc, roc_curve
from .checker import oracle_satisfaction, satisfaction_probability
from .clients import Clients
from .diagnosis import DEFAULT_GAMMA, diagnose
from .errors import DimensionMismatch, VidRefineError
from .logic import load_spec, save_spec
from .pipeline import RefinementConfig, refine, run_dir_for, verify_once
from .videoio import open_video

log = logging.getLogger("vidrefine")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _load_pair(scores_path: str, spec_path: str):
    props, C = load_scores(scores_path)
    spec = load_spec(spec_path)
    if props.texts != spec.propositions.texts:
        raise DimensionMismatch(
            f"scores propositions {list(props.texts)} differ from spec propositions {list(spec.propositions.texts)}"
        )
    return spec, C


def _config(args) -> RefinementConfig:
    cfg = RefinementConfig.load(args.config) if getattr(args, "config", None) else RefinementConfig()
    return cfg


def _clients(args, cfg: RefinementConfig) -> Clients:
    calibration = cfg.load_calibration()
    if getattr(args, "calibration", None):
        from .calibration import CalibrationModel
        calibration = CalibrationModel.load(args.calibration)
    if args.mock:
        return Clients.from_scenario(args.mock, calibration, cfg.client_configs() or None)
    if not cfg.clients:
        raise VidRefineError("no service configuration: pass --config with a 'clients' section, or --mock")
    return Clients.from_config(cfg.client_configs(), calibration)


# -- subcommands --------------------------------------------------------------

def cmd_decompose(args) -> int:
    cfg = _config(args)
    result = _clients(args, cfg).decomposer.decompose(args.prompt)
    if args.out:
        save_spec(result.spec, args.out)
    _emit(result.spec.to_json())
    return 0


def cmd_score(args) -> int:
    cfg = _config(args)
    spec = load_spec(args.spec)
    clients = _clients(args, cfg)
    video = open_video(args.video)
    rate = args.rate if args.rate is not None else cfg.sampling_rate
    prob, C = verify_once(video, spec, clients.scorer, rate)
    if args.out:
        save_scores(spec.propositions, C, args.out)
    _emit({**C.to_json(spec.propositions), "probability": prob})
    return 0


def cmd_verify(args) -> int:
    spec, C = _load_pair(args.scores, args.spec)
    check = oracle_satisfaction if args.oracle else satisfaction_probability
    _emit(check(spec.propositions, C, spec.formula).to_json())
    return 0


def cmd_oracle(args) -> int:
    spec, C = _load_pair(args.scores, args.spec)
    _emit(oracle_satisfaction(spec.propositions, C, spec.formula).to_json())
    return 0


def cmd_diagnose(args) -> int:
    spec, C = _load_pair(args.scores, args.spec)
    report = diagnose(spec.propositions, C, spec.formula, args.gamma, noise_seed=args.noise_seed)
    _emit(report.to_json())
    return 0


def cmd_refine(args) -> int:
    cfg = _config(args)
    overrides = {}
    if args.workspace:
        overrides["workspace"] = args.workspace
    if args.run_id:
        overrides["run_id"] = args.run_id
    if overrides:
        cfg = RefinementConfig.from_json({**cfg.__dict__, **overrides})
    clients = _clients(args, cfg)
    _, manifest = refine(args.prompt, cfg, clients)
    path = run_dir_for(cfg, manifest) / "manifest.json"
    _emit({
        "manifest": str(path),
        "stop_reason": manifest.stop_reason,
        "final_probability": manifest.final_probability,
        "iterations": len(manifest.iterations),
    })
    return 1 if manifest.stop_reason == "client_failure" else 0


def cmd_calibrate(args) -> int:
    data = load_pairs(args.pairs)
    model, accuracy = fit_calibration(data)
    points = roc_curve(data)
    model.save(args.out)
    _emit({
        "threshold": model.threshold,
        "accuracy": accuracy,
        "auc": roc_auc(points),
        "roc": [list(p) for p in points],
        "model": str(args.out),
    })
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vidrefine", description="Temporal-logic verification and refinement of generated videos.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def services(sp):
        sp.add_argument("--config", help="refinement/config JSON (clients, calibration, ...)")
        sp.add_argument("--mock", help="scenario JSON for scripted services")

    def pair(sp):
        sp.add_argument("--scores", required=True, help="confidence matrix JSON")
        sp.add_argument("--spec", required=True, help="spec JSON with propositions and formula")

    sp = sub.add_parser("decompose", help="prompt -> propositions and formula")
    sp.add_argument("--prompt", required=True)
    sp.add_argument("--out", help="write the spec JSON here")
    services(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("score", help="score sampled frames of a video against a spec")
    sp.add_argument("--video", required=True, help="frame directory or container file")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--rate", type=float, help="sampling rate in frames/second")
    sp.add_argument("--calibration", help="calibration model JSON")
    sp.add_argument("--out", help="write the scores JSON here")
    services(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("verify", help="satisfaction probability of a spec over a confidence matrix")
    pair(sp)
    sp.add_argument("--oracle", action="store_true", help="use brute-force enumeration instead of the DP")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", help="brute-force satisfaction probability (small inputs only)")
    pair(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("diagnose", help="weakest proposition and most impacted frame")
    pair(sp)
    sp.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    sp.add_argument("--noise-seed", type=int, help="randomize the gamma offset with this seed")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("refine", help="run the full refinement loop")
    sp.add_argument("--prompt", required=True)
    sp.add_argument("--workspace", help="override the config workspace directory")
    sp.add_argument("--run-id", help="override the run identifier")
    services(sp)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("calibrate", help="fit the detector threshold from score,label pairs")
    sp.add_argument("--pairs", required=True, help="CSV of score,label rows (label 1 or 0)")
    sp.add_argument("--out", default="calibration.json", help="calibration model output path")
    sp.set_defaults(func=cmd_calibrate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (VidRefineError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
