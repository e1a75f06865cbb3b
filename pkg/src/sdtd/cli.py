"""The ``sdtd`` executable.

Every subcommand reads the pipeline configuration (``--config`` file, then
the convenience flags, then any ``--section.field=value`` overrides),
does its work and writes a JSON run log. Exit codes are stable:

    0  success
    1  usage or configuration error
    2  data error (missing, empty or malformed input)
    3  numerical failure, including a failed self-test
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from sdtd import __version__
from sdtd.datagen import generate_dataset
from sdtd.egomotion import compensate_sequence
from sdtd.experiment import failed_checks, run_experiment
from sdtd.flow import compute_flows, make_solver
from sdtd.models.configs import CompensationMode, FlowSolverKind, OverwriteRule, StreamKind, TtiMode
from sdtd.models.exceptions import ConfigError, DataError, NumericalError, SdtdError
from sdtd.models.pipeline import PipelineConfig, parse_value, resolve_data_path, split_override
from sdtd.pipeline import STAGES, manifest_and_loader, process_manifest
from sdtd.selftest import run_selftest
from sdtd.serialization import build_run_log, load_json, save_json
from sdtd.streams.fusion import parse_fusion_weights
from sdtd.streams.training import (
    evaluate,
    load_stream_model,
    report_predictions,
    score_predictions,
    train_stream,
)
from sdtd.texture import build_sequence_from_config, export_tti_png
from sdtd.trajectories import extract_trajectories
from sdtd.videoio import (
    load_frame_sequence,
    read_flo,
    read_trajectories,
    save_tti_sequence,
    write_flo,
    write_image,
    write_trajectories,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

RUN_LOG_DIR = "runs"

# convenience flag -> config key
FLAG_KEYS = {
    "seed": "seed",
    "jobs": "jobs",
    "solver": "flow.solver",
    "camera_compensation": "egomotion.mode",
    "threshold_ratio": "tti.threshold_ratio",
    "mode": "tti.mode",
    "overwrite_rule": "tti.overwrite_rule",
    "bound": "tti.bound",
}


class UsageError(ConfigError):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunOutcome:
    """What a subcommand did, for the run log."""

    inputs: List[Path] = field(default_factory=list)
    outputs: List[Path] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


def _flo_files(directory: Path) -> List[Path]:
    files = sorted(Path(directory).glob("*.flo"))
    if not files:
        raise DataError(f"no .flo files in {directory}")
    return files


def _cmd_datagen(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    manifest, path = generate_dataset(config.dataset, args.out, config.seed, config.jobs)
    return RunOutcome(
        outputs=[path],
        metrics={
            "videos": len(manifest.entries),
            "classes": manifest.class_names,
            "train": len(manifest.split("train")),
            "test": len(manifest.split("test")),
        },
    )


def _cmd_flow(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    sequence = load_frame_sequence(args.input)
    flows = compute_flows(sequence, make_solver(config.flow))
    out = Path(args.out)
    outcome = RunOutcome(inputs=[Path(args.input)])
    for index, flow in enumerate(flows):
        outcome.outputs.append(write_flo(flow, out / f"flow_{index:05d}.flo"))
    outcome.metrics = {
        "pairs": len(flows),
        "median_u": [float(np.median(f.u)) for f in flows],
        "median_v": [float(np.median(f.v)) for f in flows],
    }
    return outcome


def _cmd_compensate(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    sequence = load_frame_sequence(args.input)
    solver = make_solver(config.flow)
    outcome = RunOutcome(inputs=[Path(args.input)])
    if args.flows:
        files = _flo_files(args.flows)
        flows = [read_flo(p) for p in files]
        outcome.inputs.extend(files)
    else:
        flows = compute_flows(sequence, solver)
    result = compensate_sequence(sequence, flows, config.egomotion, solver)
    out = Path(args.out)
    for index, flow in enumerate(result.flows):
        outcome.outputs.append(write_flo(flow, out / f"comp_{index:05d}.flo"))
    outcome.warnings = result.warnings
    outcome.metrics = {
        "pairs": len(result.flows),
        "estimated": sum(h is not None for h in result.homographies),
        "mode": config.egomotion.mode,
    }
    return outcome


def _cmd_trajectories(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    files = _flo_files(args.flows)
    trajectories = extract_trajectories([read_flo(p) for p in files], config.trajectory)
    path = write_trajectories(trajectories, args.out)
    return RunOutcome(
        inputs=files,
        outputs=[path],
        metrics={"trajectories": len(trajectories), "points": trajectories.total_points},
    )


def _cmd_tti(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    trajectories = read_trajectories(args.trajectories)
    sequence = build_sequence_from_config(trajectories, config.tti)
    outputs = save_tti_sequence(sequence, args.out, config.tti.bound, config.tti.export_png)
    if args.export_png_dir:
        png_dir = Path(args.export_png_dir)
        for index, image in enumerate(sequence.images):
            outputs.append(write_image(export_tti_png(image, config.tti.bound), png_dir / f"tti_{index:04d}.png"))
    height, width = trajectories.frame_size
    return RunOutcome(
        inputs=[Path(args.trajectories)],
        outputs=outputs,
        metrics={
            "images": len(sequence),
            "threshold": config.tti.threshold_for(height, width),
            "segment_bounds": [list(b) for b in sequence.segment_bounds],
        },
    )


def _cmd_process(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    reports = process_manifest(args.manifest, config, args.stages or STAGES, args.force)
    return RunOutcome(
        inputs=[Path(args.manifest)],
        outputs=[Path(r.artifacts) for r in reports],
        metrics={
            "videos": len(reports),
            "trajectories": sum(r.trajectories for r in reports),
            "tti_images": sum(r.tti_images for r in reports),
            "recomputed": {r.video: r.recomputed for r in reports},
        },
        warnings=[f"{r.video}: {w}" for r in reports for w in r.warnings],
    )


def _cmd_train(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    manifest, loader = manifest_and_loader(args.manifest, config)
    result = train_stream(manifest, StreamKind(args.stream), loader, config)
    path = result.model.save(args.out)
    return RunOutcome(
        inputs=[Path(args.manifest)],
        outputs=[path],
        metrics={
            "stream": args.stream,
            "iterations": len(result.log),
            "final_loss": result.final_loss,
            "loss": [record["loss"] for record in result.log],
        },
    )


def _parse_checkpoints(tokens: Sequence[str]) -> Dict[StreamKind, Path]:
    checkpoints: Dict[StreamKind, Path] = {}
    for token in tokens:
        name, sep, path = token.partition("=")
        if not sep or not path:
            raise UsageError(f"expected stream=path, got {token!r}")
        try:
            checkpoints[StreamKind(name.strip())] = Path(path)
        except ValueError as exc:
            raise UsageError(f"unknown stream {name!r}") from exc
    return checkpoints


def _cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    checkpoints = _parse_checkpoints(args.checkpoints)
    manifest, loader = manifest_and_loader(args.manifest, config)
    models = {
        kind: load_stream_model(path, manifest, kind, loader, config) for kind, path in checkpoints.items()
    }
    weights = parse_fusion_weights(args.fuse) if args.fuse else None
    report = evaluate(manifest, models, loader, config, weights)
    path = save_json(report, args.out)
    return RunOutcome(
        inputs=[Path(args.manifest), *checkpoints.values()],
        outputs=[path],
        metrics=report.to_metrics(),
    )


def _cmd_fuse(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    document = load_json(args.report)
    labels, per_video, paths = report_predictions(document)
    weights = parse_fusion_weights(args.fuse) if args.fuse else config.fusion
    report = score_predictions(labels, per_video, document["class_names"], weights, paths)
    outcome = RunOutcome(inputs=[Path(args.report)], metrics=report.to_metrics())
    if args.out:
        outcome.outputs.append(save_json(report, args.out))
    return outcome


def _cmd_selftest(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    report = run_selftest()
    return RunOutcome(
        metrics={"passed": report.passed, "failures": report.failures},
        warnings=[f"{name}: {message}" for name, message in report.failures.items()],
        exit_code=EXIT_OK if report.ok else EXIT_NUMERICAL,
    )


def _cmd_experiment(args: argparse.Namespace, config: PipelineConfig) -> RunOutcome:
    metrics = run_experiment(args.out, config)
    failed = failed_checks(metrics)
    return RunOutcome(
        outputs=[Path(args.out) / "metrics.json"],
        metrics=metrics,
        warnings=[f"experiment check failed: {name}" for name in failed],
        exit_code=EXIT_NUMERICAL if failed else EXIT_OK,
    )


COMMANDS: Dict[str, Callable[[argparse.Namespace, PipelineConfig], RunOutcome]] = {
    "datagen": _cmd_datagen,
    "flow": _cmd_flow,
    "compensate": _cmd_compensate,
    "trajectories": _cmd_trajectories,
    "tti": _cmd_tti,
    "process": _cmd_process,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "fuse": _cmd_fuse,
    "selftest": _cmd_selftest,
    "experiment": _cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    """Parser for every subcommand.

    Settings without a dedicated flag are reached with
    ``--section.field=value``, for example ``--flow.tvl1.warps=3``.
    """
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--run-log", help="JSON run log path (default <work_dir>/runs/<command>.json)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for per-video stages")

    parser = _Parser(
        prog="sdtd",
        description="Trajectory texture image action recognition toolkit",
        allow_abbrev=False,
        epilog="Any config key can be overridden with --section.field=value.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name: str, text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=text, description=text, allow_abbrev=False)

    p = add("datagen", "generate the synthetic motion-class dataset")
    p.add_argument("--out", required=True, help="dataset root")

    p = add("flow", "optical flow for every frame pair of a video")
    p.add_argument("--input", required=True, help="frame directory or list file")
    p.add_argument("--out", required=True, help="directory for flow_NNNNN.flo")
    p.add_argument("--solver", choices=[k.value for k in FlowSolverKind])

    p = add("compensate", "remove camera motion from a video's flow")
    p.add_argument("--input", required=True, help="frame directory or list file")
    p.add_argument("--flows", help="directory of raw .flo files (computed when omitted)")
    p.add_argument("--out", required=True, help="directory for comp_NNNNN.flo")
    p.add_argument("--solver", choices=[k.value for k in FlowSolverKind])
    p.add_argument("--camera-compensation", choices=[m.value for m in CompensationMode])

    p = add("trajectories", "dense trajectories from a video's flow")
    p.add_argument("--flows", required=True, help="directory of .flo files in frame order")
    p.add_argument("--out", required=True, help="trajectory file")

    p = add("tti", "texture image sequence from trajectories")
    p.add_argument("--trajectories", required=True, help="trajectory file")
    p.add_argument("--out", required=True, help="sequence directory")
    p.add_argument("--threshold-ratio", type=float)
    p.add_argument("--mode", choices=[m.value for m in TtiMode])
    p.add_argument("--overwrite-rule", choices=[r.value for r in OverwriteRule])
    p.add_argument("--bound", type=float)
    p.add_argument("--export-png-dir", help="also write quantized PNGs here")

    p = add("process", "run the per-video stages over a manifest, reusing cached artifacts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stages", nargs="+", choices=list(STAGES))
    p.add_argument("--force", action="store_true", help="recompute cached stages")

    p = add("train", "train one stream")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stream", required=True, choices=[k.value for k in StreamKind])
    p.add_argument("--out", required=True, help="checkpoint path")

    p = add("eval", "evaluate streams and their late fusion on the test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoints", nargs="+", required=True, metavar="STREAM=PATH")
    p.add_argument("--fuse", help="weights, e.g. spatial=1,temporal=1,sdtd=2")
    p.add_argument("--out", required=True, help="evaluation report JSON")

    p = add("fuse", "re-fuse the per-stream predictions of an evaluation report")
    p.add_argument("--report", required=True, help="report written by eval")
    p.add_argument("--fuse", help="weights, e.g. spatial=1,temporal=1,sdtd=2")
    p.add_argument("--out", help="rescored report JSON")

    add("selftest", "run the built-in oracle checks")

    p = add("experiment", "datagen, processing, training and evaluation in one go")
    p.add_argument("--out", required=True, help="experiment directory")
    return parser


def resolve_config(args: argparse.Namespace, extra: Sequence[str]) -> PipelineConfig:
    """Config file, then convenience flags, then ``--key=value`` overrides.

    Raises:
        ConfigError: On an unknown key, malformed token or invalid value
    """
    config = PipelineConfig.from_file(resolve_data_path(args.config)) if args.config else PipelineConfig()
    overrides: Dict[str, Any] = {}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for token in extra:
        key, raw = split_override(token)
        overrides[key] = parse_value(raw)
    return config.apply_overrides(overrides) if overrides else config


def _run_log_path(args: argparse.Namespace, config: PipelineConfig) -> Path:
    if args.run_log:
        return Path(args.run_log)
    return resolve_data_path(config.work_dir) / RUN_LOG_DIR / f"{args.command}.json"


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, ValidationError)):
        return EXIT_USAGE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_DATA


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``sdtd`` executable.

    Returns:
        Process exit code
    """
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(list(argv) if argv is not None else sys.argv[1:])
    except UsageError as exc:
        print(f"sdtd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args, extra)
    except (ConfigError, ValidationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sdtd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        outcome = COMMANDS[args.command](args, config)
    except (SdtdError, ValidationError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        outcome = RunOutcome(warnings=[str(exc)], exit_code=_exit_code(exc))
    except ValueError as exc:
        # invalid input values that library code rejected without an sdtd error type
        logger.error("%s failed: %s", args.command, exc)
        outcome = RunOutcome(warnings=[f"{type(exc).__name__}: {exc}"], exit_code=EXIT_DATA)

    log = build_run_log(
        args.command,
        config,
        inputs=outcome.inputs,
        outputs=outcome.outputs,
        metrics=outcome.metrics,
        warnings=outcome.warnings,
        exit_code=outcome.exit_code,
    )
    save_json(log, _run_log_path(args, config))
    return outcome.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
