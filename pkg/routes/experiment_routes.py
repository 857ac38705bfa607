"""
Command routes for the laboratory.

This module defines the argparse command tree (zoo, fingerprint, score-outputs,
sweep, report, init-manifest) and routes each subcommand to the ExperimentController.
"""

import argparse
import logging
from pathlib import Path

from config import settings
from controllers import ExperimentController, load_manifest
from schemas import ExperimentManifest
from services import StorageService

logger = logging.getLogger(__name__)

FINGERPRINT_MODES = ("sac-w", "sac-m", "sac-normal", "sac-source", "baseline-asr")


def _controller(args) -> ExperimentController:
    workspace = Path(args.workspace or settings.SAC_WORKSPACE)
    manifest_path = Path(args.manifest) if args.manifest else workspace / "manifest.json"
    return ExperimentController(workspace, load_manifest(manifest_path), manifest_path, args.workers)


def zoo_command(args) -> None:
    executed = _controller(args).cmd_zoo()
    print(f"zoo: {executed} jobs executed")


def fingerprint_command(args) -> None:
    report = _controller(args).cmd_fingerprint(args.mode, args.kernel, args.labels, args.smooth_eps,
                                               args.filter_irrelevant or None)
    for cell in report.auc_table:
        value = "-" if cell.auc is None else f"{cell.auc:.3f}"
        print(f"{cell.tag:<16} vs {cell.reference_tag:<18} AUC {value}{'  (inverted)' if cell.inverted else ''}")


def score_outputs_command(args) -> None:
    scores = _controller(args).cmd_score_outputs(args.fingerprint, [Path(path) for path in args.outputs])
    for path, distance in scores.items():
        print(f"{path}  {distance:.6f}")


def sweep_command(args) -> None:
    curve = _controller(args).cmd_sweep(args.kind)
    print(curve.model_dump_json(indent=2))


def report_command(args) -> None:
    print(_controller(args).cmd_report([Path(run) for run in args.runs]))


def init_manifest_command(args) -> None:
    StorageService.write_text(args.file, ExperimentManifest().model_dump_json(indent=2))
    logger.info("Default manifest written to %s", args.file)


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command-line parser.

    Returns:
        argparse.ArgumentParser: Parser whose subcommands carry their handler in `handler`.
    """
    parser = argparse.ArgumentParser(prog="sac-lab", description=settings.PROJECT_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("--workspace", help="Workspace root (default: $SAC_WORKSPACE)")
    parser.add_argument("--manifest", help="Manifest file (default: <workspace>/manifest.json)")
    parser.add_argument("--workers", type=int, default=None, help="Worker pool size (default: $MAX_WORKERS)")
    subcommands = parser.add_subparsers(dest="command", required=True)

    zoo = subcommands.add_parser("zoo", help="Train the source, irrelevant, surrogate and attack models")
    zoo.set_defaults(handler=zoo_command)

    fingerprint = subcommands.add_parser("fingerprint", help="Fingerprint the source and score all suspects")
    fingerprint.add_argument("--mode", choices=FINGERPRINT_MODES, required=True)
    fingerprint.add_argument("--kernel", choices=("cosine", "rbf"), default=None)
    fingerprint.add_argument("--labels", choices=("prob", "smooth"), default=None)
    fingerprint.add_argument("--smooth-eps", type=float, default=None)
    fingerprint.add_argument("--filter-irrelevant", action="store_true")
    fingerprint.set_defaults(handler=fingerprint_command)

    score_outputs = subcommands.add_parser("score-outputs",
                                           help="Score output sets produced elsewhere against a fingerprint")
    score_outputs.add_argument("--fingerprint", required=True, help="Fingerprint name, e.g. sac-w-cosine-prob")
    score_outputs.add_argument("outputs", nargs="+", help="Output-set files (.saco)")
    score_outputs.set_defaults(handler=score_outputs_command)

    sweep = subcommands.add_parser("sweep", help="Pruning-ratio or sample-count sweep")
    sweep.add_argument("--kind", choices=("pruning", "samples"), required=True)
    sweep.set_defaults(handler=sweep_command)

    report = subcommands.add_parser("report", help="Tabulate AUC cells, aggregated over extra run workspaces")
    report.add_argument("--runs", nargs="*", default=[], help="Workspaces of additional runs")
    report.set_defaults(handler=report_command)

    init_manifest = subcommands.add_parser("init-manifest", help="Write the default manifest")
    init_manifest.add_argument("file")
    init_manifest.set_defaults(handler=init_manifest_command)
    return parser
