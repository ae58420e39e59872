"""Command-line entry points: simulate, replay, serve, validate."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import SchemaError, WorkbenchError
from .robot import load_robot
from .session import AlignmentSession, replay_document
from .sim import (
    ExperimentConfig,
    emit_report,
    format_table_csv,
    load_experiment,
    run_alignment_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vralign",
        description="Virtual-real alignment workbench: simulation, replay, and service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run the alignment-noise Monte Carlo experiment")
    sim.add_argument("--config", type=Path, default=None,
                     help="experiment file (defaults to the bundled fixture)")
    sim.add_argument("--seed", type=int, default=None, help="override the file's seed")
    sim.add_argument("--trials", type=int, default=None, help="override trial count")
    sim.add_argument("--views", type=int, default=None,
                     help="run a single condition with this many views")
    sim.add_argument("--avg-n", type=int, default=None,
                     help="run a single condition averaging this many alignments")
    sim.add_argument("--out", type=Path, default=Path("sim-results"),
                     help="directory for report.csv / report.json")
    sim.add_argument("--workers", type=int, default=1)

    replay = sub.add_parser("replay", help="recompute a saved session's derived results")
    replay.add_argument("session", type=Path)
    replay.add_argument("--out", type=Path, default=None,
                        help="write the recomputed results as JSON here")

    serve = sub.add_parser("serve", help="start the workbench service")
    serve.add_argument("--config", type=Path, default=None,
                       help="workbench config (defaults to the bundled fixture)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8787)
    serve.add_argument("--static", type=Path, default=None,
                       help="directory of built UI assets to serve at /")

    validate = sub.add_parser("validate", help="schema-check a robot description file")
    validate.add_argument("robot_file", type=Path)
    return parser


def _cmd_sim(args) -> int:
    from .service import fixture_path

    config_path = args.config or fixture_path("experiment_default.json")
    base, conditions, noise = load_experiment(config_path)
    if args.seed is not None:
        base["seed"] = args.seed
    if args.trials is not None:
        base["trials"] = args.trials
    if args.views is not None or args.avg_n is not None:
        conditions = [{
            "label": "custom",
            "views": args.views if args.views is not None else 1,
            "averaging": args.avg_n if args.avg_n is not None else 1,
        }]
    reports = []
    for condition in conditions:
        cfg = ExperimentConfig(
            trials=base["trials"], seed=base["seed"],
            views=condition["views"], averaging=condition["averaging"],
            truth=base["truth"], observer_poses=base["observer_poses"],
            label=condition["label"],
        )
        reports.append(run_alignment_experiment(cfg, noise, workers=args.workers))
    paths = emit_report(reports, args.out)
    sys.stdout.write(format_table_csv(reports))
    sys.stdout.write("wrote: " + ", ".join(str(p) for p in paths) + "\n")
    return 0


def _cmd_replay(args) -> int:
    doc = json.loads(args.session.read_text(encoding="utf-8"))
    recomputed = replay_document(doc)
    text = json.dumps(recomputed, indent=2, sort_keys=True) + "\n"
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    stored = {
        "registration": doc.get("registration"),
        "evaluations": doc.get("evaluations", []),
        "scores": [s["summary"] for s in doc.get("scores", [])],
    }
    if recomputed != stored:
        sys.stderr.write("replay mismatch: recomputed results differ from the stored ones\n")
        return 3
    sys.stdout.write("replay: stored results reproduced exactly\n")
    return 0


def _cmd_serve(args) -> int:
    from .service import ServiceConfig, fixture_path, serve

    config_path = args.config or fixture_path("workbench_config.json")
    config = ServiceConfig.from_file(config_path)
    serve(config, host=args.host, port=args.port, static_dir=args.static)
    return 0


def _cmd_validate(args) -> int:
    try:
        desc = load_robot(args.robot_file)
    except SchemaError as exc:
        sys.stderr.write(f"invalid: {exc}\n")
        return 2
    sys.stdout.write(
        f"ok: {desc.name} with {desc.joint_count} joints, "
        f"base at {[float(v) for v in desc.base.translation]}\n")
    return 0


def cli_main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "sim":
            return _cmd_sim(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "validate":
            return _cmd_validate(args)
    except (WorkbenchError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 1
    return 2


def main() -> None:
    raise SystemExit(cli_main())
