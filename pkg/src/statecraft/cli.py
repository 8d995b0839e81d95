"""Command-line interface.

Commands: ``validate``, ``run``, ``inertial``, ``ingest``, ``plan``,
``compare``, ``serve``.  Exit codes: 0 success (or criterion confirmed),
1 content failure (invalid model, refuted criterion, no plan, mismatched
reports), 2 usage error (bad arguments, unreadable files).

JSON documents go to stdout (or ``--out``); progress and error text goes
to stderr.  ``run``/``inertial`` with ``--figures DIR`` additionally render
per-diagram occupancy charts and series CSVs into DIR.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import ENGINE_VERSION
from .dsl import serialize_model, try_parse_model
from .engine import (
    ControlScenario,
    ScenarioReport,
    TimeDiagram,
    compare,
    evaluate,
    run,
    run_inertial,
)
from .errors import (
    AssemblyRejected,
    ModelMismatch,
    NoPlanExists,
    StatecraftError,
)
from .hierarchy import model_fingerprint
from .ingest import ingest_monitoring, read_monitoring_csv
from .planner import enumerate_plans, validate_objectives
from .report import canonical_json, render_figures, trajectory_to_dict


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_text(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fp:
            return fp.read()
    except OSError as exc:
        return exc


def _load_document(path: str):
    """Returns (document, None) or (None, exit code) after reporting."""
    text = _read_text(path)
    if isinstance(text, OSError):
        return None, _fail(f"cannot read {path}: {text.strerror}", 2)
    document, diagnostics = try_parse_model(text)
    if document is None:
        for diagnostic in diagnostics:
            print(f"{path}:{diagnostic}", file=sys.stderr)
        return None, 1
    return document, None


def _assemble(document, path: str):
    try:
        return document.assemble_model(), None
    except AssemblyRejected as exc:
        for violation in exc.report:
            subjects = " ".join(str(s) for s in violation.subjects)
            suffix = f" [{subjects}]" if subjects else ""
            print(
                f"{path}: {violation.severity} {violation.code} "
                f"{violation.message}{suffix}",
                file=sys.stderr,
            )
        return None, 1


def _emit(payload: dict, out_path) -> None:
    text = canonical_json(payload) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)


def _run_payload(model, trajectory, report) -> dict:
    return {
        "engine_version": ENGINE_VERSION,
        "model_hash": model_fingerprint(model),
        "report": report.to_dict(),
        "trajectory": trajectory_to_dict(trajectory),
    }


def cmd_validate(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    model, failure = _assemble(document, args.model)
    if model is None:
        return failure
    issues = []
    if document.objectives is not None:
        issues = [
            v for v in validate_objectives(document.objectives, model)
            if v.severity == "error"
        ]
        for violation in issues:
            print(f"{args.model}: {violation.code} {violation.message}",
                  file=sys.stderr)
    if issues:
        return 1
    print(
        f"ok: {len(model.diagrams)} diagram(s), {len(model.symbols)} "
        f"symbol(s), {len(document.scenarios)} scenario(s), "
        f"model {model_fingerprint(model)[:12]}",
        file=sys.stderr,
    )
    return 0


def cmd_run(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    model, failure = _assemble(document, args.model)
    if model is None:
        return failure
    scenario = document.scenarios.get(args.scenario)
    if scenario is None:
        known = ", ".join(sorted(document.scenarios)) or "none declared"
        return _fail(f"unknown scenario {args.scenario!r} (known: {known})")
    if args.horizon is not None:
        scenario = dataclasses.replace(scenario, horizon=args.horizon)
    try:
        trajectory = run(model, scenario)
        report = evaluate(trajectory, scenario)
    except StatecraftError as exc:
        return _fail(str(exc))
    _emit(_run_payload(model, trajectory, report), args.out)
    if args.figures:
        for path in render_figures(trajectory, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_inertial(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    model, failure = _assemble(document, args.model)
    if model is None:
        return failure
    try:
        trajectory = run_inertial(model, args.horizon)
        scenario = ControlScenario(
            "inertial", TimeDiagram({}), trajectory.horizon
        )
        report = evaluate(trajectory, scenario)
    except StatecraftError as exc:
        return _fail(str(exc))
    _emit(_run_payload(model, trajectory, report), args.out)
    if args.figures:
        for path in render_figures(trajectory, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_ingest(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    model, failure = _assemble(document, args.model)
    if model is None:
        return failure
    classifiers = document.classifiers()
    if not classifiers:
        return _fail("the model text declares no scales, so monitoring "
                     "data cannot be classified")
    text = _read_text(args.monitoring)
    if isinstance(text, OSError):
        return _fail(f"cannot read {args.monitoring}: {text.strerror}", 2)
    import io

    try:
        records = read_monitoring_csv(io.StringIO(text))
        result = ingest_monitoring(
            records, model, classifiers, horizon=args.horizon
        )
    except (StatecraftError, ValueError) as exc:
        return _fail(str(exc))
    payload = {
        "engine_version": ENGINE_VERSION,
        "model_hash": model_fingerprint(model),
        "dynamics": {
            diagram_id: {
                "occupancy": {
                    s: list(series) for s, series in dyn.occupancy.items()
                },
                "transition_counts": {
                    a: list(series)
                    for a, series in dyn.transition_counts.items()
                },
                "in_transit": list(dyn.in_transit),
            }
            for diagram_id, dyn in result.dynamics.items()
        },
        "anomalies": [anomaly.to_dict() for anomaly in result.anomalies],
        "observed_marks": {
            diagram_id: {str(i): dict(mark) for i, mark in marks.items()}
            for diagram_id, marks in result.observed_marks.items()
        },
    }
    _emit(payload, args.out)
    return 0


def cmd_plan(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    if not document.rules:
        return _fail("the model text declares no rules")
    budgets = None
    if args.max_resource is not None or args.max_time is not None:
        budgets = (args.max_resource, args.max_time)
    try:
        plans = enumerate_plans(
            document.rules, args.from_state, args.to_state, budgets
        )
    except NoPlanExists as exc:
        return _fail(str(exc))
    payload = {
        "engine_version": ENGINE_VERSION,
        "from": args.from_state,
        "to": args.to_state,
        "plans": [
            {
                "rules": list(plan.rule_ids),
                "total_resource": float(plan.total_resource),
                "total_time": plan.total_time,
                "states": list(plan.states),
            }
            for plan in plans
        ],
    }
    _emit(payload, args.out)
    return 0


def _report_from_dict(payload: dict) -> ScenarioReport:
    if "report" in payload and isinstance(payload["report"], dict):
        payload = payload["report"]
    return ScenarioReport(
        scenario_id=payload["scenario_id"],
        model_hash=payload.get("model_hash"),
        horizon=payload.get("horizon", 0),
        priority=payload.get("priority", 0),
        complete=payload["complete"],
        redundancy_count=payload.get("redundancy_count", 0),
        omitted_ratio=payload.get("omitted_ratio", 0.0),
        complexness=payload.get("complexness", 0.0),
        goal_times=payload.get("goal_times", {}),
        resource_total=payload.get("resource_total", 0.0),
        divergence=payload.get("divergence", {}),
    )


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        text = _read_text(path)
        if isinstance(text, OSError):
            return _fail(f"cannot read {path}: {text.strerror}", 2)
        try:
            reports.append(_report_from_dict(json.loads(text)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            return _fail(f"{path} is not a report document: {exc}")
    try:
        result = compare(reports)
    except ModelMismatch as exc:
        return _fail(str(exc))
    payload = {
        "engine_version": ENGINE_VERSION,
        "order": list(result.order),
        "frontier": sorted(result.frontier),
    }
    _emit(payload, args.out)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    try:
        serve(args.port, model_path=args.model)
    except KeyboardInterrupt:
        pass
    return 0


def cmd_format(args) -> int:
    document, failure = _load_document(args.model)
    if document is None:
        return failure
    sys.stdout.write(serialize_model(document))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statecraft",
        description="Deterministic simulation and decision support over "
        "hierarchical ranked-state models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run a declared scenario")
    p.add_argument("model")
    p.add_argument("--scenario", required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--figures", default=None,
                   help="directory for occupancy charts and series CSVs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inertial", help="run with no control input")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_inertial)

    p = sub.add_parser("ingest", help="interpret monitoring CSV data")
    p.add_argument("model")
    p.add_argument("monitoring")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plan", help="enumerate efficient rule chains")
    p.add_argument("model")
    p.add_argument("--from", dest="from_state", required=True)
    p.add_argument("--to", dest="to_state", required=True)
    p.add_argument("--max-resource", type=float, default=None)
    p.add_argument("--max-time", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="rank finished-run reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int, default=8350)
    p.add_argument("--model", default=None,
                   help="model file to preload")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("format", help="echo a model file in canonical form")
    p.add_argument("model")
    p.set_defaults(func=cmd_format)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
