"""HTTP service exposing the model, runs, planning, and comparison.

Endpoints (JSON bodies unless noted):

- ``GET  /model`` — summary of the loaded model.
- ``POST /model`` — model text (raw UTF-8 or ``{"text": ...}``); replaces
  the loaded model or answers 400 with diagnostics/violations.
- ``POST /run`` — ``{"scenario": id}`` for a declared scenario, or an
  inline one: ``{"id"?, "schedule": {tick: [symbol...]}, "horizon",
  "priority"?, "suppressed"?: [[diagram, state]...], "criterion"?:
  {"rank_weight", "resource_weight", "time_weight"}}``.  Answers the
  finished run's report and trajectory, and stores the report for
  comparison under its scenario id.
- ``POST /inertial`` — ``{"horizon"?: N}``; a run with no control input.
- ``POST /plan`` — ``{"from", "to", "max_resource"?, "max_time"?}``.
- ``POST /compare`` — ``{"reports": [scenario id...]}`` over stored
  reports.

Every response carries ``engine_version`` and the current model content
hash (``model_hash``, null before a model is loaded).  Responses allow
cross-origin use (``Access-Control-Allow-Origin: *``).  Each request works
on an immutable model snapshot taken at entry, so concurrent requests
never observe a half-swapped model; runs themselves are pure.
"""

from __future__ import annotations

import dataclasses
import json
import threading
from socketserver import ThreadingMixIn
from wsgiref.simple_server import WSGIRequestHandler, WSGIServer, make_server

from . import ENGINE_VERSION
from .dsl import try_parse_model
from .engine import (
    ControlScenario,
    CriterionConfig,
    TimeDiagram,
    compare,
    evaluate,
    run,
    run_inertial,
)
from .errors import AssemblyRejected, NoPlanExists, StatecraftError
from .hierarchy import model_fingerprint
from .planner import enumerate_plans
from .report import canonical_json, trajectory_to_dict

_STATUS_TEXT = {
    200: "200 OK",
    204: "204 No Content",
    400: "400 Bad Request",
    404: "404 Not Found",
    405: "405 Method Not Allowed",
    409: "409 Conflict",
    500: "500 Internal Server Error",
}

_CORS_HEADERS = [
    ("Access-Control-Allow-Origin", "*"),
    ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
    ("Access-Control-Allow-Headers", "Content-Type"),
]


class ServiceState:
    """Mutable service state: the current document/model pair and the
    report store used by /compare.  Swapped atomically under a lock."""

    def __init__(self, document=None, model=None):
        self.lock = threading.Lock()
        self.document = document
        self.model = model
        self.model_hash = model_fingerprint(model) if model else None
        self.reports = {}

    def snapshot(self):
        with self.lock:
            return self.document, self.model, self.model_hash

    def replace_model(self, document, model):
        with self.lock:
            self.document = document
            self.model = model
            self.model_hash = model_fingerprint(model)
            self.reports = {}

    def store_report(self, report):
        with self.lock:
            self.reports[report.scenario_id] = report

    def stored_reports(self, ids):
        with self.lock:
            return [self.reports.get(i) for i in ids]


class _Request:
    def __init__(self, environ):
        self.method = environ["REQUEST_METHOD"]
        self.path = environ.get("PATH_INFO", "/")
        try:
            length = int(environ.get("CONTENT_LENGTH") or 0)
        except ValueError:
            length = 0
        self.body = environ["wsgi.input"].read(length) if length else b""

    def json(self):
        if not self.body:
            return {}
        return json.loads(self.body.decode("utf-8"))


def _scenario_from_request(payload, document):
    if "scenario" in payload:
        scenario_id = payload["scenario"]
        if document is None or scenario_id not in document.scenarios:
            raise KeyError(scenario_id)
        scenario = document.scenarios[scenario_id]
        if payload.get("horizon") is not None:
            scenario = dataclasses.replace(
                scenario, horizon=int(payload["horizon"])
            )
        return scenario
    if "horizon" not in payload:
        raise ValueError(
            "inline scenario needs 'horizon' (or name a declared one "
            "with 'scenario')"
        )
    schedule = {
        int(t): frozenset(symbols)
        for t, symbols in dict(payload.get("schedule", {})).items()
    }
    criterion = CriterionConfig(**payload["criterion"]) if payload.get(
        "criterion"
    ) else CriterionConfig()
    return ControlScenario(
        str(payload.get("id", "adhoc")),
        TimeDiagram(schedule),
        int(payload["horizon"]),
        priority=int(payload.get("priority", 0)),
        criterion=criterion,
        suppressed_backsteps=frozenset(
            (d, s) for d, s in payload.get("suppressed", ())
        ),
    )


class Service:
    def __init__(self, state: ServiceState):
        self.state = state

    # each handler returns (http status, payload dict without the envelope)

    def get_model(self, _request):
        document, model, _ = self.state.snapshot()
        if model is None:
            return 404, {"error": "no model loaded"}
        return 200, {
            "summary": {
                "diagrams": [
                    {
                        "id": d.id,
                        "states": [s.id for s in d.states],
                        "arcs": len(d.arcs),
                        "population": d.population,
                        "horizon": d.horizon,
                    }
                    for d in model.diagrams.values()
                ],
                "levels": model.levels,
                "symbols": sorted(model.symbols),
                "couplings": [c.id for c in model.couplings],
                "scenarios": sorted(document.scenarios) if document else [],
                "rules": [r.id for r in document.rules] if document else [],
            }
        }

    def post_model(self, request):
        body = request.body.decode("utf-8")
        text = body
        if body.lstrip().startswith("{"):
            try:
                payload = json.loads(body)
                if isinstance(payload, dict) and "text" in payload:
                    text = payload["text"]
            except json.JSONDecodeError:
                pass
        document, diagnostics = try_parse_model(text)
        if document is None:
            return 400, {
                "ok": False,
                "diagnostics": [d.to_dict() for d in diagnostics],
            }
        try:
            model = document.assemble_model()
        except AssemblyRejected as exc:
            return 400, {
                "ok": False,
                "violations": [v.to_dict() for v in exc.report],
            }
        self.state.replace_model(document, model)
        return 200, {"ok": True}

    def post_run(self, request):
        document, model, _ = self.state.snapshot()
        if model is None:
            return 409, {"error": "no model loaded"}
        payload = request.json()
        try:
            scenario = _scenario_from_request(payload, document)
        except KeyError as exc:
            return 404, {"error": f"unknown scenario {exc.args[0]!r}"}
        except (TypeError, ValueError) as exc:
            return 400, {"error": f"bad scenario request: {exc}"}
        try:
            trajectory = run(model, scenario)
            report = evaluate(trajectory, scenario)
        except StatecraftError as exc:
            return 400, {"error": str(exc)}
        self.state.store_report(report)
        return 200, {
            "report": report.to_dict(),
            "trajectory": trajectory_to_dict(trajectory),
        }

    def post_inertial(self, request):
        _, model, _ = self.state.snapshot()
        if model is None:
            return 409, {"error": "no model loaded"}
        payload = request.json()
        horizon = payload.get("horizon")
        try:
            trajectory = run_inertial(
                model, int(horizon) if horizon is not None else None
            )
            scenario = ControlScenario(
                "inertial", TimeDiagram({}), trajectory.horizon
            )
            report = evaluate(trajectory, scenario)
        except StatecraftError as exc:
            return 400, {"error": str(exc)}
        self.state.store_report(report)
        return 200, {
            "report": report.to_dict(),
            "trajectory": trajectory_to_dict(trajectory),
        }

    def post_plan(self, request):
        document, _, _ = self.state.snapshot()
        if document is None:
            return 409, {"error": "no model loaded"}
        if not document.rules:
            return 400, {"error": "the loaded model declares no rules"}
        payload = request.json()
        if "from" not in payload or "to" not in payload:
            return 400, {"error": "plan request needs 'from' and 'to'"}
        budgets = None
        if payload.get("max_resource") is not None or payload.get(
            "max_time"
        ) is not None:
            budgets = (payload.get("max_resource"), payload.get("max_time"))
        try:
            plans = enumerate_plans(
                document.rules, payload["from"], payload["to"], budgets
            )
        except NoPlanExists as exc:
            return 400, {"error": str(exc)}
        return 200, {
            "from": payload["from"],
            "to": payload["to"],
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

    def post_compare(self, request):
        payload = request.json()
        ids = payload.get("reports")
        if not isinstance(ids, list) or not ids:
            return 400, {"error": "compare request needs 'reports': [ids]"}
        reports = self.state.stored_reports(ids)
        missing = [i for i, r in zip(ids, reports) if r is None]
        if missing:
            return 404, {
                "error": f"no stored report for: {', '.join(map(str, missing))}"
            }
        try:
            result = compare(reports)
        except StatecraftError as exc:
            return 400, {"error": str(exc)}
        return 200, {
            "order": list(result.order),
            "frontier": sorted(result.frontier),
        }

    _ROUTES = {
        ("GET", "/model"): "get_model",
        ("POST", "/model"): "post_model",
        ("POST", "/run"): "post_run",
        ("POST", "/inertial"): "post_inertial",
        ("POST", "/plan"): "post_plan",
        ("POST", "/compare"): "post_compare",
    }

    def dispatch(self, request) -> tuple:
        handler = self._ROUTES.get((request.method, request.path))
        if handler is None:
            known_paths = {path for _, path in self._ROUTES}
            if request.path in known_paths:
                return 405, {"error": f"method {request.method} not allowed"}
            return 404, {"error": f"no such endpoint {request.path}"}
        try:
            return getattr(self, handler)(request)
        except json.JSONDecodeError:
            return 400, {"error": "request body is not valid JSON"}


def make_app(state: ServiceState):
    """WSGI application closing over shared service state."""
    service = Service(state)

    def app(environ, start_response):
        request = _Request(environ)
        if request.method == "OPTIONS":
            start_response(_STATUS_TEXT[204], list(_CORS_HEADERS))
            return [b""]
        status, payload = service.dispatch(request)
        _, _, model_hash = state.snapshot()
        envelope = {
            "engine_version": ENGINE_VERSION,
            "model_hash": model_hash,
        }
        envelope.update(payload)
        body = (canonical_json(envelope) + "\n").encode("utf-8")
        headers = [
            ("Content-Type", "application/json; charset=utf-8"),
            ("Content-Length", str(len(body))),
        ] + list(_CORS_HEADERS)
        start_response(_STATUS_TEXT.get(status, f"{status} Status"), headers)
        return [body]

    return app


class _ThreadingWSGIServer(ThreadingMixIn, WSGIServer):
    daemon_threads = True


class _QuietHandler(WSGIRequestHandler):
    def log_message(self, format, *args):  # noqa: A002 - wsgiref signature
        pass


def create_server(state: ServiceState, port: int = 0):
    """Bound, threaded WSGI server (not yet serving); port 0 picks a free
    port, readable afterwards as ``server.server_address[1]``."""
    return make_server(
        "127.0.0.1",
        port,
        make_app(state),
        server_class=_ThreadingWSGIServer,
        handler_class=_QuietHandler,
    )


def serve(port: int, model_path=None) -> None:
    """Run the service until interrupted, optionally preloading a model."""
    state = ServiceState()
    if model_path:
        from .dsl import parse_model

        with open(model_path, "r", encoding="utf-8") as fp:
            document = parse_model(fp.read())
        state.replace_model(document, document.assemble_model())
    server = create_server(state, port)
    host, bound_port = server.server_address[:2]
    print(f"serving on http://{host}:{bound_port}", flush=True)
    server.serve_forever()
