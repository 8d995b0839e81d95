/** Session state for the studio: the loaded model's hash and summary, the
 * working scenario being edited, the last run's views, and the set of
 * reports saved for comparison.
 *
 * Everything here is a pure transition ``session -> session`` so the whole
 * lifecycle is unit-testable without a DOM or a server.  Nothing in this
 * module computes simulation quantities; it only stores and restores what
 * the service answered.
 */

import type { ModelSummary, ReportDoc, RunResponse, TrajectoryDoc } from "./api.js";

/** Timeline of control symbols keyed by tick (string keys, wire format). */
export type Schedule = Record<string, string[]>;

export interface WorkingScenario {
  id: string;
  horizon: number;
  schedule: Schedule;
  suppressed: [string, string][];
}

/** A finished run kept for display; ``modelHash`` is the hash of the model
 * that produced it, so staleness is visible after a model swap. */
export interface RunView {
  modelHash: string;
  report: ReportDoc;
  trajectory: TrajectoryDoc;
}

/** Comparison-set entry: the saved report plus the timeline that produced
 * it, so selecting its row can reload that timeline into the editor. */
export interface SavedEntry {
  scenarioId: string;
  modelHash: string;
  report: ReportDoc;
  horizon: number;
  schedule: Schedule;
}

export interface Notice {
  kind: "info" | "error";
  text: string;
}

export interface SessionState {
  modelHash: string | null;
  summary: ModelSummary | null;
  working: WorkingScenario;
  pendingChanges: boolean;
  runInFlight: boolean;
  lastRun: RunView | null;
  saved: SavedEntry[];
  notices: Notice[];
}

export function emptySession(): SessionState {
  return {
    modelHash: null,
    summary: null,
    working: { id: "working", horizon: 0, schedule: {}, suppressed: [] },
    pendingChanges: false,
    runInFlight: false,
    lastRun: null,
    saved: [],
    notices: [],
  };
}

function withNotice(session: SessionState, kind: Notice["kind"], text: string): SessionState {
  return { ...session, notices: [...session.notices, { kind, text }] };
}

/** True when the view was produced by a model other than the loaded one.
 * Stale views stay visible but must be flagged, never reused as current. */
export function isStale(session: SessionState, view: { modelHash: string }): boolean {
  return session.modelHash !== null && view.modelHash !== session.modelHash;
}

/** Install a freshly loaded model.  The working scenario is re-anchored to
 * the new hash: its horizon is clamped into the model's declared range and
 * symbols that no longer exist are dropped (each drop is noticed). */
export function modelLoaded(
  session: SessionState,
  modelHash: string,
  summary: ModelSummary,
): SessionState {
  let next: SessionState = {
    ...session,
    modelHash,
    summary,
    notices: [...session.notices],
  };
  const known = new Set(summary.symbols);
  const schedule: Schedule = {};
  for (const [tick, symbols] of Object.entries(session.working.schedule)) {
    const kept = symbols.filter((s) => known.has(s));
    for (const gone of symbols.filter((s) => !known.has(s))) {
      next = withNotice(next, "info", `dropped ${gone} at tick ${tick}: not in loaded model`);
    }
    if (kept.length > 0) {
      schedule[tick] = kept;
    }
  }
  const maxHorizon = Math.max(0, ...summary.diagrams.map((d) => d.horizon));
  const horizon =
    session.working.horizon > 0 && session.working.horizon <= maxHorizon
      ? session.working.horizon
      : maxHorizon;
  next = { ...next, working: { ...session.working, schedule, horizon } };
  if (next.lastRun !== null && isStale(next, next.lastRun)) {
    next = withNotice(next, "info", "previous run is from another model; flagged stale");
  }
  return next;
}

/** Edit the working timeline.  Pure; no server call happens here. */
export function editTimeline(
  session: SessionState,
  tick: number,
  symbol: string,
  op: "add" | "remove",
): SessionState {
  if (session.summary === null) {
    return withNotice(session, "error", "no model loaded");
  }
  if (!session.summary.symbols.includes(symbol)) {
    return withNotice(session, "error", `unknown symbol ${symbol} for the loaded model`);
  }
  const key = String(tick);
  const present = session.working.schedule[key] ?? [];
  if (op === "add") {
    if (present.includes(symbol)) {
      return withNotice(session, "info", `${symbol} already scheduled at tick ${tick}`);
    }
    const schedule = { ...session.working.schedule, [key]: [...present, symbol].sort() };
    return {
      ...session,
      working: { ...session.working, schedule },
      pendingChanges: true,
    };
  }
  if (!present.includes(symbol)) {
    return withNotice(session, "info", `nothing to remove: ${symbol} is not scheduled at tick ${tick}`);
  }
  const kept = present.filter((s) => s !== symbol);
  const schedule = { ...session.working.schedule };
  if (kept.length > 0) {
    schedule[key] = kept;
  } else {
    delete schedule[key];
  }
  return {
    ...session,
    working: { ...session.working, schedule },
    pendingChanges: true,
  };
}

export function setHorizon(session: SessionState, horizon: number): SessionState {
  if (!Number.isInteger(horizon) || horizon < 0) {
    return withNotice(session, "error", `horizon must be a non-negative integer, got ${horizon}`);
  }
  return { ...session, working: { ...session.working, horizon }, pendingChanges: true };
}

/** Begin a run: returns null when one is already in flight (the caller
 * should keep the control disabled), else the session with the in-flight
 * latch set plus the hash the response must still match on arrival. */
export function beginRun(session: SessionState): { session: SessionState; startedHash: string } | null {
  if (session.runInFlight || session.modelHash === null) {
    return null;
  }
  return { session: { ...session, runInFlight: true }, startedHash: session.modelHash };
}

/** Land a run response.  A response whose model hash no longer matches the
 * loaded model is discarded with a notice — never rendered as current. */
export function acceptRun(
  session: SessionState,
  startedHash: string,
  response: RunResponse,
): SessionState {
  const next: SessionState = { ...session, runInFlight: false };
  if (session.modelHash !== startedHash || response.model_hash !== session.modelHash) {
    return withNotice(next, "info", "discarded stale run response (model changed while in flight)");
  }
  return {
    ...next,
    pendingChanges: false,
    lastRun: {
      modelHash: response.model_hash,
      report: response.report,
      trajectory: response.trajectory,
    },
  };
}

/** Land a run failure: clear the latch; the caller renders the error body. */
export function failRun(session: SessionState, text: string): SessionState {
  return withNotice({ ...session, runInFlight: false }, "error", text);
}

/** Save the last run's report (with its timeline) into the comparison set.
 * Stale runs are refused — the comparison set only holds current-model
 * reports, matching the server's own per-model report store. */
export function saveToComparison(session: SessionState): SessionState {
  if (session.lastRun === null) {
    return withNotice(session, "info", "run a scenario before saving it");
  }
  if (isStale(session, session.lastRun)) {
    return withNotice(session, "error", "last run is stale (model changed); re-run before saving");
  }
  const entry: SavedEntry = {
    scenarioId: session.lastRun.report.scenario_id,
    modelHash: session.lastRun.modelHash,
    report: session.lastRun.report,
    horizon: session.lastRun.trajectory.horizon,
    schedule: appliedToSchedule(session.lastRun.trajectory.applied),
  };
  const saved = [...session.saved.filter((e) => e.scenarioId !== entry.scenarioId), entry];
  return { ...session, saved };
}

/** Rebuild a wire-format schedule from a trajectory's ``applied`` record so
 * a saved row can repopulate the editor.  This is a field rearrangement of
 * what the service reported, not a recomputation. */
export function appliedToSchedule(applied: Record<string, string[][]>): Schedule {
  const schedule: Schedule = {};
  for (const perTick of Object.values(applied)) {
    perTick.forEach((symbols, tick) => {
      if (symbols.length === 0) {
        return;
      }
      const key = String(tick);
      const merged = new Set([...(schedule[key] ?? []), ...symbols]);
      schedule[key] = [...merged].sort();
    });
  }
  return schedule;
}

/** Comparison precondition: at least two saved reports for the loaded model. */
export function comparableIds(session: SessionState): string[] {
  return session.saved
    .filter((e) => session.modelHash === null || e.modelHash === session.modelHash)
    .map((e) => e.scenarioId);
}

/** Row click: reload the saved entry's timeline into the editor. */
export function reloadSaved(session: SessionState, scenarioId: string): SessionState {
  const entry = session.saved.find((e) => e.scenarioId === scenarioId);
  if (entry === undefined) {
    return withNotice(session, "error", `no saved report named ${scenarioId}`);
  }
  if (session.modelHash !== null && entry.modelHash !== session.modelHash) {
    return withNotice(session, "error", `saved report ${scenarioId} is stale (model changed)`);
  }
  return {
    ...session,
    working: {
      ...session.working,
      horizon: entry.horizon,
      schedule: structuredClone(entry.schedule),
    },
    pendingChanges: true,
  };
}

const EXPORT_VERSION = 1;

interface SessionExport {
  version: number;
  session: SessionState;
}

/** The studio is stateless across reloads except for this JSON round-trip. */
export function exportSession(session: SessionState): string {
  const body: SessionExport = {
    version: EXPORT_VERSION,
    session: { ...session, runInFlight: false, notices: [] },
  };
  return JSON.stringify(body, null, 2);
}

export function importSession(text: string): SessionState {
  const parsed = JSON.parse(text) as SessionExport;
  if (parsed.version !== EXPORT_VERSION || typeof parsed.session !== "object") {
    throw new Error(`unsupported session export (version ${String(parsed.version)})`);
  }
  return { ...parsed.session, runInFlight: false };
}
