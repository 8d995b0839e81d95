/** Pure transforms from service responses to view models.
 *
 * Nothing here computes a simulation quantity.  Every cell, badge value and
 * row position is a verbatim echo (or string formatting) of a response
 * field, so replaying a recorded response through these functions must
 * reproduce the displayed values exactly — that is what the parity tests
 * check.  Proportional bar sizing is delegated to CSS flex-grow so even the
 * stacked occupancy view contains no arithmetic.
 */

import type {
  CompareResponse,
  DiagramDynamics,
  ErrorBody,
  EventRow,
  ReportDoc,
  TrajectoryDoc,
} from "./api.js";
import type { SavedEntry } from "./session.js";

/** Exact string form of a response number: no rounding, no recomputation. */
export function fieldText(value: number | null): string {
  return value === null ? "—" : String(value);
}

export interface Badge {
  id: string;
  label: string;
  value: string;
  tone: "ok" | "warn" | "info";
}

/** The scenario badges: completeness, redundancy, omissions, complexness,
 * plus the resource total.  Values are the report's fields verbatim. */
export function reportBadges(report: ReportDoc): Badge[] {
  return [
    {
      id: "complete",
      label: "complete",
      value: report.complete ? "yes" : "no",
      tone: report.complete ? "ok" : "warn",
    },
    {
      id: "redundancy",
      label: "redundant firings",
      value: fieldText(report.redundancy_count),
      tone: report.redundancy_count > 0 ? "warn" : "ok",
    },
    {
      id: "omitted",
      label: "omitted ratio",
      value: fieldText(report.omitted_ratio),
      tone: report.omitted_ratio > 0 ? "warn" : "ok",
    },
    {
      id: "complexness",
      label: "complexness",
      value: fieldText(report.complexness),
      tone: "info",
    },
    {
      id: "resource",
      label: "resource total",
      value: fieldText(report.resource_total),
      tone: "info",
    },
  ];
}

export interface KeyValueRow {
  key: string;
  value: string;
}

/** First tick each diagram reached full goal occupancy; null → unreached. */
export function goalTimeRows(report: ReportDoc): KeyValueRow[] {
  return Object.entries(report.goal_times).map(([diagram, tick]) => ({
    key: diagram,
    value: fieldText(tick),
  }));
}

export interface DivergenceRow {
  diagram: string;
  boundary: string;
  value: string;
}

/** Boundary-distribution divergence per diagram and boundary tick. */
export function divergenceRows(report: ReportDoc): DivergenceRow[] {
  const rows: DivergenceRow[] = [];
  for (const [diagram, perBoundary] of Object.entries(report.divergence)) {
    for (const [boundary, value] of Object.entries(perBoundary)) {
      rows.push({ diagram, boundary, value: fieldText(value) });
    }
  }
  return rows;
}

export interface SeriesTable {
  diagram: string;
  title: string;
  header: string[];
  rows: string[][];
}

/** Occupancy per state over ticks, one row per tick, plus the transit
 * channel.  Column order is the response's own key order. */
export function occupancyTable(diagram: string, dynamics: DiagramDynamics): SeriesTable {
  const states = Object.keys(dynamics.occupancy);
  const header = ["tick", ...states, "in transit"];
  const rows = dynamics.in_transit.map((transit, tick) => [
    String(tick),
    ...states.map((s) => fieldText(dynamics.occupancy[s]?.[tick] ?? null)),
    fieldText(transit),
  ]);
  return { diagram, title: `occupancy — ${diagram}`, header, rows };
}

/** Cumulative objects moved per arc over ticks, one row per tick. */
export function counterTable(diagram: string, dynamics: DiagramDynamics): SeriesTable {
  const arcs = Object.keys(dynamics.transition_counts);
  const header = ["tick", ...arcs];
  const rows = dynamics.in_transit.map((_, tick) => [
    String(tick),
    ...arcs.map((a) => fieldText(dynamics.transition_counts[a]?.[tick] ?? null)),
  ]);
  return { diagram, title: `objects moved — ${diagram}`, header, rows };
}

export interface StackSegment {
  state: string;
  count: number;
  text: string;
}

export interface StackRow {
  tick: string;
  segments: StackSegment[];
}

/** Stacked occupancy rows: each segment's ``count`` is the raw field value,
 * used directly as a CSS flex-grow weight (the browser does the scaling). */
export function occupancyStacks(dynamics: DiagramDynamics): StackRow[] {
  const states = Object.keys(dynamics.occupancy);
  return dynamics.in_transit.map((_, tick) => ({
    tick: String(tick),
    segments: states
      .map((state) => {
        const count = dynamics.occupancy[state]?.[tick] ?? 0;
        return { state, count, text: `${state}: ${fieldText(count)}` };
      })
      .filter((seg) => seg.count > 0),
  }));
}

export interface EventViewRow {
  tick: string;
  kind: string;
  diagram: string;
  arc: string;
  symbol: string;
  objects: string;
}

/** The event log verbatim, in response order. */
export function eventRows(trajectory: TrajectoryDoc): EventViewRow[] {
  return trajectory.events.map((e: EventRow) => {
    const objects = e.objects ?? [];
    return {
      tick: String(e.tick),
      kind: e.kind,
      diagram: e.diagram,
      arc: e.arc ?? "—",
      symbol: e.symbol ?? "—",
      objects: objects.length > 0 ? objects.join(", ") : "—",
    };
  });
}

export interface ComparisonRow {
  scenarioId: string;
  frontier: boolean;
  complete: string;
  resourceTotal: string;
  redundancy: string;
  omittedRatio: string;
  complexness: string;
  priority: string;
}

export interface ComparisonTable {
  header: string[];
  rows: ComparisonRow[];
}

export const COMPARISON_HEADER = [
  "scenario",
  "frontier",
  "complete",
  "resource total",
  "redundant firings",
  "omitted ratio",
  "complexness",
  "priority",
];

/** Comparison rows in the engine's ranking order, frontier members flagged.
 * Row order comes from ``response.order`` untouched; cell values come from
 * the saved reports' fields. */
export function comparisonTable(
  response: CompareResponse,
  saved: SavedEntry[],
): ComparisonTable {
  const byId = new Map(saved.map((e) => [e.scenarioId, e.report]));
  const rows = response.order.map((scenarioId): ComparisonRow => {
    const report = byId.get(scenarioId);
    return {
      scenarioId,
      frontier: response.frontier.includes(scenarioId),
      complete: report === undefined ? "—" : report.complete ? "yes" : "no",
      resourceTotal: report === undefined ? "—" : fieldText(report.resource_total),
      redundancy: report === undefined ? "—" : fieldText(report.redundancy_count),
      omittedRatio: report === undefined ? "—" : fieldText(report.omitted_ratio),
      complexness: report === undefined ? "—" : fieldText(report.complexness),
      priority: report === undefined ? "—" : fieldText(report.priority),
    };
  });
  return { header: COMPARISON_HEADER, rows };
}

export interface DiagnosticLine {
  severity: "error" | "warning" | "info";
  text: string;
}

/** Server diagnostics rendered verbatim: the error line, parse diagnostics
 * with their positions, and validation findings with their subjects. */
export function errorLines(body: ErrorBody): DiagnosticLine[] {
  const lines: DiagnosticLine[] = [];
  if (body.error !== undefined) {
    lines.push({ severity: "error", text: body.error });
  }
  for (const d of body.diagnostics ?? []) {
    lines.push({
      severity: "error",
      text: `${d.line}:${d.column} ${d.code} ${d.message}`,
    });
  }
  for (const v of body.violations ?? []) {
    const severity = v.severity === "warning" ? "warning" : "error";
    const subjects = v.subjects.length > 0 ? ` [${v.subjects.map(String).join("; ")}]` : "";
    lines.push({ severity, text: `${v.code} ${v.message}${subjects}` });
  }
  return lines;
}
