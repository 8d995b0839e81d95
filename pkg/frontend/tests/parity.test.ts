/** Parity against recorded service responses: replaying the three recorded
 * payloads (complete run, inertial run, two-scenario comparison) through
 * the render transforms must reproduce every displayed value and every row
 * position from the response fields exactly.  Frozen literals pin what the
 * recordings contain; snapshots pin the full rendered structures.
 */

import { afterAll, describe, expect, it } from "vitest";

import type { CompareResponse, RunResponse } from "../src/api.js";
import {
  comparisonTable,
  counterTable,
  divergenceRows,
  errorLines,
  eventRows,
  fieldText,
  goalTimeRows,
  occupancyStacks,
  occupancyTable,
  reportBadges,
} from "../src/render.js";
import { appliedToSchedule, type SavedEntry } from "../src/session.js";

import compareTwoJson from "../fixtures/compare_two.json";
import runCautiousJson from "../fixtures/run_cautious.json";
import runFullJson from "../fixtures/run_full.json";
import runInertialJson from "../fixtures/run_inertial.json";

const runFull = runFullJson as unknown as RunResponse;
const runInertial = runInertialJson as unknown as RunResponse;
const runCautious = runCautiousJson as unknown as RunResponse;
const compareTwo = compareTwoJson as unknown as CompareResponse;

const started = performance.now();
afterAll(() => {
  expect(performance.now() - started).toBeLessThan(5000);
});

function savedEntryOf(run: RunResponse): SavedEntry {
  return {
    scenarioId: run.report.scenario_id,
    modelHash: run.report.model_hash,
    report: run.report,
    horizon: run.trajectory.horizon,
    schedule: appliedToSchedule(run.trajectory.applied),
  };
}

describe("complete run (recorded demo3 'full')", () => {
  it("renders badges whose values are the report fields verbatim", () => {
    const badges = reportBadges(runFull.report);
    // order and values derived from the recorded report, field by field
    expect(badges.map((b) => [b.id, b.value])).toEqual([
      ["complete", runFull.report.complete ? "yes" : "no"],
      ["redundancy", String(runFull.report.redundancy_count)],
      ["omitted", String(runFull.report.omitted_ratio)],
      ["complexness", String(runFull.report.complexness)],
      ["resource", String(runFull.report.resource_total)],
    ]);
    // frozen literals pin the recording itself
    expect(badges.map((b) => [b.id, b.value, b.tone])).toEqual([
      ["complete", "yes", "ok"],
      ["redundancy", "0", "ok"],
      ["omitted", "0", "ok"],
      ["complexness", "0", "info"],
      ["resource", "2", "info"],
    ]);
    expect(badges).toMatchSnapshot();
  });

  it("shows the 'complete' badge for the recorded complete run", () => {
    const complete = reportBadges(runFull.report).find((b) => b.id === "complete");
    expect(complete?.value).toBe("yes");
    expect(complete?.tone).toBe("ok");
  });

  it("renders goal times and divergence rows from the report fields", () => {
    expect(goalTimeRows(runFull.report)).toEqual([{ key: "demo3", value: "3" }]);
    const rows = divergenceRows(runFull.report);
    expect(rows).toEqual(
      Object.entries(runFull.report.divergence.demo3 ?? {}).map(([boundary, value]) => ({
        diagram: "demo3",
        boundary,
        value: String(value),
      })),
    );
    expect(rows.map((r) => r.value)).toEqual(["0", "0", "0"]);
  });

  it("orders occupancy columns exactly as the response does", () => {
    const dynamics = runFull.trajectory.dynamics["demo3"]!;
    const table = occupancyTable("demo3", dynamics);
    expect(table.header).toEqual(["tick", ...Object.keys(dynamics.occupancy), "in transit"]);
    expect(table.header).toEqual(["tick", "S0", "S1", "S2", "in transit"]);
    expect(table.rows).toEqual([
      ["0", "4", "0", "0", "0"],
      ["1", "0", "4", "0", "0"],
      ["2", "0", "4", "0", "0"],
      ["3", "0", "0", "4", "0"],
      ["4", "0", "0", "4", "0"],
    ]);
    // every cell is the response field at that position, stringified
    table.rows.forEach((row, tick) => {
      Object.keys(dynamics.occupancy).forEach((state, column) => {
        expect(row[column + 1]).toBe(String(dynamics.occupancy[state]![tick]));
      });
      expect(row[row.length - 1]).toBe(String(dynamics.in_transit[tick]));
    });
    expect(table).toMatchSnapshot();
  });

  it("orders counter columns exactly as the response does", () => {
    const dynamics = runFull.trajectory.dynamics["demo3"]!;
    const table = counterTable("demo3", dynamics);
    expect(table.header).toEqual(["tick", ...Object.keys(dynamics.transition_counts)]);
    expect(table.header).toEqual(["tick", "a01", "a12", "b10"]);
    expect(table.rows).toEqual([
      ["0", "0", "0", "0"],
      ["1", "4", "0", "0"],
      ["2", "4", "0", "0"],
      ["3", "4", "4", "0"],
      ["4", "4", "4", "0"],
    ]);
    expect(table).toMatchSnapshot();
  });

  it("keeps stacked-occupancy weights identical to the occupancy fields", () => {
    const dynamics = runFull.trajectory.dynamics["demo3"]!;
    const stacks = occupancyStacks(dynamics);
    expect(stacks).toHaveLength(dynamics.in_transit.length);
    for (const [tick, row] of stacks.entries()) {
      for (const segment of row.segments) {
        expect(segment.count).toBe(dynamics.occupancy[segment.state]![tick]);
      }
    }
    expect(stacks.map((r) => r.segments.map((s) => s.text))).toEqual([
      ["S0: 4"],
      ["S1: 4"],
      ["S1: 4"],
      ["S2: 4"],
      ["S2: 4"],
    ]);
  });

  it("renders the event log in response order", () => {
    const rows = eventRows(runFull.trajectory);
    expect(rows.map((r) => [r.tick, r.kind])).toEqual(
      runFull.trajectory.events.map((e) => [String(e.tick), e.kind]),
    );
    expect(rows).toMatchSnapshot();
  });

  it("reconstructs the editor timeline from the applied series", () => {
    expect(appliedToSchedule(runFull.trajectory.applied)).toEqual({
      "0": ["x01"],
      "2": ["x12"],
    });
  });
});

describe("inertial run (recorded)", () => {
  it("renders the incomplete badge set from the report fields", () => {
    const badges = reportBadges(runInertial.report);
    expect(badges.map((b) => [b.id, b.value, b.tone])).toEqual([
      ["complete", "no", "warn"],
      ["redundancy", "0", "ok"],
      ["omitted", "0", "ok"],
      ["complexness", "0", "info"],
      ["resource", "0", "info"],
    ]);
    expect(badges).toMatchSnapshot();
  });

  it("shows an unreached goal verbatim", () => {
    expect(runInertial.report.goal_times["demo3"]).toBeNull();
    expect(goalTimeRows(runInertial.report)).toEqual([{ key: "demo3", value: "—" }]);
  });

  it("echoes the divergence the service reported for the drifting run", () => {
    expect(divergenceRows(runInertial.report)).toEqual([
      { diagram: "demo3", boundary: "0", value: "0" },
      { diagram: "demo3", boundary: "1", value: "2" },
      { diagram: "demo3", boundary: "2", value: "2" },
    ]);
  });

  it("renders all-zero forward counters exactly as recorded", () => {
    const dynamics = runInertial.trajectory.dynamics["demo3"]!;
    const table = counterTable("demo3", dynamics);
    for (const row of table.rows) {
      expect(row.slice(1)).toEqual(row.slice(1).map(() => "0"));
    }
    expect(table).toMatchSnapshot();
  });

  it("reconstructs an empty timeline from the empty applied series", () => {
    expect(appliedToSchedule(runInertial.trajectory.applied)).toEqual({});
  });
});

describe("two-scenario comparison (recorded)", () => {
  it("orders rows exactly by the response ranking, not by saved order", () => {
    // saved entries deliberately in the opposite order of the ranking
    const saved = [savedEntryOf(runCautious), savedEntryOf(runFull)];
    const table = comparisonTable(compareTwo, saved);
    expect(table.rows.map((r) => r.scenarioId)).toEqual(compareTwo.order);
    expect(table.rows.map((r) => r.scenarioId)).toEqual(["full", "cautious"]);
    expect(table).toMatchSnapshot();
  });

  it("flags frontier membership from the response field", () => {
    const table = comparisonTable(compareTwo, [savedEntryOf(runFull), savedEntryOf(runCautious)]);
    for (const row of table.rows) {
      expect(row.frontier).toBe(compareTwo.frontier.includes(row.scenarioId));
    }
    expect(table.rows.map((r) => [r.scenarioId, r.frontier])).toEqual([
      ["full", true],
      ["cautious", true],
    ]);
  });

  it("fills cells from each saved report's fields verbatim", () => {
    const table = comparisonTable(compareTwo, [savedEntryOf(runFull), savedEntryOf(runCautious)]);
    const full = table.rows[0]!;
    expect([full.complete, full.resourceTotal, full.redundancy, full.priority]).toEqual([
      "yes",
      "2",
      "0",
      "0",
    ]);
    const cautious = table.rows[1]!;
    expect([cautious.complete, cautious.resourceTotal, cautious.redundancy, cautious.priority]).toEqual([
      "no",
      "1",
      "0",
      "2",
    ]);
  });

  it("renders a placeholder row when a ranked report was never saved", () => {
    const table = comparisonTable(compareTwo, [savedEntryOf(runFull)]);
    const missing = table.rows.find((r) => r.scenarioId === "cautious");
    expect(missing?.complete).toBe("—");
    expect(missing?.resourceTotal).toBe("—");
  });
});

describe("field text", () => {
  it("echoes numbers without rounding and nulls as a dash", () => {
    expect(fieldText(0)).toBe("0");
    expect(fieldText(2)).toBe("2");
    expect(fieldText(0.6666666666666666)).toBe("0.6666666666666666");
    expect(fieldText(null)).toBe("—");
  });
});

describe("server diagnostics", () => {
  it("renders error bodies verbatim, line by line", () => {
    const lines = errorLines({
      engine_version: "statecraft/0.1.0",
      model_hash: null,
      ok: false,
      error: "bad scenario request: inline scenario needs 'horizon'",
      diagnostics: [{ code: "E_SYNTAX", message: "expected 'end'", line: 7, column: 3 }],
      violations: [
        { code: "V_POPULATION", message: "population must be positive", subjects: ["demo3"], severity: "error" },
        { code: "V_SCALE_SIZE", message: "scale larger than advised", subjects: [], severity: "warning" },
      ],
    });
    expect(lines).toEqual([
      { severity: "error", text: "bad scenario request: inline scenario needs 'horizon'" },
      { severity: "error", text: "7:3 E_SYNTAX expected 'end'" },
      { severity: "error", text: "V_POPULATION population must be positive [demo3]" },
      { severity: "warning", text: "V_SCALE_SIZE scale larger than advised" },
    ]);
  });
});
