/** DOM wiring for the studio.  All state lives in a SessionState value and
 * every repaint re-renders from it; the only numbers on screen come from
 * the view models in render.ts, which echo service response fields.
 */

import {
  ServiceError,
  StudioClient,
  type CompareResponse,
  type RunRequest,
} from "./api.js";
import {
  acceptRun,
  beginRun,
  comparableIds,
  editTimeline,
  emptySession,
  exportSession,
  failRun,
  importSession,
  isStale,
  modelLoaded,
  reloadSaved,
  saveToComparison,
  setHorizon,
  type SessionState,
} from "./session.js";
import {
  comparisonTable,
  divergenceRows,
  errorLines,
  eventRows,
  goalTimeRows,
  occupancyStacks,
  occupancyTable,
  counterTable,
  reportBadges,
  type SeriesTable,
} from "./render.js";

const API_BASE = new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8350";
const client = new StudioClient(API_BASE);

let state: SessionState = emptySession();
let lastCompare: CompareResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function describeError(err: unknown): string {
  if (err instanceof ServiceError) {
    return errorLines(err.body)
      .map((line) => `${line.severity}: ${line.text}`)
      .join("\n");
  }
  return err instanceof Error ? err.message : String(err);
}

// ---------------------------------------------------------------- painting

function paintNotices(): void {
  const box = el<HTMLDivElement>("notices");
  box.innerHTML = state.notices
    .slice(-6)
    .map((n) => `<div class="notice notice-${n.kind}">${esc(n.text)}</div>`)
    .join("");
}

function paintModel(): void {
  const box = el<HTMLDivElement>("model-info");
  if (state.summary === null || state.modelHash === null) {
    box.innerHTML = `<p class="hint">No model loaded. Paste model text below or fetch the one the service holds.</p>`;
    return;
  }
  const diagrams = state.summary.diagrams
    .map(
      (d) =>
        `<tr><td>${esc(d.id)}</td><td>${d.states.length}</td><td>${d.arcs}</td>` +
        `<td>${d.population}</td><td>${d.horizon}</td></tr>`,
    )
    .join("");
  box.innerHTML = `
    <p><span class="mono">${esc(state.modelHash.slice(0, 12))}</span>
       · ${state.summary.levels} level(s)
       · symbols: ${state.summary.symbols.map(esc).join(", ") || "none"}</p>
    <table class="grid">
      <thead><tr><th>diagram</th><th>states</th><th>arcs</th><th>population</th><th>horizon</th></tr></thead>
      <tbody>${diagrams}</tbody>
    </table>`;
}

function paintEditor(): void {
  const symbolSelect = el<HTMLSelectElement>("symbol-select");
  const scenarioSelect = el<HTMLSelectElement>("scenario-select");
  const symbols = state.summary?.symbols ?? [];
  symbolSelect.innerHTML = symbols.map((s) => `<option value="${esc(s)}">${esc(s)}</option>`).join("");
  const scenarios = state.summary?.scenarios ?? [];
  scenarioSelect.innerHTML =
    `<option value="">(working timeline)</option>` +
    scenarios.map((s) => `<option value="${esc(s)}">${esc(s)}</option>`).join("");

  el<HTMLInputElement>("horizon-input").value = String(state.working.horizon);
  el<HTMLSpanElement>("pending-flag").textContent = state.pendingChanges
    ? "unsaved timeline changes"
    : "";

  const ticks = Object.keys(state.working.schedule)
    .map(Number)
    .sort((a, b) => a - b);
  const rows = ticks
    .map((tick) => {
      const chips = (state.working.schedule[String(tick)] ?? [])
        .map(
          (s) =>
            `<button class="chip" data-tick="${tick}" data-symbol="${esc(s)}" ` +
            `title="remove">${esc(s)} ✕</button>`,
        )
        .join(" ");
      return `<tr><td>${tick}</td><td>${chips}</td></tr>`;
    })
    .join("");
  el<HTMLTableSectionElement>("timeline-body").innerHTML =
    rows || `<tr><td colspan="2" class="hint">empty timeline — inertial run</td></tr>`;
}

function seriesTableHtml(table: SeriesTable): string {
  const head = table.header.map((h) => `<th>${esc(h)}</th>`).join("");
  const body = table.rows
    .map((row) => `<tr>${row.map((c) => `<td>${esc(c)}</td>`).join("")}</tr>`)
    .join("");
  return `
    <h4>${esc(table.title)}</h4>
    <div class="scroll"><table class="grid">
      <thead><tr>${head}</tr></thead><tbody>${body}</tbody>
    </table></div>`;
}

function paintRun(): void {
  const box = el<HTMLDivElement>("run-view");
  const saveButton = el<HTMLButtonElement>("save-report");
  if (state.lastRun === null) {
    box.innerHTML = `<p class="hint">Run a scenario to see its trajectory and report.</p>`;
    saveButton.disabled = true;
    return;
  }
  const stale = isStale(state, state.lastRun);
  saveButton.disabled = stale;
  const run = state.lastRun;

  const badges = reportBadges(run.report)
    .map(
      (b) =>
        `<span class="badge badge-${b.tone}" data-badge="${b.id}">` +
        `${esc(b.label)}: <strong>${esc(b.value)}</strong></span>`,
    )
    .join(" ");
  const goals = goalTimeRows(run.report)
    .map((r) => `<tr><td>${esc(r.key)}</td><td>${esc(r.value)}</td></tr>`)
    .join("");
  const divergence = divergenceRows(run.report)
    .map((r) => `<tr><td>${esc(r.diagram)}</td><td>${esc(r.boundary)}</td><td>${esc(r.value)}</td></tr>`)
    .join("");

  const sections: string[] = [];
  for (const [diagram, dynamics] of Object.entries(run.trajectory.dynamics)) {
    const stacks = occupancyStacks(dynamics)
      .map((row) => {
        const segments = row.segments
          .map(
            (seg) =>
              `<div class="stack-seg" style="flex-grow:${seg.count}" title="${esc(seg.text)}">` +
              `${esc(seg.text)}</div>`,
          )
          .join("");
        return `<div class="stack-row"><span class="stack-tick">${esc(row.tick)}</span>` +
          `<div class="stack-bar">${segments || `<div class="stack-empty">all in transit</div>`}</div></div>`;
      })
      .join("");
    sections.push(`
      <h4>occupancy over ticks — ${esc(diagram)}</h4>
      <div class="stacks">${stacks}</div>
      ${seriesTableHtml(occupancyTable(diagram, dynamics))}
      ${seriesTableHtml(counterTable(diagram, dynamics))}`);
  }

  const events = eventRows(run.trajectory)
    .map(
      (e) =>
        `<tr><td>${esc(e.tick)}</td><td>${esc(e.kind)}</td><td>${esc(e.diagram)}</td>` +
        `<td>${esc(e.arc)}</td><td>${esc(e.symbol)}</td><td>${esc(e.objects)}</td></tr>`,
    )
    .join("");

  box.innerHTML = `
    ${stale ? `<p class="notice notice-error">stale: this run is from a previously loaded model (${esc(run.modelHash.slice(0, 12))})</p>` : ""}
    <p>scenario <strong>${esc(run.report.scenario_id)}</strong>
       · horizon ${run.report.horizon}
       · model <span class="mono">${esc(run.modelHash.slice(0, 12))}</span></p>
    <div class="badges">${badges}</div>
    <div class="columns">
      <div>
        <h4>goal times</h4>
        <table class="grid"><thead><tr><th>diagram</th><th>first full tick</th></tr></thead>
        <tbody>${goals}</tbody></table>
      </div>
      <div>
        <h4>divergence per boundary</h4>
        <table class="grid"><thead><tr><th>diagram</th><th>boundary</th><th>L1</th></tr></thead>
        <tbody>${divergence}</tbody></table>
      </div>
    </div>
    ${sections.join("")}
    <h4>events</h4>
    <div class="scroll"><table class="grid">
      <thead><tr><th>tick</th><th>kind</th><th>diagram</th><th>arc</th><th>symbol</th><th>objects</th></tr></thead>
      <tbody>${events}</tbody>
    </table></div>`;
}

function paintCompare(): void {
  const box = el<HTMLDivElement>("compare-view");
  const button = el<HTMLButtonElement>("compare-button");
  const ids = comparableIds(state);
  button.disabled = ids.length < 2 || state.runInFlight;
  const savedList = ids.map(esc).join(", ") || "none";
  if (ids.length < 2) {
    lastCompare = null;
    box.innerHTML = `<p class="hint">Save at least two reports to compare (saved: ${savedList}).</p>`;
    return;
  }
  if (lastCompare === null) {
    box.innerHTML = `<p class="hint">Saved: ${savedList}. Press compare to rank them.</p>`;
    return;
  }
  const table = comparisonTable(lastCompare, state.saved);
  const head = table.header.map((h) => `<th>${esc(h)}</th>`).join("");
  const rows = table.rows
    .map(
      (row) =>
        `<tr class="${row.frontier ? "frontier" : ""}" data-scenario="${esc(row.scenarioId)}">` +
        `<td>${esc(row.scenarioId)}</td><td>${row.frontier ? "★" : ""}</td>` +
        `<td>${esc(row.complete)}</td><td>${esc(row.resourceTotal)}</td>` +
        `<td>${esc(row.redundancy)}</td><td>${esc(row.omittedRatio)}</td>` +
        `<td>${esc(row.complexness)}</td><td>${esc(row.priority)}</td></tr>`,
    )
    .join("");
  box.innerHTML = `
    <p class="hint">Ranked by the engine; ★ marks the frontier. Click a row to reload its timeline.</p>
    <table class="grid clickable"><thead><tr>${head}</tr></thead><tbody>${rows}</tbody></table>`;
}

function paintControls(): void {
  el<HTMLButtonElement>("run-button").disabled = state.runInFlight || state.modelHash === null;
  el<HTMLButtonElement>("inertial-button").disabled = state.runInFlight || state.modelHash === null;
}

function paintAll(): void {
  paintNotices();
  paintModel();
  paintEditor();
  paintRun();
  paintCompare();
  paintControls();
}

// ---------------------------------------------------------------- actions

async function fetchModel(): Promise<void> {
  try {
    const resp = await client.getModel();
    if (resp.model_hash !== null) {
      state = modelLoaded(state, resp.model_hash, resp.summary);
    }
  } catch (err) {
    state = { ...state, notices: [...state.notices, { kind: "error", text: describeError(err) }] };
  }
  paintAll();
}

async function pushModel(): Promise<void> {
  const text = el<HTMLTextAreaElement>("model-text").value;
  try {
    await client.loadModel(text);
    await fetchModel();
    return;
  } catch (err) {
    state = { ...state, notices: [...state.notices, { kind: "error", text: describeError(err) }] };
  }
  paintAll();
}

async function runScenario(): Promise<void> {
  const begun = beginRun(state);
  if (begun === null) {
    return;
  }
  state = begun.session;
  paintControls();
  const named = el<HTMLSelectElement>("scenario-select").value;
  const body: RunRequest = named
    ? { scenario: named }
    : {
        id: "working",
        horizon: state.working.horizon,
        schedule: state.working.schedule,
      };
  try {
    const resp = await client.run(body);
    state = acceptRun(state, begun.startedHash, resp);
  } catch (err) {
    state = failRun(state, describeError(err));
  }
  paintAll();
}

async function runInertial(): Promise<void> {
  const begun = beginRun(state);
  if (begun === null) {
    return;
  }
  state = begun.session;
  paintControls();
  try {
    const resp = await client.inertial();
    state = acceptRun(state, begun.startedHash, resp);
  } catch (err) {
    state = failRun(state, describeError(err));
  }
  paintAll();
}

async function runCompare(): Promise<void> {
  const ids = comparableIds(state);
  if (ids.length < 2) {
    return;
  }
  try {
    lastCompare = await client.compare({ reports: ids });
  } catch (err) {
    lastCompare = null;
    state = { ...state, notices: [...state.notices, { kind: "error", text: describeError(err) }] };
  }
  paintAll();
}

function downloadSession(): void {
  const blob = new Blob([exportSession(state)], { type: "application/json" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = "scenario-studio-session.json";
  anchor.click();
  URL.revokeObjectURL(url);
}

function wire(): void {
  el<HTMLButtonElement>("fetch-model").addEventListener("click", () => void fetchModel());
  el<HTMLButtonElement>("push-model").addEventListener("click", () => void pushModel());
  el<HTMLButtonElement>("run-button").addEventListener("click", () => void runScenario());
  el<HTMLButtonElement>("inertial-button").addEventListener("click", () => void runInertial());
  el<HTMLButtonElement>("compare-button").addEventListener("click", () => void runCompare());
  el<HTMLButtonElement>("export-session").addEventListener("click", downloadSession);

  el<HTMLButtonElement>("add-symbol").addEventListener("click", () => {
    const tick = Number(el<HTMLInputElement>("tick-input").value);
    const symbol = el<HTMLSelectElement>("symbol-select").value;
    state = editTimeline(state, tick, symbol, "add");
    paintAll();
  });

  el<HTMLTableSectionElement>("timeline-body").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset["symbol"] !== undefined && target.dataset["tick"] !== undefined) {
      state = editTimeline(state, Number(target.dataset["tick"]), target.dataset["symbol"], "remove");
      paintAll();
    }
  });

  el<HTMLInputElement>("horizon-input").addEventListener("change", (event) => {
    state = setHorizon(state, Number((event.target as HTMLInputElement).value));
    paintAll();
  });

  el<HTMLButtonElement>("save-report").addEventListener("click", () => {
    state = saveToComparison(state);
    paintAll();
  });

  el<HTMLDivElement>("compare-view").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest("tr[data-scenario]");
    if (row instanceof HTMLTableRowElement && row.dataset["scenario"] !== undefined) {
      state = reloadSaved(state, row.dataset["scenario"]);
      paintAll();
    }
  });

  el<HTMLInputElement>("import-session").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file === undefined) {
      return;
    }
    void file.text().then((text) => {
      try {
        state = importSession(text);
        lastCompare = null;
      } catch (err) {
        state = { ...state, notices: [...state.notices, { kind: "error", text: describeError(err) }] };
      }
      paintAll();
      input.value = "";
    });
  });
}

wire();
paintAll();
void fetchModel();
