/** Typed client for the statecraft HTTP service.
 *
 * Every interface here mirrors a response shape field-for-field.  The client
 * never computes anything from the payloads; it only moves them, so each
 * number shown in the studio traces back to a service response field.
 */

/** Fields present on every response, success or failure. */
export interface Envelope {
  engine_version: string;
  model_hash: string | null;
}

export interface DiagramSummary {
  id: string;
  states: string[];
  arcs: number;
  population: number;
  horizon: number;
}

export interface ModelSummary {
  diagrams: DiagramSummary[];
  levels: number;
  symbols: string[];
  couplings: string[];
  scenarios: string[];
  rules: string[];
}

export interface ModelResponse extends Envelope {
  summary: ModelSummary;
}

/** Parse diagnostic from a rejected model text. */
export interface Diagnostic {
  code: string;
  message: string;
  line: number;
  column: number;
}

/** Validation finding from a rejected assembly. */
export interface Violation {
  code: string;
  message: string;
  subjects: unknown[];
  severity: string;
}

export interface LoadAccepted extends Envelope {
  ok: true;
}

export interface LoadRejected extends Envelope {
  ok: false;
  diagnostics?: Diagnostic[];
  violations?: Violation[];
}

export type LoadResponse = LoadAccepted | LoadRejected;

export interface ReportDoc {
  scenario_id: string;
  model_hash: string;
  horizon: number;
  priority: number;
  complete: boolean;
  redundancy_count: number;
  omitted_ratio: number;
  complexness: number;
  goal_times: Record<string, number | null>;
  resource_total: number;
  divergence: Record<string, Record<string, number>>;
}

export interface DiagramDynamics {
  occupancy: Record<string, number[]>;
  transition_counts: Record<string, number[]>;
  in_transit: number[];
}

/** One log entry; fields that do not apply to the kind are omitted. */
export interface EventRow {
  tick: number;
  kind: string;
  diagram: string;
  arc?: string;
  symbol?: string;
  objects?: number[];
}

export interface TrajectoryDoc {
  scenario_id: string;
  model_hash: string;
  horizon: number;
  dynamics: Record<string, DiagramDynamics>;
  events: EventRow[];
  applied: Record<string, string[][]>;
  modal: Record<string, string[]>;
  criterion: Record<string, number[]>;
  resource_series: Record<string, number[]>;
  resource_total: number;
  redundancy_count: number;
  omitted_backsteps: number;
  backstep_count: number;
  forward_completions: number;
  coupled_forward: number;
}

export interface RunResponse extends Envelope {
  report: ReportDoc;
  trajectory: TrajectoryDoc;
}

/** Named-scenario run; ``horizon`` optionally overrides the declared one. */
export interface NamedRunRequest {
  scenario: string;
  horizon?: number;
}

/** Ad-hoc run assembled from the editor's timeline. */
export interface InlineRunRequest {
  id?: string;
  horizon: number;
  schedule?: Record<string, string[]>;
  priority?: number;
  suppressed?: [string, string][];
}

export type RunRequest = NamedRunRequest | InlineRunRequest;

export interface PlanDoc {
  rules: string[];
  total_resource: number;
  total_time: number;
  states: string[];
}

export interface PlanResponse extends Envelope {
  from: string;
  to: string;
  plans: PlanDoc[];
}

export interface PlanRequest {
  from: string;
  to: string;
  max_resource?: number;
  max_time?: number;
}

export interface CompareRequest {
  reports: string[];
}

export interface CompareResponse extends Envelope {
  order: string[];
  frontier: string[];
}

/** 4xx/5xx payloads: {"error": "..."} plus the envelope. */
export interface ErrorBody extends Envelope {
  error?: string;
  ok?: false;
  diagnostics?: Diagnostic[];
  violations?: Violation[];
}

export class ServiceError extends Error {
  readonly status: number;
  readonly body: ErrorBody;

  constructor(status: number, body: ErrorBody) {
    super(body.error ?? `service answered ${status}`);
    this.name = "ServiceError";
    this.status = status;
    this.body = body;
  }
}

async function request<T>(base: string, method: string, path: string, payload?: unknown): Promise<T> {
  const init: RequestInit = { method, headers: { "content-type": "application/json" } };
  if (payload !== undefined) {
    init.body = JSON.stringify(payload);
  }
  const response = await fetch(base + path, init);
  const parsed: unknown = await response.json();
  if (!response.ok) {
    throw new ServiceError(response.status, parsed as ErrorBody);
  }
  return parsed as T;
}

/** Thin wrapper over the six service routes; one method per route. */
export class StudioClient {
  private readonly base: string;

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  getModel(): Promise<ModelResponse> {
    return request<ModelResponse>(this.base, "GET", "/model");
  }

  loadModel(text: string): Promise<LoadResponse> {
    return request<LoadResponse>(this.base, "POST", "/model", { text });
  }

  run(body: RunRequest): Promise<RunResponse> {
    return request<RunResponse>(this.base, "POST", "/run", body);
  }

  inertial(horizon?: number): Promise<RunResponse> {
    const body = horizon === undefined ? {} : { horizon };
    return request<RunResponse>(this.base, "POST", "/inertial", body);
  }

  plan(body: PlanRequest): Promise<PlanResponse> {
    return request<PlanResponse>(this.base, "POST", "/plan", body);
  }

  compare(body: CompareRequest): Promise<CompareResponse> {
    return request<CompareResponse>(this.base, "POST", "/compare", body);
  }
}
