/**
 * Typed client for the netwatch gateway HTTP API.
 *
 * Every view in the app is a projection of these payloads; nothing is
 * recomputed client-side, so the shapes here mirror the server JSON
 * field-for-field.
 */

export interface EvidenceEntry {
  type: string;
  [key: string]: unknown;
}

export interface ChatResponse {
  session_id: string;
  answer: string;
  partial: boolean;
  evidence: EvidenceEntry[];
}

export interface Forecast {
  predicted_mean: number;
  uncertainty: number;
}

export interface InterfaceRow {
  entity: string;
  window: [number, number] | null;
  pps_in: number | null;
  pps_out: number | null;
  bps_in: number | null;
  bps_out: number | null;
  eps_in: number | null;
  eps_out: number | null;
  anomaly_count_24h: number;
  forecast_pps_in: Forecast | null;
}

export interface AnomalyEvent {
  entity_id: string;
  metric: string;
  window_start: number;
  window_end: number;
  observed: number;
  score: number;
  severity: "warn" | "critical";
  direction: "high" | "low";
}

export interface InterfaceDetail extends InterfaceRow {
  series: Record<string, [number, number][]>;
  events: AnomalyEvent[];
  incidents: string[];
}

export interface Hypothesis {
  cause: string;
  score: number;
}

export interface Incident {
  incident_id: string;
  window: [number, number];
  status: "open" | "acknowledged" | "resolved";
  members: Record<string, AnomalyEvent[]>;
  hypotheses: Hypothesis[];
  entities: string[];
}

export interface Health {
  version: string;
  started_ts: number;
  stores: Record<string, number>;
  backend: { kind: string; reachable: boolean };
  incidents_open: number;
  sessions: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `gateway unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  chat(message: string, sessionId?: string | null): Promise<ChatResponse> {
    const payload: Record<string, string> = { message };
    if (sessionId) payload.session_id = sessionId;
    return this.request<ChatResponse>("/api/chat", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  interfaces(): Promise<InterfaceRow[]> {
    return this.request<InterfaceRow[]>("/api/interfaces");
  }

  interfaceDetail(entity: string): Promise<InterfaceDetail> {
    return this.request<InterfaceDetail>(`/api/interfaces/${encodeURIComponent(entity)}`);
  }

  incidents(since?: number): Promise<Incident[]> {
    const qs = since === undefined ? "" : `?since=${since}`;
    return this.request<Incident[]>(`/api/incidents${qs}`);
  }

  acknowledge(incidentId: string): Promise<Incident> {
    return this.request<Incident>(`/api/incidents/${encodeURIComponent(incidentId)}/ack`, {
      method: "POST",
    });
  }

  health(): Promise<Health> {
    return this.request<Health>("/api/health");
  }
}
