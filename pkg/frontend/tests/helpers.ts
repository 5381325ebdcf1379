import type { FetchLike } from "../src/api";
import fixturesJson from "./fixtures.json";

export const fixtures = fixturesJson as unknown as {
  interfaces: import("../src/api").InterfaceRow[];
  chat: import("../src/api").ChatResponse;
  incidents: import("../src/api").Incident[];
  interface_detail: import("../src/api").InterfaceDetail;
  interface_detail_with_incident: import("../src/api").InterfaceDetail;
  health: import("../src/api").Health;
  ack_ok: import("../src/api").Incident;
  ack_conflict: { status: number; body: { detail: string } };
};

export interface StubCall {
  path: string;
  init?: RequestInit;
}

export type Route = (init?: RequestInit) => { status: number; body: unknown };

/** Fixture gateway: path -> canned response; records every call. */
export function stubFetch(routes: Record<string, Route | Route[]>): {
  fetchImpl: FetchLike;
  calls: StubCall[];
} {
  const calls: StubCall[] = [];
  const served: Record<string, number> = {};
  const fetchImpl: FetchLike = async (path, init) => {
    calls.push({ path, init });
    const route = routes[path];
    if (route === undefined) {
      return makeResponse(404, { detail: `no fixture for ${path}` });
    }
    const handler = Array.isArray(route)
      ? route[Math.min(served[path] ?? 0, route.length - 1)]!
      : route;
    served[path] = (served[path] ?? 0) + 1;
    const { status, body } = handler(init);
    return makeResponse(status, body);
  };
  return { fetchImpl, calls };
}

function makeResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: async () => body,
  } as Response;
}

export function failingFetch(): FetchLike {
  return async () => {
    throw new TypeError("fetch failed: connection refused");
  };
}

export const tick = () => new Promise((resolve) => setTimeout(resolve, 0));
