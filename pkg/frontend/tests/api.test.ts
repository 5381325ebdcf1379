import { describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api";
import { fixtures, stubFetch, failingFetch } from "./helpers";

describe("GatewayClient", () => {
  it("posts chat messages with session id", async () => {
    const { fetchImpl, calls } = stubFetch({
      "/api/chat": () => ({ status: 200, body: fixtures.chat }),
    });
    const client = new GatewayClient("", fetchImpl);
    const first = await client.chat("summarize all interfaces");
    expect(first.answer).toBe(fixtures.chat.answer);
    await client.chat("again", first.session_id);
    expect(calls).toHaveLength(2);
    expect(JSON.parse(String(calls[0]!.init!.body))).toEqual({
      message: "summarize all interfaces",
    });
    expect(JSON.parse(String(calls[1]!.init!.body))).toEqual({
      message: "again",
      session_id: fixtures.chat.session_id,
    });
  });

  it("fetches interfaces and detail", async () => {
    const { fetchImpl, calls } = stubFetch({
      "/api/interfaces": () => ({ status: 200, body: fixtures.interfaces }),
      "/api/interfaces/booth01-eth0": () => ({ status: 200, body: fixtures.interface_detail }),
    });
    const client = new GatewayClient("", fetchImpl);
    const rows = await client.interfaces();
    expect(rows).toHaveLength(50);
    const detail = await client.interfaceDetail("booth01-eth0");
    expect(detail.entity).toBe("booth01-eth0");
    expect(calls[1]!.path).toBe("/api/interfaces/booth01-eth0");
  });

  it("maps error statuses to ApiError", async () => {
    const { fetchImpl } = stubFetch({
      "/api/interfaces/ghost": () => ({ status: 404, body: { detail: "unknown interface" } }),
    });
    const client = new GatewayClient("", fetchImpl);
    await expect(client.interfaceDetail("ghost")).rejects.toMatchObject({
      status: 404,
      detail: "unknown interface",
    });
  });

  it("maps network failure to status 0", async () => {
    const client = new GatewayClient("", failingFetch());
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
  });

  it("acknowledges incidents via POST", async () => {
    const { fetchImpl, calls } = stubFetch({
      "/api/incidents/inc-000001/ack": () => ({ status: 200, body: fixtures.ack_ok }),
    });
    const client = new GatewayClient("", fetchImpl);
    const updated = await client.acknowledge("inc-000001");
    expect(updated.status).toBe("acknowledged");
    expect(calls[0]!.init!.method).toBe("POST");
  });

  it("passes the since filter through", async () => {
    const { fetchImpl, calls } = stubFetch({
      "/api/incidents?since=123": () => ({ status: 200, body: [] }),
    });
    await new GatewayClient("", fetchImpl).incidents(123);
    expect(calls[0]!.path).toBe("/api/incidents?since=123");
  });
});
