import { beforeEach, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api";
import { renderIncidents, wireAck } from "../src/incidents";
import { fixtures, stubFetch, tick } from "./helpers";

function container(): HTMLElement {
  document.body.innerHTML = "";
  const node = document.createElement("div");
  document.body.append(node);
  return node;
}

describe("incident feed", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders incidents with hypotheses verbatim", () => {
    const node = container();
    renderIncidents(node, fixtures.incidents);
    const cards = node.querySelectorAll(".incident");
    expect(cards).toHaveLength(fixtures.incidents.length);
    const incident = fixtures.incidents[0]!;
    const card = cards[0]!;
    expect(card.querySelector("strong")!.textContent).toBe(incident.incident_id);
    expect(card.querySelector(".status")!.textContent).toBe(incident.status);
    const causes = [...card.querySelectorAll(".hypotheses li")].map((li) => li.textContent);
    incident.hypotheses.forEach((h, i) => {
      expect(causes[i]).toBe(`${h.cause} (score ${String(h.score)})`);
    });
    expect(card.querySelector(".entities")!.textContent).toBe(incident.entities.join(", "));
  });

  it("renders the empty state", () => {
    const node = container();
    renderIncidents(node, []);
    expect(node.querySelector(".empty-state")!.textContent).toBe("No incidents.");
  });

  it("acknowledge reflects the server transition", async () => {
    const node = container();
    const { fetchImpl } = stubFetch({
      "/api/incidents/inc-000001/ack": () => ({ status: 200, body: fixtures.ack_ok }),
    });
    const ack = wireAck(new GatewayClient("", fetchImpl));
    renderIncidents(node, fixtures.incidents, (id, card) => void ack(id, card));
    (node.querySelector("button.ack") as HTMLButtonElement).click();
    await tick();
    expect(node.querySelector(".status")!.textContent).toBe("acknowledged");
    expect(node.querySelector("button.ack")).toBeNull();
  });

  it("a repeat acknowledge shows the 409 as already acknowledged", async () => {
    const node = container();
    const { fetchImpl } = stubFetch({
      "/api/incidents/inc-000001/ack": [
        () => ({ status: 200, body: fixtures.ack_ok }),
        () => ({ status: 409, body: fixtures.ack_conflict.body }),
      ],
    });
    const client = new GatewayClient("", fetchImpl);
    const ack = wireAck(client);
    renderIncidents(node, fixtures.incidents, (id, card) => void ack(id, card));
    const card = node.querySelector(".incident") as HTMLElement;
    (card.querySelector("button.ack") as HTMLButtonElement).click();
    await tick();
    // double-click case: the UI already removed the button, so simulate the
    // second ack arriving from another pane on the same incident
    await ack("inc-000001", card);
    expect(card.querySelector(".ack-notice")!.textContent).toBe("already acknowledged");
  });

  it("non-409 ack failures surface as an error notice", async () => {
    const node = container();
    const { fetchImpl } = stubFetch({
      "/api/incidents/inc-000001/ack": () => ({ status: 500, body: { detail: "boom" } }),
    });
    const ack = wireAck(new GatewayClient("", fetchImpl));
    renderIncidents(node, fixtures.incidents, (id, card) => void ack(id, card));
    (node.querySelector("button.ack") as HTMLButtonElement).click();
    await tick();
    expect(node.querySelector(".ack-notice.error")!.textContent).toContain("boom");
    // the button is re-enabled for retry
    expect((node.querySelector("button.ack") as HTMLButtonElement).disabled).toBe(false);
  });
});
