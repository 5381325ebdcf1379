import { beforeEach, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api";
import {
  renderInterfaceTable,
  renderInterfaceDetail,
  showInterfaceDetail,
} from "../src/interfaces";
import { fixtures, stubFetch } from "./helpers";

function container(): HTMLElement {
  document.body.innerHTML = "";
  const node = document.createElement("div");
  document.body.append(node);
  return node;
}

describe("interface table", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders one row per API row with verbatim values", () => {
    const node = container();
    renderInterfaceTable(node, fixtures.interfaces);
    const rows = node.querySelectorAll("tbody tr");
    expect(rows).toHaveLength(50);
    fixtures.interfaces.forEach((row, i) => {
      const cells = rows[i]!.querySelectorAll("td");
      expect(cells[0]!.textContent).toBe(row.entity);
      expect(cells[1]!.textContent).toBe(String(row.pps_in));
      expect(cells[3]!.textContent).toBe(String(row.bps_in));
      expect(cells[5]!.textContent).toBe(String(row.eps_in));
      expect(cells[7]!.textContent).toBe(String(row.anomaly_count_24h));
      const forecast = row.forecast_pps_in;
      expect(cells[8]!.textContent).toBe(
        forecast ? String(forecast.predicted_mean) : "—",
      );
    });
  });

  it("sorts by anomaly count on demand without altering values", () => {
    const node = container();
    renderInterfaceTable(node, fixtures.interfaces, { sortByAnomalies: true });
    const counts = [...node.querySelectorAll("tbody tr")].map((tr) =>
      Number(tr.querySelectorAll("td")[7]!.textContent),
    );
    const expected = [...fixtures.interfaces.map((r) => r.anomaly_count_24h)].sort(
      (a, b) => b - a,
    );
    expect(counts).toEqual(expected);
  });

  it("toggle handler fires from the header", () => {
    const node = container();
    let toggled = 0;
    renderInterfaceTable(node, fixtures.interfaces, { onToggleSort: () => toggled++ });
    (node.querySelector("th.sortable") as HTMLElement).click();
    expect(toggled).toBe(1);
  });

  it("renders the empty state for an empty store", () => {
    const node = container();
    renderInterfaceTable(node, []);
    expect(node.querySelector(".empty-state")).not.toBeNull();
    expect(node.querySelector("table")).toBeNull();
  });

  it("row click selects the entity", () => {
    const node = container();
    const picked: string[] = [];
    renderInterfaceTable(node, fixtures.interfaces, { onSelect: (e) => picked.push(e) });
    (node.querySelector("tbody tr") as HTMLElement).click();
    expect(picked).toEqual([fixtures.interfaces[0]!.entity]);
  });
});

describe("interface detail", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders facts, sparklines with anomaly marks, events, and incidents", () => {
    const node = container();
    const detail = fixtures.interface_detail_with_incident;
    renderInterfaceDetail(node, detail);
    expect(node.querySelector("h2")!.textContent).toBe(detail.entity);
    const charts = node.querySelectorAll("figure.chart");
    expect(charts).toHaveLength(Object.keys(detail.series).length);
    const marks = node.querySelectorAll("rect.spark-anomaly");
    expect(marks.length).toBeGreaterThan(0); // events shade their windows
    const events = node.querySelectorAll(".event");
    expect(events).toHaveLength(detail.events.length);
    const chips = [...node.querySelectorAll(".incident-chip")].map((c) => c.textContent);
    expect(chips).toEqual(detail.incidents);
  });

  it("shows a friendly not-found pane on 404", async () => {
    const node = container();
    const { fetchImpl } = stubFetch({
      "/api/interfaces/ghost0": () => ({ status: 404, body: { detail: "unknown" } }),
    });
    await showInterfaceDetail(node, new GatewayClient("", fetchImpl), "ghost0");
    expect(node.querySelector(".not-found")).not.toBeNull();
    expect(node.textContent).toContain('No interface named "ghost0"');
  });

  it("loads and renders detail from the API", async () => {
    const node = container();
    const { fetchImpl } = stubFetch({
      "/api/interfaces/booth01-eth0": () => ({
        status: 200,
        body: fixtures.interface_detail_with_incident,
      }),
    });
    await showInterfaceDetail(node, new GatewayClient("", fetchImpl), "booth01-eth0");
    expect(node.querySelector("h2")!.textContent).toBe("booth01-eth0");
  });
});
