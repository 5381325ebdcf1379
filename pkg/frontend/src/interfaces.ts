/**
 * Interface summary table and per-interface diagnosis view.
 *
 * Render fidelity rule: every number in these views is the API value
 * rendered verbatim (String(x)); sorting is the only client-side behavior.
 */

import { ApiError, GatewayClient, InterfaceDetail, InterfaceRow } from "./api";
import { clear, el, fmt } from "./dom";
import { renderSparkline } from "./sparkline";

const COLUMNS: { key: keyof InterfaceRow; label: string }[] = [
  { key: "entity", label: "interface" },
  { key: "pps_in", label: "pps in" },
  { key: "pps_out", label: "pps out" },
  { key: "bps_in", label: "bps in" },
  { key: "bps_out", label: "bps out" },
  { key: "eps_in", label: "errs/s in" },
  { key: "eps_out", label: "errs/s out" },
  { key: "anomaly_count_24h", label: "anomalies 24h" },
];

export function renderInterfaceTable(
  container: HTMLElement,
  rows: InterfaceRow[],
  opts: {
    sortByAnomalies?: boolean;
    onSelect?: (entity: string) => void;
    onToggleSort?: () => void;
  } = {},
): void {
  clear(container);
  if (rows.length === 0) {
    container.append(el("p", { class: "empty-state" }, "No interfaces in the store yet."));
    return;
  }
  const ordered = opts.sortByAnomalies
    ? [...rows].sort(
        (a, b) =>
          b.anomaly_count_24h - a.anomaly_count_24h || a.entity.localeCompare(b.entity),
      )
    : rows;

  const table = el("table", { class: "iface-table" });
  const head = el("tr");
  for (const column of COLUMNS) {
    const th = el("th", {}, column.label);
    if (column.key === "anomaly_count_24h") {
      th.classList.add("sortable");
      if (opts.sortByAnomalies) th.classList.add("sorted");
      th.addEventListener("click", () => opts.onToggleSort?.());
    }
    head.append(th);
  }
  head.append(el("th", {}, "forecast pps in"));
  table.append(el("thead", {}, head));

  const body = el("tbody");
  for (const row of ordered) {
    const tr = el("tr", { class: "iface-row", "data-entity": row.entity });
    for (const column of COLUMNS) {
      const value = row[column.key] as number | string | null;
      tr.append(el("td", {}, fmt(value)));
    }
    tr.append(
      el("td", {}, row.forecast_pps_in ? fmt(row.forecast_pps_in.predicted_mean) : fmt(null)),
    );
    tr.addEventListener("click", () => opts.onSelect?.(row.entity));
    body.append(tr);
  }
  table.append(body);
  container.append(table);
}

export function renderInterfaceDetail(
  container: HTMLElement,
  detail: InterfaceDetail,
  onBack?: () => void,
): void {
  clear(container);
  const back = el("button", { class: "back" }, "← all interfaces");
  if (onBack) back.addEventListener("click", onBack);
  container.append(back);
  container.append(el("h2", {}, detail.entity));

  const facts = el("dl", { class: "facts" });
  const fact = (label: string, value: string) => {
    facts.append(el("dt", {}, label), el("dd", {}, value));
  };
  fact("pps in", fmt(detail.pps_in));
  fact("pps out", fmt(detail.pps_out));
  fact("errs/s in", fmt(detail.eps_in));
  fact("anomalies 24h", fmt(detail.anomaly_count_24h));
  if (detail.forecast_pps_in) {
    fact("forecast pps in", fmt(detail.forecast_pps_in.predicted_mean));
    fact("forecast uncertainty", fmt(detail.forecast_pps_in.uncertainty));
  }
  container.append(facts);

  const marks: [number, number][] = detail.events.map((e) => [e.window_start, e.window_end]);
  const charts = el("div", { class: "charts" });
  for (const [metric, series] of Object.entries(detail.series)) {
    const block = el("figure", { class: "chart" });
    block.append(renderSparkline(series, { markWindows: marks }));
    block.append(el("figcaption", {}, metric));
    charts.append(block);
  }
  container.append(charts);

  const events = el("div", { class: "events" });
  events.append(el("h3", {}, `events (${detail.events.length})`));
  for (const event of detail.events) {
    events.append(
      el(
        "div",
        { class: `event event-${event.severity}` },
        `${event.metric} ${event.severity} ${event.direction} ` +
          `score=${fmt(event.score)} observed=${fmt(event.observed)} ` +
          `window=[${fmt(event.window_start)}, ${fmt(event.window_end)})`,
      ),
    );
  }
  container.append(events);

  const incidents = el("div", { class: "linked-incidents" });
  incidents.append(el("h3", {}, `open incidents (${detail.incidents.length})`));
  for (const id of detail.incidents) {
    incidents.append(el("span", { class: "incident-chip" }, id));
  }
  container.append(incidents);
}

export function renderNotFound(container: HTMLElement, entity: string, onBack?: () => void): void {
  clear(container);
  const pane = el("div", { class: "not-found" });
  pane.append(el("h2", {}, "Interface not found"));
  pane.append(el("p", {}, `No interface named "${entity}" exists in the store.`));
  const back = el("button", { class: "back" }, "← all interfaces");
  if (onBack) back.addEventListener("click", onBack);
  pane.append(back);
  container.append(pane);
}

export async function showInterfaceDetail(
  container: HTMLElement,
  client: GatewayClient,
  entity: string,
  onBack?: () => void,
): Promise<void> {
  try {
    const detail = await client.interfaceDetail(entity);
    renderInterfaceDetail(container, detail, onBack);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      renderNotFound(container, entity, onBack);
      return;
    }
    throw err;
  }
}
