/**
 * Live incident feed with acknowledge action.
 *
 * The ack button calls the gateway and reflects the transition it reports;
 * a repeat ack surfaces the server's 409 as "already acknowledged".
 */

import { ApiError, GatewayClient, Incident } from "./api";
import { clear, el, fmt } from "./dom";

export function renderIncidents(
  container: HTMLElement,
  incidents: Incident[],
  onAck?: (id: string, card: HTMLElement) => void,
): void {
  clear(container);
  if (incidents.length === 0) {
    container.append(el("p", { class: "empty-state" }, "No incidents."));
    return;
  }
  for (const incident of incidents) {
    container.append(renderIncidentCard(incident, onAck));
  }
}

function renderIncidentCard(
  incident: Incident,
  onAck?: (id: string, card: HTMLElement) => void,
): HTMLElement {
  const card = el("article", { class: "incident", "data-id": incident.incident_id });
  const head = el("header", { class: "incident-head" });
  head.append(el("strong", {}, incident.incident_id));
  head.append(el("span", { class: `status status-${incident.status}` }, incident.status));
  head.append(
    el("span", { class: "window" },
       `[${fmt(incident.window[0])}, ${fmt(incident.window[1])})`),
  );
  card.append(head);

  const causes = el("ol", { class: "hypotheses" });
  for (const hypothesis of incident.hypotheses) {
    causes.append(el("li", {}, `${hypothesis.cause} (score ${fmt(hypothesis.score)})`));
  }
  card.append(causes);

  const members = el("div", { class: "members" });
  for (const [kind, events] of Object.entries(incident.members)) {
    members.append(el("span", { class: "member-kind" }, `${kind}: ${events.length} event(s)`));
  }
  card.append(members);
  card.append(el("div", { class: "entities" }, incident.entities.join(", ")));

  if (incident.status === "open") {
    const button = el("button", { class: "ack" }, "Acknowledge");
    button.addEventListener("click", () => onAck?.(incident.incident_id, card));
    card.append(button);
  }
  return card;
}

export function wireAck(client: GatewayClient) {
  return async (id: string, card: HTMLElement): Promise<void> => {
    const button = card.querySelector<HTMLButtonElement>("button.ack");
    if (button) button.disabled = true;
    try {
      const updated = await client.acknowledge(id);
      const status = card.querySelector(".status");
      if (status) {
        status.textContent = updated.status;
        status.className = `status status-${updated.status}`;
      }
      button?.remove();
    } catch (err) {
      if (button) button.disabled = false;
      if (err instanceof ApiError && err.status === 409) {
        button?.remove();
        card.append(el("p", { class: "ack-notice" }, "already acknowledged"));
        return;
      }
      card.append(
        el("p", { class: "ack-notice error" },
           `acknowledge failed: ${err instanceof Error ? err.message : String(err)}`),
      );
    }
  };
}
