/**
 * Single-page app wiring: tab navigation, polling, and view refresh.
 * One in-flight chat request per session; incident/interface polling runs
 * independently (default 10 s).
 */

import { GatewayClient } from "./api";
import { buildChatPane, wireChat } from "./chat";
import { clear, el } from "./dom";
import { wireAck, renderIncidents } from "./incidents";
import { renderInterfaceTable, showInterfaceDetail } from "./interfaces";
import { initialState } from "./state";

export function startApp(root: HTMLElement, client = new GatewayClient()): void {
  const state = initialState();

  const tabs = el("nav", { class: "tabs" });
  const main = el("main", { class: "main" });
  const chatPane = buildChatPane();
  const interfacesPane = el("section", { class: "pane" });
  const incidentsPane = el("section", { class: "pane" });
  wireChat(chatPane, state, client);
  const ack = wireAck(client);

  const views: Record<string, HTMLElement> = {
    chat: chatPane.root,
    interfaces: interfacesPane,
    incidents: incidentsPane,
  };
  let active = "chat";

  const show = (name: string) => {
    active = name;
    clear(main);
    main.append(views[name] ?? chatPane.root);
    for (const button of tabs.querySelectorAll("button")) {
      button.classList.toggle("active", button.dataset.view === name);
    }
    if (name === "interfaces") void refreshInterfaces();
    if (name === "incidents") void refreshIncidents();
  };

  for (const name of ["chat", "interfaces", "incidents"]) {
    const button = el("button", { "data-view": name }, name);
    button.addEventListener("click", () => show(name));
    tabs.append(button);
  }

  const refreshInterfaces = async () => {
    if (state.selectedInterface) {
      await showInterfaceDetail(interfacesPane, client, state.selectedInterface, () => {
        state.selectedInterface = null;
        void refreshInterfaces();
      });
      return;
    }
    try {
      const rows = await client.interfaces();
      renderInterfaceTable(interfacesPane, rows, {
        sortByAnomalies: state.sortByAnomalies,
        onSelect: (entity) => {
          state.selectedInterface = entity;
          void refreshInterfaces();
        },
        onToggleSort: () => {
          state.sortByAnomalies = !state.sortByAnomalies;
          void refreshInterfaces();
        },
      });
    } catch (err) {
      clear(interfacesPane);
      interfacesPane.append(
        el("p", { class: "empty-state error" }, `failed to load interfaces: ${String(err)}`),
      );
    }
  };

  const refreshIncidents = async () => {
    try {
      state.incidents = await client.incidents();
      renderIncidents(incidentsPane, state.incidents, (id, card) => void ack(id, card));
    } catch (err) {
      clear(incidentsPane);
      incidentsPane.append(
        el("p", { class: "empty-state error" }, `failed to load incidents: ${String(err)}`),
      );
    }
  };

  setInterval(() => {
    if (active === "incidents") void refreshIncidents();
    if (active === "interfaces" && !state.selectedInterface) void refreshInterfaces();
  }, state.pollMs);

  root.append(el("header", { class: "top" }, el("h1", {}, "netwatch"), tabs), main);
  show("chat");
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(document.getElementById("app")!);
}
