/**
 * Chat pane: operator question in, answer plus expandable evidence out.
 *
 * Failures surface as inline notices and re-enable the input; a sent turn
 * is never dropped from the transcript.
 */

import { ApiError, GatewayClient } from "./api";
import { clear, el } from "./dom";
import type { TranscriptEntry, ViewState } from "./state";

export function renderTranscript(container: HTMLElement, transcript: TranscriptEntry[]): void {
  clear(container);
  for (const entry of transcript) {
    container.append(renderEntry(entry));
  }
  container.scrollTop = container.scrollHeight;
}

function renderEntry(entry: TranscriptEntry): HTMLElement {
  const bubble = el("div", { class: `chat-entry chat-${entry.role}` });
  const text = el("div", { class: "chat-text" }, entry.text);
  if (entry.partial) text.append(el("span", { class: "chat-partial" }, " (partial)"));
  bubble.append(text);
  if (entry.evidence && entry.evidence.length > 0) {
    bubble.append(renderEvidence(entry.evidence));
  }
  return bubble;
}

/** One collapsible block per evidence entry, shown verbatim from the API. */
function renderEvidence(evidence: TranscriptEntry["evidence"]): HTMLElement {
  const details = el("details", { class: "evidence" });
  details.append(el("summary", {}, `evidence (${evidence!.length})`));
  for (const item of evidence!) {
    const inner = el("details", { class: "evidence-item" });
    inner.append(el("summary", {}, String(item.type)));
    inner.append(el("pre", {}, JSON.stringify(item, null, 2)));
    details.append(inner);
  }
  return details;
}

export interface ChatPane {
  root: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  log: HTMLElement;
}

export function buildChatPane(): ChatPane {
  const log = el("div", { class: "chat-log" });
  const input = el("input", {
    class: "chat-input",
    type: "text",
    placeholder: "Ask about the network…",
  });
  const send = el("button", { class: "chat-send", disabled: "" }, "Send");
  const form = el("div", { class: "chat-form" });
  form.append(input, send);
  const root = el("section", { class: "pane chat-pane" });
  root.append(log, form);
  return { root, input, send, log };
}

export function wireChat(pane: ChatPane, state: ViewState, client: GatewayClient): void {
  const refreshDisabled = () => {
    pane.send.disabled = state.inFlight || pane.input.value.trim() === "";
  };
  pane.input.addEventListener("input", refreshDisabled);

  const submit = async () => {
    const message = pane.input.value.trim();
    if (!message || state.inFlight) return;
    state.inFlight = true;
    state.transcript.push({ role: "user", text: message });
    renderTranscript(pane.log, state.transcript);
    pane.input.value = "";
    refreshDisabled();
    try {
      const response = await client.chat(message, state.sessionId);
      state.sessionId = response.session_id;
      state.transcript.push({
        role: "assistant",
        text: response.answer,
        partial: response.partial,
        evidence: response.evidence,
      });
    } catch (err) {
      const notice =
        err instanceof ApiError && (err.status === 503 || err.status === 0)
          ? "backend unreachable — the question was kept but not answered"
          : `request failed: ${err instanceof Error ? err.message : String(err)}`;
      state.transcript.push({ role: "notice", text: notice });
    } finally {
      state.inFlight = false;
      renderTranscript(pane.log, state.transcript);
      refreshDisabled();
    }
  };

  pane.send.addEventListener("click", submit);
  pane.input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });
}
