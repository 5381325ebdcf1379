/**
 * Client view state: a mirror of server responses plus pure UI flags.
 * The chat transcript mirrors the server session turn-for-turn in arrival
 * order; nothing is reordered or recomputed client-side.
 */

import type { EvidenceEntry, Incident } from "./api";

export interface TranscriptEntry {
  role: "user" | "assistant" | "notice";
  text: string;
  partial?: boolean;
  evidence?: EvidenceEntry[];
}

export interface ViewState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  selectedInterface: string | null;
  incidents: Incident[];
  pollMs: number;
  sortByAnomalies: boolean;
  inFlight: boolean;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    transcript: [],
    selectedInterface: null,
    incidents: [],
    pollMs: 10_000,
    sortByAnomalies: false,
    inFlight: false,
  };
}
