/** Pure projections from UiState to renderable data.  main.ts turns these
 * into DOM; the tests assert on them directly, so everything the page
 * displays is covered without a browser. */

import type { UiState, Turn } from "./state.js";

export interface Cell {
  on: boolean;
  /** canonical record-type text of the feature this cell tracks */
  title: string;
}

export interface PanelRows {
  grounded: Cell[];
  pending: Cell[];
}

export function panelRows(state: UiState): PanelRows {
  const cells = (bits: boolean[]): Cell[] =>
    bits.map((on, i) => ({ on, title: state.features[i] ?? `feature ${i}` }));
  return { grounded: cells(state.grounded), pending: cells(state.pending) };
}

/** The state vector exactly as the service prints it — the replay tests
 * compare this against the server's own bits strings. */
export function bitsText(state: UiState): string {
  const half = (bits: boolean[]) => bits.map((b) => (b ? "1" : "0")).join("");
  return `${half(state.grounded)}|${half(state.pending)}`;
}

export function turnLine(turn: Turn): string {
  return `${turn.speaker}: ${turn.words.join(" ")}`;
}

export function exportTranscript(state: UiState): string {
  return state.turns.map(turnLine).join("\n") + "\n";
}

export function statusLabel(state: UiState): string {
  if (!state.connected) return "disconnected";
  if (state.status === "success") return "success";
  if (state.status === "idle") return "no session";
  return state.systemSpeaking ? "system speaking" : "your turn";
}
