/** Browser wiring: one WebSocket, one state fold, one render pass.
 *
 * Everything on screen derives from UiState, and UiState only changes via
 * reduce() over the message log — the same function the replay tests run
 * against recorded sessions.  Sending is word-granular: the input box
 * tokenizes on whitespace and ships one user_word per token, which is also
 * the interrupt affordance while the system is streaming.
 */

import type { ClientMessage, Health } from "./protocol.js";
import { parseServerEvent } from "./protocol.js";
import type { UiState } from "./state.js";
import { initialState, reduce } from "./state.js";
import { bitsText, exportTranscript, panelRows, statusLabel, turnLine } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let state: UiState = initialState(0, []);
let socket: WebSocket | null = null;

function dispatch(item: Parameters<typeof reduce>[1]): void {
  state = reduce(state, item);
  render();
}

function send(msg: ClientMessage): void {
  if (!socket || socket.readyState !== WebSocket.OPEN) return;
  socket.send(JSON.stringify(msg));
  dispatch({ dir: "sent", msg });
}

function connect(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  socket = new WebSocket(`${proto}://${location.host}/ws`);
  socket.onopen = () => {
    dispatch({ dir: "socket", connected: true });
    send({ type: "start" });
  };
  socket.onmessage = (raw: MessageEvent<string>) => {
    const ev = parseServerEvent(raw.data);
    if (ev === null) {
      state = {
        ...state,
        warnings: [...state.warnings, `unreadable server message: ${raw.data}`],
      };
      render();
      return;
    }
    dispatch({ dir: "recv", ev });
  };
  socket.onclose = () => dispatch({ dir: "socket", connected: false });
}

function speak(text: string): void {
  for (const token of text.split(/\s+/)) {
    if (token) send({ type: "user_word", text: token.toLowerCase() });
  }
}

function render(): void {
  el("status").textContent = statusLabel(state);
  el("status").className = `badge ${state.status}${state.connected ? "" : " off"}`;
  el("reconnect").hidden = state.connected;

  const rows = panelRows(state);
  const paintRow = (id: string, cells: { on: boolean; title: string }[]) => {
    const row = el(id);
    row.replaceChildren(
      ...cells.map((cell) => {
        const div = document.createElement("div");
        div.className = cell.on ? "cell on" : "cell";
        div.title = cell.title;
        return div;
      }),
    );
  };
  paintRow("row-grounded", rows.grounded);
  paintRow("row-pending", rows.pending);
  el("bits").textContent = state.m > 0 ? bitsText(state) : "";

  el("grounded-text").textContent = state.groundedText;
  el("current-text").textContent = state.currentText;

  const log = el("log");
  log.replaceChildren(
    ...state.turns.map((turn) => {
      const div = document.createElement("div");
      div.className = `turn ${turn.speaker.toLowerCase()}`;
      div.textContent = turnLine(turn);
      return div;
    }),
  );
  log.scrollTop = log.scrollHeight;

  el("notice").textContent = state.notice ?? "";
  const warnings = el("warnings");
  warnings.replaceChildren(
    ...state.warnings.map((w) => {
      const div = document.createElement("div");
      div.textContent = w;
      return div;
    }),
  );

  const input = el<HTMLInputElement>("say");
  input.placeholder = state.systemSpeaking
    ? "type to interrupt the system…"
    : "say something, word by word…";
  input.disabled = !state.connected || state.status !== "active";
  el<HTMLButtonElement>("drive").disabled =
    !state.connected || state.status !== "active";
  el<HTMLButtonElement>("release").disabled =
    !state.connected || state.status !== "active";
  el("export").hidden = state.status !== "success";
}

function buildPalette(vocabulary: string[]): void {
  const palette = el("palette");
  palette.replaceChildren(
    ...vocabulary.map((word) => {
      const btn = document.createElement("button");
      btn.textContent = word;
      btn.addEventListener("click", () => speak(word));
      return btn;
    }),
  );
}

async function start(): Promise<void> {
  const health = (await (await fetch("/health")).json()) as Health;
  state = initialState(health.m, health.features);
  buildPalette(health.vocabulary);

  el<HTMLFormElement>("say-form").addEventListener("submit", (e) => {
    e.preventDefault();
    const input = el<HTMLInputElement>("say");
    speak(input.value);
    input.value = "";
  });
  el("drive").addEventListener("click", () => send({ type: "drive" }));
  el("release").addEventListener("click", () => send({ type: "release" }));
  el("restart").addEventListener("click", () => send({ type: "start" }));
  el("reconnect").addEventListener("click", () => connect());
  el("export").addEventListener("click", () => {
    const blob = new Blob([exportTranscript(state)], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "dialogue.txt";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  render();
  connect();
}

void start();
