/** UI state as a pure fold over the session's message log.
 *
 * The log carries both directions: messages the client sent and events the
 * server answered with.  The server handles client messages strictly in
 * order and answers each with a known event pattern, so pairing sent
 * messages with their responses is deterministic:
 *
 *   start      -> one state event
 *   user_word  -> one state event (accepted; a following end event is
 *                 possible when the word grounds the goal) or one error
 *   drive      -> (system_word state)* then end | turn_end | error
 *
 * No dialogue logic lives here: every bit, word, and status shown comes
 * straight from the log.  The reducer only checks the server's own
 * invariants (bit-vector length, grounded bits never turning off) and
 * surfaces violations as warnings.
 */

import type { ClientMessage, ServerEvent, StateEvent } from "./protocol.js";
import { splitBits } from "./protocol.js";

export type StreamItem =
  | { dir: "sent"; msg: ClientMessage }
  | { dir: "recv"; ev: ServerEvent }
  | { dir: "socket"; connected: boolean };

type PendingOp =
  | { kind: "start" }
  | { kind: "word"; text: string }
  | { kind: "drive" };

export interface Turn {
  speaker: "USR" | "SYS";
  words: string[];
}

export interface UiState {
  connected: boolean;
  status: "idle" | "active" | "success";
  m: number;
  features: string[];
  turns: Turn[];
  grounded: boolean[];
  pending: boolean[];
  groundedText: string;
  currentText: string;
  complete: boolean;
  systemSpeaking: boolean;
  /** transient, per-exchange messages (rejected word, refused drive) */
  notice: string | null;
  /** sticky protocol-violation reports */
  warnings: string[];
  /** sent messages not yet resolved by a server response */
  ops: PendingOp[];
}

export function initialState(m: number, features: string[]): UiState {
  return {
    connected: false,
    status: "idle",
    m,
    features,
    turns: [],
    grounded: new Array(m).fill(false),
    pending: new Array(m).fill(false),
    groundedText: "[]",
    currentText: "[]",
    complete: false,
    systemSpeaking: false,
    notice: null,
    warnings: [],
    ops: [],
  };
}

function withWord(turns: Turn[], speaker: "USR" | "SYS", word: string): Turn[] {
  const last = turns[turns.length - 1];
  if (last && last.speaker === speaker) {
    const grown = { speaker, words: [...last.words, word] };
    return [...turns.slice(0, -1), grown];
  }
  return [...turns, { speaker, words: [word] }];
}

/** Fold one state event into the UI, checking the server's invariants. */
function applySnapshot(state: UiState, ev: StateEvent, fresh: boolean): UiState {
  const next = { ...state };
  const parsed = splitBits(ev.bits);
  if (parsed === null || parsed.grounded.length !== state.m) {
    next.warnings = [
      ...state.warnings,
      `protocol violation: bits ${JSON.stringify(ev.bits)} is not 2x${state.m}`,
    ];
  } else {
    if (!fresh) {
      parsed.grounded.forEach((on, i) => {
        if (state.grounded[i] && !on) {
          next.warnings = [
            ...next.warnings,
            `protocol violation: grounded feature ${i} turned off`,
          ];
        }
      });
    }
    next.grounded = parsed.grounded;
    next.pending = parsed.pending;
  }
  next.groundedText = ev.grounded;
  next.currentText = ev.current;
  next.complete = ev.complete;
  return next;
}

export function reduce(state: UiState, item: StreamItem): UiState {
  if (item.dir === "socket") {
    return { ...state, connected: item.connected, systemSpeaking: false };
  }

  if (item.dir === "sent") {
    const msg = item.msg;
    const op: PendingOp =
      msg.type === "start"
        ? { kind: "start" }
        : msg.type === "user_word"
          ? { kind: "word", text: msg.text }
          : { kind: "drive" };
    return { ...state, ops: [...state.ops, op] };
  }

  const ev = item.ev;
  const head = state.ops[0];
  const rest = state.ops.slice(1);

  switch (ev.type) {
    case "state": {
      if (head?.kind === "start") {
        const freshBase = initialState(state.m, state.features);
        const freshState = {
          ...freshBase,
          connected: state.connected,
          status: "active" as const,
          ops: rest,
        };
        return applySnapshot(freshState, ev, true);
      }
      if (head?.kind === "word") {
        const next = applySnapshot(state, ev, false);
        return {
          ...next,
          turns: withWord(state.turns, "USR", head.text),
          notice: null,
          ops: rest,
        };
      }
      if (head?.kind === "drive") {
        // snapshot for the system word that just streamed; drive stays open
        return applySnapshot(state, ev, false);
      }
      return {
        ...applySnapshot(state, ev, false),
        warnings: [...state.warnings, "protocol violation: unsolicited state event"],
      };
    }

    case "system_word": {
      return {
        ...state,
        turns: withWord(state.turns, "SYS", ev.text),
        systemSpeaking: true,
        notice: null,
      };
    }

    case "turn_end": {
      return {
        ...state,
        systemSpeaking: false,
        ops: head?.kind === "drive" ? rest : state.ops,
      };
    }

    case "end": {
      return {
        ...state,
        status: ev.success ? "success" : state.status,
        systemSpeaking: false,
        ops: head?.kind === "drive" ? rest : state.ops,
      };
    }

    case "error": {
      const notice =
        ev.code === "ungrammatical" && head?.kind === "word"
          ? `"${head.text}" is not a word the system knows`
          : ev.message;
      return {
        ...state,
        notice,
        systemSpeaking: false,
        ops: head ? rest : state.ops,
      };
    }
  }
}

export function replay(m: number, features: string[], log: StreamItem[]): UiState {
  return log.reduce(reduce, initialState(m, features));
}
