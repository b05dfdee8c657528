/** Wire types for the session service: client messages, server events,
 * and the /health payload.  Parsing is defensive — anything that does not
 * look like a known event is returned as null so the caller can surface a
 * protocol warning instead of crashing the page. */

export type ClientMessage =
  | { type: "start" }
  | { type: "user_word"; text: string }
  | { type: "drive" }
  | { type: "release" };

export interface StateEvent {
  type: "state";
  session: string;
  bits: string;
  grounded: string;
  current: string;
  complete: boolean;
  status: string;
  words: number;
}

export interface SystemWordEvent {
  type: "system_word";
  text: string;
  session: string;
}

export interface TurnEndEvent {
  type: "turn_end";
  session: string;
}

export interface EndEvent {
  type: "end";
  success: boolean;
  session: string;
}

export interface ErrorEvent {
  type: "error";
  code: string;
  message: string;
}

export type ServerEvent =
  | StateEvent
  | SystemWordEvent
  | TurnEndEvent
  | EndEvent
  | ErrorEvent;

export interface Health {
  status: string;
  lexicon_hash: string;
  m: number;
  features: string[];
  vocabulary: string[];
}

const EVENT_TYPES = new Set(["state", "system_word", "turn_end", "end", "error"]);

export function parseServerEvent(raw: string): ServerEvent | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const type = (doc as { type?: unknown }).type;
  if (typeof type !== "string" || !EVENT_TYPES.has(type)) return null;
  return doc as ServerEvent;
}

/** "1011|1100" -> two boolean arrays, or null when the shape is wrong. */
export function splitBits(
  bits: string,
): { grounded: boolean[]; pending: boolean[] } | null {
  const halves = bits.split("|");
  if (halves.length !== 2) return null;
  const [g, p] = halves as [string, string];
  if (g.length !== p.length || g.length === 0) return null;
  if (!/^[01]+$/.test(g) || !/^[01]+$/.test(p)) return null;
  const toBools = (s: string) => Array.from(s, (c) => c === "1");
  return { grounded: toBools(g), pending: toBools(p) };
}
