/** Unit tests for the reducer on synthetic streams: protocol-violation
 * detection, message/response pairing, and session lifecycle. */

import { describe, expect, it } from "vitest";

import type { ClientMessage, StateEvent } from "../src/protocol.js";
import type { StreamItem, UiState } from "../src/state.js";
import { initialState, reduce, replay } from "../src/state.js";

const M = 2;
const FEATURES = ["[a:ent]", "[b:ent]"];

function snapshot(bits: string, extra: Partial<StateEvent> = {}): StreamItem {
  return {
    dir: "recv",
    ev: {
      type: "state",
      session: "s",
      bits,
      grounded: "[]",
      current: "[]",
      complete: false,
      status: "active",
      words: 0,
      ...extra,
    },
  };
}

const sent = (msg: ClientMessage): StreamItem => ({ dir: "sent", msg });

function fold(items: StreamItem[], base?: UiState): UiState {
  return items.reduce(reduce, base ?? initialState(M, FEATURES));
}

describe("session lifecycle", () => {
  it("starts idle with every cell off", () => {
    const state = initialState(M, FEATURES);
    expect(state.status).toBe("idle");
    expect(state.grounded).toEqual([false, false]);
    expect(state.pending).toEqual([false, false]);
    expect(state.turns).toEqual([]);
  });

  it("a start response activates a fresh session", () => {
    const state = fold([sent({ type: "start" }), snapshot("00|00")]);
    expect(state.status).toBe("active");
    expect(state.ops).toEqual([]);
  });

  it("restarting clears the previous session's transcript and bits", () => {
    const first = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "a" }),
      snapshot("10|10"),
    ]);
    expect(first.turns).toHaveLength(1);
    const second = fold([sent({ type: "start" }), snapshot("00|00")], first);
    expect(second.turns).toEqual([]);
    expect(second.grounded).toEqual([false, false]);
    expect(second.status).toBe("active");
  });
});

describe("server invariants", () => {
  it("warns when a grounded bit turns off", () => {
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "a" }),
      snapshot("10|10"),
      sent({ type: "user_word", text: "b" }),
      snapshot("01|11"),
    ]);
    expect(state.warnings).toEqual([
      "protocol violation: grounded feature 0 turned off",
    ]);
    // the malformed snapshot is still displayed — the server owns the state
    expect(state.grounded).toEqual([false, true]);
  });

  it("warns on a bits string that is not two halves of length m", () => {
    for (const bad of ["111", "10|1", "10|10|10", "1x|10", ""]) {
      const state = fold([sent({ type: "start" }), snapshot(bad)]);
      expect(state.warnings).toEqual([
        `protocol violation: bits ${JSON.stringify(bad)} is not 2x${M}`,
      ]);
    }
  });

  it("warns on a state event no client message asked for", () => {
    const state = fold([snapshot("00|00")]);
    expect(state.warnings).toEqual([
      "protocol violation: unsolicited state event",
    ]);
  });
});

describe("message/response pairing", () => {
  it("a rejected word never reaches the transcript", () => {
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "zebra" }),
      {
        dir: "recv",
        ev: {
          type: "error",
          code: "ungrammatical",
          message: "'zebra' is not a word the system knows",
        },
      },
    ]);
    expect(state.turns).toEqual([]);
    expect(state.notice).toBe('"zebra" is not a word the system knows');
    expect(state.ops).toEqual([]);
  });

  it("an accepted word clears the notice and lands in the transcript", () => {
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "zebra" }),
      { dir: "recv", ev: { type: "error", code: "ungrammatical", message: "no" } },
      sent({ type: "user_word", text: "a" }),
      snapshot("00|10"),
    ]);
    expect(state.notice).toBeNull();
    expect(state.turns).toEqual([{ speaker: "USR", words: ["a"] }]);
  });

  it("consecutive same-speaker words join one turn; a speaker change opens a new one", () => {
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "a" }),
      snapshot("00|10"),
      sent({ type: "user_word", text: "b" }),
      snapshot("00|11"),
      sent({ type: "drive" }),
      { dir: "recv", ev: { type: "system_word", text: "okay", session: "s" } },
      snapshot("11|11"),
      { dir: "recv", ev: { type: "end", success: true, session: "s" } },
    ]);
    expect(state.turns).toEqual([
      { speaker: "USR", words: ["a", "b"] },
      { speaker: "SYS", words: ["okay"] },
    ]);
    expect(state.status).toBe("success");
    expect(state.ops).toEqual([]);
  });

  it("a drive stays pending across streamed words until turn_end pops it", () => {
    const mid = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "drive" }),
      { dir: "recv", ev: { type: "system_word", text: "a", session: "s" } },
      snapshot("00|10"),
    ]);
    expect(mid.ops).toEqual([{ kind: "drive" }]);
    expect(mid.systemSpeaking).toBe(true);

    const done = fold([{ dir: "recv", ev: { type: "turn_end", session: "s" } }], mid);
    expect(done.ops).toEqual([]);
    expect(done.systemSpeaking).toBe(false);
  });

  it("a word queued during a drive resolves after the turn_end", () => {
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "drive" }),
      sent({ type: "user_word", text: "b" }), // interruption
      { dir: "recv", ev: { type: "system_word", text: "a", session: "s" } },
      snapshot("00|10"),
      { dir: "recv", ev: { type: "turn_end", session: "s" } },
      snapshot("00|11"),
    ]);
    expect(state.turns).toEqual([
      { speaker: "SYS", words: ["a"] },
      { speaker: "USR", words: ["b"] },
    ]);
    expect(state.ops).toEqual([]);
  });

  it("an end event arriving with no pending drive still marks success", () => {
    // the user's own word grounded the goal: state resolves the word,
    // then the end event follows with an empty queue
    const state = fold([
      sent({ type: "start" }),
      snapshot("00|00"),
      sent({ type: "user_word", text: "okay" }),
      snapshot("11|11"),
      { dir: "recv", ev: { type: "end", success: true, session: "s" } },
    ]);
    expect(state.status).toBe("success");
    expect(state.turns).toEqual([{ speaker: "USR", words: ["okay"] }]);
  });
});

describe("socket transitions", () => {
  it("tracks connectivity and stops the speaking indicator on disconnect", () => {
    let state = initialState(M, FEATURES);
    state = reduce(state, { dir: "socket", connected: true });
    expect(state.connected).toBe(true);
    state = reduce(state, { dir: "recv", ev: { type: "system_word", text: "a", session: "s" } });
    expect(state.systemSpeaking).toBe(true);
    state = reduce(state, { dir: "socket", connected: false });
    expect(state.connected).toBe(false);
    expect(state.systemSpeaking).toBe(false);
  });
});

describe("replay helper", () => {
  it("folds a whole log in one call", () => {
    const log: StreamItem[] = [
      { dir: "socket", connected: true },
      sent({ type: "start" }),
      snapshot("00|00"),
    ];
    const state = replay(M, FEATURES, log);
    expect(state.connected).toBe(true);
    expect(state.status).toBe("active");
  });
});
