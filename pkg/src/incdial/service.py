"""WebSocket session service around the trained word-level policy.

One socket holds at most one live dialogue session.  Incoming messages are
pumped into a per-connection queue by a reader task and handled strictly in
arrival order, so client actions can never interleave mid-word.  A message
arriving while the system is streaming words out interrupts the turn: the
remaining words are discarded and the queued message is handled next.

Client messages (JSON objects):
    {"type": "start"}                  open a fresh session
    {"type": "user_word", "text": w}   speak one word as the user
    {"type": "drive"} / {"type": "release"}   let the system speak

Server events:
    {"type": "state", "session", "bits", "grounded", "current", "complete",
     "status", "words"}                after start and after every word
    {"type": "system_word", "text", "session"}   one driven word
    {"type": "turn_end", "session"}    the system yielded without reaching
                                       the goal (policy released, went
                                       silent, or was interrupted)
    {"type": "end", "success", "session"}        goal proposition grounded
                                       (whichever side spoke the word)
    {"type": "error", "code", "message"}         codes: protocol,
                                                 ungrammatical, mid_utterance

Every accepted word — user or system — advances the session context through
the same incremental grammar the learner trained against, so replaying the
emitted transcript from scratch reconstructs the session state exactly.
"""

from __future__ import annotations

import asyncio
import json
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .agent import drive
from .grammar import (
    DialogueContext,
    Lexicon,
    UngrammaticalWord,
    USR,
    advance,
    current_semantics,
    grounded_semantics,
    proposition_complete,
    tokenize,
)
from .induction import LexiconMismatch, encode
from .learner import Policy
from .simulator import RuleSet

__all__ = ["Session", "create_app"]


@dataclass
class Session:
    id: str
    ctx: DialogueContext
    status: str = "active"  # active | success


def create_app(policy: Policy, lexicon: Lexicon, *,
               rules: Optional[RuleSet] = None,
               delay: float = 0.3,
               static_dir: Optional[str] = None) -> FastAPI:
    """Build the app.  ``delay`` is the pause after each streamed system
    word — the window in which a client message can interrupt the turn."""
    if policy.lexicon_hash != lexicon.hash:
        raise LexiconMismatch(lexicon.hash, policy.lexicon_hash)
    if rules is not None and rules.lexicon_hash != lexicon.hash:
        raise LexiconMismatch(lexicon.hash, rules.lexicon_hash)
    spec = policy.spec
    app = FastAPI(title="incdial service")

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "lexicon_hash": lexicon.hash,
            "m": spec.m,
            "features": [phi.text() for phi in spec.features.features],
            "vocabulary": list(lexicon.vocabulary),
        }

    def state_event(session: Session) -> dict:
        return {
            "type": "state",
            "session": session.id,
            "bits": encode(session.ctx, spec).text(),
            "grounded": grounded_semantics(session.ctx).text(),
            "current": current_semantics(session.ctx).text(),
            "complete": proposition_complete(session.ctx),
            "status": session.status,
            "words": len(session.ctx.transcript),
        }

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        await socket.accept()
        queue: asyncio.Queue = asyncio.Queue()

        async def reader():
            while True:
                try:
                    raw = await socket.receive_text()
                except (WebSocketDisconnect, RuntimeError):
                    await queue.put(None)
                    return
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("not an object")
                except ValueError:
                    msg = {"type": "__invalid__"}
                await queue.put(msg)

        reader_task = asyncio.create_task(reader())
        session: Optional[Session] = None

        async def error(code: str, message: str) -> None:
            await socket.send_json(
                {"type": "error", "code": code, "message": message})

        try:
            while True:
                msg = await queue.get()
                if msg is None:
                    break
                mtype = msg.get("type")

                if mtype == "start":
                    session = Session(uuid.uuid4().hex,
                                      DialogueContext.new(lexicon))
                    await socket.send_json(state_event(session))
                    continue
                if mtype == "__invalid__":
                    await error("protocol",
                                "messages are JSON objects with a type field")
                    continue
                if session is None:
                    await error("protocol", "no session; send start first")
                    continue
                if session.status != "active":
                    await error("protocol",
                                "session is over; send start for a new one")
                    continue

                if mtype == "user_word":
                    tokens = tokenize(str(msg.get("text") or ""))
                    if len(tokens) != 1:
                        await error("protocol",
                                    "user_word carries exactly one word")
                        continue
                    try:
                        session.ctx = advance(session.ctx, tokens[0], USR)
                    except UngrammaticalWord:
                        await error(
                            "ungrammatical",
                            f"{tokens[0]!r} is not a word the system knows")
                        continue
                    await socket.send_json(state_event(session))
                    # the user's own word can ground the goal (an explicit
                    # acknowledgement, say) — report the end either way
                    if encode(session.ctx, spec).goal_reached():
                        session.status = "success"
                        await socket.send_json({"type": "end",
                                                "success": True,
                                                "session": session.id})
                elif mtype in ("drive", "release"):
                    cur = current_semantics(session.ctx)
                    if cur.fields and not proposition_complete(session.ctx):
                        await error(
                            "mid_utterance",
                            "the current utterance is incomplete; finish it "
                            "before releasing the turn")
                        continue
                    for word, new_ctx in drive(policy, session.ctx):
                        session.ctx = new_ctx
                        await socket.send_json({"type": "system_word",
                                                "text": word,
                                                "session": session.id})
                        await socket.send_json(state_event(session))
                        if delay > 0:
                            await asyncio.sleep(delay)
                        if not queue.empty():
                            break  # interruption: drop the rest of the turn
                    if encode(session.ctx, spec).goal_reached():
                        session.status = "success"
                        await socket.send_json({"type": "end",
                                                "success": True,
                                                "session": session.id})
                    else:
                        await socket.send_json({"type": "turn_end",
                                                "session": session.id})
                else:
                    await error("protocol",
                                f"unknown message type {mtype!r}")
        finally:
            reader_task.cancel()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app
