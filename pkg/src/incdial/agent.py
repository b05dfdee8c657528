"""Greedy word-by-word generation from a trained policy.

Shared by the terminal chat and the session service so both produce the
same context evolution for the same word sequences.  The policy drives one
word at a time and stops — yielding the turn — when it reaches the goal,
when the greedy action is the release signal, when it has no informed
preference in the current state (unvisited or valueless Q row), or when a
word would make no semantic progress.  The "no informed preference" stop is
what makes a freshly asked question end the system's turn: the state right
after a question was always answered by the simulated user within the same
environment step, so it never appears as a Q-table state of its own.
"""

from __future__ import annotations

from typing import Iterator

from .grammar import DialogueContext, SYS, UngrammaticalWord, advance
from .induction import encode
from .learner import Policy, RELEASE


def drive(policy: Policy, ctx: DialogueContext
          ) -> Iterator[tuple[str, DialogueContext]]:
    """Yield (word, context-after) pairs for one greedy system turn."""
    for _ in range(policy.env_config.max_words_per_system_turn):
        state = encode(ctx, policy.spec)
        if state.goal_reached():
            return
        row = policy.q.get(state.text())
        if not row or max(row.values()) <= 0:
            return
        action = policy.greedy(state.text())
        if action == RELEASE:
            return
        try:
            nxt = advance(ctx, action, SYS)
        except UngrammaticalWord:  # pragma: no cover - greedy words parse
            return
        if nxt.live == ctx.live and nxt.grounded == ctx.grounded:
            return
        ctx = nxt
        yield action, ctx
