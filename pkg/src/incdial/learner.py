"""Tabular Q-learning over the word-level dialogue MDP.

The MDP falls out of the other modules: states are the 2m-bit encodings,
actions are the lexicon's words plus a turn-release signal, and the
transition function is the grammar plus the simulated user.  Rewards are
sparse and three-valued — −1 for ungrammatical, lengthy, or out-of-context
behaviour (each of which ends the episode), +1 for reaching the goal, 0
otherwise — so an episode carries at most one nonzero reward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from random import Random
from typing import Callable, Optional

from .grammar import (
    DialogueContext,
    Lexicon,
    SYS,
    USR,
    UngrammaticalWord,
    advance,
    current_semantics,
    proposition_complete,
)
from .induction import (
    GoalSpec,
    LexiconMismatch,
    StateVector,
    encode,
    goalspec_from_json,
    goalspec_to_json,
)
from .simulator import RuleSet, SimulatorRule, SlotInventory, match, realize

RELEASE = "<release>"

Action = str  # a vocabulary word, or RELEASE


class LearnerError(ValueError):
    """Bad configuration or a malformed policy document."""


class SimulatorBreach(RuntimeError):
    """The simulator produced a word the grammar rejected (rule-set bug)."""


def action_space(lexicon: Lexicon) -> tuple[Action, ...]:
    return tuple(lexicon.vocabulary) + (RELEASE,)


@dataclass(frozen=True, slots=True)
class EnvConfig:
    max_words_per_system_turn: int = 12
    max_dialogue_words: int = 40
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_words_per_system_turn < 1 or self.max_dialogue_words < 1:
            raise LearnerError("word caps must be positive")


@dataclass(frozen=True, slots=True)
class TrainConfig:
    episodes: int = 20000
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_fraction: float = 0.8
    seed: int = 7

    def __post_init__(self) -> None:
        if self.episodes < 0:
            raise LearnerError("episodes must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise LearnerError("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise LearnerError("gamma must be in [0, 1)")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise LearnerError(f"{name} must be in [0, 1]")
        if not 0 < self.epsilon_fraction <= 1:
            raise LearnerError("epsilon_fraction must be in (0, 1]")

    def epsilon(self, episode: int) -> float:
        """Linear decay from start to end over the first fraction, then flat."""
        horizon = int(self.episodes * self.epsilon_fraction)
        if horizon <= 0 or episode >= horizon:
            return self.epsilon_end
        t = episode / horizon
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t


class WordEnv:
    """One dialogue episode at a time; the policy speaks word by word.

    ``step`` applies, in order: the word advances the context (a rejected
    word ends the episode at −1); word-count caps are checked; if the new
    context matches a simulator rule the simulated user answers in full and
    the turn counter resets; reaching the goal yields +1.  A RELEASE action
    instead offers the turn: on a truly empty context an initiative rule may
    fire, on an incomplete proposition — or a complete one the user has no
    answer for — the dialogue has gone out of context and ends at −1.
    """

    def __init__(self, lexicon: Lexicon, spec: GoalSpec, rules: RuleSet,
                 config: EnvConfig = EnvConfig()):
        if spec.lexicon_hash != lexicon.hash:
            raise LexiconMismatch(lexicon.hash, spec.lexicon_hash)
        if rules.lexicon_hash != lexicon.hash:
            raise LexiconMismatch(lexicon.hash, rules.lexicon_hash)
        self.lexicon = lexicon
        self.spec = spec
        self.rules = rules
        self.config = config
        self.actions = action_space(lexicon)
        self._inventory = SlotInventory.from_lexicon(lexicon)
        self._rng = Random(config.seed)
        # safety net against reward-free loops (e.g. repeated no-op
        # releases); unreachable in ordinary episodes
        self._step_cap = 4 * config.max_dialogue_words
        self._ctx: Optional[DialogueContext] = None
        self._done = True
        self._turn_words = 0
        self._total_words = 0
        self._steps = 0

    @property
    def context(self) -> DialogueContext:
        if self._ctx is None:
            raise RuntimeError("environment not reset")
        return self._ctx

    def reset(self) -> StateVector:
        self._ctx = DialogueContext.new(self.lexicon)
        self._done = False
        self._turn_words = 0
        self._total_words = 0
        self._steps = 0
        return encode(self._ctx, self.spec)

    def _obs(self) -> StateVector:
        return encode(self._ctx, self.spec)

    def _finish(self, reward: int, event: str):
        self._done = True
        return self._obs(), reward, True, {"event": event}

    def _user_turn(self, rule: SimulatorRule) -> list[str]:
        words = realize(rule, self._inventory, self._rng)
        for w in words:
            try:
                self._ctx = advance(self._ctx, w, USR)
            except UngrammaticalWord as err:
                raise SimulatorBreach(
                    f"simulator word {w!r} rejected by the grammar "
                    f"(rule trigger {rule.trigger.text()})") from err
            self._total_words += 1
        self._turn_words = 0
        return words

    def step(self, action: Action):
        """-> (StateVector, reward, done, info)."""
        if self._done or self._ctx is None:
            raise RuntimeError("step on a finished episode; call reset first")
        self._steps += 1
        if self._steps > self._step_cap:
            return self._finish(-1, "stalled")
        info: dict = {}

        if action != RELEASE:
            try:
                self._ctx = advance(self._ctx, action, SYS)
            except UngrammaticalWord:
                return self._finish(-1, "ungrammatical")
            self._turn_words += 1
            self._total_words += 1
            if (self._turn_words > self.config.max_words_per_system_turn
                    or self._total_words > self.config.max_dialogue_words):
                return self._finish(-1, "lengthy")
            rule = match(self.rules, self._ctx)
            if rule is not None:
                info["user_words"] = self._user_turn(rule)
            if self._obs().goal_reached():
                return self._finish(1, "goal")
        else:
            if not current_semantics(self._ctx):
                rule = match(self.rules, self._ctx, turn_released=True)
                if rule is not None:
                    info["user_words"] = self._user_turn(rule)
                    if self._obs().goal_reached():
                        return self._finish(1, "goal")
                else:
                    return self._finish(-1, "out_of_context")
            elif not proposition_complete(self._ctx):
                return self._finish(-1, "out_of_context")
            elif match(self.rules, self._ctx) is None:
                return self._finish(-1, "out_of_context")
            # complete proposition the user still has an answer for:
            # releasing is a harmless no-op

        return self._obs(), 0, False, info


# --------------------------------------------------------------------------
# Learning


QTable = dict[str, dict[Action, float]]


def q_update(q: QTable, s: str, a: Action, r: float, s_next: str,
             done: bool, alpha: float, gamma: float) -> QTable:
    """One Bellman backup on the sparse table; absent entries read as 0."""
    row = q.setdefault(s, {})
    old = row.get(a, 0.0)
    future = 0.0
    if not done:
        future = max(q.get(s_next, {}).values(), default=0.0)
    row[a] = old + alpha * (r + gamma * future - old)
    return q


def _greedy_from(q: QTable, actions: tuple[Action, ...], s: str) -> Action:
    row = q.get(s)
    best = actions[0]
    best_v = row.get(best, 0.0) if row else 0.0
    if row:
        for a in actions[1:]:
            v = row.get(a, 0.0)
            if v > best_v:
                best, best_v = a, v
    return best


@dataclass(eq=False)
class Policy:
    q: QTable
    actions: tuple[Action, ...]
    lexicon_hash: str
    spec: GoalSpec
    env_config: EnvConfig
    train_config: TrainConfig

    def greedy(self, state: str) -> Action:
        """Highest-valued action; unseen entries are 0; ties go to the
        lowest action index."""
        return _greedy_from(self.q, self.actions, state)

    def value(self, state: str) -> float:
        row = self.q.get(state)
        if not row:
            return 0.0
        return max(max(row.values()), 0.0) if len(row) < len(self.actions) \
            else max(row.values())


@dataclass(frozen=True, slots=True)
class EpisodeRecord:
    episode: int
    reward: int
    length: int
    outcome: str


def train(lexicon: Lexicon, spec: GoalSpec, rules: RuleSet,
          train_config: TrainConfig = TrainConfig(),
          env_config: EnvConfig = EnvConfig(),
          log_sink: Optional[Callable[[EpisodeRecord], None]] = None) -> Policy:
    """Epsilon-greedy tabular Q-learning; deterministic under the seeds."""
    env = WordEnv(lexicon, spec, rules, env_config)
    actions = env.actions
    q: QTable = {}
    explore = Random(train_config.seed)
    for episode in range(train_config.episodes):
        eps = train_config.epsilon(episode)
        s = env.reset().text()
        done = False
        reward = 0
        outcome = "none"
        while not done:
            if explore.random() < eps:
                a = actions[explore.randrange(len(actions))]
            else:
                a = _greedy_from(q, actions, s)
            s_next_vec, r, done, info = env.step(a)
            s_next = s_next_vec.text()
            q_update(q, s, a, r, s_next, done,
                     train_config.alpha, train_config.gamma)
            s = s_next
            if done:
                reward = r
                outcome = info["event"]
        if log_sink is not None:
            log_sink(EpisodeRecord(episode, reward,
                                   len(env.context.transcript), outcome))
    return Policy(q, actions, lexicon.hash, spec, env_config, train_config)


@dataclass(frozen=True, slots=True)
class EvalStats:
    episodes: int
    success_rate: Optional[float]
    mean_length: Optional[float]
    distinct_dialogue_shapes: int

    def as_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_length": self.mean_length,
            "distinct_dialogue_shapes": self.distinct_dialogue_shapes,
        }


def shape_of(transcript) -> str:
    return " ".join(f"{speaker}:{word}" for speaker, word in transcript)


def evaluate(policy: Policy, rules: RuleSet, n_episodes: int, seed: int,
             *, lexicon: Lexicon,
             env_config: Optional[EnvConfig] = None) -> EvalStats:
    """Greedy rollouts; success = reaching the goal.  Dialogue shapes are
    exact transcripts; the count covers successful episodes."""
    if n_episodes <= 0:
        return EvalStats(0, None, None, 0)
    cfg = replace(env_config or policy.env_config, seed=seed)
    env = WordEnv(lexicon, policy.spec, rules, cfg)
    successes = 0
    lengths = []
    shapes: set[str] = set()
    for _ in range(n_episodes):
        s = env.reset().text()
        done = False
        while not done:
            s_vec, r, done, _ = env.step(policy.greedy(s))
            s = s_vec.text()
        lengths.append(len(env.context.transcript))
        if r == 1:
            successes += 1
            shapes.add(shape_of(env.context.transcript))
    return EvalStats(n_episodes, successes / n_episodes,
                     sum(lengths) / len(lengths), len(shapes))


# --------------------------------------------------------------------------
# Serialization


def policy_to_json(policy: Policy) -> dict:
    return {
        "lexicon_hash": policy.lexicon_hash,
        "goalspec": goalspec_to_json(policy.spec),
        "config": {
            "env": {
                "max_words_per_system_turn":
                    policy.env_config.max_words_per_system_turn,
                "max_dialogue_words": policy.env_config.max_dialogue_words,
                "seed": policy.env_config.seed,
            },
            "train": {
                "episodes": policy.train_config.episodes,
                "alpha": policy.train_config.alpha,
                "gamma": policy.train_config.gamma,
                "epsilon_start": policy.train_config.epsilon_start,
                "epsilon_end": policy.train_config.epsilon_end,
                "epsilon_fraction": policy.train_config.epsilon_fraction,
                "seed": policy.train_config.seed,
            },
        },
        "actions": list(policy.actions),
        "q": {s: dict(sorted(row.items())) for s, row in
              sorted(policy.q.items())},
    }


def policy_from_json(doc: dict) -> Policy:
    try:
        spec = goalspec_from_json(doc["goalspec"])
        env_cfg = EnvConfig(**doc["config"]["env"])
        train_cfg = TrainConfig(**doc["config"]["train"])
        actions = tuple(doc["actions"])
        q = {s: {a: float(v) for a, v in row.items()}
             for s, row in doc["q"].items()}
        lexicon_hash = str(doc["lexicon_hash"])
    except (KeyError, TypeError, ValueError) as err:
        raise LearnerError(f"bad policy document: {err}") from err
    if lexicon_hash != spec.lexicon_hash:
        raise LearnerError("policy and embedded goal spec disagree on lexicon")
    return Policy(q, actions, lexicon_hash, spec, env_cfg, train_cfg)


def save_policy(policy: Policy, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(policy_to_json(policy), indent=2, sort_keys=True) + "\n")


def load_policy(path: str | Path) -> Policy:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise LearnerError(f"{path}: not valid JSON: {err}") from err
    return policy_from_json(doc)


def write_training_log(records, path: str | Path) -> None:
    lines = ["episode,reward,length,outcome"]
    lines += [f"{r.episode},{r.reward},{r.length},{r.outcome}"
              for r in records]
    Path(path).write_text("\n".join(lines) + "\n")
