"""User simulator extracted from the same transcripts the grammar parses.

Each rule pairs a *trigger* — the delexicalized pending semantics right
before a user utterance began — with the utterance shapes users produced
there, slot words abstracted to their sorts.  At runtime the simulator
answers whenever the current context is equivalent to a trigger.  A rule
with an empty trigger is the user taking initiative; it only fires when
the system has released the turn onto an empty context, never merely
because nothing has been said yet.

Because every template is made of lexicon words (slots filled from the
lexicon's own slot entries), anything the simulator says parses: the
simulator cannot break the grammar it was extracted from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Optional, Sequence

from .grammar import (
    Lexicon,
    ParseFailure,
    current_semantics,
    DialogueContext,
    parse_dialogue,
    tokenize,
)
from .induction import GoalSpec, LexiconMismatch
from .ttr import (
    BasicSort,
    Const,
    MetaVar,
    RecordType,
    RecordTypeError,
    delexicalize,
    equivalent,
    parse_rt,
)


class SimulatorError(ValueError):
    """Rule extraction or rule-set validation failed."""


class RealizationError(ValueError):
    """A template cannot be filled from the slot inventory."""


def placeholder(sort: str) -> str:
    return f"⟨{sort}⟩"


def placeholder_sort(token: str) -> Optional[str]:
    if token.startswith("⟨") and token.endswith("⟩"):
        return token[1:-1]
    return None


@dataclass(frozen=True, slots=True)
class UtteranceTemplate:
    """An utterance with slot words abstracted, e.g. ``by ⟨brand⟩``."""

    tokens: tuple[str, ...]

    def text(self) -> str:
        return " ".join(self.tokens)

    def slots(self) -> tuple[str, ...]:
        return tuple(s for s in map(placeholder_sort, self.tokens) if s)


@dataclass(frozen=True, slots=True, eq=False)
class SimulatorRule:
    """Trigger shape, what users said there, and which labels were still
    unresolved when they said it.

    ``open_labels`` is what keeps the simulator honest: a context can
    delexicalize to the trigger shape even after its question has been
    answered (the shape of a question and of its answer coincide), and
    answering again would contradict established content.  The rule only
    fires while every open label is still without a constant.
    """

    trigger: RecordType
    templates: tuple[UtteranceTemplate, ...]
    open_labels: tuple[str, ...] = ()

    @property
    def is_initiative(self) -> bool:
        return not self.trigger


@dataclass(frozen=True, slots=True)
class SlotInventory:
    """Slot words per sort, in lexicon order."""

    by_sort: dict[str, tuple[str, ...]]

    @classmethod
    def from_lexicon(cls, lexicon: Lexicon) -> "SlotInventory":
        by_sort: dict[str, tuple[str, ...]] = {}
        for entry in lexicon.slot_entries():
            words = by_sort.get(entry.sort, ())
            if entry.word not in words:
                by_sort[entry.sort] = words + (entry.word,)
        return cls(by_sort)

    def words(self, sort: str) -> tuple[str, ...]:
        words = self.by_sort.get(sort, ())
        if not words:
            raise RealizationError(f"no slot words of sort {sort!r}")
        return words


@dataclass(frozen=True, slots=True, eq=False)
class RuleSet:
    rules: tuple[SimulatorRule, ...]
    lexicon_hash: str


def _abstract(tokens: Sequence[str], lexicon: Lexicon) -> UtteranceTemplate:
    out = []
    for tok in tokens:
        sort = lexicon.slot_sort_of(tok)
        out.append(placeholder(sort) if sort else tok)
    return UtteranceTemplate(tuple(out))


def _validate_template(where: str, template: UtteranceTemplate,
                       lexicon: Lexicon, spec: GoalSpec) -> None:
    if not template.tokens:
        raise SimulatorError(f"{where}: empty utterance template")
    for tok in template.tokens:
        sort = placeholder_sort(tok)
        if sort is not None:
            if sort not in spec.slot_sorts:
                raise SimulatorError(
                    f"{where}: slot sort {sort!r} is not a goal slot sort "
                    f"{spec.slot_sorts}")
        elif tok not in lexicon.by_word:
            raise SimulatorError(f"{where}: token {tok!r} is not in the lexicon")


def _merge_rule(acc: list[tuple[RecordType, list[UtteranceTemplate], set[str]]],
                trigger: RecordType,
                templates: Sequence[UtteranceTemplate],
                open_labels: set[str]) -> None:
    for t, existing, opened in acc:
        if (not t and not trigger) or (t and trigger and equivalent(t, trigger)):
            existing.extend(tp for tp in templates if tp not in existing)
            opened.update(open_labels)
            return
    acc.append((trigger, list(templates), set(open_labels)))


def extract_rules(corpus: Sequence[Sequence[tuple[str, str]]],
                  lexicon: Lexicon,
                  spec: GoalSpec,
                  augmentation: Optional[str | Path | Sequence[dict]] = None
                  ) -> RuleSet:
    """Harvest (trigger, templates) rules from user utterances in the corpus,
    then fold in hand-written augmentation rules in the same format."""
    if spec.lexicon_hash != lexicon.hash:
        raise LexiconMismatch(lexicon.hash, spec.lexicon_hash)
    acc: list[tuple[RecordType, list[UtteranceTemplate], set[str]]] = []
    for i, dialogue in enumerate(corpus):
        try:
            outcome = parse_dialogue(dialogue, lexicon)
        except ParseFailure as err:
            raise SimulatorError(f"dialogue {i}: {err}") from err
        for onset in outcome.onsets:
            if onset.speaker != "USR" or not onset.tokens:
                continue
            pending = current_semantics(onset.context)
            open_labels = {f.label for f in pending.fields
                           if isinstance(f.manifest, MetaVar)}
            template = _abstract(onset.tokens, lexicon)
            _validate_template(f"dialogue {i}, turn {onset.turn}",
                               template, lexicon, spec)
            _merge_rule(acc, delexicalize(pending), [template], open_labels)

    for j, doc in enumerate(_load_augmentation(augmentation)):
        where = f"augmentation rule {j}"
        try:
            trigger = parse_rt(doc["trigger"])
        except (KeyError, TypeError, RecordTypeError) as err:
            raise SimulatorError(f"{where}: bad trigger: {err}") from err
        if any(f.manifest is not None for f in trigger.fields):
            raise SimulatorError(f"{where}: trigger must be delexicalized")
        raw = doc.get("templates")
        if not isinstance(raw, list) or not raw:
            raise SimulatorError(f"{where}: templates must be a nonempty list")
        templates = [UtteranceTemplate(tuple(t.split())) for t in raw]
        for t in templates:
            _validate_template(where, t, lexicon, spec)
        open_labels = set(doc.get("open", ()))
        bad = open_labels - {f.label for f in trigger.fields
                             if f.manifest is None and not _is_pred(f)}
        if bad:
            raise SimulatorError(
                f"{where}: open labels {sorted(bad)} are not basic trigger fields")
        _merge_rule(acc, trigger, templates, open_labels)

    rules = tuple(SimulatorRule(t, tuple(tps), tuple(sorted(opened)))
                  for t, tps, opened in acc)
    if not rules:
        raise SimulatorError("no rules could be extracted")
    return RuleSet(rules, lexicon.hash)


def _is_pred(f) -> bool:
    return not isinstance(f.ty, BasicSort)


def _load_augmentation(source) -> list[dict]:
    if source is None:
        return []
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
        try:
            docs = json.loads(text)
        except json.JSONDecodeError as err:
            raise SimulatorError(f"augmentation is not valid JSON: {err}") from err
    else:
        docs = list(source)
    if not isinstance(docs, list):
        raise SimulatorError("augmentation must be a list of rules")
    return docs


def match(rules: RuleSet, ctx: DialogueContext,
          turn_released: bool = False) -> Optional[SimulatorRule]:
    """The rule the simulated user would answer with right now, if any.

    Non-initiative rules match by equivalence of the delexicalized current
    semantics.  An initiative rule was recorded at a true dialogue start,
    so it fires only when the whole context is still empty — grounded
    content included — and only after an explicit turn release; firing it
    over established content would have the user contradict themselves.
    """
    if rules.lexicon_hash != ctx.lexicon.hash:
        raise LexiconMismatch(ctx.lexicon.hash, rules.lexicon_hash)
    pending = current_semantics(ctx)
    cur = delexicalize(pending)
    for rule in rules.rules:
        if rule.is_initiative:
            if turn_released and not cur and not ctx.grounded:
                return rule
        elif cur and equivalent(cur, rule.trigger) and all(
                not isinstance(pending.get(lbl).manifest, Const)
                for lbl in rule.open_labels):
            return rule
    return None


def realize(rule: SimulatorRule, inventory: SlotInventory,
            rng: Random) -> list[str]:
    """Pick a template uniformly, fill each slot uniformly; returns words."""
    template = rule.templates[rng.randrange(len(rule.templates))]
    words = []
    for tok in template.tokens:
        sort = placeholder_sort(tok)
        if sort is None:
            words.append(tok)
        else:
            choices = inventory.words(sort)
            words.append(choices[rng.randrange(len(choices))])
    return words


# --------------------------------------------------------------------------
# Serialization


def ruleset_to_json(rules: RuleSet) -> dict:
    return {
        "lexicon_hash": rules.lexicon_hash,
        "rules": [
            {"trigger": r.trigger.text(),
             "open": list(r.open_labels),
             "templates": [t.text() for t in r.templates]}
            for r in rules.rules
        ],
    }


def ruleset_from_json(doc: dict) -> RuleSet:
    try:
        rules = tuple(
            SimulatorRule(parse_rt(r["trigger"]),
                          tuple(UtteranceTemplate(tuple(t.split()))
                                for t in r["templates"]),
                          tuple(r.get("open", ())))
            for r in doc["rules"])
        lexicon_hash = str(doc["lexicon_hash"])
    except (KeyError, TypeError, RecordTypeError) as err:
        raise SimulatorError(f"bad rule-set document: {err}") from err
    if not rules:
        raise SimulatorError("rule-set document has no rules")
    return RuleSet(rules, lexicon_hash)


def save_ruleset(rules: RuleSet, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(ruleset_to_json(rules), indent=2, sort_keys=True) + "\n")


def load_ruleset(path: str | Path) -> RuleSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise SimulatorError(f"{path}: not valid JSON: {err}") from err
    return ruleset_from_json(doc)
