"""Word-by-word incremental parsing over a declarative lexicon.

Both speakers extend one shared dialogue context.  Each lexical entry is a
little update rule: a precondition pattern checked against the semantics
built so far, fields to merge in, and requirement patterns that must be
satisfied before the proposition counts as complete.  Grammaticality of a
word is the existence of at least one successor state; completeness is an
empty requirement set.  Content is *grounded* (mutually accepted) either
implicitly — a speaker change over a complete proposition — or explicitly,
on acknowledgment words and at dialogue end.

The shared context is what makes split utterances work: one speaker can
start a proposition and the other can finish it, because the second
speaker's words apply to the same parse states.
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .ttr import (
    BasicSort,
    Const,
    EMPTY,
    Field,
    MetaVar,
    PredType,
    RecordType,
    RecordTypeError,
    _make_field,
    _pred_type,
    parse_pattern_fields,
    well_formed,
)

SYS = "SYS"
USR = "USR"
SPEAKERS = (SYS, USR)

ENTRY_KINDS = ("content", "wh", "ack", "slot")
DEFAULT_BEAM_WIDTH = 32

GROUND_TRIGGERS = ("explicit_ack", "implicit_speaker_change", "dialogue_end")

# A pattern is a tuple of fields whose labels (and predicate arguments) may
# be ``$``-prefixed variables; matching binds variables to concrete labels.
Pattern = tuple[Field, ...]


class LexiconError(ValueError):
    """A lexicon document violates the entry schema or an entry invariant."""


class CorpusError(ValueError):
    """A transcript file is not in the ``SPEAKER: utterance`` line format."""


class UngrammaticalWord(ValueError):
    """No lexical entry of the word yields a successor state."""

    def __init__(self, word: str):
        super().__init__(f"ungrammatical word {word!r}")
        self.word = word


class ParseFailure(ValueError):
    """A transcript word failed to parse; pinpoints where."""

    def __init__(self, turn: int, word: str, dialogue: Optional[int] = None):
        where = f"turn {turn}, word {word!r}"
        if dialogue is not None:
            where = f"dialogue {dialogue}, " + where
        super().__init__(f"parse failure at {where}")
        self.dialogue = dialogue
        self.turn = turn
        self.word = word


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, strip edge punctuation (``...by?`` → ``by``)."""
    out = []
    for raw in text.split():
        tok = raw.strip(string.punctuation).lower()
        if tok:
            out.append(tok)
    return out


# --------------------------------------------------------------------------
# Lexicon


@dataclass(frozen=True, slots=True)
class LexicalEntry:
    word: str
    kind: str
    pre: Pattern
    add: tuple[Field, ...]
    require: tuple[Pattern, ...]
    sort: Optional[str] = None
    value: Optional[str] = None

    def canonical(self) -> dict:
        return {
            "word": self.word,
            "kind": self.kind,
            "sort": self.sort,
            "value": self.value,
            "pre": _pattern_text(self.pre),
            "add": _pattern_text(self.add),
            "require": [_pattern_text(r) for r in self.require],
        }


def _pattern_text(fields: Iterable[Field]) -> str:
    return "[" + ", ".join(f.text() for f in fields) + "]"


def _pattern_vars(fields: Iterable[Field]) -> set[str]:
    out = set()
    for f in fields:
        if f.label.startswith("$"):
            out.add(f.label)
        if isinstance(f.ty, PredType):
            out.update(a for a in f.ty.args if a.startswith("$"))
    return out


class Lexicon:
    """Validated entry list with a content hash over the canonical form."""

    __slots__ = ("entries", "by_word", "hash", "vocabulary")

    def __init__(self, entries: Sequence[LexicalEntry]):
        if not entries:
            raise LexiconError("lexicon has no entries")
        by_word: dict[str, tuple[LexicalEntry, ...]] = {}
        for e in entries:
            by_word[e.word] = by_word.get(e.word, ()) + (e,)
        canonical = json.dumps([e.canonical() for e in entries],
                               sort_keys=True, separators=(",", ":"))
        object.__setattr__(self, "entries", tuple(entries))
        object.__setattr__(self, "by_word", by_word)
        object.__setattr__(self, "hash",
                           hashlib.sha256(canonical.encode()).hexdigest())
        object.__setattr__(self, "vocabulary", tuple(sorted(by_word)))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Lexicon is immutable")

    def slot_entries(self, sort: Optional[str] = None) -> tuple[LexicalEntry, ...]:
        return tuple(e for e in self.entries
                     if e.kind == "slot" and (sort is None or e.sort == sort))

    def slot_sort_of(self, word: str) -> Optional[str]:
        for e in self.by_word.get(word, ()):
            if e.kind == "slot":
                return e.sort
        return None


def _load_entry(i: int, doc: dict) -> LexicalEntry:
    def bad(rule: str) -> LexiconError:
        return LexiconError(f"entry {i}: {rule}")

    if not isinstance(doc, dict):
        raise bad("entry must be an object")
    unknown = set(doc) - {"word", "kind", "sort", "value", "pre", "add", "require"}
    if unknown:
        raise bad(f"unknown keys {sorted(unknown)}")
    word = doc.get("word")
    if not isinstance(word, str) or not word or word != word.lower() or " " in word:
        raise bad("word must be a nonempty lowercase token")
    kind = doc.get("kind")
    if kind not in ENTRY_KINDS:
        raise bad(f"kind must be one of {ENTRY_KINDS}")
    try:
        pre = parse_pattern_fields(doc.get("pre", "[]"))
        add = parse_pattern_fields(doc.get("add", "[]"))
        require = tuple(parse_pattern_fields(r) for r in doc.get("require", []))
    except RecordTypeError as err:
        raise bad(f"bad pattern syntax ({err})") from err

    loose = _pattern_vars(add) - _pattern_vars(pre)
    if loose:
        raise bad(f"add uses variables {sorted(loose)} not bound by pre")
    consts = [f for f in add if isinstance(f.manifest, Const)]
    metavars = [f for f in add if isinstance(f.manifest, MetaVar)]
    if kind == "slot":
        if not doc.get("sort") or not doc.get("value"):
            raise bad("slot entry needs sort and value")
        if len(consts) != 1 or consts[0].manifest.atom != doc["value"]:
            raise bad("slot entry must add exactly one Const equal to its value")
    else:
        if doc.get("sort") or doc.get("value"):
            raise bad("sort/value are for slot entries only")
        if consts:
            raise bad("only slot entries may add Const values")
    if kind == "wh" and len(metavars) != 1:
        raise bad("wh entry must introduce exactly one MetaVar")
    if kind == "ack" and (add or require):
        raise bad("ack entry must have empty add and require")
    return LexicalEntry(word, kind, pre, add, require,
                        doc.get("sort"), doc.get("value"))


def load_lexicon(source: str | Path | Sequence[dict]) -> Lexicon:
    """Build a Lexicon from a JSON document (path, JSON text, or parsed list)."""
    if isinstance(source, (str, Path)):
        if isinstance(source, str) and source.lstrip().startswith("["):
            text = source
        else:
            text = Path(source).read_text()
        try:
            docs = json.loads(text)
        except json.JSONDecodeError as err:
            raise LexiconError(f"lexicon is not valid JSON: {err}") from err
    else:
        docs = list(source)
    if not isinstance(docs, list) or not docs:
        raise LexiconError("lexicon must be a nonempty list of entries")
    return Lexicon([_load_entry(i, d) for i, d in enumerate(docs)])


# --------------------------------------------------------------------------
# Pattern matching


def _match_one(pf: Field, sf: Field, binding: dict[str, str]) -> Optional[dict[str, str]]:
    if pf.label.startswith("$"):
        bound = binding.get(pf.label)
        if bound is not None and bound != sf.label:
            return None
        binding = {**binding, pf.label: sf.label}
    elif pf.label != sf.label:
        return None

    if isinstance(pf.ty, BasicSort):
        if pf.ty != sf.ty:
            return None
    else:
        if (not isinstance(sf.ty, PredType)
                or pf.ty.predicate != sf.ty.predicate
                or len(pf.ty.args) != len(sf.ty.args)):
            return None
        for pa, sa in zip(pf.ty.args, sf.ty.args):
            if pa.startswith("$"):
                bound = binding.get(pa)
                if bound is None:
                    binding = {**binding, pa: sa}
                elif bound != sa:
                    return None
            elif pa != sa:
                return None

    if isinstance(pf.manifest, Const):
        if sf.manifest != pf.manifest:
            return None
    elif isinstance(pf.manifest, MetaVar):
        if not isinstance(sf.manifest, MetaVar):
            return None
    return binding


def unify(pattern: Sequence[Field], sem: RecordType) -> Optional[dict[str, str]]:
    """First variable binding (deterministic order) making every pattern
    field match some field of ``sem``; None if there is none."""

    def solve(i: int, binding: dict[str, str]) -> Optional[dict[str, str]]:
        if i == len(pattern):
            return binding
        for sf in sem.fields:
            b2 = _match_one(pattern[i], sf, binding)
            if b2 is not None:
                result = solve(i + 1, b2)
                if result is not None:
                    return result
        return None

    return solve(0, {})


def satisfies(sem: RecordType, pattern: Sequence[Field]) -> bool:
    return unify(pattern, sem) is not None


def _substitute(fields: Sequence[Field], binding: dict[str, str]) -> tuple[Field, ...]:
    out = []
    for f in fields:
        label = binding.get(f.label, f.label)
        ty = f.ty
        if isinstance(ty, PredType):
            args = tuple(binding.get(a, a) for a in ty.args)
            if args != ty.args:
                ty = _pred_type(ty.predicate, args, allow_vars=True)
        if label != f.label or ty is not f.ty:
            f = _make_field(label, ty, f.manifest, allow_vars=True)
        out.append(f)
    return tuple(out)


# --------------------------------------------------------------------------
# Parse states and the dialogue context


@dataclass(frozen=True, slots=True)
class ParseState:
    """One live analysis: semantics, pending requirements, bookkeeping.

    ``counter`` freshens MetaVar ids along this state's lineage; ``serial``
    is the context-wide creation index used as the deterministic tie-break.
    """

    sem: RecordType
    reqs: tuple[Pattern, ...]
    counter: int
    serial: int

    def order_key(self) -> tuple[int, int, int]:
        return (len(self.reqs), self.sem.metavar_count(), self.serial)


def _merge_field(sem: RecordType, f: Field) -> Optional[RecordType]:
    """Merge one concrete field into ``sem``; None on conflict.

    Same label must have the same type.  A Const resolves a MetaVar or
    fills a bare field but never overwrites a different Const; a MetaVar
    only fills a bare field (a known value is never un-resolved).
    """
    existing = sem.get(f.label)
    if existing is None:
        return sem.extend(f)
    if existing.ty != f.ty:
        return None
    if f.manifest is None:
        return sem
    if isinstance(f.manifest, Const):
        if isinstance(existing.manifest, Const):
            return sem if existing.manifest == f.manifest else None
        return sem.replace(Field(f.label, f.ty, f.manifest))
    if existing.manifest is None:
        return sem.replace(Field(f.label, f.ty, f.manifest))
    return sem


def _apply_entry(state: ParseState, entry: LexicalEntry,
                 serial: int) -> Optional[ParseState]:
    binding = unify(entry.pre, state.sem)
    if binding is None:
        return None
    sem = state.sem
    counter = state.counter
    for tmpl in _substitute(entry.add, binding):
        if tmpl.label.startswith("$"):
            return None
        if isinstance(tmpl.ty, PredType) and any(
                a.startswith("$") for a in tmpl.ty.args):
            return None
        if isinstance(tmpl.manifest, MetaVar):
            counter += 1
            tmpl = Field(tmpl.label, tmpl.ty, MetaVar(f"q{counter}"))
        merged = _merge_field(sem, tmpl)
        if merged is None:
            return None
        sem = merged
    if not well_formed(sem):
        return None
    reqs = list(state.reqs)
    for r in (_substitute(r, binding) for r in entry.require):
        if r not in reqs:
            reqs.append(r)
    live_reqs = tuple(r for r in reqs if not satisfies(sem, r))
    return ParseState(sem, live_reqs, counter, serial)


@dataclass(frozen=True, slots=True)
class DialogueContext:
    """Shared incremental state of one dialogue (a value; never mutated)."""

    lexicon: Lexicon
    grounded: RecordType
    live: tuple[ParseState, ...]
    last_speaker: Optional[str]
    transcript: tuple[tuple[str, str], ...]
    serial: int
    beam_width: int

    @classmethod
    def new(cls, lexicon: Lexicon,
            beam_width: int = DEFAULT_BEAM_WIDTH) -> "DialogueContext":
        root = ParseState(EMPTY, (), 0, 0)
        return cls(lexicon, EMPTY, (root,), None, (), 1, beam_width)

    @property
    def best(self) -> ParseState:
        return min(self.live, key=ParseState.order_key)


def grounded_semantics(ctx: DialogueContext) -> RecordType:
    return ctx.grounded


def current_semantics(ctx: DialogueContext) -> RecordType:
    """Best state's semantics minus grounded fields, closed over references
    (closure keeps the result well-formed when new content points at
    grounded entities)."""
    best = ctx.best
    grounded = set(ctx.grounded.labels)
    keep = [f.label for f in best.sem.fields if f.label not in grounded]
    if not keep:
        return EMPTY
    return best.sem.restrict(keep)


def proposition_complete(ctx: DialogueContext) -> bool:
    best = ctx.best
    return not best.reqs and bool(best.sem)


def _promotable(sem: RecordType) -> RecordType:
    """Largest MetaVar-free, reference-closed sub-record of ``sem``."""
    kept = {f.label for f in sem.fields if not isinstance(f.manifest, MetaVar)}
    changed = True
    while changed:
        changed = False
        for f in sem.fields:
            if f.label in kept and isinstance(f.ty, PredType):
                if any(a not in kept for a in f.ty.args):
                    kept.discard(f.label)
                    changed = True
    return RecordType(f for f in sem.fields if f.label in kept)


def _rebase(state: ParseState, grounded: RecordType,
            serial: int) -> Optional[ParseState]:
    sem = state.sem
    for f in grounded.fields:
        merged = _merge_field(sem, f)
        if merged is None:
            return None
        sem = merged
    if sem == state.sem:
        return state
    reqs = tuple(r for r in state.reqs if not satisfies(sem, r))
    return ParseState(sem, reqs, state.counter, serial)


def ground(ctx: DialogueContext, trigger: str) -> DialogueContext:
    """Promote the best state's settled content into the grounded record.

    Only MetaVar-free, reference-closed fields move; already-grounded
    fields are never altered, so grounding is monotone.  The implicit
    trigger additionally demands a complete proposition.
    """
    if trigger not in GROUND_TRIGGERS:
        raise ValueError(f"unknown ground trigger {trigger!r}")
    if trigger == "implicit_speaker_change" and not proposition_complete(ctx):
        return ctx
    promoted = _promotable(ctx.best.sem)
    grounded = ctx.grounded
    for f in promoted.fields:
        if grounded.get(f.label) is None:
            grounded = grounded.extend(f)
    if grounded == ctx.grounded:
        return ctx
    serial = ctx.serial
    live = []
    for st in ctx.live:
        rb = _rebase(st, grounded, serial)
        if rb is not None:
            if rb is not st:
                serial += 1
            live.append(rb)
    if not live:
        live = [ParseState(grounded, (), ctx.best.counter, serial)]
        serial += 1
    return replace(ctx, grounded=grounded, live=tuple(live), serial=serial)


def advance(ctx: DialogueContext, word: str, speaker: str) -> DialogueContext:
    """Extend the context by one word; raises UngrammaticalWord if no
    lexical entry of the word applies to any live state."""
    if speaker not in SPEAKERS:
        raise ValueError(f"unknown speaker {speaker!r}")
    c = ctx
    if c.last_speaker is not None and speaker != c.last_speaker:
        c = ground(c, "implicit_speaker_change")
    entries = c.lexicon.by_word.get(word)
    if not entries:
        raise UngrammaticalWord(word)
    serial = c.serial
    successors: list[ParseState] = []
    seen: set[tuple[RecordType, tuple[Pattern, ...]]] = set()
    applied_ack = False
    for st in c.live:
        for entry in entries:
            nxt = _apply_entry(st, entry, serial)
            if nxt is None:
                continue
            key = (nxt.sem, nxt.reqs)
            if key in seen:
                continue
            seen.add(key)
            successors.append(nxt)
            serial += 1
            if entry.kind == "ack":
                applied_ack = True
    if not successors:
        raise UngrammaticalWord(word)
    successors.sort(key=ParseState.order_key)
    del successors[c.beam_width:]
    c = replace(c, live=tuple(successors), last_speaker=speaker,
                transcript=c.transcript + ((speaker, word),), serial=serial)
    if applied_ack:
        c = ground(c, "explicit_ack")
    return c


# --------------------------------------------------------------------------
# Whole-transcript replay


@dataclass(frozen=True, slots=True)
class UtteranceOnset:
    """Context snapshot taken right before an utterance's first word."""

    turn: int
    speaker: str
    context: DialogueContext
    tokens: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class ParseOutcome:
    context: DialogueContext
    onsets: tuple[UtteranceOnset, ...]


def parse_dialogue(transcript: Sequence[tuple[str, str]],
                   lexicon: Lexicon,
                   beam_width: int = DEFAULT_BEAM_WIDTH) -> ParseOutcome:
    """Replay a ``(speaker, utterance)`` transcript word-by-word.

    Grounds at speaker changes (implicitly) and at dialogue end; records
    the context at every utterance onset — user-utterance onsets are what
    simulator rule extraction consumes.
    """
    ctx = DialogueContext.new(lexicon, beam_width)
    onsets: list[UtteranceOnset] = []
    for turn, (speaker, utterance) in enumerate(transcript):
        if speaker not in SPEAKERS:
            raise ValueError(f"unknown speaker {speaker!r} at turn {turn}")
        tokens = tokenize(utterance)
        onsets.append(UtteranceOnset(turn, speaker, ctx, tuple(tokens)))
        for word in tokens:
            try:
                ctx = advance(ctx, word, speaker)
            except UngrammaticalWord as err:
                raise ParseFailure(turn, err.word) from err
    ctx = ground(ctx, "dialogue_end")
    return ParseOutcome(ctx, tuple(onsets))


def transcript_to_turns(
        transcript: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    """Group a (speaker, word) stream into (speaker, utterance) turns."""
    turns: list[tuple[str, str]] = []
    for speaker, word in transcript:
        if turns and turns[-1][0] == speaker:
            turns[-1] = (speaker, turns[-1][1] + " " + word)
        else:
            turns.append((speaker, word))
    return turns


def load_corpus(source: str | Path) -> list[list[tuple[str, str]]]:
    """Read dialogues from the line format ``SYS: ...`` / ``USR: ...``,
    blank line between dialogues."""
    text = Path(source).read_text() if isinstance(source, Path) else source
    dialogues: list[list[tuple[str, str]]] = []
    current: list[tuple[str, str]] = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            if current:
                dialogues.append(current)
                current = []
            continue
        speaker, sep, utterance = line.partition(":")
        if not sep or speaker.strip() not in SPEAKERS:
            raise CorpusError(f"line {n}: expected 'SYS: ...' or 'USR: ...'")
        current.append((speaker.strip(), utterance.strip()))
    if current:
        dialogues.append(current)
    return dialogues
