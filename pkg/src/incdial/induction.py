"""Inducing the goal and the state encoding from raw transcripts.

The goal proposition is whatever the training dialogues jointly establish:
the maximally specific common supertype of their final grounded semantics,
delexicalized.  Decomposing the goal yields ``m`` atomic features.  A
dialogue state is then ``2m`` bits: for each feature, whether the grounded
semantics entails it, and whether grounded plus pending semantics does.
The first half only ever gains bits (grounding is monotone); the second
half is where questions and half-finished answers show up.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .grammar import (
    DialogueContext,
    Lexicon,
    ParseFailure,
    current_semantics,
    parse_dialogue,
)
from .ttr import (
    Const,
    FeatureSet,
    RecordType,
    RecordTypeError,
    decompose,
    delexicalize,
    mcs,
    parse_rt,
    subtype_of,
)


class InductionError(ValueError):
    """Induction could not produce a usable goal from the corpus."""


class LexiconMismatch(ValueError):
    """An artifact was produced under a different lexicon than the one in use."""

    def __init__(self, expected: str, got: str):
        super().__init__(
            f"lexicon hash mismatch: artifact has {got[:12]}…, "
            f"current lexicon is {expected[:12]}…")
        self.expected = expected
        self.got = got


@dataclass(frozen=True, slots=True)
class StateVector:
    """2m bits: grounded entailments first, grounded-plus-pending second."""

    bits: tuple[int, ...]
    m: int

    def __post_init__(self) -> None:
        if len(self.bits) != 2 * self.m:
            raise ValueError(f"expected {2 * self.m} bits, got {len(self.bits)}")

    @property
    def first_half(self) -> tuple[int, ...]:
        return self.bits[: self.m]

    @property
    def second_half(self) -> tuple[int, ...]:
        return self.bits[self.m:]

    def goal_reached(self) -> bool:
        return all(self.first_half)

    def text(self) -> str:
        return ("".join(map(str, self.first_half))
                + "|"
                + "".join(map(str, self.second_half)))

    __str__ = text


@dataclass(frozen=True, slots=True, eq=False)
class GoalSpec:
    """The induced target proposition and its feature decomposition."""

    goal: RecordType
    features: FeatureSet
    m: int
    slot_sorts: tuple[str, ...]
    lexicon_hash: str


def induce(corpus: Sequence[Sequence[tuple[str, str]]],
           lexicon: Lexicon) -> GoalSpec:
    """Derive the GoalSpec from one or more training dialogues."""
    if not corpus:
        raise InductionError("empty corpus")
    finals: list[RecordType] = []
    for i, dialogue in enumerate(corpus):
        try:
            outcome = parse_dialogue(dialogue, lexicon)
        except ParseFailure as err:
            raise InductionError(f"dialogue {i}: {err}") from err
        grounded = outcome.context.grounded
        if not grounded:
            raise InductionError(f"dialogue {i} grounds nothing")
        finals.append(grounded)
    goal = delexicalize(mcs(finals))
    if not goal:
        raise InductionError("dialogues have no common grounded content")
    features = decompose(goal)
    m = len(features.features)
    if m < 2:
        warnings.warn(
            f"goal decomposes into only {m} feature(s); "
            "the state space is unlikely to support useful learning",
            RuntimeWarning, stacklevel=2)

    sorts: set[str] = set()
    for grounded in finals:
        for f in grounded.fields:
            if isinstance(f.manifest, Const):
                for entry in lexicon.slot_entries():
                    if entry.value == f.manifest.atom:
                        sorts.add(entry.sort)
    return GoalSpec(goal, features, m, tuple(sorted(sorts)), lexicon.hash)


def _union(grounded: RecordType, current: RecordType) -> RecordType:
    fields = list(grounded.fields)
    have = set(grounded.labels)
    for f in current.fields:
        if f.label not in have:
            fields.append(f)
            have.add(f.label)
    return RecordType(fields)


def encode(ctx: DialogueContext, spec: GoalSpec) -> StateVector:
    """Project a dialogue context onto the 2m-bit state vector."""
    if ctx.lexicon.hash != spec.lexicon_hash:
        raise LexiconMismatch(ctx.lexicon.hash, spec.lexicon_hash)
    grounded = delexicalize(ctx.grounded)
    pending = delexicalize(_union(ctx.grounded, current_semantics(ctx)))
    bits = tuple(int(subtype_of(grounded, phi)) for phi in spec.features.features)
    bits += tuple(int(subtype_of(pending, phi)) for phi in spec.features.features)
    return StateVector(bits, spec.m)


# --------------------------------------------------------------------------
# Serialization


def goalspec_to_json(spec: GoalSpec) -> dict:
    return {
        "goal": spec.goal.text(),
        "features": [phi.text() for phi in spec.features.features],
        "m": spec.m,
        "slot_sorts": list(spec.slot_sorts),
        "lexicon_hash": spec.lexicon_hash,
    }


def goalspec_from_json(doc: dict) -> GoalSpec:
    try:
        goal = parse_rt(doc["goal"])
        features = FeatureSet(parse_rt(t) for t in doc["features"])
        m = int(doc["m"])
        slot_sorts = tuple(doc["slot_sorts"])
        lexicon_hash = str(doc["lexicon_hash"])
    except (KeyError, TypeError, RecordTypeError) as err:
        raise InductionError(f"bad goal specification document: {err}") from err
    if m != len(features.features):
        raise InductionError(
            f"m={m} but {len(features.features)} features are listed")
    for i, phi in enumerate(features.features):
        if not subtype_of(goal, phi):
            raise InductionError(f"feature {i} is not entailed by the goal")
    return GoalSpec(goal, features, m, slot_sorts, lexicon_hash)


def save_goalspec(spec: GoalSpec, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(goalspec_to_json(spec), indent=2, sort_keys=True) + "\n")


def load_goalspec(path: str | Path) -> GoalSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise InductionError(f"{path}: not valid JSON: {err}") from err
    return goalspec_from_json(doc)
