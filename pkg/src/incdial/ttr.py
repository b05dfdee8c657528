"""Record type algebra.

Everything semantic in this package is a record type: an ordered list of
labeled, typed fields.  A field is either a basic-sorted entity (``x:ent``,
``e:ev``), optionally carrying a manifest value, or a predicate over
previously declared labels (``p:brand(x)``).  Manifest values are either
constants (``x:ent=apple``) or metavariables (``x:ent=?q1``) standing for
the unknown content of a question.

The algebra provides:

* ``subtype_of`` -- containment of fields with compatible manifests; the
  partial order every downstream check (state encoding, rule matching)
  is built on.  Matching is by exact label: the parser emits one canonical
  labeling, which keeps the check linear instead of searching over
  relabelings.
* ``mcs`` -- the most informative record type that all inputs are subtypes
  of; used to fuse the final contexts of many dialogues into one goal.
* ``delexicalize`` -- strip manifests, abstracting slot values (and open
  question variables) out of a context.
* ``decompose`` -- split a delexicalized record type into its atomic
  features: one per predicate (with the fields its arguments need), plus
  one per entity no predicate touches.

A canonical text syntax ``[x:ent=apple, p:brand(x)]`` is used in all data
files, logs and wire messages; ``parse_rt`` / ``RecordType.text`` round-trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")


class RecordTypeError(ValueError):
    """Raised for malformed record types or invalid algebra arguments."""


def _check_ident(name: str, what: str) -> str:
    if not _IDENT.match(name or ""):
        raise RecordTypeError(f"{what} must be a nonempty lowercase identifier, got {name!r}")
    return name


@dataclass(frozen=True, slots=True)
class BasicSort:
    """A primitive sort such as ``ent`` (entity) or ``ev`` (event)."""

    name: str

    def __post_init__(self) -> None:
        _check_ident(self.name, "sort name")

    def text(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class PredType:
    """A predicate applied to labels declared earlier in the record type."""

    predicate: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        _check_ident(self.predicate, "predicate name")
        for a in self.args:
            _check_ident(a, "predicate argument label")

    def text(self) -> str:
        return f"{self.predicate}({','.join(self.args)})"


FieldType = BasicSort | PredType


@dataclass(frozen=True, slots=True)
class Const:
    """A manifest constant value, e.g. the slot value ``apple``."""

    atom: str

    def __post_init__(self) -> None:
        _check_ident(self.atom, "constant")

    def text(self) -> str:
        return self.atom


@dataclass(frozen=True, slots=True)
class MetaVar:
    """An underspecified manifest value: the content a question asks for."""

    id: str

    def __post_init__(self) -> None:
        _check_ident(self.id, "metavariable id")

    def text(self) -> str:
        return f"?{self.id}"


Value = Const | MetaVar


@dataclass(frozen=True, slots=True)
class Field:
    label: str
    ty: FieldType
    manifest: Optional[Value] = None

    def __post_init__(self) -> None:
        _check_ident(self.label, "field label")
        if self.manifest is not None and not isinstance(self.ty, BasicSort):
            raise RecordTypeError(f"manifest value on predicate field {self.label!r}")

    def delexicalized(self) -> "Field":
        return self if self.manifest is None else Field(self.label, self.ty)

    def text(self) -> str:
        base = f"{self.label}:{self.ty.text()}"
        if self.manifest is not None:
            return f"{base}={self.manifest.text()}"
        return base


class RecordType:
    """An ordered dependent record of typed fields.

    Instances are immutable; all operations return new values.  The empty
    record type ``[]`` is the top element of the subtype order.
    """

    __slots__ = ("fields", "_by_label")

    def __init__(self, fields: Iterable[Field] = ()):
        fields = tuple(fields)
        by_label: dict[str, Field] = {}
        metavar_ids: set[str] = set()
        for f in fields:
            if f.label in by_label:
                raise RecordTypeError(f"duplicate label {f.label!r}")
            if isinstance(f.ty, PredType):
                for a in f.ty.args:
                    if a not in by_label:
                        raise RecordTypeError(
                            f"field {f.label!r} references {a!r} before its declaration"
                        )
            if isinstance(f.manifest, MetaVar):
                if f.manifest.id in metavar_ids:
                    raise RecordTypeError(f"metavariable ?{f.manifest.id} used twice")
                metavar_ids.add(f.manifest.id)
            by_label[f.label] = f
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "_by_label", by_label)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("RecordType is immutable")

    def __iter__(self) -> Iterator[Field]:
        return iter(self.fields)

    def __len__(self) -> int:
        return len(self.fields)

    def __bool__(self) -> bool:
        return bool(self.fields)

    def __eq__(self, other) -> bool:
        return isinstance(other, RecordType) and self.fields == other.fields

    def __hash__(self) -> int:
        return hash(self.fields)

    def __repr__(self) -> str:
        return f"RecordType({self.text()!r})"

    def get(self, label: str) -> Optional[Field]:
        return self._by_label.get(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.fields)

    def has_metavars(self) -> bool:
        return any(isinstance(f.manifest, MetaVar) for f in self.fields)

    def metavar_count(self) -> int:
        return sum(1 for f in self.fields if isinstance(f.manifest, MetaVar))

    def restrict(self, labels: Iterable[str]) -> "RecordType":
        """Sub-record of the given labels, closed under argument references.

        Closing keeps the result well-formed: a predicate field drags in the
        fields its arguments point at, in this record's original order.
        """
        wanted = set(labels)
        changed = True
        while changed:
            changed = False
            for f in self.fields:
                if f.label in wanted and isinstance(f.ty, PredType):
                    for a in f.ty.args:
                        if a not in wanted:
                            wanted.add(a)
                            changed = True
        return RecordType(f for f in self.fields if f.label in wanted)

    def extend(self, field: Field) -> "RecordType":
        return RecordType(self.fields + (field,))

    def replace(self, field: Field) -> "RecordType":
        return RecordType(field if f.label == field.label else f for f in self.fields)

    def text(self) -> str:
        return "[" + ", ".join(f.text() for f in self.fields) + "]"


EMPTY = RecordType()


def well_formed(r: RecordType | Iterable[Field]) -> bool:
    """Total predicate: does ``r`` satisfy every record type invariant?

    The ``RecordType`` constructor already rejects violations, so anything
    that exists is well-formed; raw field sequences can be checked too,
    which keeps the invariants independently testable.
    """
    fields = r.fields if isinstance(r, RecordType) else tuple(r)
    try:
        RecordType(fields)
    except RecordTypeError:
        return False
    return True


def _field_matches(candidate: Field, required: Field) -> bool:
    """Does ``candidate`` satisfy ``required`` in a subtype check?

    Labels and field types must be identical.  A required constant must be
    matched exactly; a required bare field or metavariable accepts any
    manifest status (a question is satisfied by its answer).
    """
    if candidate.label != required.label or candidate.ty != required.ty:
        return False
    if isinstance(required.manifest, Const):
        return candidate.manifest == required.manifest
    return True


def subtype_of(r1: RecordType, r2: RecordType) -> bool:
    """True iff ``r1`` is at least as specific as ``r2``.

    Every field of ``r2`` must appear in ``r1`` with the same label and
    type, and with a compatible manifest.  Every record type is a subtype
    of the empty record type.
    """
    for req in r2.fields:
        cand = r1.get(req.label)
        if cand is None or not _field_matches(cand, req):
            return False
    return True


def equivalent(r1: RecordType, r2: RecordType) -> bool:
    """Mutual subtypes: same field multiset, order ignored."""
    return subtype_of(r1, r2) and subtype_of(r2, r1)


def mcs(rs: Sequence[RecordType]) -> RecordType:
    """Maximally specific common supertype.

    Keeps a field iff every input declares it with an identical type; keeps
    its constant iff all inputs agree on the constant.  Predicates whose
    argument fields did not survive are dropped (repeatedly) so the result
    stays well-formed.
    """
    if not rs:
        raise RecordTypeError("mcs of an empty list")
    first, rest = rs[0], rs[1:]
    kept: dict[str, Field] = {}
    for f in first.fields:
        others = [r.get(f.label) for r in rest]
        if any(o is None or o.ty != f.ty for o in others):
            continue
        manifests = [f.manifest] + [o.manifest for o in others]  # type: ignore[union-attr]
        if all(isinstance(m, Const) and m == manifests[0] for m in manifests):
            kept[f.label] = f
        else:
            kept[f.label] = f.delexicalized()
    # closure repair: a surviving predicate needs all of its arguments
    changed = True
    while changed:
        changed = False
        for label, f in list(kept.items()):
            if isinstance(f.ty, PredType) and any(a not in kept for a in f.ty.args):
                del kept[label]
                changed = True
    return RecordType(kept[f.label] for f in first.fields if f.label in kept)


def delexicalize(r: RecordType) -> RecordType:
    """Strip every manifest value, constants and metavariables alike.

    Structure, labels and types are untouched.  A question and its answer
    delexicalize to the same record type, which is what lets rule matching
    treat them as the same context.
    """
    return RecordType(f.delexicalized() for f in r.fields)


class FeatureSet:
    """Ordered set of atomic features; position is the feature's bit index."""

    __slots__ = ("features",)

    def __init__(self, features: Iterable[RecordType]):
        features = tuple(features)
        for i, phi in enumerate(features):
            if any(isinstance(f.manifest, Const) for f in phi.fields):
                raise RecordTypeError(f"feature {i} carries a constant: {phi.text()}")
            if not equivalent(phi.restrict(phi.labels), phi):
                raise RecordTypeError(f"feature {i} is not dependency-closed")
            for j in range(i):
                if equivalent(features[j], phi):
                    raise RecordTypeError(f"features {j} and {i} are equivalent")
        object.__setattr__(self, "features", features)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("FeatureSet is immutable")

    def __iter__(self) -> Iterator[RecordType]:
        return iter(self.features)

    def __len__(self) -> int:
        return len(self.features)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSet) and self.features == other.features

    def __repr__(self) -> str:
        return f"FeatureSet({[phi.text() for phi in self.features]})"


def decompose(r: RecordType) -> FeatureSet:
    """Split a delexicalized record type into atomic features.

    One feature per predicate field: the predicate together with the fields
    its arguments (transitively) depend on.  Entities referenced by no
    predicate become singleton features.  Duplicates (by equivalence) are
    removed, first occurrence wins.
    """
    if any(f.manifest is not None for f in r.fields):
        raise RecordTypeError("decompose expects a delexicalized record type")
    referenced: set[str] = set()
    for f in r.fields:
        if isinstance(f.ty, PredType):
            referenced.update(f.ty.args)
    features: list[RecordType] = []
    for f in r.fields:
        if isinstance(f.ty, PredType):
            phi = r.restrict([f.label])
        elif f.label not in referenced:
            phi = RecordType([f])
        else:
            continue
        if not any(equivalent(phi, seen) for seen in features):
            features.append(phi)
    return FeatureSet(features)


# ---------------------------------------------------------------------------
# canonical text syntax


_FIELD_RE = re.compile(
    r"""
    (?P<label>[a-z$][a-z0-9_]*)
    \s*:\s*
    (?P<ty>[a-z][a-z0-9_]*)
    (?:\( (?P<args>[^)]*) \))?
    (?:\s*=\s* (?P<value>\??[a-z$][a-z0-9_]*))?
    \Z
    """,
    re.VERBOSE,
)


def _pred_type(name: str, args: tuple[str, ...], allow_vars: bool) -> PredType:
    if not allow_vars:
        return PredType(name, args)
    # $-prefixed argument labels bypass the identifier check; the pattern
    # layer in the grammar module owns their interpretation
    _check_ident(name, "predicate name")
    for a in args:
        _check_ident(a.lstrip("$"), "predicate argument label")
    pt = object.__new__(PredType)
    object.__setattr__(pt, "predicate", name)
    object.__setattr__(pt, "args", args)
    return pt


def _make_field(label: str, ty: FieldType, manifest: Optional[Value], allow_vars: bool) -> Field:
    if not allow_vars:
        return Field(label, ty, manifest)
    _check_ident(label.lstrip("$"), "field label")
    if manifest is not None and not isinstance(ty, BasicSort):
        raise RecordTypeError(f"manifest value on predicate field {label!r}")
    f = object.__new__(Field)
    object.__setattr__(f, "label", label)
    object.__setattr__(f, "ty", ty)
    object.__setattr__(f, "manifest", manifest)
    return f


def _parse_field(part: str, allow_vars: bool) -> Field:
    m = _FIELD_RE.match(part.strip())
    if not m:
        raise RecordTypeError(f"cannot parse field {part!r}")
    label = m.group("label")
    if label.startswith("$") and not allow_vars:
        raise RecordTypeError(f"pattern variable {label!r} not allowed here")
    ty: FieldType
    if m.group("args") is not None:
        if m.group("value") is not None:
            raise RecordTypeError(f"manifest on predicate field in {part!r}")
        args = tuple(a.strip() for a in m.group("args").split(",") if a.strip())
        ty = _pred_type(m.group("ty"), args, allow_vars)
    else:
        ty = BasicSort(m.group("ty"))
    manifest: Optional[Value] = None
    v = m.group("value")
    if v is not None:
        manifest = MetaVar(v[1:]) if v.startswith("?") else Const(v)
    return _make_field(label, ty, manifest, allow_vars)


def _split_fields(body: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur and "".join(cur).strip():
        parts.append("".join(cur))
    return [p for p in parts if p.strip()]


def parse_rt(text: str) -> RecordType:
    """Parse the canonical ``[label:sort=value, label:pred(a,b)]`` syntax."""
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise RecordTypeError(f"record type must be bracketed, got {text!r}")
    body = text[1:-1].strip()
    if not body:
        return EMPTY
    return RecordType(_parse_field(p, allow_vars=False) for p in _split_fields(body))


def parse_pattern_fields(text: str) -> tuple[Field, ...]:
    """Like ``parse_rt`` but permits ``$``-prefixed labels and args.

    Returns raw fields; the pattern layer in the grammar module owns their
    interpretation, so no dependency or duplicate checks are applied here.
    """
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise RecordTypeError(f"pattern must be bracketed, got {text!r}")
    body = text[1:-1].strip()
    if not body:
        return ()
    return tuple(_parse_field(p, allow_vars=True) for p in _split_fields(body))
