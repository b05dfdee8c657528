"""User-simulator rule extraction, context matching, and realization."""

from __future__ import annotations

import itertools
from random import Random

import pytest

from incdial.grammar import (
    DialogueContext,
    SYS,
    USR,
    advance,
    current_semantics,
    parse_dialogue,
    tokenize,
)
from incdial.simulator import (
    RuleSet,
    SimulatorError,
    SlotInventory,
    UtteranceTemplate,
    extract_rules,
    match,
    placeholder_sort,
    realize,
    ruleset_from_json,
    ruleset_to_json,
)
from incdial.ttr import Const, delexicalize, equivalent

QUESTION_TRIGGER = ("[x:ent, e:ev, p_pres:present(e), s:ent, p_usr:usr(s), "
                    "p_like:like(e), p_subj:subj(e,s), p_obj:obj(e,x)]")
BRAND_TRIGGER = "[x:ent, b:ent, p_by:by(x,b), p_brand:brand(b)]"


def _ctx_after(lexicon, script):
    """Replay (speaker, utterance) pairs and return the context."""
    ctx = DialogueContext.new(lexicon)
    for spk, utt in script:
        for tok in tokenize(utt):
            ctx = advance(ctx, tok, spk)
    return ctx


# --------------------------------------------------------------------------
# Extraction


def test_corpus_extraction_yields_both_question_rules(corpus_rules):
    assert len(corpus_rules.rules) == 2
    first, second = corpus_rules.rules
    assert first.trigger.text() == QUESTION_TRIGGER
    assert first.open_labels == ("x",)
    assert [t.text() for t in first.templates] == ["a ⟨item⟩"]
    assert second.trigger.text() == BRAND_TRIGGER
    assert second.open_labels == ("b",)
    assert [t.text() for t in second.templates] == ["by ⟨brand⟩"]
    assert not any(r.is_initiative for r in corpus_rules.rules)


def test_augmented_ruleset_shape(rules):
    assert len(rules.rules) == 4
    by_trigger = {r.trigger.text(): r for r in rules.rules}
    # the wh-question rule merged an extra over-answering template
    assert [t.text() for t in by_trigger[QUESTION_TRIGGER].templates] == \
        ["a ⟨item⟩", "a ⟨item⟩ by ⟨brand⟩"]
    init = [r for r in rules.rules if r.is_initiative]
    assert len(init) == 1
    assert init[0].trigger.text() == "[]"
    assert [t.text() for t in init[0].templates] == [
        "i would like a ⟨item⟩ by ⟨brand⟩", "i would like an ⟨brand⟩ ⟨item⟩"]
    # the bare continuation rule answers "...by?" before any brand exists
    assert by_trigger["[x:ent, b:ent, p_by:by(x,b)]"].open_labels == ("b",)


def test_triggers_are_delexicalized_and_pairwise_distinct(rules):
    seen = []
    for r in rules.rules:
        assert r.trigger == delexicalize(r.trigger)
        for other in seen:
            if r.trigger and other:
                assert not equivalent(r.trigger, other)
        seen.append(r.trigger)


def test_equivalent_augmentation_triggers_merge(corpus, lexicon, spec):
    # same shape as the corpus brand question, written with other labels
    aug = [{"trigger": "[b:ent, x:ent, p_brand:brand(b), p_by:by(x,b)]",
            "open": ["b"], "templates": ["⟨brand⟩"]}]
    rs = extract_rules(corpus, lexicon, spec, aug)
    assert len(rs.rules) == 2
    brand_rule = rs.rules[1]
    assert [t.text() for t in brand_rule.templates] == ["by ⟨brand⟩", "⟨brand⟩"]
    assert brand_rule.open_labels == ("b",)


def test_augmentation_validation():
    import conftest
    from incdial.grammar import load_corpus, load_lexicon
    from incdial.induction import induce
    lexicon = load_lexicon(conftest.DATA / "lexicon.json")
    corpus = load_corpus(conftest.DATA / "corpus.txt")
    spec = induce(corpus, lexicon)
    with pytest.raises(SimulatorError, match="zebra"):
        extract_rules(corpus, lexicon, spec,
                      [{"trigger": "[]", "templates": ["zebra"]}])
    with pytest.raises(SimulatorError, match="color"):
        extract_rules(corpus, lexicon, spec,
                      [{"trigger": "[]", "templates": ["a ⟨color⟩"]}])
    with pytest.raises(SimulatorError, match="open"):
        extract_rules(corpus, lexicon, spec,
                      [{"trigger": "[x:ent]", "open": ["b"],
                        "templates": ["phone"]}])


# --------------------------------------------------------------------------
# Matching


def test_rules_match_at_the_corpus_onsets(corpus, lexicon, corpus_rules, rules):
    out = parse_dialogue(corpus[0], lexicon)
    for ruleset in (corpus_rules, rules):
        q = match(ruleset, out.onsets[1].context)
        assert q is not None and q.trigger.text() == QUESTION_TRIGGER
        b = match(ruleset, out.onsets[3].context)
        assert b is not None and b.trigger.text() == BRAND_TRIGGER
    # the actual corpus utterances are realizations of the matched rules
    assert UtteranceTemplate(("a", "⟨item⟩")) in \
        match(rules, out.onsets[1].context).templates
    assert UtteranceTemplate(("by", "⟨brand⟩")) in \
        match(rules, out.onsets[3].context).templates


def test_answered_question_no_longer_matches(lexicon, rules):
    """"a apple" builds the same shape as the brand question with the brand
    already filled in; the open-label gate must keep the simulator quiet."""
    ctx = _ctx_after(lexicon, [(SYS, "a apple")])
    cur = current_semantics(ctx)
    trigger = next(r.trigger for r in rules.rules
                   if r.trigger.text() == BRAND_TRIGGER)
    assert equivalent(delexicalize(cur), trigger)  # shape alone would match
    assert isinstance(cur.get("b").manifest, Const)
    assert match(rules, ctx) is None


def test_open_question_still_matches(lexicon, rules):
    ctx = _ctx_after(lexicon, [(SYS, "what would you like"), (USR, "a phone"),
                               (SYS, "by which brand")])
    hit = match(rules, ctx)
    assert hit is not None and hit.trigger.text() == BRAND_TRIGGER


def test_initiative_fires_only_on_a_fully_empty_context(lexicon, rules):
    empty = DialogueContext.new(lexicon)
    assert match(rules, empty) is None                      # not released
    hit = match(rules, empty, turn_released=True)
    assert hit is not None and hit.is_initiative
    # grounded content but empty current: the dialogue has begun, the
    # simulator must not restart it
    ctx = _ctx_after(lexicon, [(USR, "i would like a phone by lg"),
                               (SYS, "okay")])
    assert current_semantics(ctx).text() == "[]"
    assert match(rules, ctx, turn_released=True) is None


def test_mid_utterance_context_matches_nothing(lexicon, rules):
    ctx = _ctx_after(lexicon, [(SYS, "what would")])
    assert match(rules, ctx) is None
    assert match(rules, ctx, turn_released=True) is None


# --------------------------------------------------------------------------
# Realization


def test_realize_is_deterministic_under_a_seed(rules, lexicon):
    inv = SlotInventory.from_lexicon(lexicon)
    rule = rules.rules[0]
    assert realize(rule, inv, Random(3)) == realize(rule, inv, Random(3))
    seen = {tuple(realize(rule, inv, Random(s))) for s in range(40)}
    assert len(seen) > 1  # both templates and several slot words get used


def test_every_realization_is_grammatical_in_a_matching_context(
        corpus, lexicon, rules):
    """For each rule, enumerate every template filling and speak it as the
    user from a context the rule matches: the grammar must accept every
    word.  This is the no-crash contract the trainer relies on."""
    out = parse_dialogue(corpus[0], lexicon)
    contexts = {
        QUESTION_TRIGGER: out.onsets[1].context,
        BRAND_TRIGGER: out.onsets[3].context,
        "[]": DialogueContext.new(lexicon),
        "[x:ent, b:ent, p_by:by(x,b)]": _ctx_after(
            lexicon, [(SYS, "what would you like"), (USR, "a phone"),
                      (SYS, "by")]),
    }
    inv = SlotInventory.from_lexicon(lexicon)
    checked = 0
    for rule in rules.rules:
        base = contexts[rule.trigger.text()]
        assert match(rules, base, turn_released=rule.is_initiative) is rule
        for template in rule.templates:
            options = [inv.by_sort[placeholder_sort(t)]
                       if placeholder_sort(t) else (t,)
                       for t in template.tokens]
            for words in itertools.product(*options):
                ctx = base
                for w in words:
                    ctx = advance(ctx, w, USR)  # raises if ungrammatical
                checked += 1
    assert checked >= 20


# --------------------------------------------------------------------------
# Serialization


def test_ruleset_json_round_trip(rules, tmp_path):
    doc = ruleset_to_json(rules)
    again = ruleset_from_json(doc)
    assert again.lexicon_hash == rules.lexicon_hash
    assert len(again.rules) == len(rules.rules)
    for a, b in zip(again.rules, rules.rules):
        assert a.trigger == b.trigger
        assert a.templates == b.templates
        assert a.open_labels == b.open_labels
    assert ruleset_to_json(again) == doc


def test_ruleset_from_json_rejects_garbage():
    with pytest.raises(SimulatorError):
        ruleset_from_json({"lexicon_hash": "x", "rules": [{"trigger": "[x"}]})
