"""Shared fixtures: the packaged domain, its induced artifacts, and one
trained policy reused across the whole suite (training takes ~10 s)."""

from __future__ import annotations

from pathlib import Path

import pytest

from incdial.grammar import load_corpus, load_lexicon
from incdial.induction import induce
from incdial.learner import EnvConfig, TrainConfig, train
from incdial.simulator import extract_rules

DATA = Path(__file__).resolve().parent.parent / "src" / "incdial" / "data"

# The eight transcript variants the grammar has to understand without any
# of them appearing in the training corpus: full sentences, fragment
# answers, over-answering, continuations, declarative questions, user
# acknowledgements, and a split utterance spread over system turns.
VARIANTS_TEXT = """\
USR: I would like an LG phone
SYS: okay.

USR: I would like a phone.
SYS: by which brand?
USR: Apple.
USR: okay.

USR: I would like a phone
SYS: ...by?
USR: LG.
SYS: okay.

SYS: what would you like?
USR: a phone
SYS: ...by?
USR: Samsung
SYS: okay.

SYS: you like...?
SYS: a phone
SYS: ...by?
USR: Google
SYS: okay.

SYS: what would you like?
USR: a phone by LG
SYS: okay.

SYS: you would like...?
USR: I would like a computer
SYS: by which brand?
USR: Apple.
SYS: okay.

SYS: you like...?
USR: a tablet by Google.
SYS: okay.
"""


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(DATA / "lexicon.json")


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(DATA / "corpus.txt")


@pytest.fixture(scope="session")
def variant_dialogues():
    return load_corpus(VARIANTS_TEXT)


@pytest.fixture(scope="session")
def spec(corpus, lexicon):
    return induce(corpus, lexicon)


@pytest.fixture(scope="session")
def rules(corpus, lexicon, spec):
    return extract_rules(corpus, lexicon, spec, DATA / "augmentation.json")


@pytest.fixture(scope="session")
def corpus_rules(corpus, lexicon, spec):
    """Rules from the transcripts alone, without the augmentation file."""
    return extract_rules(corpus, lexicon, spec)


@pytest.fixture(scope="session")
def policy(lexicon, spec, rules):
    return train(lexicon, spec, rules, TrainConfig(), EnvConfig())
