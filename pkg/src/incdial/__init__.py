"""incdial: induce a word-level incremental dialogue system from transcripts.

The pipeline: parse unannotated dialogues with an incremental lexical
grammar into record types, fuse the final contexts into a goal, decompose
it into atomic features, and train a tabular Q-learning policy whose
actions are single words, against a user simulator extracted from the
same transcripts.
"""

__version__ = "0.1.0"
