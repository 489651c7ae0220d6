"""Mention and mention-pair feature groups.

Four groups feed the networks: the mention's words and its context (both as
embedding sequences), seven mention attribute bits, and nine pair-relation
values (six binary tests plus three distances).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ENTITY_TYPES, CorpusDocument, Mention
from .embeddings import PAD

CONTEXT_SIZE = 10
MIN_WORD_LEN = 4
DISTANCE_CAP = 63

MENTION_FEATURE_DIM = 7
PAIR_FEATURE_DIM = 9


@dataclass(frozen=True)
class MentionFeatures:
    is_pronoun: int
    entity_type_onehot: tuple[int, int, int, int]
    is_proper_name: int
    is_first_person: int

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.is_pronoun, *self.entity_type_onehot, self.is_proper_name, self.is_first_person],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class PairRelationFeatures:
    exact_match: int
    same_word_set: int
    substring: int
    abbreviation: int
    appositive: int
    nearest_candidate: int
    sentence_distance: int
    word_distance: int
    mention_distance: int

    def as_vector(self) -> np.ndarray:
        """Binary tests as-is; distances clipped at DISTANCE_CAP and scaled into [0, 1]."""
        dists = [min(d, DISTANCE_CAP) / DISTANCE_CAP
                 for d in (self.sentence_distance, self.word_distance, self.mention_distance)]
        return np.array(
            [self.exact_match, self.same_word_set, self.substring, self.abbreviation,
             self.appositive, self.nearest_candidate, *dists],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class ContextWindow:
    preceding: tuple[str, ...]
    following: tuple[str, ...]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.preceding + self.following


def mention_features(doc: CorpusDocument, mention: Mention) -> MentionFeatures:
    onehot = tuple(int(mention.entity_type == t) for t in ENTITY_TYPES)
    return MentionFeatures(
        is_pronoun=int(mention.is_pronoun),
        entity_type_onehot=onehot,
        is_proper_name=int(mention.is_proper_name),
        is_first_person=int(mention.is_first_person),
    )


def _initials(tokens) -> str:
    return "".join(t[0] for t in tokens).lower()


def _is_abbreviation(short, long) -> bool:
    return len(short) == 1 and short[0].lower() == _initials(long)


def pair_features(doc: CorpusDocument, antecedent: Mention, anaphor: Mention) -> PairRelationFeatures:
    i = doc.mention_index[antecedent.id]
    j = doc.mention_index[anaphor.id]
    if not i < j:
        raise ValueError(f"{doc.doc_id}: antecedent {antecedent.id} does not precede anaphor {anaphor.id}")

    ta, tb = doc.tokens(antecedent), doc.tokens(anaphor)
    sa, sb = " ".join(ta).lower(), " ".join(tb).lower()

    appositive = (
        antecedent.sentence_index == anaphor.sentence_index
        and anaphor.start_token == antecedent.end_token + 2
        and doc.sentences[antecedent.sentence_index][antecedent.end_token + 1] == ","
    )
    _, a_end = doc.flat_span(antecedent)
    b_start, _ = doc.flat_span(anaphor)

    return PairRelationFeatures(
        exact_match=int(sa == sb),
        same_word_set=int({t.lower() for t in ta} == {t.lower() for t in tb}),
        substring=int(sa in sb or sb in sa),
        abbreviation=int(_is_abbreviation(ta, tb) or _is_abbreviation(tb, ta)),
        appositive=int(appositive),
        nearest_candidate=int(j == i + 1),
        sentence_distance=abs(anaphor.sentence_index - antecedent.sentence_index),
        word_distance=max(0, b_start - a_end - 1),
        mention_distance=j - i - 1,
    )


def context_window(doc: CorpusDocument, mention: Mention, size: int = CONTEXT_SIZE) -> ContextWindow:
    flat = doc.flat_tokens
    start, end = doc.flat_span(mention)
    before = flat[max(0, start - size):start]
    after = flat[end + 1:end + 1 + size]
    return ContextWindow(
        preceding=(PAD,) * (size - len(before)) + tuple(before),
        following=tuple(after) + (PAD,) * (size - len(after)),
    )


def mention_word_sequence(mention: Mention, doc: CorpusDocument, min_len: int = MIN_WORD_LEN) -> tuple[str, ...]:
    """The mention's tokens, right-padded with PAD up to `min_len`."""
    toks = doc.tokens(mention)
    return tuple(toks) + (PAD,) * max(0, min_len - len(toks))
