"""Labelled mention-pair generation for training the coreference classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import CorpusDocument

STRATEGIES = ("default", "reduced")

# The reduced strategy stands in for an unpublished generation method; output
# metadata carries this flag so results are not mistaken for a faithful replica.
APPROXIMATE_STRATEGIES = frozenset({"reduced"})


@dataclass(frozen=True)
class PairExample:
    doc_id: str
    antecedent_id: str
    anaphor_id: str
    label: int

    def to_line(self) -> str:
        return f"{self.doc_id} {self.antecedent_id} {self.anaphor_id} {self.label}"


def generate_pairs_default(doc: CorpusDocument) -> list[PairExample]:
    """Every mention paired with every later mention."""
    ms = doc.mentions
    return [
        PairExample(doc.doc_id, a.id, b.id, int(doc.coreferent(a.id, b.id)))
        for j, b in enumerate(ms)
        for a in ms[:j]
    ]


def generate_pairs_reduced(doc: CorpusDocument) -> list[PairExample]:
    """Nearest gold antecedent as the positive, intervening non-coreferent mentions as negatives."""
    ms = doc.mentions
    out = []
    for j, anaphor in enumerate(ms):
        nearest = None
        for i in range(j - 1, -1, -1):
            if doc.coreferent(ms[i].id, anaphor.id):
                nearest = i
                break
        if nearest is None:
            continue
        out.append(PairExample(doc.doc_id, ms[nearest].id, anaphor.id, 1))
        for k in range(nearest + 1, j):
            if not doc.coreferent(ms[k].id, anaphor.id):
                out.append(PairExample(doc.doc_id, ms[k].id, anaphor.id, 0))
    return out


def generate_pairs(doc: CorpusDocument, strategy: str = "default") -> list[PairExample]:
    if strategy == "default":
        return generate_pairs_default(doc)
    if strategy == "reduced":
        return generate_pairs_reduced(doc)
    raise ValueError(f"unknown pair strategy {strategy!r}; choose from {STRATEGIES}")


def class_balance(pairs) -> tuple[int, int, float]:
    """(positives, negatives, negatives/positives); inf when only negatives, nan when empty."""
    pos = sum(1 for p in pairs if p.label == 1)
    neg = sum(1 for p in pairs if p.label == 0)
    if pos:
        ratio = neg / pos
    else:
        ratio = math.inf if neg else math.nan
    return pos, neg, ratio
