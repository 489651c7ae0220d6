"""Greedy best-first antecedent linking with singleton exclusion."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Callable, Optional

from .corpus import CorpusDocument, Mention, Partition, gold_singletons

SINGLETON_MODES = ("none", "trained", "gold")

PairScorer = Callable[[CorpusDocument, Mention, Mention], float]


class DisjointSet:
    """Union by rank with path compression over indices 0..n-1."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return ra

    def groups(self) -> list[list[int]]:
        """Members of each set, sets ordered by their smallest member."""
        by_root: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            by_root.setdefault(self.find(x), []).append(x)
        return sorted(by_root.values(), key=lambda g: g[0])


@dataclass(frozen=True)
class ClusteringConfig:
    link_threshold: Optional[float] = None  # None: always link to the best candidate
    singleton_mode: str = "none"

    def __post_init__(self):
        if self.link_threshold is not None and not 0.0 <= self.link_threshold <= 1.0:
            raise ValueError("link_threshold must lie in [0, 1] or be None")
        if self.singleton_mode not in SINGLETON_MODES:
            raise ValueError(f"singleton_mode must be one of {SINGLETON_MODES}")


class ScorerError(RuntimeError):
    pass


def best_first_cluster(doc: CorpusDocument, scorer: PairScorer, singletons=frozenset(),
                       config: ClusteringConfig = ClusteringConfig()) -> Partition:
    """Link each non-excluded mention to its highest-scoring earlier non-excluded mention.

    Candidates are visited nearest-first and only a strictly higher score
    replaces the current best, so ties go to the nearest antecedent.
    """
    ms = doc.mentions
    ds = DisjointSet(len(ms))
    excluded = set(singletons)
    for j, anaphor in enumerate(ms):
        if anaphor.id in excluded:
            continue
        best, best_score = None, None
        for i in range(j - 1, -1, -1):
            antecedent = ms[i]
            if antecedent.id in excluded:
                continue
            try:
                s = scorer(doc, antecedent, anaphor)
            except Exception as exc:
                raise ScorerError(f"{doc.doc_id}: scoring ({antecedent.id}, {anaphor.id}) failed: {exc}") from exc
            if best_score is None or s > best_score:
                best, best_score = i, s
        if best is None:
            continue
        if config.link_threshold is None or best_score > config.link_threshold:
            ds.union(best, j)
    return [frozenset(ms[i].id for i in group) for group in ds.groups()]


def random_scorer(seed: int) -> PairScorer:
    """Uniform [0, 1] scores that depend only on (seed, doc id, antecedent id, anaphor id)."""

    def score(doc, antecedent, anaphor):
        key = "\x1f".join([str(seed), doc.doc_id, antecedent.id, anaphor.id]).encode("utf-8")
        (value,) = struct.unpack("<Q", hashlib.blake2b(key, digest_size=8).digest())
        return value / 2.0 ** 64

    return score


def exclude_singletons(doc: CorpusDocument, mode: str = "none", model=None, threshold: float = 0.5) -> set[str]:
    """Mentions to keep out of linking.

    mode "trained" needs a singleton model (see classifiers.TrainedModel) and
    excludes mentions whose non-singleton probability is below `threshold`;
    mode "gold" uses the document's own annotation.
    """
    if mode == "none":
        return set()
    if mode == "gold":
        if doc.entities is None:
            raise ValueError(f"{doc.doc_id}: gold singleton exclusion needs gold entities")
        return gold_singletons(doc)
    if mode == "trained":
        if model is None:
            raise ValueError("trained singleton exclusion needs a singleton model")
        scores = model.mention_scores(doc)
        return {mid for mid, p in scores.items() if p < threshold}
    raise ValueError(f"unknown singleton mode {mode!r}")


def resolve_document(doc: CorpusDocument, scorer: PairScorer, config: ClusteringConfig = ClusteringConfig(),
                     singleton_model=None, singleton_threshold: float = 0.5) -> Partition:
    excluded = exclude_singletons(doc, config.singleton_mode, singleton_model, singleton_threshold)
    return best_first_cluster(doc, scorer, excluded, config)


# -- predictions file -------------------------------------------------------

def partition_record(doc: CorpusDocument, partition: Partition, seed: Optional[int] = None) -> dict:
    """JSON-ready record; clusters and members listed in document order."""
    order = doc.mention_index
    clusters = sorted((sorted(c, key=order.__getitem__) for c in partition), key=lambda c: order[c[0]])
    rec = {"doc_id": doc.doc_id, "system_entities": clusters}
    if seed is not None:
        rec["seed"] = seed
    return rec


def dump_predictions(records, stream) -> None:
    for rec in records:
        stream.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def parse_predictions(stream) -> dict[str, list[frozenset]]:
    """doc id -> partition from a predictions stream; validates disjointness."""
    out: dict[str, list[frozenset]] = {}
    for lineno, raw in enumerate(stream, 1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed prediction record ({exc.msg})") from None
        if not isinstance(rec, dict) or set(rec) - {"doc_id", "system_entities", "seed"} \
                or "doc_id" not in rec or "system_entities" not in rec:
            raise ValueError(f"line {lineno}: expected fields doc_id and system_entities")
        clusters = rec["system_entities"]
        if not isinstance(clusters, list) or not all(
                isinstance(c, list) and c and all(isinstance(m, str) for m in c) for c in clusters):
            raise ValueError(f"line {lineno}: system_entities must be non-empty arrays of mention ids")
        seen: set[str] = set()
        for c in clusters:
            if seen & set(c) or len(set(c)) != len(c):
                raise ValueError(f"line {lineno}: document {rec['doc_id']!r} repeats a mention across clusters")
            seen |= set(c)
        if rec["doc_id"] in out:
            raise ValueError(f"line {lineno}: duplicate document {rec['doc_id']!r}")
        out[rec["doc_id"]] = [frozenset(c) for c in clusters]
    return out
