"""Document, mention and entity data model plus the JSON-lines interchange format.

A corpus file holds one JSON object per line::

    {"doc_id": "d1",
     "sentences": [["Budi", "pergi", "."], ...],
     "mentions": [{"id": "m1", "sentence": 0, "start": 0, "end": 0,
                   "pronoun": false, "etype": "PERSON", "proper": true,
                   "first_person": false}, ...],
     "entities": [["m1", "m4"], ...]}

Singletons are mentions that appear in no entity; one-member entities are
rejected so there is exactly one way to write a given annotation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Iterator

ENTITY_TYPES = ("PERSON", "ORGANIZATION", "LOCATION", "OTHER")

DOC_FIELDS = ("doc_id", "sentences", "mentions", "entities")
MENTION_FIELDS = ("id", "sentence", "start", "end", "pronoun", "etype", "proper", "first_person")

Partition = list  # list[frozenset[str]]


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus records."""


@dataclass(frozen=True)
class Mention:
    id: str
    sentence_index: int
    start_token: int
    end_token: int
    is_pronoun: bool = False
    entity_type: str = "OTHER"
    is_proper_name: bool = False
    is_first_person: bool = False

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.sentence_index, self.start_token, self.end_token)


@dataclass(frozen=True)
class CorpusDocument:
    doc_id: str
    sentences: tuple[tuple[str, ...], ...]
    mentions: tuple[Mention, ...]
    entities: tuple[tuple[str, ...], ...] = field(default_factory=tuple)

    @cached_property
    def mention_index(self) -> dict[str, int]:
        """Mention id -> position in document order."""
        return {m.id: i for i, m in enumerate(self.mentions)}

    @cached_property
    def sentence_offsets(self) -> tuple[int, ...]:
        """Flat-stream offset of the first token of each sentence."""
        offsets, total = [], 0
        for sent in self.sentences:
            offsets.append(total)
            total += len(sent)
        return tuple(offsets)

    @cached_property
    def flat_tokens(self) -> tuple[str, ...]:
        return tuple(tok for sent in self.sentences for tok in sent)

    @cached_property
    def entity_of(self) -> dict[str, int]:
        """Mention id -> gold entity index, for non-singletons only."""
        return {mid: k for k, ent in enumerate(self.entities) for mid in ent}

    def mention(self, mention_id: str) -> Mention:
        return self.mentions[self.mention_index[mention_id]]

    def tokens(self, mention: Mention) -> tuple[str, ...]:
        return self.sentences[mention.sentence_index][mention.start_token:mention.end_token + 1]

    def flat_span(self, mention: Mention) -> tuple[int, int]:
        """Inclusive (start, end) of the mention in the flattened token stream."""
        base = self.sentence_offsets[mention.sentence_index]
        return base + mention.start_token, base + mention.end_token

    def coreferent(self, a: str, b: str) -> bool:
        ea = self.entity_of.get(a)
        return ea is not None and ea == self.entity_of.get(b)


def gold_singletons(doc: CorpusDocument) -> set[str]:
    in_entity = doc.entity_of
    return {m.id for m in doc.mentions if m.id not in in_entity}


def gold_partition(doc: CorpusDocument) -> Partition:
    clusters = [frozenset(ent) for ent in doc.entities]
    clusters.extend(frozenset([m.id]) for m in doc.mentions if m.id not in doc.entity_of)
    return clusters


def check_partition(clusters: Iterable[Iterable[str]], mention_ids: Iterable[str]) -> None:
    """Raise CorpusError unless `clusters` are disjoint and cover `mention_ids` exactly."""
    seen: set[str] = set()
    for cluster in clusters:
        for mid in cluster:
            if mid in seen:
                raise CorpusError(f"mention {mid!r} appears in more than one cluster")
            seen.add(mid)
    expected = set(mention_ids)
    if seen != expected:
        missing = sorted(expected - seen)
        extra = sorted(seen - expected)
        raise CorpusError(f"partition does not cover the mention set (missing={missing}, unknown={extra})")


# -- validation -------------------------------------------------------------

def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def validate_record(record) -> list[str]:
    """Return every violation found in one decoded corpus record (empty if valid)."""
    if not isinstance(record, dict):
        return ["record: expected a JSON object"]
    doc_id = record.get("doc_id", "<unknown>")
    where = f"document {doc_id!r}"
    errors = []
    unknown = sorted(set(record) - set(DOC_FIELDS))
    if unknown:
        errors.append(f"{where}: unknown field(s) {unknown}")
    missing = [f for f in DOC_FIELDS if f not in record]
    if missing:
        errors.append(f"{where}: missing field(s) {missing}")
        return errors
    if not isinstance(record["doc_id"], str):
        errors.append(f"{where}: field 'doc_id' must be a string")

    sentences = record["sentences"]
    if not isinstance(sentences, list) or not all(isinstance(s, list) for s in sentences):
        errors.append(f"{where}: field 'sentences' must be an array of token arrays")
        return errors
    for si, sent in enumerate(sentences):
        for ti, tok in enumerate(sent):
            if not isinstance(tok, str) or not tok or any(c.isspace() for c in tok):
                errors.append(f"{where}: field 'sentences[{si}][{ti}]' is not a non-empty whitespace-free token")

    mentions = record["mentions"]
    if not isinstance(mentions, list):
        errors.append(f"{where}: field 'mentions' must be an array")
        return errors
    ids: set[str] = set()
    for k, m in enumerate(mentions):
        at = f"{where}: field 'mentions[{k}]'"
        if not isinstance(m, dict):
            errors.append(f"{at} must be an object")
            continue
        bad = sorted(set(m) - set(MENTION_FIELDS))
        if bad:
            errors.append(f"{at} has unknown field(s) {bad}")
        absent = [f for f in MENTION_FIELDS if f not in m]
        if absent:
            errors.append(f"{at} is missing field(s) {absent}")
            continue
        mid = m["id"]
        if not isinstance(mid, str) or not mid:
            errors.append(f"{at}.id must be a non-empty string")
        elif mid in ids:
            errors.append(f"{at}.id: duplicate mention id {mid!r}")
        else:
            ids.add(mid)
        for flag in ("pronoun", "proper", "first_person"):
            if not isinstance(m[flag], bool):
                errors.append(f"{at}.{flag} must be a boolean")
        if m["etype"] not in ENTITY_TYPES:
            errors.append(f"{at}.etype {m['etype']!r} not in {list(ENTITY_TYPES)}")
        if m["first_person"] is True and m["pronoun"] is not True:
            errors.append(f"{at}.first_person set on a non-pronoun")
        s, a, b = m["sentence"], m["start"], m["end"]
        if not (_is_int(s) and _is_int(a) and _is_int(b)):
            errors.append(f"{at}: sentence/start/end must be integers")
            continue
        if not 0 <= s < len(sentences):
            errors.append(f"{at}.sentence {s} out of range (document has {len(sentences)} sentences)")
            continue
        if not 0 <= a <= b < len(sentences[s]):
            errors.append(f"{at}: token offsets [{a}, {b}] out of range for sentence {s} of length {len(sentences[s])}")

    entities = record["entities"]
    if not isinstance(entities, list) or not all(isinstance(e, list) for e in entities):
        errors.append(f"{where}: field 'entities' must be an array of id arrays")
        return errors
    placed: set[str] = set()
    for k, ent in enumerate(entities):
        at = f"{where}: field 'entities[{k}]'"
        if len(ent) < 2:
            errors.append(f"{at} has {len(ent)} member(s); entities need at least 2")
        for mid in ent:
            if mid not in ids:
                errors.append(f"{at}: unknown mention id {mid!r}")
            elif mid in placed:
                errors.append(f"{at}: mention id {mid!r} appears in more than one entity")
            else:
                placed.add(mid)
    return errors


def _build_document(record: dict) -> CorpusDocument:
    mentions = [
        Mention(
            id=m["id"],
            sentence_index=m["sentence"],
            start_token=m["start"],
            end_token=m["end"],
            is_pronoun=m["pronoun"],
            entity_type=m["etype"],
            is_proper_name=m["proper"],
            is_first_person=m["first_person"],
        )
        for m in record["mentions"]
    ]
    mentions.sort(key=lambda m: m.sort_key)
    return CorpusDocument(
        doc_id=record["doc_id"],
        sentences=tuple(tuple(s) for s in record["sentences"]),
        mentions=tuple(mentions),
        entities=tuple(tuple(e) for e in record["entities"]),
    )


def iter_records(stream: IO) -> Iterator[tuple[int, object]]:
    """Yield (line number, decoded JSON) for each non-blank line.

    Undecodable lines yield a CorpusError instance instead of a record.
    """
    for lineno, raw in enumerate(stream, 1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, CorpusError(f"line {lineno}: malformed record ({exc.msg})")


def parse_corpus(stream: IO) -> list[CorpusDocument]:
    """Parse and validate a JSON-lines corpus from a text or byte stream."""
    docs = []
    for lineno, record in iter_records(stream):
        if isinstance(record, CorpusError):
            raise record
        errors = validate_record(record)
        if errors:
            raise CorpusError(f"line {lineno}: " + "; ".join(errors))
        docs.append(_build_document(record))
    return docs


def load_corpus(path) -> list[CorpusDocument]:
    with open(path, "rb") as fh:
        return parse_corpus(fh)


def document_to_record(doc: CorpusDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": [list(s) for s in doc.sentences],
        "mentions": [
            {
                "id": m.id,
                "sentence": m.sentence_index,
                "start": m.start_token,
                "end": m.end_token,
                "pronoun": m.is_pronoun,
                "etype": m.entity_type,
                "proper": m.is_proper_name,
                "first_person": m.is_first_person,
            }
            for m in doc.mentions
        ],
        "entities": [list(e) for e in doc.entities],
    }


def dump_corpus(docs: Iterable[CorpusDocument], stream: IO[str]) -> None:
    for doc in docs:
        stream.write(json.dumps(document_to_record(doc), ensure_ascii=False, separators=(",", ":")))
        stream.write("\n")


def dumps_corpus(docs: Iterable[CorpusDocument]) -> str:
    import io

    buf = io.StringIO()
    dump_corpus(docs, buf)
    return buf.getvalue()


def save_corpus(docs: Iterable[CorpusDocument], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        dump_corpus(docs, fh)
