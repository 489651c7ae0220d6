"""Deterministic synthetic Indonesian-flavoured corpora for tests and demos.

Coreferent mentions either repeat a name token (possibly abbreviated or
prefixed) or are third-person pronouns at most two sentences after an earlier
mention of the same entity.  Singletons are drawn from the same closed
vocabulary, including a few unattached pronouns, so the task is learnable
but not trivially so.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusDocument, Mention

PERSONS = [
    "Budi", "Siti", "Andi", "Dewi", "Rudi", "Ani", "Joko", "Rina", "Agus", "Maya",
    "Hendra", "Lestari", "Bambang", "Wati", "Yusuf", "Indah", "Dimas", "Putri", "Fajar", "Nina",
]
ORGANIZATIONS = [
    (("Institut", "Teknologi", "Bandung"), "ITB"),
    (("Bank", "Indonesia"), "BI"),
    (("Universitas", "Gadjah", "Mada"), "UGM"),
    (("Perusahaan", "Listrik", "Negara"), "PLN"),
    (("Komisi", "Pemberantasan", "Korupsi"), "KPK"),
    (("Badan", "Pusat", "Statistik"), "BPS"),
    (("Tentara", "Nasional", "Indonesia"), "TNI"),
    (("Dewan", "Perwakilan", "Rakyat"), "DPR"),
]
LOCATIONS = [
    "Jakarta", "Bandung", "Surabaya", "Medan", "Makassar", "Semarang",
    "Yogyakarta", "Palembang", "Denpasar", "Malang", "Bogor", "Padang",
]
NOUNS = [
    "kursi", "buku", "rumah", "mobil", "meja", "surat", "pasar", "sekolah", "kantor", "jalan",
    "sepeda", "kapal", "pesawat", "laporan", "gedung", "kebun", "sungai", "lampu", "telepon", "tas",
]
FILLERS = [
    "pergi", "ke", "di", "dan", "yang", "membeli", "melihat", "berkata", "bahwa", "dengan",
    "untuk", "sudah", "akan", "baru", "besar", "kemarin", "pagi", "dari", "pada", "juga",
]
THIRD_PERSON = ["dia", "ia", "beliau"]
FIRST_PERSON = ["saya", "aku"]
ADJECTIVES = ["baru", "lama", "besar", "kecil", "merah"]

_ENTITY_KINDS = ["PERSON", "ORGANIZATION", "LOCATION", "OTHER"]
_ENTITY_KIND_P = [0.45, 0.2, 0.15, 0.2]
_SINGLETON_KINDS = ["noun", "location", "person", "pronoun", "first_person"]
_SINGLETON_KIND_P = [0.35, 0.15, 0.2, 0.15, 0.15]


class _Pools:
    """Per-document draws without replacement; nouns are the fallback pool."""

    def __init__(self, rng):
        self.rng = rng
        self.pools = {
            "PERSON": list(rng.permutation(len(PERSONS))),
            "ORGANIZATION": list(rng.permutation(len(ORGANIZATIONS))),
            "LOCATION": list(rng.permutation(len(LOCATIONS))),
            "OTHER": list(rng.permutation(len(NOUNS))),
        }

    def draw(self, kind):
        if not self.pools[kind]:
            kind = "OTHER"
        return kind, int(self.pools[kind].pop())


def _mention_surface(item, entity_state, rng):
    """Pick tokens and flags for one mention given its entity's history."""
    kind, lex = item["kind"], item["lex"]
    if item["entity"] is None:
        if item["singleton"] == "pronoun":
            return [str(rng.choice(THIRD_PERSON))], dict(pronoun=True, etype="PERSON")
        if item["singleton"] == "first_person":
            return [str(rng.choice(FIRST_PERSON))], dict(pronoun=True, etype="PERSON", first_person=True)
        if kind == "PERSON":
            return [PERSONS[lex]], dict(etype="PERSON", proper=True)
        if kind == "LOCATION":
            return [LOCATIONS[lex]], dict(etype="LOCATION", proper=True)
        toks = [NOUNS[lex]]
        if rng.random() < 0.4:
            toks.append(str(rng.choice(ADJECTIVES)))
        return toks, dict(etype="OTHER")

    first = entity_state.get("last_sentence") is None
    gap = None if first else item["sentence"] - entity_state["last_sentence"]
    if kind == "PERSON":
        name = PERSONS[lex]
        if first:
            toks = ["Pak", name] if rng.random() < 0.3 else [name]
            return toks, dict(etype="PERSON", proper=True)
        if gap <= 2 and rng.random() < 0.5:
            return [str(rng.choice(THIRD_PERSON))], dict(pronoun=True, etype="PERSON")
        return [name], dict(etype="PERSON", proper=True)
    if kind == "ORGANIZATION":
        full, abbrev = ORGANIZATIONS[lex]
        if not first and rng.random() < 0.6:
            return [abbrev], dict(etype="ORGANIZATION", proper=True)
        return list(full), dict(etype="ORGANIZATION", proper=True)
    if kind == "LOCATION":
        name = LOCATIONS[lex]
        if first and rng.random() < 0.4:
            return ["kota", name], dict(etype="LOCATION", proper=True)
        return [name], dict(etype="LOCATION", proper=True)
    noun = NOUNS[lex]
    if first:
        return [noun, "itu"], dict(etype="OTHER")
    return ([noun, "tersebut"] if rng.random() < 0.5 else [noun]), dict(etype="OTHER")


def _generate_document(rng, doc_id):
    n_sent = int(rng.integers(3, 11))
    n_ent = int(rng.integers(2, 7))
    n_single = int(rng.integers(3, 13))
    pools = _Pools(rng)

    items = []
    for e in range(n_ent):
        kind, lex = pools.draw(str(rng.choice(_ENTITY_KINDS, p=_ENTITY_KIND_P)))
        size = int(rng.integers(2, 5))
        sent = int(rng.integers(0, n_sent))
        for _ in range(size):
            items.append(dict(kind=kind, lex=lex, entity=e, singleton=None, sentence=sent))
            sent = min(n_sent - 1, sent + int(rng.integers(0, 3)))
    for _ in range(n_single):
        skind = str(rng.choice(_SINGLETON_KINDS, p=_SINGLETON_KIND_P))
        kind, lex = "PERSON", None
        if skind in ("noun", "location", "person"):
            kind, lex = pools.draw({"noun": "OTHER", "location": "LOCATION", "person": "PERSON"}[skind])
        items.append(dict(kind=kind, lex=lex, entity=None, singleton=skind,
                          sentence=int(rng.integers(0, n_sent))))

    by_sentence = [[] for _ in range(n_sent)]
    for item in items:
        by_sentence[item["sentence"]].append(item)

    entity_state = [dict(last_sentence=None) for _ in range(n_ent)]
    sentences, mentions, entities = [], [], [[] for _ in range(n_ent)]
    for si, bucket in enumerate(by_sentence):
        order = rng.permutation(len(bucket))
        toks = []
        for k in order:
            item = bucket[k]
            for _ in range(int(rng.integers(1, 3))):
                toks.append(str(rng.choice(FILLERS)))
            state = entity_state[item["entity"]] if item["entity"] is not None else {}
            surface, flags = _mention_surface(item, state, rng)
            if item["entity"] is not None:
                state["last_sentence"] = si
            mid = f"m{len(mentions) + 1}"
            mentions.append(Mention(
                id=mid,
                sentence_index=si,
                start_token=len(toks),
                end_token=len(toks) + len(surface) - 1,
                is_pronoun=flags.get("pronoun", False),
                entity_type=flags["etype"],
                is_proper_name=flags.get("proper", False),
                is_first_person=flags.get("first_person", False),
            ))
            toks.extend(surface)
            if item["entity"] is not None:
                entities[item["entity"]].append(mid)
        toks.append(str(rng.choice(FILLERS)))
        toks.append(".")
        sentences.append(tuple(toks))

    return CorpusDocument(
        doc_id=doc_id,
        sentences=tuple(sentences),
        mentions=tuple(mentions),
        entities=tuple(tuple(e) for e in entities),
    )


def generate_synthetic_corpus(seed: int, doc_count: int) -> list[CorpusDocument]:
    if doc_count < 1:
        raise ValueError(f"doc_count must be >= 1, got {doc_count}")
    rng = np.random.default_rng(seed)
    return [_generate_document(rng, f"syn{seed}-{k:03d}") for k in range(doc_count)]


def vocabulary(docs) -> list[str]:
    """Sorted lowercase token vocabulary of a corpus."""
    return sorted({tok.lower() for doc in docs for sent in doc.sentences for tok in sent})
