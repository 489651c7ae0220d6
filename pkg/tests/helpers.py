"""Shared builders for tests: a hand-made corpus and tiny network configurations."""

from __future__ import annotations

import io
import json

import numpy as np

from corefid.classifiers import HyperConfig
from corefid.corpus import parse_corpus
from corefid.nn import ModelParams


def make_record(doc_id="d1", sentences=None, mentions=(), entities=()):
    sentences = sentences or [["Budi", "pergi", "ke", "pasar", "."], ["Dia", "membeli", "kursi", "."]]
    ms = []
    for k, m in enumerate(mentions, 1):
        sent, start, end = m[:3]
        extra = m[3] if len(m) > 3 else {}
        ms.append({
            "id": extra.get("id", f"m{k}"), "sentence": sent, "start": start, "end": end,
            "pronoun": extra.get("pronoun", False), "etype": extra.get("etype", "OTHER"),
            "proper": extra.get("proper", False), "first_person": extra.get("first_person", False),
        })
    return {"doc_id": doc_id, "sentences": sentences, "mentions": ms, "entities": [list(e) for e in entities]}


def parse_records(*records):
    text = "".join(json.dumps(r) + "\n" for r in records)
    return parse_corpus(io.BytesIO(text.encode("utf-8")))


def simple_doc(n_mentions=3, entities=(("m1", "m2"),)):
    """One sentence of ten tokens with one-token mentions at positions 0, 2, 4, ..."""
    tokens = [f"w{i}" for i in range(max(10, 2 * n_mentions))]
    rec = make_record(sentences=[tokens], mentions=[(0, 2 * k, 2 * k) for k in range(n_mentions)],
                      entities=entities)
    return parse_records(rec)[0]


def tiny_proposed(**kw) -> HyperConfig:
    """Proposed topology (widths 2/3/4, one conv stage, same FCN depths) at small widths."""
    return HyperConfig(preset="proposed", conv_widths=(2, 3, 4), conv_filters=3, conv_depth=1,
                       input_fcn=(4, 3), post_fcn=(5, 4, 3), final_fcn=(4, 3), **kw)


def tiny_wu_ma(**kw) -> HyperConfig:
    """wu_ma topology reduced to two stacked conv stages and width-8 layers."""
    return HyperConfig(preset="wu_ma", conv_widths=(2,), conv_filters=8, conv_depth=2,
                       input_fcn=(8,) * 5, post_fcn=(8,) * 5, final_fcn=(8,) * 10, **kw)


def randomize(params: ModelParams, seed: int) -> ModelParams:
    """Random values for every block, biases included, keeping the layout.

    Weights are uniform with a variance-preserving bound sqrt(6 / fan_in)
    (fan-in is the last axis for both dense and conv matrices) so gradients
    in deep stacks stay well above finite-difference round-off.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for name, arr in params.items():
        bound = np.sqrt(6.0 / arr.shape[-1]) if arr.ndim == 2 else 0.1
        blocks.append((name, rng.uniform(-bound, bound, size=arr.shape)))
    return ModelParams(blocks)


def singleton_batch(rng, dim, batch=3, word_len=6):
    lengths = np.array([word_len, word_len - 1, word_len - 2][:batch])
    return {
        "words": rng.normal(size=(batch, word_len, dim)),
        "word_len": lengths,
        "context": rng.normal(size=(batch, 20, dim)),
        "mfeat": rng.integers(0, 2, size=(batch, 7)).astype(float),
    }


def coref_batch(rng, dim, n_mentions=4, word_len=6):
    batch = singleton_batch(rng, dim, batch=min(3, n_mentions), word_len=word_len)
    if n_mentions > 3:
        more = singleton_batch(rng, dim, batch=n_mentions - 3, word_len=word_len)
        batch = {k: np.concatenate([batch[k], more[k]]) for k in batch}
    a = np.array([0, 0, 1, 2])
    b = np.array([1, 2, 3, 3])
    batch.update(a_index=a, b_index=b, pair=rng.uniform(size=(len(a), 9)))
    return batch, np.array([1.0, 0.0, 0.0, 1.0])
