"""Singleton and coreference classifiers: topologies, presets, training and inference."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusDocument, Mention, gold_singletons
from .embeddings import EmbeddingTable
from .features import (
    CONTEXT_SIZE,
    MENTION_FEATURE_DIM,
    PAIR_FEATURE_DIM,
    context_window,
    mention_features,
    mention_word_sequence,
    pair_features,
)
from .nn import CNNBlock, Dense, FCN, ModelParams, adam_init, adam_step, bce_loss, init_params, sigmoid
from .pairgen import PairExample

log = logging.getLogger(__name__)

PRESETS = ("proposed", "wu_ma")


@dataclass(frozen=True)
class HyperConfig:
    preset: str
    conv_widths: tuple[int, ...]
    conv_filters: int
    conv_depth: int
    input_fcn: tuple[int, ...]
    post_fcn: tuple[int, ...]
    final_fcn: tuple[int, ...]
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0

    @classmethod
    def proposed(cls, **overrides) -> "HyperConfig":
        return cls(preset="proposed", conv_widths=(2, 3, 4), conv_filters=64, conv_depth=1,
                   input_fcn=(32, 16), post_fcn=(64, 32, 16), final_fcn=(32, 8), **overrides)

    @classmethod
    def wu_ma(cls, **overrides) -> "HyperConfig":
        return cls(preset="wu_ma", conv_widths=(2,), conv_filters=200, conv_depth=5,
                   input_fcn=(200,) * 5, post_fcn=(200,) * 5, final_fcn=(200,) * 10, **overrides)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "HyperConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
        return getattr(cls, name)(**overrides)

    @property
    def min_word_len(self) -> int:
        return max(self.conv_depth * (w - 1) + 1 for w in self.conv_widths)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperConfig":
        d = dict(d)
        for k in ("conv_widths", "input_fcn", "post_fcn", "final_fcn"):
            d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class FeatureGroupSelection:
    use_mention_words: bool = True
    use_context: bool = True
    use_mention_feats: bool = True

    def __post_init__(self):
        if not (self.use_mention_words or self.use_context or self.use_mention_feats):
            raise ValueError("at least one feature group must be enabled")


# Numbered as in the singleton experiment grid: 1 words, 2 context, 3 mention
# features, 4 words+context, 5 words+features, 6 context+features, 7 all.
SELECTIONS = {
    1: FeatureGroupSelection(True, False, False),
    2: FeatureGroupSelection(False, True, False),
    3: FeatureGroupSelection(False, False, True),
    4: FeatureGroupSelection(True, True, False),
    5: FeatureGroupSelection(True, False, True),
    6: FeatureGroupSelection(False, True, True),
    7: FeatureGroupSelection(True, True, True),
}


def _empty_grads(params):
    if isinstance(params, ModelParams):
        return params.zero_buffer()
    return {k: np.zeros_like(a) for k, a in params.items()}


class SingletonNet:
    """Group encoders -> concatenation -> post-concat FCN -> final FCN -> sigmoid.

    Output is the probability that a mention is NOT a singleton.
    """

    kind = "singleton"

    def __init__(self, config: HyperConfig, selection: FeatureGroupSelection, embedding_dim: int):
        self.config, self.selection, self.embedding_dim = config, selection, embedding_dim
        c = config
        self.words = (CNNBlock("s.words", embedding_dim, c.conv_widths, c.conv_filters, c.conv_depth)
                      if selection.use_mention_words else None)
        self.context = (CNNBlock("s.context", embedding_dim, c.conv_widths, c.conv_filters, c.conv_depth)
                        if selection.use_context else None)
        self.mfeat = FCN("s.mfeat", MENTION_FEATURE_DIM, c.input_fcn) if selection.use_mention_feats else None
        self.concat_dim = sum(g.out_dim for g in self._groups())
        self.post = FCN("s.post", self.concat_dim, c.post_fcn)
        self.final = FCN("s.final", self.post.out_dim, c.final_fcn)
        self.head = Dense("s.head", self.final.out_dim, 1, "identity")

    def _groups(self):
        return [g for g in (self.words, self.context, self.mfeat) if g is not None]

    def param_specs(self):
        specs = [s for g in self._groups() for s in g.param_specs()]
        return specs + self.post.param_specs() + self.final.param_specs() + self.head.param_specs()

    def forward(self, params, batch):
        parts, caches = [], {}
        if self.words is not None:
            r, caches["words"] = self.words.forward(params, batch["words"], batch["word_len"])
            parts.append(r)
        if self.context is not None:
            r, caches["context"] = self.context.forward(params, batch["context"])
            parts.append(r)
        if self.mfeat is not None:
            r, caches["mfeat"] = self.mfeat.forward(params, batch["mfeat"])
            parts.append(r)
        h = np.concatenate(parts, axis=1)
        h, caches["post"] = self.post.forward(params, h)
        h, caches["final"] = self.final.forward(params, h)
        z, caches["head"] = self.head.forward(params, h)
        return sigmoid(z[:, 0]), caches

    def backward(self, params, caches, dz):
        grads = _empty_grads(params)
        d = self.head.backward(params, caches["head"], dz[:, None], grads)
        d = self.final.backward(params, caches["final"], d, grads)
        d = self.post.backward(params, caches["post"], d, grads)
        offset = 0
        for key, group in (("words", self.words), ("context", self.context), ("mfeat", self.mfeat)):
            if group is None:
                continue
            piece = d[:, offset:offset + group.out_dim]
            offset += group.out_dim
            group.backward(params, caches[key], piece, grads)
        return grads


class CorefNet:
    """Pair scorer: shared per-group mention encoders, per-group similarity FCNs,
    pair-relation FCN, final FCN and a sigmoid head.

    Mention-level inputs hold each distinct mention of the batch once;
    `a_index` / `b_index` select the antecedent and anaphor row of each pair,
    so a mention shared by many pairs is encoded a single time.
    """

    kind = "coref"

    def __init__(self, config: HyperConfig, embedding_dim: int):
        self.config, self.embedding_dim = config, embedding_dim
        self.selection = FeatureGroupSelection()
        c = config
        self.words = CNNBlock("c.words", embedding_dim, c.conv_widths, c.conv_filters, c.conv_depth)
        self.context = CNNBlock("c.context", embedding_dim, c.conv_widths, c.conv_filters, c.conv_depth)
        self.mfeat = FCN("c.mfeat", MENTION_FEATURE_DIM, c.input_fcn)
        self.sim_words = FCN("c.sim_words", 2 * self.words.out_dim, c.post_fcn)
        self.sim_context = FCN("c.sim_context", 2 * self.context.out_dim, c.post_fcn)
        self.sim_mfeat = FCN("c.sim_mfeat", 2 * self.mfeat.out_dim, c.post_fcn)
        self.pair = FCN("c.pair", PAIR_FEATURE_DIM, c.input_fcn)
        self.concat_dim = (self.sim_words.out_dim + self.sim_context.out_dim
                           + self.sim_mfeat.out_dim + self.pair.out_dim)
        self.final = FCN("c.final", self.concat_dim, c.final_fcn)
        self.head = Dense("c.head", self.final.out_dim, 1, "identity")

    def _parts(self):
        return [
            ("words", self.words, self.sim_words),
            ("context", self.context, self.sim_context),
            ("mfeat", self.mfeat, self.sim_mfeat),
        ]

    def param_specs(self):
        specs = []
        for _, enc, _ in self._parts():
            specs += enc.param_specs()
        for _, _, sim in self._parts():
            specs += sim.param_specs()
        return specs + self.pair.param_specs() + self.final.param_specs() + self.head.param_specs()

    def forward(self, params, batch):
        a, b = batch["a_index"], batch["b_index"]
        caches, sims = {}, []
        for key, enc, sim in self._parts():
            if key == "words":
                r, ce = enc.forward(params, batch["words"], batch["word_len"])
            else:
                r, ce = enc.forward(params, batch[key])
            s, cs = sim.forward(params, np.concatenate([r[a], r[b]], axis=1))
            caches[key] = (ce, cs, r.shape)
            sims.append(s)
        caches["index"] = (a, b)
        pr, caches["pair"] = self.pair.forward(params, batch["pair"])
        h = np.concatenate(sims + [pr], axis=1)
        h, caches["final"] = self.final.forward(params, h)
        z, caches["head"] = self.head.forward(params, h)
        return sigmoid(z[:, 0]), caches

    def backward(self, params, caches, dz):
        grads = _empty_grads(params)
        d = self.head.backward(params, caches["head"], dz[:, None], grads)
        d = self.final.backward(params, caches["final"], d, grads)
        a, b = caches["index"]
        offset = 0
        for key, enc, sim in self._parts():
            ce, cs, shape = caches[key]
            piece = d[:, offset:offset + sim.out_dim]
            offset += sim.out_dim
            dpair = sim.backward(params, cs, piece, grads)
            width = shape[1]
            dr = np.zeros(shape)
            np.add.at(dr, a, dpair[:, :width])
            np.add.at(dr, b, dpair[:, width:])
            enc.backward(params, ce, dr, grads)
        self.pair.backward(params, caches["pair"], d[:, offset:], grads)
        return grads


def build_singleton_model(config: HyperConfig, selection: FeatureGroupSelection, embedding_dim: int) -> SingletonNet:
    return SingletonNet(config, selection, embedding_dim)


def build_coref_model(config: HyperConfig, embedding_dim: int) -> CorefNet:
    return CorefNet(config, embedding_dim)


def loss_and_grads(net, params, batch, labels):
    """Mean BCE over the batch and its exact gradient."""
    p, caches = net.forward(params, batch)
    y = np.asarray(labels, dtype=np.float64)
    loss = bce_loss(p, y)
    grads = net.backward(params, caches, (p - y) / len(y))
    return loss, grads


# -- featurisation ----------------------------------------------------------

class MentionTable:
    """Embedding ids and attribute vectors for every mention of a set of documents."""

    def __init__(self, docs, embeddings: EmbeddingTable, min_word_len: int):
        self.embeddings = embeddings
        self.rows: dict[tuple[str, str], int] = {}
        word_ids, ctx_ids, mfeat = [], [], []
        for doc in docs:
            for m in doc.mentions:
                self.rows[(doc.doc_id, m.id)] = len(word_ids)
                word_ids.append([embeddings.index(t) for t in mention_word_sequence(m, doc, min_word_len)])
                ctx_ids.append([embeddings.index(t) for t in context_window(doc, m).tokens])
                mfeat.append(mention_features(doc, m).as_vector())
        n = len(word_ids)
        self.lengths = np.array([len(w) for w in word_ids], dtype=np.int64)
        width = int(self.lengths.max()) if n else min_word_len
        self.word_ids = np.full((n, width), embeddings.zero_index, dtype=np.int64)
        for i, w in enumerate(word_ids):
            self.word_ids[i, :len(w)] = w
        self.ctx_ids = np.array(ctx_ids, dtype=np.int64).reshape(n, 2 * CONTEXT_SIZE)
        self.mfeat = np.array(mfeat, dtype=np.float64).reshape(n, MENTION_FEATURE_DIM)

    def row(self, doc_id: str, mention_id: str) -> int:
        return self.rows[(doc_id, mention_id)]

    def gather(self, rows) -> dict:
        rows = np.asarray(rows, dtype=np.int64)
        E = self.embeddings.padded
        lengths = self.lengths[rows]
        L = int(lengths.max())
        return {
            "words": E[self.word_ids[rows, :L]],
            "word_len": lengths,
            "context": E[self.ctx_ids[rows]],
            "mfeat": self.mfeat[rows],
        }


@dataclass(frozen=True)
class MentionExample:
    doc_id: str
    mention_id: str
    label: int  # 1 = non-singleton


def singleton_examples(docs) -> list[MentionExample]:
    out = []
    for doc in docs:
        singles = gold_singletons(doc)
        out.extend(MentionExample(doc.doc_id, m.id, int(m.id not in singles)) for m in doc.mentions)
    return out


class _EncodedMentions:
    def __init__(self, table: MentionTable, examples):
        self.table = table
        self.rows = np.array([table.row(e.doc_id, e.mention_id) for e in examples], dtype=np.int64)
        self.labels = np.array([e.label for e in examples], dtype=np.float64)

    def batch(self, idx):
        return self.table.gather(self.rows[idx]), self.labels[idx]


def pair_batch(table: MentionTable, a_rows, b_rows, pair_vectors) -> dict:
    """Coreference-network input for pairs given as mention-table rows."""
    B = len(a_rows)
    uniq, inverse = np.unique(np.concatenate([a_rows, b_rows]), return_inverse=True)
    batch = table.gather(uniq)
    batch["a_index"] = inverse[:B]
    batch["b_index"] = inverse[B:]
    batch["pair"] = np.asarray(pair_vectors, dtype=np.float64).reshape(B, PAIR_FEATURE_DIM)
    return batch


class _EncodedPairs:
    def __init__(self, table: MentionTable, examples, docs: dict):
        self.table = table
        self.a = np.array([table.row(e.doc_id, e.antecedent_id) for e in examples], dtype=np.int64)
        self.b = np.array([table.row(e.doc_id, e.anaphor_id) for e in examples], dtype=np.int64)
        self.pair = np.array(
            [pair_features(docs[e.doc_id], docs[e.doc_id].mention(e.antecedent_id),
                           docs[e.doc_id].mention(e.anaphor_id)).as_vector() for e in examples],
            dtype=np.float64,
        ).reshape(len(examples), PAIR_FEATURE_DIM)
        self.labels = np.array([e.label for e in examples], dtype=np.float64)

    def batch(self, idx):
        return pair_batch(self.table, self.a[idx], self.b[idx], self.pair[idx]), self.labels[idx]


def epoch_order(groups, seed: int, epoch: int) -> np.ndarray:
    """Seeded shuffle that permutes the documents, then the examples within each.

    Consecutive batches therefore mostly come from one document and share
    mentions, which the coreference network encodes once per batch.
    """
    rng = np.random.default_rng([seed, epoch])
    return np.concatenate([rng.permutation(groups[g]) for g in rng.permutation(len(groups))])


def _doc_groups(examples) -> list[np.ndarray]:
    by_doc: dict[str, list[int]] = {}
    for i, e in enumerate(examples):
        by_doc.setdefault(e.doc_id, []).append(i)
    return [np.array(ix, dtype=np.int64) for ix in by_doc.values()]


def _encode(net, examples, docs, embeddings, min_word_len):
    table = MentionTable(docs.values(), embeddings, min_word_len)
    if net.kind == "coref":
        return _EncodedPairs(table, examples, docs)
    return _EncodedMentions(table, examples)


# -- training and inference -------------------------------------------------

@dataclass
class TrainResult:
    params: ModelParams
    history: list[float]
    warnings: list[str] = field(default_factory=list)


def train(net, examples, corpus, embeddings: EmbeddingTable, config: HyperConfig,
          progress=None) -> TrainResult:
    """Mini-batch Adam on mean BCE, deterministic for a fixed config seed."""
    if not examples:
        raise ValueError("train needs at least one example")
    if embeddings.dim != net.embedding_dim:
        raise ValueError(f"embedding dim {embeddings.dim} does not match model dim {net.embedding_dim}")
    docs = {d.doc_id: d for d in corpus}
    data = _encode(net, examples, docs, embeddings, config.min_word_len)
    warnings = []
    n_pos = int(data.labels.sum())
    if n_pos == 0 or n_pos == len(examples):
        msg = f"training data has {'no positive' if n_pos == 0 else 'no negative'} examples"
        log.warning(msg)
        warnings.append(msg)

    params = init_params(net.param_specs(), config.seed)
    state = adam_init(params)
    n = len(examples)
    groups = _doc_groups(examples)
    history = []
    for epoch in range(config.epochs):
        order = epoch_order(groups, config.seed, epoch)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch, y = data.batch(idx)
            loss, grads = loss_and_grads(net, params, batch, y)
            params, state = adam_step(params, grads, state, config.learning_rate)
            total += loss * len(idx)
        history.append(total / n)
        if progress is not None:
            progress(epoch, history[-1])
    return TrainResult(params=params, history=history, warnings=warnings)


@dataclass
class TrainedModel:
    """A network, its learned parameters, and what is needed to featurise new input."""

    net: object
    params: ModelParams
    config: HyperConfig
    embeddings: EmbeddingTable
    threshold: float = 0.5
    extra: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.net.kind

    def metadata(self) -> dict:
        meta = {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "selection": asdict(self.net.selection),
            "embedding_dim": self.net.embedding_dim,
            "seed": self.config.seed,
            "threshold": self.threshold,
        }
        meta.update(self.extra)
        return meta

    def _forward(self, batch):
        p, _ = self.net.forward(self.params, batch)
        return p

    def mention_scores(self, doc: CorpusDocument, chunk: int = 512) -> dict[str, float]:
        """Non-singleton probability for every mention of `doc`."""
        if self.kind != "singleton":
            raise TypeError("mention_scores needs a singleton model")
        table = MentionTable([doc], self.embeddings, self.config.min_word_len)
        out = {}
        ids = [m.id for m in doc.mentions]
        for s in range(0, len(ids), chunk):
            rows = np.arange(s, min(s + chunk, len(ids)))
            for mid, p in zip(ids[s:s + chunk], self._forward(table.gather(rows))):
                out[mid] = float(p)
        return out

    def pair_scores(self, doc: CorpusDocument, chunk: int = 512) -> dict[tuple[str, str], float]:
        """Coreference confidence for every (earlier, later) mention pair of `doc`."""
        if self.kind != "coref":
            raise TypeError("pair_scores needs a coreference model")
        table = MentionTable([doc], self.embeddings, self.config.min_word_len)
        ms = doc.mentions
        pairs = [(i, j) for j in range(len(ms)) for i in range(j)]
        out = {}
        for s in range(0, len(pairs), chunk):
            part = pairs[s:s + chunk]
            a = np.array([i for i, _ in part], dtype=np.int64)
            b = np.array([j for _, j in part], dtype=np.int64)
            vecs = [pair_features(doc, ms[i], ms[j]).as_vector() for i, j in part]
            for (i, j), p in zip(part, self._forward(pair_batch(table, a, b, vecs))):
                out[(ms[i].id, ms[j].id)] = float(p)
        return out

    def scorer(self):
        """A (doc, antecedent, anaphor) -> confidence callable that scores each document once."""
        cache: dict[str, dict] = {}

        def score(doc, antecedent, anaphor):
            if doc.doc_id not in cache:
                cache[doc.doc_id] = self.pair_scores(doc)
            try:
                return cache[doc.doc_id][(antecedent.id, anaphor.id)]
            except KeyError:
                raise ValueError(f"{doc.doc_id}: {antecedent.id} does not precede {anaphor.id}") from None

        return score


def predict_singleton(model: TrainedModel, doc: CorpusDocument, mention: Mention) -> float:
    """Probability that `mention` is NOT a singleton."""
    table = MentionTable([doc], model.embeddings, model.config.min_word_len)
    return float(model._forward(table.gather([table.row(doc.doc_id, mention.id)]))[0])


def score_pair(model: TrainedModel, doc: CorpusDocument, antecedent: Mention, anaphor: Mention) -> float:
    feats = pair_features(doc, antecedent, anaphor)  # raises on order violation
    table = MentionTable([doc], model.embeddings, model.config.min_word_len)
    batch = pair_batch(table, [table.row(doc.doc_id, antecedent.id)], [table.row(doc.doc_id, anaphor.id)],
                       feats.as_vector())
    return float(model._forward(batch)[0])


def train_singleton_classifier(docs, embeddings, config, selection=None, threshold=0.5, progress=None):
    selection = selection or FeatureGroupSelection()
    net = build_singleton_model(config, selection, embeddings.dim)
    result = train(net, singleton_examples(docs), docs, embeddings, config, progress)
    return TrainedModel(net, result.params, config, embeddings, threshold), result


def train_coref_classifier(docs, embeddings, config, pairs: list[PairExample], progress=None, extra=None):
    net = build_coref_model(config, embeddings.dim)
    result = train(net, pairs, docs, embeddings, config, progress)
    return TrainedModel(net, result.params, config, embeddings, extra=dict(extra or {})), result


# -- evaluation -------------------------------------------------------------

def binary_f1_report(y_true, y_pred) -> dict:
    """Per-class F1 for non-singleton (1) and singleton (0), and their support-weighted mean."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)

    def f1(cls):
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = int(np.sum((y_pred != cls) & (y_true == cls)))
        return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)

    support1 = int(np.sum(y_true == 1))
    support0 = int(np.sum(y_true == 0))
    f_non, f_single = f1(1), f1(0)
    total = support0 + support1
    weighted = (f_non * support1 + f_single * support0) / total if total else 0.0
    return {"non_singleton_f1": f_non, "singleton_f1": f_single, "weighted_f1": weighted,
            "support_non_singleton": support1, "support_singleton": support0}


def evaluate_singleton(model: TrainedModel, docs) -> dict:
    y_true, y_pred = [], []
    for doc in docs:
        singles = gold_singletons(doc)
        scores = model.mention_scores(doc)
        for m in doc.mentions:
            y_true.append(int(m.id not in singles))
            y_pred.append(int(scores[m.id] >= model.threshold))
    return binary_f1_report(y_true, y_pred)


def singleton_feature_group_sweep(train_docs, test_docs, embeddings, configs, progress=None) -> list[dict]:
    """Train and score one singleton classifier per (config, feature-group selection)."""
    if isinstance(configs, HyperConfig):
        configs = [configs]
    rows = []
    for config in configs:
        for group, selection in SELECTIONS.items():
            model, _ = train_singleton_classifier(train_docs, embeddings, config, selection)
            report = evaluate_singleton(model, test_docs)
            rows.append({"preset": config.preset, "feature_groups": group, **report})
            if progress is not None:
                progress(rows[-1])
    return rows


# -- persistence ------------------------------------------------------------

def save_model(model: TrainedModel, path) -> None:
    """Write `path` (KNN1 parameters) and `path` + '.json' (metadata)."""
    path = Path(path)
    model.params.save(path)
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(model.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path, embeddings: EmbeddingTable) -> TrainedModel:
    path = Path(path)
    with open(str(path) + ".json", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta["embedding_dim"] != embeddings.dim:
        raise ValueError(
            f"model {path} expects {meta['embedding_dim']}-dimensional embeddings, got {embeddings.dim}")
    config = HyperConfig.from_dict(meta["config"])
    if meta["kind"] == "singleton":
        net = build_singleton_model(config, FeatureGroupSelection(**meta["selection"]), embeddings.dim)
    elif meta["kind"] == "coref":
        net = build_coref_model(config, embeddings.dim)
    else:
        raise ValueError(f"unknown model kind {meta['kind']!r}")
    params = ModelParams.load(path)
    expected = {s.name: s.shape for s in net.param_specs()}
    if params.shapes() != expected:
        raise ValueError(f"parameter shapes in {path} do not match the {meta['kind']} topology")
    known = {"kind", "config", "selection", "embedding_dim", "seed", "threshold"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return TrainedModel(net, params, config, embeddings, meta["threshold"], extra)

