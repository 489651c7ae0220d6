"""Word vectors in word2vec text format."""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

PAD = "<PAD>"


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Lowercased vocabulary mapped to rows of a (V, dim) float64 matrix.

    Unknown tokens and PAD resolve to the all-zero vector.  `padded` is the
    matrix with that zero row appended at index `vocab_size`, which is what
    the feature extractor gathers from.
    """

    dim: int
    vocab: dict
    matrix: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise EmbeddingError("dim must be positive")
        if self.matrix.shape != (len(self.vocab), self.dim):
            raise EmbeddingError(f"matrix shape {self.matrix.shape} does not match vocab/dim")
        if not np.all(np.isfinite(self.matrix)):
            raise EmbeddingError("embedding matrix contains non-finite values")
        self.matrix.setflags(write=False)
        padded = np.vstack([self.matrix, np.zeros((1, self.dim))])
        padded.setflags(write=False)
        object.__setattr__(self, "padded", padded)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def zero_index(self) -> int:
        return len(self.vocab)

    def index(self, token: str) -> int:
        if token == PAD:
            return self.zero_index
        return self.vocab.get(token.lower(), self.zero_index)

    def lookup(self, token: str) -> np.ndarray:
        return self.padded[self.index(token)].copy()


def lookup(table: EmbeddingTable, token: str) -> np.ndarray:
    return table.lookup(token)


def load_word2vec_text(stream: IO) -> EmbeddingTable:
    """Read the "V D" header followed by V lines of "word v1 ... vD"."""
    lines = [(raw.decode("utf-8") if isinstance(raw, bytes) else raw).rstrip("\r\n") for raw in stream]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise EmbeddingError("empty embedding file")
    header = lines[0].split()
    if len(header) != 2:
        raise EmbeddingError(f"bad header {lines[0]!r}; expected 'V D'")
    try:
        n_words, dim = int(header[0]), int(header[1])
    except ValueError:
        raise EmbeddingError(f"bad header {lines[0]!r}; expected 'V D'") from None
    body = lines[1:]
    if len(body) != n_words:
        raise EmbeddingError(f"header declares {n_words} words but file has {len(body)} vector lines")

    vocab: dict[str, int] = {}
    rows = []
    for lineno, line in enumerate(body, 2):
        parts = line.split(" ")
        parts = [p for p in parts if p]
        if len(parts) - 1 != dim:
            raise EmbeddingError(f"line {lineno}: expected {dim} components, got {len(parts) - 1}")
        try:
            vec = [float(x) for x in parts[1:]]
        except ValueError:
            raise EmbeddingError(f"line {lineno}: non-numeric component") from None
        word = parts[0].lower()
        if word in vocab:
            continue
        vocab[word] = len(rows)
        rows.append(vec)
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(dim=dim, vocab=vocab, matrix=matrix)


def load_embeddings(path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        return load_word2vec_text(fh)


def save_word2vec_text(table: EmbeddingTable, stream: IO[str]) -> None:
    words = sorted(table.vocab, key=table.vocab.__getitem__)
    stream.write(f"{len(words)} {table.dim}\n")
    for w in words:
        stream.write(w + " " + " ".join(repr(float(x)) for x in table.matrix[table.vocab[w]]) + "\n")


def random_table(seed: int, words: Iterable[str], dim: int) -> EmbeddingTable:
    """Uniform random vectors in [-0.5/dim, 0.5/dim], one per distinct lowercased word."""
    if dim < 1:
        raise EmbeddingError("dim must be >= 1")
    vocab: dict[str, int] = {}
    for w in words:
        vocab.setdefault(w.lower(), len(vocab))
    if not vocab:
        raise EmbeddingError("random_table needs at least one word")
    rng = np.random.default_rng(seed)
    bound = 0.5 / dim
    matrix = rng.uniform(-bound, bound, size=(len(vocab), dim))
    return EmbeddingTable(dim=dim, vocab=vocab, matrix=matrix)
