"""Text encoders: vocabulary, embedding lookup, bidirectional gated
recurrence with attention pooling, and a two-level document encoder.

The document encoder reads each sentence with a word-level bidirectional
recurrent pass pooled by attention, then runs a sentence-level recurrent
pass over the pooled vectors, pools again, and projects to the output
width.  The recurrent cell is a gated (update/reset) cell in both
directions rather than an LSTM; ``cell="gru"`` in the config records this.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Parameter,
    ShapeError,
    Tensor,
    concat,
    dropout,
    gather,
    masked_softmax,
    reshape,
    tanh,
)
from .kernels.op import gru_sequence

PAD = 0
UNK = 1


def init_param(name, shape, rng, scale=0.1):
    """Gaussian(0, scale) initialization shared by every trainable array."""
    return Parameter(name, rng.normal(0.0, scale, size=shape))


class Vocabulary:
    """Token-to-index mapping; 0 is padding, 1 is the unknown token."""

    def __init__(self, tokens):
        self._tokens = list(tokens)
        self._index = {t: i + 2 for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def from_documents(cls, documents, min_count=1):
        """Deterministic vocabulary: sorted by (-frequency, token)."""
        counts = {}
        for doc in documents:
            for sentence in doc:
                for tok in sentence:
                    counts[tok] = counts.get(tok, 0) + 1
        kept = sorted(
            (t for t, c in counts.items() if c >= min_count),
            key=lambda t: (-counts[t], t),
        )
        return cls(kept)

    def __len__(self):
        return len(self._tokens) + 2

    def __contains__(self, token):
        return token in self._index

    @property
    def tokens(self):
        return list(self._tokens)

    def index(self, token):
        return self._index.get(token, UNK)

    def encode(self, tokens):
        return [self._index.get(t, UNK) for t in tokens]

    def content_hash(self):
        h = hashlib.sha256()
        for t in self._tokens:
            h.update(t.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


@dataclass
class SentenceBatch:
    """Padded token-index matrix with per-row true lengths."""

    indices: np.ndarray  # int64 [batch, max_len]
    lengths: np.ndarray  # int64 [batch]

    @property
    def mask(self):
        steps = np.arange(self.indices.shape[1])
        return (steps[None, :] < self.lengths[:, None]).astype(np.float64)


def batch_sentences(sentences):
    """Pad a list of token-id lists into a SentenceBatch."""
    if not sentences:
        raise ShapeError("batch_sentences: need at least one sentence")
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    if (lengths == 0).any():
        raise ShapeError("batch_sentences: empty sentence")
    max_len = int(lengths.max())
    idx = np.zeros((len(sentences), max_len), dtype=np.int64)
    for i, s in enumerate(sentences):
        idx[i, : len(s)] = s
    return SentenceBatch(idx, lengths)


def embed(batch, table):
    """Row-gather word vectors; padding positions map to zero vectors."""
    rows = gather(table.value, batch.indices)
    return rows * Tensor(batch.mask[:, :, None])


def load_pretrained_embeddings(path, vocab, dim):
    """Read "token v1 v2 ..." lines; returns (matrix [V, dim], hit count).

    Rows for tokens absent from the file are left at zero; the caller
    merges them with its random initialization.  Row 0 stays zero.
    """
    matrix = np.zeros((len(vocab), dim))
    found = np.zeros(len(vocab), dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected token + {dim} values, got {len(parts) - 1}")
            if parts[0] in vocab:
                idx = vocab.index(parts[0])
                matrix[idx] = [float(v) for v in parts[1:]]
                found[idx] = True
    return matrix, found


class BiGRU:
    """Forward + backward gated recurrence, states concatenated per step."""

    def __init__(self, name, input_dim, hidden, rng):
        self.hidden = hidden
        self.fwd = [
            init_param(f"{name}.fwd.Wx", (input_dim, 3 * hidden), rng),
            init_param(f"{name}.fwd.Wh", (hidden, 3 * hidden), rng),
            init_param(f"{name}.fwd.b", (3 * hidden,), rng),
        ]
        self.bwd = [
            init_param(f"{name}.bwd.Wx", (input_dim, 3 * hidden), rng),
            init_param(f"{name}.bwd.Wh", (hidden, 3 * hidden), rng),
            init_param(f"{name}.bwd.b", (3 * hidden,), rng),
        ]

    def parameters(self):
        return self.fwd + self.bwd

    def __call__(self, x, lengths):
        f = gru_sequence(x, *(p.value for p in self.fwd), lengths, reverse=False)
        b = gru_sequence(x, *(p.value for p in self.bwd), lengths, reverse=True)
        return concat([f, b], axis=2)


class AttentionPool:
    """Score each step with v'tanh(W s), softmax over unmasked steps, sum."""

    def __init__(self, name, dim, rng):
        self.W = init_param(f"{name}.W", (dim, dim), rng)
        self.v = init_param(f"{name}.v", (dim,), rng)

    def parameters(self):
        return [self.W, self.v]

    def __call__(self, states, lengths):
        B, T, D = states.shape
        flat = reshape(states, (B * T, D))
        scores = (tanh(flat @ self.W.value.T) * self.v.value).sum(axis=1)
        scores = reshape(scores, (B, T))
        steps = np.arange(T)
        mask = (steps[None, :] < np.asarray(lengths)[:, None]).astype(np.float64)
        weights = masked_softmax(scores, mask)
        pooled = (states * reshape(weights, (B, T, 1))).sum(axis=1)
        return pooled, weights


class DocumentEncoder:
    """Two-level (word -> sentence -> document) encoder with a final
    projection to ``out_dim``."""

    def __init__(self, name, vocab_size, word_dim, word_hidden, sent_hidden, out_dim, rng):
        self.word_dim = word_dim
        self.out_dim = out_dim
        self.embedding = init_param(f"{name}.embedding", (vocab_size, word_dim), rng)
        self.embedding.value.data[PAD] = 0.0
        self.word_rnn = BiGRU(f"{name}.word", word_dim, word_hidden, rng)
        self.word_pool = AttentionPool(f"{name}.word_pool", 2 * word_hidden, rng)
        self.sent_rnn = BiGRU(f"{name}.sent", 2 * word_hidden, sent_hidden, rng)
        self.sent_pool = AttentionPool(f"{name}.sent_pool", 2 * sent_hidden, rng)
        self.proj_W = init_param(f"{name}.proj.W", (out_dim, 2 * sent_hidden), rng)
        self.proj_b = init_param(f"{name}.proj.b", (out_dim,), rng)

    def parameters(self):
        return (
            [self.embedding]
            + self.word_rnn.parameters()
            + self.word_pool.parameters()
            + self.sent_rnn.parameters()
            + self.sent_pool.parameters()
            + [self.proj_W, self.proj_b]
        )

    def _sentence_vectors(self, batch, dropout_p=0.0, rng=None):
        emb = embed(batch, self.embedding)
        if dropout_p > 0.0:
            emb = dropout(emb, dropout_p, rng)
        states = self.word_rnn(emb, batch.lengths)
        pooled, _ = self.word_pool(states, batch.lengths)
        return pooled  # [batch, 2*word_hidden]

    def encode_sentence_batch(self, batch, dropout_p=0.0, rng=None):
        """Encode each sentence as its own single-sentence document."""
        vecs = self._sentence_vectors(batch, dropout_p, rng)
        B, D = vecs.shape
        seq = reshape(vecs, (B, 1, D))
        ones = np.ones(B, dtype=np.int64)
        states = self.sent_rnn(seq, ones)
        pooled, _ = self.sent_pool(states, ones)
        return pooled @ self.proj_W.value.T + self.proj_b.value

    def encode_document(self, sentences, dropout_p=0.0, rng=None):
        """Encode a multi-sentence document (list of token-id lists)."""
        if not sentences:
            raise ShapeError("encode_document: empty document")
        batch = batch_sentences(sentences)
        vecs = self._sentence_vectors(batch, dropout_p, rng)
        S, D = vecs.shape
        seq = reshape(vecs, (1, S, D))
        lengths = np.array([S], dtype=np.int64)
        states = self.sent_rnn(seq, lengths)
        pooled, _ = self.sent_pool(states, lengths)
        out = pooled @ self.proj_W.value.T + self.proj_b.value
        return reshape(out, (self.out_dim,))
