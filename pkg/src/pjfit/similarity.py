"""Pluggable document similarity functions for graph edge weights.

Six kinds: cosine of a recurrent encoder (untrained or supervised), and
four word-vector schemes (plain mean, idf-weighted mean, smooth inverse
frequency with principal-component removal, relaxed word-mover distance).
All are symmetric; statistics (idf tables, word frequencies, the removed
component) are fitted on the training split only and serialize to JSON.
"""

from __future__ import annotations

import json

import numpy as np

from .autodiff import Parameter, Tape, Tensor, backward, gather, gather_rows, reshape, sqrt
from .encoders import PAD, AttentionPool, BiGRU, batch_sentences, init_param

SIM_KINDS = ("encoder-cosine", "mean", "tfidf", "sif", "wmd", "supervised")


def flatten(doc):
    """Whole-document token stream: sentences joined in order."""
    return [tok for sentence in doc for tok in sentence]


def cosine(u, v):
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class WordVectors:
    """Frozen Gaussian word vectors, deterministic given (vocab, seed)."""

    def __init__(self, vocab, dim=32, seed=0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.matrix = rng.normal(0.0, 1.0, size=(len(vocab), dim))
        self.matrix[PAD] = 0.0
        self.vocab = vocab

    def rows(self, token_ids):
        return self.matrix[np.asarray(token_ids, dtype=np.int64)]


def _require_nonempty(doc_a, doc_b, kind):
    if not flatten(doc_a) or not flatten(doc_b):
        raise ValueError(f"{kind}: documents must be nonempty after tokenization")


class MeanSimilarity:
    """Cosine of unweighted average word vectors."""

    kind = "mean"

    def __init__(self, word_vectors):
        self.wv = word_vectors

    def fit(self, docs):
        return self

    def _embed(self, doc):
        return self.wv.rows(flatten(doc)).mean(axis=0)

    def similarity(self, doc_a, doc_b):
        _require_nonempty(doc_a, doc_b, self.kind)
        return cosine(self._embed(doc_a), self._embed(doc_b))

    def to_state(self):
        return {"kind": self.kind}

    def load_state(self, state):
        return self


class TfidfSimilarity:
    """Cosine of idf-weighted average word vectors."""

    kind = "tfidf"

    def __init__(self, word_vectors):
        self.wv = word_vectors
        self.idf = None

    def fit(self, docs):
        n_docs = 0
        df = {}
        for doc in docs:
            n_docs += 1
            for tok in set(flatten(doc)):
                df[tok] = df.get(tok, 0) + 1
        self.idf = np.full(len(self.wv.vocab), np.log(1.0 + n_docs) + 1.0)
        for tok, count in df.items():
            self.idf[tok] = np.log((1.0 + n_docs) / (1.0 + count)) + 1.0
        return self

    def _embed(self, doc):
        ids = np.asarray(flatten(doc), dtype=np.int64)
        w = self.idf[ids][:, None]
        return (self.wv.rows(ids) * w).sum(axis=0) / max(w.sum(), 1e-12)

    def similarity(self, doc_a, doc_b):
        if self.idf is None:
            raise RuntimeError("tfidf: fit() must run on the training split first")
        _require_nonempty(doc_a, doc_b, self.kind)
        return cosine(self._embed(doc_a), self._embed(doc_b))

    def to_state(self):
        return {"kind": self.kind, "idf": self.idf.tolist()}

    def load_state(self, state):
        self.idf = np.asarray(state["idf"])
        return self


class SifSimilarity:
    """Smooth-inverse-frequency weighting with removal of the dominant
    direction of the fitted corpus embeddings."""

    kind = "sif"

    def __init__(self, word_vectors, a=1e-3):
        self.wv = word_vectors
        self.a = a
        self.probs = None
        self.component = None

    def fit(self, docs):
        counts = np.zeros(len(self.wv.vocab))
        for doc in docs:
            for tok in flatten(doc):
                counts[tok] += 1
        total = counts.sum()
        self.probs = counts / total if total > 0 else counts
        embeddings = [self._weighted(doc) for doc in docs if flatten(doc)]
        if len(embeddings) >= 2:
            X = np.stack(embeddings)
            # dominant right singular vector of the centered-free embedding set
            _, _, vt = np.linalg.svd(X, full_matrices=False)
            self.component = vt[0]
        else:
            self.component = None  # degenerate covariance: removal skipped
        return self

    def _weighted(self, doc):
        ids = np.asarray(flatten(doc), dtype=np.int64)
        w = (self.a / (self.a + self.probs[ids]))[:, None]
        return (self.wv.rows(ids) * w).mean(axis=0)

    def _embed(self, doc):
        e = self._weighted(doc)
        if self.component is not None:
            e = e - self.component * np.dot(self.component, e)
        return e

    def similarity(self, doc_a, doc_b):
        if self.probs is None:
            raise RuntimeError("sif: fit() must run on the training split first")
        _require_nonempty(doc_a, doc_b, self.kind)
        return cosine(self._embed(doc_a), self._embed(doc_b))

    def to_state(self):
        return {
            "kind": self.kind,
            "a": self.a,
            "probs": self.probs.tolist(),
            "component": None if self.component is None else self.component.tolist(),
        }

    def load_state(self, state):
        self.a = state["a"]
        self.probs = np.asarray(state["probs"])
        self.component = None if state["component"] is None else np.asarray(state["component"])
        return self


class RelaxedWmdSimilarity:
    """Relaxed word-mover bound (each word moves to its nearest counterpart,
    tighter direction kept), mapped to similarity as 1/(1+distance)."""

    kind = "wmd"

    def __init__(self, word_vectors):
        self.wv = word_vectors

    def fit(self, docs):
        return self

    @staticmethod
    def _nbow(ids):
        uniq, counts = np.unique(ids, return_counts=True)
        return uniq, counts / counts.sum()

    def distance(self, doc_a, doc_b):
        ids_a = np.asarray(flatten(doc_a), dtype=np.int64)
        ids_b = np.asarray(flatten(doc_b), dtype=np.int64)
        ua, wa = self._nbow(ids_a)
        ub, wb = self._nbow(ids_b)
        xa = self.wv.matrix[ua]
        xb = self.wv.matrix[ub]
        d2 = ((xa[:, None, :] - xb[None, :, :]) ** 2).sum(axis=2)
        dmat = np.sqrt(np.maximum(d2, 0.0))
        ab = float((wa * dmat.min(axis=1)).sum())
        ba = float((wb * dmat.min(axis=0)).sum())
        return max(ab, ba)

    def similarity(self, doc_a, doc_b):
        _require_nonempty(doc_a, doc_b, self.kind)
        return 1.0 / (1.0 + self.distance(doc_a, doc_b))

    def to_state(self):
        return {"kind": self.kind}

    def load_state(self, state):
        return self


class TextRecurrentEncoder:
    """Bidirectional recurrent encoder with attention pooling over a flat
    token stream; used by the encoder-cosine and supervised kinds."""

    def __init__(self, vocab_size, word_dim=16, hidden=16, seed=0, max_tokens=200):
        rng = np.random.default_rng(seed)
        self.max_tokens = max_tokens
        self.embedding = init_param("simenc.embedding", (vocab_size, word_dim), rng)
        self.embedding.value.data[PAD] = 0.0
        self.rnn = BiGRU("simenc.rnn", word_dim, hidden, rng)
        self.pool = AttentionPool("simenc.pool", 2 * hidden, rng)
        self.scale = Parameter("simenc.scale", np.array(5.0))
        self.bias = Parameter("simenc.bias", np.array(0.0))

    def parameters(self):
        return [self.embedding] + self.rnn.parameters() + self.pool.parameters() + [self.scale, self.bias]

    def encode_batch(self, token_lists):
        clipped = [t[: self.max_tokens] for t in token_lists]
        batch = batch_sentences(clipped)
        emb = gather(self.embedding.value, batch.indices) * Tensor(batch.mask[:, :, None])
        states = self.rnn(emb, batch.lengths)
        pooled, _ = self.pool(states, batch.lengths)
        return pooled  # [batch, 2*hidden]

    def encode(self, tokens):
        return self.encode_batch([tokens]).data[0]

    def state_arrays(self):
        return {p.name: p.value.data for p in self.parameters()}

    def load_arrays(self, arrays):
        for p in self.parameters():
            p.value.data[...] = np.asarray(arrays[p.name])


def _cosine_t(u, v):
    dot = (u * v).sum()
    nu = (u * u).sum()
    nv = (v * v).sum()
    return dot / sqrt(nu * nv + 1e-12)


class EncoderCosineSimilarity:
    """Cosine of recurrent-encoder representations.  Untrained by default;
    the supervised kind trains the same encoder on co-application pairs."""

    kind = "encoder-cosine"

    def __init__(self, vocab, seed=0, word_dim=16, hidden=16):
        self._init = (len(vocab), word_dim, hidden, seed)
        self.encoder = TextRecurrentEncoder(len(vocab), word_dim, hidden, seed)
        self.trained = False
        self.valid_accuracy = None

    def fit(self, docs):
        return self

    def similarity(self, doc_a, doc_b):
        _require_nonempty(doc_a, doc_b, self.kind)
        return cosine(self.encoder.encode(flatten(doc_a)), self.encoder.encode(flatten(doc_b)))

    def to_state(self):
        return {
            "kind": self.kind,
            "init": list(self._init),
            "trained": self.trained,
            "valid_accuracy": self.valid_accuracy,
            "arrays": {k: v.tolist() for k, v in self.encoder.state_arrays().items()},
        }

    def load_state(self, state):
        self.trained = state["trained"]
        self.valid_accuracy = state["valid_accuracy"]
        self.encoder.load_arrays(state["arrays"])
        return self


class SupervisedEncoderSimilarity(EncoderCosineSimilarity):
    """Encoder-cosine kind whose twin encoder was trained on labeled
    co-application pairs (see :func:`train_similarity_encoder`)."""

    kind = "supervised"


def build_co_application_pairs(labeled_pairs, job_docs, resume_docs, rng, max_pairs=2000):
    """Twin-training pairs from entities that co-applied.

    Two resumes that applied to the same job form a pair: label 1 when both
    applications succeeded, 0 when exactly one did (both-failed pairs carry
    no signal and are skipped).  Job pairs sharing a resume are built the
    same way.  Returns a list of (tokens_a, tokens_b, label).
    """
    by_job = {}
    by_resume = {}
    for job_id, resume_id, y in labeled_pairs:
        by_job.setdefault(job_id, []).append((resume_id, y))
        by_resume.setdefault(resume_id, []).append((job_id, y))

    def side_pairs(groups, docs):
        out = []
        for _, members in sorted(groups.items()):
            members = sorted(members)
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    (ida, ya), (idb, yb) = members[i], members[j]
                    if ya == 1 and yb == 1:
                        label = 1
                    elif ya != yb:
                        label = 0
                    else:
                        continue
                    out.append((flatten(docs[ida]), flatten(docs[idb]), label))
        return out

    pairs = side_pairs(by_job, resume_docs) + side_pairs(by_resume, job_docs)
    pairs = [p for p in pairs if p[0] and p[1]]
    if len(pairs) > max_pairs:
        keep = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[i] for i in sorted(keep)]
    return pairs


def train_similarity_encoder(pairs, vocab, seed=0, epochs=5, lr=1e-2, batch_size=16,
                             word_dim=16, hidden=16):
    """Train the twin encoder with BCE on sigmoid(scale * cosine + bias).

    ``pairs`` is a list of (tokens_a, tokens_b, label).  Uses a 4:1
    train/valid split; returns a frozen SupervisedEncoderSimilarity with
    ``valid_accuracy`` filled in.
    """
    from .training import adam_step  # deferred: training imports similarity

    labels = {y for _, _, y in pairs}
    if len(labels) < 2:
        raise ValueError("train_similarity_encoder: need both classes present")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    n_valid = max(1, len(pairs) // 5)
    valid_idx = order[:n_valid]
    train_idx = order[n_valid:]

    sim = SupervisedEncoderSimilarity(vocab, seed=seed, word_dim=word_dim, hidden=hidden)
    enc = sim.encoder
    params = enc.parameters()
    step = 0
    for _ in range(epochs):
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(perm), batch_size):
            chunk = [pairs[train_idx[i]] for i in perm[start:start + batch_size]]
            step += 1
            for p in params:
                p.zero_grad()
            with Tape() as tape:
                lefts = enc.encode_batch([a for a, _, _ in chunk])
                rights = enc.encode_batch([b for _, b, _ in chunk])
                losses = []
                for i, (_, _, y) in enumerate(chunk):
                    u = reshape(gather_rows(lefts, [i]), (lefts.shape[1],))
                    v = reshape(gather_rows(rights, [i]), (rights.shape[1],))
                    c = _cosine_t(u, v)
                    yhat = (enc.scale.value * c + enc.bias.value).sigmoid()
                    yhat = yhat.clip(1e-7, 1.0 - 1e-7)
                    losses.append(-(yhat.log()) if y == 1 else -((1.0 - yhat).log()))
                total = losses[0]
                for extra in losses[1:]:
                    total = total + extra
                loss = total * (1.0 / len(chunk))
                backward(tape, loss, params)
            adam_step(params, lr=lr, weight_decay=0.0, t=step)

    correct = 0
    for i in valid_idx:
        a, b, y = pairs[i]
        pred = sim.similarity([a], [b])
        logit = enc.scale.value.data * pred + enc.bias.value.data
        yhat = 1.0 / (1.0 + np.exp(-logit))
        correct += int((yhat >= 0.5) == (y == 1))
    sim.trained = True
    sim.valid_accuracy = correct / len(valid_idx)
    return sim


def make_similarity(kind, vocab, seed=0, word_vector_dim=32):
    """Construct an unfitted similarity function of the given kind."""
    if kind in ("mean", "tfidf", "sif", "wmd"):
        wv = WordVectors(vocab, dim=word_vector_dim, seed=seed)
        return {
            "mean": MeanSimilarity,
            "tfidf": TfidfSimilarity,
            "sif": SifSimilarity,
            "wmd": RelaxedWmdSimilarity,
        }[kind](wv)
    if kind == "encoder-cosine":
        return EncoderCosineSimilarity(vocab, seed=seed)
    if kind == "supervised":
        return SupervisedEncoderSimilarity(vocab, seed=seed)
    raise ValueError(f"unknown similarity kind {kind!r}; choose from {SIM_KINDS}")


def similarity_state_json(sim):
    return json.dumps(sim.to_state())


def similarity_from_json(text, vocab, seed=0, word_vector_dim=32):
    state = json.loads(text)
    sim = make_similarity(state["kind"], vocab, seed=seed, word_vector_dim=word_vector_dim)
    return sim.load_state(state)
