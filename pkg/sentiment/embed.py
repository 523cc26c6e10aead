"""
word2vec embeddings trained on the ingested corpus.

Both modes use negative sampling with noise words drawn from the unigram
distribution raised to 0.75. Loss per training example:

    -log s(u_ctx . h) - sum_neg log s(-u_neg . h)

where ``h`` is the centre word's input vector (skip-gram) or the mean of the
context words' input vectors (CBOW), ``u`` are output vectors and ``s`` the
logistic function.
"""
import hashlib
import json
import logging
import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError

from .exceptions import ArtifactFormatError, DataError
from .models import EmbedMode
from .vectorize import Vocabulary

logger = logging.getLogger(__name__)

MODEL_MAGIC = b'W2VSENT1'
NOISE_POWER = 0.75


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    min_count: int = 5
    mode: EmbedMode = EmbedMode.SKIPGRAM
    seed: int = 1
    shrink_window: bool = False
    subsample: float = 0.0
    workers: int = 1
    doc_weighting: str = 'mean'

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if self.negatives < 1:
            raise ValidationError(f"negatives must be >= 1, got {self.negatives}")
        if not self.lr_start > self.lr_end > 0:
            raise ValidationError('learning rates must satisfy lr_start > lr_end > 0')
        if self.window < 1 or self.epochs < 0 or self.min_count < 1:
            raise ValidationError('window and min_count must be >= 1, epochs >= 0')
        if self.doc_weighting not in ('mean', 'tfidf'):
            raise ValidationError(f"unknown doc_weighting {self.doc_weighting!r}")
        object.__setattr__(self, 'mode', EmbedMode(self.mode))

    @classmethod
    def from_mapping(cls, mapping=None):
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in (mapping or {}).items() if k in known})

    def digest(self):
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


@dataclass
class EmbeddingModel:
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    vocab: Vocabulary
    config: EmbedConfig
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        rows = len(self.vocab)
        if self.input_vectors.shape != (rows, self.config.dim) or \
                self.output_vectors.shape != (rows, self.config.dim):
            raise ValidationError('vector tables must be V x dim and share vocabulary rows')

    def vector(self, word):
        try:
            return self.input_vectors[self.vocab.index[word]]
        except KeyError as exc:
            raise DataError(f"word {word!r} is not in the embedding vocabulary") from exc


@dataclass
class Gradients:
    """Per-row gradients; only rows touched by one example appear."""
    input: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def add(self, table, row, grad):
        target = self.input if table == 'input' else self.output
        if row in target:
            target[row] = target[row] + grad
        else:
            target[row] = grad.copy()


def _log_sigmoid_neg(x):
    """-log s(x), stable for large |x|."""
    return float(np.logaddexp(0.0, -x))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _negative_sampling(hidden, target, negatives, output_vectors):
    """Loss, d/dhidden and output-row gradients for one (hidden, target) pair."""
    grads = Gradients()
    u_pos = output_vectors[target]
    score = float(u_pos @ hidden)
    loss = _log_sigmoid_neg(score)
    coef = _sigmoid(score) - 1.0
    d_hidden = coef * u_pos
    grads.add('output', target, coef * hidden)
    for neg in negatives:
        u_neg = output_vectors[neg]
        score = float(u_neg @ hidden)
        loss += _log_sigmoid_neg(-score)
        coef = _sigmoid(score)
        d_hidden = d_hidden + coef * u_neg
        grads.add('output', neg, coef * hidden)
    return loss, d_hidden, grads


def sgns_loss_grad(center, context, negatives, model):
    if context in negatives:
        raise ValidationError('negative samples must differ from the context word')
    hidden = model.input_vectors[center]
    loss, d_hidden, grads = _negative_sampling(hidden, context, negatives, model.output_vectors)
    grads.add('input', center, d_hidden)
    return loss, grads


def cbow_loss_grad(context, target, negatives, model):
    context = list(context)
    if not context:
        return 0.0, Gradients()
    if target in negatives:
        raise ValidationError('negative samples must differ from the target word')
    hidden = model.input_vectors[context].mean(axis=0)
    loss, d_hidden, grads = _negative_sampling(hidden, target, negatives, model.output_vectors)
    share = d_hidden / len(context)
    for row in context:
        grads.add('input', row, share)
    return loss, grads


def sgd_step(model, grads, lr):
    for row, grad in grads.input.items():
        model.input_vectors[row] -= lr * grad
    for row, grad in grads.output.items():
        model.output_vectors[row] -= lr * grad


class NoiseSampler:
    """Draws word indices with probability proportional to count ** 0.75."""

    def __init__(self, counts, power=NOISE_POWER):
        weights = np.asarray(counts, dtype=np.float64) ** power
        self.probabilities = weights / weights.sum()
        self.cumulative = np.cumsum(self.probabilities)
        self.cumulative[-1] = 1.0

    def draw(self, rng, size):
        return np.searchsorted(self.cumulative, rng.random(size), side='right')

    def negatives(self, rng, k, exclude):
        drawn = []
        while len(drawn) < k:
            for index in self.draw(rng, k - len(drawn)).tolist():
                if index != exclude:
                    drawn.append(index)
        return drawn


def build_embedding_vocab(corpus, min_count):
    counts = Counter()
    df = Counter()
    for doc in corpus:
        counts.update(doc.tokens)
        df.update(set(doc.tokens))
    terms = sorted(t for t, c in counts.items() if c >= min_count)
    if not terms:
        raise DataError(f"no token occurs at least min_count={min_count} times")
    vocab = Vocabulary(terms, [df[t] for t in terms], len(corpus))
    return vocab, np.asarray([counts[t] for t in terms], dtype=np.int64)


def initialize(vocab, config, counts=None):
    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    input_vectors = rng.uniform(-bound, bound, size=(len(vocab), config.dim))
    output_vectors = np.zeros((len(vocab), config.dim))
    return EmbeddingModel(input_vectors, output_vectors, vocab, config, counts)


def _training_pairs(sentence, position, window, rng, shrink):
    span = int(rng.integers(1, window + 1)) if shrink else window
    start = max(0, position - span)
    return [j for j in range(start, min(len(sentence), position + span + 1)) if j != position]


class _Trainer:
    def __init__(self, model, sentences, sampler, total_words):
        self.model = model
        self.config = model.config
        self.sentences = sentences
        self.sampler = sampler
        self.total = max(1, total_words * self.config.epochs)
        self.processed = 0
        self.loss = 0.0
        counts = model.counts.astype(np.float64)
        self.keep = None
        if self.config.subsample > 0:
            freq = counts / counts.sum()
            threshold = self.config.subsample
            self.keep = np.minimum(1.0, np.sqrt(threshold / freq) + threshold / freq)

    def learning_rate(self):
        progress = min(1.0, self.processed / self.total)
        return self.config.lr_start - (self.config.lr_start - self.config.lr_end) * progress

    def run_shard(self, shard, rng):
        cfg = self.config
        for sentence in shard:
            if self.keep is not None:
                sentence = [w for w in sentence if rng.random() < self.keep[w]]
            for position, word in enumerate(sentence):
                lr = self.learning_rate()
                window = _training_pairs(sentence, position, cfg.window, rng, cfg.shrink_window)
                if cfg.mode == EmbedMode.SKIPGRAM:
                    for j in window:
                        negs = self.sampler.negatives(rng, cfg.negatives, sentence[j])
                        loss, grads = sgns_loss_grad(word, sentence[j], negs, self.model)
                        sgd_step(self.model, grads, lr)
                        self.loss += loss
                elif window:
                    negs = self.sampler.negatives(rng, cfg.negatives, word)
                    context = [sentence[j] for j in window]
                    loss, grads = cbow_loss_grad(context, word, negs, self.model)
                    sgd_step(self.model, grads, lr)
                    self.loss += loss
                self.processed += 1


def train(corpus, config):
    """
    Fit embeddings with window-based SGD.

    With ``config.workers == 1`` the result is a pure function of the corpus
    and seed. More workers train document shards concurrently without locks
    and are not reproducible.
    """
    corpus = list(corpus)
    vocab, counts = build_embedding_vocab(corpus, config.min_count)
    model = initialize(vocab, config, counts)
    sentences = [[vocab.index[t] for t in doc.tokens if t in vocab.index] for doc in corpus]
    sentences = [s for s in sentences if s]
    total_words = sum(len(s) for s in sentences)
    trainer = _Trainer(model, sentences, NoiseSampler(counts), total_words)

    rng = np.random.default_rng(config.seed + 1)
    for epoch in range(config.epochs):
        trainer.loss = 0.0
        if config.workers <= 1:
            trainer.run_shard(sentences, rng)
        else:
            shards = [sentences[i::config.workers] for i in range(config.workers)]
            seeds = rng.integers(0, 2 ** 32, size=len(shards))
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                list(pool.map(
                    lambda args: trainer.run_shard(args[0], np.random.default_rng(args[1])),
                    zip(shards, seeds.tolist()),
                ))
        logger.info("embed epoch %d/%d (%s): loss %.4f", epoch + 1, config.epochs,
                    config.mode.label, trainer.loss)
    return model


def _cosines(model, query):
    table = model.input_vectors
    norms = np.linalg.norm(table, axis=1)
    qnorm = np.linalg.norm(query)
    denom = norms * qnorm
    return np.divide(table @ query, denom, out=np.zeros(len(table)), where=denom > 0)


def nearest(model, word, k=10):
    """Top-k words by cosine over input vectors; ties go to the lower index."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query = model.vector(word)
    sims = _cosines(model, query)
    query_index = model.vocab.index[word]
    candidates = np.array([i for i in range(len(sims)) if i != query_index], dtype=np.int64)
    order = candidates[np.lexsort((candidates, -sims[candidates]))][:k]
    return [(model.vocab.terms[i], float(sims[i])) for i in order]


def doc_vector(doc, model, weights=None):
    """
    Mean of the input vectors of in-vocabulary tokens.

    Returns ``(vector, empty)``; ``empty`` is True for documents with no
    in-vocabulary token, whose vector is all zeros. ``weights`` (term ->
    weight) turns the mean into a weighted mean.
    """
    rows, coefs = [], []
    for token in doc.tokens:
        index = model.vocab.index.get(token)
        if index is None:
            continue
        rows.append(index)
        coefs.append(1.0 if weights is None else float(weights.get(token, 0.0)))
    if not rows or sum(coefs) <= 0:
        return np.zeros(model.config.dim), True
    coefs = np.asarray(coefs)
    return (coefs @ model.input_vectors[rows]) / coefs.sum(), False


def save_model(model, path):
    """Binary layout, little-endian: magic, header, config JSON, terms, two float32 tables."""
    cfg = model.config
    config_json = json.dumps(asdict(cfg), sort_keys=True, default=str).encode('utf-8')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('wb') as handle:
        handle.write(MODEL_MAGIC)
        handle.write(struct.pack('<IIIB', cfg.dim, len(model.vocab), model.vocab.n_docs,
                                 0 if cfg.mode == EmbedMode.SKIPGRAM else 1))
        handle.write(cfg.digest().encode('ascii'))
        handle.write(struct.pack('<I', len(config_json)))
        handle.write(config_json)
        counts = model.counts if model.counts is not None else model.vocab.df
        for term, df, count in zip(model.vocab.terms, model.vocab.df, counts):
            raw = term.encode('utf-8')
            handle.write(struct.pack('<HII', len(raw), int(df), int(count)))
            handle.write(raw)
        handle.write(model.input_vectors.astype('<f4').tobytes())
        handle.write(model.output_vectors.astype('<f4').tobytes())
    return path


def load_model(path):
    path = Path(path)
    with path.open('rb') as handle:
        if handle.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise ArtifactFormatError(f"{path} is not an embedding model file")
        dim, size, n_docs, mode_flag = struct.unpack('<IIIB', handle.read(13))
        digest = handle.read(64).decode('ascii')
        (config_len,) = struct.unpack('<I', handle.read(4))
        settings_map = json.loads(handle.read(config_len).decode('utf-8'))
        config = EmbedConfig.from_mapping(settings_map)
        if config.digest() != digest:
            raise ArtifactFormatError(f"{path}: config digest mismatch")
        terms, df, counts = [], [], []
        for _ in range(size):
            length, term_df, count = struct.unpack('<HII', handle.read(10))
            terms.append(handle.read(length).decode('utf-8'))
            df.append(term_df)
            counts.append(count)
        block = size * dim * 4
        input_vectors = np.frombuffer(handle.read(block), dtype='<f4').reshape(size, dim)
        output_vectors = np.frombuffer(handle.read(block), dtype='<f4').reshape(size, dim)
    expected = EmbedMode.SKIPGRAM if mode_flag == 0 else EmbedMode.CBOW
    if config.mode != expected:
        raise ArtifactFormatError(f"{path}: header mode disagrees with stored config")
    vocab = Vocabulary(terms, df, n_docs)
    return EmbeddingModel(
        input_vectors.astype(np.float64), output_vectors.astype(np.float64),
        vocab, config, np.asarray(counts, dtype=np.int64),
    )


def export_text(model, path):
    """``V dim`` header, then ``word f1 ... fdim`` per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        handle.write(f'{len(model.vocab)} {model.config.dim}\n')
        for term, row in zip(model.vocab.terms, model.input_vectors.astype(np.float32)):
            handle.write(term + ' ' + ' '.join(repr(float(x)) for x in row) + '\n')
    return path
