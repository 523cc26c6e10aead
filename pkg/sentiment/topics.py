"""
Topic extraction with collapsed-Gibbs LDA, and n-gram mining.

Token-level state lives in flat arrays (word index, doc index, topic) with
the three count tables kept in step:

    n_dk[d, k]  tokens of doc d assigned to topic k
    n_kw[k, w]  tokens of word w assigned to topic k
    n_k[k]      tokens assigned to topic k

The sampling conditional for token i is

    P(z_i = k | rest) ~ (n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)

with token i removed from every count.
"""
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from django.template.loader import render_to_string
from nltk.util import ngrams as nltk_ngrams

from .exceptions import DataError
from .models import Sentiment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LdaConfig:
    K: int = 5
    alpha: float = None
    beta: float = 0.01
    iters: int = 1000
    seed: int = 1
    top_k: int = 10

    def __post_init__(self):
        if self.K < 2:
            raise ValidationError(f"K must be >= 2, got {self.K}")
        if self.alpha is None:
            object.__setattr__(self, 'alpha', 50.0 / self.K)
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError('alpha and beta must be > 0')
        if self.iters < 0 or self.top_k < 1:
            raise ValidationError('iters must be >= 0 and top_k >= 1')

    @classmethod
    def from_mapping(cls, mapping=None):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in (mapping or {}).items() if k in known})


@dataclass
class TopicModel:
    K: int
    alpha: float
    beta: float
    vocab: tuple
    doc_ids: tuple
    words: np.ndarray
    docs: np.ndarray
    z: np.ndarray
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray
    rng: np.random.Generator = field(repr=False, default=None)
    sweeps: int = 0

    @property
    def V(self):
        return len(self.vocab)

    def doc_lengths(self):
        return np.bincount(self.docs, minlength=len(self.doc_ids))

    def check_counts(self):
        """Raise if the count tables disagree with the assignments."""
        n_dk = np.zeros_like(self.n_dk)
        n_kw = np.zeros_like(self.n_kw)
        np.add.at(n_dk, (self.docs, self.z), 1)
        np.add.at(n_kw, (self.z, self.words), 1)
        if not (np.array_equal(n_dk, self.n_dk) and np.array_equal(n_kw, self.n_kw)
                and np.array_equal(self.n_kw.sum(axis=1), self.n_k)
                and np.array_equal(self.n_dk.sum(axis=0), self.n_k)):
            raise AssertionError('topic count tables are inconsistent with assignments')
        if min(self.n_dk.min(initial=0), self.n_kw.min(initial=0), self.n_k.min(initial=0)) < 0:
            raise AssertionError('negative topic counts')

    def phi(self):
        return (self.n_kw + self.beta) / (self.n_k[:, None] + self.V * self.beta)

    def theta(self):
        lengths = self.doc_lengths()
        return (self.n_dk + self.alpha) / (lengths[:, None] + self.K * self.alpha)


def conditional(model, i):
    """Normalised topic distribution for token ``i`` with the token removed."""
    d, w, k = model.docs[i], model.words[i], model.z[i]
    n_dk = model.n_dk[d].astype(np.float64)
    n_kw = model.n_kw[:, w].astype(np.float64)
    n_k = model.n_k.astype(np.float64)
    n_dk[k] -= 1
    n_kw[k] -= 1
    n_k[k] -= 1
    weights = (n_dk + model.alpha) * (n_kw + model.beta) / (n_k + model.V * model.beta)
    return weights / weights.sum()


def resample_token(model, i, u):
    """Move token ``i`` to a topic drawn from its conditional; ``u`` is uniform in [0, 1)."""
    d, w, k = model.docs[i], model.words[i], model.z[i]
    n_dk, n_kw, n_k = model.n_dk, model.n_kw, model.n_k
    n_dk[d, k] -= 1
    n_kw[k, w] -= 1
    n_k[k] -= 1
    weights = (n_dk[d] + model.alpha) * (n_kw[:, w] + model.beta) / (n_k + model.V * model.beta)
    cumulative = np.cumsum(weights)
    k = min(int(np.searchsorted(cumulative, u * cumulative[-1], side='right')), model.K - 1)
    model.z[i] = k
    n_dk[d, k] += 1
    n_kw[k, w] += 1
    n_k[k] += 1
    return k


def gibbs_sweep(model):
    """Resample every token once, in token order."""
    uniforms = model.rng.random(len(model.z))
    for i in range(len(model.z)):
        resample_token(model, i, uniforms[i])
    model.sweeps += 1
    return model


def initialize(corpus, config):
    corpus = list(corpus)
    if not corpus:
        raise DataError('cannot fit topics on an empty corpus')
    vocab = tuple(sorted({token for doc in corpus for token in doc.tokens}))
    if not vocab:
        raise DataError('cannot fit topics: the corpus vocabulary is empty')
    index = {term: i for i, term in enumerate(vocab)}
    words, docs = [], []
    for d, doc in enumerate(corpus):
        for token in doc.tokens:
            words.append(index[token])
            docs.append(d)
    words = np.asarray(words, dtype=np.int64)
    docs = np.asarray(docs, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    z = rng.integers(0, config.K, size=len(words))
    n_dk = np.zeros((len(corpus), config.K), dtype=np.int64)
    n_kw = np.zeros((config.K, len(vocab)), dtype=np.int64)
    np.add.at(n_dk, (docs, z), 1)
    np.add.at(n_kw, (z, words), 1)
    return TopicModel(
        config.K, float(config.alpha), float(config.beta), vocab,
        tuple(doc.id for doc in corpus), words, docs, z,
        n_dk, n_kw, n_kw.sum(axis=1), rng,
    )


def fit_lda(corpus, K=5, alpha=None, beta=0.01, iters=1000, seed=1):
    config = LdaConfig(K=K, alpha=alpha, beta=beta, iters=iters, seed=seed)
    if config.iters < 1:
        raise ValidationError(f"iters must be >= 1, got {config.iters}")
    model = initialize(corpus, config)
    for _ in range(config.iters):
        gibbs_sweep(model)
    logger.info("lda: K=%d V=%d tokens=%d after %d sweeps",
                model.K, model.V, len(model.z), model.sweeps)
    return model


def top_words(model, k=10):
    """Per topic ``(word, phi)`` pairs, highest phi first; ties by vocabulary index."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    phi = model.phi()
    index = np.arange(model.V)
    ranked = []
    for row in phi:
        order = np.lexsort((index, -row))[:k]
        ranked.append([(model.vocab[i], float(row[i])) for i in order])
    return ranked


def theta_summary(model):
    """Mean document share per topic and how many documents each topic dominates."""
    theta = model.theta()
    dominant = np.bincount(np.argmax(theta, axis=1), minlength=model.K) if len(theta) else np.zeros(model.K)
    return [
        {'topic': k, 'mean_theta': float(theta[:, k].mean()) if len(theta) else 0.0,
         'dominant_docs': int(dominant[k])}
        for k in range(model.K)
    ]


def fit_party_topics(corpus, config, sentiment=Sentiment.NEGATIVE, workers=1):
    """
    One model per party over its ``sentiment``-labeled documents. Parties
    are independent and may be fitted concurrently.
    """
    groups = {}
    for doc in corpus:
        if doc.label == sentiment and doc.party:
            groups.setdefault(doc.party, []).append(doc)
    if not groups:
        raise DataError(f"no {sentiment} documents with a party tag")

    def fit(item):
        party, docs = item
        return party, fit_lda(docs, config.K, config.alpha, config.beta, config.iters, config.seed)

    items = sorted(groups.items(), key=lambda item: str(item[0]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(fit, items))
    return dict(fit(item) for item in items)


def topic_report(models, k=10):
    report = {}
    for party, model in models.items():
        name = getattr(party, 'value', str(party))
        report[name] = {
            'K': model.K, 'alpha': model.alpha, 'beta': model.beta,
            'documents': len(model.doc_ids),
            'topics': [
                {'topic': t, 'words': [{'word': w, 'phi': p} for w, p in words]}
                for t, words in enumerate(top_words(model, k))
            ],
            'theta': theta_summary(model),
        }
    return report


def write_topic_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def render_topic_svg(title, words):
    """Horizontal bar chart of one topic's ``(word, phi)`` list."""
    row_height, header, label_width = 22, 28, 140
    return render_to_string('sentiment/topic_bars.svg', {
        'title': title,
        'bars': [{'word': w, 'weight': p} for w, p in words],
        'max_weight': max((p for _, p in words), default=0),
        'row_height': row_height,
        'header': header,
        'label_width': label_width,
        'bar_height': row_height - 6,
        'bar_scale': 3,
        'width': label_width + 320,
        'height': header + row_height * len(words) + 8,
    })


def write_topic_svgs(models, out_dir, k=10):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for party, model in models.items():
        name = getattr(party, 'value', str(party))
        for t, words in enumerate(top_words(model, k)):
            path = out_dir / f"{name.lower()}_topic{t}.svg"
            path.write_text(render_topic_svg(f"{name} topic {t}", words), encoding='utf-8')
            paths.append(path)
    return paths


@dataclass
class NgramTable:
    n: int
    entries: list
    total_windows: int = 0

    def __post_init__(self):
        counts = [count for _, count in self.entries]
        if any(c <= 0 for c in counts) or counts != sorted(counts, reverse=True):
            raise ValidationError('n-gram counts must be positive and non-increasing')
        if any(len(gram) != self.n for gram, _ in self.entries):
            raise ValidationError(f"every n-gram must have exactly {self.n} tokens")

    def rows(self):
        return [
            {'rank': rank, 'ngram': ' '.join(gram), 'count': count}
            for rank, (gram, count) in enumerate(self.entries, start=1)
        ]


def _count_windows(docs, n):
    counts = Counter()
    for doc in docs:
        counts.update(nltk_ngrams(doc.tokens, n))
    return counts


def ngrams(corpus, n=4, top=None, workers=1):
    """Rank contiguous n-token windows; no window spans two documents."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    corpus = list(corpus)
    if workers > 1 and len(corpus) > 1:
        shards = [corpus[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda shard: _count_windows(shard, n), shards))
        counts = sum(parts, Counter())
    else:
        counts = _count_windows(corpus, n)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if top is not None:
        ranked = ranked[:top]
    return NgramTable(n, ranked, sum(counts.values()))


def party_ngrams(corpus, n=4, top=20, sentiment=Sentiment.NEGATIVE, workers=1):
    groups = {}
    for doc in corpus:
        if doc.party and (sentiment is None or doc.label == sentiment):
            groups.setdefault(getattr(doc.party, 'value', str(doc.party)), []).append(doc)
    return {party: ngrams(docs, n, top, workers) for party, docs in sorted(groups.items())}


def write_ngram_csv(tables, path):
    """``tables`` maps party -> NgramTable; one CSV with a party column."""
    rows = []
    for party, table in tables.items():
        rows.extend({'party': party, **row} for row in table.rows())
    frame = pd.DataFrame(rows, columns=['party', 'rank', 'ngram', 'count'])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n')
    return path
