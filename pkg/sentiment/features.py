"""
Document representations shared by the baseline, label propagation and the
self-labeling schedule: TF-IDF rows or skip-gram / CBOW document vectors.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
from django.core.exceptions import ValidationError
from scipy import sparse

from . import embed, vectorize
from .exceptions import DataError
from .models import EmbedMode
from .textprep import PrepConfig, run_corpus

logger = logging.getLogger(__name__)

KINDS = ('tfidf', EmbedMode.SKIPGRAM.value, EmbedMode.CBOW.value)


@dataclass
class FeatureTable:
    """Row ``i`` of ``matrix`` belongs to ``ids[i]``."""
    ids: tuple
    matrix: object
    empty: tuple = ()

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self._position = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if self.matrix.shape[0] != len(self.ids):
            raise ValidationError('feature rows and ids are misaligned')

    @property
    def dim(self):
        return self.matrix.shape[1]

    def rows(self, ids):
        try:
            index = [self._position[doc_id] for doc_id in ids]
        except KeyError as exc:
            raise DataError(f"no features for document {exc.args[0]!r}", ids=[exc.args[0]]) from exc
        if sparse.issparse(self.matrix):
            return self.matrix[index]
        return self.matrix[np.asarray(index, dtype=np.int64)]


@dataclass
class Representation:
    kind: str
    vocab: vectorize.Vocabulary = None
    model: embed.EmbeddingModel = None
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown representation {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def fit(cls, corpus, kind, config):
        """
        Fit on a processed corpus. ``config`` is the pipeline settings dict;
        the VOCAB, TFIDF and EMBED sections are read from it.
        """
        corpus = list(corpus)
        vocab = vectorize.build_vocab(corpus, config['VOCAB'].get('min_df', 2))
        normalize = config['TFIDF'].get('normalize', True)
        if kind == 'tfidf':
            return cls(kind, vocab=vocab, normalize=normalize)
        embed_config = replace(embed.EmbedConfig.from_mapping(config['EMBED']), mode=EmbedMode(kind))
        return cls(kind, vocab=vocab, model=embed.train(corpus, embed_config), normalize=normalize)

    @classmethod
    def from_model(cls, model, vocab=None):
        return cls(model.config.mode.value, vocab=vocab, model=model)

    def transform(self, corpus):
        corpus = list(corpus)
        if self.kind == 'tfidf':
            doc_matrix = vectorize.tfidf_matrix(corpus, self.vocab, self.normalize)
            empty = [doc.id for doc, nnz in zip(corpus, np.diff(doc_matrix.matrix.indptr)) if nnz == 0]
            table = FeatureTable(doc_matrix.doc_ids, doc_matrix.matrix, tuple(empty))
        else:
            weights = None
            if self.model.config.doc_weighting == 'tfidf' and self.vocab is not None:
                weights = dict(zip(self.vocab.terms, self.vocab.idf()))
            vectors, empty = [], []
            for doc in corpus:
                vec, is_empty = embed.doc_vector(doc, self.model, weights)
                vectors.append(vec)
                if is_empty:
                    empty.append(doc.id)
            matrix = np.vstack(vectors) if vectors else np.zeros((0, self.model.config.dim))
            table = FeatureTable([doc.id for doc in corpus], matrix, tuple(empty))
        if table.empty:
            logger.warning("%d documents have no in-vocabulary token (%s)", len(table.empty), self.kind)
        return table


def build_features(documents, config, kind=None):
    """
    Run the text pipeline over raw documents, fit the representation on all
    of them and return their feature table. ``kind`` defaults to the
    SCHEDULE representation setting.
    """
    prep = PrepConfig.from_mapping(config['PREP'])
    processed = run_corpus(documents, prep, max(1, int(config.get('THREADS', 1))))
    kind = kind or config['SCHEDULE'].get('representation', 'tfidf')
    return Representation.fit(processed, kind, config).transform(processed)
