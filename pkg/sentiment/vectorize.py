"""
Vocabulary and TF-IDF document vectors.

W(t, d) = TF(t, d) * ln(n / df(t)), with TF the raw occurrence count of t in
d, n the number of documents the vocabulary was built from and df(t) the
number of those documents containing t. No smoothing.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy import sparse

from .exceptions import ArtifactFormatError, DataError

logger = logging.getLogger(__name__)

N_DOCS_PREFIX = '# n_docs='


@dataclass
class Vocabulary:
    terms: tuple
    df: np.ndarray
    n_docs: int
    index: dict = field(default_factory=dict)
    oov_lookups: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self.terms = tuple(self.terms)
        self.df = np.asarray(self.df, dtype=np.int64)
        if not self.index:
            self.index = {term: i for i, term in enumerate(self.terms)}
        if len(self.index) != len(self.terms) or len(self.df) != len(self.terms):
            raise ValidationError('vocabulary terms, df and index are misaligned')
        if len(self.terms) and (self.df.min() < 1 or self.df.max() > self.n_docs):
            raise ValidationError('document frequencies must lie in [1, n_docs]')

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def idf(self):
        return np.log(self.n_docs / self.df)


@dataclass
class DocMatrix:
    """Row ``i`` holds the weights of document ``doc_ids[i]``."""
    matrix: sparse.csr_matrix
    doc_ids: tuple

    def __post_init__(self):
        self.doc_ids = tuple(self.doc_ids)
        if self.matrix.shape[0] != len(self.doc_ids):
            raise ValidationError('matrix rows and doc ids are misaligned')

    def row(self, doc_id):
        return self.matrix.getrow(self.doc_ids.index(doc_id))


def build_vocab(corpus, min_df=2):
    if min_df < 1:
        raise ValidationError(f"min_df must be >= 1, got {min_df}")
    corpus = list(corpus)
    if not corpus:
        raise DataError('cannot build a vocabulary from an empty corpus')
    counts = Counter()
    for doc in corpus:
        counts.update(set(doc.tokens))
    terms = sorted(term for term, count in counts.items() if count >= min_df)
    vocab = Vocabulary(terms, [counts[t] for t in terms], len(corpus))
    logger.info("vocabulary: %d terms (min_df=%d, n_docs=%d)", len(vocab), min_df, vocab.n_docs)
    return vocab


def tfidf_weight(term, doc, vocab):
    index = vocab.index.get(term)
    if index is None:
        vocab.oov_lookups[term] += 1
        logger.debug("tfidf lookup for out-of-vocabulary term %r", term)
        return 0.0
    tf = sum(1 for token in doc.tokens if token == term)
    return tf * math.log(vocab.n_docs / vocab.df[index])


def tfidf_matrix(corpus, vocab, normalize=True):
    corpus = list(corpus)
    idf = vocab.idf()
    rows, cols, values = [], [], []
    for row, doc in enumerate(corpus):
        tf = Counter(token for token in doc.tokens if token in vocab.index)
        for term in sorted(tf, key=vocab.index.get):
            col = vocab.index[term]
            rows.append(row)
            cols.append(col)
            values.append(tf[term] * idf[col])
    matrix = sparse.csr_matrix(
        (np.asarray(values, dtype=np.float64), (rows, cols)),
        shape=(len(corpus), len(vocab)),
    )
    matrix.eliminate_zeros()
    if normalize:
        norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        matrix = sparse.csr_matrix(sparse.diags(scale) @ matrix)
    return DocMatrix(matrix, [doc.id for doc in corpus])


def write_vocab(vocab, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        handle.write(f'{N_DOCS_PREFIX}{vocab.n_docs}\n')
        pd.DataFrame({'term': vocab.terms, 'df': vocab.df}).to_csv(
            handle, index=False, lineterminator='\n'
        )
    return path


def read_vocab(path):
    path = Path(path)
    with path.open(encoding='utf-8') as handle:
        first = handle.readline()
        if not first.startswith(N_DOCS_PREFIX):
            raise ArtifactFormatError(f"{path} is not a vocabulary file", producer=None)
        n_docs = int(first[len(N_DOCS_PREFIX):])
        frame = pd.read_csv(handle, dtype={'term': str, 'df': np.int64}, keep_default_na=False)
    return Vocabulary(frame['term'].tolist(), frame['df'].to_numpy(), n_docs)


def write_triplets(doc_matrix, path):
    coo = doc_matrix.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    frame = pd.DataFrame({
        'doc_id': [doc_matrix.doc_ids[i] for i in coo.row[order]],
        'term_index': coo.col[order],
        'weight': coo.data[order],
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def read_triplets(path, doc_ids, n_terms):
    frame = pd.read_csv(path, dtype={'doc_id': str}, keep_default_na=False)
    if list(frame.columns) != ['doc_id', 'term_index', 'weight']:
        raise ArtifactFormatError(f"{path} is not a TF-IDF triplet file")
    position = {doc_id: i for i, doc_id in enumerate(doc_ids)}
    rows = frame['doc_id'].map(position)
    if rows.isna().any():
        raise DataError(f"{path} references unknown document ids",
                        ids=frame.loc[rows.isna(), 'doc_id'].tolist())
    matrix = sparse.csr_matrix(
        (frame['weight'].to_numpy(), (rows.to_numpy(dtype=np.int64), frame['term_index'].to_numpy())),
        shape=(len(doc_ids), n_terms),
    )
    return DocMatrix(matrix, doc_ids)
