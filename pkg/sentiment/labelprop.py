"""
Graph-based label propagation.

Nodes are documents, edges join each node to its k nearest neighbours
(Euclidean, union-symmetrised) with weight exp(-||x - y||^2 / sigma^2).
Labels spread through the row-normalised transition matrix T; seed rows are
clamped after every sweep. ``closed_form`` solves the same fixed point
directly:

    Y_u = (I - T_uu)^-1 T_ul Y_l
"""
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .exceptions import DataError, SingularSystemError
from .models import Sentiment

logger = logging.getLogger(__name__)

CLASSES = Sentiment.classes()
CHUNK_ROWS = 256


@dataclass(frozen=True)
class GraphConfig:
    k: int = 10
    sigma: object = 'auto'
    eps: float = 1e-6
    max_iter: int = 1000
    class_mass_normalize: bool = False
    harden_threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.sigma != 'auto' and not float(self.sigma) > 0:
            raise ValidationError(f"sigma must be positive or 'auto', got {self.sigma!r}")
        if not self.eps > 0 or self.max_iter < 1:
            raise ValidationError('eps must be > 0 and max_iter >= 1')
        if not 0.5 <= self.harden_threshold < 1:
            raise ValidationError('harden_threshold must lie in [0.5, 1)')

    @classmethod
    def from_mapping(cls, mapping=None):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in (mapping or {}).items() if k in known})


@dataclass
class SimilarityGraph:
    n: int
    weights: sparse.csr_matrix
    sigma: float
    k: int

    def __post_init__(self):
        self.row_sums = np.asarray(self.weights.sum(axis=1)).ravel()
        self.isolated = np.flatnonzero(self.row_sums <= 0)

    def transition(self):
        """Row-stochastic T; isolated rows stay zero."""
        scale = np.divide(1.0, self.row_sums, out=np.zeros(self.n), where=self.row_sums > 0)
        return sparse.csr_matrix(sparse.diags(scale) @ self.weights)


@dataclass
class LabelDistribution:
    Y: np.ndarray
    clamped: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        self.clamped = np.asarray(self.clamped, dtype=bool)
        if self.Y.shape != (len(self.clamped), len(CLASSES)):
            raise ValidationError('Y must be n x 2 and aligned with the clamp mask')

    @classmethod
    def from_seeds(cls, n, seeds):
        """
        ``seeds`` maps node index to a Sentiment (one-hot) or a probability
        row (soft seed). Every other node starts uniform.
        """
        Y = np.full((n, len(CLASSES)), 1.0 / len(CLASSES))
        clamped = np.zeros(n, dtype=bool)
        for index, value in seeds.items():
            if isinstance(value, str):
                row = np.zeros(len(CLASSES))
                row[CLASSES.index(Sentiment(value))] = 1.0
            else:
                row = np.asarray(value, dtype=np.float64)
                row = row / row.sum()
            Y[index] = row
            clamped[index] = True
        return cls(Y, clamped)

    def __len__(self):
        return len(self.clamped)


@dataclass
class PropagationResult:
    distribution: LabelDistribution
    iterations: int
    final_delta: float
    converged: bool
    isolated_nodes: list = field(default_factory=list)
    deltas: list = field(default_factory=list)

    def report(self):
        return {
            'iterations': self.iterations,
            'final_delta': self.final_delta,
            'converged': self.converged,
            'isolated_nodes': self.isolated_nodes,
        }


def _as_features(vectors):
    if sparse.issparse(vectors):
        matrix = sparse.csr_matrix(vectors, dtype=np.float64)
        sq = np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel()
    else:
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2:
            raise DataError('vectors must all have the same dimension')
        sq = np.einsum('ij,ij->i', matrix, matrix)
    return matrix, sq


def _neighbours_chunk(matrix, sq, start, stop, k):
    gram = matrix[start:stop] @ matrix.T
    if sparse.issparse(gram):
        gram = gram.toarray()
    d2 = np.maximum(sq[start:stop, None] + sq[None, :] - 2.0 * gram, 0.0)
    rows = np.arange(start, stop)
    d2[rows - start, rows] = np.inf
    # Stable sort: equal distances resolve to the lower node index.
    nbrs = np.argsort(d2, axis=1, kind='stable')[:, :k]
    return nbrs, np.take_along_axis(d2, nbrs, axis=1)


def build_graph(vectors, k=10, sigma='auto', workers=1):
    """
    Exact kNN graph, O(n^2) distance evaluations. Rows are processed in
    chunks; chunk results are merged in order, so the graph does not depend
    on the worker count.
    """
    matrix, sq = _as_features(vectors)
    n = matrix.shape[0]
    if n < 2:
        raise DataError(f"a similarity graph needs at least 2 nodes, got {n}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    k = min(k, n - 1)

    bounds = [(s, min(n, s + CHUNK_ROWS)) for s in range(0, n, CHUNK_ROWS)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _neighbours_chunk(matrix, sq, b[0], b[1], k), bounds))
    else:
        parts = [_neighbours_chunk(matrix, sq, s, e, k) for s, e in bounds]
    nbrs = np.vstack([p[0] for p in parts])
    dist2 = np.vstack([p[1] for p in parts])

    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    d2 = dist2.ravel()
    # Union symmetrisation: keep (i, j) if either endpoint chose the other.
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = {}
    for a, b, dd in zip(lo.tolist(), hi.tolist(), d2.tolist()):
        pairs[(a, b)] = dd
    keys = sorted(pairs)
    src = np.array([a for a, _ in keys], dtype=np.int64)
    dst = np.array([b for _, b in keys], dtype=np.int64)
    pair_d2 = np.array([pairs[key] for key in keys])

    if sigma == 'auto':
        median = float(np.median(np.sqrt(pair_d2)))
        sigma = median if median > 0 else 1.0
        if median <= 0:
            logger.warning("all connected pairs coincide; sigma falls back to 1")
    sigma = float(sigma)
    w = np.exp(-pair_d2 / sigma ** 2)
    w[pair_d2 == 0] = 1.0
    weights = sparse.csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([src, dst]), np.concatenate([dst, src]))),
        shape=(n, n),
    )
    graph = SimilarityGraph(n, weights, sigma, k)
    if len(graph.isolated):
        logger.warning("%d isolated nodes in similarity graph", len(graph.isolated))
    return graph


def dense_graph(vectors, sigma='auto'):
    """Fully connected graph; intended for small oracle problems."""
    matrix, _ = _as_features(vectors)
    return build_graph(vectors, k=matrix.shape[0] - 1, sigma=sigma)


def _check_seeds(seeds):
    for c, name in enumerate(CLASSES):
        if not np.any(seeds.Y[seeds.clamped, c] > 0.5):
            logger.warning("no clamped seed for class %s", name.value)


def _normalize_rows(Y, rows):
    sums = Y[rows].sum(axis=1, keepdims=True)
    Y[rows] = np.divide(Y[rows], sums, out=np.full_like(Y[rows], 1.0 / Y.shape[1]), where=sums > 0)


def class_mass_normalize(distribution):
    """Rescale unlabeled class columns so their mass follows the seed priors."""
    Y = distribution.Y.copy()
    free = ~distribution.clamped
    priors = distribution.Y[distribution.clamped].sum(axis=0)
    if priors.sum() <= 0 or not free.any():
        return distribution
    priors = priors / priors.sum()
    mass = Y[free].sum(axis=0)
    scale = np.divide(priors, mass, out=np.zeros_like(priors), where=mass > 0)
    Y[free] = Y[free] * scale
    _normalize_rows(Y, free)
    return LabelDistribution(Y, distribution.clamped.copy())


def propagate(graph, seeds, eps=1e-6, max_iter=1000, mass_normalize=False):
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if len(seeds) != graph.n:
        raise DataError('seed distribution does not match the graph size')
    _check_seeds(seeds)
    T = graph.transition()
    clamped = seeds.clamped
    free = ~clamped
    isolated = np.zeros(graph.n, dtype=bool)
    isolated[graph.isolated] = True
    stuck = free & isolated
    if stuck.any():
        logger.warning("%d isolated unlabeled nodes stay uniform", int(stuck.sum()))

    Y = seeds.Y.copy()
    deltas = []
    converged = False
    delta = 0.0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        Y_next = T @ Y
        Y_next[clamped] = seeds.Y[clamped]
        Y_next[stuck] = Y[stuck]
        _normalize_rows(Y_next, free & ~stuck)
        delta = float(np.max(np.abs(Y_next - Y))) if graph.n else 0.0
        deltas.append(delta)
        Y = Y_next
        if delta < eps:
            converged = True
            break
    if not converged:
        logger.warning("propagation stopped at max_iter=%d with delta %.3g", max_iter, delta)

    distribution = LabelDistribution(Y, clamped.copy())
    if mass_normalize:
        distribution = class_mass_normalize(distribution)
    return PropagationResult(
        distribution, iteration, delta, converged,
        isolated_nodes=np.flatnonzero(stuck).tolist(), deltas=deltas,
    )


def closed_form(graph, seeds):
    """Direct solve of the propagation fixed point."""
    T = graph.transition().tocsr()
    labeled = np.flatnonzero(seeds.clamped)
    free = np.flatnonzero(~seeds.clamped)
    Y = seeds.Y.copy()
    if not len(free):
        return LabelDistribution(Y, seeds.clamped.copy())
    T_uu = T[free][:, free]
    T_ul = T[free][:, labeled]
    A = sparse.identity(len(free), format='csc') - T_uu.tocsc()
    b = T_ul @ seeds.Y[labeled]
    with warnings.catch_warnings():
        warnings.simplefilter('error', sparse_linalg.MatrixRankWarning)
        try:
            solution = sparse_linalg.spsolve(A, b)
        except (sparse_linalg.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystemError('unlabeled subgraph system is singular') from exc
    solution = np.asarray(solution).reshape(len(free), len(CLASSES))
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError('unlabeled subgraph system is singular')
    unreachable = free[np.abs(solution.sum(axis=1) - 1.0) > 1e-6]
    if len(unreachable):
        raise SingularSystemError(
            f"{len(unreachable)} unlabeled nodes have no path to any seed"
        )
    Y[free] = solution
    return LabelDistribution(Y, seeds.clamped.copy())


def harden(distribution, threshold=0.5):
    """Argmax class when its probability reaches ``threshold``, else Abstain."""
    if not 0.5 <= threshold < 1:
        raise ValidationError('threshold must lie in [0.5, 1)')
    labels = []
    for pos, neg in distribution.Y:
        if pos == neg:
            labels.append(Sentiment.ABSTAIN)
        elif max(pos, neg) >= threshold:
            labels.append(Sentiment.POSITIVE if pos > neg else Sentiment.NEGATIVE)
        else:
            labels.append(Sentiment.ABSTAIN)
    return labels


def write_graph(graph, path, node_ids=None):
    coo = sparse.triu(graph.weights, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    names = node_ids if node_ids is not None else list(range(graph.n))
    frame = pd.DataFrame({
        'src': [names[i] for i in coo.row[order]],
        'dst': [names[j] for j in coo.col[order]],
        'weight': coo.data[order],
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def write_report(result, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.report(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path
