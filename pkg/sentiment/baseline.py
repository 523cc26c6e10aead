"""
Supervised baseline: linear SVM trained in the primal by stochastic
sub-gradient descent (step size 1 / (lambda * t)), with stratified k-fold
cross-validation.

The bias is learned as the weight of a constant feature appended to every
example, so it is regularised along with ``w``.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from scipy import sparse
from sklearn.model_selection import StratifiedKFold

from . import evalmetrics
from .exceptions import ArtifactFormatError, DataError
from .models import Sentiment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    reg_lambda: float = 1e-4
    epochs: int = 50
    seed: int = 1

    def __post_init__(self):
        if not self.reg_lambda > 0:
            raise ValidationError(f"reg_lambda must be > 0, got {self.reg_lambda}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")

    @classmethod
    def from_mapping(cls, mapping=None):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in (mapping or {}).items() if k in known})


@dataclass
class LinearModel:
    """sign(w.x + b) >= 0 -> Positive."""
    weights: np.ndarray
    bias: float
    classes: tuple = (Sentiment.POSITIVE, Sentiment.NEGATIVE)
    objective_history: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValidationError('model parameters must be finite')

    @property
    def dim(self):
        return len(self.weights)

    def decision(self, features):
        X = _as_matrix(features)
        if X.shape[1] != self.dim:
            raise DataError(f"feature dimension {X.shape[1]} does not match model dimension {self.dim}")
        return np.asarray(X @ self.weights).ravel() + self.bias


def _as_matrix(features):
    if sparse.issparse(features):
        return sparse.csr_matrix(features, dtype=np.float64)
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return X


def _signs(labels):
    y = []
    for label in labels:
        label = label if isinstance(label, Sentiment) else Sentiment(str(label).lower())
        if label not in Sentiment.classes():
            raise DataError(f"training labels must be positive or negative, got {label!r}")
        y.append(1.0 if label == Sentiment.POSITIVE else -1.0)
    return np.asarray(y)


def _augment(X):
    ones = np.ones((X.shape[0], 1))
    if sparse.issparse(X):
        return sparse.hstack([X, sparse.csr_matrix(ones)], format='csr')
    return np.hstack([X, ones])


def objective(w, X, y, reg_lambda):
    """lambda/2 ||w||^2 + mean hinge, over augmented features."""
    margins = y * np.asarray(X @ w).ravel()
    return 0.5 * reg_lambda * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def subgradient(w, X, y, reg_lambda):
    margins = y * np.asarray(X @ w).ravel()
    active = margins < 1.0
    coef = np.where(active, -y, 0.0) / len(y)
    return reg_lambda * w + np.asarray(X.T @ coef).ravel()


def _rows(X):
    """Per-example (indices, values) so each SGD step touches one row."""
    if sparse.issparse(X):
        X = X.tocsr()
        return [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]])
                for i in range(X.shape[0])]
    return [(None, X[i]) for i in range(X.shape[0])]


def train_svm(features, labels, config=None):
    config = config or TrainConfig()
    y = _signs(labels)
    X = _augment(_as_matrix(features))
    if X.shape[0] != len(y):
        raise DataError('features and labels are misaligned')
    if len(set(y.tolist())) < 2:
        raise DataError('SVM training needs at least one example of each class')

    rows = _rows(X)
    w = np.zeros(X.shape[1])
    rng = np.random.default_rng(config.seed)
    history = []
    t = 0
    for epoch in range(config.epochs):
        for i in rng.permutation(len(y)):
            t += 1
            eta = 1.0 / (config.reg_lambda * t)
            idx, values = rows[i]
            score = float(values @ (w if idx is None else w[idx]))
            w *= 1.0 - eta * config.reg_lambda
            if y[i] * score < 1.0:
                if idx is None:
                    w += eta * y[i] * values
                else:
                    w[idx] += eta * y[i] * values
        history.append(objective(w, X, y, config.reg_lambda))
    logger.debug("svm objective %.6f -> %.6f over %d epochs", history[0], history[-1], config.epochs)
    return LinearModel(w[:-1].copy(), float(w[-1]), objective_history=history)


def predict(model, features):
    """Score 0 is predicted Positive."""
    scores = model.decision(features)
    return [Sentiment.POSITIVE if s >= 0 else Sentiment.NEGATIVE for s in scores]


def stratified_folds(labels, folds, seed):
    """
    Fold index per example from a shuffled StratifiedKFold, so fold sizes
    differ by at most one and every fold holds each class.
    """
    if folds < 2:
        raise ValidationError(f"folds must be >= 2, got {folds}")
    y = _signs(labels)
    for sign in (1.0, -1.0):
        count = int(np.count_nonzero(y == sign))
        if count < folds:
            name = 'positive' if sign > 0 else 'negative'
            raise DataError(f"class {name} has {count} examples, too few for {folds} folds")
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for fold, (_, held_out) in enumerate(splitter.split(np.zeros(len(y)), y)):
        assignment[held_out] = fold
    return assignment


@dataclass
class CrossValidation:
    fold_f1: list
    mean: float
    std: float

    def to_dict(self):
        return {'folds': self.fold_f1, 'mean': self.mean, 'std': self.std}


def cross_validate(features, labels, folds=5, seed=1, config=None, workers=1):
    """Per-fold macro-F1 on the held-out fold; folds may run concurrently."""
    config = config or TrainConfig(seed=seed)
    labels = list(labels)
    X = _as_matrix(features)
    assignment = stratified_folds(labels, folds, seed)

    def run_fold(fold):
        test = np.flatnonzero(assignment == fold)
        train = np.flatnonzero(assignment != fold)
        model = train_svm(X[train], [labels[i] for i in train], config)
        cm = evalmetrics.confusion(predict(model, X[test]), [labels[i] for i in test])
        return evalmetrics.macro_f1(cm)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(run_fold, range(folds)))
    else:
        scores = [run_fold(fold) for fold in range(folds)]
    return CrossValidation(scores, float(np.mean(scores)), float(np.std(scores)))


def tune(features, labels, grid, folds=5, seed=1, epochs=50, workers=1):
    """Pick reg_lambda from ``grid`` by cross-validated mean macro-F1."""
    results = {}
    for reg_lambda in grid:
        cv = cross_validate(features, labels, folds, seed,
                            TrainConfig(reg_lambda=reg_lambda, epochs=epochs, seed=seed), workers)
        results[reg_lambda] = cv
        logger.info("lambda=%g: mean F1 %.4f", reg_lambda, cv.mean)
    # Ties go to the stronger regulariser.
    best = max(results, key=lambda lam: (results[lam].mean, lam))
    return best, results


def save_model(model, path):
    """JSON header line followed by the dense weight array."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format': 'linear-svm',
        'dim': model.dim,
        'bias': model.bias,
        'classes': [c.value for c in model.classes],
        'objective_history': model.objective_history,
    }
    payload = {'header': header, 'weights': model.weights.tolist()}
    path.write_text(json.dumps(payload, sort_keys=True) + '\n', encoding='utf-8')
    return path


def load_model(path):
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ArtifactFormatError(f"{path} is not a linear SVM model file") from exc
    header = data.get('header', {}) if isinstance(data, dict) else {}
    if header.get('format') != 'linear-svm':
        raise ArtifactFormatError(f"{path} is not a linear SVM model file")
    return LinearModel(
        np.asarray(data['weights']), float(header['bias']),
        tuple(Sentiment(c) for c in header['classes']),
        list(header.get('objective_history', [])),
    )
