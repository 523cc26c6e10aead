"""
Confusion matrices, precision/recall/F1 and per-party sentiment tables.

Positive is the reference class of the 2x2 matrix. Per-class metrics for
Negative are obtained by swapping the reference (``prf(cm, NEGATIVE)``).
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from sklearn import metrics

from .exceptions import DataError
from .models import Party, Sentiment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    abstained: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn, self.abstained) < 0:
            raise ValidationError('confusion counts must be >= 0')

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self):
        """Same matrix with Negative as the reference class."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp, self.abstained)

    def to_dict(self):
        return {
            'tp': self.tp, 'fp': self.fp, 'fn': self.fn, 'tn': self.tn,
            'total': self.total, 'abstained': self.abstained,
        }


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    def to_dict(self):
        return {
            'precision': self.precision, 'recall': self.recall,
            'f1': self.f1, 'degenerate': self.degenerate,
        }


def _as_sentiment(value):
    return value if isinstance(value, Sentiment) else Sentiment(str(value).lower())


_LABELS = [Sentiment.POSITIVE.value, Sentiment.NEGATIVE.value]


def confusion(pred, actual):
    """
    Count the 2x2 cells. Abstain predictions are counted separately and stay
    out of every cell.
    """
    pred = [_as_sentiment(p) for p in pred]
    actual = [_as_sentiment(a) for a in actual]
    if len(pred) != len(actual):
        raise DataError(f"prediction/actual length mismatch: {len(pred)} vs {len(actual)}")
    if any(a == Sentiment.ABSTAIN for a in actual):
        raise DataError('actual labels must be positive or negative')
    scored = [(p.value, a.value) for p, a in zip(pred, actual) if p != Sentiment.ABSTAIN]
    abstained = len(pred) - len(scored)
    if abstained:
        logger.info("%d abstained predictions excluded from the confusion matrix", abstained)
    if not scored:
        return ConfusionMatrix(0, 0, 0, 0, abstained)
    y_pred, y_true = zip(*scored)
    # Rows are actual, columns predicted: [[tp, fn], [fp, tn]].
    (tp, fn), (fp, tn) = metrics.confusion_matrix(y_true, y_pred, labels=_LABELS).tolist()
    return ConfusionMatrix(tp, fp, fn, tn, abstained)


def _expand(cm):
    """Rebuild label vectors that reproduce the counts of ``cm``."""
    pos, neg = _LABELS
    y_true = np.repeat([pos, neg, pos, neg], [cm.tp, cm.fp, cm.fn, cm.tn])
    y_pred = np.repeat([pos, pos, neg, neg], [cm.tp, cm.fp, cm.fn, cm.tn])
    return y_true, y_pred


def prf(cm, reference=Sentiment.POSITIVE):
    """0/0 resolves to 0 with ``degenerate`` set."""
    reference = _as_sentiment(reference)
    oriented = cm.swapped() if reference == Sentiment.NEGATIVE else cm
    if not cm.total:
        return Scores(0.0, 0.0, 0.0, True)
    y_true, y_pred = _expand(cm)
    precision, recall, f1, _ = metrics.precision_recall_fscore_support(
        y_true, y_pred, labels=[reference.value], average=None, zero_division=0,
    )
    degenerate = (
        oriented.tp + oriented.fp == 0
        or oriented.tp + oriented.fn == 0
        or precision[0] + recall[0] == 0
    )
    return Scores(float(precision[0]), float(recall[0]), float(f1[0]), bool(degenerate))


def accuracy(cm):
    if not cm.total:
        return 0.0
    y_true, y_pred = _expand(cm)
    return float(metrics.accuracy_score(y_true, y_pred))


def macro_f1(cm):
    return (prf(cm, Sentiment.POSITIVE).f1 + prf(cm, Sentiment.NEGATIVE).f1) / 2.0


def evaluation_report(cm):
    """Per-class scores, accuracy and macro-F1 for one confusion matrix."""
    positive = prf(cm, Sentiment.POSITIVE)
    negative = prf(cm, Sentiment.NEGATIVE)
    return {
        'confusion': cm.to_dict(),
        'positive': positive.to_dict(),
        'negative': negative.to_dict(),
        'accuracy': accuracy(cm),
        'macro_f1': (positive.f1 + negative.f1) / 2.0,
    }


@dataclass
class PartyRow:
    party: str
    total: int
    positive: int
    negative: int

    def __post_init__(self):
        if self.positive + self.negative != self.total:
            raise ValidationError(f"{self.party}: positive + negative must equal total")

    @property
    def positive_pct(self):
        return round(100 * self.positive / self.total) if self.total else 0

    @property
    def negative_pct(self):
        return round(100 * self.negative / self.total) if self.total else 0

    def to_dict(self):
        return {
            'party': self.party, 'total': self.total,
            'positive': self.positive, 'negative': self.negative,
            'positive_pct': self.positive_pct, 'negative_pct': self.negative_pct,
        }


@dataclass
class PartySentimentTable:
    rows: list = field(default_factory=list)

    @classmethod
    def from_counts(cls, counts):
        """``counts`` maps party -> (positive, negative)."""
        rows = []
        for party, (pos, neg) in counts.items():
            name = party.value if isinstance(party, Party) else str(party)
            rows.append(PartyRow(name, int(pos) + int(neg), int(pos), int(neg)))
        return cls(rows)

    def total_row(self):
        pos = sum(r.positive for r in self.rows)
        neg = sum(r.negative for r in self.rows)
        return PartyRow('Total', pos + neg, pos, neg)

    def row(self, party):
        name = party.value if isinstance(party, Party) else str(party)
        for r in self.rows:
            if r.party == name:
                return r
        raise KeyError(name)

    def to_dict(self):
        return {
            'parties': [r.to_dict() for r in self.rows],
            'total': self.total_row().to_dict(),
        }


def aggregate_sentiment(labeled):
    """Per-party counts; every document must be labeled and party-tagged."""
    bad = [
        doc.id for doc in labeled
        if doc.label not in Sentiment.classes() or doc.party in (None, '')
    ]
    if bad:
        raise DataError(f"{len(bad)} documents lack a label or party tag", ids=bad)
    counts = {}
    for doc in labeled:
        pos, neg = counts.get(doc.party, (0, 0))
        if doc.label == Sentiment.POSITIVE:
            pos += 1
        else:
            neg += 1
        counts[doc.party] = (pos, neg)
    # Largest party first, as in the published tables.
    ordered = dict(sorted(counts.items(), key=lambda item: (-sum(item[1]), str(item[0]))))
    return PartySentimentTable.from_counts(ordered)


def _fmt_int(value):
    return f"{value:,}"


def render_party_table(table):
    header = ('Political party', 'Total labelled', 'Positive sentiment', 'Negative sentiment')
    body = [
        (r.party, _fmt_int(r.total), f"{_fmt_int(r.positive)} ({r.positive_pct}%)",
         f"{_fmt_int(r.negative)} ({r.negative_pct}%)")
        for r in table.rows
    ]
    total = table.total_row()
    footer = (total.party, _fmt_int(total.total), f"{_fmt_int(total.positive)} ({total.positive_pct}%)",
              f"{_fmt_int(total.negative)} ({total.negative_pct}%)")
    return _render(header, body, footer)


def render_confusion(cm):
    header = ('', 'Positive (prediction)', 'Negative (prediction)', 'All')
    body = [
        ('Positive (actual)', str(cm.tp), str(cm.fn), str(cm.tp + cm.fn)),
        ('Negative (actual)', str(cm.fp), str(cm.tn), str(cm.fp + cm.tn)),
    ]
    footer = ('All', str(cm.tp + cm.fp), str(cm.fn + cm.tn), str(cm.total))
    return _render(header, body, footer)


def render_polarity_table(results):
    """``results`` maps model name -> evaluation_report(); precision/recall/F1 by polarity."""
    header = ('Model', 'P(pos)', 'P(neg)', 'R(pos)', 'R(neg)', 'F1(pos)', 'F1(neg)')
    body = []
    for name, report in results.items():
        pos, neg = report['positive'], report['negative']
        body.append((name, *(f"{v:.2f}" for v in (
            pos['precision'], neg['precision'], pos['recall'], neg['recall'], pos['f1'], neg['f1']))))
    return _render(header, body)


def _render(header, body, footer=None):
    rows = [header, *body] + ([footer] if footer else [])
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(header))]

    def line(row):
        return '  '.join(str(cell).ljust(widths[i]) if i == 0 else str(cell).rjust(widths[i])
                         for i, cell in enumerate(row)).rstrip()

    rule = '-' * len(line(header))
    out = [line(header), rule, *(line(r) for r in body)]
    if footer:
        out += [rule, line(footer)]
    return '\n'.join(out) + '\n'


def write_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path
