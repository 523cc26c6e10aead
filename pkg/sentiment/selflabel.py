"""
Self-labeling schedule.

1. Hold back part of the seed set and check that propagation recovers the
   hidden labels (transduction check).
2. For each batch size: draw a batch from the unlabeled pool, propagate from
   the labeled pool over pool + batch, harden, merge the confident labels
   and re-score the hold-out set. A batch that lowers hold-out macro-F1 by
   more than ``guard_drop`` is rejected and the run halts with the last
   accepted state.
3. Label whatever is left in one final pass; labels there are argmax and
   flagged low-confidence when they would otherwise have abstained.

Batch sizes are totals per iteration, split equally across parties.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError

from . import evalmetrics, labelprop
from .baseline import CrossValidation, stratified_folds
from .corpus import DocumentSet
from .exceptions import DataError, GuardHalt
from .features import build_features
from .models import Party, Provenance, Role, Sentiment

logger = logging.getLogger(__name__)

CLASSES = Sentiment.classes()


@dataclass(frozen=True)
class Schedule:
    batch_sizes: tuple = (1000, 10000, 20000)
    stratify_by_party: bool = True
    guard_drop: float = 0.02
    seed: int = 1
    soft_seeds: bool = False
    holdback_fraction: float = 0.5
    final_chunk: int = 20000
    representation: str = 'tfidf'

    def __post_init__(self):
        object.__setattr__(self, 'batch_sizes', tuple(int(b) for b in self.batch_sizes))
        if any(b < 1 for b in self.batch_sizes):
            raise ValidationError(f"batch sizes must be >= 1, got {list(self.batch_sizes)}")
        if self.guard_drop < 0:
            raise ValidationError(f"guard_drop must be >= 0, got {self.guard_drop}")
        if not 0 < self.holdback_fraction < 1:
            raise ValidationError('holdback_fraction must lie in (0, 1)')
        if self.final_chunk < 1:
            raise ValidationError('final_chunk must be >= 1')

    @classmethod
    def from_mapping(cls, mapping=None):
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in (mapping or {}).items() if k in known})

    @classmethod
    def from_audit(cls, records):
        """Schedule recorded in the first audit record, for replays."""
        if not records or 'schedule' not in records[0]:
            raise DataError('audit log has no schedule record')
        return cls.from_mapping(records[0]['schedule'])

    def to_dict(self):
        data = asdict(self)
        data['batch_sizes'] = list(self.batch_sizes)
        return data


class AuditLog:
    """
    Append-only iteration log. With a path every record is flushed to JSONL
    as soon as it is appended; ``listeners`` receive each record too.
    """

    def __init__(self, path=None, listeners=()):
        self.path = Path(path) if path else None
        self.records = []
        self.listeners = list(listeners)
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text('', encoding='utf-8')

    def append(self, record):
        self.records.append(record)
        if self.path:
            with self.path.open('a', encoding='utf-8', newline='\n') as handle:
                handle.write(json.dumps(record, sort_keys=True) + '\n')
        for listener in self.listeners:
            listener(record)

    @classmethod
    def read(cls, path):
        path = Path(path)
        if not path.exists():
            raise DataError(f"audit log not found: {path}")
        log = cls()
        for line in path.read_text(encoding='utf-8').splitlines():
            if line.strip():
                log.records.append(json.loads(line))
        return log

    def labeled_by(self):
        """Document id -> iteration that labeled it."""
        owners = {}
        for record in self.records:
            if record.get('accepted', True):
                for doc_id in record.get('labeled_ids', []):
                    owners[doc_id] = record['iteration']
        return owners


@dataclass
class PoolEntry:
    label: Sentiment
    distribution: tuple
    provenance: Provenance
    iteration: int
    low_confidence: bool = False

    @property
    def confidence(self):
        return float(max(self.distribution))


@dataclass
class TransductionResult:
    confusion: evalmetrics.ConfusionMatrix
    macro_f1: float
    degenerate: bool = False

    def report(self):
        report = evalmetrics.evaluation_report(self.confusion)
        report['degenerate'] = self.degenerate
        return report


@dataclass
class ScheduleResult:
    labeled: DocumentSet
    entries: dict
    audit: AuditLog
    halted: bool = False
    transduction: TransductionResult = None
    holdout: TransductionResult = None
    party: dict = field(default_factory=dict)

    def label_rows(self):
        rows = []
        for doc_id, entry in self.entries.items():
            party = self.party.get(doc_id)
            rows.append({
                'id': doc_id,
                'party': party.value if party else '',
                'label': entry.label.value,
                'confidence': entry.confidence,
                'iteration': entry.iteration,
            })
        return rows


def _one_hot(label):
    row = [0.0, 0.0]
    row[CLASSES.index(label)] = 1.0
    return tuple(row)


def holdback(labeled, fraction, seed):
    """
    Uniform split of a labeled set. ``floor(n * fraction)`` documents are
    hidden; both sides keep input order.
    """
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(labeled)
    n_hidden = int(np.floor(n * fraction))
    if n_hidden == 0 or n_hidden == n:
        raise DataError(f"holding back {fraction} of {n} documents leaves an empty side")
    rng = np.random.default_rng(seed)
    hidden_idx = set(rng.permutation(n)[:n_hidden].tolist())
    docs = list(labeled)
    visible = [d for i, d in enumerate(docs) if i not in hidden_idx]
    hidden = [d for i, d in enumerate(docs) if i in hidden_idx]
    return DocumentSet(visible, role=Role.C), DocumentSet(hidden, role=Role.D)


def _propagate_onto(features, seeds, targets, graph_config, workers=1):
    """
    Propagate from ``seeds`` (id -> Sentiment or probability row) over the
    graph on seeds + targets. Returns the target rows of Y.
    """
    seed_ids = list(seeds)
    node_ids = seed_ids + list(targets)
    graph = labelprop.build_graph(features.rows(node_ids), graph_config.k, graph_config.sigma, workers)
    start = labelprop.LabelDistribution.from_seeds(
        len(node_ids), {i: seeds[doc_id] for i, doc_id in enumerate(seed_ids)},
    )
    result = labelprop.propagate(graph, start, graph_config.eps, graph_config.max_iter,
                                 graph_config.class_mass_normalize)
    return result.distribution.Y[len(seed_ids):]


def transduction_eval(features, visible, hidden, graph_config=None, workers=1):
    """
    Propagate from ``visible`` (id -> label) and score the hardened labels
    of the ``hidden`` nodes (id -> true label). Abstains are counted in the
    confusion matrix's ``abstained`` field.
    """
    graph_config = graph_config or labelprop.GraphConfig()
    if not hidden:
        raise DataError('transduction evaluation needs at least one hidden document')
    seed_classes = {
        Sentiment(v) if isinstance(v, str) else CLASSES[int(np.argmax(v))]
        for v in visible.values()
    }
    degenerate = len(seed_classes) < 2
    if degenerate:
        logger.warning("visible seeds cover only %s; transduction metrics are degenerate",
                       sorted(c.value for c in seed_classes))
    hidden_ids = list(hidden)
    Y = _propagate_onto(features, visible, hidden_ids, graph_config, workers)
    predicted = labelprop.harden(labelprop.LabelDistribution(Y, np.zeros(len(Y), dtype=bool)),
                                 graph_config.harden_threshold)
    cm = evalmetrics.confusion(predicted, [hidden[i] for i in hidden_ids])
    if cm.abstained:
        logger.info("%d hidden documents abstained", cm.abstained)
    return TransductionResult(cm, evalmetrics.macro_f1(cm), degenerate)


def _party_order(party):
    members = list(Party)
    return members.index(party) if party in members else len(members)


def draw_batch(remaining, parties, size, rng, stratify=True):
    """
    Draw ``size`` ids from ``remaining``. Stratified draws deal one slot at a
    time to each party in turn (round-robin), skipping exhausted parties.
    """
    if size > len(remaining):
        logger.warning("batch of %d truncated to the %d remaining documents", size, len(remaining))
        size = len(remaining)
    if not stratify:
        chosen = rng.choice(len(remaining), size=size, replace=False)
        return [remaining[i] for i in chosen]

    groups = {}
    for doc_id in remaining:
        groups.setdefault(parties[doc_id], []).append(doc_id)
    order = sorted(groups, key=_party_order)
    queues = {p: [groups[p][i] for i in rng.permutation(len(groups[p]))] for p in order}
    quota = dict.fromkeys(order, 0)
    left = size
    while left:
        for party in order:
            if left and quota[party] < len(queues[party]):
                quota[party] += 1
                left -= 1
    return [doc_id for party in order for doc_id in queues[party][:quota[party]]]


def flip_hook(iteration):
    """Test hook: flip every label of batch ``iteration`` before it is merged."""
    def hook(current, batch, labels):
        if current != iteration:
            return labels
        logger.warning("flipping %d labels of iteration %d", len(labels), current)
        return [label.flipped() for label in labels]
    return hook


class SelfLabeler:
    def __init__(self, features, schedule, graph_config, workers=1, corrupt_hook=None, audit=None):
        self.features = features
        self.schedule = schedule
        self.graph_config = graph_config
        self.workers = workers
        self.corrupt_hook = corrupt_hook
        self.audit = audit if audit is not None else AuditLog()

    def _seed_value(self, entry):
        if self.schedule.soft_seeds and entry.provenance == Provenance.MACHINE:
            return entry.distribution
        return entry.label

    def _evaluate(self, entries, holdout_truth):
        seeds = {doc_id: self._seed_value(e) for doc_id, e in entries.items()}
        return transduction_eval(self.features, seeds, holdout_truth, self.graph_config, self.workers)

    def _check_hygiene(self, batch, entries, holdout_ids, manual):
        leaked = sorted((set(batch) | set(entries)) & holdout_ids)
        if leaked:
            raise DataError('hold-out documents entered the training pool', ids=leaked)
        relabeled = [doc_id for doc_id, label in manual.items() if entries[doc_id].label != label
                     or entries[doc_id].provenance != Provenance.MANUAL]
        if relabeled:
            raise DataError('manually labeled documents were relabeled', ids=relabeled)
        overlap = sorted(set(batch) & set(entries))
        if overlap:
            raise DataError('batch contains already labeled documents', ids=overlap)

    def transduction_check(self, seed_pool):
        visible, hidden = holdback(seed_pool, self.schedule.holdback_fraction, self.schedule.seed)
        result = transduction_eval(
            self.features, {d.id: d.label for d in visible}, {d.id: d.label for d in hidden},
            self.graph_config, self.workers,
        )
        logger.info("transduction check: %d visible, %d hidden, macro-F1 %.4f",
                    len(visible), len(hidden), result.macro_f1)
        return result

    def run(self, seed_pool, unlabeled, holdout, check_transduction=True):
        schedule = self.schedule
        holdout_ids = set(holdout.ids())
        pool_ids = set(seed_pool.ids()) | set(unlabeled.ids())
        leaked = sorted(holdout_ids & pool_ids)
        if leaked:
            raise DataError('hold-out set overlaps the training pools', ids=leaked)
        common = sorted(set(seed_pool.ids()) & set(unlabeled.ids()))
        if common:
            raise DataError('seed pool and unlabeled pool share documents', ids=common)
        party = {d.id: d.party for d in list(seed_pool) + list(unlabeled)}
        if schedule.stratify_by_party:
            untagged = [d.id for d in unlabeled if d.party is None]
            if untagged:
                raise DataError('stratified batches need party-tagged documents', ids=untagged)

        transduction = self.transduction_check(seed_pool) if check_transduction else None
        holdout_truth = {d.id: d.label for d in holdout}
        manual = {d.id: d.label for d in seed_pool}
        entries = {
            d.id: PoolEntry(d.label, _one_hot(d.label), Provenance.MANUAL, 0) for d in seed_pool
        }
        remaining = unlabeled.ids()
        rng = np.random.default_rng(schedule.seed)

        current = self._evaluate(entries, holdout_truth)
        self.audit.append({
            'iteration': 0,
            'seed': schedule.seed,
            'schedule': schedule.to_dict(),
            'batch_ids': [],
            'labeled_ids': sorted(entries),
            'pool_size': len(entries),
            'abstain_count': 0,
            'holdout_f1_before': None,
            'holdout_f1_after': current.macro_f1,
            'transduction_f1': transduction.macro_f1 if transduction else None,
            'accepted': True,
        })

        for iteration, size in enumerate(schedule.batch_sizes, start=1):
            if not remaining:
                logger.info("unlabeled pool exhausted before iteration %d", iteration)
                break
            batch = draw_batch(remaining, party, size, rng, schedule.stratify_by_party)
            self._check_hygiene(batch, entries, holdout_ids, manual)
            seeds = {doc_id: self._seed_value(e) for doc_id, e in entries.items()}
            Y = _propagate_onto(self.features, seeds, batch, self.graph_config, self.workers)
            labels = labelprop.harden(labelprop.LabelDistribution(Y, np.zeros(len(Y), dtype=bool)),
                                      self.graph_config.harden_threshold)
            if self.corrupt_hook:
                labels = self.corrupt_hook(iteration, batch, labels)

            candidate = dict(entries)
            merged = []
            for doc_id, label, row in zip(batch, labels, Y):
                if label == Sentiment.ABSTAIN:
                    continue
                candidate[doc_id] = PoolEntry(label, tuple(float(x) for x in row),
                                              Provenance.MACHINE, iteration)
                merged.append(doc_id)
            after = self._evaluate(candidate, holdout_truth)
            drop = current.macro_f1 - after.macro_f1
            accepted = drop <= schedule.guard_drop
            self.audit.append({
                'iteration': iteration,
                'seed': schedule.seed,
                'batch_size': size,
                'batch_ids': batch,
                'labeled_ids': merged,
                'pool_size': len(entries),
                'abstain_count': len(batch) - len(merged),
                'holdout_f1_before': current.macro_f1,
                'holdout_f1_after': after.macro_f1,
                'accepted': accepted,
            })
            if not accepted:
                logger.warning("iteration %d rejected: hold-out macro-F1 %.4f -> %.4f",
                               iteration, current.macro_f1, after.macro_f1)
                result = self._result(entries, party, transduction, current, True, unlabeled, seed_pool)
                raise GuardHalt(
                    f"iteration {iteration} lowered hold-out macro-F1 by {drop:.4f} "
                    f"(limit {schedule.guard_drop})", result=result,
                )
            entries, current = candidate, after
            labeled_now = set(merged)
            remaining = [doc_id for doc_id in remaining if doc_id not in labeled_now]
            logger.info("iteration %d: %d labeled, %d abstained, pool %d, hold-out macro-F1 %.4f",
                        iteration, len(merged), len(batch) - len(merged), len(entries), after.macro_f1)

        entries = self._final_pass(entries, remaining, holdout_ids, manual)
        holdout_result = self._evaluate(entries, holdout_truth)
        return self._result(entries, party, transduction, holdout_result, False, unlabeled, seed_pool)

    def _final_pass(self, entries, remaining, holdout_ids, manual):
        if not remaining:
            return entries
        iteration = len(self.schedule.batch_sizes) + 1
        self._check_hygiene(remaining, entries, holdout_ids, manual)
        seeds = {doc_id: self._seed_value(e) for doc_id, e in entries.items()}
        final = dict(entries)
        low = 0
        chunk = self.schedule.final_chunk
        for start in range(0, len(remaining), chunk):
            part = remaining[start:start + chunk]
            Y = _propagate_onto(self.features, seeds, part, self.graph_config, self.workers)
            for doc_id, row in zip(part, Y):
                pos, neg = float(row[0]), float(row[1])
                # Ties go to Positive.
                label = Sentiment.POSITIVE if pos >= neg else Sentiment.NEGATIVE
                uncertain = pos == neg or max(pos, neg) < self.graph_config.harden_threshold
                low += uncertain
                final[doc_id] = PoolEntry(label, (pos, neg), Provenance.MACHINE, iteration, uncertain)
        self.audit.append({
            'iteration': iteration,
            'seed': self.schedule.seed,
            'final': True,
            'batch_ids': list(remaining),
            'labeled_ids': list(remaining),
            'pool_size': len(entries),
            'abstain_count': 0,
            'low_confidence_count': low,
            'holdout_f1_before': None,
            'holdout_f1_after': None,
            'accepted': True,
        })
        logger.info("final pass labeled %d documents (%d low-confidence)", len(remaining), low)
        return final

    def _result(self, entries, party, transduction, holdout, halted, unlabeled, seed_pool):
        by_id = {**unlabeled.by_id(), **seed_pool.by_id()}
        documents = []
        for doc_id, entry in entries.items():
            documents.append(replace(by_id[doc_id], label=entry.label, provenance=entry.provenance))
        return ScheduleResult(
            DocumentSet(documents, role=Role.A), entries, self.audit, halted,
            transduction, holdout, party,
        )


def run_schedule(seed_pool, unlabeled, holdout, schedule, config, features=None,
                 corrupt_hook=None, audit=None, check_transduction=True):
    """
    Run the whole schedule. ``features`` (a FeatureTable) defaults to the
    configured representation fitted on all three sets.
    """
    if features is None:
        features = build_features(list(seed_pool) + list(unlabeled) + list(holdout), config)
    labeler = SelfLabeler(
        features, schedule, labelprop.GraphConfig.from_mapping(config['GRAPH']),
        workers=max(1, int(config.get('THREADS', 1))),
        corrupt_hook=corrupt_hook, audit=audit,
    )
    return labeler.run(seed_pool, unlabeled, holdout, check_transduction)


def cross_validate_propagation(features, labeled, folds=5, seed=1, graph_config=None, workers=1):
    """
    Stratified k-fold for label propagation: each fold is hidden in turn and
    recovered from the other folds. Same fold assignment as the SVM baseline.
    """
    docs = list(labeled)
    assignment = stratified_folds([d.label for d in docs], folds, seed)
    scores = []
    for fold in range(folds):
        visible = {d.id: d.label for d, f in zip(docs, assignment) if f != fold}
        hidden = {d.id: d.label for d, f in zip(docs, assignment) if f == fold}
        scores.append(transduction_eval(features, visible, hidden, graph_config, workers).macro_f1)
    return CrossValidation(scores, float(np.mean(scores)), float(np.std(scores)))
