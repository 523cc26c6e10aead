"""
Self-labeling schedule on a two-cluster fixture: positive documents sit
around (+3, 0), negative ones around (-3, 0). The last case runs the full
schedule on a generated corpus against the SVM baseline.
"""
import tempfile
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from sentiment.baseline import TrainConfig, predict, train_svm
from sentiment.conf import pipeline_config
from sentiment.corpus import Document, DocumentSet
from sentiment.evalmetrics import confusion, macro_f1
from sentiment.exceptions import DataError, GuardHalt
from sentiment.features import FeatureTable, build_features
from sentiment.labelprop import GraphConfig
from sentiment.models import Party, Provenance, Role, Sentiment
from sentiment.selflabel import (
    AuditLog,
    Schedule,
    SelfLabeler,
    cross_validate_propagation,
    draw_batch,
    flip_hook,
    holdback,
    run_schedule,
    transduction_eval,
)
from sentiment.synthgen import GenSpec, generate

POS, NEG = Sentiment.POSITIVE, Sentiment.NEGATIVE
PARTIES = Party.main_parties()


def clusters(n_seeds=40, n_unlabeled=400, n_holdout=60, seed=0):
    rng = np.random.default_rng(seed)
    groups = {'s': n_seeds, 'u': n_unlabeled, 'h': n_holdout}
    docs, vectors = {}, []
    ids = []
    for prefix, count in groups.items():
        docs[prefix] = []
        for i in range(count):
            label = POS if i % 2 == 0 else NEG
            doc_id = f'{prefix}{i:03d}'
            centre = np.array([3.0 if label == POS else -3.0, 0.0])
            vectors.append(centre + rng.normal(0, 0.5, 2))
            ids.append(doc_id)
            docs[prefix].append(Document(doc_id, 'text', party=PARTIES[int(rng.integers(4))], label=label))
    features = FeatureTable(ids, np.array(vectors))
    seeds = DocumentSet([d for d in docs['s']], role=Role.C)
    unlabeled = DocumentSet([Document(d.id, d.text, party=d.party) for d in docs['u']], role=Role.B)
    holdout = DocumentSet(docs['h'], role=Role.D)
    truth = {d.id: d.label for d in docs['u']}
    return features, seeds, unlabeled, holdout, truth


def labeled(n):
    return DocumentSet([Document(str(i), 't', label=POS if i % 2 else NEG) for i in range(n)], role=Role.C)


class HoldbackTests(SimpleTestCase):
    def test_floor_rule(self):
        visible, hidden = holdback(labeled(1669), 0.5, seed=1)
        self.assertEqual((len(visible), len(hidden)), (835, 834))

    def test_partition(self):
        source = labeled(101)
        visible, hidden = holdback(source, 0.3, seed=2)
        self.assertFalse(set(visible.ids()) & set(hidden.ids()))
        self.assertEqual(sorted(visible.ids() + hidden.ids()), sorted(source.ids()))

    def test_same_seed(self):
        first = holdback(labeled(50), 0.5, seed=4)
        second = holdback(labeled(50), 0.5, seed=4)
        self.assertEqual(first[1].ids(), second[1].ids())

    def test_empty_side(self):
        with self.assertRaises(DataError):
            holdback(labeled(1), 0.5, seed=1)


class TransductionTests(SimpleTestCase):
    def setUp(self):
        self.features, self.seeds, *_ = clusters()
        self.config = GraphConfig(k=5)

    def test_separable_clusters(self):
        visible, hidden = holdback(self.seeds, 0.5, seed=1)
        result = transduction_eval(self.features, {d.id: d.label for d in visible},
                                   {d.id: d.label for d in hidden}, self.config)
        self.assertGreaterEqual(result.macro_f1, 0.95)
        self.assertFalse(result.degenerate)

    def test_no_hidden_documents(self):
        with self.assertRaises(DataError):
            transduction_eval(self.features, {'s000': POS}, {}, self.config)

    def test_one_class_seeds_are_degenerate(self):
        visible = {d.id: d.label for d in self.seeds if d.label == POS}
        hidden = {d.id: d.label for d in self.seeds if d.label == NEG}
        with self.assertLogs('sentiment.selflabel', level='WARNING'):
            result = transduction_eval(self.features, visible, hidden, self.config)
        self.assertTrue(result.degenerate)

    def test_cross_validated_propagation(self):
        cv = cross_validate_propagation(self.features, self.seeds, folds=4, seed=1, graph_config=self.config)
        self.assertEqual(len(cv.fold_f1), 4)
        self.assertGreaterEqual(cv.mean, 0.95)


class DrawBatchTests(SimpleTestCase):
    def parties(self, sizes):
        owners = {}
        for party, size in zip(PARTIES, sizes):
            for i in range(size):
                owners[f'{party.value}-{i}'] = party
        return owners

    def test_equal_split_across_parties(self):
        owners = self.parties([400, 300, 500, 260])
        batch = draw_batch(list(owners), owners, 1000, np.random.default_rng(0))
        counts = {p: sum(1 for d in batch if owners[d] == p) for p in PARTIES}
        self.assertEqual(set(counts.values()), {250})

    def test_exhausted_party_is_skipped(self):
        owners = self.parties([10, 100, 100, 100])
        batch = draw_batch(list(owners), owners, 100, np.random.default_rng(0))
        counts = [sum(1 for d in batch if owners[d] == p) for p in PARTIES]
        self.assertEqual(counts, [10, 30, 30, 30])

    def test_truncated_batch(self):
        owners = self.parties([3, 2, 0, 0])
        with self.assertLogs('sentiment.selflabel', level='WARNING'):
            batch = draw_batch(list(owners), owners, 50, np.random.default_rng(0))
        self.assertEqual(sorted(batch), sorted(owners))

    def test_unstratified(self):
        owners = self.parties([50, 50, 50, 50])
        batch = draw_batch(list(owners), owners, 30, np.random.default_rng(0), stratify=False)
        self.assertEqual(len(set(batch)), 30)


class ScheduleTests(SimpleTestCase):
    def test_batch_sizes_are_positive(self):
        with self.assertRaises(ValidationError):
            Schedule(batch_sizes=(100, 0))

    def test_holdback_fraction_range(self):
        with self.assertRaises(ValidationError):
            Schedule(holdback_fraction=1.0)

    def test_round_trip_through_audit_record(self):
        schedule = Schedule(batch_sizes=(10, 20), guard_drop=0.05, seed=9)
        self.assertEqual(Schedule.from_audit([{'schedule': schedule.to_dict()}]), schedule)

    def test_audit_without_schedule(self):
        with self.assertRaises(DataError):
            Schedule.from_audit([{'iteration': 1}])


class SelfLabelerTests(SimpleTestCase):
    def setUp(self):
        self.features, self.seeds, self.unlabeled, self.holdout, self.truth = clusters()
        self.config = GraphConfig(k=5)

    def run_schedule(self, schedule, **kwargs):
        labeler = SelfLabeler(self.features, schedule, self.config, **kwargs)
        return labeler.run(self.seeds, self.unlabeled, self.holdout)

    def test_full_schedule(self):
        result = self.run_schedule(Schedule(batch_sizes=(40, 120), seed=3))
        self.assertFalse(result.halted)
        self.assertEqual(len(result.labeled), len(self.seeds) + len(self.unlabeled))
        correct = sum(result.entries[i].label == label for i, label in self.truth.items())
        self.assertGreaterEqual(correct / len(self.truth), 0.95)
        self.assertGreaterEqual(result.holdout.macro_f1, 0.95)
        self.assertGreaterEqual(result.transduction.macro_f1, 0.95)

        iterations = [record['iteration'] for record in result.audit.records]
        self.assertEqual(iterations, [0, 1, 2, 3])
        self.assertTrue(result.audit.records[-1]['final'])
        self.assertEqual(result.audit.records[1]['batch_size'], 40)

    def test_seed_labels_are_kept(self):
        result = self.run_schedule(Schedule(batch_sizes=(100,)))
        for doc in self.seeds:
            entry = result.entries[doc.id]
            self.assertEqual((entry.label, entry.provenance, entry.iteration), (doc.label, Provenance.MANUAL, 0))

    def test_empty_schedule_is_one_final_pass(self):
        result = self.run_schedule(Schedule(batch_sizes=()))
        machine = [e for e in result.entries.values() if e.provenance == Provenance.MACHINE]
        self.assertEqual(len(machine), len(self.unlabeled))
        self.assertEqual({e.iteration for e in machine}, {1})
        self.assertEqual([r['iteration'] for r in result.audit.records], [0, 1])

    def test_final_pass_chunks_match_single_pass(self):
        whole = self.run_schedule(Schedule(batch_sizes=(), final_chunk=10000))
        chunked = self.run_schedule(Schedule(batch_sizes=(), final_chunk=100))
        self.assertEqual(
            {i: e.label for i, e in whole.entries.items()},
            {i: e.label for i, e in chunked.entries.items()},
        )

    def test_flipped_batch_halts(self):
        with tempfile.TemporaryDirectory() as tmp:
            audit = AuditLog(Path(tmp) / 'audit.jsonl')
            with self.assertRaises(GuardHalt) as ctx:
                self.run_schedule(Schedule(batch_sizes=(200, 100)), corrupt_hook=flip_hook(1), audit=audit)
            written = AuditLog.read(Path(tmp) / 'audit.jsonl').records

        result = ctx.exception.result
        self.assertTrue(result.halted)
        # pre-batch state: the seed pool only
        self.assertEqual(set(result.entries), set(self.seeds.ids()))
        self.assertEqual(len(written), 2)
        self.assertFalse(written[-1]['accepted'])
        self.assertLess(written[-1]['holdout_f1_after'], written[-1]['holdout_f1_before'])
        self.assertEqual(set(audit.labeled_by()), set(self.seeds.ids()))

    def test_deterministic(self):
        schedule = Schedule(batch_sizes=(60, 60), seed=5)
        first = self.run_schedule(schedule)
        second = self.run_schedule(schedule)
        self.assertEqual(first.label_rows(), second.label_rows())
        self.assertEqual(
            [r['batch_ids'] for r in first.audit.records],
            [r['batch_ids'] for r in second.audit.records],
        )

    def test_holdout_overlap_is_rejected(self):
        leaked = DocumentSet(list(self.holdout) + [Document('u000', 'text', label=POS)], role=Role.D)
        labeler = SelfLabeler(self.features, Schedule(batch_sizes=()), self.config)
        with self.assertRaises(DataError) as ctx:
            labeler.run(self.seeds, self.unlabeled, leaked)
        self.assertEqual(ctx.exception.ids, ['u000'])

    def test_untagged_documents_with_stratified_batches(self):
        unlabeled = DocumentSet([Document('u000', 'text')])
        labeler = SelfLabeler(self.features, Schedule(batch_sizes=(1,)), self.config)
        with self.assertRaises(DataError):
            labeler.run(self.seeds, unlabeled, self.holdout)


class AuditLogTests(SimpleTestCase):
    def test_labeled_by_skips_rejected_records(self):
        log = AuditLog()
        log.append({'iteration': 0, 'labeled_ids': ['a'], 'accepted': True})
        log.append({'iteration': 1, 'labeled_ids': ['b'], 'accepted': True})
        log.append({'iteration': 2, 'labeled_ids': ['c'], 'accepted': False})
        self.assertEqual(log.labeled_by(), {'a': 0, 'b': 1})

    def test_listeners_see_every_record(self):
        seen = []
        log = AuditLog(listeners=[seen.append])
        log.append({'iteration': 0})
        self.assertEqual(seen, [{'iteration': 0}])


class SyntheticBenchmarkTests(SimpleTestCase):
    """2000 generated documents with 5% visible labels and the default schedule."""

    def test_selflabel_keeps_up_with_svm_on_the_same_seeds(self):
        corpus = generate(GenSpec(n_docs=2000, sentiment_word_rate=0.6, label_fraction=0.05,
                                  holdout_size=200, seed=1))
        config = pipeline_config()
        seeds, unlabeled, holdout = corpus.seeds(), corpus.unlabeled(), corpus.holdout
        features = build_features(list(seeds) + list(unlabeled) + list(holdout), config)

        result = run_schedule(seeds, unlabeled, holdout, Schedule.from_mapping(config['SCHEDULE']),
                              config, features=features)
        self.assertFalse(result.halted)
        self.assertEqual(len(result.entries), 2000)

        section = config['BASELINE']
        model = train_svm(features.rows(seeds.ids()), [d.label for d in seeds],
                          TrainConfig(section['reg_lambda'], section['epochs'], section['seed']))
        predicted = predict(model, features.rows(holdout.ids()))
        svm_f1 = macro_f1(confusion(predicted, [d.label for d in holdout]))

        self.assertGreaterEqual(result.holdout.macro_f1, 0.90)
        self.assertGreaterEqual(result.holdout.macro_f1, svm_f1 - 0.02)
