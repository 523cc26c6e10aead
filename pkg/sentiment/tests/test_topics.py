import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from sentiment.exceptions import DataError
from sentiment.models import Party, Sentiment
from sentiment.templatetags.chart_filters import fmt4, scale, times
from sentiment.textprep import ProcessedDoc
from sentiment.topics import (
    LdaConfig,
    conditional,
    fit_lda,
    fit_party_topics,
    gibbs_sweep,
    initialize,
    resample_token,
    ngrams,
    party_ngrams,
    render_topic_svg,
    top_words,
    topic_report,
    write_ngram_csv,
    write_topic_svgs,
)

NEGATIVE_WORDS = ('corrupt', 'loot', 'fail', 'scandal', 'steal')
POSITIVE_WORDS = ('hope', 'build', 'win', 'unite', 'grow')


def two_lexicon_corpus(n_docs=30, length=10, seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        words = NEGATIVE_WORDS if i % 2 else POSITIVE_WORDS
        docs.append(ProcessedDoc(f'd{i}', tuple(words[j] for j in rng.integers(0, 5, size=length))))
    return docs


def doc(doc_id, text, party=None, label=None):
    return ProcessedDoc(doc_id, tuple(text.split()), party=party, label=label)


def align_topics(topics, lexicons):
    """Greedy one-to-one pairing of topics with lexicons by shared words."""
    pairs = sorted(
        ((len(topic & lexicon), t, j) for t, topic in enumerate(topics)
         for j, lexicon in enumerate(lexicons)),
        key=lambda pair: (-pair[0], pair[1], pair[2]),
    )
    aligned, used_topics, used_lexicons = {}, set(), set()
    for overlap, t, j in pairs:
        if t in used_topics or j in used_lexicons:
            continue
        aligned[t] = (j, overlap)
        used_topics.add(t)
        used_lexicons.add(j)
    return aligned


class LdaConfigTests(SimpleTestCase):
    def test_default_alpha(self):
        self.assertEqual(LdaConfig(K=5).alpha, 10.0)

    def test_invalid(self):
        with self.assertRaises(ValidationError):
            LdaConfig(K=1)
        with self.assertRaises(ValidationError):
            LdaConfig(beta=0)


class GibbsTests(SimpleTestCase):
    def test_counts_conserved_every_sweep(self):
        model = initialize(two_lexicon_corpus(5, 20), LdaConfig(K=3, seed=2))
        model.check_counts()
        for _ in range(1000):
            gibbs_sweep(model)
            model.check_counts()
        self.assertEqual(model.n_k.sum(), 100)
        self.assertEqual(model.sweeps, 1000)

    def test_single_token_conditional_is_uniform(self):
        model = initialize([doc('d0', 'anc')], LdaConfig(K=2, alpha=0.1, beta=0.01))
        np.testing.assert_allclose(conditional(model, 0), [0.5, 0.5])

    def test_distributions_sum_to_one(self):
        model = fit_lda(two_lexicon_corpus(), K=2, alpha=0.5, iters=20, seed=1)
        np.testing.assert_allclose(model.phi().sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(model.theta().sum(axis=1), 1.0, atol=1e-9)

    def test_same_seed_same_assignments(self):
        first = fit_lda(two_lexicon_corpus(), K=2, iters=10, seed=4)
        second = fit_lda(two_lexicon_corpus(), K=2, iters=10, seed=4)
        np.testing.assert_array_equal(first.z, second.z)

    def test_lexicon_recovery(self):
        recovered = 0
        for seed in range(10):
            model = fit_lda(two_lexicon_corpus(seed=seed), K=2, alpha=0.5, iters=100, seed=seed)
            topics = [{w for w, _ in words} for words in top_words(model, 5)]
            aligned = align_topics(topics, [set(NEGATIVE_WORDS), set(POSITIVE_WORDS)])
            if len(aligned) == 2 and all(overlap >= 4 for _, overlap in aligned.values()):
                recovered += 1
        self.assertGreaterEqual(recovered, 9)


    def test_resampled_token_follows_conditional(self):
        model = initialize(two_lexicon_corpus(4, 6), LdaConfig(K=3, alpha=0.5, beta=0.1, seed=3))
        i = 7
        expected = conditional(model, i)
        rng = np.random.default_rng(5)
        draws = [resample_token(model, i, u) for u in rng.random(20000)]
        observed = np.bincount(draws, minlength=3) / len(draws)
        np.testing.assert_allclose(observed, expected, rtol=0, atol=0.015)
        np.testing.assert_allclose(conditional(model, i), expected, atol=1e-12)
        model.check_counts()

    def test_alignment_is_one_to_one(self):
        negative, positive = set(NEGATIVE_WORDS), set(POSITIVE_WORDS)
        aligned = align_topics([negative, set(NEGATIVE_WORDS[:4])], [negative, positive])
        self.assertEqual(aligned, {0: (0, 5), 1: (1, 0)})
    def test_invalid_runs(self):
        with self.assertRaises(ValidationError):
            fit_lda(two_lexicon_corpus(), K=2, iters=0)
        with self.assertRaises(DataError):
            fit_lda([doc('d0', '')], K=2, iters=1)


class TopWordsTests(SimpleTestCase):
    def test_ties_follow_vocabulary_order(self):
        # untrained model over one document: every word appears once
        model = initialize([doc('d0', 'zebra apple mango')], LdaConfig(K=2, seed=0))
        model.n_kw[:] = 0
        model.n_k[:] = 0
        words = top_words(model, 3)[0]
        self.assertEqual([w for w, _ in words], ['apple', 'mango', 'zebra'])

    def test_k_below_one(self):
        model = initialize([doc('d0', 'a b')], LdaConfig(K=2))
        with self.assertRaises(ValidationError):
            top_words(model, 0)


class PartyTopicTests(SimpleTestCase):
    def setUp(self):
        self.corpus = [
            doc('a1', 'load shedding again', Party.ANC, Sentiment.NEGATIVE),
            doc('a2', 'load shedding tender fraud', Party.ANC, Sentiment.NEGATIVE),
            doc('a3', 'great rally', Party.ANC, Sentiment.POSITIVE),
            doc('e1', 'land expropriation now', Party.EFF, Sentiment.NEGATIVE),
        ]
        self.config = LdaConfig(K=2, iters=5, top_k=3)

    def test_one_model_per_party(self):
        models = fit_party_topics(self.corpus, self.config)
        self.assertEqual(set(models), {Party.ANC, Party.EFF})
        self.assertEqual(models[Party.ANC].doc_ids, ('a1', 'a2'))

    def test_report_and_svgs(self):
        models = fit_party_topics(self.corpus, self.config, workers=2)
        report = topic_report(models, 3)
        self.assertEqual(report['ANC']['documents'], 2)
        self.assertEqual(len(report['EFF']['topics']), 2)
        self.assertEqual(len(report['ANC']['theta']), 2)
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_topic_svgs(models, tmp, 3)
            self.assertEqual(sorted(p.name for p in paths),
                             ['anc_topic0.svg', 'anc_topic1.svg', 'eff_topic0.svg', 'eff_topic1.svg'])
            self.assertTrue(paths[0].read_text(encoding='utf-8').startswith('<svg'))

    def test_no_matching_documents(self):
        with self.assertRaises(DataError):
            fit_party_topics(self.corpus, self.config, sentiment=Sentiment.ABSTAIN)


class SvgTests(SimpleTestCase):
    def test_bars(self):
        svg = render_topic_svg('ANC topic 0', [('load', 0.4), ('shed', 0.2)])
        self.assertIn('>ANC topic 0</text>', svg)
        self.assertIn('width="300.0"', svg)
        self.assertIn('width="150.0"', svg)
        self.assertIn('translate(0,50)', svg)
        self.assertIn('0.2000', svg)

    def test_filters(self):
        self.assertEqual(scale(0.2, 0.4), 50.0)
        self.assertEqual(scale(1, 0), 0)
        self.assertEqual(times('x', 2), 0)
        self.assertEqual(fmt4(0.123456), '0.1235')


class NgramTests(SimpleTestCase):
    def test_repeated_phrase_ranks_first(self):
        corpus = [doc(f'd{i}', 'pay back the money now') for i in range(7)]
        corpus.append(doc('x', 'the money is gone'))
        table = ngrams(corpus, n=4)
        self.assertEqual(table.entries[0], (('back', 'the', 'money', 'now'), 7))
        self.assertEqual(table.entries[1], (('pay', 'back', 'the', 'money'), 7))
        self.assertEqual(table.total_windows, 7 * 2 + 1)

    def test_windows_do_not_cross_documents(self):
        table = ngrams([doc('a', 'one two'), doc('b', 'three four')], n=3)
        self.assertEqual(table.entries, [])

    def test_top_limit_and_workers(self):
        corpus = [doc(f'd{i}', f'w{i % 3} w{i % 5} w{i % 7}') for i in range(60)]
        serial = ngrams(corpus, n=2, top=4)
        threaded = ngrams(corpus, n=2, top=4, workers=3)
        self.assertEqual(serial.entries, threaded.entries)
        self.assertEqual(len(serial.entries), 4)

    def test_invalid_n(self):
        with self.assertRaises(ValidationError):
            ngrams([], n=0)

    def test_party_tables_and_csv(self):
        corpus = [
            doc('a', 'pay back the money', Party.ANC, Sentiment.NEGATIVE),
            doc('b', 'pay back the money', Party.ANC, Sentiment.POSITIVE),
            doc('c', 'land now or never', Party.EFF, Sentiment.NEGATIVE),
        ]
        tables = party_ngrams(corpus, n=4, top=5)
        self.assertEqual(tables['ANC'].entries, [(('pay', 'back', 'the', 'money'), 1)])
        with tempfile.TemporaryDirectory() as tmp:
            frame = pd.read_csv(write_ngram_csv(tables, Path(tmp) / 'ngrams.csv'))
        self.assertEqual(list(frame.columns), ['party', 'rank', 'ngram', 'count'])
        self.assertEqual(frame['party'].tolist(), ['ANC', 'EFF'])
        self.assertEqual(party_ngrams(corpus, n=4, sentiment=None)['ANC'].entries[0][1], 2)
