import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from sentiment.embed import (
    EmbedConfig,
    EmbeddingModel,
    NoiseSampler,
    build_embedding_vocab,
    cbow_loss_grad,
    doc_vector,
    initialize,
    load_model,
    nearest,
    sgd_step,
    sgns_loss_grad,
    train,
)
from sentiment.exceptions import ArtifactFormatError
from sentiment.models import EmbedMode
from sentiment.textprep import ProcessedDoc
from sentiment.vectorize import Vocabulary


def table_model(input_vectors, output_vectors=None, negatives=1):
    input_vectors = np.asarray(input_vectors, dtype=np.float64)
    size, dim = input_vectors.shape
    if output_vectors is None:
        output_vectors = np.zeros_like(input_vectors)
    vocab = Vocabulary([f'w{i}' for i in range(size)], [1] * size, 1)
    config = EmbedConfig(dim=dim, negatives=negatives, min_count=1)
    return EmbeddingModel(input_vectors, np.asarray(output_vectors, dtype=np.float64), vocab, config)


def lexicon_corpus(n_docs=200, length=10, seed=0):
    rng = np.random.default_rng(seed)
    lexicons = (['corrupt', 'loot', 'fail', 'scandal', 'steal'], ['hope', 'build', 'win', 'unite', 'grow'])
    docs = []
    for i in range(n_docs):
        words = lexicons[i % 2]
        docs.append(ProcessedDoc(f'd{i}', tuple(words[j] for j in rng.integers(0, 5, size=length))))
    return docs, lexicons


class LossTests(SimpleTestCase):
    """Loss values and gradients of one negative-sampling example"""

    def check_gradients(self, loss_grad, roles):
        rng = np.random.default_rng(42)
        worst = 0.0
        h = 1e-5
        for _ in range(100):
            model = table_model(rng.normal(0, 0.5, (8, 10)), rng.normal(0, 0.5, (8, 10)))
            args = roles(rng)
            _, grads = loss_grad(*args, model)
            for table, analytic in (('input', grads.input), ('output', grads.output)):
                vectors = model.input_vectors if table == 'input' else model.output_vectors
                for row, grad in analytic.items():
                    numeric = np.zeros_like(grad)
                    for d in range(len(grad)):
                        saved = vectors[row, d]
                        vectors[row, d] = saved + h
                        up, _ = loss_grad(*args, model)
                        vectors[row, d] = saved - h
                        down, _ = loss_grad(*args, model)
                        vectors[row, d] = saved
                        numeric[d] = (up - down) / (2 * h)
                    error = np.linalg.norm(grad - numeric) / max(np.linalg.norm(grad) + np.linalg.norm(numeric), 1e-12)
                    worst = max(worst, error)
        self.assertLess(worst, 1e-4)

    def test_zero_state_loss(self):
        model = table_model(np.zeros((8, 10)))
        loss, _ = sgns_loss_grad(0, 1, [2, 3, 4, 5, 6], model)
        self.assertAlmostEqual(loss, 6 * math.log(2), delta=1e-12)
        loss, _ = cbow_loss_grad([0, 2], 1, [3, 4, 5, 6, 7], model)
        self.assertAlmostEqual(loss, 6 * math.log(2), delta=1e-12)

    def test_hand_example(self):
        # v=(1,0), u_ctx=(1,0), u_neg=(-1,0): -ln s(1) - ln s(1)
        model = table_model([[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [-1, 0]])
        loss, _ = sgns_loss_grad(0, 1, [2], model)
        self.assertAlmostEqual(loss, 2 * math.log(1 + math.exp(-1)), places=12)
        self.assertAlmostEqual(loss, 0.6265, places=4)

    def test_skipgram_gradients(self):
        self.check_gradients(sgns_loss_grad, lambda rng: (0, 1, [2, 3, 4]))

    def test_cbow_gradients(self):
        self.check_gradients(cbow_loss_grad, lambda rng: ([0, 1, 5], 2, [3, 4, 6]))

    def test_single_word_context_matches_skipgram(self):
        rng = np.random.default_rng(3)
        model = table_model(rng.normal(size=(5, 4)), rng.normal(size=(5, 4)))
        cbow, _ = cbow_loss_grad([1], 2, [3, 4], model)
        skipgram, _ = sgns_loss_grad(1, 2, [3, 4], model)
        self.assertAlmostEqual(cbow, skipgram, places=12)

    def test_empty_context_is_skipped(self):
        loss, grads = cbow_loss_grad([], 2, [3], table_model(np.ones((4, 2))))
        self.assertEqual(loss, 0.0)
        self.assertEqual((grads.input, grads.output), ({}, {}))

    def test_step_moves_only_the_example_rows(self):
        rng = np.random.default_rng(9)
        model = table_model(rng.normal(size=(12, 6)), rng.normal(size=(12, 6)), negatives=3)
        before_in, before_out = model.input_vectors.copy(), model.output_vectors.copy()
        _, grads = sgns_loss_grad(2, 5, [7, 9, 11], model)
        sgd_step(model, grads, lr=0.1)
        moved_in = np.flatnonzero(np.any(model.input_vectors != before_in, axis=1))
        moved_out = np.flatnonzero(np.any(model.output_vectors != before_out, axis=1))
        self.assertEqual(moved_in.tolist(), [2])
        self.assertEqual(moved_out.tolist(), [5, 7, 9, 11])


class NoiseSamplerTests(SimpleTestCase):
    def test_excluded_index_never_drawn(self):
        sampler = NoiseSampler([100, 1, 1])
        rng = np.random.default_rng(0)
        for _ in range(50):
            self.assertNotIn(0, sampler.negatives(rng, 5, exclude=0))

    def test_power_law_probabilities(self):
        sampler = NoiseSampler([16, 1])
        self.assertAlmostEqual(sampler.probabilities[0], 8 / 9)

    def test_draw_frequencies(self):
        counts = [50, 20, 10, 5, 1]
        sampler = NoiseSampler(counts)
        draws = sampler.draw(np.random.default_rng(11), 1_000_000)
        observed = np.bincount(draws, minlength=len(counts)) / len(draws)
        expected = np.asarray(counts, dtype=float) ** 0.75
        expected /= expected.sum()
        np.testing.assert_allclose(observed, expected, rtol=0, atol=2e-3)


class TrainTests(SimpleTestCase):
    def test_disjoint_lexicons_separate(self):
        docs, lexicons = lexicon_corpus()
        config = EmbedConfig(dim=8, window=2, negatives=3, epochs=10, min_count=1, seed=5)
        model = train(docs, config)
        unit = model.input_vectors / np.linalg.norm(model.input_vectors, axis=1, keepdims=True)
        groups = [[model.vocab.index[w] for w in lexicon] for lexicon in lexicons]
        intra = np.mean([unit[i] @ unit[j] for g in groups for i in g for j in g if i < j])
        cross = np.mean([unit[i] @ unit[j] for i in groups[0] for j in groups[1]])
        self.assertGreater(intra, cross)

    def test_zero_epochs_returns_initialization(self):
        docs, _ = lexicon_corpus(20)
        config = EmbedConfig(dim=6, epochs=0, min_count=1)
        vocab, counts = build_embedding_vocab(docs, 1)
        np.testing.assert_array_equal(train(docs, config).input_vectors,
                                      initialize(vocab, config, counts).input_vectors)

    def test_single_worker_is_reproducible(self):
        docs, _ = lexicon_corpus(40)
        for mode in (EmbedMode.SKIPGRAM, EmbedMode.CBOW):
            config = EmbedConfig(dim=6, epochs=2, min_count=1, mode=mode, seed=9)
            first, second = train(docs, config), train(docs, config)
            np.testing.assert_array_equal(first.input_vectors, second.input_vectors)
            np.testing.assert_array_equal(first.output_vectors, second.output_vectors)


class NearestTests(SimpleTestCase):
    def setUp(self):
        self.model = table_model([[1, 0], [1, 1], [0, 1], [-1, 0]])

    def test_query_word_is_excluded(self):
        words = [w for w, _ in nearest(self.model, 'w0', k=10)]
        self.assertNotIn('w0', words)

    def test_ranking_matches_brute_force(self):
        result = nearest(self.model, 'w0', k=3)
        self.assertEqual([w for w, _ in result], ['w1', 'w2', 'w3'])
        self.assertAlmostEqual(result[0][1], 1 / math.sqrt(2))
        self.assertEqual(result[1][1], 0.0)
        self.assertAlmostEqual(result[2][1], -1.0)


class DocVectorTests(SimpleTestCase):
    def setUp(self):
        self.model = table_model([[1, 2, 3], [3, 0, -1]])

    def test_single_token(self):
        vector, empty = doc_vector(ProcessedDoc('d', ('w1',)), self.model)
        np.testing.assert_array_equal(vector, [3, 0, -1])
        self.assertFalse(empty)

    def test_two_tokens_average(self):
        vector, _ = doc_vector(ProcessedDoc('d', ('w0', 'w1', 'oov')), self.model)
        np.testing.assert_allclose(vector, [2, 1, 1])

    def test_empty_doc_is_flagged(self):
        vector, empty = doc_vector(ProcessedDoc('d', ('oov',)), self.model)
        self.assertTrue(empty)
        np.testing.assert_array_equal(vector, np.zeros(3))


class ModelFileTests(SimpleTestCase):
    def test_foreign_file_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'vocab.csv'
            path.write_text('# n_docs=3\nterm,df\n', encoding='utf-8')
            with self.assertRaises(ArtifactFormatError):
                load_model(path)
