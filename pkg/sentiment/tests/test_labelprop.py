"""
Similarity graph construction, iterative propagation and the closed-form
oracle.
"""
import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from sentiment.exceptions import DataError, SingularSystemError
from sentiment.labelprop import (
    LabelDistribution,
    SimilarityGraph,
    build_graph,
    class_mass_normalize,
    closed_form,
    harden,
    propagate,
)
from sentiment.models import Sentiment

POS, NEG = Sentiment.POSITIVE, Sentiment.NEGATIVE


def graph_from(edges, n):
    rows, cols, values = [], [], []
    for a, b, w in edges:
        rows += [a, b]
        cols += [b, a]
        values += [w, w]
    return SimilarityGraph(n, sparse.csr_matrix((values, (rows, cols)), shape=(n, n)), 1.0, n - 1)


def random_connected_graphs(count, n=30, k=5, seed=0):
    rng = np.random.default_rng(seed)
    while count:
        graph = build_graph(rng.normal(size=(n, 4)), k=k)
        if connected_components(graph.weights, directed=False)[0] == 1:
            count -= 1
            yield rng, graph


class BuildGraphTests(SimpleTestCase):
    def test_identical_pair(self):
        graph = build_graph(np.ones((2, 3)), k=1)
        self.assertEqual(graph.weights[0, 1], 1.0)
        self.assertEqual(graph.sigma, 1.0)

    def test_collinear_points(self):
        graph = build_graph(np.array([[0.0], [1.0], [10.0]]), k=2, sigma=1)
        self.assertAlmostEqual(graph.weights[0, 1], math.exp(-1))
        self.assertAlmostEqual(math.log(graph.weights[0, 2]), -100.0)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        graph = build_graph(rng.normal(size=(200, 5)), k=4)
        self.assertEqual(abs(graph.weights - graph.weights.T).max(), 0)

    def test_worker_count_does_not_change_graph(self):
        rng = np.random.default_rng(2)
        vectors = rng.normal(size=(600, 3))
        serial = build_graph(vectors, k=3)
        threaded = build_graph(vectors, k=3, workers=4)
        self.assertEqual(abs(serial.weights - threaded.weights).max(), 0)

    def test_sparse_input(self):
        vectors = sparse.csr_matrix(np.array([[1.0, 0], [0.9, 0], [0, 1.0]]))
        graph = build_graph(vectors, k=1, sigma=1)
        self.assertGreater(graph.weights[0, 1], 0)

    def test_too_few_nodes(self):
        with self.assertRaises(DataError):
            build_graph(np.ones((1, 3)))


class PropagateTests(SimpleTestCase):
    def test_all_clamped(self):
        graph = graph_from([(0, 1, 1.0)], 2)
        seeds = LabelDistribution.from_seeds(2, {0: POS, 1: NEG})
        result = propagate(graph, seeds)
        self.assertEqual(result.iterations, 1)
        self.assertEqual(result.final_delta, 0.0)
        np.testing.assert_array_equal(result.distribution.Y, seeds.Y)

    def test_barbell(self):
        # two 5-cliques joined by one weak bridge, one seed per clique
        edges = [(a, b, 1.0) for a in range(5) for b in range(a + 1, 5)]
        edges += [(a, b, 1.0) for a in range(5, 10) for b in range(a + 1, 10)]
        edges.append((4, 9, 0.01))
        graph = graph_from(edges, 10)
        result = propagate(graph, LabelDistribution.from_seeds(10, {0: POS, 5: NEG}))
        Y = result.distribution.Y
        self.assertTrue(result.converged)
        self.assertTrue((Y[1:5, 0] > 0.9).all())
        self.assertTrue((Y[6:10, 1] > 0.9).all())

    def test_isolated_node_stays_uniform(self):
        graph = graph_from([(0, 1, 1.0)], 3)
        result = propagate(graph, LabelDistribution.from_seeds(3, {0: POS}))
        self.assertEqual(result.isolated_nodes, [2])
        np.testing.assert_array_equal(result.distribution.Y[2], [0.5, 0.5])

    def test_max_iter_without_convergence(self):
        graph = graph_from([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4)
        result = propagate(graph, LabelDistribution.from_seeds(4, {0: POS}), eps=1e-12, max_iter=2)
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 2)
        self.assertEqual(len(result.deltas), 2)

    def test_rows_stay_distributions(self):
        for rng, graph in random_connected_graphs(5, seed=3):
            seeds = LabelDistribution.from_seeds(graph.n, {0: POS, 1: NEG, 2: [0.7, 0.3]})
            result = propagate(graph, seeds, mass_normalize=True)
            np.testing.assert_allclose(result.distribution.Y.sum(axis=1), 1.0, atol=1e-12)
            self.assertTrue((result.distribution.Y >= 0).all())

    def test_seed_size_mismatch(self):
        with self.assertRaises(DataError):
            propagate(graph_from([(0, 1, 1.0)], 2), LabelDistribution.from_seeds(3, {0: POS}))

    def test_relabeling_nodes_permutes_result(self):
        for rng, graph in random_connected_graphs(5, seed=4):
            seeds = LabelDistribution.from_seeds(graph.n, {0: POS, 1: NEG, 2: POS})
            order = rng.permutation(graph.n)
            inverse = np.argsort(order)
            shuffled = SimilarityGraph(
                graph.n, graph.weights[order][:, order].tocsr(), graph.sigma, graph.k,
            )
            shuffled_seeds = LabelDistribution(seeds.Y[order], seeds.clamped[order])
            expected = propagate(graph, seeds, eps=1e-10).distribution.Y
            actual = propagate(shuffled, shuffled_seeds, eps=1e-10).distribution.Y
            np.testing.assert_allclose(actual[inverse], expected, rtol=0, atol=1e-9)

    def test_sweep_changes_never_grow(self):
        for rng, graph in random_connected_graphs(10, seed=5):
            seeded = rng.choice(graph.n, size=4, replace=False)
            seeds = LabelDistribution.from_seeds(
                graph.n, {int(i): (POS if j % 2 else NEG) for j, i in enumerate(seeded)},
            )
            deltas = propagate(graph, seeds, eps=1e-9).deltas
            self.assertGreater(len(deltas), 1)
            for before, after in zip(deltas, deltas[1:]):
                self.assertLessEqual(after, before + 1e-12)


class ClosedFormTests(SimpleTestCase):
    def test_single_node_tied_to_positive(self):
        Y = closed_form(graph_from([(0, 1, 1.0)], 2), LabelDistribution.from_seeds(2, {0: POS})).Y
        np.testing.assert_allclose(Y[1], [1.0, 0.0])

    def test_chain_is_symmetric(self):
        graph = graph_from([(0, 1, 1.0), (1, 2, 1.0)], 3)
        Y = closed_form(graph, LabelDistribution.from_seeds(3, {0: POS, 2: NEG})).Y
        np.testing.assert_allclose(Y[1], [0.5, 0.5])

    def test_matches_iterative_on_random_graphs(self):
        for rng, graph in random_connected_graphs(50):
            seeded = rng.choice(graph.n, size=6, replace=False)
            seeds = LabelDistribution.from_seeds(
                graph.n, {int(i): (POS if j % 2 else NEG) for j, i in enumerate(seeded)},
            )
            iterative = propagate(graph, seeds, eps=1e-10, max_iter=100000)
            exact = closed_form(graph, seeds)
            np.testing.assert_allclose(iterative.distribution.Y, exact.Y, rtol=0, atol=1e-6)

    def test_unreachable_component(self):
        graph = graph_from([(0, 1, 1.0), (2, 3, 1.0)], 4)
        with self.assertRaises(SingularSystemError):
            closed_form(graph, LabelDistribution.from_seeds(4, {0: POS}))


class HardenTests(SimpleTestCase):
    def distribution(self, *rows):
        return LabelDistribution(np.array(rows), np.zeros(len(rows), dtype=bool))

    def test_confident_row(self):
        self.assertEqual(harden(self.distribution([0.9, 0.1])), [POS])

    def test_tie_abstains(self):
        self.assertEqual(harden(self.distribution([0.5, 0.5])), [Sentiment.ABSTAIN])

    def test_below_threshold_abstains(self):
        self.assertEqual(harden(self.distribution([0.55, 0.45]), threshold=0.6), [Sentiment.ABSTAIN])
        self.assertEqual(harden(self.distribution([0.45, 0.55])), [NEG])

    def test_threshold_range(self):
        with self.assertRaises(ValidationError):
            harden(self.distribution([0.9, 0.1]), threshold=1.0)


class ClassMassTests(SimpleTestCase):
    def test_free_mass_follows_seed_priors(self):
        seeds = LabelDistribution(
            np.array([[1, 0], [1, 0], [1, 0], [0, 1], [0.5, 0.5], [0.5, 0.5]]),
            np.array([True, True, True, True, False, False]),
        )
        rescaled = class_mass_normalize(seeds)
        np.testing.assert_allclose(rescaled.Y[4], [0.75, 0.25])
        np.testing.assert_array_equal(rescaled.Y[:4], seeds.Y[:4])
