import os
import math
import unittest
import tempfile
from collections import Counter

import numpy as np
from scipy.stats import chisquare

from qsat.hypergraph import (
    InteractionGraph,
    ProjectorSet,
    InfeasibleEnsembleError,
    sample_er_graph,
    haar_states,
    sample_projectors,
    find_minifans,
    degree_histogram,
    poisson_tv_distance,
    save_instance,
    load_instance,
)
from qsat.utils import RngSpec


class TestInteractionGraph(unittest.TestCase):
    def test_clauses_are_sorted(self):
        g = InteractionGraph(5, 3, ((2, 0, 1), (4, 3, 1)))
        self.assertEqual(g.clauses, ((0, 1, 2), (1, 3, 4)))
        self.assertEqual(g.degrees.tolist(), [1, 2, 1, 1, 1])
        self.assertAlmostEqual(g.alpha, 0.4)

    def test_invalid_clauses(self):
        with self.assertRaises(ValueError):
            InteractionGraph(4, 3, ((0, 1),))
        with self.assertRaises(ValueError):
            InteractionGraph(4, 3, ((0, 1, 4),))
        with self.assertRaises(ValueError):
            InteractionGraph(4, 3, ((0, 0, 1),))
        with self.assertRaises(ValueError):
            InteractionGraph(4, 3, ((0, 1, 2), (2, 1, 0)))

    def test_induced_relabels(self):
        g = InteractionGraph(6, 3, ((0, 2, 4), (1, 3, 5), (2, 4, 5)))
        sub, qubit_map = g.induced([0, 2])
        self.assertEqual(qubit_map, {0: 0, 2: 1, 4: 2, 5: 3})
        self.assertEqual(sub.clauses, ((0, 1, 2), (1, 2, 3)))
        self.assertEqual(sub.n_qubits, 4)

    def test_with_clauses(self):
        g = InteractionGraph(4, 3, ((0, 1, 2),))
        self.assertEqual(g.with_clauses([(1, 2, 3)]).n_clauses, 2)
        self.assertEqual(g.n_clauses, 1)


class TestSampling(unittest.TestCase):
    def test_sample_is_reproducible(self):
        g1 = sample_er_graph(30, 25, 3, RngSpec(1, 2))
        g2 = sample_er_graph(30, 25, 3, RngSpec(1, 2))
        self.assertEqual(g1.clauses, g2.clauses)
        self.assertEqual(len(set(g1.clauses)), 25)

    def test_dense_regime_takes_every_clause(self):
        g = sample_er_graph(5, math.comb(5, 3), 3, RngSpec(0))
        self.assertEqual(len(set(g.clauses)), 10)

    def test_clause_pairs_are_uniform(self):
        # C(5, 3) = 10 clauses give 45 unordered pairs
        gen = RngSpec(3).generator()
        draws = 45 * 200
        counts = Counter(
            frozenset(sample_er_graph(5, 2, 3, gen).clauses)
            for _ in range(draws)
        )
        self.assertEqual(len(counts), 45)
        observed = np.array(list(counts.values()))
        self.assertGreater(chisquare(observed).pvalue, 1e-3)

    def test_infeasible(self):
        with self.assertRaises(InfeasibleEnsembleError):
            sample_er_graph(4, 5, 3, RngSpec(0))

    def test_empty(self):
        g = sample_er_graph(10, 0, 3, RngSpec(0))
        self.assertEqual(g.n_clauses, 0)
        self.assertEqual(degree_histogram(g), {0: 10})

    def test_degrees_are_poisson(self):
        n = 20_000
        m = int(round(0.917 * n))
        g = sample_er_graph(n, m, 3, RngSpec(3))
        self.assertAlmostEqual(g.degrees.mean(), 3 * m / n, places=12)
        distance = poisson_tv_distance(degree_histogram(g), 3 * m / n)
        self.assertLess(distance, 0.02)

    def test_haar_moment(self):
        gen = RngSpec(4).generator()
        states = haar_states(gen, (10_000,), 8)
        self.assertAlmostEqual(np.mean(np.abs(states[:, 0]) ** 2), 1 / 8,
                               delta=0.01)


class TestProjectors(unittest.TestCase):
    def test_modes(self):
        g = sample_er_graph(8, 5, 3, RngSpec(0))
        generic = sample_projectors(g, "generic", RngSpec(1))
        product = sample_projectors(g, "product", RngSpec(1))
        self.assertEqual(generic.vectors.shape, (5, 8))
        self.assertEqual(product.vectors.shape, (5, 3, 2))
        norms = np.linalg.norm(product.clause_vectors(), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_product_expansion_is_kronecker(self):
        g = InteractionGraph(3, 3, ((0, 1, 2),))
        product = sample_projectors(g, "product", RngSpec(2))
        v = product.vectors[0]
        expected = np.kron(np.kron(v[0], v[1]), v[2])
        np.testing.assert_allclose(product.clause_vectors()[0], expected)

    def test_unnormalized_vectors_rejected(self):
        with self.assertRaises(ValueError):
            ProjectorSet("generic", np.ones((1, 8)))


class TestMinifans(unittest.TestCase):
    def test_pairs_sharing_two_qubits(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (0, 1, 3), (2, 3, 4)))
        self.assertEqual(find_minifans(g), [(0, 1)])

    def test_no_minifans(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        self.assertEqual(find_minifans(g), [])


class TestInstanceFiles(unittest.TestCase):
    def test_save_and_load(self):
        g = sample_er_graph(9, 6, 3, RngSpec(0))
        projectors = sample_projectors(g, "product", RngSpec(1))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "instance.json")
            save_instance(path, g, projectors, RngSpec(5, 6))
            instance = load_instance(path)
        self.assertEqual(instance["graph"].clauses, g.clauses)
        self.assertEqual(instance["rng"], RngSpec(5, 6))
        self.assertIsNone(instance["core"])
        np.testing.assert_allclose(instance["projectors"].vectors,
                                   projectors.vectors, atol=1e-15)


if __name__ == '__main__':
    unittest.main()
