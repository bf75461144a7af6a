import os
import math
import unittest
import warnings

import numpy as np

from qsat.core import (
    CoreDecomposition,
    DegreeLaw,
    strip_core,
    replay_trace,
    hair_components,
    lambda_star,
    core_stats,
    core_stats_table,
    degree_law_for_beta,
    empirical_vs_analytic,
    sample_cores,
)
from qsat.hypergraph import InteractionGraph, sample_er_graph
from qsat.utils import RngSpec


SLOW = os.environ.get("QSAT_SLOW") == "1"

# Core {0, 1, 2, 3} with clauses 0-2, hair {4, 5} hanging off clause 3
SMALL = InteractionGraph(6, 3, ((0, 1, 2), (0, 1, 3), (0, 2, 3), (3, 4, 5)))


class TestStripCore(unittest.TestCase):
    def test_small_graph(self):
        decomposition = strip_core(SMALL)
        self.assertEqual(decomposition.core_qubits, (0, 1, 2, 3))
        self.assertEqual(decomposition.core_clauses, (0, 1, 2))
        self.assertEqual(decomposition.hair_qubits, (4, 5))
        self.assertEqual(decomposition.hair_clauses, (3,))
        self.assertEqual(decomposition.removal_trace, ((4, 3), (5, -1)))
        self.assertAlmostEqual(decomposition.beta, 0.75)

    def test_tree_strips_completely(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        decomposition = strip_core(g)
        self.assertEqual(decomposition.n_core, 0)
        self.assertEqual(decomposition.m_core, 0)
        self.assertTrue(math.isnan(decomposition.beta))

    def test_order_does_not_change_the_core(self):
        g = sample_er_graph(200, 200, 3, RngSpec(1))
        reference = strip_core(g)
        for seed in range(100):
            shuffled = strip_core(g, rng=RngSpec(seed))
            self.assertEqual(shuffled.core_qubits, reference.core_qubits)
            self.assertEqual(shuffled.core_clauses, reference.core_clauses)
            self.assertEqual(
                replay_trace(g, shuffled.removal_trace),
                (reference.core_qubits, reference.core_clauses),
            )

    def test_core_shrinks_with_the_graph(self):
        g = sample_er_graph(60, 60, 3, RngSpec(4))
        full = strip_core(g)
        for m in range(0, g.n_clauses + 1, 5):
            sub = strip_core(InteractionGraph(g.n_qubits, 3, g.clauses[:m]))
            self.assertTrue(set(sub.core_clauses) <= set(full.core_clauses))
            self.assertTrue(set(sub.core_qubits) <= set(full.core_qubits))

    def test_core_degrees_at_least_two(self):
        g = sample_er_graph(500, 480, 3, RngSpec(2))
        core, _ = strip_core(g).core_graph(g)
        if core.n_qubits:
            self.assertGreaterEqual(core.degrees.min(), 2)

    def test_replay_rejects_invalid_trace(self):
        with self.assertRaises(AssertionError):
            replay_trace(SMALL, ((0, 0),))

    def test_serialization(self):
        decomposition = strip_core(SMALL)
        self.assertEqual(
            CoreDecomposition.from_dict(decomposition.to_dict()), decomposition
        )

    def test_hair_components(self):
        self.assertEqual(hair_components(SMALL, strip_core(SMALL)), [[4, 5]])


class TestCoreStats(unittest.TestCase):
    def test_lambda_star_at_threshold(self):
        self.assertAlmostEqual(lambda_star(0.917, 3), 2.149, delta=0.001)

    def test_no_core_below_threshold(self):
        self.assertIsNone(lambda_star(0.5, 3))
        self.assertIsNone(core_stats(0.5, 3))

    def test_core_density_is_one_at_threshold(self):
        stats = core_stats(0.917, 3)
        self.assertAlmostEqual(stats.beta, 1.0, delta=0.002)
        self.assertAlmostEqual(stats.nc_frac, 0.633, delta=0.002)
        self.assertAlmostEqual(stats.degree_law.mean(), 3 * stats.beta,
                               delta=1e-6)

    def test_core_takes_over_at_large_alpha(self):
        stats = core_stats(10.0, 3)
        self.assertAlmostEqual(stats.nc_frac, 1.0, delta=1e-6)

    def test_table_skips_absent_rows(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            table = core_stats_table([0.5, 0.917, 1.0], 3)
        self.assertEqual(table.height, 2)
        self.assertEqual(len(caught), 1)

    def test_degree_law_for_beta_inverts_core_stats(self):
        stats = core_stats(1.2, 3)
        law = degree_law_for_beta(stats.beta, 3)
        self.assertAlmostEqual(law.param, stats.lambda_star, delta=1e-6)

    def test_degree_law_for_beta_rejects_sparse_cores(self):
        with self.assertRaises(AssertionError):
            degree_law_for_beta(0.6, 3)


class TestDegreeLaw(unittest.TestCase):
    def test_truncated_support(self):
        degrees, pmf = DegreeLaw.truncated_poisson(2.149).support()
        self.assertEqual(degrees[0], 2)
        self.assertAlmostEqual(pmf.sum(), 1.0)

    def test_regular(self):
        law = DegreeLaw.regular(3)
        gen = RngSpec(0).generator()
        self.assertEqual(law.mean(), 3.0)
        self.assertTrue(np.all(law.sample(gen, 10) == 3))
        self.assertTrue(np.all(law.sample_excess(gen, 10) == 2))

    def test_excess_is_size_biased(self):
        law = DegreeLaw.truncated_poisson(2.149)
        degrees, pmf = law.support()
        expected = np.dot(degrees ** 2, pmf) / np.dot(degrees, pmf) - 1.0
        excess = law.sample_excess(RngSpec(0).generator(), 200_000)
        self.assertAlmostEqual(excess.mean(), expected, delta=0.02)


class TestEmpirical(unittest.TestCase):
    def test_core_fractions_match(self):
        comparison = empirical_vs_analytic(1.0, 3, 50_000, 4, RngSpec(0))
        self.assertEqual(comparison["failed"], 0)
        self.assertEqual(comparison["table"].height, 4)
        self.assertAlmostEqual(comparison["mean_nc_frac"],
                               comparison["nc_frac"], delta=0.01)
        self.assertAlmostEqual(comparison["mean_mc_frac"],
                               comparison["mc_frac"], delta=0.01)

    @unittest.skipUnless(SLOW, "set QSAT_SLOW=1")
    def test_core_fractions_at_threshold(self):
        comparison = empirical_vs_analytic(0.917, 3, 100_000, 10, RngSpec(0),
                                           n_jobs=-1)
        self.assertLess(abs(comparison["mean_nc_frac"] - 0.633), 0.01)

    def test_sample_cores(self):
        accepted = sample_cores(
            12, 1.0, 3, RngSpec(0), lambda d: d.n_core > 0, count=3,
            max_attempts=5000,
        )
        self.assertEqual(len(accepted), 3)
        self.assertEqual(len({s["stream"] for s in accepted}), 3)
        for sample in accepted:
            self.assertEqual(sample["core"].n_qubits,
                             sample["decomposition"].n_core)

    def test_sample_cores_deficit_warns(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            accepted = sample_cores(10, 1.0, 3, RngSpec(0), lambda d: False,
                                    count=1, max_attempts=5)
        self.assertEqual(accepted, [])
        self.assertTrue(any(issubclass(w.category, RuntimeWarning)
                            for w in caught))


if __name__ == '__main__':
    unittest.main()
