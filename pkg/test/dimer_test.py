import unittest
import warnings
from itertools import product

import numpy as np

from qsat.dimer import (
    DimerCovering,
    LoopStructure,
    ProductState,
    UnsupportedInstanceError,
    DegenerateProjectorError,
    maximum_covering,
    has_covering,
    enumerate_coverings,
    loop_structure,
    build_product_state,
    product_state_energy,
    log_overlap,
    overlap_decay_rate,
    finite_size_extrapolation,
)
from qsat.hypergraph import (
    InteractionGraph, ProjectorSet, sample_er_graph, sample_projectors,
    haar_qubits,
)
from qsat.core import sample_cores
from qsat.spectrum import HamiltonianHandle, apply_h
from qsat.utils import RngSpec


RING = InteractionGraph(4, 2, ((0, 1), (1, 2), (2, 3), (0, 3)))
MATCHED = InteractionGraph(10, 3, (
    (0, 1, 2), (2, 3, 4), (4, 5, 6), (6, 7, 8), (0, 8, 9), (1, 5, 9),
))


def brute_force_count(g):
    return sum(
        len(set(choice)) == len(choice) for choice in product(*g.clauses)
    )


class TestCoverings(unittest.TestCase):
    def test_pigeonhole(self):
        g = InteractionGraph(6, 3, ((1, 2, 3), (1, 2, 4), (1, 2, 5)))
        covering, uncovered = maximum_covering(g, exclude_qubits=(3, 4, 5))
        self.assertEqual(uncovered, 1)
        self.assertEqual(covering.n_uncovered, 1)
        self.assertTrue(has_covering(g))
        self.assertFalse(has_covering(g, exclude_qubits=(3, 4, 5)))

    def test_excluded_qubit_breaks_covering(self):
        # Clause i holds every qubit except i
        g = InteractionGraph(4, 3, ((1, 2, 3), (0, 2, 3), (0, 1, 3),
                                    (0, 1, 2)))
        self.assertTrue(has_covering(g))
        self.assertFalse(has_covering(g, exclude_qubits=(0,)))

    def test_invalid_coverings(self):
        with self.assertRaises(ValueError):
            DimerCovering((1, 1))
        with self.assertRaises(AssertionError):
            DimerCovering((3,)).validate(InteractionGraph(4, 3, ((0, 1, 2),)))

    def test_pairs(self):
        covering = DimerCovering((2, -1, 0))
        self.assertEqual(covering.to_pairs(), [[0, 2], [2, 0]])
        self.assertEqual(DimerCovering.from_pairs([[0, 2], [2, 0]], 3),
                         covering)


class TestEnumeration(unittest.TestCase):
    def test_small_counts(self):
        self.assertEqual(
            enumerate_coverings(InteractionGraph(3, 3, ((0, 1, 2),))).count, 3
        )
        g = InteractionGraph(4, 3, ((0, 1, 2), (0, 1, 3)))
        self.assertEqual(enumerate_coverings(g).count, 7)
        self.assertEqual(enumerate_coverings(RING).count, 2)

    def test_derangements(self):
        # Clause i holds every qubit except i
        g = InteractionGraph(4, 3, ((1, 2, 3), (0, 2, 3), (0, 1, 3),
                                    (0, 1, 2)))
        result = enumerate_coverings(g)
        self.assertEqual(result.count, 9)
        self.assertAlmostEqual(result.log_count, np.log(9.0))

    def test_against_brute_force(self):
        for seed in range(5):
            g = sample_er_graph(8, 7, 3, RngSpec(seed))
            self.assertEqual(enumerate_coverings(g).count, brute_force_count(g))

    def test_listing(self):
        g = sample_er_graph(8, 6, 3, RngSpec(11))
        result = enumerate_coverings(g, cap=1_000_000)
        self.assertEqual(len(result.coverings), result.count)
        self.assertEqual(len(set(result.coverings)), result.count)
        for covering in result.coverings:
            covering.validate(g)

    def test_empty_and_overfull(self):
        empty = InteractionGraph(3, 3, ())
        self.assertEqual(enumerate_coverings(empty).count, 1)
        overfull = InteractionGraph(4, 2, ((0, 1), (1, 2), (2, 3), (0, 3),
                                           (0, 2)))
        result = enumerate_coverings(overfull)
        self.assertEqual(result.count, 0)
        self.assertEqual(result.log_count, float("-inf"))

    def test_bound_saturates(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = enumerate_coverings(InteractionGraph(3, 3, ((0, 1, 2),)),
                                         bound=2)
        self.assertTrue(result.saturated)
        self.assertGreater(result.count, 2)
        self.assertTrue(any(issubclass(w.category, RuntimeWarning)
                            for w in caught))

    def test_parallel_branches(self):
        g = sample_er_graph(10, 9, 3, RngSpec(3))
        inline = enumerate_coverings(g).count
        self.assertEqual(enumerate_coverings(g, n_jobs=2).count, inline)

    def test_row(self):
        row = enumerate_coverings(RING).to_row("ring", 4, 4)
        self.assertEqual(row["count"], "2")
        self.assertEqual(row["instance_id"], "ring")


class TestLoops(unittest.TestCase):
    def test_ring_is_one_loop(self):
        loops = loop_structure(DimerCovering((0, 1, 2, 3)),
                               DimerCovering((1, 2, 3, 0)))
        self.assertEqual(len(loops.loops), 1)
        self.assertEqual(loops.paths, ())
        self.assertEqual(loops.total_length, 8)
        self.assertEqual(loops.n_qubits, 4)

    def test_open_path(self):
        loops = loop_structure(DimerCovering((0,)), DimerCovering((1,)))
        self.assertEqual(loops.loops, ())
        self.assertEqual(len(loops.paths), 1)
        self.assertEqual(set(loops.paths[0]),
                         {("c", 0), ("q", 0), ("q", 1)})
        self.assertEqual(loops.total_length, 2)
        self.assertEqual(loops.n_qubits, 2)

    def test_identical_coverings(self):
        loops = loop_structure(DimerCovering((0, 3)), DimerCovering((0, 3)))
        self.assertEqual((loops.loops, loops.paths, loops.total_length),
                         ((), (), 0))


class TestProductStates(unittest.TestCase):
    def test_product_projectors_give_zero_energy(self):
        projectors = sample_projectors(MATCHED, "product", RngSpec(0))
        covering, uncovered = maximum_covering(MATCHED)
        self.assertEqual(uncovered, 0)
        state = build_product_state(MATCHED, projectors, covering)
        self.assertEqual(int(np.sum(~state.free)), MATCHED.n_clauses)
        self.assertLess(product_state_energy(MATCHED, projectors, state), 1e-12)

        h = HamiltonianHandle(MATCHED, projectors)
        psi = state.vector()
        self.assertAlmostEqual(np.linalg.norm(psi), 1.0)
        self.assertLess(abs(np.vdot(psi, apply_h(h, psi))), 1e-12)

    def test_every_enumerated_covering(self):
        projectors = sample_projectors(MATCHED, "product", RngSpec(1))
        for covering in enumerate_coverings(MATCHED, cap=20).coverings:
            state = build_product_state(MATCHED, projectors, covering)
            self.assertLess(
                product_state_energy(MATCHED, projectors, state), 1e-12
            )

    def test_generic_acyclic_orientation(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        projectors = sample_projectors(g, "generic", RngSpec(2))
        state = build_product_state(g, projectors, DimerCovering((0, 3)))
        self.assertLess(product_state_energy(g, projectors, state), 1e-12)
        self.assertEqual(state.free.tolist(), [False, True, True, False, True])

    def test_generic_cyclic_orientation(self):
        g = InteractionGraph(4, 3, ((0, 1, 2), (0, 1, 3)))
        projectors = sample_projectors(g, "generic", RngSpec(3))
        with self.assertRaises(UnsupportedInstanceError):
            build_product_state(g, projectors, DimerCovering((0, 1)))

    def test_degenerate_constraint(self):
        g = InteractionGraph(3, 3, ((0, 1, 2),))
        # |011>: the free qubits sit in |0>, so nothing constrains qubit 0
        projectors = ProjectorSet("generic", np.eye(8)[[3]])
        with self.assertRaises(DegenerateProjectorError):
            build_product_state(g, projectors, DimerCovering((0,)))


class TestOverlaps(unittest.TestCase):
    def test_single_site(self):
        s1 = ProductState(np.tile([1.0, 0.0], (3, 1)), np.zeros(3, bool))
        states = np.tile([1.0, 0.0], (3, 1)).astype(complex)
        states[0] = [1 / np.sqrt(2), 1 / np.sqrt(2)]
        s2 = ProductState(states, np.zeros(3, bool))
        self.assertAlmostEqual(log_overlap(s1, s2), np.log(1 / np.sqrt(2)))
        self.assertAlmostEqual(log_overlap(s1, s2), -0.3466, places=4)

    def test_free_sites_are_excluded(self):
        s1 = ProductState(np.tile([1.0, 0.0], (2, 1)), [False, False])
        s2 = ProductState([[0.0, 1.0], [1.0, 0.0]], [True, False])
        self.assertEqual(log_overlap(s1, s2), 0.0)
        self.assertEqual(log_overlap(s1, s2, "include"), float("-inf"))

    def test_haar_decay_rate(self):
        n = 100_000
        s1 = ProductState(haar_qubits(RngSpec(0), n), np.zeros(n, bool))
        s2 = ProductState(haar_qubits(RngSpec(1), n), np.zeros(n, bool))
        self.assertAlmostEqual(log_overlap(s1, s2) / n, -0.5, delta=0.02)

    def test_loops_on_fully_packed_cores(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            samples = sample_cores(
                30, 0.917, 3, RngSpec(5),
                lambda d: d.m_core == d.n_core and 4 <= d.n_core <= 14,
                count=10, max_attempts=20_000,
            )
        pairs = []
        for i, sample in enumerate(samples):
            g = sample["core"]
            coverings = enumerate_coverings(g, cap=20).coverings
            if len(coverings) < 2:
                continue
            projectors = sample_projectors(g, "product", RngSpec(6, i))
            states = [build_product_state(g, projectors, dc)
                      for dc in coverings]
            for j in range(1, len(coverings)):
                loops = loop_structure(coverings[0], coverings[j])
                # Every qubit is covered, so nothing can end in a monomer
                self.assertEqual(loops.paths, ())
                self.assertGreater(len(loops.loops), 0)
                pairs.append((log_overlap(states[0], states[j]), loops))
        self.assertGreater(len(pairs), 0)
        rate = overlap_decay_rate(pairs)
        self.assertGreaterEqual(rate, -0.7)
        self.assertLessEqual(rate, -0.3)

    def test_pooled_rate(self):
        def loops(n_qubits):
            return LoopStructure((), (), 2 * n_qubits, n_qubits)

        pairs = [(-1.0, loops(2)), (float("-inf"), loops(3)),
                 (-3.0, loops(4)), (0.0, loops(0))]
        self.assertAlmostEqual(overlap_decay_rate(pairs), -4.0 / 6.0)

    def test_finite_size_extrapolation(self):
        n_c = [8, 10, 12, 14]
        s = [0.3 + 2.0 / n for n in n_c]
        intercept, slope = finite_size_extrapolation(n_c, s)
        self.assertAlmostEqual(intercept, 0.3)
        self.assertAlmostEqual(slope, 2.0)


if __name__ == '__main__':
    unittest.main()
