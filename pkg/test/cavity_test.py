import os
import math
import unittest
import warnings

import numpy as np

from qsat.cavity import (
    BondMessages,
    NumericalDomainError,
    IllConditionedFitError,
    update_q_i,
    node_terms,
    occupancy,
    bethe_free_energy,
    single_instance_bp,
    population_dynamics,
    population_grid,
    regular_fixed_point,
    regular_series,
    regular_entropy_series,
    extrapolate_lambda,
)
from qsat.core import DegreeLaw, degree_law_for_beta, sample_cores
from qsat.dimer import enumerate_coverings
from qsat.enums import CAVITY_COLUMNS
from qsat.hypergraph import InteractionGraph, sample_er_graph
from qsat.utils import RngSpec


SLOW = os.environ.get("QSAT_SLOW") == "1"

LAMBDAS = [1e2, 1e3, 1e4]
FIT_LAMBDAS = [1e2, 3e2, 1e3, 3e3, 1e4, 3e4]


class TestMessages(unittest.TestCase):
    def test_zero_padding_is_neutral(self):
        self.assertAlmostEqual(float(update_q_i([0.2, 0.0, 0.0], 3.0)),
                               float(update_q_i([0.2], 3.0)))
        self.assertAlmostEqual(float(update_q_i([0.2], 3.0)),
                               3.0 / (1.0 + 3.0 + 0.25))

    def test_saturated_input_blocks(self):
        self.assertEqual(float(update_q_i([1.0, 0.3], 5.0)), 0.0)

    def test_node_terms(self):
        denominator, numerator = node_terms([0.2, 0.5])
        self.assertAlmostEqual(denominator[0], 0.9)
        self.assertAlmostEqual(numerator[0], 0.5)

    def test_occupancy_edges(self):
        self.assertEqual(occupancy(np.zeros(3))[0], 0.0)
        self.assertEqual(occupancy([1.0, 1.0])[0], 1.0)

    def test_invalid_fugacity(self):
        with self.assertRaises(AssertionError):
            update_q_i([0.1], 0.0)
        with self.assertRaises(AssertionError):
            update_q_i([0.1], math.inf)


class TestSingleInstance(unittest.TestCase):
    def test_single_clause(self):
        g = InteractionGraph(3, 3, ((0, 1, 2),))
        for lam in (1.0, 10.0):
            _, report = single_instance_bp(g, lam, rng=RngSpec(0))
            self.assertTrue(report.converged)
            self.assertAlmostEqual(report.free_energy_density,
                                   math.log(1 + 3 * lam) / 3, places=8)
            self.assertAlmostEqual(report.occupancy,
                                   3 * lam / (1 + 3 * lam), places=8)
        _, report = single_instance_bp(g, 1.0, rng=RngSpec(0))
        self.assertAlmostEqual(report.occupancy, 0.75, places=8)

    def test_tree_is_exact(self):
        # Z = 1 + 6 lam + 8 lam^2 for two clauses sharing one qubit
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        lam = 2.0
        _, report = single_instance_bp(g, lam, rng=RngSpec(1))
        self.assertAlmostEqual(report.free_energy_density * 5,
                               math.log(1 + 6 * lam + 8 * lam ** 2), places=8)
        entropy = report.entropy_density * 5
        self.assertAlmostEqual(
            entropy,
            math.log(45.0) - 5 * report.beta * report.occupancy * math.log(lam),
            places=8,
        )

    def test_large_fugacity_counts_coverings(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        _, report = single_instance_bp(g, 1e6, rng=RngSpec(2))
        count = enumerate_coverings(g).count
        self.assertAlmostEqual(report.entropy_density * 5, math.log(count),
                               delta=1e-3)

    def test_domain_error(self):
        g = InteractionGraph(3, 3, ((0, 1, 2),))
        messages = BondMessages.for_graph(g)
        messages.q_qubit = np.ones(3)
        with self.assertRaises(NumericalDomainError):
            bethe_free_energy(g, messages, 1.0)

    def test_non_convergence_is_flagged(self):
        g = InteractionGraph(5, 3, ((0, 1, 2), (2, 3, 4)))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _, report = single_instance_bp(g, 2.0, max_sweeps=1,
                                           rng=RngSpec(0))
        self.assertFalse(report.converged)
        self.assertTrue(any(issubclass(w.category, RuntimeWarning)
                            for w in caught))

    def test_messages_stay_in_unit_interval(self):
        g = sample_er_graph(60, 55, 3, RngSpec(4))
        for lam in (0.1, 10.0, 1e4):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                messages, _ = single_instance_bp(g, lam, rng=RngSpec(5))
            for values in (messages.q_qubit, messages.q_clause):
                self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))

        gen = RngSpec(6).generator()
        for _ in range(200):
            inputs = gen.uniform(0.0, 1.0, size=gen.integers(1, 5))
            q = float(update_q_i(inputs, float(gen.uniform(0.01, 100.0))))
            self.assertTrue(0.0 <= q <= 1.0)

    def test_hard_constraint_diagnostic(self):
        g = InteractionGraph(3, 3, ((0, 1, 2),))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            _, report = single_instance_bp(g, 1.0, rng=RngSpec(0),
                                           hard_constraint=True)
        self.assertTrue(math.isnan(report.free_energy_density))
        self.assertTrue(math.isnan(report.entropy_density))
        self.assertTrue(any("diagnostic" in str(w.message) for w in caught))

    @unittest.skipUnless(SLOW, "set QSAT_SLOW=1")
    def test_bp_tracks_exact_counts(self):
        cores = sample_cores(
            40, 0.917, 3, RngSpec(0),
            lambda d: d.m_core == d.n_core and 0 < d.n_core <= 14, count=10,
        )
        for sample in cores:
            g = sample["core"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _, report = single_instance_bp(g, 1e3, rng=RngSpec(1))
            exact = enumerate_coverings(g).log_count
            self.assertLess(
                abs(report.entropy_density * g.n_qubits - exact) / g.n_qubits,
                0.05,
            )


class TestRegularEnsemble(unittest.TestCase):
    def test_occupancy_series(self):
        for lam in LAMBDAS:
            point = regular_fixed_point(lam)
            self.assertAlmostEqual(point["occupancy"], regular_series(lam),
                                   delta=1e-2)

    def test_entropy_series(self):
        for lam in LAMBDAS:
            point = regular_fixed_point(lam)
            self.assertAlmostEqual(point["entropy_density"],
                                   regular_entropy_series(lam), delta=1e-2)

    def test_extrapolation(self):
        samples = [(lam, regular_fixed_point(lam)["entropy_density"])
                   for lam in FIT_LAMBDAS]
        s_inf, _ = extrapolate_lambda(samples)
        self.assertAlmostEqual(s_inf, 0.29, delta=0.01)
        self.assertAlmostEqual(s_inf, math.log(4.0 / 3.0), delta=1e-3)

        # Without the log column the intercept is biased upwards
        plain, residual = extrapolate_lambda(samples, log_correction=False)
        self.assertGreater(abs(plain - math.log(4.0 / 3.0)),
                           abs(s_inf - math.log(4.0 / 3.0)))
        self.assertGreater(residual, 0.0)

    def test_extrapolation_recovers_series(self):
        samples = [(lam, 0.29 + 0.94 * lam ** -0.5 - 0.06 / lam)
                   for lam in FIT_LAMBDAS]
        for log_correction in (None, False):
            s_inf, residual = extrapolate_lambda(samples, log_correction)
            self.assertAlmostEqual(s_inf, 0.29, delta=1e-3)
            self.assertLess(residual, 1e-8)

    def test_occupancy_grows_with_fugacity(self):
        occupancies = [regular_fixed_point(lam)["occupancy"]
                       for lam in np.logspace(-2, 6, 33)]
        self.assertTrue(np.all(np.diff(occupancies) >= -1e-12))
        self.assertGreater(occupancies[-1], occupancies[0])

    def test_extrapolation_with_log_term(self):
        samples = [(lam, regular_fixed_point(lam)["entropy_density"])
                   for lam in (1e2, 1e3, 1e4, 1e5, 1e6)]
        s_inf, _ = extrapolate_lambda(samples, log_correction=True)
        self.assertAlmostEqual(s_inf, math.log(4.0 / 3.0), delta=0.01)

    def test_general_degrees(self):
        point = regular_fixed_point(50.0, k=3, d=4)
        self.assertGreater(point["occupancy"], 0.0)
        self.assertLess(point["occupancy"], 1.0)
        self.assertGreater(point["q_clause"], 0.0)

    def test_population_matches_fixed_point(self):
        report = population_dynamics(DegreeLaw.regular(3), 3, 100.0,
                                     pop_size=2000, sweeps=200,
                                     rng=RngSpec(0))
        point = regular_fixed_point(100.0)
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.occupancy, point["occupancy"],
                               delta=1e-3)
        self.assertAlmostEqual(report.entropy_density,
                               point["entropy_density"], delta=1e-3)


class TestFits(unittest.TestCase):
    def test_too_few_fugacities(self):
        with self.assertRaises(AssertionError):
            extrapolate_lambda([(10.0, 0.5), (10.0, 0.5), (100.0, 0.4)])

    def test_ill_conditioned(self):
        samples = [(lam, 0.3) for lam in (1e12, 1e13, 1e14)]
        with self.assertRaises(IllConditionedFitError) as context:
            extrapolate_lambda(samples)
        self.assertGreater(context.exception.condition, 1e10)


class TestPopulation(unittest.TestCase):
    def test_grid_table(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            table = population_grid([0.9, 1.1], [10.0], 3, RngSpec(0),
                                    pop_size=200, sweeps=20, n_jobs=1,
                                    progress=False)
        self.assertEqual(table.columns, CAVITY_COLUMNS)
        self.assertEqual(table.height, 2)
        self.assertEqual(table["pop_size"].to_list(), [200, 200])

    @unittest.skipUnless(SLOW, "set QSAT_SLOW=1")
    def test_core_entropy_at_unit_density(self):
        law = degree_law_for_beta(1.0, 3)
        samples = []
        for i, lam in enumerate([1e1, 1e2, 1e3, 1e4, 1e5]):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                report = population_dynamics(law, 3, lam, rng=RngSpec(0, i))
            samples.append((lam, report.entropy_density))
        s_inf, _ = extrapolate_lambda(samples, log_correction=True)
        self.assertAlmostEqual(s_inf, 0.23, delta=0.02)


if __name__ == '__main__':
    unittest.main()
