# coding=utf-8

"""Tests of the simulator and, when RDMIXTOOL_SLOW_TESTS=1, of the sampler against it."""

import filecmp
import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from rdmixtool import set_debug
from rdmixtool.errors import DataError
from rdmixtool.kernels import RngStream
from rdmixtool.mixture import U_MINUS, U_ZERO, U_PLUS, Priors, SamplerConfig, ParameterState, \
    MembershipState, run_chains
from rdmixtool.mixture.sampler import draw_memberships
from rdmixtool.analysis import summarize_rr
from rdmixtool.synth import CovariateSpec, generate, sample_prior, scenario_library, \
    simulate_given_labels, write_dataset, SCENARIOS
from rdmixtool.synth.joint_check import run_joint_check, compare_moments, forward_draw, \
    gibbs_draws, joint_check_priors

SLOW = os.environ.get('RDMIXTOOL_SLOW_TESTS') == '1'


class ScenarioTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(True)

    def test_names(self) -> None:
        self.assertEqual(tuple(scenario_library()), SCENARIOS)

    def test_null_effect(self) -> None:
        params = scenario_library()['null-effect'].params
        self.assertEqual(params.gamma00, params.gamma01)
        self.assertNotEqual(scenario_library()['separated'].params.gamma00,
                            scenario_library()['separated'].params.gamma01)

    def test_covariate_recipe(self) -> None:
        library = scenario_library(CovariateSpec(continuous=3, binary=2))
        self.assertEqual(library['separated'].params.p, 5)
        self.assertEqual(library['separated'].covariates.names(), ('c1', 'c2', 'c3', 'b1', 'b2'))


class GenerateTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.scenario = scenario_library()['separated']

    def _generate(self, n: int = 400, seed: int = 7):
        return generate(self.scenario.params, self.scenario.covariates, n, rng=RngStream(seed))

    def test_sides(self) -> None:
        data, truth = self._generate()
        self.assertEqual(data.n, 400)
        np.testing.assert_array_equal(data.z, (data.s <= data.s0).astype(np.int8))
        self.assertTrue(np.all(data.s[truth.labels == U_MINUS] <= data.s0))
        self.assertTrue(np.all(data.s[truth.labels == U_PLUS] > data.s0))
        self.assertTrue(np.all(data.s >= 0))

    def test_observed_outcomes(self) -> None:
        data, truth = self._generate()
        in_zero = truth.labels == U_ZERO
        expected = np.where(data.z == 1, truth.y1, truth.y0)
        np.testing.assert_array_equal(data.y[in_zero], expected[in_zero])
        np.testing.assert_array_equal(data.y[~in_zero], truth.y_s[~in_zero])
        self.assertTrue(np.all(truth.y0[~in_zero] == -1))
        self.assertTrue(np.all(truth.y_s[in_zero] == -1))
        proportions = truth.mixing_proportions()
        self.assertAlmostEqual(sum(proportions.values()), 1.0)

    def test_same_seed_same_bytes(self) -> None:
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            for directory in (first, second):
                data, truth = self._generate(seed=19)
                write_dataset(directory, data, truth)
            for name in ('synthetic.csv', 'synthetic_truth.csv', 'synthetic_truth.json'):
                self.assertTrue(filecmp.cmp(os.path.join(first, name),
                                            os.path.join(second, name), shallow=False), name)

    def test_truth_sidecar(self) -> None:
        data, truth = self._generate(n=50)
        with tempfile.TemporaryDirectory() as directory:
            paths = write_dataset(directory, data, truth)
            with open(paths['truth']) as fh:
                stored = json.load(fh)
        params = ParameterState.from_json(stored['parameters'])
        np.testing.assert_allclose(params.beta_minus, truth.params.beta_minus)
        self.assertEqual(params.gamma01, truth.params.gamma01)
        self.assertEqual(stored['rejected'], truth.rejected)

    def test_other_seed(self) -> None:
        first, _ = self._generate(seed=1)
        second, _ = self._generate(seed=2)
        self.assertFalse(np.array_equal(first.s, second.s))

    def test_rejection_cap(self) -> None:
        params = self.scenario.params.copy()
        # Nearly every unit is U- and lands far above the threshold.
        params.alpha_minus = np.concatenate([[-8.0], np.zeros(params.p)])
        params.beta_minus = params.beta_plus.copy()
        with self.assertRaises(DataError):
            generate(params, self.scenario.covariates, 50, rng=RngStream(3))

    def test_mismatched_recipe(self) -> None:
        with self.assertRaises(DataError):
            generate(self.scenario.params, CovariateSpec(continuous=1, binary=0), 10)

    def test_null_effect_truth(self) -> None:
        null = scenario_library()['null-effect']
        _, truth = generate(null.params, null.covariates, 20000, rng=RngStream(5))
        self.assertFalse(truth.rr_degenerate)
        self.assertAlmostEqual(truth.rr, 1.0, delta=0.15)


class PriorTestCase(unittest.TestCase):
    def test_shapes(self) -> None:
        params = sample_prior(2, Priors(), RngStream(1))
        self.assertEqual(params.alpha_minus.size, 3)
        self.assertEqual(params.gamma_x.size, 2)
        self.assertGreater(params.sigma2, 0)

    def test_moment_comparison(self) -> None:
        rng = np.random.default_rng(0)
        a = {'gamma01': rng.normal(size=500), 'sigma2': rng.gamma(2.0, size=500),
             'pi_zero': rng.random(500)}
        rows = compare_moments(a, a)
        self.assertEqual(len(rows), 5)
        self.assertTrue(all(row['z'] == 0.0 for row in rows))


class JointCheckTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.x = CovariateSpec(continuous=1, binary=0).draw(30, RngStream(4))

    def test_forward_draw_respects_sides(self) -> None:
        for seed in range(5):
            _, labels, data, tries = forward_draw(self.x, joint_check_priors(), RngStream(seed))
            self.assertGreaterEqual(tries, 1)
            self.assertEqual(data.n, 30)
            membership = MembershipState.from_labels(labels, data.y)
            self.assertEqual(membership.structural_violations(data.z), 0)

    def test_truncated_forcing(self) -> None:
        params = scenario_library()['separated'].params.copy()
        # Side components swapped, so that untruncated draws would land on the wrong side.
        params.beta_minus, params.beta_plus = params.beta_plus.copy(), params.beta_minus.copy()
        x = CovariateSpec().draw(300, RngStream(1))
        labels = np.resize([U_MINUS, U_ZERO, U_PLUS], 300).astype(np.int8)
        lst = simulate_given_labels(params, x, labels, RngStream(2), side_bound=0.0)['log_s_tilde']
        self.assertTrue(np.all(lst[labels == U_MINUS] < 0))
        self.assertTrue(np.all(lst[labels == U_PLUS] > 0))
        self.assertTrue(np.any(lst[labels == U_ZERO] < 0) and np.any(lst[labels == U_ZERO] > 0))

    def test_sweep_draws_memberships(self) -> None:
        with mock.patch('rdmixtool.mixture.sampler.draw_memberships',
                        wraps=draw_memberships) as spy:
            draws = gibbs_draws(20, n=30, seed=3)
        self.assertEqual(spy.call_count, 20)
        self.assertEqual(draws['pi_zero'].size, 20)
        self.assertTrue(np.all((draws['pi_zero'] >= 0) & (draws['pi_zero'] <= 1)))
        self.assertTrue(np.all(draws['sigma2'] > 0))


@unittest.skipUnless(SLOW, 'set RDMIXTOOL_SLOW_TESTS=1 to run')
class SlowTestCase(unittest.TestCase):
    def test_joint_distribution(self) -> None:
        result = run_joint_check(draws=4000, n=30, seed=1)
        for row in result['rows']:
            print(row)
        self.assertTrue(result['passed'])

    def test_null_effect_posterior(self) -> None:
        null = scenario_library()['null-effect']
        data, truth = generate(null.params, null.covariates, 1500, rng=RngStream(8))
        config = SamplerConfig(iterations=1500, burn_in=500, thinning=2, chains=2, seed=3,
                               progress_every=0)
        summary = summarize_rr(run_chains(data, Priors(), config, threads=2))
        print(summary, truth.rr)
        self.assertLess(summary.pct_2_5, 1.0)
        self.assertGreater(summary.pct_97_5, 1.0)

    def test_separated_recovery(self) -> None:
        scenario = scenario_library()['separated']
        data, truth = generate(scenario.params, scenario.covariates, 5000, rng=RngStream(21))
        config = SamplerConfig(iterations=2000, burn_in=500, thinning=1, chains=2, seed=5,
                               membership_stride=5, progress_every=0)
        draws = run_chains(data, Priors(), config, threads=2)

        for name, value in truth.mixing_proportions().items():
            median = float(draws.table[name].median())
            print(f'{name}: posterior median {median:.4f}, truth {value:.4f}')
            self.assertAlmostEqual(median, value, delta=0.05, msg=name)

        components = np.array([U_MINUS, U_ZERO, U_PLUS])
        votes = np.stack([np.mean(draws.memberships == label, axis=0) for label in components])
        agreement = np.mean(components[votes.argmax(axis=0)] == truth.labels)
        print(f'Membership mode agrees with the truth on {agreement:.4f} of the units')
        self.assertGreaterEqual(agreement, 0.9)

        z = data.z[None, :]
        violations = np.sum((z == 0) & (draws.memberships == U_MINUS)) \
            + np.sum((z == 1) & (draws.memberships == U_PLUS))
        self.assertEqual(violations, 0)

        summary = summarize_rr(draws)
        print(summary, truth.rr)
        self.assertLessEqual(summary.pct_2_5, truth.rr)
        self.assertGreaterEqual(summary.pct_97_5, truth.rr)


if __name__ == '__main__':
    unittest.main()
