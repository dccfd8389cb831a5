# coding=utf-8

"""Unit tests for the mixture model, the Gibbs sweep and the chain bookkeeping."""

import os
import tempfile
import unittest

import numpy as np
import pandas as pd
from scipy import stats

from rdmixtool import set_debug
from rdmixtool.data import ObservedDataset, transform_forcing
from rdmixtool.errors import ConfigError
from rdmixtool.kernels import RngStream, ConjugateLinearUpdate, conjugate_coefficient_draw
from rdmixtool.mixture import U_MINUS, U_ZERO, U_PLUS, Priors, SamplerConfig, ParameterState, \
    MembershipState, mixing_probabilities, complete_data_log_density, draw_membership, \
    gibbs_iteration, impute_and_score, run_chain, run_chains, PosteriorDraws, convert, \
    split_rhat, effective_sample_size, convergence_table
from rdmixtool.mixture.sampler import membership_probabilities, draw_memberships, \
    relative_risk, STEP_BETA
from rdmixtool.synth import scenario_library, generate


def _dataset(n: int = 120, seed: int = 3) -> ObservedDataset:
    scenario = scenario_library()['separated']
    data, _ = generate(scenario.params, scenario.covariates, n, rng=RngStream(seed))
    return data


def _quick_config(**kwargs) -> SamplerConfig:
    settings = dict(iterations=30, burn_in=10, thinning=4, membership_stride=2, bin_width=20.0,
                    progress_every=0, seed=11)
    settings.update(kwargs)
    return SamplerConfig(**settings)


def _single_unit_params() -> ParameterState:
    return ParameterState(
        alpha_minus=np.array([0.4, 0.3]), alpha_plus=np.array([0.2, -0.5]),
        beta=np.array([0.01, 0.02]), sigma2=0.01,
        beta_minus=np.array([-0.1, 0.0]), sigma2_minus=0.02,
        beta_plus=np.array([0.05, 0.01]), sigma2_plus=0.015,
        gamma00=-1.0, gamma01=-1.2, gamma_minus=np.array([-0.4, 1.5]),
        gamma_plus=np.array([-1.1, 0.3]), gamma_x=np.array([0.25]))


class MixingProbabilitiesTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(True)

    def test_zero_coefficients(self) -> None:
        pi_minus, pi_zero, pi_plus = mixing_probabilities(np.zeros(2), np.zeros(3), np.zeros(3))
        self.assertAlmostEqual(float(pi_minus), 0.5)
        self.assertAlmostEqual(float(pi_zero), 0.25)
        self.assertAlmostEqual(float(pi_plus), 0.25)

    def test_large_intercept_empties_lower_component(self) -> None:
        pi_minus, pi_zero, pi_plus = mixing_probabilities(
            np.zeros(1), np.array([8.0, 0.0]), np.zeros(2))
        self.assertLess(float(pi_minus), 1e-14)
        self.assertAlmostEqual(float(pi_zero + pi_plus), 1.0, places=12)

    def test_rows_sum_to_one(self) -> None:
        gen = np.random.default_rng(7)
        x = gen.normal(size=(50, 3))
        parts = mixing_probabilities(x, gen.normal(size=4), gen.normal(size=4))
        np.testing.assert_allclose(sum(parts), np.ones(50), atol=1e-12)
        for part in parts:
            self.assertTrue(np.all(part >= 0))


class MembershipTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(True)
        self.params = _single_unit_params()

    @staticmethod
    def _replicated(s: float, y: int, x: float, copies: int) -> ObservedDataset:
        return ObservedDataset(unit_id=np.arange(copies), s=np.full(copies, s), s0=120.0,
                               y=np.full(copies, y), x=np.full((copies, 1), x),
                               covariate_names=('x1',), x_center=np.zeros(1),
                               x_scale=np.ones(1))

    def _hand_probability(self, s: float, y: int, x: float) -> float:
        p = self.params
        lst = float(transform_forcing(s, 120.0, 0.5))
        eta_minus = p.alpha_minus[0] + p.alpha_minus[1] * x
        eta_plus = p.alpha_plus[0] + p.alpha_plus[1] * x
        sign = 1.0 if y == 1 else -1.0
        eligible = s <= 120.0
        w0 = (stats.norm.cdf(eta_minus) * stats.norm.cdf(eta_plus)
              * stats.norm.pdf(lst, p.beta[0] + p.beta[1] * x, np.sqrt(p.sigma2))
              * stats.norm.cdf(sign * ((p.gamma01 if eligible else p.gamma00)
                                       + p.gamma_x[0] * x)))
        if eligible:
            w_other = (stats.norm.cdf(-eta_minus)
                       * stats.norm.pdf(lst, p.beta_minus[0] + p.beta_minus[1] * x,
                                        np.sqrt(p.sigma2_minus))
                       * stats.norm.cdf(sign * (p.gamma_minus[0] + p.gamma_minus[1] * lst
                                                + p.gamma_x[0] * x)))
        else:
            w_other = (stats.norm.cdf(eta_minus) * stats.norm.cdf(-eta_plus)
                       * stats.norm.pdf(lst, p.beta_plus[0] + p.beta_plus[1] * x,
                                        np.sqrt(p.sigma2_plus))
                       * stats.norm.cdf(sign * (p.gamma_plus[0] + p.gamma_plus[1] * lst
                                                + p.gamma_x[0] * x)))
        return w0 / (w0 + w_other)

    def test_probability_matches_closed_form(self) -> None:
        for s, y, x in ((100.0, 1, 0.3), (119.0, 0, -1.0), (125.0, 0, 0.5), (150.0, 1, 2.0)):
            prob, fallback = membership_probabilities(self.params,
                                                      self._replicated(s, y, x, 1))
            self.assertFalse(fallback.any())
            self.assertAlmostEqual(float(prob[0]), self._hand_probability(s, y, x), places=10)

    def test_draw_frequency(self) -> None:
        data = self._replicated(110.0, 1, 0.3, 100000)
        labels, _, _ = draw_memberships(self.params, data, RngStream(5))
        expected = self._hand_probability(110.0, 1, 0.3)
        print(f'U0 frequency {np.mean(labels == U_ZERO):.4f}, closed form {expected:.4f}')
        self.assertLess(abs(np.mean(labels == U_ZERO) - expected), 0.005)
        self.assertFalse(np.any(labels == U_PLUS))

    def test_structural_zeros(self) -> None:
        below = self._replicated(80.0, 0, 0.0, 1)
        above = self._replicated(200.0, 0, 0.0, 1)
        for seed in range(50):
            self.assertIn(draw_membership(0, self.params, below, RngStream(seed)),
                          (U_ZERO, U_MINUS))
            self.assertIn(draw_membership(0, self.params, above, RngStream(seed)),
                          (U_ZERO, U_PLUS))

    def test_sweep_keeps_structural_zeros(self) -> None:
        data = _dataset()
        priors = Priors()
        rng = RngStream(2)
        params = ParameterState.initial(data.p, priors)
        membership = MembershipState.initial(data, rng.substream(0))
        for iteration in range(1, 6):
            result = gibbs_iteration(params, membership, data, priors,
                                     rng.substream(1, iteration))
            params, membership = result.params, result.membership
            self.assertEqual(membership.structural_violations(data.z), 0)
            self.assertTrue(np.isfinite(complete_data_log_density(params, membership, data,
                                                                  priors)))


class GibbsIterationTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.data = _dataset()
        self.priors = Priors()
        self.params = ParameterState.initial(self.data.p, self.priors)
        self.membership = MembershipState.initial(self.data, RngStream(4))

    def test_frozen_memberships_forcing_block(self) -> None:
        rng = RngStream(9, 0, (1, 1))
        result = gibbs_iteration(self.params, self.membership, self.data, self.priors, rng,
                                 freeze_membership=True)
        np.testing.assert_array_equal(result.membership.g, self.membership.g)
        in_zero = self.membership.g == U_ZERO
        update = ConjugateLinearUpdate(1.0 / self.priors.var_beta, self.params.sigma2,
                                       self.data.design()[in_zero],
                                       self.data.log_s_tilde[in_zero])
        expected = conjugate_coefficient_draw(update, rng.substream(STEP_BETA).substream(2, 0))
        np.testing.assert_allclose(result.params.beta, expected, rtol=0, atol=1e-12)

    def test_inputs_untouched(self) -> None:
        before = self.params.flatten()
        labels = self.membership.g.copy()
        gibbs_iteration(self.params, self.membership, self.data, self.priors, RngStream(1))
        self.assertEqual(self.params.flatten(), before)
        np.testing.assert_array_equal(self.membership.g, labels)

    def test_same_stream_same_sweep(self) -> None:
        a = gibbs_iteration(self.params, self.membership, self.data, self.priors, RngStream(8))
        b = gibbs_iteration(self.params, self.membership, self.data, self.priors, RngStream(8))
        self.assertEqual(a.params.flatten(), b.params.flatten())
        np.testing.assert_array_equal(a.membership.g, b.membership.g)


class RelativeRiskTestCase(unittest.TestCase):
    def test_ratio_of_totals(self) -> None:
        rr, numerator, denominator, degenerate = relative_risk(
            np.array([1, 0, 1, 0]), np.array([1, 1, 1, 1]), 0.5)
        self.assertEqual((numerator, denominator), (2, 4))
        self.assertAlmostEqual(rr, 0.5)
        self.assertFalse(degenerate)

    def test_zero_denominator_guarded(self) -> None:
        rr, _, _, degenerate = relative_risk(np.array([1, 1]), np.array([0, 0]), 0.5)
        self.assertAlmostEqual(rr, 5.0)
        self.assertTrue(degenerate)

    def test_impute_four_units(self) -> None:
        data = ObservedDataset(unit_id=np.arange(4), s=np.array([100.0, 110.0, 130.0, 140.0]),
                               s0=120.0, y=np.array([1, 0, 1, 1]), x=np.zeros((4, 0)),
                               covariate_names=(), x_center=np.zeros(0), x_scale=np.ones(0))
        params = ParameterState.initial(0, Priors())
        params.gamma00 = params.gamma01 = -40.0
        membership = MembershipState.from_labels(np.zeros(4, dtype=np.int8), data.y)
        record = impute_and_score(params, membership, data, RngStream(0))
        self.assertEqual((record['rr_num'], record['rr_den']), (1, 2))
        self.assertAlmostEqual(record['rr'], 0.5)
        self.assertEqual(record['n_u0'], 4)
        self.assertEqual(membership.y_missing.tolist(), [0, 0, 0, 0])


class ChainTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.data = _dataset(n=80)
        self.priors = Priors()

    def test_retained_bookkeeping(self) -> None:
        draws = run_chain(self.data, self.priors, _quick_config())
        self.assertEqual(len(draws), 5)
        self.assertEqual(draws.table['iteration'].tolist(), [14, 18, 22, 26, 30])
        self.assertEqual(draws.membership_rows.tolist(), [0, 2, 4])
        self.assertEqual(draws.memberships.shape, (3, self.data.n))
        self.assertEqual(draws.diagnostics['iterations'], 30)
        self.assertEqual(draws.bin_means.shape[0], 5)
        self.assertTrue(np.all((draws.u0_frequency >= 0) & (draws.u0_frequency <= 1)))
        self.assertTrue(np.all((draws.u0_probability >= 0) & (draws.u0_probability <= 1)))
        self.assertEqual(len(draws.parameter_names), 6 * self.data.p + 14)

    def test_retained_counts(self) -> None:
        self.assertEqual(SamplerConfig(iterations=5000, burn_in=1000, thinning=1).retained, 4000)
        self.assertEqual(SamplerConfig(iterations=110, burn_in=10, thinning=3).retained, 33)

    def test_burn_in_validated(self) -> None:
        with self.assertRaises(ConfigError):
            SamplerConfig(iterations=100, burn_in=100)

    def test_deterministic(self) -> None:
        a = run_chain(self.data, self.priors, _quick_config())
        b = run_chain(self.data, self.priors, _quick_config())
        pd.testing.assert_frame_equal(a.table, b.table)
        np.testing.assert_array_equal(a.memberships, b.memberships)

    def test_threads_do_not_matter(self) -> None:
        config = _quick_config(chains=2)
        serial = run_chains(self.data, self.priors, config, threads=1)
        parallel = run_chains(self.data, self.priors, config, threads=2)
        pd.testing.assert_frame_equal(serial.table, parallel.table)
        self.assertEqual(serial.chains, [0, 1])

    def test_frozen_chain(self) -> None:
        labels = np.where(self.data.z == 1, U_MINUS, U_PLUS).astype(np.int8)
        labels[::2] = U_ZERO
        draws = run_chain(self.data, self.priors, _quick_config(), frozen_membership=labels)
        for g in draws.memberships:
            np.testing.assert_array_equal(g, labels)

    def test_save_load_convert(self) -> None:
        draws = run_chain(self.data, self.priors, _quick_config())
        with tempfile.TemporaryDirectory() as directory:
            path = draws.save(directory)
            loaded = PosteriorDraws.load(directory)
            pd.testing.assert_frame_equal(draws.table, loaded.table, check_dtype=False)
            np.testing.assert_array_equal(draws.memberships, loaded.memberships)
            self.assertEqual(convert(path, os.path.join(directory, 'copy.npz')), 5)
            self.assertEqual(convert(os.path.join(directory, 'copy.npz'),
                                     os.path.join(directory, 'copy.csv')), 5)
            with open(path) as a, open(os.path.join(directory, 'copy.csv')) as b:
                self.assertEqual(a.read(), b.read())


class DiagnosticsTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.gen = np.random.default_rng(123)

    def test_rhat_of_mixed_chains(self) -> None:
        rhat = split_rhat(self.gen.normal(size=(4, 1000)))
        self.assertLess(abs(rhat - 1.0), 0.01)

    def test_rhat_of_separated_chains(self) -> None:
        draws = self.gen.normal(size=(4, 500)) + np.array([[0.0], [0.0], [2.0], [2.0]])
        self.assertGreater(split_rhat(draws), 1.1)

    def test_rhat_short_or_constant(self) -> None:
        self.assertTrue(np.isnan(split_rhat(np.ones((2, 3)))))
        self.assertTrue(np.isnan(split_rhat(np.ones((2, 100)))))

    def test_ess_independent(self) -> None:
        ess = effective_sample_size(self.gen.normal(size=(2, 2000)))
        self.assertGreater(ess, 3200)
        self.assertLess(ess, 4800)

    def test_ess_autocorrelated(self) -> None:
        phi, n = 0.9, 20000
        noise = self.gen.normal(size=n)
        series = np.empty(n)
        series[0] = noise[0]
        for t in range(1, n):
            series[t] = phi * series[t - 1] + noise[t]
        ess = effective_sample_size(series[None, :])
        expected = n * (1 - phi) / (1 + phi)
        print(f'AR(1) ESS {ess:.0f}, expected about {expected:.0f}')
        self.assertLess(abs(ess - expected) / expected, 0.4)

    def test_ess_constant(self) -> None:
        self.assertTrue(np.isnan(effective_sample_size(np.zeros((1, 50)))))

    def test_table_rows(self) -> None:
        draws = run_chains(_dataset(n=60), Priors(), _quick_config(chains=2, iterations=50))
        rows = convergence_table(draws, quiet=True)
        self.assertEqual(rows[0]['quantity'], 'rr')
        self.assertEqual(len(rows), 2 + len(draws.parameter_names))
        self.assertEqual(set(rows[0]), {'quantity', 'R-hat', 'ESS'})

    def test_table_matches_single_quantity(self) -> None:
        draws = run_chains(_dataset(n=60), Priors(), _quick_config(chains=2, iterations=50))
        rows = {row['quantity']: row for row in convergence_table(draws, quiet=True)}
        matrix = np.array([draws.table.loc[draws.table['chain'] == chain, 'gamma01'].to_numpy()
                           for chain in draws.chains])
        self.assertAlmostEqual(rows['gamma01']['R-hat'], split_rhat(matrix))
        self.assertAlmostEqual(rows['gamma01']['ESS'], effective_sample_size(matrix))


if __name__ == '__main__':
    unittest.main()
