# coding=utf-8

"""Unit tests for the posterior summaries and the stratified estimator."""

import unittest
from typing import Optional

import numpy as np
import pandas as pd

from rdmixtool import set_debug
from rdmixtool.analysis import summarize_rr, summarize_membership_counts, summarize_mixing, \
    membership_table, stratified_estimator, subpopulation_profile, forcing_profile, rr_density, \
    posterior_report
from rdmixtool.data import ObservedDataset
from rdmixtool.errors import DataError
from rdmixtool.mixture import PosteriorDraws, U_MINUS, U_ZERO, U_PLUS


def _units(s, y, x: Optional[np.ndarray] = None, names=()) -> ObservedDataset:
    s = np.asarray(s, dtype=float)
    x = np.zeros((s.size, 0)) if x is None else np.asarray(x, dtype=float).reshape(s.size, -1)
    return ObservedDataset(unit_id=np.arange(s.size), s=s, s0=120.0, y=np.asarray(y), x=x,
                           covariate_names=tuple(names), x_center=np.zeros(x.shape[1]),
                           x_scale=np.ones(x.shape[1]))


def _draws(columns: dict, units: int, memberships=None, bin_edges=(),
           bin_means=None) -> PosteriorDraws:
    table = pd.DataFrame(columns)
    edges = np.asarray(bin_edges, dtype=float)
    memberships = np.zeros((0, units)) if memberships is None else np.asarray(memberships)
    if bin_means is None:
        bin_means = np.zeros((len(table), max(edges.size - 1, 0)))
    if 'degenerate' not in table:
        table['degenerate'] = 0
    return PosteriorDraws(table=table, p=0, unit_id=np.arange(units),
                          u0_frequency_sum=np.zeros(units), u0_probability_sum=np.zeros(units),
                          bin_edges=edges, bin_means=bin_means, memberships=memberships,
                          membership_rows=np.arange(len(memberships)))


class SummarizeRelativeRiskTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(True)

    def test_four_draws(self) -> None:
        summary = summarize_rr([0.5, 1.5, 2.5, 3.5])
        self.assertAlmostEqual(summary.median, 2.0)
        self.assertAlmostEqual(summary.prob_below_1, 0.25)
        self.assertEqual(summary.draws, 4)
        self.assertLess(summary.pct_2_5, summary.median)
        self.assertAlmostEqual(summary.interval_width, summary.pct_97_5 - summary.pct_2_5)

    def test_constant_draws(self) -> None:
        summary = summarize_rr(np.ones(100))
        self.assertEqual(summary.median, 1.0)
        self.assertEqual(summary.interval_width, 0.0)
        self.assertEqual(summary.prob_below_1, 0.0)

    def test_degenerate_counted(self) -> None:
        draws = _draws({'rr': [0.5, 1.0, 5.0], 'degenerate': [0, 0, 1]}, units=1)
        self.assertEqual(summarize_rr(draws).degenerate, 1)

    def test_too_few(self) -> None:
        with self.assertRaises(DataError):
            summarize_rr([1.0])


class CountsTestCase(unittest.TestCase):
    def test_count_series(self) -> None:
        draws = _draws({'n_u0': [10, 20, 30], 'n_u0_z1': [5, 5, 5], 'n_u0_z0': [5, 15, 25]},
                       units=1)
        rows = {row['quantity']: row for row in summarize_membership_counts(draws)}
        self.assertEqual(rows['N U0']['median'], 20.0)
        self.assertEqual(rows['N U0 eligible']['2.5%'], rows['N U0 eligible']['97.5%'])

    def test_mixing_rows(self) -> None:
        draws = _draws({'pi_minus': [0.4, 0.5], 'pi_zero': [0.5, 0.4], 'pi_plus': [0.1, 0.1]},
                       units=1)
        rows = summarize_mixing(draws)
        self.assertEqual([row['quantity'] for row in rows], ['pi(U-)', 'pi(U0)', 'pi(U+)'])
        self.assertAlmostEqual(rows[1]['median'], 0.45)


class MembershipTableTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)

    def test_two_unit_bin_mean(self) -> None:
        data = _units([45.0, 48.0], [0, 1])
        memberships = np.array([[U_ZERO, U_ZERO], [U_MINUS, U_ZERO], [U_MINUS, U_MINUS],
                                [U_MINUS, U_MINUS], [U_MINUS, U_MINUS]])
        draws = _draws({'rr': np.ones(5)}, units=2, memberships=memberships)
        rows = membership_table(draws, data, bin_width=100.0)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['bin'], '[0, 100]')
        self.assertEqual(rows[0]['units'], 2)
        self.assertAlmostEqual(rows[0]['mean'], 0.3)

    def test_always_u0(self) -> None:
        data = _units([15.0, 25.0, 28.0], [0, 0, 1])
        draws = _draws({'rr': np.ones(4)}, units=3, memberships=np.zeros((4, 3)))
        for row in membership_table(draws, data, bin_width=10.0):
            self.assertEqual(row['median'], 1.0)
            self.assertEqual(row['SD'], 0.0)

    def test_empty_bins(self) -> None:
        data = _units([5.0, 48.0], [0, 1])
        draws = _draws({'rr': np.ones(2)}, units=2, memberships=np.zeros((2, 2)))
        rows = membership_table(draws, data, bin_width=10.0)
        self.assertEqual([row['units'] for row in rows], [1, 0, 0, 0, 1])
        self.assertIsNone(rows[1]['mean'])
        self.assertEqual(rows[1]['bin'], '(10, 20]')

    def test_recorded_bin_means(self) -> None:
        data = _units([5.0, 15.0], [0, 1])
        bin_means = np.array([[0.2, 0.6], [0.4, 0.8], [0.6, 1.0]])
        draws = _draws({'rr': np.ones(3)}, units=2, bin_edges=[0.0, 10.0, 20.0],
                       bin_means=bin_means)
        rows = membership_table(draws, data)
        self.assertAlmostEqual(rows[0]['mean'], 0.4)
        self.assertAlmostEqual(rows[1]['median'], 0.8)
        self.assertAlmostEqual(rows[1]['SD'], 0.2)


class StratifiedEstimatorTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        # Stratum A (grp 0): eligible {1, 0}, ineligible {1, 0, 0, 0};
        # stratum B (grp 1): eligible {0}, ineligible {1, 0}.
        s = [100, 110, 130, 140, 150, 160, 90, 170, 180]
        y = [1, 0, 1, 0, 0, 0, 0, 1, 0]
        grp = [0, 0, 0, 0, 0, 0, 1, 1, 1]
        self.data = _units(s, y, np.array(grp), ('grp',))

    def test_equal_weights(self) -> None:
        result = stratified_estimator(self.data, 'grp')
        self.assertAlmostEqual(result['arm 1 mean'], 0.25)
        self.assertAlmostEqual(result['arm 0 mean'], 0.375)
        self.assertAlmostEqual(result['rr'], 2.0 / 3.0)
        self.assertEqual(result['strata'], 2)
        self.assertEqual(len(result['cells']), 4)

    def test_size_weights(self) -> None:
        result = stratified_estimator(self.data, 'grp', weighting='size')
        self.assertAlmostEqual(result['arm 1 mean'], 1.0 / 3.0)
        self.assertAlmostEqual(result['arm 0 mean'], 1.0 / 3.0)

    def test_single_stratum(self) -> None:
        result = stratified_estimator(self.data, np.zeros(self.data.n))
        self.assertAlmostEqual(result['arm 1 mean'], 1.0 / 3.0)
        self.assertAlmostEqual(result['arm 0 mean'], 2.0 / 6.0)

    def test_null_outcome(self) -> None:
        data = _units(self.data.s, np.zeros(self.data.n, dtype=int), self.data.x, ('grp',))
        result = stratified_estimator(data, 'grp')
        self.assertEqual(result['arm 1 mean'], 0.0)
        self.assertIsNone(result['rr'])
        self.assertTrue(result['degenerate'])

    def test_empty_cell(self) -> None:
        strata = np.array(['a'] * 8 + ['b'])
        with self.assertRaises(DataError):
            stratified_estimator(self.data, strata)

    def test_unknown_weighting(self) -> None:
        with self.assertRaises(DataError):
            stratified_estimator(self.data, 'grp', weighting='inverse')


class ProfilesTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.data = _units([50.0, 60.0, 110.0, 130.0, 200.0, 250.0], [0, 1, 0, 0, 1, 0],
                           np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), ('age',))
        labels = np.array([U_MINUS, U_ZERO, U_ZERO, U_ZERO, U_ZERO, U_PLUS])
        self.draws = _draws({'rr': [0.8, 1.2], 'n_u0': [4, 4], 'n_u0_z1': [2, 2],
                             'n_u0_z0': [2, 2], 'pi_minus': [1 / 6, 1 / 6],
                             'pi_zero': [4 / 6, 4 / 6], 'pi_plus': [1 / 6, 1 / 6]},
                            units=6, memberships=np.vstack([labels, labels]))

    def test_subpopulation_profile(self) -> None:
        rows = {row['subpopulation']: row for row in subpopulation_profile(self.draws, self.data)}
        self.assertAlmostEqual(rows['U0']['mean age'], 3.5)
        self.assertEqual(rows['U0']['units'], 4.0)
        self.assertIsNone(rows['U-']['SD age'])

    def test_forcing_profile(self) -> None:
        rows = {row['subpopulation']: row for row in forcing_profile(self.draws, self.data)}
        self.assertEqual(rows['U0']['min'], 60.0)
        self.assertEqual(rows['U0']['max'], 200.0)
        self.assertEqual(rows['U+']['median'], 250.0)

    def test_density(self) -> None:
        density = rr_density(self.draws, grid_size=50)
        self.assertEqual(len(density['points']), 50)
        self.assertAlmostEqual(density['median'], 1.0)
        self.assertEqual(rr_density(np.ones(10))['points'], [])

    def test_report(self) -> None:
        report = posterior_report(self.draws, self.data, bin_width=100.0)
        for key in ('relative risk', 'mixing', 'membership counts', 'membership table',
                    'subpopulations', 'forcing', 'degenerate fraction'):
            self.assertIn(key, report)
        self.assertAlmostEqual(report['relative risk']['median'], 1.0)


if __name__ == '__main__':
    unittest.main()
