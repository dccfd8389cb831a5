# coding=utf-8

"""Unit tests for the fixed window comparators and multiple imputation combining."""

import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from rdmixtool import set_debug
from rdmixtool.analysis import WindowSpec, fixed_window_sampler, local_polynomial_rd, \
    rubin_combine, export_membership_imputations, mi_relative_risk, window_from_bandwidths, \
    window_balance, window_subset
from rdmixtool.errors import DataError
from rdmixtool.mixture import U_MINUS, U_ZERO, U_PLUS, Priors, SamplerConfig
from rdmixtool.tests.test_estimands import _units, _draws


class RubinTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(True)

    def test_three_imputations(self) -> None:
        combined = rubin_combine([1.0, 1.2, 1.4], [0.04, 0.04, 0.04])
        self.assertAlmostEqual(combined.point, 1.2, delta=1e-12)
        self.assertAlmostEqual(combined.within, 0.04, delta=1e-12)
        self.assertAlmostEqual(combined.between, 0.04, delta=1e-12)
        self.assertAlmostEqual(combined.total_variance, 0.04 + 4.0 / 3.0 * 0.04, delta=1e-12)
        self.assertAlmostEqual(combined.df, 6.125)
        low, high = combined.interval()
        self.assertAlmostEqual(1.2 - low, high - 1.2)

    def test_identical_estimates(self) -> None:
        combined = rubin_combine([0.7, 0.7], [0.1, 0.3])
        self.assertEqual(combined.between, 0.0)
        self.assertEqual(combined.df, np.inf)
        self.assertAlmostEqual(combined.total_variance, 0.2)

    def test_bad_input(self) -> None:
        with self.assertRaises(DataError):
            rubin_combine([1.0], [0.1])
        with self.assertRaises(DataError):
            rubin_combine([1.0, 2.0], [0.1])
        with self.assertRaises(DataError):
            rubin_combine([1.0, 2.0], [0.1, -0.1])


class WindowSpecTestCase(unittest.TestCase):
    def test_bounds(self) -> None:
        for kernel, order, left, right in (('uniform', 1, 76.5, 43.9),
                                           ('triangular', 1, 81.0, 54.5),
                                           ('uniform', 2, 120.0, 46.0),
                                           ('triangular', 2, 120.0, 45.6)):
            spec = WindowSpec(kernel=kernel, order=order, bandwidth_left=left,
                              bandwidth_right=right)
            lower, upper = spec.bounds(120.0)
            self.assertAlmostEqual(lower, 120.0 - left)
            self.assertAlmostEqual(upper, 120.0 + right)
            self.assertEqual(spec.name, f'{kernel} p={order}')
            row = window_from_bandwidths(spec, 120.0)
            self.assertAlmostEqual(row['h right'], right)

    def test_explicit_bounds(self) -> None:
        spec = WindowSpec(lower=100.0, upper=150.0, bandwidth_left=5.0)
        self.assertEqual(spec.bounds(120.0), (100.0, 150.0))
        self.assertEqual(spec.bandwidths(120.0), (5.0, 30.0))

    def test_invalid(self) -> None:
        with self.assertRaises(DataError):
            WindowSpec(kernel='epanechnikov')
        with self.assertRaises(DataError):
            WindowSpec(order=3)
        with self.assertRaises(DataError):
            WindowSpec(lower=125.0, upper=150.0).bounds(120.0)

    def test_one_sided_window(self) -> None:
        data = _units([100.0, 110.0, 130.0], [0, 1, 0])
        with self.assertRaises(DataError):
            window_subset(data, WindowSpec(lower=115.0, upper=140.0))
        row = window_from_bandwidths(WindowSpec(lower=105.0, upper=140.0), 120.0, data)
        self.assertEqual((row['units'], row['units eligible'], row['units ineligible']),
                         (2, 1, 1))


class LocalPolynomialTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)

    @staticmethod
    def _intercept(distance: np.ndarray, y: np.ndarray, order: int) -> float:
        design = np.vander(distance, order + 1, increasing=True)
        return float(np.linalg.lstsq(design, y.astype(float), rcond=None)[0][0])

    def test_matches_least_squares(self) -> None:
        rng = np.random.default_rng(21)
        for fixture in range(10):
            order = 1 + fixture % 2
            s = rng.uniform(60.0, 180.0, size=80)
            y = rng.integers(0, 2, size=80)
            data = _units(s, y)
            spec = WindowSpec(order=order, bandwidth_left=60.0, bandwidth_right=60.0)
            result = local_polynomial_rd(data, spec)
            below, above = s <= 120.0, s > 120.0
            p1 = self._intercept(s[below] - 120.0, y[below], order)
            p0 = self._intercept(s[above] - 120.0, y[above], order)
            self.assertAlmostEqual(result['p1'], p1, delta=1e-8)
            self.assertAlmostEqual(result['p0'], p0, delta=1e-8)
            self.assertAlmostEqual(result['ate'], p1 - p0, delta=1e-8)
            self.assertEqual(result['units below'] + result['units above'], 80)

    def test_constant_outcome(self) -> None:
        s = np.array([90.0, 100.0, 110.0, 115.0, 125.0, 130.0, 140.0, 150.0])
        result = local_polynomial_rd(_units(s, np.ones(8, dtype=int)),
                                     WindowSpec(bandwidth_left=40.0, bandwidth_right=40.0))
        self.assertAlmostEqual(result['ate'], 0.0)
        self.assertAlmostEqual(result['rr'], 1.0)

    def test_triangular_two_distances(self) -> None:
        # With two distinct distances per side the line runs through the two group means
        # whatever the weights are.
        s = np.array([100.0, 100.0, 110.0, 110.0, 110.0, 130.0, 130.0, 140.0, 140.0, 140.0])
        y = np.array([1, 0, 1, 1, 0, 0, 0, 1, 0, 1])
        data = _units(s, y)
        uniform = local_polynomial_rd(data, WindowSpec(bandwidth_left=30.0,
                                                       bandwidth_right=30.0))
        triangular = local_polynomial_rd(data, WindowSpec(kernel='triangular',
                                                          bandwidth_left=30.0,
                                                          bandwidth_right=30.0))
        self.assertAlmostEqual(uniform['p1'], triangular['p1'])
        self.assertAlmostEqual(uniform['p0'], triangular['p0'])

    def test_too_few_distances(self) -> None:
        data = _units([110.0, 110.0, 130.0, 140.0], [0, 1, 0, 1])
        with self.assertRaises(DataError):
            local_polynomial_rd(data, WindowSpec(bandwidth_left=30.0, bandwidth_right=30.0))


class ImputationTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        self.labels = np.array([[U_ZERO, U_ZERO, U_ZERO, U_ZERO, U_MINUS, U_PLUS],
                                [U_ZERO, U_ZERO, U_ZERO, U_ZERO, U_ZERO, U_ZERO],
                                [U_MINUS, U_ZERO, U_ZERO, U_ZERO, U_ZERO, U_PLUS]])
        self.draws = _draws({'rr': np.ones(3)}, units=6, memberships=self.labels)

    def test_first_sample(self) -> None:
        frames = export_membership_imputations(self.draws, 1, 1)
        self.assertEqual(len(frames), 1)
        self.assertListEqual(frames[0]['label'].tolist(), self.labels[0].tolist())
        self.assertListEqual(frames[0]['id'].tolist(), list(range(6)))

    def test_stride(self) -> None:
        frames = export_membership_imputations(self.draws, 2, 2)
        self.assertListEqual(frames[1]['label'].tolist(), self.labels[2].tolist())
        with self.assertRaises(DataError):
            export_membership_imputations(self.draws, 3, 2)

    def test_written(self) -> None:
        with tempfile.TemporaryDirectory() as directory:
            export_membership_imputations(self.draws, 3, 1, directory)
            frame = pd.read_csv(os.path.join(directory, 'memberships_3.csv'))
            self.assertListEqual(frame['label'].tolist(), self.labels[2].tolist())

    def test_relative_risk(self) -> None:
        s = [100.0, 105.0, 110.0, 130.0, 135.0, 140.0]
        y = [1, 1, 0, 1, 0, 0]
        data = _units(s, y)
        draws = _draws({'rr': np.ones(2)}, units=6, memberships=np.full((2, 6), U_ZERO))
        result = mi_relative_risk(draws, data, 2, 1)
        # Both datasets hold every unit: (2 / 3) / (1 / 3).
        self.assertAlmostEqual(result['rr'], 2.0)
        self.assertEqual(result['log rr']['between'], 0.0)

    def test_no_events(self) -> None:
        data = _units([100.0, 105.0, 130.0, 135.0], [0, 0, 1, 0])
        draws = _draws({'rr': np.ones(2)}, units=4, memberships=np.full((2, 4), U_ZERO))
        with self.assertRaises(DataError):
            mi_relative_risk(draws, data, 2, 1)


class FixedWindowSamplerTestCase(unittest.TestCase):
    def setUp(self) -> None:
        set_debug(False)
        rng = np.random.default_rng(5)
        s = rng.uniform(60.0, 180.0, size=60)
        self.data = _units(s, rng.integers(0, 2, size=60), rng.normal(size=(60, 1)), ('age',))
        self.spec = WindowSpec(bandwidth_left=30.0, bandwidth_right=30.0)
        self.config = SamplerConfig(iterations=20, burn_in=5, thinning=3, chains=2, seed=4,
                                    progress_every=0)

    def test_draws(self) -> None:
        draws = fixed_window_sampler(self.data, self.spec, Priors(), self.config)
        inside = int(np.sum((self.data.s >= 90.0) & (self.data.s <= 150.0)))
        self.assertEqual(len(draws), 10)
        self.assertEqual(draws.unit_id.size, inside)
        self.assertListEqual(draws.chains, [0, 1])
        for column in ('gamma00', 'gamma01', 'gamma_x_1', 'rr', 'degenerate'):
            self.assertIn(column, draws.table)
        self.assertTrue(np.all(draws.table['n_u0'] == inside))

    def test_deterministic(self) -> None:
        first = fixed_window_sampler(self.data, self.spec, Priors(), self.config)
        second = fixed_window_sampler(self.data, self.spec, Priors(), self.config)
        pd.testing.assert_frame_equal(first.table, second.table)

    def test_balance(self) -> None:
        report = window_balance(self.data, self.spec)
        self.assertEqual(report.rows[0]['covariate'], 'age')
        triangular = window_balance(self.data, WindowSpec(kernel='triangular',
                                                          bandwidth_left=30.0,
                                                          bandwidth_right=30.0))
        self.assertLess(triangular.n0 + triangular.n1, report.n0 + report.n1)


if __name__ == '__main__':
    unittest.main()
