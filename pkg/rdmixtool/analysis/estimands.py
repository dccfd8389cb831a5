# coding=utf-8

"""Posterior summaries of the causal relative risk, of the mixing proportions and of the
subpopulations, and the stratified estimator of the arm means within a known subpopulation.
Quantiles interpolate linearly between order statistics."""

from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde

from ..data.dataset import ObservedDataset, forcing_bins, bin_index
from ..errors import DataError, debug_log
from ..mixture.draws import PosteriorDraws
from ..mixture.model import LABEL_NAMES, U_MINUS, U_ZERO, U_PLUS

__all__ = ['PosteriorSummary', 'summarize_rr', 'summarize_membership_counts',
           'summarize_mixing', 'membership_table', 'stratified_estimator',
           'subpopulation_profile', 'forcing_profile', 'rr_density', 'posterior_report',
           'STRATUM_WEIGHTINGS']

STRATUM_WEIGHTINGS = ('equal', 'size')
PROBABILITIES = (0.025, 0.5, 0.975)

DrawSource = Union[PosteriorDraws, Sequence[float], np.ndarray]


@dataclass
class PosteriorSummary:
    median: float
    pct_2_5: float
    pct_97_5: float
    interval_width: float
    prob_below_1: Optional[float] = None
    draws: int = 0
    degenerate: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _column(draws: DrawSource, name: str) -> np.ndarray:
    if isinstance(draws, PosteriorDraws):
        return draws.table[name].to_numpy(dtype=float)
    return np.asarray(draws, dtype=float).ravel()


def _quantiles(values: np.ndarray) -> np.ndarray:
    return np.quantile(values, PROBABILITIES)


def summarize_rr(draws: DrawSource) -> PosteriorSummary:
    """
    Median, central 95% interval and Pr(RR < 1) of the relative risk draws. Draws flagged
    degenerate are included and counted.
    :param draws: PosteriorDraws, or a plain sequence of RR values.
    """
    rr = _column(draws, 'rr')
    if rr.size < 2:
        raise DataError(f'Need at least 2 retained draws to summarize, got {rr.size}.',
                        module='estimands')
    low, median, high = _quantiles(rr)
    degenerate = int(draws.table['degenerate'].sum()) if isinstance(draws, PosteriorDraws) else 0
    return PosteriorSummary(median=float(median), pct_2_5=float(low), pct_97_5=float(high),
                            interval_width=float(high - low),
                            prob_below_1=float(np.mean(rr < 1.0)), draws=int(rr.size),
                            degenerate=degenerate)


def _interval_rows(draws: DrawSource, columns: Dict[str, str]) -> List[dict]:
    rows = []
    for label, column in columns.items():
        values = _column(draws, column)
        if values.size == 0:
            raise DataError('No retained draws.', module='estimands')
        low, median, high = _quantiles(values)
        rows.append({'quantity': label, 'median': float(median), '2.5%': float(low),
                     '97.5%': float(high)})
    return rows


def summarize_membership_counts(draws: PosteriorDraws) -> List[dict]:
    """Posterior median and 95% interval of the size of U0, and of its eligible and ineligible
    parts."""
    return _interval_rows(draws, {'N U0': 'n_u0', 'N U0 eligible': 'n_u0_z1',
                                  'N U0 ineligible': 'n_u0_z0'})


def summarize_mixing(draws: PosteriorDraws) -> List[dict]:
    """Posterior median and 95% interval of the three mixing proportions."""
    return _interval_rows(draws, {'pi(U-)': 'pi_minus', 'pi(U0)': 'pi_zero',
                                  'pi(U+)': 'pi_plus'})


def _bin_label(lower: float, upper: float, first: bool) -> str:
    return f'{"[" if first else "("}{lower:g}, {upper:g}]'


def _spread(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def membership_table(draws: PosteriorDraws, data: ObservedDataset,
                     bin_width: Optional[float] = None) -> List[dict]:
    """
    Posterior of the mean probability of belonging to U0 per forcing variable bin.
    With the bin width of the run (the default) the per draw bin means of the conditional U0
    probabilities recorded while sampling are used. Any other width falls back to the stored
    membership samples, whose bin means are means of U0 indicators.
    :param draws: The run.
    :param data: The units the run was fitted on.
    :param bin_width: Width of the bins.
    :return: One row per bin with its units count, and the mean, median and SD of the bin mean.
    Bins without units have null statistics.
    """
    if len(draws) == 0:
        raise DataError('No retained draws.', module='estimands')
    if data.n != draws.unit_id.size:
        raise DataError(f'The run has {draws.unit_id.size} units, the dataset {data.n}.',
                        module='estimands')
    run_width = float(np.diff(draws.bin_edges[:2])[0]) if draws.bin_edges.size > 1 else None
    if bin_width is None or (run_width is not None and np.isclose(bin_width, run_width)):
        edges = draws.bin_edges
        bin_means = draws.bin_means
    else:
        if draws.memberships.shape[0] == 0:
            raise DataError('The run kept no membership samples.', module='estimands')
        edges = forcing_bins(data.s, bin_width)
        bins = bin_index(data.s, edges)
        sizes = np.bincount(bins, minlength=edges.size - 1)
        with np.errstate(invalid='ignore', divide='ignore'):
            bin_means = np.array([np.bincount(bins, weights=(g == U_ZERO).astype(float),
                                              minlength=sizes.size) / sizes
                                  for g in draws.memberships])
    sizes = np.bincount(bin_index(data.s, edges), minlength=edges.size - 1)
    rows = []
    for k in range(edges.size - 1):
        row = {'bin': _bin_label(edges[k], edges[k + 1], k == 0), 'lower': float(edges[k]),
               'upper': float(edges[k + 1]), 'units': int(sizes[k]),
               'mean': None, 'median': None, 'SD': None}
        if sizes[k]:
            values = bin_means[:, k]
            row.update({'mean': float(values.mean()), 'median': float(np.median(values)),
                        'SD': _spread(values)})
        rows.append(row)
    return rows


def _strata_values(data: ObservedDataset, strata: Union[str, Sequence[str], np.ndarray]) -> list:
    if isinstance(strata, str):
        strata = [strata]
    if isinstance(strata, (list, tuple)) and all(isinstance(s, str) for s in strata):
        original = data.original_covariates()
        columns = []
        for name in strata:
            if name not in data.covariate_names:
                raise DataError(f'Unknown covariate {name}.', module='estimands')
            columns.append(original[:, data.covariate_names.index(name)])
        if len(columns) == 1:
            return list(columns[0])
        return [' / '.join(f'{v:g}' for v in row) for row in zip(*columns)]
    strata = np.asarray(strata)
    if strata.shape[0] != data.n:
        raise DataError(f'{strata.shape[0]} strata values for {data.n} units.', module='estimands')
    if strata.ndim > 1:
        return [' / '.join(str(v) for v in row) for row in strata]
    return list(strata)


def stratified_estimator(data: ObservedDataset, strata: Union[str, Sequence[str], np.ndarray],
                         weighting: str = 'equal') -> dict:
    """
    Arm means within a subpopulation, adjusted for discrete covariates: the arm mean of every
    stratum, averaged over strata.
    :param data: Units of the subpopulation.
    :param strata: Covariate name(s) or an array of stratum values per unit.
    :param weighting: 'equal' gives every stratum the same weight, 'size' weights strata by their
    number of units.
    :return: Arm means, RR (null and flagged degenerate when the arm 0 mean is 0) and the cells.
    """
    if weighting not in STRATUM_WEIGHTINGS:
        raise DataError(f'Unknown weighting {weighting}, use one of {STRATUM_WEIGHTINGS}.',
                        module='estimands')
    frame = pd.DataFrame({'stratum': _strata_values(data, strata), 'z': data.z, 'y': data.y})
    cells = frame.groupby(['stratum', 'z'])['y'].agg(['mean', 'size'])
    strata_sizes = frame.groupby('stratum').size()
    for stratum in strata_sizes.index:
        for arm in (0, 1):
            if (stratum, arm) not in cells.index:
                raise DataError(f'Stratum {stratum!r} has no units with z={arm}.',
                                module='estimands')
    if weighting == 'size':
        weights = strata_sizes / strata_sizes.sum()
    else:
        weights = pd.Series(1.0 / strata_sizes.size, index=strata_sizes.index)

    means = {arm: float(sum(weights[stratum] * cells.loc[(stratum, arm), 'mean']
                            for stratum in strata_sizes.index)) for arm in (0, 1)}
    degenerate = means[0] == 0
    return {'arm 1 mean': means[1], 'arm 0 mean': means[0],
            'rr': None if degenerate else means[1] / means[0], 'degenerate': bool(degenerate),
            'weighting': weighting, 'strata': int(strata_sizes.size),
            'cells': [{'stratum': stratum if not isinstance(stratum, np.generic)
                       else stratum.item(), 'z': int(arm), 'units': int(row['size']),
                       'mean': float(row['mean'])}
                      for (stratum, arm), row in cells.iterrows()]}


def _membership_samples(draws: PosteriorDraws, data: ObservedDataset) -> np.ndarray:
    if draws.memberships.shape[0] == 0:
        raise DataError('The run kept no membership samples.', module='estimands')
    if draws.memberships.shape[1] != data.n:
        raise DataError(f'The run has {draws.memberships.shape[1]} units, the dataset {data.n}.',
                        module='estimands')
    return draws.memberships


def subpopulation_profile(draws: PosteriorDraws, data: ObservedDataset) -> List[dict]:
    """
    Covariate means and SDs per subpopulation, on the original scale: computed on every stored
    membership sample and reported as posterior medians.
    """
    samples = _membership_samples(draws, data)
    original = data.original_covariates()
    rows = []
    for label in (U_MINUS, U_ZERO, U_PLUS):
        masks = samples == label
        sizes = masks.sum(axis=1)
        row = {'subpopulation': LABEL_NAMES[label], 'units': float(np.median(sizes))}
        for j, name in enumerate(data.covariate_names):
            means, sds = [], []
            for mask in masks:
                values = original[mask, j]
                means.append(values.mean() if values.size else np.nan)
                sds.append(values.std(ddof=1) if values.size > 1 else np.nan)
            row[f'mean {name}'] = _nan_median(means)
            row[f'SD {name}'] = _nan_median(sds)
        rows.append(row)
    return rows


def _nan_median(values: Sequence[float]) -> Optional[float]:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(np.median(values)) if values.size else None


def forcing_profile(draws: PosteriorDraws, data: ObservedDataset) -> List[dict]:
    """Posterior medians of the five number summary of the forcing variable per subpopulation."""
    samples = _membership_samples(draws, data)
    rows = []
    for label in (U_MINUS, U_ZERO, U_PLUS):
        summaries = np.array([np.percentile(data.s[g == label], [0, 25, 50, 75, 100])
                              if np.any(g == label) else np.full(5, np.nan) for g in samples])
        row = {'subpopulation': LABEL_NAMES[label]}
        for k, name in enumerate(('min', 'Q1', 'median', 'Q3', 'max')):
            row[name] = _nan_median(summaries[:, k])
        rows.append(row)
    return rows


def rr_density(draws: DrawSource, grid_size: int = 200) -> dict:
    """
    Plot data of the RR posterior: a Gaussian kernel density on a regular grid over the range of
    the draws, and the posterior median.
    """
    rr = _column(draws, 'rr')
    if rr.size < 2:
        raise DataError('Need at least 2 retained draws for a density.', module='estimands')
    median = float(np.median(rr))
    if np.ptp(rr) == 0:
        debug_log('All RR draws are equal, no density to estimate.')
        return {'median': median, 'points': []}
    grid = np.linspace(rr.min(), rr.max(), grid_size)
    density = gaussian_kde(rr)(grid)
    return {'median': median,
            'points': [{'rr': float(v), 'density': float(d)} for v, d in zip(grid, density)]}


def posterior_report(draws: PosteriorDraws, data: Optional[ObservedDataset] = None,
                     bin_width: Optional[float] = None) -> dict:
    """Everything summarize prints: RR, mixing proportions, U0 size, the membership table and
    sampler diagnostics. The tables that need the units are left out without data."""
    rr = summarize_rr(draws)
    report = {'relative risk': rr.as_dict(),
              'degenerate fraction': rr.degenerate / rr.draws,
              'mixing': summarize_mixing(draws),
              'membership counts': summarize_membership_counts(draws),
              'diagnostics': dict(draws.diagnostics)}
    if data is not None:
        report['membership table'] = membership_table(draws, data, bin_width)
        if draws.memberships.shape[0]:
            report['subpopulations'] = subpopulation_profile(draws, data)
            report['forcing'] = forcing_profile(draws, data)
    return report
