# coding=utf-8

"""Covariate balance between the eligibility arms of a subpopulation: normalized differences,
log ratios of standard deviations and the Mahalanobis distance between the arm means. Variances
use n - 1 denominators; with weights, means and variances are weighted and the variance
denominator is corrected by the effective sample size, so constant weights give the unweighted
values."""

from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, solve

from ..data.dataset import ObservedDataset
from ..errors import DataError, debug_log
from ..mixture.draws import PosteriorDraws
from ..mixture.model import U_ZERO

__all__ = ['BalanceReport', 'normalized_difference', 'log_sd_ratio', 'mahalanobis_balance',
           'balance_report', 'weighted_balance', 'posterior_balance', 'love_plot_data']

# Relative eigenvalue size below which the pooled covariance counts as singular.
SINGULAR_TOLERANCE = 1e-12

METRICS = ('mean 0', 'SD 0', 'mean 1', 'SD 1', 'normalized difference', 'log SD ratio')


@dataclass
class BalanceReport:
    """Per covariate rows and the multivariate distance. In posterior mode every entry is the
    posterior median over the evaluated draws."""
    rows: List[dict]
    multivariate: Optional[float]
    dropped: List[str] = field(default_factory=list)
    n0: float = 0
    n1: float = 0
    draws: int = 1
    skipped: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def value(self, covariate: str, metric: str):
        for row in self.rows:
            if row['covariate'] == covariate:
                return row[metric]
        raise KeyError(covariate)


def _weights(x: np.ndarray, w: Optional[Sequence[float]]) -> np.ndarray:
    if w is None:
        return np.ones(x.shape[0])
    w = np.asarray(w, dtype=float).ravel()
    if w.size != x.shape[0]:
        raise DataError(f'{w.size} weights for {x.shape[0]} units.', module='balance')
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError('Weights must be finite and nonnegative.', module='balance')
    if not w.sum() > 0:
        raise DataError('A group has zero total weight.', module='balance')
    return w


def _moments(x: np.ndarray, w: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted mean and covariance of the rows of x.
    :return: (mean, covariance); covariance is p x p for a matrix, a scalar for a vector.
    """
    x = np.asarray(x, dtype=float)
    vector = x.ndim == 1
    x = x.reshape(x.shape[0], -1)
    w = _weights(x, w)
    if np.count_nonzero(w) < 2:
        raise DataError('Each group needs at least 2 units with positive weight.',
                        module='balance')
    total = w.sum()
    mean = w @ x / total
    centered = x - mean
    # V1 - V2 / V1 reduces to n - 1 for constant weights.
    denominator = total - (w @ w) / total
    covariance = (centered * w[:, None]).T @ centered / denominator
    if vector:
        return mean[0], covariance[0, 0]
    return mean, covariance


def _normalized_difference(mean0: float, var0: float, mean1: float,
                           var1: float) -> Tuple[Optional[float], Optional[str]]:
    if var0 == 0 and var1 == 0:
        return None, 'both groups constant'
    return float((mean1 - mean0) / np.sqrt((var0 + var1) / 2.0)), None


def _log_sd_ratio(var0: float, var1: float) -> Tuple[Optional[float], Optional[str]]:
    if var0 == 0 and var1 == 0:
        return None, 'both groups constant'
    if var0 == 0:
        return np.inf, None
    if var1 == 0:
        return -np.inf, None
    return float(0.5 * (np.log(var1) - np.log(var0))), None


def normalized_difference(x0: Sequence[float], x1: Sequence[float],
                          w0: Optional[Sequence[float]] = None,
                          w1: Optional[Sequence[float]] = None) -> Optional[float]:
    """
    (mean1 - mean0) / sqrt((s0^2 + s1^2) / 2).
    :return: None when both groups are constant.
    """
    mean0, var0 = _moments(np.asarray(x0, dtype=float).ravel(), w0)
    mean1, var1 = _moments(np.asarray(x1, dtype=float).ravel(), w1)
    return _normalized_difference(mean0, var0, mean1, var1)[0]


def log_sd_ratio(x0: Sequence[float], x1: Sequence[float],
                 w0: Optional[Sequence[float]] = None,
                 w1: Optional[Sequence[float]] = None) -> Optional[float]:
    """
    log(s1) - log(s0).
    :return: +inf or -inf when exactly one group is constant, None when both are.
    """
    _, var0 = _moments(np.asarray(x0, dtype=float).ravel(), w0)
    _, var1 = _moments(np.asarray(x1, dtype=float).ravel(), w1)
    return _log_sd_ratio(var0, var1)[0]


def _mahalanobis(x0: np.ndarray, x1: np.ndarray, w0: Optional[Sequence[float]],
                 w1: Optional[Sequence[float]],
                 names: Sequence[str]) -> Tuple[Optional[float], List[str]]:
    mean0, cov0 = _moments(x0, w0)
    mean1, cov1 = _moments(x1, w1)
    pooled = (cov0 + cov1) / 2.0
    keep = np.diag(pooled) > 0
    dropped = [name for name, k in zip(names, keep) if not k]
    if dropped:
        debug_log(f'Mahalanobis distance ignores constant covariates: {", ".join(dropped)}')
    if not keep.any():
        return None, dropped
    pooled = pooled[np.ix_(keep, keep)]
    difference = (mean1 - mean0)[keep]
    values, vectors = eigh(pooled)
    singular = values <= SINGULAR_TOLERANCE * values.max()
    if singular.any():
        loadings = np.abs(vectors[:, singular]).max(axis=1)
        kept_names = [name for name, k in zip(names, keep) if k]
        collinear = [name for name, load in zip(kept_names, loadings) if load > 1e-8]
        raise DataError(f'Pooled covariance is singular; collinear covariates: '
                        f'{", ".join(collinear)}', module='balance')
    return float(np.sqrt(difference @ solve(pooled, difference, assume_a='pos'))), dropped


def mahalanobis_balance(x0: np.ndarray, x1: np.ndarray, w0: Optional[Sequence[float]] = None,
                        w1: Optional[Sequence[float]] = None) -> Optional[float]:
    """
    sqrt((m1 - m0)' ((S0 + S1) / 2)^-1 (m1 - m0)) over the covariates that are not constant in
    both groups.
    :return: None when every covariate is constant.
    """
    x0 = np.asarray(x0, dtype=float).reshape(len(x0), -1)
    x1 = np.asarray(x1, dtype=float).reshape(len(x1), -1)
    names = [f'x{j + 1}' for j in range(x0.shape[1])]
    return _mahalanobis(x0, x1, w0, w1, names)[0]


def balance_report(x0: np.ndarray, x1: np.ndarray, names: Optional[Sequence[str]] = None,
                   w0: Optional[Sequence[float]] = None,
                   w1: Optional[Sequence[float]] = None) -> BalanceReport:
    """
    Every balance metric of every covariate between arm 0 (x0) and arm 1 (x1).
    :param x0: n0 x p covariates of arm 0.
    :param x1: n1 x p covariates of arm 1.
    :param names: Covariate names.
    :param w0: Optional weights of arm 0.
    :param w1: Optional weights of arm 1.
    """
    x0 = np.asarray(x0, dtype=float).reshape(len(x0), -1)
    x1 = np.asarray(x1, dtype=float).reshape(len(x1), -1)
    if x0.shape[1] != x1.shape[1]:
        raise DataError(f'Arm 0 has {x0.shape[1]} covariates, arm 1 {x1.shape[1]}.',
                        module='balance')
    names = list(names) if names is not None else [f'x{j + 1}' for j in range(x0.shape[1])]
    mean0, cov0 = _moments(x0, w0)
    mean1, cov1 = _moments(x1, w1)
    rows = []
    for j, name in enumerate(names):
        var0, var1 = cov0[j, j], cov1[j, j]
        delta, delta_note = _normalized_difference(mean0[j], var0, mean1[j], var1)
        gamma, gamma_note = _log_sd_ratio(var0, var1)
        rows.append({'covariate': name, 'mean 0': float(mean0[j]), 'SD 0': float(np.sqrt(var0)),
                     'mean 1': float(mean1[j]), 'SD 1': float(np.sqrt(var1)),
                     'normalized difference': delta, 'log SD ratio': gamma,
                     'note': delta_note or gamma_note})
    multivariate, dropped = _mahalanobis(x0, x1, w0, w1, names) if names else (None, [])
    n0 = float(len(x0)) if w0 is None else float(np.sum(w0))
    n1 = float(len(x1)) if w1 is None else float(np.sum(w1))
    return BalanceReport(rows=rows, multivariate=multivariate, dropped=dropped, n0=n0, n1=n1)


def weighted_balance(x0: np.ndarray, x1: np.ndarray, w0: Sequence[float], w1: Sequence[float],
                     names: Optional[Sequence[str]] = None) -> BalanceReport:
    """balance_report() with weighted moments; n0 and n1 are the weight totals."""
    return balance_report(x0, x1, names, w0, w1)


def _median(values: list):
    values = [v for v in values if v is not None and not np.isnan(v)]
    return float(np.median(values)) if values else None


def posterior_balance(draws: PosteriorDraws, data: ObservedDataset, every: int = 1,
                      weights: Optional[Sequence[float]] = None) -> BalanceReport:
    """
    Balance within U0 as the posterior median over stored membership samples: every metric is
    computed on the U0 of each sample, on the original covariate scale.
    :param draws: The run, with membership samples.
    :param data: The units of the run.
    :param every: Use every every-th stored sample.
    :param weights: Optional per unit weights.
    :return: Report of medians; samples whose U0 has fewer than 2 units in an arm are skipped and
    counted.
    """
    if draws.memberships.shape[0] == 0:
        raise DataError('The run kept no membership samples.', module='balance')
    if draws.memberships.shape[1] != data.n:
        raise DataError(f'The run has {draws.memberships.shape[1]} units, the dataset {data.n}.',
                        module='balance')
    if every < 1:
        raise DataError(f'every must be positive, got {every}.', module='balance')
    x = data.original_covariates()
    w = None if weights is None else np.asarray(weights, dtype=float)
    reports, skipped = [], 0
    for g in draws.memberships[::every]:
        arm0 = (g == U_ZERO) & (data.z == 0)
        arm1 = (g == U_ZERO) & (data.z == 1)
        try:
            reports.append(balance_report(x[arm0], x[arm1], data.covariate_names,
                                          None if w is None else w[arm0],
                                          None if w is None else w[arm1]))
        except DataError as e:
            debug_log(f'Skipped a membership sample in posterior balance: {e}')
            skipped += 1
    if not reports:
        raise DataError(f'All {skipped} membership samples had degenerate arms.',
                        module='balance')

    rows = []
    for j, name in enumerate(data.covariate_names):
        row = {'covariate': name}
        for metric in METRICS:
            row[metric] = _median([r.rows[j][metric] for r in reports])
        notes = {r.rows[j]['note'] for r in reports} - {None}
        row['note'] = ', '.join(sorted(notes)) or None
        rows.append(row)
    return BalanceReport(rows=rows, multivariate=_median([r.multivariate for r in reports]),
                         dropped=sorted({name for r in reports for name in r.dropped}),
                         n0=float(np.median([r.n0 for r in reports])),
                         n1=float(np.median([r.n1 for r in reports])),
                         draws=len(reports), skipped=skipped)


def love_plot_data(report: BalanceReport) -> List[dict]:
    """Normalized difference per covariate."""
    return [{'covariate': row['covariate'], 'normalized difference': row['normalized difference']}
            for row in report.rows]
