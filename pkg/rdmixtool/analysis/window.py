# coding=utf-8

"""Comparator analyses on a fixed window around the threshold: a Bayesian probit analysis that
treats every unit of the window as U0, local polynomial point estimators on the raw forcing
variable, and multiple imputation combining over completed membership datasets."""

import os
from dataclasses import dataclass, asdict
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats

from .balance import BalanceReport, balance_report
from ..data.dataset import ObservedDataset
from ..errors import DataError, debug_log, warn
from ..kernels import RngStream, ConjugateLinearUpdate, conjugate_coefficient_draw
from ..mixture.draws import PosteriorDraws
from ..mixture.model import U_ZERO, Priors, SamplerConfig, ParameterState, MembershipState, \
    outcome_predictor
from ..mixture.sampler import impute_and_score, truncated_latent

__all__ = ['WindowSpec', 'MICombined', 'fixed_window_sampler', 'window_iteration',
           'local_polynomial_rd', 'rubin_combine', 'export_membership_imputations',
           'mi_relative_risk', 'window_from_bandwidths', 'window_balance', 'window_subset',
           'KERNELS']

KERNELS = ('uniform', 'triangular')
Z_975 = float(stats.norm.ppf(0.975))


@dataclass
class WindowSpec:
    """A window on the forcing variable. Given bandwidths, the bounds default to
    [s0 - bandwidth_left, s0 + bandwidth_right]; explicit bounds take precedence."""
    lower: float = -np.inf
    upper: float = np.inf
    kernel: str = 'uniform'
    order: int = 1
    bandwidth_left: Optional[float] = None
    bandwidth_right: Optional[float] = None
    name: str = ''

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise DataError(f'Unknown kernel {self.kernel}, use one of {KERNELS}.',
                            module='fixed_window')
        if self.order not in (1, 2):
            raise DataError(f'Polynomial order must be 1 or 2, got {self.order}.',
                            module='fixed_window')
        for side in ('bandwidth_left', 'bandwidth_right'):
            value = getattr(self, side)
            if value is not None and not value > 0:
                raise DataError(f'{side} must be positive, got {value}.', module='fixed_window')
        if not self.name:
            self.name = f'{self.kernel} p={self.order}'

    def bounds(self, s0: float) -> tuple:
        """(lower, upper), checked to enclose s0."""
        lower, upper = self.lower, self.upper
        if not np.isfinite(lower) and self.bandwidth_left is not None:
            lower = s0 - self.bandwidth_left
        if not np.isfinite(upper) and self.bandwidth_right is not None:
            upper = s0 + self.bandwidth_right
        if not lower < s0 < upper:
            raise DataError(f'Window [{lower}, {upper}] does not enclose the threshold {s0}.',
                            module='fixed_window')
        return float(lower), float(upper)

    def bandwidths(self, s0: float) -> tuple:
        """(h_left, h_right), from the bounds when not given."""
        lower, upper = self.bounds(s0)
        return (self.bandwidth_left if self.bandwidth_left is not None else s0 - lower,
                self.bandwidth_right if self.bandwidth_right is not None else upper - s0)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MICombined:
    """Multiple imputation estimate; total_variance = within + (1 + 1/m) between."""
    m: int
    point: float
    within: float
    between: float
    total_variance: float

    @property
    def df(self) -> float:
        """Degrees of freedom of the reference t distribution, infinite without between
        imputation variance."""
        if self.between == 0:
            return np.inf
        ratio = self.within / ((1.0 + 1.0 / self.m) * self.between)
        return (self.m - 1) * (1.0 + ratio) ** 2

    def interval(self, level: float = 0.95) -> tuple:
        half = stats.t.ppf(0.5 + level / 2.0, self.df) * np.sqrt(self.total_variance)
        return self.point - half, self.point + half

    def as_dict(self) -> dict:
        result = asdict(self)
        low, high = self.interval()
        result.update({'df': self.df, '2.5%': low, '97.5%': high})
        return result


def window_subset(data: ObservedDataset, spec: WindowSpec) -> ObservedDataset:
    """Units with lower <= s <= upper; both sides of the threshold must be represented."""
    lower, upper = spec.bounds(data.s0)
    inside = (data.s >= lower) & (data.s <= upper)
    below = int(np.sum(inside & (data.z == 1)))
    above = int(np.sum(inside & (data.z == 0)))
    if below == 0 or above == 0:
        raise DataError(f'Window {spec.name} [{lower:g}, {upper:g}] has {below} units at or '
                        f'below and {above} above the threshold; it must cover both sides.',
                        module='fixed_window')
    return data.subset(inside)


def window_from_bandwidths(spec: WindowSpec, s0: float,
                           data: Optional[ObservedDataset] = None) -> dict:
    """Bounds of the window and, given the units, how many fall on each side."""
    lower, upper = spec.bounds(s0)
    h_left, h_right = spec.bandwidths(s0)
    row = {'window': spec.name, 'kernel': spec.kernel, 'order': spec.order, 'h left': h_left,
           'h right': h_right, 'lower': lower, 'upper': upper}
    if data is not None:
        inside = (data.s >= lower) & (data.s <= upper)
        row.update({'units': int(inside.sum()),
                    'units eligible': int(np.sum(inside & (data.z == 1))),
                    'units ineligible': int(np.sum(inside & (data.z == 0)))})
    return row


def window_iteration(params: ParameterState, data: ObservedDataset, priors: Priors,
                     rng: RngStream) -> ParameterState:
    """
    One sweep of the probit model with arm intercepts and shared slopes: latent outcomes, both
    intercepts, latent outcomes again, slopes.
    """
    params = params.copy()
    g = np.full(data.n, U_ZERO, dtype=np.int8)
    prior_precision = 1.0 / priors.sd_gamma ** 2

    y_star = truncated_latent(outcome_predictor(params, data, g), data.y == 0, rng.substream(0))
    net = y_star - data.x @ params.gamma_x
    for k, (arm, name) in enumerate(((0, 'gamma00'), (1, 'gamma01'))):
        mask = data.z == arm
        update = ConjugateLinearUpdate(prior_precision, 1.0, np.ones((int(mask.sum()), 1)),
                                       net[mask])
        setattr(params, name, float(conjugate_coefficient_draw(update, rng.substream(1, k))[0]))

    y_star = truncated_latent(outcome_predictor(params, data, g), data.y == 0, rng.substream(2))
    offset = np.where(data.z == 1, params.gamma01, params.gamma00)
    params.gamma_x = conjugate_coefficient_draw(
        ConjugateLinearUpdate(prior_precision, 1.0, data.x, y_star - offset), rng.substream(3))
    return params


def fixed_window_sampler(data: ObservedDataset, spec: WindowSpec, priors: Priors,
                         config: SamplerConfig) -> PosteriorDraws:
    """
    Bayesian analysis conditional on the window being U0.
    :param data: All units; the window is cut out of them.
    :param spec: The window.
    :param priors: Only sd_gamma is used.
    :param config: Iterations, burn-in, thinning, chains, seed and the RR guard.
    :return: Draws with columns chain, iteration, gamma00, gamma01, gamma_x_*, and the relative
    risk over all window units.
    """
    window = window_subset(data, spec)
    labels = np.full(window.n, U_ZERO, dtype=np.int8)
    gamma_names = ['gamma00', 'gamma01'] + [f'gamma_x_{j + 1}' for j in range(window.p)]
    rows = []
    for chain in range(config.chains):
        stream = RngStream(config.seed, chain)
        params = ParameterState.initial(window.p, priors)
        for iteration in range(1, config.iterations + 1):
            rng = stream.substream(1, iteration)
            params = window_iteration(params, window, priors, rng)
            if not config.is_retained(iteration):
                continue
            membership = MembershipState.from_labels(labels, window.y)
            record = impute_and_score(params, membership, window, rng.substream(4),
                                      config.rr_guard)
            flat = params.flatten()
            row = {'chain': chain, 'iteration': iteration}
            row.update({name: flat[name] for name in gamma_names})
            row.update(record)
            row['degenerate'] = int(record['degenerate'])
            rows.append(row)
        debug_log(f'Window {spec.name}, chain {chain}: {window.n} units, '
                  f'{config.retained} draws.')
    table = pd.DataFrame(rows)
    return PosteriorDraws(table=table, p=window.p, unit_id=window.unit_id,
                          u0_frequency_sum=np.full(window.n, float(len(table))),
                          u0_probability_sum=np.full(window.n, float(len(table))),
                          bin_edges=np.zeros(0), bin_means=np.zeros((len(table), 0)),
                          memberships=np.zeros((0, window.n)), membership_rows=np.zeros(0),
                          diagnostics={'window units': window.n})


def _kernel_weights(distance: np.ndarray, bandwidth: float, kernel: str) -> np.ndarray:
    if kernel == 'triangular':
        return np.clip(1.0 - np.abs(distance) / bandwidth, 0.0, None)
    return np.ones(distance.size)


def _side_fit(distance: np.ndarray, y: np.ndarray, bandwidth: float, spec: WindowSpec,
              side: str):
    weights = _kernel_weights(distance, bandwidth, spec.kernel)
    used = weights > 0
    if np.unique(distance[used]).size < spec.order + 1:
        raise DataError(f'Fewer than {spec.order + 1} distinct forcing values {side} the '
                        f'threshold in window {spec.name}.', module='fixed_window')
    design = np.vander(distance[used], spec.order + 1, increasing=True)
    if np.linalg.matrix_rank(design * np.sqrt(weights[used])[:, None]) < spec.order + 1:
        raise DataError(f'The local polynomial {side} the threshold is rank deficient in window '
                        f'{spec.name}.', module='fixed_window')
    fit = sm.WLS(y[used].astype(float), design, weights=weights[used]).fit(cov_type='HC0')
    return float(fit.params[0]), float(fit.bse[0]), int(used.sum())


def local_polynomial_rd(data: ObservedDataset, spec: WindowSpec) -> dict:
    """
    Kernel weighted polynomial fits of the outcome on s - s0, separately at or below the
    threshold (eligible, arm 1) and above it (arm 0). The intercepts estimate the outcome
    probabilities at the threshold.
    :return: p0, p1, their difference (ATE) with a conventional 95% interval from HC0 standard
    errors, their ratio (RR, null when p0 is 0), units per side, and a range flag when an
    estimated probability leaves [0, 1]; estimates are never clipped.
    """
    h_left, h_right = spec.bandwidths(data.s0)
    distance = data.s - data.s0
    below = (distance <= 0) & (distance >= -h_left)
    above = (distance > 0) & (distance <= h_right)
    p1, se1, n1 = _side_fit(distance[below], data.y[below], h_left, spec, 'at or below')
    p0, se0, n0 = _side_fit(distance[above], data.y[above], h_right, spec, 'above')

    ate = p1 - p0
    se_ate = float(np.hypot(se0, se1))
    out_of_range = not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0)
    if out_of_range:
        warn(f'Local polynomial probability outside [0, 1] in window {spec.name}: '
             f'p0={p0:.5f}, p1={p1:.5f}.')
    return {'window': spec.name, 'kernel': spec.kernel, 'order': spec.order, 'h left': h_left,
            'h right': h_right, 'units below': n1, 'units above': n0, 'p0': p0, 'p1': p1,
            'rr': None if p0 == 0 else p1 / p0, 'rr null': p0 == 0, 'ate': ate,
            'ate SE': se_ate, 'ate 2.5%': ate - Z_975 * se_ate,
            'ate 97.5%': ate + Z_975 * se_ate, 'out of range': out_of_range}


def rubin_combine(estimates: Sequence[float], variances: Sequence[float]) -> MICombined:
    """
    Combines completed data estimates: point is their mean, within the mean variance, between
    the sample variance of the estimates.
    """
    estimates = np.asarray(estimates, dtype=float).ravel()
    variances = np.asarray(variances, dtype=float).ravel()
    if estimates.size < 2:
        raise DataError(f'Need at least 2 imputations, got {estimates.size}.',
                        module='fixed_window')
    if variances.size != estimates.size:
        raise DataError(f'{estimates.size} estimates but {variances.size} variances.',
                        module='fixed_window')
    if np.any(variances < 0):
        raise DataError('Variances must be nonnegative.', module='fixed_window')
    m = estimates.size
    within = float(variances.mean())
    between = float(np.var(estimates, ddof=1))
    return MICombined(m=m, point=float(estimates.mean()), within=within, between=between,
                      total_variance=within + (1.0 + 1.0 / m) * between)


def export_membership_imputations(draws: PosteriorDraws, m: int, stride: int,
                                  directory: Optional[str] = None) -> List[pd.DataFrame]:
    """
    Completed membership datasets: stored membership samples 0, stride, ..., (m - 1) * stride.
    :param draws: The mixture run.
    :param m: Number of datasets.
    :param stride: Distance between the stored samples used.
    :param directory: If given, dataset k is also written to memberships_<k>.csv.
    :return: Frames with columns id and label.
    """
    if m < 1 or stride < 1:
        raise DataError(f'm and stride must be positive, got {m} and {stride}.',
                        module='fixed_window')
    stored = draws.memberships.shape[0]
    if (m - 1) * stride + 1 > stored:
        raise DataError(f'{m} imputations at stride {stride} need {(m - 1) * stride + 1} stored '
                        f'membership samples, the run has {stored}.', module='fixed_window')
    frames = [pd.DataFrame({'id': draws.unit_id, 'label': draws.memberships[k * stride]})
              for k in range(m)]
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
        for k, frame in enumerate(frames):
            frame.to_csv(os.path.join(directory, f'memberships_{k + 1}.csv'), index=False,
                         lineterminator='\n')
    return frames


def mi_relative_risk(draws: PosteriorDraws, data: ObservedDataset, m: int,
                     stride: int) -> dict:
    """
    Relative risk of the observed arm means within U0, estimated on m completed membership
    datasets and combined on the log scale. The variance of each log RR is the usual delta
    method variance of a ratio of two proportions.
    """
    estimates, variances = [], []
    for frame in export_membership_imputations(draws, m, stride):
        in_zero = frame['label'].to_numpy() == U_ZERO
        arm1 = data.y[in_zero & (data.z == 1)]
        arm0 = data.y[in_zero & (data.z == 0)]
        if arm1.size == 0 or arm0.size == 0 or arm1.sum() == 0 or arm0.sum() == 0:
            raise DataError('A completed membership dataset has an arm without events; the log '
                            'relative risk is undefined.', module='fixed_window')
        p1, p0 = arm1.mean(), arm0.mean()
        estimates.append(np.log(p1 / p0))
        variances.append((1 - p1) / (arm1.size * p1) + (1 - p0) / (arm0.size * p0))
    combined = rubin_combine(estimates, variances)
    low, high = combined.interval()
    result = {'log rr': combined.as_dict(), 'rr': float(np.exp(combined.point)),
              'rr 2.5%': float(np.exp(low)), 'rr 97.5%': float(np.exp(high))}
    return result


def window_balance(data: ObservedDataset, spec: WindowSpec) -> BalanceReport:
    """
    Covariate balance between the arms of the window, on the original covariate scale, weighted
    by the kernel of the window.
    """
    window = window_subset(data, spec)
    h_left, h_right = spec.bandwidths(data.s0)
    distance = window.s - window.s0
    weights = np.where(window.z == 1, _kernel_weights(distance, h_left, spec.kernel),
                       _kernel_weights(distance, h_right, spec.kernel))
    x = window.original_covariates()
    arm0, arm1 = window.z == 0, window.z == 1
    if spec.kernel == 'uniform':
        return balance_report(x[arm0], x[arm1], window.covariate_names)
    return balance_report(x[arm0], x[arm1], window.covariate_names, weights[arm0],
                          weights[arm1])
