# coding=utf-8

"""Simulator of the mixture model with known ground truth. Datasets come out in the layout
ingest() reads, the truth (labels, potential outcomes, parameters, finite sample RR) goes into
a sidecar next to them."""

import json
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from ..data.dataset import ObservedDataset, inverse_transform_forcing, DEFAULT_EPS0
from ..errors import DataError, debug_log
from ..kernels import RngStream, std_normal_cdf, sample_inv_chi_squared, truncated_normal_array
from ..mixture.model import U_MINUS, U_ZERO, U_PLUS, Priors, ParameterState, \
    mixing_probabilities
from ..mixture.sampler import relative_risk

__all__ = ['CovariateSpec', 'GroundTruth', 'Scenario', 'generate', 'simulate_units',
           'simulate_given_labels', 'sample_prior', 'scenario_library', 'write_dataset',
           'SCENARIOS', 'DEFAULT_S0']

SCENARIOS = ('separated', 'null-effect', 'rare-outcome')
DEFAULT_S0 = 120.0
# Attempts per requested unit before generation gives up.
DEFAULT_REJECTION_CAP = 50


@dataclass
class CovariateSpec:
    """Independent standard normal columns followed by Bernoulli(1/2) columns."""
    continuous: int = 2
    binary: int = 1

    @property
    def p(self) -> int:
        return self.continuous + self.binary

    def names(self) -> Tuple[str, ...]:
        return tuple([f'c{j + 1}' for j in range(self.continuous)]
                     + [f'b{j + 1}' for j in range(self.binary)])

    def draw(self, n: int, rng: RngStream) -> np.ndarray:
        gen = rng.generator
        return np.column_stack([gen.standard_normal((n, self.continuous)),
                                (gen.random((n, self.binary)) < 0.5).astype(float)])


@dataclass
class GroundTruth:
    """What generated a dataset. y0, y1 are the potential outcomes of U0 units and -1 elsewhere,
    y_s is the outcome of U- and U+ units and -1 elsewhere."""
    params: ParameterState
    labels: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    y_s: np.ndarray
    rr: float
    rr_degenerate: bool
    rejected: int = 0
    attempts: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.attempts if self.attempts else 0.0

    def mixing_proportions(self) -> Dict[str, float]:
        return {name: float(np.mean(self.labels == label))
                for name, label in (('pi_minus', U_MINUS), ('pi_zero', U_ZERO),
                                    ('pi_plus', U_PLUS))}

    def as_dict(self) -> dict:
        result = {'parameters': self.params.to_json(), 'rr': self.rr,
                  'rr degenerate': self.rr_degenerate, 'rejected': self.rejected,
                  'rejection rate': self.rejection_rate}
        result.update(self.mixing_proportions())
        return result


@dataclass
class Scenario:
    name: str
    description: str
    params: ParameterState
    covariates: CovariateSpec = field(default_factory=CovariateSpec)
    s0: float = DEFAULT_S0


class _Units(dict):
    """Columns of simulated units, keyed by name."""

    def take(self, mask: np.ndarray) -> '_Units':
        return _Units({key: value[mask] for key, value in self.items()})

    @staticmethod
    def join(parts: list) -> '_Units':
        return _Units({key: np.concatenate([part[key] for part in parts]) for key in parts[0]})


def simulate_units(params: ParameterState, x: np.ndarray, rng: RngStream) -> '_Units':
    """
    Draws label, rescaled log forcing value and outcomes of every covariate row, without any
    side constraint.
    :return: Columns labels, log_s_tilde, y0, y1 (potential outcomes under both U0 arms) and y_s
    (outcome under the U- or U+ model of the unit's label).
    """
    pi_minus, pi_zero, _ = mixing_probabilities(x, params.alpha_minus, params.alpha_plus)
    u = rng.generator.random(x.shape[0])
    labels = np.where(u < pi_minus, U_MINUS,
                      np.where(u < pi_minus + pi_zero, U_ZERO, U_PLUS)).astype(np.int8)
    return simulate_given_labels(params, x, labels, rng)


def simulate_given_labels(params: ParameterState, x: np.ndarray, labels: np.ndarray,
                          rng: RngStream, side_bound: Optional[float] = None) -> '_Units':
    """
    Forcing values and outcomes of units whose labels are known.
    :param side_bound: Rescaled log value of the threshold. If given, U- forcing values are drawn
    from their normal truncated above it and U+ values from theirs truncated below it.
    :return: Columns as simulate_units().
    """
    n = x.shape[0]
    gen = rng.generator
    design = np.column_stack([np.ones(n), x])
    labels = np.asarray(labels, dtype=np.int8)
    mean = np.select([labels == U_MINUS, labels == U_PLUS],
                     [design @ params.beta_minus, design @ params.beta_plus],
                     default=design @ params.beta)
    variance = np.select([labels == U_MINUS, labels == U_PLUS],
                         [params.sigma2_minus, params.sigma2_plus], default=params.sigma2)
    if side_bound is None:
        log_s_tilde = mean + np.sqrt(variance) * gen.standard_normal(n)
    else:
        log_s_tilde = truncated_normal_array(
            mean, np.sqrt(variance), np.where(labels == U_PLUS, side_bound, -np.inf),
            np.where(labels == U_MINUS, side_bound, np.inf), rng)

    base = x @ params.gamma_x
    gamma = np.where((labels == U_MINUS)[:, None], params.gamma_minus, params.gamma_plus)
    outcome = gen.random((n, 3))
    y0 = (outcome[:, 0] < std_normal_cdf(params.gamma00 + base)).astype(np.int8)
    y1 = (outcome[:, 1] < std_normal_cdf(params.gamma01 + base)).astype(np.int8)
    y_s = (outcome[:, 2] < std_normal_cdf(gamma[:, 0] + gamma[:, 1] * log_s_tilde
                                          + base)).astype(np.int8)
    return _Units(x=x, labels=labels, log_s_tilde=log_s_tilde, y0=y0, y1=y1, y_s=y_s)


def generate(params: ParameterState, covariate_spec: CovariateSpec, n: int,
             s0: float = DEFAULT_S0, rng: Optional[RngStream] = None, eps0: float = DEFAULT_EPS0,
             enforce_sides: bool = True,
             rejection_cap: int = DEFAULT_REJECTION_CAP) -> Tuple[ObservedDataset, GroundTruth]:
    """
    Generates n units from the mixture.
    :param params: Generating parameters; their p must match the covariate recipe.
    :param covariate_spec: Covariate recipe.
    :param n: Number of units.
    :param s0: Threshold.
    :param rng: Stream, defaults to seed 0.
    :param eps0: Zero income shift of the forcing transform.
    :param enforce_sides: Redraw units whose label is impossible on their side of the threshold,
    and units whose forcing value comes out negative. If False, every unit is kept and the dataset
    may be one sided.
    :param rejection_cap: Give up after rejection_cap * n attempts.
    :return: (dataset, truth). Covariates are left on the scale they were drawn on.
    """
    if n < 1:
        raise DataError(f'Need at least one unit, got n={n}.', module='synth')
    if covariate_spec.p != params.p:
        raise DataError(f'Covariate recipe has p={covariate_spec.p}, the parameters p={params.p}.',
                        module='synth')
    rng = rng or RngStream(0)
    parts, kept, attempts, rejected, round_ = [], 0, 0, 0, 0
    while kept < n:
        if attempts >= rejection_cap * n:
            raise DataError(
                f'Rejected {rejected} of {attempts} simulated units as inconsistent with their '
                f'side of the threshold. Adjust the mixing or forcing parameters so that U- '
                f'units fall at or below s0 and U+ units above it.', module='synth')
        batch = n - kept
        round_rng = rng.substream(round_)
        units = simulate_units(params, covariate_spec.draw(batch, round_rng.substream(0)),
                               round_rng.substream(1))
        units['s'] = inverse_transform_forcing(units['log_s_tilde'], s0, eps0)
        attempts += batch
        round_ += 1
        if enforce_sides:
            below = units['s'] <= s0
            ok = (units['s'] >= 0) & ~((units['labels'] == U_MINUS) & ~below) \
                & ~((units['labels'] == U_PLUS) & below)
            rejected += int(np.sum(~ok))
            units = units.take(ok)
        parts.append(units)
        kept += units['labels'].size
    units = _Units.join(parts)
    if rejected:
        debug_log(f'Redrew {rejected} of {attempts} simulated units to respect the threshold.')

    z = (units['s'] <= s0).astype(np.int8)
    in_zero = units['labels'] == U_ZERO
    y = np.where(in_zero, np.where(z == 1, units['y1'], units['y0']), units['y_s'])
    p = covariate_spec.p
    data = ObservedDataset(unit_id=np.arange(n), s=units['s'], s0=s0, y=y, x=units['x'],
                           covariate_names=covariate_spec.names(), x_center=np.zeros(p),
                           x_scale=np.ones(p), eps0=eps0)
    if enforce_sides and (z.all() or not z.any()):
        raise DataError(f'All {n} simulated units are on one side of the threshold.',
                        module='synth')

    rr, _, _, degenerate = relative_risk(units['y1'][in_zero], units['y0'][in_zero], 0.5)
    truth = GroundTruth(params=params.copy(), labels=units['labels'],
                        y0=np.where(in_zero, units['y0'], -1).astype(np.int8),
                        y1=np.where(in_zero, units['y1'], -1).astype(np.int8),
                        y_s=np.where(in_zero, -1, units['y_s']).astype(np.int8),
                        rr=rr, rr_degenerate=degenerate, rejected=rejected, attempts=attempts)
    return data, truth


def sample_prior(p: int, priors: Priors, rng: RngStream) -> ParameterState:
    """One parameter vector from the prior."""
    gen = rng.generator

    def normal(size: int, sd: float) -> np.ndarray:
        return sd * gen.standard_normal(size)

    sd_beta = np.sqrt(priors.var_beta)
    variances = sample_inv_chi_squared(priors.df, priors.scale, rng, size=3)
    gamma = normal(6, priors.sd_gamma)
    return ParameterState(
        alpha_minus=normal(p + 1, priors.sd_alpha), alpha_plus=normal(p + 1, priors.sd_alpha),
        beta=normal(p + 1, sd_beta), sigma2=float(variances[0]),
        beta_minus=normal(p + 1, sd_beta), sigma2_minus=float(variances[1]),
        beta_plus=normal(p + 1, sd_beta), sigma2_plus=float(variances[2]),
        gamma00=float(gamma[0]), gamma01=float(gamma[1]), gamma_minus=gamma[2:4],
        gamma_plus=gamma[4:6], gamma_x=normal(p, priors.sd_gamma))


def _preset(p: int, gamma00: float, gamma01: float, gamma_minus: Tuple[float, float],
            gamma_plus: Tuple[float, float], gamma_x: float) -> ParameterState:
    """
    Forcing components around s0 = 120 with eps0 = 0.5: U0 straddles the threshold, U- sits near
    4 and U+ near 4000. Every component has a standard deviation of 0.1 on the rescaled log scale,
    3.5 of them between neighbouring means.
    """
    slopes = np.resize([1.0, -0.5, 0.5], p)

    def coefficients(intercept: float, slope: float) -> np.ndarray:
        return np.concatenate([[intercept], slope * slopes])

    return ParameterState(
        alpha_minus=coefficients(0.3, 0.2), alpha_plus=coefficients(0.5, -0.2),
        beta=coefficients(0.0, 0.01), sigma2=0.01,
        beta_minus=coefficients(-0.35, 0.01), sigma2_minus=0.01,
        beta_plus=coefficients(0.35, 0.01), sigma2_plus=0.01,
        gamma00=gamma00, gamma01=gamma01, gamma_minus=np.array(gamma_minus),
        gamma_plus=np.array(gamma_plus), gamma_x=gamma_x * slopes)


def scenario_library(covariates: Optional[CovariateSpec] = None) -> Dict[str, Scenario]:
    """
    Named generating configurations. The names are stable.
    :param covariates: Covariate recipe, two continuous and one binary column by default.
    """
    covariates = covariates or CovariateSpec()
    p = covariates.p
    return {
        'separated': Scenario(
            'separated', 'Components well apart in the forcing variable, RR about 0.6.',
            _preset(p, -1.0, -1.3, (-0.5, 1.0), (-1.5, 0.0), 0.2), covariates),
        'null-effect': Scenario(
            'null-effect', 'Same as separated, but both U0 arms share one outcome model.',
            _preset(p, -1.0, -1.0, (-0.5, 1.0), (-1.5, 0.0), 0.2), covariates),
        'rare-outcome': Scenario(
            'rare-outcome', 'Outcome rate of about 3 per mil in every component.',
            _preset(p, -2.75, -2.75, (-2.75, 0.0), (-2.75, 0.0), 0.02), covariates),
    }


def write_dataset(directory: str, data: ObservedDataset, truth: GroundTruth,
                  basename: str = 'synthetic') -> Dict[str, str]:
    """
    Writes <basename>.csv in the ingest() layout (columns id, s, y and the covariates), the per
    unit truth <basename>_truth.csv and the parameter sidecar <basename>_truth.json.
    :return: Paths by role.
    """
    os.makedirs(directory, exist_ok=True)
    paths = {'data': os.path.join(directory, f'{basename}.csv'),
             'units': os.path.join(directory, f'{basename}_truth.csv'),
             'truth': os.path.join(directory, f'{basename}_truth.json')}
    data.to_frame().to_csv(paths['data'], index=False, lineterminator='\n', float_format='%.17g')
    pd.DataFrame({'id': data.unit_id, 'label': truth.labels, 'y0': truth.y0, 'y1': truth.y1,
                  'y_s': truth.y_s}).to_csv(paths['units'], index=False, lineterminator='\n')
    with open(paths['truth'], 'w') as fh:
        json.dump(truth.as_dict(), fh, indent=2, sort_keys=True)
        fh.write('\n')
    return paths
