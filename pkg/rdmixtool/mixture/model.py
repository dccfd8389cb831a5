# coding=utf-8

"""Parameter layout and densities of the three component mixture.

Mixing is a sequential probit: a unit is in U- if G*(-) <= 0, in U+ if G*(-) > 0 and G*(+) <= 0,
and in U0 otherwise. Within every component log(S~) follows a normal regression on [1, X]. The
binary outcome is probit, with intercepts per eligibility arm in U0, an intercept and a log(S~)
slope in U- and U+, and covariate slopes gamma_x shared by all four outcome models."""

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import log_ndtr, ndtr

from ..data.dataset import ObservedDataset
from ..errors import ConfigError
from ..kernels import RngStream

__all__ = ['U_MINUS', 'U_ZERO', 'U_PLUS', 'LABEL_NAMES', 'Priors', 'SamplerConfig',
           'ParameterState', 'MembershipState', 'mixing_probabilities',
           'log_mixing_probabilities', 'outcome_predictor', 'component_log_weights',
           'complete_data_log_density', 'INIT_STRATEGIES']

U_MINUS = -1
U_ZERO = 0
U_PLUS = 1
LABEL_NAMES = {U_MINUS: 'U-', U_ZERO: 'U0', U_PLUS: 'U+'}

INIT_STRATEGIES = ('random', 'all-u0')

LOG_2PI = float(np.log(2 * np.pi))


@dataclass
class Priors:
    """Hyperparameters. Normal priors are centered at zero; the three forcing variances share one
    scaled inverse chi-squared prior."""
    sd_alpha: float = 1.0
    sd_gamma: float = 1.0
    var_beta: float = 100.0
    df: float = 3.0
    scale: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f'Prior {name} must be a positive number, got {value!r}.',
                                  module='mixture_gibbs')

    def as_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash identifying the prior block in run manifests."""
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class SamplerConfig:
    """Chain bookkeeping. Iterations are counted including burn-in; iteration l (1-based) is
    retained when l > burn_in and (l - burn_in) is a multiple of thinning."""
    iterations: int = 5000
    burn_in: int = 1000
    thinning: int = 1
    chains: int = 1
    seed: int = 0
    init_strategy: str = 'random'
    rr_guard: float = 0.5
    membership_stride: int = 10
    bin_width: float = 10.0
    progress_every: int = 500

    def __post_init__(self) -> None:
        for name in ('iterations', 'thinning', 'chains', 'membership_stride'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f'sampler.{name} must be a positive integer, got {value!r}.')
        if isinstance(self.burn_in, bool) or not isinstance(self.burn_in, int) or self.burn_in < 0:
            raise ConfigError(f'sampler.burn_in must be a nonnegative integer, got '
                              f'{self.burn_in!r}.')
        if self.burn_in >= self.iterations:
            raise ConfigError(f'sampler.burn_in ({self.burn_in}) must be smaller than '
                              f'sampler.iterations ({self.iterations}).')
        if self.init_strategy not in INIT_STRATEGIES:
            raise ConfigError(f'sampler.init_strategy must be one of {INIT_STRATEGIES}.')
        if not self.rr_guard > 0 or not self.bin_width > 0:
            raise ConfigError('sampler.rr_guard and sampler.bin_width must be positive.')

    def is_retained(self, iteration: int) -> bool:
        return iteration > self.burn_in and (iteration - self.burn_in) % self.thinning == 0

    @property
    def retained(self) -> int:
        """Number of retained draws per chain."""
        return (self.iterations - self.burn_in) // self.thinning

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ParameterState:
    """The full parameter vector, 6p + 14 scalars."""
    alpha_minus: np.ndarray
    alpha_plus: np.ndarray
    beta: np.ndarray
    sigma2: float
    beta_minus: np.ndarray
    sigma2_minus: float
    beta_plus: np.ndarray
    sigma2_plus: float
    gamma00: float
    gamma01: float
    gamma_minus: np.ndarray
    gamma_plus: np.ndarray
    gamma_x: np.ndarray

    @classmethod
    def initial(cls, p: int, priors: Priors) -> 'ParameterState':
        """Prior means, variances at the prior scale."""
        return cls(alpha_minus=np.zeros(p + 1), alpha_plus=np.zeros(p + 1),
                   beta=np.zeros(p + 1), sigma2=priors.scale,
                   beta_minus=np.zeros(p + 1), sigma2_minus=priors.scale,
                   beta_plus=np.zeros(p + 1), sigma2_plus=priors.scale,
                   gamma00=0.0, gamma01=0.0, gamma_minus=np.zeros(2), gamma_plus=np.zeros(2),
                   gamma_x=np.zeros(p))

    @property
    def p(self) -> int:
        return self.gamma_x.size

    def copy(self) -> 'ParameterState':
        return ParameterState(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                                 for k, v in self.__dict__.items()})

    @staticmethod
    def names(p: int) -> List[str]:
        """Stable column names of the flattened vector."""
        names = []
        for block in ('alpha_minus', 'alpha_plus', 'beta'):
            names += [f'{block}_{j}' for j in range(p + 1)]
        names.append('sigma2')
        names += [f'beta_minus_{j}' for j in range(p + 1)] + ['sigma2_minus']
        names += [f'beta_plus_{j}' for j in range(p + 1)] + ['sigma2_plus']
        names += ['gamma00', 'gamma01', 'gamma_minus_0', 'gamma_minus_1', 'gamma_plus_0',
                  'gamma_plus_1']
        names += [f'gamma_x_{j + 1}' for j in range(p)]
        return names

    def flatten(self) -> 'OrderedDict[str, float]':
        values = np.concatenate([self.alpha_minus, self.alpha_plus, self.beta, [self.sigma2],
                                 self.beta_minus, [self.sigma2_minus],
                                 self.beta_plus, [self.sigma2_plus],
                                 [self.gamma00, self.gamma01], self.gamma_minus, self.gamma_plus,
                                 self.gamma_x])
        return OrderedDict(zip(self.names(self.p), (float(v) for v in values)))

    @classmethod
    def from_flat(cls, values: Dict[str, float], p: int) -> 'ParameterState':
        """Inverse of flatten(); extra keys are ignored."""
        def block(prefix: str, start: int, stop: int) -> np.ndarray:
            return np.array([float(values[f'{prefix}_{j}']) for j in range(start, stop)])

        return cls(alpha_minus=block('alpha_minus', 0, p + 1),
                   alpha_plus=block('alpha_plus', 0, p + 1),
                   beta=block('beta', 0, p + 1), sigma2=float(values['sigma2']),
                   beta_minus=block('beta_minus', 0, p + 1),
                   sigma2_minus=float(values['sigma2_minus']),
                   beta_plus=block('beta_plus', 0, p + 1),
                   sigma2_plus=float(values['sigma2_plus']),
                   gamma00=float(values['gamma00']), gamma01=float(values['gamma01']),
                   gamma_minus=block('gamma_minus', 0, 2), gamma_plus=block('gamma_plus', 0, 2),
                   gamma_x=block('gamma_x', 1, p + 1))

    def to_json(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_json(cls, values: dict) -> 'ParameterState':
        return cls(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else float(v))
                      for k, v in values.items()})


@dataclass
class MembershipState:
    """Latent part of the state. y_missing holds the imputed counterfactual outcome of U0 units
    and -1 everywhere else."""
    g: np.ndarray
    g_star_minus: np.ndarray
    g_star_plus: np.ndarray
    y_star: np.ndarray
    y_missing: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.y_missing is None:
            self.y_missing = np.full(self.g.size, -1, dtype=np.int8)

    @classmethod
    def from_labels(cls, g: np.ndarray, y: np.ndarray) -> 'MembershipState':
        """Latent utilities set to the simplest values consistent with the labels."""
        g = np.asarray(g, dtype=np.int8)
        return cls(g=g, g_star_minus=np.where(g == U_MINUS, -0.5, 0.5),
                   g_star_plus=np.where(g == U_PLUS, -0.5, 0.5),
                   y_star=np.where(np.asarray(y) == 1, 0.5, -0.5))

    @classmethod
    def initial(cls, data: ObservedDataset, rng: RngStream,
                strategy: str = 'random') -> 'MembershipState':
        """
        Starting memberships. 'random' puts every unit in U0 or in the component allowed on its
        side with probability 1/2 each; 'all-u0' starts from U0 everywhere.
        """
        if strategy == 'all-u0':
            g = np.zeros(data.n, dtype=np.int8)
        else:
            coin = rng.generator.random(data.n) < 0.5
            g = np.where(coin, np.where(data.z == 1, U_MINUS, U_PLUS), U_ZERO).astype(np.int8)
        return cls.from_labels(g, data.y)

    def copy(self) -> 'MembershipState':
        return MembershipState(self.g.copy(), self.g_star_minus.copy(), self.g_star_plus.copy(),
                               self.y_star.copy(), self.y_missing.copy())

    def structural_violations(self, z: np.ndarray) -> int:
        """Units labeled with the component that is impossible on their side of the threshold."""
        return int(np.sum((z == 0) & (self.g == U_MINUS)) + np.sum((z == 1) & (self.g == U_PLUS)))

    def counts(self, z: np.ndarray) -> Dict[str, int]:
        in_u0 = self.g == U_ZERO
        return {'n_u0': int(in_u0.sum()), 'n_u0_z0': int(np.sum(in_u0 & (z == 0))),
                'n_u0_z1': int(np.sum(in_u0 & (z == 1))),
                'n_minus': int(np.sum(self.g == U_MINUS)), 'n_plus': int(np.sum(self.g == U_PLUS))}


def mixing_probabilities(x: np.ndarray, alpha_minus: np.ndarray,
                         alpha_plus: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Component probabilities of the sequential probit.
    :param x: Covariates, a p-vector or an n x p matrix.
    :param alpha_minus: (alpha0-, alphaX-).
    :param alpha_plus: (alpha0+, alphaX+).
    :return: (pi-, pi0, pi+), each of the shape of one row count.
    """
    x = np.asarray(x, dtype=float)
    eta_minus = alpha_minus[0] + x @ alpha_minus[1:]
    eta_plus = alpha_plus[0] + x @ alpha_plus[1:]
    pi_minus = ndtr(-eta_minus)
    stay = ndtr(eta_minus)
    return pi_minus, stay * ndtr(eta_plus), stay * ndtr(-eta_plus)


def log_mixing_probabilities(x: np.ndarray, alpha_minus: np.ndarray,
                             alpha_plus: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Logs of mixing_probabilities(), accurate when a probability underflows."""
    x = np.asarray(x, dtype=float)
    eta_minus = alpha_minus[0] + x @ alpha_minus[1:]
    eta_plus = alpha_plus[0] + x @ alpha_plus[1:]
    log_stay = log_ndtr(eta_minus)
    return log_ndtr(-eta_minus), log_stay + log_ndtr(eta_plus), log_stay + log_ndtr(-eta_plus)


def outcome_predictor(params: ParameterState, data: ObservedDataset,
                      g: np.ndarray) -> np.ndarray:
    """Mean of the latent outcome utility Y* of every unit given its label."""
    base = data.x @ params.gamma_x
    lst = data.log_s_tilde
    return base + np.select(
        [g == U_MINUS, g == U_PLUS, data.z == 0],
        [params.gamma_minus[0] + params.gamma_minus[1] * lst,
         params.gamma_plus[0] + params.gamma_plus[1] * lst,
         np.full(data.n, params.gamma00)],
        default=params.gamma01)


def _normal_log_pdf(value: np.ndarray, mean: np.ndarray, variance: float) -> np.ndarray:
    return -0.5 * (LOG_2PI + np.log(variance) + (value - mean) ** 2 / variance)


def _probit_log_likelihood(y: np.ndarray, predictor: np.ndarray) -> np.ndarray:
    return np.where(y == 1, log_ndtr(predictor), log_ndtr(-predictor))


def component_log_weights(params: ParameterState,
                          data: ObservedDataset) -> Dict[int, np.ndarray]:
    """
    Per unit log of mixing probability x forcing density x outcome likelihood, for each label.
    Labels that are impossible on a unit's side of the threshold get -inf.
    """
    design = data.design()
    lst = data.log_s_tilde
    log_pi_minus, log_pi_zero, log_pi_plus = log_mixing_probabilities(
        data.x, params.alpha_minus, params.alpha_plus)
    weights = {}
    for label, log_pi, beta, sigma2 in (
            (U_MINUS, log_pi_minus, params.beta_minus, params.sigma2_minus),
            (U_ZERO, log_pi_zero, params.beta, params.sigma2),
            (U_PLUS, log_pi_plus, params.beta_plus, params.sigma2_plus)):
        predictor = outcome_predictor(params, data, np.full(data.n, label, dtype=np.int8))
        weights[label] = (log_pi + _normal_log_pdf(lst, design @ beta, sigma2)
                          + _probit_log_likelihood(data.y, predictor))
    weights[U_MINUS] = np.where(data.z == 1, weights[U_MINUS], -np.inf)
    weights[U_PLUS] = np.where(data.z == 0, weights[U_PLUS], -np.inf)
    return weights


def log_prior_density(params: ParameterState, priors: Priors) -> float:
    """Log prior density, up to the constant shared by every state."""
    def normal(values: np.ndarray, variance: float) -> float:
        values = np.atleast_1d(values)
        return float(np.sum(_normal_log_pdf(values, 0.0, variance)))

    def inv_chi2(value: float) -> float:
        nu, s2 = priors.df, priors.scale
        return float(-(nu / 2 + 1) * np.log(value) - nu * s2 / (2 * value))

    var_alpha, var_gamma = priors.sd_alpha ** 2, priors.sd_gamma ** 2
    return (normal(params.alpha_minus, var_alpha) + normal(params.alpha_plus, var_alpha)
            + normal(params.beta, priors.var_beta) + normal(params.beta_minus, priors.var_beta)
            + normal(params.beta_plus, priors.var_beta)
            + inv_chi2(params.sigma2) + inv_chi2(params.sigma2_minus)
            + inv_chi2(params.sigma2_plus)
            + normal(np.array([params.gamma00, params.gamma01]), var_gamma)
            + normal(params.gamma_minus, var_gamma) + normal(params.gamma_plus, var_gamma)
            + (normal(params.gamma_x, var_gamma) if params.p else 0.0))


def complete_data_log_density(params: ParameterState, membership: MembershipState,
                              data: ObservedDataset, priors: Optional[Priors] = None) -> float:
    """
    Complete data log likelihood of the current labels, plus the log prior when priors are given.
    Finite for every state that respects the structural zeros.
    """
    weights = component_log_weights(params, data)
    total = 0.0
    for label, w in weights.items():
        mask = membership.g == label
        if mask.any():
            total += float(np.sum(w[mask]))
    if priors is not None:
        total += log_prior_density(params, priors)
    return total
