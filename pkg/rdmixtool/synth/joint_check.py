# coding=utf-8

"""Joint distribution check of the Gibbs sweep. Two samplers of the joint distribution of
parameters, memberships and data on a fixed covariate design are compared on scalar test
functions: forward simulation (parameters from the prior, then memberships and data from the
model) and successive conditional simulation (a full Gibbs sweep given the data, membership step
included, then fresh data given parameters and memberships). A correct sweep leaves both with the
same moments.

The joint is the one the sweep targets: U- units at or below the threshold and U+ units above it.
Forward simulation therefore keeps a prior draw with probability equal to the chance that every
unit lands on an admissible side, which is known in closed form, and then draws side components'
forcing values from their normals truncated at the threshold. The successive conditional side
draws its data the same way."""

from typing import Dict, List, Optional, Tuple

import numpy as np

from . import CovariateSpec, simulate_given_labels, sample_prior, DEFAULT_S0
from ..data.dataset import ObservedDataset, inverse_transform_forcing
from ..errors import NumericError, debug_log
from ..kernels import RngStream, std_normal_cdf
from ..mixture.diagnostics import effective_sample_size
from ..mixture.model import U_MINUS, U_ZERO, U_PLUS, Priors, ParameterState, MembershipState, \
    mixing_probabilities
from ..mixture.sampler import gibbs_iteration

__all__ = ['forward_draw', 'forward_draws', 'gibbs_draws', 'compare_moments', 'run_joint_check',
           'TEST_FUNCTIONS', 'joint_check_priors']

TEST_FUNCTIONS = ('gamma01', 'sigma2', 'pi_zero')
SECOND_MOMENTS = ('gamma01', 'pi_zero')
# With eps0 = 0 the threshold sits at zero on the rescaled log scale.
SIDE_BOUND = 0.0
MAX_ATTEMPTS = 100000


def joint_check_priors() -> Priors:
    """Default priors with tighter forcing coefficients, so simulated forcing values stay finite,
    and more variance degrees of freedom, so that sigma2 has a finite variance."""
    return Priors(var_beta=1.0, df=8.0)


def _design(n: int, p: int, seed: int) -> np.ndarray:
    return CovariateSpec(continuous=p, binary=0).draw(n, RngStream(seed, 2))


def _observe(units: dict, x: np.ndarray) -> ObservedDataset:
    s = inverse_transform_forcing(units['log_s_tilde'], DEFAULT_S0, 0.0)
    z = s <= DEFAULT_S0
    in_zero = units['labels'] == U_ZERO
    y = np.where(in_zero, np.where(z, units['y1'], units['y0']), units['y_s'])
    p = x.shape[1]
    return ObservedDataset(unit_id=np.arange(s.size), s=s, s0=DEFAULT_S0, y=y, x=x,
                           covariate_names=CovariateSpec(continuous=p, binary=0).names(),
                           x_center=np.zeros(p), x_scale=np.ones(p), eps0=0.0)


def _admissible_weights(params: ParameterState, x: np.ndarray) -> np.ndarray:
    """3 x n: mixing probability of U-, U0, U+ times the chance that the component's forcing
    value lands on a side where the component is possible."""
    design = np.column_stack([np.ones(x.shape[0]), x])
    pi_minus, pi_zero, pi_plus = mixing_probabilities(x, params.alpha_minus, params.alpha_plus)
    below = std_normal_cdf((SIDE_BOUND - design @ params.beta_minus)
                           / np.sqrt(params.sigma2_minus))
    above = std_normal_cdf((design @ params.beta_plus - SIDE_BOUND)
                           / np.sqrt(params.sigma2_plus))
    return np.vstack([pi_minus * below, pi_zero, pi_plus * above])


def forward_draw(x: np.ndarray, priors: Priors, rng: RngStream,
                 max_attempts: int = MAX_ATTEMPTS) -> Tuple[ParameterState, np.ndarray,
                                                            ObservedDataset, int]:
    """
    One exact draw of parameters, memberships and data.
    :return: (parameters, labels, dataset, number of prior draws it took)
    """
    for attempt in range(max_attempts):
        params = sample_prior(x.shape[1], priors, rng.substream(attempt, 0))
        weights = _admissible_weights(params, x)
        admissible = weights.sum(axis=0)
        gen = rng.substream(attempt, 1).generator
        with np.errstate(divide='ignore'):
            if not np.log(gen.random()) < np.sum(np.log(admissible)):
                continue
        cumulative = np.cumsum(weights / admissible, axis=0)
        u = gen.random(x.shape[0])
        labels = np.where(u < cumulative[0], U_MINUS,
                          np.where(u < cumulative[1], U_ZERO, U_PLUS)).astype(np.int8)
        units = simulate_given_labels(params, x, labels, rng.substream(attempt, 2), SIDE_BOUND)
        return params, labels, _observe(units, x), attempt + 1
    raise NumericError(f'No prior draw out of {max_attempts} kept every simulated unit on an '
                       f'admissible side; use fewer units.', module='synth')


def _record(params: ParameterState, labels: np.ndarray) -> Dict[str, float]:
    return {'gamma01': params.gamma01, 'sigma2': params.sigma2,
            'pi_zero': float(np.mean(labels == U_ZERO))}


def forward_draws(draws: int, n: int = 30, p: int = 1, priors: Optional[Priors] = None,
                  seed: int = 0) -> Dict[str, np.ndarray]:
    """Independent draws of the test functions by forward simulation."""
    priors = priors or joint_check_priors()
    x = _design(n, p, seed)
    stream = RngStream(seed, 0)
    records, attempts = [], 0
    for m in range(draws):
        params, labels, _, tries = forward_draw(x, priors, stream.substream(m))
        attempts += tries
        records.append(_record(params, labels))
    debug_log(f'Joint check: {attempts} prior draws for {draws} forward draws.')
    return {name: np.array([r[name] for r in records]) for name in TEST_FUNCTIONS}


def gibbs_draws(draws: int, n: int = 30, p: int = 1, priors: Optional[Priors] = None,
                seed: int = 0) -> Dict[str, np.ndarray]:
    """Draws of the test functions along the successive conditional chain."""
    priors = priors or joint_check_priors()
    x = _design(n, p, seed)
    stream = RngStream(seed, 1)
    params, labels, data, _ = forward_draw(x, priors, stream.substream(0))
    records = []
    for m in range(draws):
        result = gibbs_iteration(params, MembershipState.from_labels(labels, data.y), data,
                                 priors, stream.substream(1, m, 0))
        params, labels = result.params, result.membership.g
        data = _observe(simulate_given_labels(params, x, labels, stream.substream(1, m, 1),
                                              SIDE_BOUND), x)
        records.append(_record(params, labels))
        if (m + 1) % 1000 == 0:
            debug_log(f'Joint check: {m + 1}/{draws} successive conditional draws.')
    return {name: np.array([r[name] for r in records]) for name in TEST_FUNCTIONS}


def compare_moments(forward: Dict[str, np.ndarray],
                    gibbs: Dict[str, np.ndarray]) -> List[dict]:
    """
    Standardized differences of first (and for some functions second) moments. The Monte Carlo
    error of the Gibbs side uses its effective sample size.
    """
    rows = []
    for name in TEST_FUNCTIONS:
        for power in ((1, 2) if name in SECOND_MOMENTS else (1,)):
            a, b = forward[name] ** power, gibbs[name] ** power
            se_a = np.std(a, ddof=1) / np.sqrt(a.size)
            ess = effective_sample_size(b, method='mean')
            se_b = np.std(b, ddof=1) / np.sqrt(ess if np.isfinite(ess) and ess > 0 else b.size)
            se = np.hypot(se_a, se_b)
            rows.append({'quantity': name, 'moment': power, 'forward mean': float(a.mean()),
                         'gibbs mean': float(b.mean()), 'forward se': float(se_a),
                         'gibbs se': float(se_b),
                         'z': float((a.mean() - b.mean()) / se) if se > 0 else 0.0})
    return rows


def run_joint_check(draws: int = 5000, n: int = 30, p: int = 1, priors: Optional[Priors] = None,
                    seed: int = 0, threshold: float = 3.0) -> dict:
    """
    Runs both samplers and compares them.
    :return: {'rows': compare_moments() rows, 'passed': every |z| below threshold}
    """
    rows = compare_moments(forward_draws(draws, n, p, priors, seed),
                           gibbs_draws(draws, n, p, priors, seed))
    return {'rows': rows, 'passed': all(abs(row['z']) < threshold for row in rows)}
