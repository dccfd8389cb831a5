# coding=utf-8

"""Data augmented Gibbs sampler of the mixture. One iteration runs, in this order:

1. memberships of all units from their two-point full conditionals,
2. latent mixing utilities G*(-), G*(+), then alpha- on all units and alpha+ on U+ and U0,
3. forcing regressions (beta-, sigma2-), (beta+, sigma2+), (beta, sigma2) on their members,
4. latent outcome utilities Y*, then (gamma0-, gamma1-), (gamma0+, gamma1+), gamma00, gamma01,
5. Y* again, then the shared slopes gamma_x against Y* minus each unit's own intercept part.

Every step draws from its own substream of the iteration's stream, and per unit draws are taken
in fixed size shards with shard indexed substreams, so chains are reproducible bit for bit."""

import multiprocessing
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import expit

from .draws import PosteriorDraws, ChainRecorder
from .model import U_MINUS, U_ZERO, U_PLUS, Priors, SamplerConfig, ParameterState, \
    MembershipState, component_log_weights, log_mixing_probabilities, outcome_predictor, \
    complete_data_log_density
from ..data.dataset import ObservedDataset
from ..errors import NumericError, debug_log
from ..kernels import RngStream, ConjugateLinearUpdate, truncated_normal_array, \
    conjugate_coefficient_draw, residual_variance_draw, std_normal_cdf

__all__ = ['membership_probabilities', 'draw_membership', 'draw_memberships', 'gibbs_iteration',
           'impute_and_score', 'relative_risk', 'truncated_latent', 'run_chain', 'run_chains',
           'IterationResult', 'SHARD_SIZE']

SHARD_SIZE = 4096

# Substream keys, one per step of the iteration.
STEP_MEMBERSHIP, STEP_MIXING, STEP_ALPHA, STEP_BETA, STEP_Y_STAR, STEP_GAMMA, STEP_Y_STAR_X, \
    STEP_GAMMA_X, STEP_IMPUTE = range(9)


class IterationResult(NamedTuple):
    params: ParameterState
    membership: MembershipState
    prob_u0: np.ndarray
    fallbacks: int
    collapsed: List[str]


def _sharded(rng: RngStream, n: int, draw) -> np.ndarray:
    """Concatenates draw(substream, start, stop) over fixed size shards of n units."""
    parts = [draw(rng.substream(shard), start, min(start + SHARD_SIZE, n))
             for shard, start in enumerate(range(0, n, SHARD_SIZE))]
    return np.concatenate(parts) if parts else np.zeros(0)


def membership_probabilities(params: ParameterState,
                             data: ObservedDataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full conditional probability of U0 for every unit. The alternative is U+ for z=0 units and U-
    for z=1 units; the third label has probability zero.
    :return: (probability of U0, mask of units that fell back to the mixing probabilities
    because both weights vanished)
    """
    weights = component_log_weights(params, data)
    alternative = np.where(data.z == 1, weights[U_MINUS], weights[U_PLUS])
    log_u0 = weights[U_ZERO]
    fallback = ~np.isfinite(log_u0) & ~np.isfinite(alternative)
    fallback |= np.isnan(log_u0) | np.isnan(alternative)
    if fallback.any():
        log_minus, log_zero, log_plus = log_mixing_probabilities(
            data.x[fallback], params.alpha_minus, params.alpha_plus)
        log_u0 = log_u0.copy()
        alternative = alternative.copy()
        log_u0[fallback] = log_zero
        alternative[fallback] = np.where(data.z[fallback] == 1, log_minus, log_plus)
    return expit(log_u0 - alternative), fallback


def _labels_from(prob_u0: np.ndarray, uniforms: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.where(uniforms < prob_u0, U_ZERO, np.where(z == 1, U_MINUS, U_PLUS)).astype(np.int8)


def draw_memberships(params: ParameterState, data: ObservedDataset,
                     rng: RngStream) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Draws all memberships at once.
    :return: (labels, probabilities of U0, number of fallback events)
    """
    prob, fallback = membership_probabilities(params, data)
    uniforms = _sharded(rng, data.n, lambda r, a, b: r.generator.random(b - a))
    if fallback.any():
        debug_log(f'Membership weights vanished for {int(fallback.sum())} units, used the mixing '
                  f'probabilities only.')
    return _labels_from(prob, uniforms, data.z), prob, int(fallback.sum())


def draw_membership(unit: int, params: ParameterState, data: ObservedDataset,
                    rng: RngStream) -> int:
    """
    Draws the label of a single unit from its full conditional.
    :return: U_ZERO, U_MINUS or U_PLUS.
    """
    one = data.subset(np.arange(data.n) == unit)
    prob, _ = membership_probabilities(params, one)
    return int(_labels_from(prob, rng.generator.random(1), one.z)[0])


def truncated_latent(mean: np.ndarray, below_zero: np.ndarray, rng: RngStream) -> np.ndarray:
    """Unit variance normals truncated to (-inf, 0) where below_zero, to (0, inf) elsewhere."""
    lower = np.where(below_zero, -np.inf, 0.0)
    upper = np.where(below_zero, 0.0, np.inf)
    return _sharded(rng, mean.size, lambda r, a, b: truncated_normal_array(
        mean[a:b], 1.0, lower[a:b], upper[a:b], r))


def _coefficients(prior_variance: float, noise_variance: float, design: np.ndarray,
                  response: np.ndarray, rng: RngStream) -> np.ndarray:
    return conjugate_coefficient_draw(
        ConjugateLinearUpdate(1.0 / prior_variance, noise_variance, design, response), rng)


def _draw_y_star(params: ParameterState, membership: MembershipState, data: ObservedDataset,
                 rng: RngStream) -> np.ndarray:
    return truncated_latent(outcome_predictor(params, data, membership.g), data.y == 0, rng)


def gibbs_iteration(params: ParameterState, membership: MembershipState, data: ObservedDataset,
                    priors: Priors, rng: RngStream,
                    freeze_membership: bool = False) -> IterationResult:
    """
    One full sweep. Inputs are not modified.
    :param params: Current parameters.
    :param membership: Current latent state.
    :param data: The units.
    :param priors: Hyperparameters.
    :param rng: The stream of this iteration.
    :param freeze_membership: Keep the labels as they are and skip the membership step.
    :return: New state, conditional probabilities of U0, fallback count and the names of the
    blocks that had no members and were drawn from their prior.
    """
    params = params.copy()
    membership = membership.copy()
    collapsed = []
    design = data.design()
    lst = data.log_s_tilde
    var_alpha, var_gamma = priors.sd_alpha ** 2, priors.sd_gamma ** 2

    fallbacks = 0
    if freeze_membership:
        prob_u0, _ = membership_probabilities(params, data)
    else:
        membership.g, prob_u0, fallbacks = draw_memberships(
            params, data, rng.substream(STEP_MEMBERSHIP))
    g = membership.g
    in_minus, in_zero, in_plus = g == U_MINUS, g == U_ZERO, g == U_PLUS

    mixing_rng = rng.substream(STEP_MIXING)
    membership.g_star_minus = truncated_latent(design @ params.alpha_minus, in_minus,
                                               mixing_rng.substream(0))
    membership.g_star_plus = truncated_latent(design @ params.alpha_plus, in_plus,
                                              mixing_rng.substream(1))
    alpha_rng = rng.substream(STEP_ALPHA)
    params.alpha_minus = _coefficients(var_alpha, 1.0, design, membership.g_star_minus,
                                       alpha_rng.substream(0))
    stayed = ~in_minus
    if not stayed.any():
        collapsed.append('alpha_plus')
    params.alpha_plus = _coefficients(var_alpha, 1.0, design[stayed],
                                      membership.g_star_plus[stayed], alpha_rng.substream(1))

    beta_rng = rng.substream(STEP_BETA)
    for k, (mask, name) in enumerate(((in_minus, 'minus'), (in_plus, 'plus'), (in_zero, ''))):
        suffix = f'_{name}' if name else ''
        if not mask.any():
            collapsed.append(f'beta{suffix}')
        coefficients = _coefficients(priors.var_beta, getattr(params, f'sigma2{suffix}'),
                                     design[mask], lst[mask], beta_rng.substream(k, 0))
        setattr(params, f'beta{suffix}', coefficients)
        residuals = lst[mask] - design[mask] @ coefficients
        setattr(params, f'sigma2{suffix}', residual_variance_draw(
            priors.df, priors.scale, residuals, beta_rng.substream(k, 1)))

    membership.y_star = _draw_y_star(params, membership, data, rng.substream(STEP_Y_STAR))
    gamma_rng = rng.substream(STEP_GAMMA)
    net = membership.y_star - data.x @ params.gamma_x
    for k, (mask, name) in enumerate(((in_minus, 'gamma_minus'), (in_plus, 'gamma_plus'))):
        if not mask.any():
            collapsed.append(name)
        setattr(params, name, _coefficients(
            var_gamma, 1.0, np.column_stack([np.ones(int(mask.sum())), lst[mask]]), net[mask],
            gamma_rng.substream(k)))
    for k, (mask, name) in enumerate(((in_zero & (data.z == 0), 'gamma00'),
                                      (in_zero & (data.z == 1), 'gamma01'))):
        if not mask.any():
            collapsed.append(name)
        setattr(params, name, float(_coefficients(
            var_gamma, 1.0, np.ones((int(mask.sum()), 1)), net[mask],
            gamma_rng.substream(2 + k))[0]))

    membership.y_star = _draw_y_star(params, membership, data, rng.substream(STEP_Y_STAR_X))
    offset = outcome_predictor(params, data, g) - data.x @ params.gamma_x
    params.gamma_x = _coefficients(var_gamma, 1.0, data.x, membership.y_star - offset,
                                   rng.substream(STEP_GAMMA_X))

    if collapsed:
        debug_log(f'No members, drawn from the prior: {", ".join(collapsed)}')
    return IterationResult(params, membership, prob_u0, fallbacks, collapsed)


def relative_risk(y1: np.ndarray, y0: np.ndarray, rr_guard: float) -> Tuple[float, int, int, bool]:
    """
    Ratio of completed potential outcome totals.
    :return: (RR, numerator, denominator, degenerate). A zero denominator adds rr_guard to both
    totals and flags the draw as degenerate.
    """
    numerator, denominator = int(np.sum(y1)), int(np.sum(y0))
    if denominator == 0:
        return (numerator + rr_guard) / (denominator + rr_guard), numerator, denominator, True
    return numerator / denominator, numerator, denominator, False


def impute_and_score(params: ParameterState, membership: MembershipState, data: ObservedDataset,
                     rng: RngStream, rr_guard: float = 0.5) -> Dict[str, float]:
    """
    Imputes the missing potential outcome of every U0 unit from its counterfactual arm and
    computes the finite sample relative risk over U0. Writes the imputations to
    membership.y_missing.
    :return: Record with rr, rr_num, rr_den, degenerate and the membership counts.
    """
    in_zero = membership.g == U_ZERO
    base = data.x @ params.gamma_x
    counterfactual = np.where(data.z == 1, params.gamma00, params.gamma01) + base
    uniforms = _sharded(rng, data.n, lambda r, a, b: r.generator.random(b - a))
    imputed = (uniforms < std_normal_cdf(counterfactual)).astype(np.int8)
    membership.y_missing = np.where(in_zero, imputed, -1).astype(np.int8)

    y1 = np.where(data.z == 1, data.y, imputed)[in_zero]
    y0 = np.where(data.z == 0, data.y, imputed)[in_zero]
    rr, numerator, denominator, degenerate = relative_risk(y1, y0, rr_guard)
    record = {'rr': rr, 'rr_num': numerator, 'rr_den': denominator, 'degenerate': degenerate}
    record.update(membership.counts(data.z))
    return record


def _initial_state(data: ObservedDataset, priors: Priors, config: SamplerConfig,
                   rng: RngStream, frozen: Optional[np.ndarray]) -> Tuple[ParameterState,
                                                                      MembershipState]:
    params = ParameterState.initial(data.p, priors)
    if frozen is not None:
        membership = MembershipState.from_labels(frozen, data.y)
    else:
        membership = MembershipState.initial(data, rng, config.init_strategy)
    return params, membership


def run_chain(data: ObservedDataset, priors: Priors, config: SamplerConfig, chain: int = 0,
              frozen_membership: Optional[np.ndarray] = None) -> PosteriorDraws:
    """
    Runs one chain on stream (config.seed, chain).
    :param data: The units.
    :param priors: Hyperparameters.
    :param config: Iteration counts, seed and guards.
    :param chain: Chain index, also the stream id.
    :param frozen_membership: Labels to hold fixed, skipping the membership step.
    :return: Retained draws. A non recoverable numeric failure is raised with the draws completed
    so far attached as the exception's partial attribute.
    """
    stream = RngStream(config.seed, chain)
    params, membership = _initial_state(data, priors, config, stream.substream(0),
                                       frozen_membership)
    if frozen_membership is not None and membership.structural_violations(data.z):
        raise NumericError('Frozen memberships violate the structural zeros.',
                           module='mixture_gibbs')
    recorder = ChainRecorder(data, config, chain)
    debug_log(f'Chain {chain}: {config.iterations} iterations, {config.burn_in} burn-in, '
              f'thinning {config.thinning}, n={data.n}, p={data.p}.')

    for iteration in range(1, config.iterations + 1):
        rng = stream.substream(1, iteration)
        try:
            result = gibbs_iteration(params, membership, data, priors, rng,
                                     freeze_membership=frozen_membership is not None)
            log_density = complete_data_log_density(result.params, result.membership, data, priors)
            if not np.isfinite(log_density):
                raise NumericError(f'Complete data log density is {log_density} at iteration '
                                   f'{iteration}.', module='mixture_gibbs')
        except NumericError as e:
            e.module = 'mixture_gibbs'
            e.partial = recorder.finish()
            raise
        params, membership = result.params, result.membership
        recorder.count(result)

        if config.is_retained(iteration):
            record = impute_and_score(params, membership, data, rng.substream(STEP_IMPUTE),
                                      config.rr_guard)
            record['log_density'] = log_density
            recorder.record(iteration, params, membership, result.prob_u0, record)

        if config.progress_every and iteration % config.progress_every == 0:
            debug_log(f'Chain {chain}: iteration {iteration}/{config.iterations}, '
                      f'|U0|={int(np.sum(membership.g == U_ZERO))}')
    return recorder.finish()


# Module level, so that the worker pool can pickle it.
def _chain_worker(arguments: tuple) -> PosteriorDraws:
    data, priors, config, chain, frozen = arguments
    return run_chain(data, priors, config, chain, frozen)


def run_chains(data: ObservedDataset, priors: Priors, config: SamplerConfig, threads: int = 1,
               frozen_membership: Optional[np.ndarray] = None) -> PosteriorDraws:
    """
    Runs config.chains chains, in parallel when threads > 1, and concatenates them in chain order.
    The result does not depend on threads.
    """
    jobs = [(data, priors, config, chain, frozen_membership) for chain in range(config.chains)]
    if threads > 1 and config.chains > 1:
        with multiprocessing.Pool(processes=min(threads, config.chains)) as pool:
            chains = pool.map(_chain_worker, jobs)
    else:
        chains = [_chain_worker(job) for job in jobs]
    return PosteriorDraws.concatenate(chains)
