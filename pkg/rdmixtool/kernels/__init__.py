# coding=utf-8

"""Probabilistic primitives the Gibbs sampler is built from: seeded random streams, truncated
normal and scaled inverse chi-squared draws, and conjugate updates for Bayesian linear
regression with a spherical normal prior."""

from dataclasses import dataclass
from typing import Tuple, Union, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular, LinAlgError
from scipy.special import ndtr, ndtri, log_ndtr

from ..errors import DomainError, NumericError, debug_log

__all__ = ['RngStream', 'ConjugateLinearUpdate', 'sample_truncated_normal',
           'truncated_normal_array', 'sample_inv_chi_squared', 'conjugate_coefficient_draw',
           'residual_variance_posterior', 'residual_variance_draw', 'std_normal_cdf',
           'log_std_normal_cdf']

ArrayLike = Union[float, np.ndarray]

# Beyond this many standard deviations the inverse CDF runs out of precision.
TAIL_THRESHOLD = 5.0
JITTER_LADDER = (0.0, 1e-10, 1e-8)
MAX_REDRAWS = 100


class RngStream:
    """A numpy Generator bound to (seed, stream_id). Equal pairs give equal draw sequences,
    different stream ids or substream keys give independent ones."""

    def __init__(self, seed: int, stream_id: int = 0, key: Tuple[int, ...] = ()) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id)
        self.key = (self.stream_id,) + tuple(int(k) for k in key)
        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key)))

    def substream(self, *key: int) -> 'RngStream':
        """
        Derives an independent stream, e.g. one per iteration and data shard.
        :param key: Integers appended to this stream's spawn key.
        """
        return RngStream(self.seed, self.stream_id, self.key[1:] + tuple(key))

    def __repr__(self) -> str:
        return f'RngStream(seed={self.seed}, key={self.key})'


def std_normal_cdf(x: ArrayLike) -> ArrayLike:
    """Phi(x), accurate in both tails."""
    return ndtr(x)


def log_std_normal_cdf(x: ArrayLike) -> ArrayLike:
    """log Phi(x) without underflow for very negative x."""
    return log_ndtr(x)


def _right_tail(a: np.ndarray, b: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Standard normal truncated to (a, b) with a > TAIL_THRESHOLD. Exponential proposal for
    wide intervals, uniform proposal for narrow ones."""
    out = np.empty(a.shape)
    alpha = (a + np.sqrt(a * a + 4.0)) / 2.0
    narrow = (b - a) < 1.0 / a
    pending = np.arange(a.size)
    while pending.size:
        ap, bp, al, nw = a[pending], b[pending], alpha[pending], narrow[pending]
        u = gen.random(pending.size)
        e = gen.standard_exponential(pending.size)
        w = gen.random(pending.size)
        z = np.where(nw, ap + u * (bp - ap), ap + e / al)
        log_accept = np.where(nw, (ap * ap - z * z) / 2.0, -((z - al) ** 2) / 2.0)
        accepted = (np.log(w) <= log_accept) & (z < bp) & (z > ap)
        out[pending[accepted]] = z[accepted]
        pending = pending[~accepted]
    return out


def _standard_truncated(a: np.ndarray, b: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Standard normal truncated to (a, b), elementwise."""
    # Mirror intervals lying left of zero so that every tail is a right tail.
    flip = b <= 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    out = np.empty(lo.shape)

    straddle = lo < 0
    tail = ~straddle & (lo > TAIL_THRESHOLD)
    moderate = ~straddle & ~tail

    if np.any(straddle):
        p_lo, p_hi = ndtr(lo[straddle]), ndtr(hi[straddle])
        u = gen.random(p_lo.size)
        out[straddle] = ndtri(p_lo + u * (p_hi - p_lo))
    if np.any(moderate):
        # Survival function keeps precision for lower bounds up to the tail threshold.
        q_lo, q_hi = ndtr(-lo[moderate]), ndtr(-hi[moderate])
        u = gen.random(q_lo.size)
        out[moderate] = -ndtri(q_lo - u * (q_lo - q_hi))
    if np.any(tail):
        out[tail] = _right_tail(lo[tail], hi[tail], gen)

    return np.where(flip, -out, out)


def truncated_normal_array(mean: ArrayLike, sd: ArrayLike, lower: ArrayLike, upper: ArrayLike,
                           rng: RngStream) -> np.ndarray:
    """
    Vectorized draws from N(mean, sd^2) restricted to the open interval (lower, upper). Arguments
    broadcast against each other. Draws that land exactly on a bound are drawn again, so the
    result is always strictly inside.
    :param mean: Location(s).
    :param sd: Positive scale(s).
    :param lower: Lower bound(s), may be -inf.
    :param upper: Upper bound(s), may be +inf.
    :param rng: The stream to draw from.
    :return: Array with the broadcast shape.
    """
    mean, sd, lower, upper = np.broadcast_arrays(np.asarray(mean, dtype=float),
                                                 np.asarray(sd, dtype=float),
                                                 np.asarray(lower, dtype=float),
                                                 np.asarray(upper, dtype=float))
    if np.any(~(lower < upper)):
        raise DomainError('Truncation interval is empty: lower must be smaller than upper.')
    if np.any(~(sd > 0)):
        raise DomainError('Standard deviation must be positive.')

    shape = mean.shape
    mean, sd, lower, upper = (v.ravel() for v in (mean, sd, lower, upper))
    result = np.empty(mean.shape)
    pending = np.arange(mean.size)
    for _ in range(MAX_REDRAWS):
        a = (lower[pending] - mean[pending]) / sd[pending]
        b = (upper[pending] - mean[pending]) / sd[pending]
        draw = mean[pending] + sd[pending] * _standard_truncated(a, b, rng.generator)
        inside = (draw > lower[pending]) & (draw < upper[pending])
        result[pending[inside]] = draw[inside]
        pending = pending[~inside]
        if not pending.size:
            return result.reshape(shape)
        debug_log(f'Truncated normal: redrawing {pending.size} draws that hit a bound.')

    raise NumericError(f'{pending.size} truncated normal draws kept hitting their bounds.')


def sample_truncated_normal(mean: float, sd: float, lower: float, upper: float,
                            rng: RngStream) -> float:
    """
    One draw from N(mean, sd^2) restricted to (lower, upper).
    :param mean: Location.
    :param sd: Positive scale.
    :param lower: Lower bound, may be -inf.
    :param upper: Upper bound, may be +inf.
    :param rng: The stream to draw from.
    """
    return float(truncated_normal_array(mean, sd, lower, upper, rng)[()])


def sample_inv_chi_squared(df: float, scale: float, rng: RngStream,
                           size: Optional[int] = None) -> ArrayLike:
    """
    Draws from the scaled inverse chi-squared distribution, i.e. df * scale / chi2(df).
    :param df: Degrees of freedom, positive.
    :param scale: Scale, positive.
    :param rng: The stream to draw from.
    :param size: Number of draws, None for a scalar.
    """
    if not df > 0 or not scale > 0:
        raise DomainError(f'Inverse chi-squared needs positive df and scale, got {df}, {scale}.')
    draw = df * scale / rng.generator.chisquare(df, size)
    return float(draw) if size is None else draw


@dataclass
class ConjugateLinearUpdate:
    """Normal linear regression y ~ N(design @ b, noise_variance) with prior
    b ~ N(0, I / prior_precision_scale)."""
    prior_precision_scale: float
    noise_variance: float
    design: np.ndarray
    response: np.ndarray

    def __post_init__(self) -> None:
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.response = np.asarray(self.response, dtype=float).ravel()
        if self.design.shape[0] != self.response.shape[0]:
            raise DomainError(f'Design has {self.design.shape[0]} rows but the response has '
                              f'{self.response.shape[0]} entries.')
        if not self.noise_variance > 0 or not self.prior_precision_scale >= 0:
            raise DomainError('Noise variance must be positive, prior precision nonnegative.')

    @property
    def k(self) -> int:
        return self.design.shape[1]

    def precision(self) -> np.ndarray:
        """Posterior precision prior_precision_scale * I + X'X / noise_variance."""
        return (self.prior_precision_scale * np.identity(self.k)
                + self.design.T @ self.design / self.noise_variance)

    def factor(self) -> np.ndarray:
        """
        Lower Cholesky factor of the posterior precision. Climbs the jitter ladder before
        giving up.
        """
        precision = self.precision()
        for jitter in JITTER_LADDER:
            try:
                lower, _ = cho_factor(precision + jitter * np.identity(self.k), lower=True)
            except LinAlgError:
                debug_log(f'Cholesky failed with jitter {jitter}, escalating.')
                continue
            if np.all(np.isfinite(lower)):
                return np.tril(lower)
        raise NumericError('Posterior precision is not positive definite.',
                           condition_number=float(np.linalg.cond(precision)))

    def posterior_moments(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Deterministic accessor for the posterior.
        :return: (mu, Sigma) with Sigma = precision^-1 and mu = Sigma X'y / noise_variance.
        """
        lower = self.factor()
        rhs = self.design.T @ self.response / self.noise_variance
        mu = cho_solve((lower, True), rhs)
        sigma = cho_solve((lower, True), np.identity(self.k))
        return mu, (sigma + sigma.T) / 2.0


def conjugate_coefficient_draw(update: ConjugateLinearUpdate, rng: RngStream) -> np.ndarray:
    """
    One draw from the exact normal posterior of the regression coefficients.
    :param update: The regression problem.
    :param rng: The stream to draw from.
    :return: k-vector.
    """
    if update.k == 0:
        return np.zeros(0)
    lower = update.factor()
    rhs = update.design.T @ update.response / update.noise_variance
    mu = cho_solve((lower, True), rhs)
    z = rng.generator.standard_normal(update.k)
    return mu + solve_triangular(lower, z, lower=True, trans='T')


def residual_variance_posterior(prior_df: float, prior_scale: float,
                                residuals: np.ndarray) -> Tuple[float, float]:
    """
    Parameters of the scaled inverse chi-squared posterior of a normal variance.
    :return: (prior_df + n, [sum of squares + prior_df * prior_scale] / (prior_df + n))
    """
    if not prior_df > 0 or not prior_scale > 0:
        raise DomainError('Prior df and scale must be positive.')
    residuals = np.asarray(residuals, dtype=float).ravel()
    df = prior_df + residuals.size
    return df, (float(residuals @ residuals) + prior_df * prior_scale) / df


def residual_variance_draw(prior_df: float, prior_scale: float, residuals: np.ndarray,
                           rng: RngStream) -> float:
    """
    Draws a normal variance from its conjugate posterior.
    :param prior_df: Prior degrees of freedom.
    :param prior_scale: Prior scale.
    :param residuals: Residuals of the members of the block, may be empty.
    :param rng: The stream to draw from.
    """
    df, scale = residual_variance_posterior(prior_df, prior_scale, residuals)
    return sample_inv_chi_squared(df, scale, rng)
