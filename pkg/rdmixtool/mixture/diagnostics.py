# coding=utf-8

"""Convergence diagnostics over the draws of several chains: rank normalized split R-hat and
effective sample size, both from arviz. They are advisory; a large R-hat produces a warning, never
an error."""

from typing import Dict, List, Optional

import arviz as az
import numpy as np

from .draws import PosteriorDraws
from ..errors import warn

__all__ = ['split_rhat', 'effective_sample_size', 'convergence_table', 'RHAT_THRESHOLD']

RHAT_THRESHOLD = 1.01
MIN_DRAWS = 4


def _usable(draws: np.ndarray) -> bool:
    """At least MIN_DRAWS finite draws per chain that are not all equal."""
    return draws.shape[1] >= MIN_DRAWS and bool(np.all(np.isfinite(draws))) \
        and np.ptp(draws) > 0


def split_rhat(draws: np.ndarray) -> float:
    """
    Potential scale reduction on split, rank normalized chains.
    :param draws: chains x draws.
    :return: R-hat, nan when there are fewer than 4 draws per chain or all draws are equal.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    return float(az.rhat(draws)) if _usable(draws) else np.nan


def effective_sample_size(draws: np.ndarray, method: str = 'bulk') -> float:
    """
    :param draws: chains x draws.
    :param method: arviz ESS method; 'mean' for the Monte Carlo error of a mean.
    :return: ESS, nan for constant series or fewer than 4 draws per chain.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    return float(az.ess(draws, method=method)) if _usable(draws) else np.nan


def _posterior(draws: PosteriorDraws, columns: List[str]) -> Dict[str, np.ndarray]:
    """chains x draws matrices of the columns, cut to the shortest chain."""
    grouped = [draws.table[draws.table['chain'] == chain] for chain in draws.chains]
    length = min(len(group) for group in grouped) if grouped else 0
    return {column: np.array([group[column].to_numpy()[:length] for group in grouped],
                             dtype=float).reshape(len(grouped), length)
            for column in columns}


def convergence_table(draws: PosteriorDraws, columns: Optional[List[str]] = None,
                      quiet: bool = False) -> List[dict]:
    """
    R-hat and ESS of the relative risk and every scalar parameter, one row each.
    :param draws: Posterior draws, possibly of several chains of equal length.
    :param columns: Defaults to rr and all parameters.
    :param quiet: Do not warn about R-hat above the threshold.
    """
    columns = columns or ['rr', 'pi_zero'] + draws.parameter_names
    matrices = _posterior(draws, columns)
    usable = {column: matrix for column, matrix in matrices.items() if _usable(matrix)}
    rhat, ess = {}, {}
    if usable:
        posterior = az.convert_to_dataset(usable)
        rhat, ess = az.rhat(posterior), az.ess(posterior)
    rows = []
    for column in columns:
        row_rhat = float(rhat[column]) if column in usable else np.nan
        row_ess = float(ess[column]) if column in usable else np.nan
        rows.append({'quantity': column, 'R-hat': row_rhat, 'ESS': row_ess})
        if not quiet and row_rhat > RHAT_THRESHOLD:
            warn(f'R-hat of {column} is {row_rhat:.3f}, above {RHAT_THRESHOLD}.')
    return rows
