# coding=utf-8

"""Bayesian analysis of regression discontinuity designs under the local randomization framework.
Units are classified into three latent subpopulations by a finite mixture fitted with a data
augmented Gibbs sampler: U0, where the RD assumptions hold, and U- / U+, below and above the
threshold, where they may fail. The causal relative risk is then inferred for U0 only. Fixed
window comparators, local polynomial estimators, and multiple imputation combining are included
so the mixture results can be put next to the usual analyses."""

DEBUG_MODE = False

from .data.dataset import ObservedDataset, ingest, transform_forcing, summarize  # noqa: E402
from .mixture.model import ParameterState, MembershipState, Priors, SamplerConfig  # noqa: E402
from .mixture.sampler import run_chain, run_chains  # noqa: E402

__version__ = '1.0.0'

__all__ = ['ObservedDataset', 'ingest', 'transform_forcing', 'summarize', 'ParameterState',
           'MembershipState', 'Priors', 'SamplerConfig', 'run_chain', 'run_chains', 'set_debug']


def set_debug(enabled: bool) -> None:
    """Enables or disables the diagnostic output on stderr

    :param enabled: Knob direction"""
    global DEBUG_MODE
    DEBUG_MODE = enabled
