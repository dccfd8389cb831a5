# coding=utf-8

"""The three component mixture: model, Gibbs sampler, draw storage and convergence checks."""

from .model import U_MINUS, U_ZERO, U_PLUS, LABEL_NAMES, Priors, SamplerConfig, ParameterState, \
    MembershipState, mixing_probabilities, complete_data_log_density
from .sampler import draw_membership, gibbs_iteration, impute_and_score, run_chain, run_chains
from .draws import PosteriorDraws, convert
from .diagnostics import split_rhat, effective_sample_size, convergence_table

__all__ = ['U_MINUS', 'U_ZERO', 'U_PLUS', 'LABEL_NAMES', 'Priors', 'SamplerConfig',
           'ParameterState', 'MembershipState', 'mixing_probabilities',
           'complete_data_log_density', 'draw_membership', 'gibbs_iteration', 'impute_and_score',
           'run_chain', 'run_chains', 'PosteriorDraws', 'convert', 'split_rhat',
           'effective_sample_size', 'convergence_table']
