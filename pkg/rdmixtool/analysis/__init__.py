# coding=utf-8

"""What is done with the draws: estimands, covariate balance and the fixed window comparators."""

from .estimands import PosteriorSummary, summarize_rr, summarize_membership_counts, \
    summarize_mixing, membership_table, stratified_estimator, subpopulation_profile, \
    forcing_profile, rr_density, posterior_report
from .balance import BalanceReport, normalized_difference, log_sd_ratio, mahalanobis_balance, \
    balance_report, weighted_balance, posterior_balance, love_plot_data
from .window import WindowSpec, MICombined, fixed_window_sampler, local_polynomial_rd, \
    rubin_combine, export_membership_imputations, mi_relative_risk, window_from_bandwidths, \
    window_balance, window_subset

__all__ = ['PosteriorSummary', 'summarize_rr', 'summarize_membership_counts', 'summarize_mixing',
           'membership_table', 'stratified_estimator', 'subpopulation_profile', 'forcing_profile',
           'rr_density', 'posterior_report', 'BalanceReport', 'normalized_difference',
           'log_sd_ratio', 'mahalanobis_balance', 'balance_report', 'weighted_balance',
           'posterior_balance', 'love_plot_data', 'WindowSpec', 'MICombined',
           'fixed_window_sampler', 'local_polynomial_rd', 'rubin_combine',
           'export_membership_imputations', 'mi_relative_risk', 'window_from_bandwidths',
           'window_balance', 'window_subset']
