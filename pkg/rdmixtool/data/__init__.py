# coding=utf-8

"""Ingestion and validation of the observed units."""

from .dataset import ObservedDataset, ingest, transform_forcing, inverse_transform_forcing, \
    summarize, forcing_bins, bin_index, DEFAULT_EPS0

__all__ = ['ObservedDataset', 'ingest', 'transform_forcing', 'inverse_transform_forcing',
           'summarize', 'forcing_bins', 'bin_index', 'DEFAULT_EPS0']
