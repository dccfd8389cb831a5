# coding=utf-8

"""Retained posterior draws, and how they are written to and read from a run directory.

The draw table has one row per retained draw: chain, iteration, every parameter under its stable
flat name, mixing proportions, membership counts, the relative risk and its guard flag. Per unit
quantities (running U0 frequencies, per draw bin means of the U0 probability, and the membership
samples taken every membership_stride retained draws) go into a companion units.npz."""

import hashlib
import json
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .model import U_ZERO, ParameterState, SamplerConfig, MembershipState
from ..data.dataset import ObservedDataset, forcing_bins, bin_index
from ..errors import DataError, debug_log

__all__ = ['PosteriorDraws', 'ChainRecorder', 'convert', 'dataset_digest', 'file_digest',
           'write_manifest', 'read_manifest', 'DRAW_FORMATS']

DRAW_FORMATS = ('csv', 'npz')
UNITS_FILE = 'units.npz'
MANIFEST_FILE = 'manifest.json'
SUMMARY_COLUMNS = ['pi_minus', 'pi_zero', 'pi_plus', 'n_u0', 'n_u0_z0', 'n_u0_z1', 'n_minus',
                   'n_plus', 'rr', 'rr_num', 'rr_den', 'degenerate', 'log_density']


class PosteriorDraws:
    """Draws of one or more chains."""

    def __init__(self, table: pd.DataFrame, p: int, unit_id: np.ndarray,
                 u0_frequency_sum: np.ndarray, u0_probability_sum: np.ndarray,
                 bin_edges: np.ndarray, bin_means: np.ndarray, memberships: np.ndarray,
                 membership_rows: np.ndarray, diagnostics: Optional[Dict[str, int]] = None) -> None:
        self.table = table.reset_index(drop=True)
        self.p = p
        self.unit_id = np.asarray(unit_id)
        self.u0_frequency_sum = np.asarray(u0_frequency_sum, dtype=float)
        self.u0_probability_sum = np.asarray(u0_probability_sum, dtype=float)
        self.bin_edges = np.asarray(bin_edges, dtype=float)
        self.bin_means = np.asarray(bin_means, dtype=float).reshape(
            len(self.table), max(self.bin_edges.size - 1, 0))
        self.memberships = np.asarray(memberships, dtype=np.int8).reshape(-1, self.unit_id.size)
        self.membership_rows = np.asarray(membership_rows, dtype=int)
        self.diagnostics = dict(diagnostics or {})

    def __len__(self) -> int:
        return len(self.table)

    @property
    def parameter_names(self) -> List[str]:
        return ParameterState.names(self.p)

    @property
    def chains(self) -> List[int]:
        return sorted(int(c) for c in self.table['chain'].unique())

    @property
    def u0_frequency(self) -> np.ndarray:
        """Per unit fraction of retained draws spent in U0."""
        return self.u0_frequency_sum / max(len(self), 1)

    @property
    def u0_probability(self) -> np.ndarray:
        """Per unit posterior mean of the conditional probability of U0."""
        return self.u0_probability_sum / max(len(self), 1)

    def parameters(self, row: int) -> ParameterState:
        return ParameterState.from_flat(self.table.iloc[row].to_dict(), self.p)

    @classmethod
    def concatenate(cls, parts: List['PosteriorDraws']) -> 'PosteriorDraws':
        """Joins chains in the given order."""
        if len(parts) == 1:
            return parts[0]
        offsets = np.cumsum([0] + [len(part) for part in parts[:-1]])
        diagnostics: Dict[str, int] = {}
        for part in parts:
            for key, value in part.diagnostics.items():
                diagnostics[key] = diagnostics.get(key, 0) + value
        first = parts[0]
        return cls(table=pd.concat([part.table for part in parts], ignore_index=True), p=first.p,
                   unit_id=first.unit_id,
                   u0_frequency_sum=sum(part.u0_frequency_sum for part in parts),
                   u0_probability_sum=sum(part.u0_probability_sum for part in parts),
                   bin_edges=first.bin_edges,
                   bin_means=np.vstack([part.bin_means for part in parts]),
                   memberships=np.vstack([part.memberships for part in parts]),
                   membership_rows=np.concatenate([part.membership_rows + offset
                                                   for part, offset in zip(parts, offsets)]),
                   diagnostics=diagnostics)

    def save(self, directory: str, fmt: str = 'csv') -> str:
        """
        Writes the draw table as draws.csv or draws.npz, and the per unit arrays as units.npz.
        :return: Path of the draw table.
        """
        if fmt not in DRAW_FORMATS:
            raise DataError(f'Unknown draw format {fmt}, use one of {DRAW_FORMATS}.',
                            module='mixture_gibbs')
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f'draws.{fmt}')
        _write_table(self.table, path)
        np.savez(os.path.join(directory, UNITS_FILE), p=self.p, unit_id=self.unit_id.astype(str),
                 u0_frequency_sum=self.u0_frequency_sum,
                 u0_probability_sum=self.u0_probability_sum, bin_edges=self.bin_edges,
                 bin_means=self.bin_means, memberships=self.memberships,
                 membership_rows=self.membership_rows,
                 diagnostics=json.dumps(self.diagnostics, sort_keys=True))
        debug_log(f'Wrote {len(self)} draws to {path}.')
        return path

    @classmethod
    def load(cls, directory: str) -> 'PosteriorDraws':
        """Reads what save() wrote; draws.csv is preferred over draws.npz."""
        for fmt in DRAW_FORMATS:
            path = os.path.join(directory, f'draws.{fmt}')
            if os.path.exists(path):
                table = _read_table(path)
                break
        else:
            raise DataError(f'No draw file in {directory}.', module='mixture_gibbs')
        try:
            with np.load(os.path.join(directory, UNITS_FILE)) as units:
                return cls(table=table, p=int(units['p']), unit_id=units['unit_id'],
                           u0_frequency_sum=units['u0_frequency_sum'],
                           u0_probability_sum=units['u0_probability_sum'],
                           bin_edges=units['bin_edges'], bin_means=units['bin_means'],
                           memberships=units['memberships'],
                           membership_rows=units['membership_rows'],
                           diagnostics=json.loads(str(units['diagnostics'])))
        except (OSError, KeyError) as e:
            raise DataError(f'Cannot read {UNITS_FILE} in {directory}: {e}',
                            module='mixture_gibbs')


class ChainRecorder:
    """Collects the retained draws of one chain while it runs."""

    def __init__(self, data: ObservedDataset, config: SamplerConfig, chain: int) -> None:
        self.data = data
        self.config = config
        self.chain = chain
        self.rows: List[dict] = []
        self.u0_frequency_sum = np.zeros(data.n)
        self.u0_probability_sum = np.zeros(data.n)
        self.bin_edges = forcing_bins(data.s, config.bin_width)
        self.bins = bin_index(data.s, self.bin_edges)
        self.bin_sizes = np.bincount(self.bins, minlength=self.bin_edges.size - 1)
        self.bin_means: List[np.ndarray] = []
        self.memberships: List[np.ndarray] = []
        self.membership_rows: List[int] = []
        self.diagnostics = {'fallbacks': 0, 'collapsed blocks': 0, 'iterations': 0}

    def count(self, result) -> None:
        """Bookkeeping of every iteration, burn-in included."""
        self.diagnostics['iterations'] += 1
        self.diagnostics['fallbacks'] += result.fallbacks
        self.diagnostics['collapsed blocks'] += len(result.collapsed)
        for name in result.collapsed:
            key = f'collapsed {name}'
            self.diagnostics[key] = self.diagnostics.get(key, 0) + 1

    def record(self, iteration: int, params: ParameterState, membership: MembershipState,
               prob_u0: np.ndarray, scores: dict) -> None:
        in_u0 = membership.g == U_ZERO
        n = self.data.n
        row = {'chain': self.chain, 'iteration': iteration}
        row.update(params.flatten())
        row.update({'pi_minus': scores['n_minus'] / n, 'pi_zero': scores['n_u0'] / n,
                    'pi_plus': scores['n_plus'] / n})
        row.update({key: scores[key] for key in SUMMARY_COLUMNS if key in scores})
        row['degenerate'] = int(scores['degenerate'])

        if len(self.rows) % self.config.membership_stride == 0:
            self.memberships.append(membership.g.copy())
            self.membership_rows.append(len(self.rows))
        self.rows.append(row)

        self.u0_frequency_sum += in_u0
        self.u0_probability_sum += prob_u0
        with np.errstate(invalid='ignore', divide='ignore'):
            self.bin_means.append(np.bincount(self.bins, weights=prob_u0,
                                              minlength=self.bin_sizes.size) / self.bin_sizes)

    def finish(self) -> PosteriorDraws:
        columns = ['chain', 'iteration'] + ParameterState.names(self.data.p) + SUMMARY_COLUMNS
        table = pd.DataFrame(self.rows, columns=columns)
        bins = self.bin_sizes.size
        return PosteriorDraws(
            table=table, p=self.data.p, unit_id=self.data.unit_id,
            u0_frequency_sum=self.u0_frequency_sum.copy(),
            u0_probability_sum=self.u0_probability_sum.copy(), bin_edges=self.bin_edges,
            bin_means=np.array(self.bin_means).reshape(len(self.rows), bins),
            memberships=np.array(self.memberships, dtype=np.int8).reshape(-1, self.data.n),
            membership_rows=np.array(self.membership_rows, dtype=int),
            diagnostics=dict(self.diagnostics))


def _write_table(table: pd.DataFrame, path: str) -> None:
    if path.endswith('.npz'):
        np.savez(path, columns=np.array(table.columns, dtype=str),
                 **{f'c{k}': table[name].to_numpy() for k, name in enumerate(table.columns)})
    else:
        table.to_csv(path, index=False, lineterminator='\n')


def _read_table(path: str) -> pd.DataFrame:
    if path.endswith('.npz'):
        with np.load(path) as archive:
            columns = [str(c) for c in archive['columns']]
            return pd.DataFrame({name: archive[f'c{k}'] for k, name in enumerate(columns)})
    try:
        return pd.read_csv(path, float_precision='round_trip')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f'Cannot read draw file {path}: {e}', module='mixture_gibbs')


def convert(path_in: str, path_out: str) -> int:
    """
    Converts a draw table between the delimited and the compact binary format, by extension.
    :return: Number of rows converted.
    """
    for path in (path_in, path_out):
        if not (path.endswith('.csv') or path.endswith('.npz')):
            raise DataError(f'Draw files end in .csv or .npz, got {path}.', module='mixture_gibbs')
    table = _read_table(path_in)
    _write_table(table, path_out)
    return len(table)


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_digest(data: ObservedDataset) -> str:
    """Hash over the validated columns, for runs on data that never was a file."""
    digest = hashlib.sha256()
    for array in (data.s, data.y, data.x, np.asarray([data.s0, data.eps0])):
        digest.update(np.ascontiguousarray(array, dtype=float).tobytes())
    return digest.hexdigest()


def write_manifest(directory: str, manifest: dict) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_FILE)
    with open(path, 'w') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write('\n')
    return path


def read_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST_FILE)
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as e:
        raise DataError(f'Cannot read run manifest {path}: {e}', module='cli')
