# coding=utf-8

"""The observed dataset: forcing variable, eligibility, binary outcome and covariates of every
unit, plus the log transform of the forcing variable all the mixture components are fitted on."""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import DataError, DomainError, EmptyDatasetError, SchemaError, debug_log

__all__ = ['ObservedDataset', 'ingest', 'transform_forcing', 'inverse_transform_forcing',
           'summarize', 'forcing_bins', 'bin_index', 'DEFAULT_EPS0']

DEFAULT_EPS0 = 0.5
# log(S~) is divided by this, so that unit-variance priors fit its scale.
FORCING_RESCALE = 10.0


def transform_forcing(s: Union[float, np.ndarray], s0: float,
                      eps0: float = DEFAULT_EPS0) -> Union[float, np.ndarray]:
    """
    Rescaled log distance from the threshold, [log(s + eps0) - log(s0)] / 10.
    :param s: Forcing variable value(s).
    :param s0: Threshold, positive.
    :param eps0: Shift applied before the log, so that zero incomes stay in the likelihood.
    """
    if not s0 > 0:
        raise DomainError(f'Threshold must be positive, got {s0}.', module='data_model')
    if eps0 < 0:
        raise DomainError(f'eps0 must be nonnegative, got {eps0}.', module='data_model')
    shifted = np.asarray(s, dtype=float) + eps0
    if np.any(~(shifted > 0)):
        raise DomainError('s + eps0 must be positive for every unit.', module='data_model')
    result = (np.log(shifted) - np.log(s0)) / FORCING_RESCALE
    return float(result) if result.ndim == 0 else result


def inverse_transform_forcing(log_s_tilde: Union[float, np.ndarray], s0: float,
                              eps0: float = DEFAULT_EPS0) -> Union[float, np.ndarray]:
    """Maps rescaled log values back onto the forcing variable scale."""
    return np.exp(FORCING_RESCALE * np.asarray(log_s_tilde, dtype=float)) * s0 - eps0


def _is_binary(column: np.ndarray) -> bool:
    return bool(np.all((column == 0) | (column == 1)))


@dataclass
class ObservedDataset:
    """
    Validated units. Covariates are held standardized: continuous columns are centered and
    scaled to unit variance, binary 0/1 columns are left alone. The affine map is kept, so that
    reports can go back to the original scale with original_covariates().
    """
    unit_id: np.ndarray
    s: np.ndarray
    s0: float
    y: np.ndarray
    x: np.ndarray
    covariate_names: Tuple[str, ...]
    x_center: np.ndarray
    x_scale: np.ndarray
    eps0: float = DEFAULT_EPS0
    rejected_rows: int = 0
    filtered_rows: int = 0
    z: np.ndarray = field(init=False)
    log_s_tilde: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.s = np.asarray(self.s, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int8)
        self.x = np.asarray(self.x, dtype=float).reshape(self.s.size, -1)
        self.unit_id = np.asarray(self.unit_id)
        # Eligibility is never taken from the input.
        self.z = (self.s <= self.s0).astype(np.int8)
        self.log_s_tilde = np.atleast_1d(transform_forcing(self.s, self.s0, self.eps0))
        for n_name, n_value in (('y', self.y.size), ('x', self.x.shape[0]),
                                ('unit_id', self.unit_id.size)):
            if n_value != self.s.size:
                raise DataError(f'Column {n_name} has {n_value} entries, s has {self.s.size}.')

    @classmethod
    def from_arrays(cls, s: Sequence[float], y: Sequence[int], x: Optional[np.ndarray], s0: float,
                    eps0: float = DEFAULT_EPS0, unit_id: Optional[Sequence] = None,
                    covariate_names: Optional[Sequence[str]] = None,
                    standardize: bool = True) -> 'ObservedDataset':
        """
        Builds a dataset from raw columns, standardizing the covariates.
        :param s: Forcing variable.
        :param y: Binary outcome.
        :param x: n x p covariates on their original scale, None for p = 0.
        :param s0: Threshold.
        :param eps0: Zero income shift.
        :param unit_id: Identifiers, defaults to 0..n-1.
        :param covariate_names: Defaults to x1..xp.
        :param standardize: If False, the covariates are taken as they are.
        """
        s = np.asarray(s, dtype=float)
        n = s.size
        x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=float).reshape(n, -1)
        p = x.shape[1]
        if covariate_names is None:
            covariate_names = tuple(f'x{j + 1}' for j in range(p))
        if unit_id is None:
            unit_id = np.arange(n)

        center, scale = np.zeros(p), np.ones(p)
        if standardize:
            for j in range(p):
                if n and not _is_binary(x[:, j]):
                    center[j] = x[:, j].mean()
                    sd = x[:, j].std()
                    scale[j] = sd if sd > 0 else 1.0

        _check_nonempty(s, s0)
        return cls(unit_id=np.asarray(unit_id), s=s, s0=s0, y=np.asarray(y),
                   x=(x - center) / scale, covariate_names=tuple(covariate_names),
                   x_center=center, x_scale=scale, eps0=eps0)

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def binary_covariates(self) -> np.ndarray:
        return np.array([_is_binary(self.x[:, j]) for j in range(self.p)], dtype=bool)

    def design(self) -> np.ndarray:
        """[1, X], the design of the mixing and forcing regressions."""
        return np.column_stack([np.ones(self.n), self.x])

    def original_covariates(self) -> np.ndarray:
        """Covariates mapped back to the scale they were read on."""
        return self.x * self.x_scale + self.x_center

    def subset(self, mask: np.ndarray) -> 'ObservedDataset':
        """
        Units selected by a boolean mask. The standardization map is inherited, so parameters stay
        comparable with the full dataset.
        """
        mask = np.asarray(mask, dtype=bool)
        return ObservedDataset(unit_id=self.unit_id[mask], s=self.s[mask], s0=self.s0,
                               y=self.y[mask], x=self.x[mask], covariate_names=self.covariate_names,
                               x_center=self.x_center, x_scale=self.x_scale, eps0=self.eps0)

    def to_frame(self, schema: Optional[Mapping] = None) -> pd.DataFrame:
        """The dataset in the layout ingest() reads, covariates on their original scale."""
        schema = schema or {}
        frame = pd.DataFrame({schema.get('id', 'id'): self.unit_id,
                              schema.get('s', 's'): self.s,
                              schema.get('y', 'y'): self.y})
        original = self.original_covariates()
        for j, name in enumerate(self.covariate_names):
            frame[name] = original[:, j]
        return frame


def _check_nonempty(s: np.ndarray, s0: float) -> None:
    if s.size == 0:
        raise EmptyDatasetError('No units left after ingestion.')
    below = int(np.sum(s <= s0))
    if below == 0 or below == s.size:
        raise EmptyDatasetError(f'All {s.size} units are on one side of the threshold {s0}; '
                                f'the design is degenerate.')


def ingest(path: str, schema: Mapping, s0: float, eps0: float = DEFAULT_EPS0,
           restrict: Optional[Mapping[str, float]] = None) -> ObservedDataset:
    """
    Reads and validates a delimited file.
    :param path: CSV with a header line.
    :param schema: Column mapping with keys 's', 'y', 'x' (list of covariate columns) and an
    optional 'id'. A 'z' column in the file, if any, is ignored.
    :param s0: Threshold.
    :param eps0: Zero income shift.
    :param restrict: Optional pre-filter on the forcing variable, keys 's_min' and 's_max'.
    :return: The dataset. Rows with blank or non-numeric cells, negative s or y outside {0, 1}
    are rejected and counted in rejected_rows; rows outside the restriction in filtered_rows.
    """
    if not s0 > 0:
        raise DomainError(f'Threshold must be positive, got {s0}.', module='data_model')
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f'Cannot read {path}: {e}')

    covariates = list(schema.get('x', []))
    wanted = [schema['s'], schema['y']] + covariates
    if 'id' in schema:
        wanted.append(schema['id'])
    missing = [name for name in wanted if name not in frame.columns]
    if missing:
        raise SchemaError(f'Columns missing from {path}: {", ".join(missing)}')

    numeric = pd.DataFrame({name: pd.to_numeric(frame[name].str.strip(), errors='coerce')
                            for name in [schema['s'], schema['y']] + covariates})
    valid = numeric.notna().all(axis=1)
    valid &= numeric[schema['s']] >= 0
    valid &= numeric[schema['y']].isin([0, 1])
    rejected = int((~valid).sum())
    if rejected:
        debug_log(f'Rejected {rejected} of {len(frame)} rows of {path}.')
    if not valid.any():
        raise EmptyDatasetError(f'All {len(frame)} rows of {path} were rejected.')

    keep = valid.copy()
    restrict = restrict or {}
    if 's_max' in restrict:
        keep &= numeric[schema['s']] <= restrict['s_max']
    if 's_min' in restrict:
        keep &= numeric[schema['s']] >= restrict['s_min']
    filtered = int((valid & ~keep).sum())
    if filtered:
        debug_log(f'Restriction removed {filtered} rows.')

    numeric = numeric[keep]
    unit_id = frame.loc[keep, schema['id']].to_numpy() if 'id' in schema \
        else np.flatnonzero(keep.to_numpy())
    dataset = ObservedDataset.from_arrays(
        s=numeric[schema['s']].to_numpy(), y=numeric[schema['y']].to_numpy().astype(int),
        x=numeric[covariates].to_numpy() if covariates else None, s0=s0, eps0=eps0,
        unit_id=unit_id, covariate_names=covariates)
    dataset.rejected_rows = rejected
    dataset.filtered_rows = filtered
    debug_log(f'Ingested {dataset.n} units, {int(dataset.z.sum())} eligible, p={dataset.p}.')
    return dataset


def _describe(s: np.ndarray) -> dict:
    q1, median, q3 = np.percentile(s, [25, 50, 75])
    return {'n': int(s.size), 'min': float(s.min()), 'Q1': float(q1), 'median': float(median),
            'mean': float(s.mean()), 'Q3': float(q3), 'max': float(s.max()),
            'SD': float(s.std(ddof=1)) if s.size > 1 else 0.0}


def summarize(dataset: ObservedDataset) -> dict:
    """
    Descriptive statistics by eligibility group and overall: distribution of the forcing
    variable, covariate means on the original scale, and the outcome rate per mil.
    """
    if dataset.n == 0:
        raise EmptyDatasetError('Cannot summarize an empty dataset.')
    original = dataset.original_covariates()
    groups = []
    for label, mask in (('eligible', dataset.z == 1), ('ineligible', dataset.z == 0),
                        ('overall', np.ones(dataset.n, dtype=bool))):
        if not mask.any():
            continue
        row = {'group': label}
        row.update(_describe(dataset.s[mask]))
        row['outcome per mil'] = float(dataset.y[mask].mean() * 1000.0)
        for j, name in enumerate(dataset.covariate_names):
            row[f'mean {name}'] = float(original[mask, j].mean())
        groups.append(row)
    return {'s0': dataset.s0, 'eps0': dataset.eps0, 'units': dataset.n,
            'rejected rows': dataset.rejected_rows, 'filtered rows': dataset.filtered_rows,
            'groups': groups}


def forcing_bins(s: np.ndarray, width: float) -> np.ndarray:
    """
    Edges of width wide bins covering the observed range of s, aligned on multiples of width.
    Bins are (a, b], except the first one which also holds its lower edge.
    """
    if not width > 0:
        raise DomainError(f'Bin width must be positive, got {width}.', module='estimands')
    low = np.floor(np.min(s) / width) * width
    high = np.ceil(np.max(s) / width) * width
    if high <= low:
        high = low + width
    return low + width * np.arange(int(round((high - low) / width)) + 1)


def bin_index(s: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Index of the forcing_bins() bin of every value."""
    return np.clip(np.searchsorted(edges, s, side='left') - 1, 0, edges.size - 2)
