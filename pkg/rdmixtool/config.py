# coding=utf-8

"""Run configuration: one YAML file, validated completely before anything is computed. Only the
seed, the output directory and the number of worker processes may be overridden from the
environment (RDMIXTOOL_SEED, RDMIXTOOL_OUT, RDMIXTOOL_THREADS), and command line flags override
the environment."""

import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional

import yaml

from .analysis.window import WindowSpec
from .data.dataset import DEFAULT_EPS0
from .errors import ConfigError, DataError
from .mixture.draws import DRAW_FORMATS
from .mixture.model import Priors, SamplerConfig
from .synth import SCENARIOS

__all__ = ['RunConfig', 'load_config', 'config_from_dict', 'parse_window', 'resolve_override',
           'ENVIRONMENT']

ENVIRONMENT = {'seed': 'RDMIXTOOL_SEED', 'out': 'RDMIXTOOL_OUT', 'threads': 'RDMIXTOOL_THREADS'}

TOP_LEVEL = {'data', 's0', 'eps0', 'restrict', 'priors', 'sampler', 'analysis', 'synth', 'output'}
DATA_KEYS = {'path', 'schema'}
SCHEMA_KEYS = {'s', 'y', 'x', 'id'}
RESTRICT_KEYS = {'s_min', 's_max'}
PRIOR_KEYS = {'sd_alpha', 'sd_gamma', 'var_beta', 'df', 'scale'}
SAMPLER_KEYS = {'iterations', 'burn_in', 'thinning', 'chains', 'seed', 'init_strategy', 'rr_guard',
                'membership_stride', 'bin_width', 'progress_every', 'threads'}
ANALYSIS_KEYS = {'mixture', 'balance', 'balance_every', 'windows', 'window_sampler', 'mi',
                 'draw_format', 'density_grid'}
WINDOW_KEYS = {'name', 'lower', 'upper', 'kernel', 'order', 'h_left', 'h_right'}
MI_KEYS = {'m', 'stride'}
SYNTH_KEYS = {'scenario', 'n', 'continuous', 'binary', 'seed'}
OUTPUT_KEYS = {'directory'}


def _check_keys(block: Any, allowed: set, where: str) -> dict:
    if block is None:
        return {}
    if not isinstance(block, Mapping):
        raise ConfigError(f'{where} must be a mapping, got {type(block).__name__}.')
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f'Unknown key(s) in {where}: {", ".join(map(str, unknown))}. '
                          f'Allowed: {", ".join(sorted(allowed))}.')
    return dict(block)


def _number(value: Any, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'{where} must be a number, got {value!r}.')
    if positive and not value > 0:
        raise ConfigError(f'{where} must be positive, got {value!r}.')
    return float(value)


def _integer(value: Any, where: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f'{where} must be an integer >= {minimum}, got {value!r}.')
    return value


def parse_window(block: Mapping, index: int = 0) -> WindowSpec:
    """A window given by bounds, by bandwidths, or both."""
    where = f'analysis.windows[{index}]'
    block = _check_keys(block, WINDOW_KEYS, where)
    try:
        return WindowSpec(
            lower=_number(block['lower'], f'{where}.lower') if 'lower' in block else -float('inf'),
            upper=_number(block['upper'], f'{where}.upper') if 'upper' in block else float('inf'),
            kernel=block.get('kernel', 'uniform'), order=block.get('order', 1),
            bandwidth_left=_number(block['h_left'], f'{where}.h_left', True)
            if 'h_left' in block else None,
            bandwidth_right=_number(block['h_right'], f'{where}.h_right', True)
            if 'h_right' in block else None,
            name=str(block.get('name', '')))
    except DataError as e:
        raise ConfigError(f'{where}: {e}')


@dataclass
class RunConfig:
    """Everything a run needs. Either data or synth names the units."""
    s0: float
    eps0: float = DEFAULT_EPS0
    data_path: Optional[str] = None
    schema: Dict[str, Any] = field(default_factory=dict)
    restrict: Dict[str, float] = field(default_factory=dict)
    priors: Priors = field(default_factory=Priors)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    threads: int = 1
    mixture: bool = True
    balance: bool = True
    balance_every: int = 1
    windows: List[WindowSpec] = field(default_factory=list)
    window_sampler: bool = True
    mi: Optional[Dict[str, int]] = None
    draw_format: str = 'csv'
    density_grid: int = 200
    synth: Optional[Dict[str, Any]] = None
    output_directory: str = 'rdmixtool-run'

    def echo(self) -> dict:
        """The configuration as written to the run manifest. The number of worker processes is
        left out since no output depends on it."""
        return {'s0': self.s0, 'eps0': self.eps0,
                'data': {'path': self.data_path, 'schema': self.schema},
                'restrict': self.restrict, 'priors': self.priors.as_dict(),
                'sampler': self.sampler.as_dict(),
                'analysis': {'mixture': self.mixture, 'balance': self.balance,
                             'balance_every': self.balance_every,
                             'windows': [w.as_dict() for w in self.windows],
                             'window_sampler': self.window_sampler, 'mi': self.mi,
                             'draw_format': self.draw_format, 'density_grid': self.density_grid},
                'synth': self.synth, 'output': {'directory': self.output_directory}}


def config_from_dict(tree: Optional[Mapping], overrides: Optional[Mapping] = None,
                     environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    Validates a configuration tree.
    :param tree: Parsed YAML.
    :param overrides: Command line values for 'seed', 'out' and 'threads'; None entries are
    ignored.
    :param environ: Environment, os.environ by default.
    :raises ConfigError: On the first problem found.
    """
    tree = _check_keys(tree or {}, TOP_LEVEL, 'the configuration')
    environ = os.environ if environ is None else environ
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    forced = {}
    for key, variable in ENVIRONMENT.items():
        if key in overrides:
            forced[key] = overrides[key]
        elif variable in environ:
            forced[key] = environ[variable]
    for key in ('seed', 'threads'):
        if key in forced:
            try:
                forced[key] = int(forced[key])
            except (TypeError, ValueError):
                raise ConfigError(f'{ENVIRONMENT[key]} / --{key} must be an integer, got '
                                  f'{forced[key]!r}.')

    if 's0' not in tree:
        raise ConfigError('The threshold s0 is required.')
    s0 = _number(tree['s0'], 's0', positive=True)
    eps0 = _number(tree.get('eps0', DEFAULT_EPS0), 'eps0')
    if eps0 < 0:
        raise ConfigError(f'eps0 must be nonnegative, got {eps0}.')

    data = _check_keys(tree.get('data'), DATA_KEYS, 'data')
    schema = _check_keys(data.get('schema'), SCHEMA_KEYS, 'data.schema')
    synth = _check_keys(tree.get('synth'), SYNTH_KEYS, 'synth') if 'synth' in tree else None
    if data and synth is not None:
        raise ConfigError('Give either data or synth, not both.')
    if data:
        if 'path' not in data:
            raise ConfigError('data.path is required.')
        for key in ('s', 'y'):
            if key not in schema:
                raise ConfigError(f'data.schema.{key} is required.')
        x = schema.get('x', [])
        if isinstance(x, str) or not all(isinstance(name, str) for name in x):
            raise ConfigError('data.schema.x must be a list of column names.')
        schema['x'] = list(x)
    if synth is not None:
        synth.setdefault('scenario', 'separated')
        if synth['scenario'] not in SCENARIOS:
            raise ConfigError(f'Unknown synth scenario {synth["scenario"]!r}, use one of '
                              f'{", ".join(SCENARIOS)}.')
        synth['n'] = _integer(synth.get('n', 2000), 'synth.n')
        synth['continuous'] = _integer(synth.get('continuous', 2), 'synth.continuous', 0)
        synth['binary'] = _integer(synth.get('binary', 1), 'synth.binary', 0)
        synth['seed'] = _integer(synth.get('seed', 0), 'synth.seed', 0)

    restrict = {key: _number(value, f'restrict.{key}')
                for key, value in _check_keys(tree.get('restrict'), RESTRICT_KEYS,
                                              'restrict').items()}

    prior_block = _check_keys(tree.get('priors'), PRIOR_KEYS, 'priors')
    priors = Priors(**prior_block)

    sampler_block = _check_keys(tree.get('sampler'), SAMPLER_KEYS, 'sampler')
    threads = sampler_block.pop('threads', 1)
    if 'seed' in forced:
        sampler_block['seed'] = forced['seed']
    if 'threads' in forced:
        threads = forced['threads']
    threads = _integer(threads, 'threads')
    seed = sampler_block.get('seed', 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f'sampler.seed must be a 64 bit unsigned integer, got {seed!r}.')
    sampler = SamplerConfig(**sampler_block)

    analysis = _check_keys(tree.get('analysis'), ANALYSIS_KEYS, 'analysis')
    windows = analysis.get('windows') or []
    if not isinstance(windows, list):
        raise ConfigError('analysis.windows must be a list.')
    specs = [parse_window(block, k) for k, block in enumerate(windows)]
    for spec in specs:
        try:
            spec.bounds(s0)
        except DataError as e:
            raise ConfigError(f'analysis.windows: {e}')
    mi = analysis.get('mi')
    if mi is not None:
        mi = _check_keys(mi, MI_KEYS, 'analysis.mi')
        mi = {'m': _integer(mi.get('m', 5), 'analysis.mi.m', 2),
              'stride': _integer(mi.get('stride', 1), 'analysis.mi.stride')}
    draw_format = analysis.get('draw_format', 'csv')
    if draw_format not in DRAW_FORMATS:
        raise ConfigError(f'analysis.draw_format must be one of {DRAW_FORMATS}.')
    for key in ('mixture', 'balance', 'window_sampler'):
        if not isinstance(analysis.get(key, True), bool):
            raise ConfigError(f'analysis.{key} must be true or false.')

    output = _check_keys(tree.get('output'), OUTPUT_KEYS, 'output')
    directory = forced.get('out', output.get('directory', 'rdmixtool-run'))

    return RunConfig(s0=s0, eps0=eps0, data_path=data.get('path'), schema=schema,
                     restrict=restrict, priors=priors, sampler=sampler, threads=threads,
                     mixture=analysis.get('mixture', True), balance=analysis.get('balance', True),
                     balance_every=_integer(analysis.get('balance_every', 1),
                                            'analysis.balance_every'),
                     windows=specs, window_sampler=analysis.get('window_sampler', True), mi=mi,
                     draw_format=draw_format,
                     density_grid=_integer(analysis.get('density_grid', 200),
                                           'analysis.density_grid', 2),
                     synth=synth, output_directory=str(directory))


def load_config(path: Optional[str], overrides: Optional[Mapping] = None,
                environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Reads and validates a YAML configuration file; no file means an empty tree."""
    tree = None
    if path is not None:
        try:
            with open(path) as fh:
                tree = yaml.safe_load(fh)
        except OSError as e:
            raise ConfigError(f'Cannot read configuration {path}: {e}')
        except yaml.YAMLError as e:
            raise ConfigError(f'Configuration {path} is not valid YAML: {e}')
    return config_from_dict(tree, overrides, environ)


def resolve_override(value: Optional[Any], key: str, cast: Callable, default: Any,
                     environ: Optional[Mapping[str, str]] = None) -> Any:
    """
    Resolves one of the overridable settings for subcommands without a configuration file.
    :param value: Command line value, wins when not None.
    :param key: 'seed', 'out' or 'threads'.
    :param cast: Type of the setting.
    :param default: Used when neither the command line nor the environment sets it.
    :param environ: Environment, os.environ by default.
    """
    if value is not None:
        return value
    environ = os.environ if environ is None else environ
    if ENVIRONMENT[key] in environ:
        try:
            return cast(environ[ENVIRONMENT[key]])
        except ValueError:
            raise ConfigError(f'{ENVIRONMENT[key]} must be a {cast.__name__}, got '
                              f'{environ[ENVIRONMENT[key]]!r}.')
    return default
