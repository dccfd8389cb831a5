# coding=utf-8

"""The stages of an analysis. Each stage reads its inputs from a file or a run directory, writes
what it produces into a run directory and returns a result dict whose '_type' key tells the
report module how to show it. summarize, balance and the multiple imputation export only read
persisted draws, so sampling never has to be repeated."""

import multiprocessing
import os
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import rdmixtool
from .analysis.balance import posterior_balance, love_plot_data
from .analysis.estimands import posterior_report, summarize_rr, rr_density
from .analysis.window import WindowSpec, window_from_bandwidths, local_polynomial_rd, \
    fixed_window_sampler, window_balance, rubin_combine, export_membership_imputations, \
    mi_relative_risk
from .config import RunConfig
from .data.dataset import ObservedDataset, ingest, summarize, DEFAULT_EPS0
from .errors import DataError, NumericError, debug_log, warn
from .kernels import RngStream
from .mixture.diagnostics import convergence_table
from .mixture.draws import PosteriorDraws, convert, file_digest, dataset_digest, write_manifest, \
    read_manifest
from .mixture.model import Priors, SamplerConfig
from .mixture.sampler import run_chains
from .report.actions import write_json, write_csv
from .synth import CovariateSpec, DEFAULT_S0, generate, scenario_library, write_dataset
from .synth.joint_check import run_joint_check

__all__ = ['load_units', 'ingest_check', 'sample', 'summarize_run', 'balance_run', 'window_run',
           'mi_run', 'combine_run', 'synth_run', 'convert_run', 'joint_check_run',
           'run_pipeline', 'data_from_manifest']

SYNTH_BASENAME = 'synthetic'


def synth_run(scenario: str, n: int, seed: int, directory: str, continuous: int = 2,
              binary: int = 1, s0: float = DEFAULT_S0, eps0: float = DEFAULT_EPS0) -> dict:
    """
    Generates a dataset from a named scenario and writes it with its ground truth.
    :return: Result with the scenario, the number of units, the file paths and the truth.
    """
    library = scenario_library(CovariateSpec(continuous, binary))
    if scenario not in library:
        raise DataError(f'Unknown scenario {scenario}, use one of {", ".join(library)}.',
                        module='synth')
    data, truth = generate(library[scenario].params, library[scenario].covariates, n, s0,
                           RngStream(seed), eps0)
    paths = write_dataset(directory, data, truth, SYNTH_BASENAME)
    debug_log(f'Scenario {scenario}: wrote {data.n} units to {paths["data"]}.')
    return {'_type': 'synth', 'scenario': scenario, 'units': data.n, 'seed': seed,
            'paths': paths, 'truth': truth.as_dict()}


def load_units(config: RunConfig, directory: Optional[str] = None) -> Tuple[RunConfig,
                                                                            ObservedDataset]:
    """
    Ingests the configured data file. A synth block is generated into directory first, and the
    written file is ingested like any other.
    :return: (config, data); for synth runs the returned config names the written file.
    """
    if config.synth is not None:
        directory = directory or config.output_directory
        synth = config.synth
        written = synth_run(synth['scenario'], synth['n'], synth['seed'], directory,
                            synth['continuous'], synth['binary'], config.s0, config.eps0)
        names = list(CovariateSpec(synth['continuous'], synth['binary']).names())
        config = replace(config, data_path=written['paths']['data'],
                         schema={'id': 'id', 's': 's', 'y': 'y', 'x': names})
    if config.data_path is None:
        raise DataError('The configuration names neither a data file nor a synth scenario.',
                        module='cli')
    return config, ingest(config.data_path, config.schema, config.s0, config.eps0,
                          config.restrict)


def ingest_check(config: RunConfig) -> dict:
    """Validates the data and describes it, without sampling."""
    _, data = load_units(config)
    result = {'_type': 'dataset summary'}
    result.update(summarize(data))
    return result


def sample(config: RunConfig, data: ObservedDataset,
           directory: Optional[str] = None) -> Tuple[PosteriorDraws, dict]:
    """
    Runs the chains and persists the draws with the run manifest.
    :return: (draws, result). On a numeric failure the draws completed so far are written before
    the error propagates.
    """
    directory = directory or config.output_directory
    try:
        draws = run_chains(data, config.priors, config.sampler, config.threads)
    except NumericError as e:
        partial = getattr(e, 'partial', None)
        if partial is not None and len(partial):
            partial.save(directory, config.draw_format)
        raise
    path = draws.save(directory, config.draw_format)
    write_manifest(directory, {
        'version': rdmixtool.__version__, 'seed': config.sampler.seed, 'config': config.echo(),
        'priors digest': config.priors.digest(),
        'data digest': file_digest(config.data_path) if config.data_path else None,
        'dataset digest': dataset_digest(data), 'draws': os.path.basename(path),
        'draws digest': file_digest(path)})
    return draws, {'_type': 'sample', 'directory': directory, 'draws': len(draws),
                   'chains': len(draws.chains), 'relative risk': summarize_rr(draws).as_dict(),
                   'convergence': convergence_table(draws), 'diagnostics': draws.diagnostics}


def data_from_manifest(manifest: dict) -> ObservedDataset:
    """Re-ingests the units of a run, and checks they are the ones that were sampled."""
    config = manifest['config']
    data = ingest(config['data']['path'], config['data']['schema'], config['s0'],
                  config['eps0'], config['restrict'])
    if dataset_digest(data) != manifest['dataset digest']:
        raise DataError(f'{config["data"]["path"]} changed since the run was sampled.',
                        module='cli')
    return data


def _load_run(directory: str) -> Tuple[dict, PosteriorDraws, ObservedDataset]:
    manifest = read_manifest(directory)
    return manifest, PosteriorDraws.load(directory), data_from_manifest(manifest)


def _summarize(draws: PosteriorDraws, data: ObservedDataset, directory: str,
               bin_width: Optional[float], grid_size: int) -> dict:
    report = posterior_report(draws, data, bin_width)
    report['convergence'] = convergence_table(draws, quiet=True)
    density = rr_density(draws, grid_size)
    write_json(directory, 'summary.json', report)
    write_csv(directory, 'membership_table.csv', report['membership table'])
    write_csv(directory, 'rr_density.csv',
              [dict(point, median=density['median']) for point in density['points']])
    result = {'_type': 'posterior summary'}
    result.update(report)
    return result


def summarize_run(directory: str, out: Optional[str] = None, bin_width: Optional[float] = None,
                  grid_size: int = 200) -> dict:
    """Posterior summaries of a sampled run, written to out (the run directory by default)."""
    _, draws, data = _load_run(directory)
    return _summarize(draws, data, out or directory, bin_width, grid_size)


def _balance(draws: PosteriorDraws, data: ObservedDataset, directory: str, every: int) -> dict:
    report = posterior_balance(draws, data, every)
    write_json(directory, 'balance.json', report.as_dict())
    write_csv(directory, 'love_plot.csv', love_plot_data(report))
    result = {'_type': 'balance'}
    result.update(report.as_dict())
    return result


def balance_run(directory: str, out: Optional[str] = None, every: int = 1) -> dict:
    """Posterior covariate balance within U0 of a sampled run."""
    _, draws, data = _load_run(directory)
    return _balance(draws, data, out or directory, every)


def _mi(draws: PosteriorDraws, data: ObservedDataset, directory: str, m: int,
        stride: int) -> dict:
    export_membership_imputations(draws, m, stride, os.path.join(directory, 'memberships'))
    result = {'_type': 'mi relative risk'}
    result.update(mi_relative_risk(draws, data, m, stride))
    write_json(directory, 'mi.json', result)
    return result


def mi_run(directory: str, m: int, stride: int, out: Optional[str] = None) -> dict:
    """Exports m completed membership datasets of a run and combines the U0 relative risk."""
    _, draws, data = _load_run(directory)
    return _mi(draws, data, out or directory, m, stride)


def combine_run(estimates: Sequence[float], variances: Sequence[float]) -> dict:
    result = {'_type': 'mi combined'}
    result.update(rubin_combine(estimates, variances).as_dict())
    return result


def _window_worker(arguments: tuple) -> Tuple[dict, Optional[dict]]:
    data, spec, priors, sampler, with_sampler, with_balance = arguments
    row = window_from_bandwidths(spec, data.s0, data)
    row.update(local_polynomial_rd(data, spec))
    if with_sampler:
        posterior = summarize_rr(fixed_window_sampler(data, spec, priors, sampler))
        row.update({'posterior rr median': posterior.median,
                    'posterior rr 2.5%': posterior.pct_2_5,
                    'posterior rr 97.5%': posterior.pct_97_5,
                    'Pr(RR < 1)': posterior.prob_below_1})
    balance = None
    if with_balance:
        try:
            balance = dict(window=spec.name, **window_balance(data, spec).as_dict())
        except DataError as e:
            warn(f'No balance for window {spec.name}: {e}')
    return row, balance


def window_run(data: ObservedDataset, windows: Sequence[WindowSpec], directory: str,
               priors: Optional[Priors] = None, sampler: Optional[SamplerConfig] = None,
               with_sampler: bool = True, with_balance: bool = True, threads: int = 1) -> dict:
    """
    Every fixed window analysis, one result row per window, in the given order.
    :param data: All units.
    :param windows: Window specs.
    :param directory: Receives windows.json and windows.csv.
    :param priors: Priors of the fixed window sampler.
    :param sampler: Iterations and seed of the fixed window sampler.
    :param with_sampler: Also run the Bayesian analysis of each window.
    :param with_balance: Also report covariate balance within each window.
    :param threads: Windows run in parallel when above 1.
    """
    if not windows:
        raise DataError('No windows to analyse.', module='fixed_window')
    jobs = [(data, spec, priors or Priors(), sampler or SamplerConfig(), with_sampler,
             with_balance) for spec in windows]
    if threads > 1 and len(jobs) > 1:
        with multiprocessing.Pool(processes=min(threads, len(jobs))) as pool:
            outcomes = pool.map(_window_worker, jobs)
    else:
        outcomes = [_window_worker(job) for job in jobs]
    result = {'_type': 'windows', 'rows': [row for row, _ in outcomes],
              'balance': [balance for _, balance in outcomes if balance is not None]}
    write_json(directory, 'windows.json', result)
    write_csv(directory, 'windows.csv', result['rows'])
    return result


def convert_run(path_in: str, path_out: str) -> dict:
    return {'_type': 'convert', 'input': path_in, 'output': path_out,
            'rows': convert(path_in, path_out)}


def joint_check_run(draws: int = 5000, n: int = 30, p: int = 1, seed: int = 0) -> dict:
    """Forward simulation against successive conditional simulation through the full sweep."""
    result = {'_type': 'joint check'}
    result.update(run_joint_check(draws, n, p, seed=seed))
    return result


def run_pipeline(config: RunConfig) -> dict:
    """
    Everything the configuration asks for, into config.output_directory: data summary, mixture
    draws with their manifest and summaries, posterior balance, completed membership datasets
    and the fixed window analyses.
    """
    directory = config.output_directory
    os.makedirs(directory, exist_ok=True)
    config, data = load_units(config, directory)
    write_json(directory, 'data_summary.json', summarize(data))
    result = {'_type': 'run', 'directory': directory, 'relative risk': None}

    if config.mixture:
        draws, sampled = sample(config, data, directory)
        result['relative risk'] = sampled['relative risk']
        _summarize(draws, data, directory, None, config.density_grid)
        if config.balance:
            _balance(draws, data, directory, config.balance_every)
        if config.mi is not None:
            _mi(draws, data, directory, config.mi['m'], config.mi['stride'])
    if config.windows:
        window_run(data, config.windows, directory, config.priors, config.sampler,
                   config.window_sampler, config.balance, config.threads)

    result['files'] = sorted(os.listdir(directory))
    return result
