#!/usr/bin/env python3
# coding=utf-8

"""Run the mixture analysis of a regression discontinuity design, or one of its stages."""
import sys
from argparse import ArgumentParser
from typing import List, Optional

import rdmixtool
from rdmixtool.config import load_config, resolve_override
from rdmixtool.errors import RdMixError
from rdmixtool.pipeline import ingest_check, load_units, sample, summarize_run, balance_run, \
    window_run, mi_run, combine_run, synth_run, convert_run, joint_check_run, run_pipeline
from rdmixtool.report.actions import print_result, mark_partial, to_json, OUTPUT_MODES
from rdmixtool.synth import SCENARIOS, DEFAULT_S0

# Subcommands that read the YAML configuration.
CONFIG_MODES = ('ingest-check', 'sample', 'window', 'run')


def get_argument_parser() -> ArgumentParser:
    """Constructs an appropriate ArgumentParser."""
    parser = ArgumentParser(description='Bayesian analysis of regression discontinuity designs '
                                        'with a three component mixture: U0, where the local '
                                        'randomization assumptions hold, and U- / U+ around it.')
    parser.set_defaults(mode='')
    parser.add_argument('--config', '-c', default=None, type=str,
                        help='The YAML run configuration.')
    parser.add_argument('--seed', default=None, type=int,
                        help='Overrides sampler.seed and RDMIXTOOL_SEED.')
    parser.add_argument('--threads', default=None, type=int,
                        help='Worker processes for chains and windows. Overrides '
                             'RDMIXTOOL_THREADS. Results do not depend on it.')
    parser.add_argument('--out', default=None, type=str,
                        help='Output directory. Overrides output.directory and RDMIXTOOL_OUT.')
    parser.add_argument('--output', '-o', default='text', type=str, choices=OUTPUT_MODES,
                        help='How the output should be formatted.')
    parser.add_argument('--debug', '-d', default=False, action='store_const', const=True,
                        help='Enables diagnostic output on stderr.')

    subparsers = parser.add_subparsers()
    ingest_parser = subparsers.add_parser('ingest-check',
                                          help='Validate the configured data and describe it.')
    ingest_parser.set_defaults(mode='ingest-check')

    sample_parser = subparsers.add_parser('sample', help='Run the mixture sampler and persist '
                                                         'the draws.')
    sample_parser.set_defaults(mode='sample')

    summarize_parser = subparsers.add_parser('summarize',
                                             help='Posterior summaries of a sampled run.')
    summarize_parser.add_argument('run', type=str, help='Run directory.')
    summarize_parser.add_argument('--bin-width', type=float, default=None,
                                  help='Width of the forcing variable bins of the membership '
                                       'table. Defaults to the width used while sampling.')
    summarize_parser.add_argument('--grid', type=int, default=200,
                                  help='Grid points of the RR density. Defaults to 200.')
    summarize_parser.set_defaults(mode='summarize')

    balance_parser = subparsers.add_parser('balance',
                                           help='Posterior covariate balance within U0 of a '
                                                'sampled run.')
    balance_parser.add_argument('run', type=str, help='Run directory.')
    balance_parser.add_argument('--every', type=int, default=1,
                                help='Use every n-th stored membership sample. Defaults to 1.')
    balance_parser.set_defaults(mode='balance')

    window_parser = subparsers.add_parser('window',
                                          help='Fixed window analyses of the configured '
                                               'windows, one row per window.')
    window_parser.set_defaults(mode='window')

    mi_parser = subparsers.add_parser('mi', help='Export completed membership datasets of a run '
                                                 'and combine the U0 relative risk over them.')
    mi_parser.add_argument('run', type=str, help='Run directory.')
    mi_parser.add_argument('-m', type=int, default=5, help='Number of datasets. Defaults to 5.')
    mi_parser.add_argument('--stride', type=int, default=1,
                           help='Distance between the stored membership samples used. '
                                'Defaults to 1.')
    mi_parser.set_defaults(mode='mi')

    synth_parser = subparsers.add_parser('synth', help='Generate a dataset from a scenario.')
    synth_parser.add_argument('--scenario', type=str, default='separated', choices=SCENARIOS,
                              help='Defaults to separated.')
    synth_parser.add_argument('-n', type=int, default=2000,
                              help='Number of units. Defaults to 2000.')
    synth_parser.add_argument('--continuous', type=int, default=2,
                              help='Continuous covariates. Defaults to 2.')
    synth_parser.add_argument('--binary', type=int, default=1,
                              help='Binary covariates. Defaults to 1.')
    synth_parser.add_argument('--s0', type=float, default=DEFAULT_S0,
                              help='Threshold.')
    synth_parser.set_defaults(mode='synth')

    combine_parser = subparsers.add_parser('combine',
                                           help='Combine completed data estimates and their '
                                                'variances.')
    combine_parser.add_argument('--estimates', '-e', type=float, nargs='+', required=True)
    combine_parser.add_argument('--variances', '-v', type=float, nargs='+', required=True)
    combine_parser.set_defaults(mode='combine')

    convert_parser = subparsers.add_parser('convert',
                                           help='Convert a draw file between .csv and .npz.')
    convert_parser.add_argument('input', type=str)
    convert_parser.add_argument('output_file', metavar='output', type=str)
    convert_parser.set_defaults(mode='convert')

    run_parser = subparsers.add_parser('run', help='Everything the configuration asks for.')
    run_parser.set_defaults(mode='run')

    joint_parser = subparsers.add_parser('joint-check',
                                         help='Compare the Gibbs sweep with forward simulation '
                                              'on prior moments. Slow.')
    joint_parser.add_argument('--draws', type=int, default=5000,
                              help='Draws of each sampler. Defaults to 5000.')
    joint_parser.add_argument('--units', type=int, default=30,
                              help='Units per simulated dataset. Defaults to 30.')
    joint_parser.set_defaults(mode='joint-check')
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    """Entry point."""
    parser = get_argument_parser()
    a = parser.parse_args(argv)
    rdmixtool.set_debug(a.debug)

    if a.mode == '':
        parser.print_usage()
        sys.exit(1)

    directory: Optional[str] = None
    try:
        if a.mode in CONFIG_MODES:
            config = load_config(a.config, {'seed': a.seed, 'out': a.out, 'threads': a.threads})
            directory = config.output_directory
            if a.mode == 'ingest-check':
                result = ingest_check(config)
            elif a.mode == 'sample':
                config, data = load_units(config)
                _, result = sample(config, data)
            elif a.mode == 'window':
                config, data = load_units(config)
                result = window_run(data, config.windows, directory, config.priors,
                                    config.sampler, config.window_sampler, config.balance,
                                    config.threads)
            else:
                result = run_pipeline(config)
        elif a.mode == 'summarize':
            directory = resolve_override(a.out, 'out', str, None)
            result = summarize_run(a.run, directory, a.bin_width, a.grid)
        elif a.mode == 'balance':
            directory = resolve_override(a.out, 'out', str, None)
            result = balance_run(a.run, directory, a.every)
        elif a.mode == 'mi':
            directory = resolve_override(a.out, 'out', str, None)
            result = mi_run(a.run, a.m, a.stride, directory)
        elif a.mode == 'synth':
            directory = resolve_override(a.out, 'out', str, 'rdmixtool-synth')
            result = synth_run(a.scenario, a.n, resolve_override(a.seed, 'seed', int, 0),
                               directory, a.continuous, a.binary, a.s0)
        elif a.mode == 'combine':
            result = combine_run(a.estimates, a.variances)
        elif a.mode == 'convert':
            result = convert_run(a.input, a.output_file)
        else:
            result = joint_check_run(a.draws, a.units,
                                     seed=resolve_override(a.seed, 'seed', int, 0))
    except RdMixError as e:
        print(to_json(e.as_dict()), file=sys.stderr)
        mark_partial(directory, e.as_dict())
        sys.exit(e.exit_code)

    print_result(result, a.output)
    if result.get('_type') == 'joint check' and not result['passed']:
        sys.exit(1)