# coding=utf-8

"""These functions turn the result dicts of the pipeline stages into something a human can read,
and pick the main table of a result for csv output."""
from collections import defaultdict
from typing import Any, Dict, List, Optional

import pandas as pd

__all__ = ['result_to_str', 'result_rows', 'format_table']


def _number(value: Any) -> str:
    if value is None:
        return 'n/a'
    if isinstance(value, float):
        return f'{value:.4g}'
    return str(value)


def format_table(rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    """Fixed width table of a list of row dicts."""
    if not rows:
        return '(empty)'
    frame = pd.DataFrame(rows)
    if columns is not None:
        frame = frame[[c for c in columns if c in frame.columns]]
    return frame.to_string(index=False, na_rep='n/a', float_format=lambda v: f'{v:.4g}')


def _interval(summary: Dict[str, Any]) -> str:
    return ('median {} [{}, {}], Pr(RR < 1) = {}, {} draws, {} degenerate'
            .format(_number(summary['median']), _number(summary['pct_2_5']),
                    _number(summary['pct_97_5']), _number(summary['prob_below_1']),
                    summary['draws'], summary['degenerate']))


def _balance_to_str(report: Dict[str, Any]) -> str:
    text = format_table(report['rows'])
    text += '\nMahalanobis distance: {}'.format(_number(report['multivariate']))
    text += '\nArm sizes: {} ineligible, {} eligible'.format(_number(report['n0']),
                                                             _number(report['n1']))
    if report.get('dropped'):
        text += '\nConstant covariates left out: ' + ', '.join(report['dropped'])
    if report.get('skipped'):
        text += '\nSkipped {} of {} membership samples with a degenerate arm.'.format(
            report['skipped'], report['skipped'] + report['draws'])
    return text


def _report_to_str(report: Dict[str, Any]) -> str:
    sections = ['Relative risk: ' + _interval(report['relative risk']),
                'Mixing proportions:\n' + format_table(report['mixing']),
                'Subpopulation sizes:\n' + format_table(report['membership counts'])]
    if 'membership table' in report:
        sections.append('Pr(U0) by forcing bin:\n' + format_table(report['membership table']))
    if 'subpopulations' in report:
        sections.append('Covariates by subpopulation:\n' + format_table(report['subpopulations']))
    if 'forcing' in report:
        sections.append('Forcing variable by subpopulation:\n' + format_table(report['forcing']))
    if report.get('convergence'):
        sections.append('Convergence:\n' + format_table(report['convergence']))
    return '\n\n'.join(sections)


def result_to_str(response: Dict[str, Any]) -> Optional[str]:
    """
    Convert a result to a human readable string.
    :param response: A result dict as returned by the pipeline stages.
    :return: A human readable string, None for unknown result types.
    """
    result: Optional[str]
    packet = defaultdict(lambda: 'n/a', **response)

    if packet['_type'] == 'dataset summary':
        result = ('Threshold {s0}, eps0 {eps0}: {units} units, {rejected rows} rows rejected, '
                  '{filtered rows} rows filtered.\n').format(**packet)
        result += format_table(packet['groups'])
    elif packet['_type'] == 'sample':
        result = ('Sampled {chains} chain(s), {draws} retained draws, into {directory}.\n'
                  .format(**packet))
        result += 'Relative risk: ' + _interval(packet['relative risk'])
        if packet['convergence'] != 'n/a':
            result += '\n' + format_table(packet['convergence'])
    elif packet['_type'] == 'posterior summary':
        result = _report_to_str(packet)
    elif packet['_type'] == 'balance':
        result = 'Covariate balance within U0 (posterior medians over {draws} samples):\n'.format(
            **packet) + _balance_to_str(packet)
    elif packet['_type'] == 'windows':
        result = format_table(packet['rows'])
        for report in packet['balance']:
            result += f'\n\nBalance in window {report["window"]}:\n' + _balance_to_str(report)
    elif packet['_type'] == 'mi combined':
        result = ('Combined over {m} imputations: {point:.6g}, variance {total_variance:.6g} '
                  '(within {within:.6g}, between {between:.6g}), df {df:.4g}, '
                  '95% interval [{low:.6g}, {high:.6g}]').format(
            low=packet['2.5%'], high=packet['97.5%'], **packet)
    elif packet['_type'] == 'mi relative risk':
        result = ('Relative risk within U0 over {m} completed membership datasets: {rr:.4g} '
                  '[{low:.4g}, {high:.4g}]').format(
            m=packet['log rr']['m'], rr=packet['rr'], low=packet['rr 2.5%'],
            high=packet['rr 97.5%'])
    elif packet['_type'] == 'synth':
        truth = packet['truth']
        result = ('Scenario {scenario}: {units} units written to {data}.\n'
                  .format(data=packet['paths']['data'], **packet))
        result += ('True RR {}, mixing U- {}, U0 {}, U+ {}, {} units redrawn.'
                   .format(_number(truth['rr']), _number(truth['pi_minus']),
                           _number(truth['pi_zero']), _number(truth['pi_plus']),
                           truth['rejected']))
    elif packet['_type'] == 'convert':
        result = 'Converted {rows} draws from {input} to {output}.'.format(**packet)
    elif packet['_type'] == 'joint check':
        result = format_table(packet['rows'])
        result += '\nJoint distribution check ' + ('passed.' if packet['passed'] else 'FAILED.')
    elif packet['_type'] == 'run':
        result = 'Run written to {directory}:\n  '.format(**packet)
        result += '\n  '.join(packet['files'])
        if packet['relative risk'] not in ('n/a', None):
            result += '\nRelative risk: ' + _interval(packet['relative risk'])
    else:
        result = None
    return result


def result_rows(result: Dict[str, Any]) -> List[Dict[str, Any]]:
    """The main table of a result, for csv output."""
    kind = result['_type']
    if kind == 'dataset summary':
        return result['groups']
    elif kind in ('sample', 'run'):
        return [result['relative risk']] if result.get('relative risk') else []
    elif kind == 'posterior summary':
        return result.get('membership table') or [result['relative risk']]
    elif kind in ('balance', 'windows', 'joint check'):
        return result['rows']
    elif kind == 'synth':
        return [{key: value for key, value in result['truth'].items() if key != 'parameters'}]
    elif kind == 'mi relative risk':
        row = {key: value for key, value in result.items() if key not in ('_type', 'log rr')}
        row.update({f'log rr {key}': value for key, value in result['log rr'].items()})
        return [row]
    return [{key: value for key, value in result.items() if key != '_type'}]
