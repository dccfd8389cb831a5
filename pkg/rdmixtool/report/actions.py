# coding=utf-8
"""Output of results: printing in the selected output mode, and the files of a run directory."""

import csv
import json
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from .representation import result_to_str, result_rows

__all__ = ['RedirectWriteToPrint', 'print_result', 'to_json', 'write_json', 'write_csv',
           'mark_partial', 'PARTIAL_MARKER', 'OUTPUT_MODES']

OUTPUT_MODES = ('text', 'json', 'csv', 'dict')
PARTIAL_MARKER = 'PARTIAL'


class RedirectWriteToPrint:
    """The csv.DictWriter seems to have some serious quirks when using it to write to stdout.
    E.g. redirection works, piping does not. So here you go. It's just a wrapper around print
    with some minor adjustments to the parameters. """
    @staticmethod
    def write(*args, **kwargs) -> None:
        """Just enough of the file protocol for csv.DictWriter."""
        kwargs['flush'] = True
        kwargs['end'] = ''
        print(*args, **kwargs)


def _plain(value: Any) -> Any:
    """json.dumps fallback for numpy values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def to_json(result: Any, indent: Optional[int] = None) -> str:
    return json.dumps(result, default=_plain, indent=indent, sort_keys=indent is not None)


def _write_rows(rows: List[Dict[str, Any]], fh) -> None:
    if not rows:
        return
    fields: List[str] = []
    for row in rows:
        fields += [key for key in row if key not in fields]
    writer = csv.DictWriter(fh, fields, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def print_result(result: Dict[str, Any], output_mode: str = 'text') -> None:
    """
    Print a result dict.
    :param result: Result with a '_type' key, as returned by the pipeline stages.
    :param output_mode: text, json, csv (the main table of the result), or dict.
    """
    if output_mode == 'text':
        print(result_to_str(result))
    elif output_mode == 'dict':
        print(result)
    elif output_mode == 'json':
        print(to_json(result))
    elif output_mode == 'csv':
        _write_rows(result_rows(result), RedirectWriteToPrint())
    else:
        raise ValueError('Output mode "{}" is not implemented.'.format(output_mode))


def write_json(directory: str, name: str, payload: Any) -> str:
    """Writes payload as sorted, indented JSON, so equal payloads give equal bytes."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, 'w') as fh:
        fh.write(to_json(payload, indent=2))
        fh.write('\n')
    return path


def write_csv(directory: str, name: str, rows: List[Dict[str, Any]]) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, 'w', newline='') as fh:
        _write_rows(rows, fh)
    return path


def mark_partial(directory: Optional[str], error: Dict[str, Any]) -> Optional[str]:
    """
    Leaves a PARTIAL marker holding the error in a run directory that already has output.
    :return: Path of the marker, None if there was nothing to mark.
    """
    if not directory or not os.path.isdir(directory) or not os.listdir(directory):
        return None
    path = os.path.join(directory, PARTIAL_MARKER)
    with open(path, 'w') as fh:
        fh.write(to_json(error, indent=2))
        fh.write('\n')
    print(f'Partial results left in {directory}.', file=sys.stderr)
    return path
