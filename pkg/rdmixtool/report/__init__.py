# coding=utf-8

"""Rendering of results and the files of a run directory."""

from .actions import RedirectWriteToPrint, print_result, to_json, write_json, write_csv, \
    mark_partial, PARTIAL_MARKER, OUTPUT_MODES
from .representation import result_to_str, result_rows, format_table

__all__ = ['RedirectWriteToPrint', 'print_result', 'to_json', 'write_json', 'write_csv',
           'mark_partial', 'PARTIAL_MARKER', 'OUTPUT_MODES', 'result_to_str', 'result_rows',
           'format_table']
