"""Writers for traces, tables and JSON reports."""
import json
import pathlib
from typing import Iterable, List, Sequence, Union

import numpy as np

from .schema import Report, Violation
from .trace import FlowTrace

NUMBER_FORMAT = '%.17g'


def _target(target_folder: Union[str, pathlib.Path], file_name: str,
            extension: str) -> pathlib.Path:
    folder = pathlib.Path(target_folder)
    folder.mkdir(parents=True, exist_ok=True)
    return pathlib.Path(folder, f'{file_name}.{extension}')


def write_table(header: Sequence[str], rows: Sequence[Sequence], target_folder: str,
                file_name: str, formats: Sequence[str] = None) -> str:
    """Write rows as a comma separated file with a header row.

    Numbers are written with 17 significant digits. Pass ``formats`` to write text
    columns with '%s'.
    """
    file_path = _target(target_folder, file_name, 'csv')
    formats = list(formats) if formats else [NUMBER_FORMAT] * len(header)
    assert len(formats) == len(header), \
        f'Got {len(formats)} formats for {len(header)} columns.'
    data = np.array(rows, dtype=object).reshape(-1, len(header))
    np.savetxt(file_path, data, fmt=formats, delimiter=',', header=','.join(header),
               comments='')
    return file_path.as_posix()


def write_trace(trace: FlowTrace, target_folder: str, file_name: str,
                columns: Sequence[str] = None) -> str:
    """Write a FlowTrace or a subset of its columns to CSV."""
    columns = list(columns or trace.columns)
    data = np.column_stack([trace.column(name) for name in columns]) \
        if len(trace) else np.zeros((0, len(columns)))
    return write_table(columns, data.tolist(), target_folder, file_name)


def write_report(report: Report, target_folder: str, file_name: str) -> str:
    return report.to_json(target_folder, file_name)


def read_reports(files: Iterable[Union[str, pathlib.Path]]) -> List[Report]:
    return [Report.parse_obj(json.loads(pathlib.Path(f).read_text())) for f in files]


def merge_reports(reports: Sequence[Report], command: str, params: dict,
                  keys: Sequence[str]) -> Report:
    """Merge reports into one. Results are keyed by ``keys`` and every violation
    check is prefixed with its key."""
    results, violations = {}, []
    for key, report in zip(keys, reports):
        results[key] = report.results
        for v in report.violations:
            violations.append(Violation(
                check=f'{key}:{v.check}', expected=v.expected, got=v.got,
                tolerance=v.tolerance))
    return Report(command=command, params=params, results=results,
                  violations=violations)
