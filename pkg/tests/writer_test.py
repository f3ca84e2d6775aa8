"""testing functions in writer module."""
import pathlib

import numpy as np

from gnslab.schema import Report, Violation
from gnslab.trace import FlowTrace
from gnslab.writer import merge_reports, read_reports, write_report, write_table, \
    write_trace


def test_write_table(temp_folder):
    """Test numeric and text columns."""
    path = write_table(('lambda', 'classification'), [(0.5, 'constant'), (1.0, 'nonconstant')],
                       temp_folder / 'writer', 'table', ('%.17g', '%s'))
    lines = pathlib.Path(path).read_text().splitlines()
    assert lines == ['lambda,classification', '0.5,constant', '1,nonconstant']


def test_write_trace(temp_folder):
    """Test writing a subset of trace columns."""
    trace = FlowTrace(('t', 'value', 'rate'))
    for t in (0.0, 0.25, 0.5):
        trace.append({'t': t, 'value': 1 / 3 + t})
    path = write_trace(trace, temp_folder / 'writer', 'trace', ('t', 'value'))
    data = np.loadtxt(path, delimiter=',', skiprows=1)
    assert data.shape == (3, 2)
    assert np.array_equal(data[:, 1], trace.column('value'))
    empty = write_trace(FlowTrace(('t', 'value')), temp_folder / 'writer', 'empty')
    assert pathlib.Path(empty).read_text().strip() == 't,value'


def test_merge_reports(temp_folder):
    """Test merged results are keyed and violations prefixed."""
    first = Report(command='flow', params={'p': 3.0}, results={'steps': 10})
    second = Report(command='flow', params={'p': 4.0}, results={'steps': 12},
                    violations=[Violation(check='norm', expected=0, got=1, tolerance=0)])
    merged = merge_reports([first, second], 'flow', {'p': [3.0, 4.0]}, ['p3', 'p4'])
    assert merged.results == {'p3': {'steps': 10}, 'p4': {'steps': 12}}
    assert [v.check for v in merged.violations] == ['p4:norm']
    path = write_report(merged, temp_folder / 'writer', 'flow')
    assert read_reports([path]) == [merged]
