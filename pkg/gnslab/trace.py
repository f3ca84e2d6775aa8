"""Time series recorded along flow runs."""

from typing import Dict, List, Sequence, Union

import numpy as np

from .errors import DomainError


class FlowTrace:
    """Rows of named columns recorded at output times of a flow.

    The first column is always the time ``t`` and must be strictly increasing.

    Args:
        columns: Column names. The first one must be ``t``.
    """

    def __init__(self, columns: Sequence[str]) -> None:
        columns = tuple(columns)
        assert columns and columns[0] == 't', \
            f'The first column of a FlowTrace must be "t". Got {columns}.'
        self._columns = columns
        self._rows: List[List[float]] = []
        self.monotone_violations = 0
        self.max_increase = 0.0
        self.metadata: Dict[str, Union[float, int, str]] = {}

    @property
    def columns(self) -> tuple:
        return self._columns

    def append(self, row: Dict[str, float]) -> None:
        """Add a row. Missing columns are recorded as NaN."""
        unknown = set(row) - set(self._columns)
        if unknown:
            raise DomainError(f'Unknown trace columns: {sorted(unknown)}.')
        if self._rows and not row['t'] > self._rows[-1][0]:
            raise DomainError(
                f'Trace times must increase. Got {row["t"]} after {self._rows[-1][0]}.')
        self._rows.append([float(row.get(name, np.nan)) for name in self._columns])

    def as_array(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, len(self._columns)))
        return np.array(self._rows, dtype=float)

    def column(self, name: str) -> np.ndarray:
        try:
            index = self._columns.index(name)
        except ValueError:
            raise DomainError(
                f'{name} is not a column of this trace. Available columns are: '
                f'{list(self._columns)}') from None
        return self.as_array()[:, index]

    def set_column(self, name: str, values: np.ndarray) -> None:
        index = self._columns.index(name)
        assert len(values) == len(self._rows), \
            f'Got {len(values)} values for a trace with {len(self._rows)} rows.'
        for row, value in zip(self._rows, values):
            row[index] = float(value)

    def fill_time_derivative(self, source: str, target: str, sign: float = -1.0) -> None:
        """Set ``target`` to sign * d(source)/dt by centered differences in t."""
        if len(self._rows) < 3:
            return
        t = self.column('t')
        self.set_column(target, sign * np.gradient(self.column(source), t, edge_order=2))

    def __len__(self) -> int:
        return len(self._rows)

    def __repr__(self) -> str:
        return f'FlowTrace: {len(self._rows)} rows | columns: {", ".join(self._columns)}'
