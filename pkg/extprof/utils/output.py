"""
CSV / JSON emission of run results.

A CSV file starts with one comment line ``# {json}`` carrying the schema
version, the run configuration, the parameter echo and the diagnostics,
followed by a header and the data rows (CSV_DIGITS significant digits, CRLF
line ends). A JSON file holds the whole record. Non-finite numbers are rejected
before anything is written.
"""
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config import get_config
from ..errors import OutputError

logger = logging.getLogger(__name__)

LINE_END = '\r\n'


def float_format() -> str:
    return f'%.{get_config().CSV_DIGITS}g'


def plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to plain JSON-compatible Python values"""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _find_non_finite(value: Any, where: str = 'record') -> Optional[str]:
    if isinstance(value, float) and not math.isfinite(value):
        return where
    if isinstance(value, dict):
        for k, v in value.items():
            hit = _find_non_finite(v, f'{where}.{k}')
            if hit:
                return hit
    if isinstance(value, list):
        for i, v in enumerate(value):
            hit = _find_non_finite(v, f'{where}[{i}]')
            if hit:
                return hit
    return None


@dataclass
class OutputRecord:
    """Everything one CLI command emits"""

    config: Dict[str, Any]
    params: Dict[str, Any]
    columns: List[str] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    values: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    schema_version: str = field(default_factory=lambda: get_config().SCHEMA_VERSION)

    @classmethod
    def from_rows(cls, config, params, rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None,
                  diagnostics=None) -> 'OutputRecord':
        rows = [plain(dict(r)) for r in rows]
        if columns is None:
            columns = []
            for row in rows:
                columns.extend(k for k in row if k not in columns)
        return cls(config=plain(config), params=plain(params), columns=list(columns), rows=rows,
                   diagnostics=plain(diagnostics or {}))

    @classmethod
    def from_values(cls, config, params, values: Dict[str, Any], diagnostics=None) -> 'OutputRecord':
        return cls(config=plain(config), params=plain(params), values=plain(values),
                   diagnostics=plain(diagnostics or {}))

    def header(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'config': self.config,
            'params': self.params,
            'diagnostics': self.diagnostics,
        }

    def to_dict(self) -> Dict[str, Any]:
        out = self.header()
        if self.rows or self.columns:
            out['payload'] = {'columns': self.columns, 'rows': self.rows}
        else:
            out['payload'] = {'values': self.values}
        return plain(out)


def _dumps(obj, **kwargs) -> str:
    where = _find_non_finite(obj)
    if where:
        raise OutputError(f'non-finite number at {where}', 'non_finite')
    return json.dumps(obj, allow_nan=False, sort_keys=True, **kwargs)


def render_csv(record: OutputRecord) -> str:
    """CSV text of ``record``: comment line, header, rows"""
    comment = '# ' + _dumps(plain(record.header()), separators=(',', ':')) + LINE_END
    where = _find_non_finite(plain(record.rows), 'rows')
    if where:
        raise OutputError(f'non-finite number at {where}', 'non_finite')
    frame = pd.DataFrame(record.rows, columns=record.columns)
    body = frame.to_csv(index=False, float_format=float_format(), lineterminator=LINE_END, na_rep='')
    return comment + body


def render_json(record: OutputRecord) -> str:
    return _dumps(record.to_dict(), indent=2) + '\n'


def _write(text: str, path: Union[str, Path]):
    try:
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f'cannot write {path}: {exc}', 'io_error') from exc
    logger.info('wrote %s (%d bytes)', path, len(text.encode('utf-8')))


def emit_csv(record: OutputRecord, path: Union[str, Path]):
    _write(render_csv(record), path)


def emit_json(record: OutputRecord, path: Union[str, Path]):
    _write(render_json(record), path)


def parse_csv(source: Union[str, Path]) -> OutputRecord:
    """Read a file written by ``emit_csv`` back into an OutputRecord"""
    try:
        with open(source, 'r', encoding='utf-8', newline='') as fh:
            text = fh.read()
    except OSError as exc:
        raise OutputError(f'cannot read {source}: {exc}', 'io_error') from exc
    first, _, body = text.partition(LINE_END)
    if not first.startswith('# '):
        raise OutputError(f'{source} lacks the record comment line', 'io_error')
    header = json.loads(first[2:])
    frame = pd.read_csv(io.StringIO(body), float_precision='round_trip', keep_default_na=False, na_values=[''])
    rows = []
    for row in frame.to_dict('records'):
        rows.append({k: (None if isinstance(v, float) and math.isnan(v) else plain(v)) for k, v in row.items()})
    return OutputRecord(
        config=header.get('config', {}),
        params=header.get('params', {}),
        columns=list(frame.columns),
        rows=rows,
        diagnostics=header.get('diagnostics', {}),
        schema_version=header.get('schema_version', get_config().SCHEMA_VERSION),
    )
