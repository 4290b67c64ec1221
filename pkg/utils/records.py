"""
Trial records and their CSV / JSON files
"""

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from utils.errors import OutputError

FIXED_LEADING = ['trial', 'seed']
FIXED_TRAILING = ['mode', 'status', 'max_abs_err', 'candidates', 'ms']


@dataclass
class TrialRecord:
    trial: int
    seed: int
    allocation: Tuple[int, ...]
    mode: str
    status: str
    max_abs_err: float
    candidates: int
    ms: float

    def as_row(self) -> Dict:
        row = {'trial': self.trial, 'seed': self.seed}
        row.update({f"M_{j}": m for j, m in enumerate(self.allocation, 1)})
        row.update({'mode': self.mode, 'status': self.status, 'max_abs_err': self.max_abs_err,
                    'candidates': self.candidates, 'ms': self.ms})
        return row

    def to_json_dict(self) -> Dict:
        return {
            'trial': self.trial,
            'seed': self.seed,
            'allocation': list(self.allocation),
            'mode': self.mode,
            'status': self.status,
            'max_abs_err': None if math.isnan(self.max_abs_err) else self.max_abs_err,
            'candidates': self.candidates,
            'ms': self.ms,
        }


def record_columns(J: int) -> List[str]:
    return FIXED_LEADING + [f"M_{j}" for j in range(1, J + 1)] + FIXED_TRAILING


def records_to_frame(records: Sequence[TrialRecord], J: int) -> pd.DataFrame:
    frame = pd.DataFrame([r.as_row() for r in records], columns=record_columns(J))
    if records:
        frame = frame.astype({'trial': 'int64', 'candidates': 'int64',
                              'max_abs_err': 'float64', 'ms': 'float64'})
    return frame


def emit(records: Sequence[TrialRecord], path: str, fmt: str, J: int):
    """Write records in trial order; CSV header is stable even with no records"""
    try:
        if fmt == 'csv':
            records_to_frame(records, J).to_csv(path, index=False, lineterminator='\n')
        elif fmt == 'json':
            with open(path, 'w', encoding='utf-8') as f:
                json.dump([r.to_json_dict() for r in records], f, indent=2)
                f.write('\n')
        else:
            raise OutputError(f"unsupported output format {fmt!r} (use csv or json)")
    except OSError as e:
        raise OutputError(f"Cannot write results to {path}: {e}") from e


def load_records(path: str) -> List[TrialRecord]:
    """Parse a CSV written by emit back into records"""
    try:
        frame = pd.read_csv(path, float_precision='round_trip',
                            dtype={'mode': str, 'status': str})
    except (OSError, pd.errors.ParserError) as e:
        raise OutputError(f"Cannot read results from {path}: {e}") from e

    m_columns = [c for c in frame.columns if c.startswith('M_')]
    records = []
    for row in frame.itertuples(index=False):
        values = row._asdict()
        records.append(TrialRecord(
            trial=int(values['trial']),
            seed=int(values['seed']),
            allocation=tuple(int(values[c]) for c in m_columns),
            mode=values['mode'],
            status=values['status'],
            max_abs_err=float(values['max_abs_err']),
            candidates=int(values['candidates']),
            ms=float(values['ms']),
        ))
    return records


def summarize(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """Per-allocation trials, successes and success rate (status == unique)"""
    columns = ['allocation', 'trials', 'successes', 'success_rate', 'mean_candidates', 'worst_err']
    if not records:
        return pd.DataFrame(columns=columns)

    frame = pd.DataFrame({
        'allocation': [str(list(r.allocation)) for r in records],
        'success': [r.status == 'unique' for r in records],
        'candidates': [r.candidates for r in records],
        'err': [r.max_abs_err for r in records],
    })
    grouped = frame.groupby('allocation', sort=False)
    summary = pd.DataFrame({
        'trials': grouped['success'].size(),
        'successes': grouped['success'].sum().astype(int),
        'success_rate': grouped['success'].mean(),
        'mean_candidates': grouped['candidates'].mean(),
        'worst_err': grouped['err'].max(),
    }).reset_index()
    return summary[columns]
