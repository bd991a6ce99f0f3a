"""
Report files for one or more runs.

Writes ``metrics.csv`` (one row per run, columns in ``METRIC_COLUMNS`` order),
``traces.csv`` (reputation traces) and ``summary.txt`` (median and IQR per
grid point and variant, plus full-vs-baseline comparisons where both ran).
CSV files are UTF-8 with LF line endings; floats carry 9 significant digits.
"""
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from apps.experiments.services.metrics import METRIC_COLUMNS, TRACE_COLUMNS
from apps.experiments.services.variants import SchemeVariant
from apps.oracle.exceptions import ContractViolation

logger = logging.getLogger(__name__)

GROUP_COLUMNS = ['label', 'node_count', 'malicious_fraction', 'committee_size', 'window_width',
                 'alpha', 'min_count', 'task_count']
SUMMARY_METRICS = ['accuracy', 'mean_variance', 'mean_response_time']


def _format_cell(value):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return format(value, '.9g')
    return value


def _frame(rows: Iterable[dict], columns: Sequence[str]) -> pd.DataFrame:
    formatted = [{c: _format_cell(row.get(c)) for c in columns} for row in rows]
    return pd.DataFrame(formatted, columns=list(columns))


def write_csv(rows: Iterable[dict], columns: Sequence[str], path: Path) -> Path:
    _frame(rows, columns).to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    return path


def _iqr(series: pd.Series) -> float:
    return float(series.quantile(0.75) - series.quantile(0.25))


def summarize(rows: Sequence[dict]) -> str:
    table = pd.DataFrame(list(rows), columns=METRIC_COLUMNS)
    ok = table[table['error'].fillna('') == ''].copy()
    lines = ['oraclenet summary', '']
    if ok.empty:
        lines.append('no successful runs')
        return '\n'.join(lines) + '\n'
    for column in SUMMARY_METRICS:
        ok[column] = pd.to_numeric(ok[column], errors='coerce')

    keys = [c for c in GROUP_COLUMNS if ok[c].notna().any()]
    for point, group in ok.groupby(keys, sort=True, dropna=False):
        point = point if isinstance(point, tuple) else (point,)
        header = ', '.join(f"{k}={v}" for k, v in zip(keys, point))
        lines.append(f"[{header}]")
        for variant, runs in group.groupby('variant', sort=True):
            stats = ', '.join(
                f"{m} median={runs[m].median():.6g} iqr={_iqr(runs[m]):.6g}" for m in SUMMARY_METRICS
            )
            lines.append(f"  {variant} (n={len(runs)}): {stats}")
        lines.extend(_comparison(group))
        lines.append('')
    return '\n'.join(lines).rstrip('\n') + '\n'


def _comparison(group: pd.DataFrame) -> List[str]:
    full = group[group['variant'] == SchemeVariant.FULL.value].set_index('seed')
    base = group[group['variant'] == SchemeVariant.BASELINE.value].set_index('seed')
    seeds = full.index.intersection(base.index)
    if len(seeds) == 0:
        return []
    accuracy_gain = full.loc[seeds, 'accuracy'] - base.loc[seeds, 'accuracy']
    reduction = (base.loc[seeds, 'mean_variance'] - full.loc[seeds, 'mean_variance']) / base.loc[seeds, 'mean_variance']
    reduction = reduction.replace([math.inf, -math.inf], float('nan'))
    return [
        f"  full vs baseline over {len(seeds)} seeds: "
        f"accuracy gain median={accuracy_gain.median():.6g} (full ahead on {int((accuracy_gain > 0).sum())}), "
        f"variance reduction median={reduction.median():.6g} (positive on {int((reduction > 0).sum())})",
    ]


def emit_report(rows: Sequence[dict], out_dir, trace_rows: Iterable[dict] = (),
                notes: Sequence[str] = ()) -> Dict[str, Path]:
    """Write the report bundle; raises ContractViolation when there is nothing to report."""
    rows = list(rows)
    if not rows:
        raise ContractViolation("no metrics to report")
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)

    paths = {
        'metrics': write_csv(rows, METRIC_COLUMNS, target / 'metrics.csv'),
        'traces': write_csv(trace_rows, TRACE_COLUMNS, target / 'traces.csv'),
    }
    summary = summarize(rows)
    if notes:
        summary += '\n' + '\n'.join(notes) + '\n'
    paths['summary'] = target / 'summary.txt'
    paths['summary'].write_text(summary, encoding='utf-8')
    logger.info(f"Wrote report for {len(rows)} runs to {target}")
    return paths
