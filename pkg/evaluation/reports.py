"""
CSV emitters. Every file has a header row and uses '.' decimals.
"""
import csv
import logging
from pathlib import Path

import numpy as np

from lattice_snn.exceptions import ArtifactIOError, InputDataError

logger = logging.getLogger(__name__)


def _write_rows(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")
    return path


CONFUSION_CORNER = 'true\\predicted'


def write_confusion_csv(path, matrix, normalized=False, class_names=None):
    if normalized:
        return write_percentage_table(path, matrix.normalized, class_names)
    names = class_names or [str(c) for c in range(matrix.n_classes)]
    rows = [[names[i]] + [int(v) for v in matrix.cells[i]] for i in range(matrix.n_classes)]
    return _write_rows(path, [CONFUSION_CORNER] + names, rows)


def write_percentage_table(path, values, class_names=None):
    """Square table of per-row percentages, e.g. a mean confusion over seeds."""
    values = np.asarray(values, dtype=np.float64)
    names = class_names or [str(c) for c in range(values.shape[0])]
    rows = [[names[i]] + [f"{v:.4f}" for v in values[i]] for i in range(values.shape[0])]
    return _write_rows(path, [CONFUSION_CORNER] + names, rows)


def read_percentage_table(path):
    """(class names, values) of a table written by write_percentage_table."""
    rows = read_csv(path)
    if not rows or rows[0][0] != CONFUSION_CORNER:
        raise InputDataError(f"{path}: not a confusion CSV")
    names = rows[0][1:]
    try:
        values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    except ValueError as e:
        raise InputDataError(f"{path}: {e}") from e
    if values.shape != (len(names), len(names)):
        raise InputDataError(f"{path}: expected a {len(names)}x{len(names)} table")
    return names, values


def write_curve_csv(path, curve):
    rows = [
        [p.examples_seen, f"{p.accuracy:.6f}", f"{s:.6f}"]
        for p, s in zip(curve.points, curve.smoothed)
    ]
    return _write_rows(path, ['examples_seen', 'raw', 'smoothed'], rows)


def write_results_csv(path, rows):
    """rows: iterables of (seed, scheme, accuracy, std)."""
    formatted = [[seed, scheme, f"{acc:.6f}", f"{std:.6f}"] for seed, scheme, acc, std in rows]
    return _write_rows(path, ['seed', 'scheme', 'accuracy', 'std'], formatted)


def write_training_log(path, log):
    rows = [[e.example, e.spikes, f"{e.level:g}", e.retries, int(e.flagged)] for e in log.entries]
    return _write_rows(path, ['example', 'spikes', 'level', 'retries', 'flagged'], rows)


def write_schedule_events(path, events):
    return _write_rows(path, ['example', 'level'], [[at, f"{level:g}"] for at, level in events])


def write_grid_csv(path, keys, schemes, rows):
    """
    One row per grid cell: the cell values, mean and std per scheme, then
    the successful and failed trial counts.

    rows: (cell values, {scheme: (mean, std)}, trials, failures).
    """
    header = list(keys)
    for scheme in schemes:
        header += [f"{scheme}_mean", f"{scheme}_std"]
    header += ['trials', 'failures']
    formatted = []
    for values, stats, trials, failures in rows:
        row = list(values)
        for scheme in schemes:
            mean, std = stats.get(scheme, (float('nan'), float('nan')))
            row += [f"{mean:.6f}", f"{std:.6f}"]
        formatted.append(row + [trials, failures])
    return _write_rows(path, header, formatted)


def read_csv(path):
    try:
        with open(path, newline='', encoding='utf-8') as f:
            return list(csv.reader(f))
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {path}: {e}") from e
