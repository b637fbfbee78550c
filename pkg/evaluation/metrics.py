import logging
from dataclasses import dataclass

import numpy as np

from lattice_snn.exceptions import InputDataError

logger = logging.getLogger(__name__)


def accuracy(predictions, truths):
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise InputDataError(f"{predictions.size} predictions but {truths.size} truths")
    if predictions.size == 0:
        raise InputDataError('accuracy needs at least one prediction')
    return float(np.mean(predictions == truths))


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    n_classes: int
    cells: np.ndarray

    @property
    def total(self):
        return int(self.cells.sum())

    @property
    def normalized(self):
        """Per-row percentages; rows with no examples stay zero."""
        rows = self.cells.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(100.0 * self.cells, rows, out=np.zeros(self.cells.shape), where=rows > 0)

    @property
    def accuracy(self):
        return float(np.trace(self.cells)) / self.total if self.total else 0.0


def confusion(predictions, truths, n_classes):
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise InputDataError(f"{predictions.size} predictions but {truths.size} truths")
    for name, values in (('prediction', predictions), ('truth', truths)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise InputDataError(f"{name} label outside [0, {n_classes})")
    cells = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cells, (truths, predictions), 1)
    return ConfusionMatrix(n_classes, cells)


def standard_error(acc, n):
    """Binomial standard error of an accuracy measured on n examples."""
    if n <= 0:
        raise InputDataError('standard_error needs at least one example')
    return float(np.sqrt(acc * (1.0 - acc) / n))


def mean_percentages(tables):
    """Element-wise mean of per-row percentage confusion tables (one per trial)."""
    tables = [np.asarray(t, dtype=np.float64) for t in tables]
    if not tables:
        raise InputDataError('mean_percentages needs at least one table')
    shapes = {t.shape for t in tables}
    if len(shapes) != 1:
        raise InputDataError(f"Confusion tables disagree in shape: {sorted(shapes)}")
    return np.mean(tables, axis=0)
