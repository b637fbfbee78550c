"""
Order-n spike-sequence vote tables.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lattice_snn.exceptions import ContractError

from .schemes import Prediction, classify_all

logger = logging.getLogger(__name__)


def windows(sequence, n):
    sequence = np.asarray(sequence, dtype=np.int64)
    if sequence.size < n:
        return []
    return [tuple(w) for w in sliding_window_view(sequence, n).tolist()]


@dataclass
class NgramTable:
    n_classes: int
    n: int = 2
    counts: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"n-gram order must be >= 1, got {self.n}")

    def update(self, sequence, label):
        for window in windows(sequence, self.n):
            votes = self.counts.get(window)
            if votes is None:
                votes = self.counts[window] = np.zeros(self.n_classes, dtype=np.int64)
            votes[label] += 1

    def merge(self, other):
        """Add another table's counts into this one."""
        if other.n != self.n or other.n_classes != self.n_classes:
            raise ContractError('Cannot merge n-gram tables of different shape')
        for window, votes in other.counts.items():
            if window in self.counts:
                self.counts[window] = self.counts[window] + votes
            else:
                self.counts[window] = votes.copy()
        return self

    @property
    def total_votes(self):
        return int(sum(int(v.sum()) for v in self.counts.values()))

    def votes(self, sequence):
        totals = np.zeros(self.n_classes, dtype=np.int64)
        for window in windows(sequence, self.n):
            hit = self.counts.get(window)
            if hit is not None:
                totals += hit
        return totals


def fit_ngrams(records, labels, n_classes, n=2):
    table = NgramTable(n_classes, n)
    for record, label in zip(records, labels):
        table.update(record.sequence, int(label))
    logger.info(f"Fitted {n}-gram table: {len(table.counts)} windows, {table.total_votes} votes")
    return table


def classify_ngram(record, table, assign=None):
    """
    Sum the class votes of every window in the record's firing sequence.
    With no known windows, fall back to the all scheme when an assignment
    is given.
    """
    votes = table.votes(record.sequence)
    if votes.sum() == 0:
        if assign is not None:
            return classify_all(record, assign)
        return Prediction(0, flagged=True)
    return Prediction(int(np.argmax(votes)))
