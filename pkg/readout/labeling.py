"""
Neuron labelling from re-presented, frozen-weight spike records.
"""
import logging
from dataclasses import dataclass

import numpy as np

from lattice_snn.exceptions import InputDataError, StructuralError

logger = logging.getLogger(__name__)

UNASSIGNED = -1


@dataclass
class LabelAssignment:
    n_classes: int
    proportions: np.ndarray
    labels: np.ndarray
    mean_rates: np.ndarray

    @property
    def n_neurons(self):
        return len(self.labels)

    @property
    def assigned(self):
        return self.labels != UNASSIGNED

    def neurons_per_class(self):
        return np.bincount(self.labels[self.assigned], minlength=self.n_classes)


def spike_count_matrix(records):
    return np.stack([record.counts for record in records]).astype(np.float64)


def fit_labels(records, labels, n_classes):
    """
    Label each neuron with the class it fired most for on average.

    Neurons that never fired keep the UNASSIGNED sentinel and an all-zero
    proportion row. Ties go to the lowest class index.
    """
    if len(records) == 0:
        raise InputDataError('Cannot fit labels on an empty record set')
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(records):
        raise StructuralError(f"{len(records)} records but {len(labels)} labels")

    counts = spike_count_matrix(records)
    n_neurons = counts.shape[1]
    totals = np.zeros((n_neurons, n_classes))
    np.add.at(totals.T, labels, counts)

    per_class = np.bincount(labels, minlength=n_classes).astype(np.float64)
    mean_rates = np.divide(totals, per_class[None, :], out=np.zeros_like(totals), where=per_class[None, :] > 0)

    fired = totals.sum(axis=1)
    proportions = np.divide(totals, fired[:, None], out=np.zeros_like(totals), where=fired[:, None] > 0)

    assignment = np.argmax(mean_rates, axis=1).astype(np.int64)
    assignment[fired == 0] = UNASSIGNED

    missing = np.flatnonzero(per_class == 0)
    if missing.size:
        logger.warning(f"No labelling examples for classes {missing.tolist()}")
    logger.info(
        f"Assigned {int((assignment != UNASSIGNED).sum())}/{n_neurons} neurons "
        f"from {len(records)} records"
    )
    return LabelAssignment(n_classes, proportions, assignment, mean_rates)
