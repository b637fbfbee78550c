"""
Rate-based classification schemes: all, confidence and distance.
"""
from dataclasses import dataclass

import numpy as np
from django.db import models

from lattice_snn.exceptions import ContractError

from .labeling import UNASSIGNED


class Scheme(models.TextChoices):
    ALL = 'all', 'All (mean activity per label)'
    CONFIDENCE = 'confidence', 'Confidence weighting'
    DISTANCE = 'distance', 'Distance (nearest filter)'
    NGRAM = 'ngram', 'n-gram'


@dataclass(frozen=True)
class Prediction:
    label: int
    flagged: bool = False


def _argmax(scores):
    # np.argmax returns the first maximum, i.e. the lowest class index
    return int(np.argmax(scores))


def all_scores(counts, assign):
    per_class = assign.neurons_per_class()
    sums = np.zeros(assign.n_classes)
    mask = assign.assigned
    np.add.at(sums, assign.labels[mask], counts[mask])
    return np.divide(sums, per_class, out=np.zeros_like(sums), where=per_class > 0)


def classify_all(record, assign):
    if record.total == 0:
        return Prediction(0, flagged=True)
    return Prediction(_argmax(all_scores(record.counts, assign)))


def classify_confidence(record, assign):
    if record.total == 0:
        return Prediction(0, flagged=True)
    scores = record.counts.astype(np.float64) @ assign.proportions
    return Prediction(_argmax(scores))


def classify_distance(image, input_weights, assign, c_norm=78.4):
    """
    Label of the neuron whose incoming weight column is nearest the image.

    The image is rescaled to sum to c_norm so it lives in the same range as
    the normalised columns. Unassigned neurons are skipped.
    """
    if not assign.assigned.any():
        raise ContractError('Distance classification needs at least one assigned neuron')
    image = np.asarray(image, dtype=np.float64).ravel()
    total = image.sum()
    scaled = image * (c_norm / total) if total > 0 else image
    distances = np.linalg.norm(input_weights - scaled[:, None], axis=0)
    order = np.argsort(distances, kind='stable')
    nearest = order[assign.labels[order] != UNASSIGNED][0]
    return Prediction(int(assign.labels[nearest]))
