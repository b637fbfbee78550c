"""
Online accuracy estimates during training.

Labels are fitted on one window of training records and used to classify
the following window. Two pairings are supported:

    paired   the first window is a warm-up, then windows alternate between
             labelling and classifying, so every record is used once
    sliding  every window is classified with labels from the one before it,
             giving a point every `window` examples
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from lattice_snn.exceptions import ContractError
from readout.labeling import fit_labels
from readout.ngrams import classify_ngram, fit_ngrams
from readout.schemes import Scheme, classify_all, classify_confidence, classify_distance

from .metrics import accuracy

logger = logging.getLogger(__name__)

PAIRED = 'paired'
SLIDING = 'sliding'

ESTIMATE_MODES = [
    (PAIRED, 'Disjoint label/classify pairs'),
    (SLIDING, 'Sliding windows'),
]


@dataclass(frozen=True)
class EstimatePoint:
    examples_seen: int
    accuracy: float
    flagged: bool = False


@dataclass
class ConvergenceCurve:
    points: List[EstimatePoint] = field(default_factory=list)
    smoothed: List[float] = field(default_factory=list)

    @property
    def raw(self):
        return [p.accuracy for p in self.points]


def online_estimate(
    window_records,
    window_labels,
    next_records,
    next_labels,
    n_classes,
    scheme=Scheme.ALL,
    ngram_n=2,
    next_images=None,
    input_weights=None,
    c_norm=78.4,
):
    """
    Accuracy on next_records of labels fitted on window_records.

    The distance scheme compares next_images against input_weights instead
    of reading the spike records.
    """
    if scheme not in Scheme.values:
        raise ContractError(f"Unknown scheme '{scheme}'")
    assign = fit_labels(window_records, window_labels, n_classes)
    if scheme == Scheme.DISTANCE:
        if next_images is None or input_weights is None:
            raise ContractError('Distance estimates need the images and the current input weights')
        predictions = [classify_distance(img, input_weights, assign, c_norm).label for img in next_images]
    elif scheme == Scheme.NGRAM:
        table = fit_ngrams(window_records, window_labels, n_classes, ngram_n)
        predictions = [classify_ngram(r, table, assign).label for r in next_records]
    elif scheme == Scheme.CONFIDENCE:
        predictions = [classify_confidence(r, assign).label for r in next_records]
    else:
        predictions = [classify_all(r, assign).label for r in next_records]
    return accuracy(predictions, next_labels)


class ConvergenceEstimator:
    """
    Training hook that turns the record stream into estimate points.

    weights is a callable returning the current input weights; it is only
    needed for the distance scheme.
    """

    def __init__(
        self,
        n_classes,
        window=250,
        scheme=Scheme.ALL,
        ngram_n=2,
        mode=PAIRED,
        weights: Optional[Callable] = None,
        c_norm=78.4,
    ):
        if window < 1:
            raise ContractError('window must be >= 1')
        if mode not in dict(ESTIMATE_MODES):
            raise ContractError(f"Unknown estimate mode '{mode}'")
        if scheme == Scheme.DISTANCE and weights is None:
            raise ContractError('Distance estimates need a weights callable')
        self.n_classes = n_classes
        self.window = window
        self.scheme = scheme
        self.ngram_n = ngram_n
        self.mode = mode
        self.weights = weights
        self.c_norm = c_norm
        self.previous = None
        self.current = self._empty()
        self.completed = 0
        self.seen = 0
        self.points = []

    @staticmethod
    def _empty():
        return {'records': [], 'labels': [], 'images': []}

    def _estimate(self, labelled, target, flagged=False):
        value = online_estimate(
            labelled['records'],
            labelled['labels'],
            target['records'],
            target['labels'],
            self.n_classes,
            self.scheme,
            self.ngram_n,
            next_images=target['images'],
            input_weights=self.weights() if self.weights is not None else None,
            c_norm=self.c_norm,
        )
        point = EstimatePoint(self.seen, value, flagged)
        self.points.append(point)
        return point

    def observe(self, record, label, image=None):
        self.seen += 1
        self.current['records'].append(record)
        self.current['labels'].append(int(label))
        if self.scheme == Scheme.DISTANCE:
            if image is None:
                raise ContractError('Distance estimates need the presented image')
            self.current['images'].append(np.asarray(image))
        if len(self.current['records']) < self.window:
            return None

        finished, self.current = self.current, self._empty()
        self.completed += 1
        if self.mode == SLIDING:
            point = self._estimate(self.previous, finished) if self.previous is not None else None
            self.previous = finished
            return point

        if self.completed == 1:
            return None
        if self.previous is None:
            self.previous = finished
            return None
        point = self._estimate(self.previous, finished)
        self.previous = None
        return point

    def finish(self):
        """Estimate on a trailing partial classify window, flagged."""
        if not self.current['records'] or self.previous is None:
            return None
        logger.warning(
            f"Final estimate window has {len(self.current['records'])} of {self.window} examples; flagged"
        )
        point = self._estimate(self.previous, self.current, flagged=True)
        self.current = self._empty()
        return point

    def curve(self, radius=10):
        raw = [p.accuracy for p in self.points]
        return ConvergenceCurve(list(self.points), smooth(raw, radius).tolist())


def expected_points(n_examples, window=250, mode=PAIRED):
    """Number of full estimate points for a stream of n_examples."""
    if mode == SLIDING:
        return max(n_examples // window - 1, 0)
    return max((n_examples - window) // (2 * window), 0)


def smooth(values, radius=10):
    """Mean over up to `radius` neighbours on each side, truncated at the ends."""
    if radius < 0:
        raise ContractError('radius must be >= 0')
    values = np.asarray(values, dtype=np.float64)
    if radius == 0 or values.size == 0:
        return values.copy()
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.maximum(idx - radius, 0)
    hi = np.minimum(idx + radius + 1, values.size)
    return (csum[hi] - csum[lo]) / (hi - lo)
