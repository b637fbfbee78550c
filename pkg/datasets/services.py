import logging
from dataclasses import dataclass

import numpy as np

from lattice_snn.exceptions import InputDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparsityMask:
    keep_fraction: float
    seed: int
    mask: np.ndarray

    @property
    def kept(self):
        return float(self.mask.mean()) if self.mask.size else 0.0


def rebalance(dataset, per_class, seed, replace=True):
    """
    Draw per_class examples from every class, then shuffle.
    replace=False samples without replacement and needs per_class <= the
    smallest class size.
    """
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == c)
        if members.size == 0:
            raise InputDataError(f"Class {c} has no examples to rebalance from")
        if not replace and per_class > members.size:
            raise InputDataError(
                f"Class {c} has {members.size} examples, cannot draw {per_class} without replacement"
            )
        chosen.append(rng.choice(members, size=per_class, replace=replace))
    order = np.concatenate(chosen)
    order = order[rng.permutation(order.size)]
    logger.info(f"Rebalanced to {per_class} examples x {dataset.n_classes} classes")
    return dataset.subset(order)


def make_sparsity_mask(n_input, n_neurons, sparsity, seed):
    """Keep every synapse independently with probability 1 - sparsity."""
    if not 0.0 <= sparsity <= 1.0:
        raise InputDataError(f"sparsity must lie in [0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    mask = rng.random((n_input, n_neurons)) >= sparsity
    return SparsityMask(keep_fraction=1.0 - sparsity, seed=seed, mask=mask)
