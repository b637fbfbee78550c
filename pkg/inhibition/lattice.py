import functools
import math
from dataclasses import dataclass

import numpy as np

from lattice_snn.exceptions import ContractError


@dataclass(frozen=True)
class Lattice:
    """side x side grid; neuron i sits at (i // side, i % side)."""

    side: int

    def __post_init__(self):
        if self.side <= 0:
            raise ContractError(f"Lattice side must be positive, got {self.side}")

    @classmethod
    def for_neurons(cls, n_neurons):
        side = math.isqrt(n_neurons)
        if side * side != n_neurons:
            raise ContractError(f"{n_neurons} neurons do not form a square lattice")
        return cls(side)

    @property
    def n(self):
        return self.side * self.side

    @property
    def positions(self):
        index = np.arange(self.n)
        return np.stack([index // self.side, index % self.side], axis=1)

    def distances(self):
        return _distance_table(self.side)


@functools.lru_cache(maxsize=8)
def _distance_table(side):
    pos = Lattice(side).positions.astype(np.float64)
    table = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    table.flags.writeable = False
    return table


def pairwise_inhibition(lattice, c_inhib, c_max, sqrt_distance=False):
    """
    Entry (i, j) = min(c_inhib * d(i, j), c_max), zero diagonal.

    sqrt_distance=True scales by sqrt(d) instead of d.
    """
    if c_inhib < 0 or c_max < 0:
        raise ContractError('Inhibition strengths must be >= 0')
    distance = lattice.distances()
    if sqrt_distance:
        distance = np.sqrt(distance)
    matrix = np.minimum(c_inhib * distance, c_max)
    np.fill_diagonal(matrix, 0.0)
    return matrix


def constant_inhibition(n, level):
    if level < 0:
        raise ContractError('Inhibition level must be >= 0')
    matrix = np.full((n, n), float(level))
    np.fill_diagonal(matrix, 0.0)
    return matrix
