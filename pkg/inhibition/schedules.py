"""
Inhibition schedules: map training progress to an inhibition level and
build the matching inhibitory weight matrix.
"""
import logging
from dataclasses import dataclass
from typing import Optional

from lattice_snn.exceptions import ContractError

from .lattice import constant_inhibition, pairwise_inhibition

logger = logging.getLogger(__name__)

CONSTANT = 'constant'
INCREASING = 'increasing'
GROWING = 'growing'
TWO_LEVEL = 'two_level'

SCHEDULE_KINDS = [
    (CONSTANT, 'Constant (baseline)'),
    (INCREASING, 'Increasing with distance'),
    (GROWING, 'Growing'),
    (TWO_LEVEL, 'Two-level'),
]


@dataclass(frozen=True)
class InhibitionSchedule:
    kind: str = TWO_LEVEL
    c_inhib: float = 1.0
    c_min: float = 1.0
    c_max: float = 20.0
    p_low: float = 0.1
    p_grow: float = 1.0
    n_low: Optional[int] = None
    sqrt_distance: bool = False

    def __post_init__(self):
        problems = []
        if self.kind not in dict(SCHEDULE_KINDS):
            problems.append(f"unknown schedule kind '{self.kind}'")
        if min(self.c_inhib, self.c_min, self.c_max) < 0:
            problems.append('strengths must be >= 0')
        if self.c_min > self.c_max:
            problems.append('c_min must not exceed c_max')
        for name in ('p_low', 'p_grow'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if self.n_low is not None and self.n_low < 0:
            problems.append('n_low must be >= 0')
        if problems:
            raise ContractError('Invalid InhibitionSchedule: ' + '; '.join(problems))

    def effective_level(self, progress):
        if not 0.0 <= progress <= 1.0:
            raise ContractError(f"progress must lie in [0, 1], got {progress}")
        if self.kind in (CONSTANT, INCREASING):
            return self.c_inhib
        if self.kind == GROWING:
            if self.p_grow == 0:
                return self.c_max
            return self.c_min + (self.c_max - self.c_min) * min(progress / self.p_grow, 1.0)
        return self.c_min if progress < self.p_low else self.c_max

    def level_at(self, examples_seen, total_planned=None):
        """
        Level for the example about to be presented.

        Two-level schedules with n_low switch on an absolute example count and
        never need total_planned, so they work on open-ended streams.
        """
        if self.kind == TWO_LEVEL and self.n_low is not None:
            return self.c_min if examples_seen < self.n_low else self.c_max
        if self.kind in (CONSTANT, INCREASING):
            return self.c_inhib
        if not total_planned:
            raise ContractError(f"A {self.kind} schedule needs the planned number of examples")
        return self.effective_level(min(examples_seen / total_planned, 1.0))

    def matrix(self, lattice, level):
        """Inhibitory weight matrix for a given level."""
        if self.kind == CONSTANT:
            return constant_inhibition(lattice.n, level)
        return pairwise_inhibition(lattice, level, self.c_max, self.sqrt_distance)


def effective_level(sched, progress):
    return sched.effective_level(progress)
