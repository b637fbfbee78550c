"""
Network assembly.

three_layer: input -> excitatory (plastic), excitatory -> inhibitory
one-to-one, inhibitory -> excitatory through the schedule matrix.
two_layer_recurrent: the schedule matrix acts directly between excitatory
neurons; there is no relay population.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from django.db import models

from inhibition.lattice import Lattice
from inhibition.schedules import InhibitionSchedule
from lattice_snn.exceptions import StructuralError
from neurons.lif import LifParams, NeuronGroup
from neurons.plasticity import Connection, StdpParams, init_input_connection

logger = logging.getLogger(__name__)

# Enough conductance for the partner inhibitory neuron to fire on one spike
EXC_TO_INH_STRENGTH = 10.4


class ArchitectureKind(models.TextChoices):
    THREE_LAYER = 'three_layer', 'Three-layer (excitatory + inhibitory relay)'
    TWO_LAYER_RECURRENT = 'two_layer_recurrent', 'Two-layer with recurrent inhibition'


class Phase(models.TextChoices):
    TRAIN = 'train', 'Train'
    LABEL = 'label', 'Label'
    TEST = 'test', 'Test'


@dataclass
class SpikeRecord:
    """
    Excitatory raster of one presentation.

    events is an (k, 2) int array of (timestep, neuron) sorted by timestep,
    ties by ascending neuron index.
    """

    example_id: int
    events: np.ndarray
    counts: np.ndarray
    retries: int = 0
    flagged: bool = False

    @classmethod
    def empty(cls, example_id, n_neurons):
        return cls(example_id, np.zeros((0, 2), dtype=np.int64), np.zeros(n_neurons, dtype=np.int64))

    @classmethod
    def from_events(cls, example_id, events, n_neurons):
        events = np.asarray(events, dtype=np.int64).reshape(-1, 2)
        if events.size:
            order = np.lexsort((events[:, 1], events[:, 0]))
            events = events[order]
        counts = np.bincount(events[:, 1], minlength=n_neurons).astype(np.int64)
        return cls(example_id, events, counts)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def sequence(self):
        """Neuron indices in firing order."""
        return self.events[:, 1]


@dataclass
class Architecture:
    kind: str
    n_input: int
    n_neurons: int
    lattice: Lattice
    input_conn: Connection
    inhibition: InhibitionSchedule
    exc_group: NeuronGroup
    inh_group: Optional[NeuronGroup]
    exc_to_inh_strength: float
    dt: float = 0.5
    inh_matrix: np.ndarray = None
    level: Optional[float] = None
    examples_seen: int = 0
    schedule_events: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def recomputations(self):
        return len(self.schedule_events)

    def set_level(self, level, examples_seen=None):
        """Rebuild inh_matrix only when the level actually changes."""
        if self.inh_matrix is not None and level == self.level:
            return False
        self.inh_matrix = self.inhibition.matrix(self.lattice, level)
        at = self.examples_seen if examples_seen is None else examples_seen
        self.schedule_events.append((at, float(level)))
        logger.info(f"Inhibition level set to {level:g} at example {at}")
        self.level = level
        return True

    def reset_state(self):
        self.exc_group.reset_state()
        if self.inh_group is not None:
            self.inh_group.reset_state()
        self.input_conn.reset_traces()


def build_architecture(
    kind,
    n_input,
    n_neurons,
    rng,
    exc_params=None,
    inh_params=None,
    stdp=None,
    schedule=None,
    c_norm=78.4,
    init_scale=0.3,
    mask=None,
    dt=0.5,
    exc_to_inh_strength=EXC_TO_INH_STRENGTH,
    total_planned=None,
):
    """
    Assemble an untrained network. rng draws the initial input weights.

    With a sparsity mask the normalisation target shrinks with the kept
    fraction, so a sparse column can reach its target without exceeding w_max.
    """
    if kind not in ArchitectureKind.values:
        raise StructuralError(f"Unknown architecture kind '{kind}'")
    lattice = Lattice.for_neurons(n_neurons)
    exc_params = exc_params or LifParams()
    stdp = stdp or StdpParams()
    schedule = schedule or InhibitionSchedule()

    target = c_norm
    if mask is not None and c_norm is not None:
        target = c_norm * float(np.mean(mask))
    input_conn = init_input_connection(n_input, n_neurons, rng, stdp, target, init_scale, mask)

    inh_group = None
    if kind == ArchitectureKind.THREE_LAYER:
        inh_group = NeuronGroup(n_neurons, inh_params or LifParams.inhibitory())

    arch = Architecture(
        kind=kind,
        n_input=n_input,
        n_neurons=n_neurons,
        lattice=lattice,
        input_conn=input_conn,
        inhibition=schedule,
        exc_group=NeuronGroup(n_neurons, exc_params),
        inh_group=inh_group,
        exc_to_inh_strength=exc_to_inh_strength,
        dt=dt,
    )
    arch.set_level(schedule.level_at(0, total_planned), examples_seen=0)
    logger.info(
        f"Built {kind} network: {n_input} inputs, {n_neurons} neurons "
        f"({lattice.side}x{lattice.side}), schedule={schedule.kind}"
    )
    return arch
