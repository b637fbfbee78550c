"""
Clock-driven presentation of one example.

Per tick: input spikes drive the excitatory group through the input
connection; excitatory spikes drive inhibition (through the relay group in
three_layer, directly in two_layer_recurrent) which lands on the excitatory
group on the following tick; in the train phase traces then weights of the
input connection are updated.
"""
import logging
from dataclasses import replace

import numpy as np

from encoding.poisson import boost_rates, encode
from encoding.streams import RandomStreams
from lattice_snn.exceptions import StructuralError

from .architecture import ArchitectureKind, Phase, SpikeRecord

logger = logging.getLogger(__name__)


def present(arch, spikes, phase, example_id=0):
    spikes = np.asarray(spikes, dtype=bool)
    if spikes.ndim != 2 or spikes.shape[1] != arch.n_input:
        raise StructuralError(
            f"Spike matrix shape {spikes.shape} does not have {arch.n_input} columns"
        )
    learning = phase == Phase.TRAIN
    dt = arch.dt
    exc = arch.exc_group
    inh = arch.inh_group
    conn = arch.input_conn
    n = arch.n_neurons
    three_layer = arch.kind == ArchitectureKind.THREE_LAYER

    no_input = np.zeros(n)
    inh_drive = np.zeros(n)
    ticks = []
    neurons = []

    for tick, row in enumerate(spikes):
        exc_spikes = exc.step(dt, conn.propagate(row), inh_drive, learning=learning)

        if three_layer:
            relay = inh.step(dt, exc_spikes * arch.exc_to_inh_strength, no_input, learning=False)
            source = relay
        else:
            source = exc_spikes
        fired = np.flatnonzero(source)
        inh_drive = arch.inh_matrix[fired].sum(axis=0) if fired.size else no_input

        if learning:
            conn.update_traces(dt, row, exc_spikes)
            conn.stdp_step(row, exc_spikes)

        winners = np.flatnonzero(exc_spikes)
        if winners.size:
            ticks.extend([tick] * winners.size)
            neurons.extend(winners.tolist())

    arch.reset_state()
    if learning and conn.c_norm is not None:
        conn.normalize_incoming()

    events = np.column_stack([ticks, neurons]) if ticks else np.zeros((0, 2), dtype=np.int64)
    return SpikeRecord.from_events(example_id, events, n)


def present_with_retry(
    arch,
    image,
    encoder_params,
    phase,
    min_spikes=5,
    boost=32.0,
    max_retries=5,
    example_id=0,
):
    """
    Present an image, boosting the input rate while the excitatory layer
    stays below min_spikes. Each attempt is encoded with its own seed derived
    from encoder_params.rng_seed. The last attempt is returned flagged when
    the floor is never met.
    """
    params = encoder_params
    streams = RandomStreams(encoder_params.rng_seed)
    record = None
    for attempt in range(max_retries + 1):
        seed = encoder_params.rng_seed if attempt == 0 else streams.seed('retry', attempt)
        spikes = encode(image, replace(params, rng_seed=seed))
        record = present(arch, spikes, phase, example_id=example_id)
        record.retries = attempt
        if record.total >= min_spikes:
            return record
        if attempt < max_retries:
            params = boost_rates(params, boost)

    record.flagged = True
    logger.warning(
        f"Example {example_id}: {record.total} spikes after {max_retries} boosts "
        f"(floor {min_spikes}, final rate {params.max_rate:g} Hz)"
    )
    return record
