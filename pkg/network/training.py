import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

from encoding.streams import RandomStreams

from .architecture import Phase
from .simulation import present_with_retry

logger = logging.getLogger(__name__)


@dataclass
class ExampleLogEntry:
    example: int
    label: int
    spikes: int
    level: float
    retries: int
    flagged: bool


@dataclass
class TrainingLog:
    entries: List[ExampleLogEntry] = field(default_factory=list)
    schedule_events: list = field(default_factory=list)
    estimates: list = field(default_factory=list)

    @property
    def recomputations(self):
        return len(self.schedule_events)

    @property
    def flagged(self):
        return sum(1 for entry in self.entries if entry.flagged)


@dataclass
class TrainingHooks:
    """
    Optional observers of the training stream.

    estimator.observe(record, label, image) may return a convergence point;
    on_example(index, record, label) runs after every presentation.
    """

    estimator: Optional[object] = None
    on_example: Optional[Callable] = None
    log_every: int = 1000


def train_epoch(
    arch,
    dataset,
    encoder_params,
    seed,
    total_planned=None,
    hooks=None,
    log=None,
    min_spikes=5,
    boost=32.0,
    max_retries=5,
):
    """
    One pass over dataset with STDP on. progress is examples_seen /
    total_planned, where examples_seen counts across passes.
    """
    hooks = hooks or TrainingHooks()
    log = log or TrainingLog()
    streams = RandomStreams(seed)
    total_planned = total_planned or len(dataset)
    events_before = len(arch.schedule_events)

    for offset in range(len(dataset)):
        seen = arch.examples_seen
        arch.set_level(arch.inhibition.level_at(seen, total_planned), examples_seen=seen)

        image, label = dataset.images[offset], int(dataset.labels[offset])
        params = replace(encoder_params, rng_seed=streams.seed('encoding', seen))
        record = present_with_retry(
            arch,
            image,
            params,
            Phase.TRAIN,
            min_spikes=min_spikes,
            boost=boost,
            max_retries=max_retries,
            example_id=seen,
        )
        arch.examples_seen += 1
        log.entries.append(ExampleLogEntry(seen, label, record.total, arch.level, record.retries, record.flagged))

        if hooks.estimator is not None:
            point = hooks.estimator.observe(record, label, image)
            if point is not None:
                log.estimates.append(point)
        if hooks.on_example is not None:
            hooks.on_example(seen, record, label)
        if hooks.log_every and arch.examples_seen % hooks.log_every == 0:
            logger.info(f"Trained on {arch.examples_seen}/{total_planned} examples (level {arch.level:g})")

    log.schedule_events = list(arch.schedule_events)
    changed = len(arch.schedule_events) - events_before
    logger.info(
        f"Pass finished after {arch.examples_seen} examples; "
        f"{changed} inhibition recomputations this pass, {log.flagged} flagged examples"
    )
    return log
