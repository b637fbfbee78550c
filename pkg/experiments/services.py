"""
Experiment orchestration: train, label and test stages, full trials and
parameter grids. Nothing here touches the run registry, so trials can run
in worker processes; the commands record outcomes.
"""
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from datasets.loaders import load_frames, load_mnist
from datasets.services import make_sparsity_mask, rebalance
from encoding.poisson import EncoderParams
from encoding.streams import RandomStreams
from evaluation.convergence import ConvergenceEstimator
from evaluation.metrics import accuracy, confusion, mean_percentages, standard_error
from evaluation.reports import (
    read_csv,
    read_percentage_table,
    write_confusion_csv,
    write_curve_csv,
    write_grid_csv,
    write_percentage_table,
    write_results_csv,
    write_schedule_events,
    write_training_log,
)
from inhibition.schedules import InhibitionSchedule
from lattice_snn.exceptions import ArtifactIOError, ContractError, InputDataError
from lattice_snn.exit_codes import exit_code_for
from network.architecture import Phase, build_architecture
from network.checkpoint import (
    load_checkpoint,
    read_container,
    save_checkpoint,
    weights_digest,
    write_container,
)
from network.simulation import present_with_retry
from network.training import TrainingHooks, TrainingLog, train_epoch
from neurons.lif import LifParams
from neurons.plasticity import StdpParams
from readout.labeling import fit_labels
from readout.ngrams import NgramTable, classify_ngram, fit_ngrams
from readout.schemes import Scheme, classify_all, classify_confidence, classify_distance
from readout.serialization import decode_ngrams, encode_ngrams, load_readout, save_readout

from .config import experiment_dir, run_dir, write_resolved
from .exporters import export_assignments, export_filters

logger = logging.getLogger(__name__)

CHECKPOINT_FILENAME = 'network.lmsnn'
READOUT_FILENAME = 'readout.lmsnn'
ONLINE_NGRAMS_FILENAME = 'online_ngrams.lmsnn'


@dataclass
class TrainOutcome:
    arch: object
    log: TrainingLog
    online_table: Optional[NgramTable] = None


@dataclass
class TrialOutcome:
    seed: int
    run_dir: str
    config_hash: str
    cell: Tuple = ()
    accuracies: Dict[str, float] = field(default_factory=dict)
    examples_seen: int = 0
    recomputations: int = 0
    flagged: int = 0
    error: str = ''
    exit_code: int = 0

    @property
    def ok(self):
        return not self.error


def _enc(config, rng_seed=0):
    e = config['encoding']
    return EncoderParams(max_rate=e['max_rate'], duration=e['duration'], dt=e['dt'], rng_seed=rng_seed)


def _retry_kwargs(config):
    e = config['encoding']
    return {'min_spikes': e['min_spikes'], 'boost': e['boost'], 'max_retries': e['max_retries']}


def load_data(config):
    """(train, test) datasets after limits and rebalancing."""
    data = config['data']
    if data['kind'] == 'frames':
        n_classes = len(data['classes']) if data['classes'] else None
        train = load_frames(data['train_manifest'], n_classes)
        test = load_frames(data['test_manifest'], train.n_classes)
    else:
        directory = data['dir'] or settings.DATA_DIR
        train = load_mnist(directory, 'train')
        test = load_mnist(directory, 'test')
    if data['rebalance_per_class']:
        train = rebalance(train, data['rebalance_per_class'], seed=0, replace=data['rebalance_replace'])
    if data['train_limit']:
        train = train.head(data['train_limit'])
    if data['test_limit'] is not None:
        test = test.head(data['test_limit'])
    return train, test


def build_network(config, n_input, seed, total_planned=None):
    """Untrained network for one trial; weights and mask come from seed."""
    streams = RandomStreams(seed)
    net = config['network']
    excitatory = dict(config['excitatory'])
    mask = None
    if net['sparsity'] > 0:
        mask = make_sparsity_mask(n_input, net['n_neurons'], net['sparsity'], streams.seed('sparsity')).mask
    return build_architecture(
        net['kind'],
        n_input,
        net['n_neurons'],
        streams.generator('weights'),
        exc_params=LifParams(**excitatory),
        inh_params=LifParams.inhibitory(**config['inhibitory']),
        stdp=StdpParams(**config['stdp']),
        schedule=InhibitionSchedule(**config['inhibition']),
        c_norm=net['c_norm'],
        init_scale=net['init_scale'],
        mask=mask,
        dt=config['encoding']['dt'],
        exc_to_inh_strength=net['exc_to_inh_strength'],
        total_planned=total_planned,
    )


def train_network(config, seed, train_set, directory, digest=''):
    """
    Train for the configured passes and write the checkpoint, training
    log, schedule events, convergence curve and filter snapshots.
    """
    directory = Path(directory)
    passes = config['network']['passes']
    total = len(train_set) * passes
    if total == 0:
        raise InputDataError('Training set is empty')
    arch = build_network(config, train_set.n_input, seed, total_planned=total)

    ev = config['evaluation']
    estimator = ConvergenceEstimator(
        train_set.n_classes,
        ev['window'],
        ev['scheme'],
        config['readout']['ngram_n'],
        mode=ev['estimate_mode'],
        weights=lambda: arch.input_conn.w,
        c_norm=effective_c_norm(config, arch),
    )
    readout = config['readout']
    online = None
    if readout['ngram_mode'] == 'online':
        online = NgramTable(train_set.n_classes, readout['ngram_n'])
    online_from = total - readout['label_examples']
    snapshot_every = config['run']['snapshot_every']

    def on_example(index, record, label):
        if online is not None and index >= online_from:
            online.update(record.sequence, label)
        if snapshot_every and (index + 1) % snapshot_every == 0:
            export_filters(
                directory / 'filters' / f"filters_{index + 1:07d}.png",
                arch.input_conn.w,
                train_set.height,
                train_set.width,
            )

    hooks = TrainingHooks(estimator=estimator, on_example=on_example)
    log = TrainingLog()
    for p in range(passes):
        logger.info(f"Seed {seed}: pass {p + 1}/{passes} over {len(train_set)} examples")
        train_epoch(arch, train_set, _enc(config), seed, total, hooks, log, **_retry_kwargs(config))
    tail = estimator.finish()
    if tail is not None:
        log.estimates.append(tail)

    save_checkpoint(
        directory / CHECKPOINT_FILENAME,
        arch,
        digest,
        extra={
            'height': train_set.height,
            'width': train_set.width,
            'seed': seed,
            'total_planned': total,
        },
    )
    write_training_log(directory / 'training_log.csv', log)
    write_schedule_events(directory / 'schedule_events.csv', log.schedule_events)
    write_curve_csv(directory / 'convergence.csv', estimator.curve(ev['smooth_radius']))
    export_filters(directory / 'filters.png', arch.input_conn.w, train_set.height, train_set.width)
    if online is not None:
        write_container(directory / ONLINE_NGRAMS_FILENAME, {'config_hash': digest}, {'NGRAMS': encode_ngrams(online)})
    return TrainOutcome(arch, log, online)


def effective_c_norm(config, arch):
    """Column target after scaling by the kept fraction of the input mask."""
    return config['network']['c_norm'] * float(np.mean(arch.input_conn.mask))


def restore_network(config, checkpoint_path):
    """Build the configured network and load a checkpoint into it."""
    metadata, _ = read_container(checkpoint_path)
    total = int(metadata.get('total_planned') or 0) or None
    arch = build_network(config, int(metadata['n_input']), int(metadata.get('seed', 0)), total)
    load_checkpoint(checkpoint_path, arch)
    return arch, metadata


def _present_all(arch, dataset, config, phase, seed):
    streams = RandomStreams(seed)
    retry = _retry_kwargs(config)
    return [
        present_with_retry(
            arch,
            image,
            _enc(config, streams.seed(phase, i)),
            phase,
            example_id=i,
            **retry,
        )
        for i, image in enumerate(dataset.images)
    ]


def label_network(config, arch, train_set, directory, digest='', online_table=None, seed=0):
    """
    Re-present the final label_examples training examples with learning
    off, fit the label assignment and n-gram table, and verify that the
    weights did not move.
    """
    directory = Path(directory)
    subset = train_set.tail(config['readout']['label_examples'])
    if len(subset) == 0:
        raise InputDataError('Labelling subset is empty')

    before = weights_digest(arch.input_conn.w)
    records = _present_all(arch, subset, config, Phase.LABEL, seed)
    if weights_digest(arch.input_conn.w) != before:
        raise ContractError('Input weights changed during labelling')

    assign = fit_labels(records, subset.labels, subset.n_classes)
    table = online_table
    if table is None and config['readout']['ngram_mode'] == 'online':
        online_path = directory / ONLINE_NGRAMS_FILENAME
        if online_path.exists():
            table = decode_ngrams(read_container(online_path)[1]['NGRAMS'])
    if table is None:
        table = fit_ngrams(records, subset.labels, subset.n_classes, config['readout']['ngram_n'])

    save_readout(directory / READOUT_FILENAME, assign, table, {'config_hash': digest, 'weights': before})
    export_assignments(directory / 'assignments.png', assign.labels, assign.n_classes)
    return assign, table


def classify_records(scheme, records, images, arch, assign, table, c_norm):
    if scheme == Scheme.ALL:
        return [classify_all(r, assign) for r in records]
    if scheme == Scheme.CONFIDENCE:
        return [classify_confidence(r, assign) for r in records]
    if scheme == Scheme.DISTANCE:
        return [classify_distance(img, arch.input_conn.w, assign, c_norm) for img in images]
    if scheme == Scheme.NGRAM:
        if table is None:
            raise ContractError('The ngram scheme needs a fitted n-gram table')
        return [classify_ngram(r, table, assign) for r in records]
    raise ContractError(f"Unknown scheme '{scheme}'")


def evaluate_network(config, arch, assign, table, test_set, directory, seed=0):
    """Classify the test set under every configured scheme; returns {scheme: accuracy}."""
    directory = Path(directory)
    if len(test_set) == 0:
        raise InputDataError('Test set is empty')
    records = _present_all(arch, test_set, config, Phase.TEST, seed)
    c_norm = effective_c_norm(config, arch)
    names = config['data']['classes']

    accuracies = {}
    for scheme in config['readout']['schemes']:
        predictions = classify_records(scheme, records, test_set.images, arch, assign, table, c_norm)
        labels = [p.label for p in predictions]
        flagged = sum(1 for p in predictions if p.flagged)
        if flagged:
            logger.warning(f"{scheme}: {flagged} of {len(predictions)} predictions flagged low-confidence")
        accuracies[scheme] = accuracy(labels, test_set.labels)
        matrix = confusion(labels, test_set.labels, test_set.n_classes)
        write_confusion_csv(directory / f"confusion_{scheme}.csv", matrix, normalized=True, class_names=names)
        logger.info(f"{scheme}: test accuracy {100 * accuracies[scheme]:.2f}%")
    # per-seed std is the binomial standard error over the test set
    write_results_csv(
        directory / 'results.csv',
        [(seed, s, a, standard_error(a, len(test_set))) for s, a in accuracies.items()],
    )
    return accuracies


def run_trial(config, seed, cell=()):
    """
    Train, label and test one seed. Failures are returned in the outcome
    so a grid can keep going.
    """
    directory = run_dir(config, seed)
    if cell:
        directory = experiment_dir(config) / cell_slug(cell) / f"seed_{seed}"
    digest = write_resolved(directory, config)
    outcome = TrialOutcome(seed=seed, run_dir=str(directory), config_hash=digest, cell=tuple(cell))
    try:
        train_set, test_set = load_data(config)
        trained = train_network(config, seed, train_set, directory, digest)
        assign, table = label_network(
            config, trained.arch, train_set, directory, digest, trained.online_table, seed
        )
        outcome.accuracies = evaluate_network(config, trained.arch, assign, table, test_set, directory, seed)
        outcome.examples_seen = trained.arch.examples_seen
        outcome.recomputations = trained.log.recomputations
        outcome.flagged = trained.log.flagged
    except Exception as e:
        logger.error(f"Trial seed={seed} in {directory} failed: {e}", exc_info=True)
        outcome.error = f"{type(e).__name__}: {e}"
        outcome.exit_code = exit_code_for(e)
    return outcome


def train_trial(config, seed):
    directory = run_dir(config, seed)
    digest = write_resolved(directory, config)
    outcome = TrialOutcome(seed=seed, run_dir=str(directory), config_hash=digest)
    try:
        train_set, _ = load_data(config)
        trained = train_network(config, seed, train_set, directory, digest)
        outcome.examples_seen = trained.arch.examples_seen
        outcome.recomputations = trained.log.recomputations
        outcome.flagged = trained.log.flagged
    except Exception as e:
        logger.error(f"Training seed={seed} failed: {e}", exc_info=True)
        outcome.error = f"{type(e).__name__}: {e}"
        outcome.exit_code = exit_code_for(e)
    return outcome


def cell_slug(cell):
    """Directory-safe name for a grid cell."""
    text = '__'.join(f"{key}={value}" for key, value in cell)
    return re.sub(r'[^A-Za-z0-9._=-]+', '_', text)


def _init_worker():
    import django

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'lattice_snn.settings')
    django.setup()


def run_many(func, jobs, workers=1):
    """
    Run func(*job) for every job, in-process when workers == 1, otherwise
    in a process pool. Outcomes come back in job order.
    """
    if workers <= 1 or len(jobs) <= 1:
        return [func(*job) for job in jobs]
    outcomes = [None] * len(jobs)
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
        futures = {pool.submit(func, *job): i for i, job in enumerate(jobs)}
        for future in as_completed(futures):
            outcomes[futures[future]] = future.result()
    return outcomes


def aggregate(outcomes, schemes):
    """
    ({scheme: (mean, population std)}, successful trials, failed trials)
    over the successful outcomes.
    """
    succeeded = [o for o in outcomes if o.ok]
    stats = {}
    for scheme in schemes:
        values = [o.accuracies[scheme] for o in succeeded if scheme in o.accuracies]
        if values:
            stats[scheme] = (float(np.mean(values)), float(np.std(values)))
        else:
            stats[scheme] = (float('nan'), float('nan'))
    return stats, len(succeeded), len(outcomes) - len(succeeded)


def run_grid(config, workers=1):
    """
    Every grid cell times every seed. Writes grid.csv with one row per cell
    and returns (rows, outcomes), rows as (values, stats, trials, failures).
    """
    from .forms import expand_grid

    keys, cells = expand_grid(config)
    seeds = config['run']['seeds']
    schemes = config['readout']['schemes']
    jobs = []
    for values, cell_config in cells:
        cell = tuple(zip(keys, values))
        jobs.extend((cell_config, seed, cell) for seed in seeds)
    logger.info(f"Grid: {len(cells)} cells x {len(seeds)} seeds on {workers} worker(s)")
    outcomes = run_many(run_trial, jobs, workers)

    rows = []
    for values, _ in cells:
        cell = tuple(zip(keys, values))
        members = [o for o in outcomes if o.cell == cell]
        stats, trials, failures = aggregate(members, schemes)
        if failures:
            logger.warning(f"Grid cell {cell_slug(cell)}: {failures} of {len(members)} trials failed")
        rows.append((values, stats, trials, failures))
    write_grid_csv(experiment_dir(config) / 'grid.csv', keys, schemes, rows)
    return rows, outcomes


def summarize_seeds(config):
    """
    Experiment-level results.csv (every evaluated seed plus a mean row with
    the population std across seeds) and one mean confusion table per
    scheme. Seeds without a results.csv yet are skipped. Returns the
    number of seeds summarised.
    """
    schemes = config['readout']['schemes']
    per_seed = {}
    for seed in config['run']['seeds']:
        path = run_dir(config, seed) / 'results.csv'
        if path.exists():
            per_seed[seed] = {row[1]: (float(row[2]), float(row[3])) for row in read_csv(path)[1:]}
    if not per_seed:
        return 0

    directory = experiment_dir(config)
    rows = [
        (seed, scheme, acc, std)
        for seed, results in per_seed.items()
        for scheme, (acc, std) in results.items()
    ]
    for scheme in schemes:
        seeds = [seed for seed, results in per_seed.items() if scheme in results]
        if not seeds:
            continue
        values = [per_seed[seed][scheme][0] for seed in seeds]
        rows.append(('mean', scheme, float(np.mean(values)), float(np.std(values))))
        tables = [read_percentage_table(run_dir(config, seed) / f"confusion_{scheme}.csv") for seed in seeds]
        write_percentage_table(
            directory / f"confusion_{scheme}_mean.csv",
            mean_percentages([table for _, table in tables]),
            tables[0][0],
        )
    write_results_csv(directory / 'results.csv', rows)
    logger.info(f"Summarised {len(per_seed)} seed(s) of '{config['run']['name']}' in {directory}")
    return len(per_seed)


def load_readout_for(checkpoint_path, readout_path=None):
    path = Path(readout_path) if readout_path else Path(checkpoint_path).parent / READOUT_FILENAME
    if not path.exists():
        raise ArtifactIOError(f"Missing readout artifact {path}; run the label command first")
    _, assign, table = load_readout(path)
    return assign, table
