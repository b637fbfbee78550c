import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from datasets.loaders import Dataset
from encoding.poisson import EncoderParams, encode
from inhibition.schedules import CONSTANT, GROWING, TWO_LEVEL, InhibitionSchedule
from lattice_snn.exceptions import ArtifactIOError, StructuralError

from .architecture import ArchitectureKind, Phase, SpikeRecord, build_architecture
from .checkpoint import (
    decode_vector,
    load_checkpoint,
    read_container,
    save_checkpoint,
    weights_digest,
    write_container,
)
from .simulation import present, present_with_retry
from .training import TrainingHooks, train_epoch

SHORT = EncoderParams(duration=25.0, rng_seed=5)
DRIVEN = EncoderParams(duration=150.0, rng_seed=5)


def small_network(kind=ArchitectureKind.TWO_LAYER_RECURRENT, n_input=8, n_neurons=4, seed=0, **kwargs):
    kwargs.setdefault('schedule', InhibitionSchedule(kind=CONSTANT, c_inhib=20.0))
    return build_architecture(kind, n_input, n_neurons, np.random.default_rng(seed), **kwargs)


def tiny_dataset(count, side=2, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.random((count, side * side)), np.arange(count) % 2, 2, side, side)


def reference_raster(arch, spikes):
    """Scalar two_layer_recurrent simulation with learning off."""
    p = arch.exc_group.params
    dt = arch.dt
    n = arch.n_neurons
    w = arch.input_conn.w
    m = arch.inh_matrix
    v = [p.v_rest] * n
    g_e = [0.0] * n
    g_i = [0.0] * n
    refrac = [0.0] * n
    inh_next = [0.0] * n
    events = []
    for tick, row in enumerate(spikes):
        fired = []
        for j in range(n):
            drive = sum(w[i, j] for i in range(len(row)) if row[i])
            refractory = refrac[j] > 1e-9
            spiked = (not refractory) and v[j] >= p.v_thresh_base + arch.exc_group.theta[j]
            if spiked:
                v[j] = p.v_reset
                refrac[j] = p.refractory
                fired.append(j)
                events.append((tick, j))
            g_e[j] += drive
            g_i[j] += inh_next[j]
            if not refractory and not spiked:
                v[j] += (dt / p.tau_v) * (
                    (p.v_rest - v[j]) + g_e[j] * (p.e_exc - v[j]) + g_i[j] * (p.e_inh - v[j])
                )
            g_e[j] *= math.exp(-dt / p.tau_ge)
            g_i[j] *= math.exp(-dt / p.tau_gi)
            if refractory:
                refrac[j] -= dt
                if refrac[j] < 1e-9:
                    refrac[j] = 0.0
        inh_next = [sum(m[k, j] for k in fired) for j in range(n)]
    return events


class PresentTests(SimpleTestCase):
    """Test single presentations"""

    def test_all_zero_input_gives_empty_record(self):
        """Test an all-zero spike matrix produces no excitatory spikes"""
        arch = small_network(kind=ArchitectureKind.THREE_LAYER)
        record = present(arch, np.zeros((200, 8), dtype=bool), Phase.TEST)
        self.assertEqual(record.total, 0)
        self.assertEqual(record.events.shape, (0, 2))
        np.testing.assert_array_equal(record.counts, np.zeros(4))

    def test_wrong_width_rejected(self):
        """Test the spike matrix must have one column per input"""
        arch = small_network()
        with self.assertRaises(StructuralError):
            present(arch, np.zeros((10, 7), dtype=bool), Phase.TEST)

    def test_deterministic_for_fixed_seed(self):
        """Test identical seeds give identical rasters and weights after training"""
        image = np.linspace(0.0, 1.0, 8)
        results = []
        for _ in range(2):
            arch = small_network(c_norm=2.0)
            arch.input_conn.w *= 4.0
            record = present_with_retry(arch, image, SHORT, Phase.TRAIN, min_spikes=0)
            results.append((record.events, arch.input_conn.w.copy()))
        np.testing.assert_array_equal(results[0][0], results[1][0])
        np.testing.assert_array_equal(results[0][1], results[1][1])

    def test_matches_scalar_reference(self):
        """Test the vectorised tick loop against a per-neuron scalar loop"""
        arch = small_network()
        arch.input_conn.w[:] = np.random.default_rng(3).uniform(2.0, 3.0, size=(8, 4))
        spikes = encode(np.ones(8), EncoderParams(duration=100.0, rng_seed=11))
        expected = reference_raster(arch, spikes)
        record = present(arch, spikes, Phase.TEST)
        self.assertGreater(record.total, 0)
        self.assertEqual([tuple(e) for e in record.events.tolist()], expected)

    def test_events_sorted_by_tick_then_neuron(self):
        """Test raster ordering"""
        record = SpikeRecord.from_events(0, [[3, 2], [1, 3], [3, 0], [1, 1]], 4)
        self.assertEqual(record.events.tolist(), [[1, 1], [1, 3], [3, 0], [3, 2]])
        self.assertEqual(record.sequence.tolist(), [1, 3, 0, 2])
        self.assertEqual(record.counts.tolist(), [1, 1, 1, 1])

    def test_state_reset_after_presentation(self):
        """Test membrane and traces are cleared but theta survives"""
        arch = small_network(c_norm=2.0)
        arch.input_conn.w[:] = 2.5
        present(arch, encode(np.ones(8), DRIVEN), Phase.TRAIN)
        self.assertTrue(np.all(arch.exc_group.v == arch.exc_group.params.v_rest))
        self.assertTrue(np.all(arch.input_conn.x_pre == 0.0))
        self.assertGreater(arch.exc_group.theta.max(), 0.0)

    def test_training_normalises_columns(self):
        """Test incoming weights are renormalised after a training presentation"""
        arch = small_network(c_norm=2.0)
        present(arch, encode(np.ones(8), SHORT), Phase.TRAIN)
        np.testing.assert_allclose(arch.input_conn.w.sum(axis=0), 2.0)

    def test_test_phase_freezes_weights_and_theta(self):
        """Test label/test presentations leave learned state untouched"""
        arch = small_network()
        arch.input_conn.w[:] = 2.5
        w_before = weights_digest(arch.input_conn.w)
        theta_before = arch.exc_group.theta.copy()
        present(arch, encode(np.ones(8), SHORT), Phase.TEST)
        self.assertEqual(weights_digest(arch.input_conn.w), w_before)
        np.testing.assert_array_equal(arch.exc_group.theta, theta_before)


class RetryTests(SimpleTestCase):
    def test_no_retry_when_floor_met(self):
        """Test a strongly driven network is accepted on the first attempt"""
        arch = small_network()
        arch.input_conn.w[:] = 3.0
        record = present_with_retry(arch, np.ones(8), DRIVEN, Phase.TEST, min_spikes=1)
        self.assertEqual(record.retries, 0)
        self.assertFalse(record.flagged)

    def test_zero_floor_never_retries(self):
        """Test min_spikes=0 accepts even a silent presentation"""
        arch = small_network()
        record = present_with_retry(arch, np.zeros(8), SHORT, Phase.TEST, min_spikes=0)
        self.assertEqual(record.retries, 0)
        self.assertFalse(record.flagged)

    def test_dead_network_flagged_after_cap(self):
        """Test a network that cannot fire is flagged after max_retries boosts"""
        arch = small_network()
        arch.input_conn.w[:] = 0.0
        with self.assertLogs('network.simulation', level='WARNING'):
            record = present_with_retry(arch, np.ones(8), SHORT, Phase.TEST, min_spikes=5, max_retries=3)
        self.assertEqual(record.retries, 3)
        self.assertTrue(record.flagged)
        self.assertEqual(record.total, 0)


class TrainEpochTests(SimpleTestCase):
    def test_two_level_recomputes_once(self):
        """Test a two-level schedule changes level exactly once after the initial build"""
        data = tiny_dataset(20)
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=1.0, c_max=20.0, p_low=0.1)
        arch = small_network(n_input=4, schedule=schedule, total_planned=20, c_norm=1.0)
        log = train_epoch(arch, data, SHORT, seed=1, total_planned=20, min_spikes=0)
        self.assertEqual(arch.recomputations, 2)
        self.assertEqual(log.schedule_events, [(0, 1.0), (2, 20.0)])
        self.assertEqual([e.level for e in log.entries[:3]], [1.0, 1.0, 20.0])
        self.assertEqual(arch.examples_seen, 20)

    def test_absolute_switch_point(self):
        """Test n_low switches on the example count without a planned total"""
        data = tiny_dataset(6)
        schedule = InhibitionSchedule(kind=TWO_LEVEL, c_min=2.0, c_max=10.0, n_low=4)
        arch = small_network(n_input=4, schedule=schedule, c_norm=1.0)
        log = train_epoch(arch, data, SHORT, seed=1, min_spikes=0)
        self.assertEqual(log.schedule_events, [(0, 2.0), (4, 10.0)])

    def test_growing_levels_strictly_increase(self):
        """Test a growing schedule raises the level on every example"""
        data = tiny_dataset(10)
        schedule = InhibitionSchedule(kind=GROWING, c_min=1.0, c_max=20.0, p_grow=1.0)
        arch = small_network(n_input=4, schedule=schedule, total_planned=10, c_norm=1.0)
        log = train_epoch(arch, data, SHORT, seed=1, total_planned=10, min_spikes=0)
        levels = [level for _, level in log.schedule_events]
        self.assertEqual(len(levels), 10)
        self.assertTrue(all(b > a for a, b in zip(levels, levels[1:])))

    def test_hooks_called_per_example(self):
        """Test on_example and the estimator see every presentation"""
        seen = []

        class Recorder:
            def observe(self, record, label, image=None):
                return (len(seen), 0.0) if len(seen) % 2 else None

        data = tiny_dataset(4)
        arch = small_network(n_input=4, c_norm=1.0)
        hooks = TrainingHooks(estimator=Recorder(), on_example=lambda i, r, l: seen.append(i))
        log = train_epoch(arch, data, SHORT, seed=1, hooks=hooks, min_spikes=0)
        self.assertEqual(seen, [0, 1, 2, 3])
        self.assertEqual(len(log.estimates), 2)
        self.assertEqual(len(log.entries), 4)


class CompetitionTests(SimpleTestCase):
    """Test network-level behaviour of lateral inhibition"""

    def test_winner_take_all_under_strong_inhibition(self):
        """Test few other neurons fire once the strongest neuron has spiked"""
        winner = 37
        arch = build_architecture(
            ArchitectureKind.THREE_LAYER,
            50,
            100,
            np.random.default_rng(0),
            schedule=InhibitionSchedule(kind=CONSTANT, c_inhib=20.0),
        )
        arch.input_conn.w[:] = 0.3
        arch.input_conn.w[:, winner] = 0.45
        spikes = encode(np.ones(50), EncoderParams(rng_seed=2))
        record = present(arch, spikes, Phase.TEST)
        self.assertGreater(record.total, 0)
        self.assertEqual(int(record.sequence[0]), winner)
        others = set(record.sequence.tolist()) - {winner}
        self.assertLess(len(others), 5)

    def test_permuting_neurons_permutes_raster(self):
        """Test relabelling neurons under all-to-all inhibition relabels the spikes"""
        rng = np.random.default_rng(4)
        w = rng.uniform(1.5, 3.0, size=(8, 4))
        perm = np.array([2, 0, 3, 1])
        spikes = encode(np.ones(8), EncoderParams(duration=100.0, rng_seed=9))

        arch = small_network()
        arch.input_conn.w[:] = w
        base = present(arch, spikes, Phase.TEST)

        permuted = small_network()
        permuted.input_conn.w[:] = w[:, perm]
        moved = present(permuted, spikes, Phase.TEST)

        # column k of the permuted network is neuron perm[k] of the original
        mapped = sorted((int(t), int(perm[k])) for t, k in moved.events)
        self.assertEqual(mapped, sorted(map(tuple, base.events.tolist())))


    def test_no_inhibition_makes_identical_neurons_exchangeable(self):
        """Test neurons with identical filters fire identically at inhibition level 0"""
        spikes = encode(np.full(16, 0.8), EncoderParams(duration=100.0, rng_seed=11))
        column = np.random.default_rng(12).uniform(0.5, 1.5, size=16)
        for kind in ArchitectureKind.values:
            arch = small_network(
                kind=kind,
                n_input=16,
                n_neurons=9,
                schedule=InhibitionSchedule(kind=CONSTANT, c_inhib=0.0),
            )
            self.assertFalse(arch.inh_matrix.any())
            arch.input_conn.w[:] = column[:, None]
            record = present(arch, spikes, Phase.TEST)
            counts = record.counts
            self.assertGreater(counts.sum(), 0)
            self.assertTrue(np.all(counts == counts[0]), f"{kind}: {counts.tolist()}")
            ticks = [sorted(int(t) for t, j in record.events if j == k) for k in range(9)]
            self.assertTrue(all(t == ticks[0] for t in ticks))
    def test_architectures_agree_on_first_winner(self):
        """Test both architectures pick the same first neuron on the same input"""
        rng = np.random.default_rng(6)
        w = rng.uniform(0.5, 1.5, size=(16, 9))
        spikes = encode(np.ones(16), EncoderParams(duration=100.0, rng_seed=3))
        firsts = []
        for kind in ArchitectureKind.values:
            arch = small_network(kind=kind, n_input=16, n_neurons=9)
            arch.input_conn.w[:] = w
            record = present(arch, spikes, Phase.TEST)
            self.assertGreater(record.total, 0)
            firsts.append(tuple(record.events[0]))
        self.assertEqual(firsts[0], firsts[1])


class CheckpointTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'network.lmsnn'

    def tearDown(self):
        self.tmp.cleanup()

    def _trained(self):
        mask = np.random.default_rng(2).random((4, 4)) > 0.25
        arch = small_network(n_input=4, c_norm=1.0, mask=mask)
        train_epoch(arch, tiny_dataset(3), SHORT, seed=1, min_spikes=0)
        arch.exc_group.theta[:] = [0.1, 0.2, 0.3, 0.4]
        return arch

    def test_save_then_load_restores_learned_state(self):
        """Test weights, mask, theta and schedule position survive a checkpoint"""
        arch = self._trained()
        save_checkpoint(self.path, arch, config_hash='abc')
        fresh = small_network(n_input=4, c_norm=1.0, seed=99)
        metadata = load_checkpoint(self.path, fresh)
        np.testing.assert_array_equal(fresh.input_conn.w, arch.input_conn.w)
        np.testing.assert_array_equal(fresh.input_conn.mask, arch.input_conn.mask)
        np.testing.assert_array_equal(fresh.exc_group.theta, arch.exc_group.theta)
        self.assertEqual(fresh.examples_seen, 3)
        self.assertEqual(fresh.level, arch.level)
        self.assertEqual(metadata['config_hash'], 'abc')

    def test_header_is_text(self):
        """Test the container starts with its magic line"""
        save_checkpoint(self.path, self._trained())
        self.assertTrue(self.path.read_bytes().startswith(b'LMSNN 1\nkind=two_layer_recurrent\n'))
        _, sections = read_container(self.path)
        self.assertEqual(list(sections), ['WEIGHTS', 'THETA'])

    def test_truncated_file_rejected(self):
        """Test a truncated checkpoint raises an artifact error"""
        save_checkpoint(self.path, self._trained())
        data = self.path.read_bytes()
        self.path.write_bytes(data[:-10])
        with self.assertRaises(ArtifactIOError):
            load_checkpoint(self.path, small_network(n_input=4, c_norm=1.0))

    def test_shape_mismatch_rejected(self):
        """Test a checkpoint cannot load into a differently sized network"""
        save_checkpoint(self.path, self._trained())
        with self.assertRaises(ArtifactIOError):
            load_checkpoint(self.path, small_network(n_input=8, c_norm=1.0))

    def test_missing_file(self):
        """Test a missing checkpoint raises an artifact error"""
        with self.assertRaises(ArtifactIOError):
            load_checkpoint(self.path, small_network())

    def test_short_vector_section_rejected(self):
        """Test a THETA section shorter than its length field is an artifact error"""
        save_checkpoint(self.path, self._trained())
        metadata, sections = read_container(self.path)
        sections['THETA'] = b'\x01\x02\x03'
        write_container(self.path, metadata, sections)
        with self.assertRaises(ArtifactIOError):
            load_checkpoint(self.path, small_network(n_input=4, c_norm=1.0))
        with self.assertRaises(ArtifactIOError):
            decode_vector(b'')
