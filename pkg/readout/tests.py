import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lattice_snn.exceptions import ContractError, InputDataError
from network.architecture import SpikeRecord

from .labeling import UNASSIGNED, LabelAssignment, fit_labels
from .ngrams import NgramTable, classify_ngram, fit_ngrams, windows
from .schemes import classify_all, classify_confidence, classify_distance
from .serialization import load_readout, save_readout


def record_from_counts(counts, example_id=0):
    counts = np.asarray(counts, dtype=np.int64)
    events = [(t, i) for i, c in enumerate(counts) for t in range(c)]
    return SpikeRecord.from_events(example_id, events, len(counts))


def record_from_sequence(sequence, n_neurons=10):
    return SpikeRecord.from_events(0, [(t, i) for t, i in enumerate(sequence)], n_neurons)


def assignment(labels, n_classes, proportions=None):
    labels = np.asarray(labels, dtype=np.int64)
    if proportions is None:
        proportions = np.zeros((len(labels), n_classes))
        for i, label in enumerate(labels):
            if label != UNASSIGNED:
                proportions[i, label] = 1.0
    return LabelAssignment(n_classes, proportions, labels, proportions.copy())


class FitLabelsTests(SimpleTestCase):
    def test_single_class_neuron(self):
        """Test a neuron firing only on class 3 is labelled 3 with a one-hot row"""
        records = [record_from_counts([0, 4]), record_from_counts([0, 0]), record_from_counts([0, 2])]
        assign = fit_labels(records, [3, 1, 3], n_classes=4)
        self.assertEqual(assign.labels[1], 3)
        np.testing.assert_array_equal(assign.proportions[1], [0, 0, 0, 1])

    def test_silent_neuron_unassigned(self):
        """Test a neuron that never fires keeps the sentinel and a zero row"""
        assign = fit_labels([record_from_counts([1, 0])], [0], n_classes=2)
        self.assertEqual(assign.labels[1], UNASSIGNED)
        np.testing.assert_array_equal(assign.proportions[1], [0, 0])

    def test_matches_counting_oracle(self):
        """Test label fitting against naive per-neuron counting loops"""
        rng = np.random.default_rng(0)
        n_neurons, n_classes = 10, 4
        raw = rng.integers(0, 4, size=(60, n_neurons))
        raw[:, 7] = 0
        labels = rng.integers(0, n_classes, size=60)
        assign = fit_labels([record_from_counts(r) for r in raw], labels, n_classes)

        for i in range(n_neurons):
            totals = [0] * n_classes
            seen = [0] * n_classes
            for r, c in zip(raw, labels):
                totals[c] += int(r[i])
                seen[c] += 1
            means = [totals[c] / seen[c] if seen[c] else 0.0 for c in range(n_classes)]
            fired = sum(totals)
            if fired == 0:
                self.assertEqual(assign.labels[i], UNASSIGNED)
                continue
            best = max(range(n_classes), key=lambda c: (means[c], -c))
            self.assertEqual(assign.labels[i], best)
            for c in range(n_classes):
                self.assertEqual(assign.proportions[i, c], totals[c] / fired)
                self.assertEqual(assign.mean_rates[i, c], means[c])

    def test_rows_sum_to_one_or_zero(self):
        """Test proportion rows are normalised"""
        rng = np.random.default_rng(1)
        raw = rng.integers(0, 3, size=(30, 6))
        assign = fit_labels([record_from_counts(r) for r in raw], rng.integers(0, 3, size=30), 3)
        sums = assign.proportions.sum(axis=1)
        for s in sums:
            self.assertTrue(s == 0.0 or abs(s - 1.0) < 1e-9)

    def test_permutation_equivariant(self):
        """Test permuting neurons permutes the labels identically"""
        rng = np.random.default_rng(2)
        raw = rng.integers(0, 5, size=(40, 8))
        labels = rng.integers(0, 3, size=40)
        perm = rng.permutation(8)
        base = fit_labels([record_from_counts(r) for r in raw], labels, 3)
        moved = fit_labels([record_from_counts(r[perm]) for r in raw], labels, 3)
        np.testing.assert_array_equal(moved.labels, base.labels[perm])

    def test_empty_records(self):
        """Test fitting on nothing is an input error"""
        with self.assertRaises(InputDataError):
            fit_labels([], [], 10)


class RateSchemeTests(SimpleTestCase):
    def test_all_single_class_activity(self):
        """Test only class-2 neurons firing predicts class 2"""
        assign = assignment([0, 1, 2, 2], 3)
        self.assertEqual(classify_all(record_from_counts([0, 0, 3, 1]), assign).label, 2)

    def test_all_tie_goes_to_lower_class(self):
        """Test an exact tie picks the lower class"""
        assign = assignment([0, 1, 2], 3)
        self.assertEqual(classify_all(record_from_counts([0, 2, 2]), assign).label, 1)

    def test_all_averages_over_labelled_neurons(self):
        """Test the all scheme divides by the number of neurons per class"""
        assign = assignment([0, 0, 0, 1], 2)
        # class 0 mean 5/3, class 1 mean 2
        self.assertEqual(classify_all(record_from_counts([5, 0, 0, 2]), assign).label, 1)

    def test_all_matches_oracle(self):
        """Test the all scheme against a per-class averaging loop"""
        rng = np.random.default_rng(3)
        labels = rng.integers(-1, 5, size=30)
        assign = assignment(labels, 5)
        for _ in range(50):
            counts = rng.integers(0, 6, size=30)
            scores = []
            for c in range(5):
                members = [i for i in range(30) if labels[i] == c]
                scores.append(sum(counts[i] for i in members) / len(members) if members else 0.0)
            expected = max(range(5), key=lambda c: (scores[c], -c))
            if counts.sum():
                self.assertEqual(classify_all(record_from_counts(counts), assign).label, expected)

    def test_silent_record_flagged(self):
        """Test an all-zero record predicts class 0 flagged"""
        assign = assignment([0, 1], 2)
        prediction = classify_all(record_from_counts([0, 0]), assign)
        self.assertEqual(prediction.label, 0)
        self.assertTrue(prediction.flagged)

    def test_confidence_matches_dot_product(self):
        """Test confidence scores against an explicit weighted sum"""
        rng = np.random.default_rng(4)
        proportions = rng.random((12, 4))
        proportions /= proportions.sum(axis=1, keepdims=True)
        assign = assignment(np.argmax(proportions, axis=1), 4, proportions)
        for _ in range(30):
            counts = rng.integers(0, 5, size=12)
            if counts.sum() == 0:
                continue
            scores = [sum(counts[i] * proportions[i, c] for i in range(12)) for c in range(4)]
            expected = max(range(4), key=lambda c: (scores[c], -c))
            self.assertEqual(classify_confidence(record_from_counts(counts), assign).label, expected)

    def test_confidence_scale_invariant(self):
        """Test multiplying counts by a positive constant keeps the prediction"""
        rng = np.random.default_rng(5)
        proportions = rng.random((8, 3))
        proportions /= proportions.sum(axis=1, keepdims=True)
        assign = assignment(np.argmax(proportions, axis=1), 3, proportions)
        counts = rng.integers(1, 5, size=8)
        base = classify_confidence(record_from_counts(counts), assign).label
        for k in (2, 3, 7):
            self.assertEqual(classify_confidence(record_from_counts(counts * k), assign).label, base)

    def test_all_and_confidence_coincide_for_one_hot(self):
        """Test the schemes agree with one-hot proportions and balanced labels"""
        rng = np.random.default_rng(6)
        assign = assignment(np.repeat(np.arange(4), 3), 4)
        for _ in range(40):
            counts = rng.integers(0, 6, size=12)
            if counts.sum():
                record = record_from_counts(counts)
                self.assertEqual(classify_all(record, assign).label, classify_confidence(record, assign).label)


class DistanceSchemeTests(SimpleTestCase):
    def test_exact_filter_match(self):
        """Test an image equal to a filter takes that neuron's label"""
        weights = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]])
        assign = assignment([4, 7, 2], 8)
        self.assertEqual(classify_distance([0.0, 1.0], weights, assign, c_norm=1.0).label, 7)

    def test_equidistant_filters_pick_lower_index(self):
        """Test ties in distance go to the lower neuron index"""
        weights = np.array([[1.0, 0.0], [0.0, 1.0]])
        assign = assignment([3, 1], 4)
        self.assertEqual(classify_distance([0.5, 0.5], weights, assign, c_norm=1.0).label, 3)

    def test_unassigned_nearest_falls_back(self):
        """Test an unassigned nearest neuron defers to the next assigned one"""
        weights = np.array([[1.0, 0.0, 0.9], [0.0, 1.0, 0.1]])
        assign = assignment([UNASSIGNED, 1, 5], 6)
        self.assertEqual(classify_distance([1.0, 0.0], weights, assign, c_norm=1.0).label, 5)

    def test_no_assigned_neurons(self):
        """Test distance classification needs an assigned neuron"""
        with self.assertRaises(ContractError):
            classify_distance([1.0], np.ones((1, 2)), assignment([UNASSIGNED, UNASSIGNED], 2), c_norm=1.0)

    def test_matches_brute_force_nearest(self):
        """Test against an exhaustive nearest-neighbour search"""
        rng = np.random.default_rng(7)
        weights = rng.random((16, 50))
        weights /= weights.sum(axis=0, keepdims=True) / 3.0
        labels = rng.integers(0, 10, size=50)
        assign = assignment(labels, 10)
        for _ in range(20):
            image = rng.random(16)
            scaled = image * 3.0 / image.sum()
            best, best_d = None, None
            for j in range(50):
                d = sum((weights[i, j] - scaled[i]) ** 2 for i in range(16))
                if best_d is None or d < best_d:
                    best, best_d = j, d
            self.assertEqual(classify_distance(image, weights, assign, c_norm=3.0).label, labels[best])


class NgramTests(SimpleTestCase):
    def test_window_enumeration(self):
        """Test bigram counts for a repeating sequence"""
        table = fit_ngrams([record_from_sequence([2, 5, 2, 5])], [1], n_classes=3)
        self.assertEqual(table.counts[(2, 5)].tolist(), [0, 2, 0])
        self.assertEqual(table.counts[(5, 2)].tolist(), [0, 1, 0])

    def test_short_record_contributes_nothing(self):
        """Test a record with fewer events than n adds no votes"""
        table = fit_ngrams([record_from_sequence([3])], [0], n_classes=2, n=2)
        self.assertEqual(table.counts, {})

    def test_within_tick_order_by_neuron(self):
        """Test simultaneous spikes enter the sequence in ascending neuron order"""
        record = SpikeRecord.from_events(0, [(0, 6), (0, 2), (1, 4)], 8)
        self.assertEqual(windows(record.sequence, 2), [(2, 6), (6, 4)])

    def test_fit_matches_window_oracle(self):
        """Test fitting and vote mass against explicit sliding windows"""
        rng = np.random.default_rng(8)
        sequences = [rng.integers(0, 6, size=rng.integers(0, 12)).tolist() for _ in range(100)]
        labels = rng.integers(0, 3, size=100)
        table = fit_ngrams([record_from_sequence(s) for s in sequences], labels, 3, n=3)
        expected = {}
        for seq, label in zip(sequences, labels):
            for k in range(len(seq) - 2):
                key = tuple(seq[k:k + 3])
                expected.setdefault(key, [0, 0, 0])[label] += 1
        self.assertEqual({k: v.tolist() for k, v in table.counts.items()}, expected)
        self.assertEqual(table.total_votes, sum(max(0, len(s) - 2) for s in sequences))

    def test_classify_matches_vote_oracle(self):
        """Test classification against summed window votes"""
        rng = np.random.default_rng(9)
        train = [rng.integers(0, 5, size=8).tolist() for _ in range(50)]
        table = fit_ngrams([record_from_sequence(s) for s in train], rng.integers(0, 4, size=50), 4)
        for _ in range(200):
            seq = rng.integers(0, 5, size=rng.integers(2, 8)).tolist()
            votes = [0, 0, 0, 0]
            for k in range(len(seq) - 1):
                for c, v in enumerate(table.counts.get(tuple(seq[k:k + 2]), [0, 0, 0, 0])):
                    votes[c] += int(v)
            prediction = classify_ngram(record_from_sequence(seq), table)
            if sum(votes):
                self.assertEqual(prediction.label, max(range(4), key=lambda c: (votes[c], -c)))
            else:
                self.assertTrue(prediction.flagged)

    def test_unanimous_votes(self):
        """Test windows that only ever voted for class 4 predict 4"""
        table = fit_ngrams([record_from_sequence([1, 2, 3])], [4], n_classes=5)
        self.assertEqual(classify_ngram(record_from_sequence([1, 2, 3]), table).label, 4)

    def test_unseen_windows_fall_back(self):
        """Test unseen windows fall back to the all scheme when available"""
        table = fit_ngrams([record_from_sequence([1, 2])], [0], n_classes=3)
        record = record_from_sequence([5, 6, 6], n_neurons=7)
        self.assertTrue(classify_ngram(record, table).flagged)
        assign = assignment([0, 0, 0, 0, 0, 1, 2], 3)
        self.assertEqual(classify_ngram(record, table, assign).label, 2)

    def test_merge_is_addition(self):
        """Test merging sharded tables equals fitting on all records"""
        seqs = [[1, 2, 3], [2, 3, 1], [1, 2, 1]]
        labels = [0, 1, 0]
        whole = fit_ngrams([record_from_sequence(s) for s in seqs], labels, 2)
        left = fit_ngrams([record_from_sequence(s) for s in seqs[:1]], labels[:1], 2)
        right = fit_ngrams([record_from_sequence(s) for s in seqs[1:]], labels[1:], 2)
        merged = left.merge(right)
        self.assertEqual(
            {k: v.tolist() for k, v in merged.counts.items()},
            {k: v.tolist() for k, v in whole.counts.items()},
        )

    def test_invalid_order(self):
        """Test n must be at least 1"""
        with self.assertRaises(ContractError):
            NgramTable(3, n=0)


class ReadoutArtifactTests(SimpleTestCase):
    def test_save_and_load(self):
        """Test the assignment and n-gram table survive the container"""
        rng = np.random.default_rng(10)
        raw = rng.integers(0, 3, size=(20, 9))
        labels = rng.integers(0, 3, size=20)
        records = [record_from_counts(r) for r in raw]
        assign = fit_labels(records, labels, 3)
        table = fit_ngrams(records, labels, 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'readout.lmsnn'
            save_readout(path, assign, table, {'config_hash': 'x'})
            metadata, loaded, loaded_table = load_readout(path)
        self.assertEqual(metadata, {'config_hash': 'x'})
        np.testing.assert_array_equal(loaded.labels, assign.labels)
        np.testing.assert_array_equal(loaded.proportions, assign.proportions)
        self.assertEqual(
            {k: v.tolist() for k, v in loaded_table.counts.items()},
            {k: v.tolist() for k, v in table.counts.items()},
        )
