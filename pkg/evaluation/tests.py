import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lattice_snn.exceptions import ContractError, InputDataError
from network.architecture import SpikeRecord

from .convergence import ConvergenceEstimator, expected_points, online_estimate, smooth
from .metrics import accuracy, confusion, mean_percentages, standard_error
from .reports import (
    read_csv,
    read_percentage_table,
    write_confusion_csv,
    write_curve_csv,
    write_grid_csv,
    write_percentage_table,
    write_results_csv,
)


def class_record(label, n_classes=10, per_class=2, rate=3):
    """Record where only the neurons dedicated to `label` fire."""
    counts = np.zeros(n_classes * per_class, dtype=np.int64)
    counts[label * per_class:(label + 1) * per_class] = rate
    events = [(t, i) for i, c in enumerate(counts) for t in range(c)]
    return SpikeRecord.from_events(0, events, len(counts))


class AccuracyTests(SimpleTestCase):
    def test_all_correct(self):
        """Test perfect predictions score 1.0"""
        self.assertEqual(accuracy([1, 2, 3], [1, 2, 3]), 1.0)

    def test_half_correct(self):
        """Test half right scores 0.5"""
        self.assertEqual(accuracy([1, 0, 3, 0], [1, 2, 3, 4]), 0.5)

    def test_matches_counting_oracle(self):
        """Test against a plain counting loop"""
        rng = np.random.default_rng(0)
        p, t = rng.integers(0, 10, 1000), rng.integers(0, 10, 1000)
        self.assertEqual(accuracy(p, t), sum(int(a == b) for a, b in zip(p, t)) / 1000)

    def test_length_mismatch(self):
        """Test unequal lengths are rejected"""
        with self.assertRaises(InputDataError):
            accuracy([1, 2], [1])

    def test_empty(self):
        """Test empty prediction sets are rejected"""
        with self.assertRaises(InputDataError):
            accuracy([], [])


class ConfusionTests(SimpleTestCase):
    def test_perfect_is_diagonal(self):
        """Test perfect predictions fill only the diagonal"""
        cm = confusion([0, 1, 2, 2], [0, 1, 2, 2], 3)
        np.testing.assert_array_equal(cm.cells, np.diag([1, 1, 2]))

    def test_single_cell(self):
        """Test true=1 predicted=3 lands in row 1, column 3"""
        cm = confusion([3], [1], 4)
        self.assertEqual(cm.cells[1, 3], 1)
        self.assertEqual(cm.total, 1)

    def test_trace_equals_accuracy(self):
        """Test the diagonal share equals accuracy"""
        rng = np.random.default_rng(1)
        p, t = rng.integers(0, 5, 500), rng.integers(0, 5, 500)
        self.assertAlmostEqual(confusion(p, t, 5).accuracy, accuracy(p, t), places=12)

    def test_normalized_rows(self):
        """Test normalised rows sum to 100 or stay empty"""
        cm = confusion([0, 1, 1, 0], [0, 0, 0, 1], 3)
        sums = cm.normalized.sum(axis=1)
        self.assertAlmostEqual(sums[0], 100.0, places=6)
        self.assertAlmostEqual(sums[1], 100.0, places=6)
        self.assertEqual(sums[2], 0.0)

    def test_out_of_range_label(self):
        """Test labels beyond n_classes are rejected"""
        with self.assertRaises(InputDataError):
            confusion([5], [0], 3)


class SmoothTests(SimpleTestCase):
    def test_radius_zero_identity(self):
        """Test radius 0 returns the curve unchanged"""
        values = [0.1, 0.5, 0.3]
        np.testing.assert_array_equal(smooth(values, 0), values)

    def test_constant_curve(self):
        """Test a constant curve is unchanged"""
        np.testing.assert_allclose(smooth([0.7] * 30, 10), [0.7] * 30)

    def test_matches_windowed_mean(self):
        """Test against a direct truncated-window mean"""
        rng = np.random.default_rng(2)
        values = rng.random(50).tolist()
        expected = []
        for i in range(50):
            window = values[max(i - 10, 0):min(i + 11, 50)]
            expected.append(sum(window) / len(window))
        np.testing.assert_allclose(smooth(values, 10), expected, rtol=1e-12)

    def test_negative_radius(self):
        """Test a negative radius is rejected"""
        with self.assertRaises(ContractError):
            smooth([1.0], -1)


class OnlineEstimateTests(SimpleTestCase):
    def test_separable_stream_scores_one(self):
        """Test a trivially separable stream is estimated perfectly"""
        labels = list(range(10)) * 3
        records = [class_record(c) for c in labels]
        self.assertEqual(online_estimate(records, labels, records, labels, 10), 1.0)
        self.assertEqual(online_estimate(records, labels, records, labels, 10, scheme='ngram'), 1.0)

    def test_random_labels_near_chance(self):
        """Test shuffled truths estimate near chance"""
        rng = np.random.default_rng(3)
        window_labels = rng.integers(0, 10, 250).tolist()
        next_truth = rng.integers(0, 10, 250).tolist()
        records = [class_record(c) for c in window_labels]
        estimate = online_estimate(records, window_labels, records, next_truth, 10)
        sigma = math.sqrt(0.1 * 0.9 / 250)
        self.assertLess(abs(estimate - 0.1), 3 * sigma)

    def test_distance_scheme_uses_current_weights(self):
        """Test distance estimates classify images against the filters"""
        weights = np.eye(4)
        window_records = [class_record(c, n_classes=4, per_class=1) for c in range(4)]
        images = [np.eye(4)[c] for c in range(4)]
        estimate = online_estimate(
            window_records, list(range(4)), window_records, list(range(4)), 4,
            scheme='distance', next_images=images, input_weights=weights, c_norm=1.0,
        )
        self.assertEqual(estimate, 1.0)

    def test_distance_scheme_needs_weights(self):
        """Test distance estimates without weights are a contract error"""
        with self.assertRaises(ContractError):
            online_estimate([class_record(0)], [0], [class_record(0)], [0], 10, scheme='distance')
        with self.assertRaises(ContractError):
            ConvergenceEstimator(n_classes=10, window=5, scheme='distance')

    def test_estimator_pairs_disjoint_windows(self):
        """Test paired mode skips a warm-up window then alternates label and classify windows"""
        estimator = ConvergenceEstimator(n_classes=10, window=20)
        points = []
        for k in range(100):
            point = estimator.observe(class_record(k % 10), k % 10)
            if point is not None:
                points.append(point)
        self.assertEqual([p.examples_seen for p in points], [60, 100])
        self.assertTrue(all(p.accuracy == 1.0 and not p.flagged for p in points))
        self.assertIsNone(estimator.finish())

    def test_estimator_sliding_emits_every_window(self):
        """Test sliding mode emits a point per window after the first"""
        estimator = ConvergenceEstimator(n_classes=10, window=20, mode='sliding')
        points = []
        for k in range(100):
            point = estimator.observe(class_record(k % 10), k % 10)
            if point is not None:
                points.append(point)
        self.assertEqual([p.examples_seen for p in points], [40, 60, 80, 100])

    def test_distance_estimator_reads_weights_at_estimate_time(self):
        """Test the estimator classifies presented images with the weights callable"""
        weights = np.eye(4)
        estimator = ConvergenceEstimator(n_classes=4, window=4, scheme='distance', weights=lambda: weights, c_norm=1.0)
        points = []
        for k in range(12):
            c = k % 4
            point = estimator.observe(class_record(c, n_classes=4, per_class=1), c, np.eye(4)[c])
            if point is not None:
                points.append(point)
        self.assertEqual([(p.examples_seen, p.accuracy) for p in points], [(12, 1.0)])

    def test_partial_final_window_flagged(self):
        """Test a trailing partial classify window yields a flagged point"""
        for mode in ('paired', 'sliding'):
            estimator = ConvergenceEstimator(n_classes=10, window=20, mode=mode)
            for k in range(50):
                estimator.observe(class_record(k % 10), k % 10)
            with self.assertLogs('evaluation.convergence', level='WARNING'):
                point = estimator.finish()
            self.assertTrue(point.flagged)
            self.assertEqual(point.examples_seen, 50)

    def test_expected_point_count(self):
        """Test the number of full points for a 60k stream with window 250"""
        self.assertEqual(expected_points(60000, 250), 119)
        self.assertEqual(expected_points(60000, 250, mode='sliding'), 239)
        self.assertEqual(expected_points(100, 250), 0)

    def test_point_count_matches_estimator(self):
        """Test the estimator emits exactly expected_points full points"""
        for mode in ('paired', 'sliding'):
            estimator = ConvergenceEstimator(n_classes=10, window=7, mode=mode)
            for k in range(150):
                estimator.observe(class_record(k % 10), k % 10)
            self.assertEqual(len(estimator.points), expected_points(150, 7, mode))


class ReportTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_confusion_csv_layout(self):
        """Test the confusion CSV has n_classes + 1 header columns"""
        path = write_confusion_csv(self.dir / 'c.csv', confusion([0, 1], [0, 0], 3))
        rows = read_csv(path)
        self.assertEqual(rows[0], ['true\\predicted', '0', '1', '2'])
        self.assertEqual(rows[1], ['0', '1', '1', '0'])
        self.assertEqual(len(rows), 4)

    def test_curve_csv(self):
        """Test the convergence CSV header and row count"""
        estimator = ConvergenceEstimator(n_classes=10, window=10)
        for k in range(40):
            estimator.observe(class_record(k % 10), k % 10)
        rows = read_csv(write_curve_csv(self.dir / 'curve.csv', estimator.curve(radius=1)))
        self.assertEqual(rows[0], ['examples_seen', 'raw', 'smoothed'])
        self.assertEqual(len(rows), 2)

    def test_results_csv(self):
        """Test the results CSV uses '.' decimals"""
        rows = read_csv(write_results_csv(self.dir / 'r.csv', [(1, 'all', 0.5, 0.0)]))
        self.assertEqual(rows, [['seed', 'scheme', 'accuracy', 'std'], ['1', 'all', '0.500000', '0.000000']])

    def test_percentage_table_read_back(self):
        """Test a written percentage table reads back with its class names"""
        values = np.array([[75.0, 25.0], [0.0, 100.0]])
        write_percentage_table(self.dir / 'p.csv', values, ['a', 'b'])
        names, read = read_percentage_table(self.dir / 'p.csv')
        self.assertEqual(names, ['a', 'b'])
        np.testing.assert_allclose(read, values)

    def test_percentage_table_rejects_other_csv(self):
        """Test a results CSV is not accepted as a confusion table"""
        path = write_results_csv(self.dir / 'r.csv', [(1, 'all', 0.5, 0.0)])
        with self.assertRaises(InputDataError):
            read_percentage_table(path)

    def test_grid_csv_one_row_per_cell(self):
        """Test grid rows carry mean/std per scheme then trial counts, NaN for missing schemes"""
        rows = [
            ((0.1,), {'all': (0.9, 0.01), 'ngram': (0.95, 0.02)}, 3, 0),
            ((0.25,), {'all': (0.8, 0.0)}, 1, 2),
        ]
        written = read_csv(write_grid_csv(self.dir / 'g.csv', ['inhibition.p_low'], ['all', 'ngram'], rows))
        self.assertEqual(
            written[0],
            ['inhibition.p_low', 'all_mean', 'all_std', 'ngram_mean', 'ngram_std', 'trials', 'failures'],
        )
        self.assertEqual(written[1], ['0.1', '0.900000', '0.010000', '0.950000', '0.020000', '3', '0'])
        self.assertEqual(written[2][3:5], ['nan', 'nan'])
        self.assertEqual(written[2][-2:], ['1', '2'])


class SummaryStatisticTests(SimpleTestCase):
    def test_standard_error(self):
        """Test the binomial standard error of an accuracy"""
        self.assertAlmostEqual(standard_error(0.9, 10000), 0.003)
        self.assertEqual(standard_error(1.0, 50), 0.0)

    def test_standard_error_needs_examples(self):
        """Test zero examples are rejected"""
        with self.assertRaises(InputDataError):
            standard_error(0.5, 0)

    def test_mean_percentages(self):
        """Test confusion tables are averaged element-wise"""
        mean = mean_percentages([[[100.0, 0.0], [50.0, 50.0]], [[80.0, 20.0], [0.0, 100.0]]])
        np.testing.assert_allclose(mean, [[90.0, 10.0], [25.0, 75.0]])

    def test_mean_percentages_shape_mismatch(self):
        """Test tables of different sizes are rejected"""
        with self.assertRaises(InputDataError):
            mean_percentages([np.zeros((2, 2)), np.zeros((3, 3))])
        with self.assertRaises(InputDataError):
            mean_percentages([])
