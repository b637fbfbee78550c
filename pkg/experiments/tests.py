import importlib
import logging
import math
import os
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import yaml
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from PIL import Image

from datasets.loaders import Dataset, write_idx
from evaluation.reports import read_csv, read_percentage_table, write_grid_csv
from lattice_snn.exceptions import ConfigValidationError
from lattice_snn.log import RunLogFileHandler
from network.checkpoint import decode_weights, read_container
from readout.labeling import UNASSIGNED

from .config import config_hash, load_config, read_resolved, write_resolved
from .exporters import UNASSIGNED_COLOR, assignment_map, class_colors, export_filters, tile_filters
from .forms import expand_grid, validate_config
from .models import ExperimentRun, SchemeResult
from .services import run_trial


def write_toy_mnist(directory, n_train=16, n_test=8):
    """4x4 images: even labels light the left half, odd labels the right half."""
    def build(count):
        images = np.zeros((count, 16))
        labels = np.arange(count) % 2
        for k, label in enumerate(labels):
            img = np.zeros((4, 4))
            img[:, 2 * label:2 * label + 2] = 1.0
            images[k] = img.ravel()
        return Dataset(images, labels, 10, 4, 4)

    directory.mkdir(parents=True, exist_ok=True)
    write_idx(build(n_train), directory / 'train-images-idx3-ubyte', directory / 'train-labels-idx1-ubyte')
    write_idx(build(n_test), directory / 't10k-images-idx3-ubyte', directory / 't10k-labels-idx1-ubyte')


def toy_config(root, **sections):
    config = {
        'network': {'n_neurons': 4, 'c_norm': 12.0},
        'encoding': {'max_rate': 255.0, 'duration': 50.0, 'min_spikes': 1},
        'readout': {'label_examples': 8},
        'data': {'dir': str(root / 'mnist')},
        'evaluation': {'window': 4, 'smooth_radius': 1},
        'run': {'name': 'toy', 'seeds': [3], 'output_root': str(root / 'runs')},
    }
    for section, values in sections.items():
        config.setdefault(section, {}).update(values)
    path = root / 'toy.yaml'
    path.write_text(yaml.safe_dump(config))
    return path


class ConfigTests(SimpleTestCase):
    def test_defaults_validate(self):
        """Test the packaged defaults pass validation with every section present"""
        resolved = validate_config(load_config())
        self.assertEqual(resolved['network']['n_neurons'], 100)
        self.assertEqual(resolved['inhibition']['kind'], 'two_level')
        self.assertEqual(resolved['readout']['schemes'], ['all', 'confidence', 'distance', 'ngram'])
        self.assertEqual(resolved['excitatory']['tau_theta'], 1e7)

    def test_recipes_validate(self):
        """Test every shipped recipe passes validation"""
        recipes = sorted((settings.BASE_DIR / 'experiments' / 'recipes').glob('*.yaml'))
        self.assertEqual(
            [p.stem for p in recipes],
            ['convergence_225', 'small_two_level', 'sparsity_sweep', 'two_level_grid'],
        )
        for path in recipes:
            with self.subTest(recipe=path.stem):
                validate_config(load_config(path))

    def test_recipe_settings(self):
        """Test the recipes carry the intended network sizes, schemes and seeds"""
        recipes = settings.BASE_DIR / 'experiments' / 'recipes'
        small = validate_config(load_config(recipes / 'small_two_level.yaml'))
        self.assertEqual(small['network']['n_neurons'], 100)
        self.assertEqual(small['run']['seeds'], [0, 1, 2])
        self.assertIn('ngram', small['readout']['schemes'])

        sweep = validate_config(load_config(recipes / 'sparsity_sweep.yaml'))
        self.assertEqual(sweep['data']['train_limit'], 20000)
        self.assertEqual(sweep['readout']['schemes'], ['confidence'])
        self.assertEqual(sweep['grid']['network.sparsity'], [0.0, 0.25, 0.5, 0.75, 0.9])

        curve = validate_config(load_config(recipes / 'convergence_225.yaml'))
        self.assertEqual(curve['network']['n_neurons'], 225)
        self.assertEqual(curve['inhibition']['c_inhib'], 20.0)
        self.assertEqual(curve['grid']['inhibition.kind'], ['two_level', 'constant'])
        self.assertEqual(len(curve['run']['seeds']), 5)

    def test_two_level_grid_layout(self):
        """Test the 625-neuron grid recipe expands to 18 cells and an 18-row grid.csv"""
        config = load_config(settings.BASE_DIR / 'experiments' / 'recipes' / 'two_level_grid.yaml')
        validate_config(config)
        keys, cells = expand_grid(config)
        self.assertEqual(keys, ['inhibition.p_low', 'inhibition.c_min', 'inhibition.c_max'])
        self.assertEqual(len(cells), 18)
        self.assertEqual(cells[0][0], (0.1, 0.1, 15.0))
        self.assertEqual(cells[-1][0], (0.25, 2.5, 20.0))
        self.assertTrue(all(cell['network']['n_neurons'] == 625 for _, cell in cells))

        schemes = ['all', 'confidence', 'distance', 'ngram']
        rows = [(values, {s: (0.9, 0.01) for s in schemes}, 5, 0) for values, _ in cells]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_grid_csv(Path(tmp) / 'grid.csv', keys, schemes, rows)
            written = read_csv(path)
        self.assertEqual(len(written), 19)
        self.assertEqual(written[0][:3], keys)
        self.assertEqual(written[0][3:5], ['all_mean', 'all_std'])
        self.assertEqual(written[0][-2:], ['trials', 'failures'])

    def test_override_parsed_as_yaml(self):
        """Test --set values keep their YAML types"""
        config = load_config(overrides=['network.n_neurons=225', 'run.seeds=[1, 2, 3]'])
        self.assertEqual(config['network']['n_neurons'], 225)
        self.assertEqual(config['run']['seeds'], [1, 2, 3])

    def test_bad_override_syntax(self):
        """Test an override without section.key is rejected"""
        with self.assertRaises(ConfigValidationError):
            load_config(overrides=['n_neurons=4'])

    def test_every_violation_reported(self):
        """Test validation collects errors from several sections at once"""
        config = load_config(overrides=[
            'network.n_neurons=600',
            'inhibition.p_low=2.0',
            'readout.schemes=[all, bogus]',
            'inhibition.c_min=30.0',
        ])
        with self.assertRaises(ConfigValidationError) as cm:
            validate_config(config)
        joined = '\n'.join(cm.exception.errors)
        self.assertIn('network.n_neurons', joined)
        self.assertIn('inhibition.p_low', joined)
        self.assertIn('readout.schemes', joined)
        self.assertIn('inhibition.c_min', joined)

    def test_unknown_keys_and_sections(self):
        """Test typos are reported instead of silently ignored"""
        config = load_config(overrides=['network.n_nerons=4', 'extras.x=1'])
        with self.assertRaises(ConfigValidationError) as cm:
            validate_config(config)
        self.assertIn('network.n_nerons: unknown key', cm.exception.errors)
        self.assertIn('extras: unknown section', cm.exception.errors)

    def test_spike_probability_bound(self):
        """Test rates whose boosted probability reaches 1 are rejected"""
        with self.assertRaises(ConfigValidationError):
            validate_config(load_config(overrides=['encoding.max_rate=1900']))

    def test_frames_need_manifests(self):
        """Test frame datasets require train and test manifests"""
        with self.assertRaises(ConfigValidationError) as cm:
            validate_config(load_config(overrides=['data.kind=frames']))
        self.assertTrue(any('data.train_manifest' in e for e in cm.exception.errors))

    def test_resolved_copy_reproduces_hash(self):
        """Test the frozen config.yaml resolves to the same hash"""
        resolved = validate_config(load_config())
        with tempfile.TemporaryDirectory() as tmp:
            digest = write_resolved(tmp, resolved)
            again = validate_config(read_resolved(tmp))
        self.assertEqual(config_hash(again), digest)

    def test_table_grid_layout(self):
        """Test the p_low x c_min x c_max grid expands to 18 cells, first key outermost"""
        config = load_config()
        config['grid'] = {
            'inhibition.p_low': [0.1, 0.25],
            'inhibition.c_min': [0.1, 1.0, 2.5],
            'inhibition.c_max': [15.0, 17.5, 20.0],
        }
        resolved = validate_config(config)
        keys, cells = expand_grid(resolved)
        self.assertEqual(keys, ['inhibition.p_low', 'inhibition.c_min', 'inhibition.c_max'])
        self.assertEqual(len(cells), 18)
        self.assertEqual(cells[0][0], (0.1, 0.1, 15.0))
        self.assertEqual(cells[-1][0], (0.25, 2.5, 20.0))
        self.assertEqual(cells[5][1]['inhibition']['c_max'], 20.0)
        self.assertNotIn('grid', cells[0][1])

    def test_invalid_grid_cell(self):
        """Test a grid value that breaks a cell is caught before any run"""
        config = load_config()
        config['grid'] = {'network.n_neurons': [100, 600]}
        with self.assertRaises(ConfigValidationError) as cm:
            validate_config(config)
        self.assertTrue(any('network.n_neurons=600' in e for e in cm.exception.errors))


class ExporterTests(SimpleTestCase):
    def test_tile_arithmetic(self):
        """Test 625 filters of 28x28 tile into a (25*29-1) square"""
        canvas = tile_filters(np.zeros((784, 625)), 28, 28)
        self.assertEqual(canvas.shape, (724, 724))

    def test_zero_weights_black_tiles(self):
        """Test all-zero weights give uniformly black tiles"""
        canvas = tile_filters(np.zeros((9, 4)), 3, 3)
        for row in range(2):
            for col in range(2):
                tile = canvas[row * 4:row * 4 + 3, col * 4:col * 4 + 3]
                self.assertTrue(np.all(tile == 0))
        self.assertTrue(np.all(canvas[3, :] == 255))

    def test_reimported_tile_matches_column(self):
        """Test a tile read back from disk equals its min-max scaled column"""
        rng = np.random.default_rng(0)
        weights = rng.random((12, 9))
        with tempfile.TemporaryDirectory() as tmp:
            path = export_filters(Path(tmp) / 'f.pgm', weights, 3, 4)
            pixels = np.asarray(Image.open(path))
        self.assertEqual(pixels.shape, (3 * 4 - 1, 3 * 5 - 1))
        column = weights[:, 4]
        expected = np.rint((column - column.min()) / (column.max() - column.min()) * 255).reshape(3, 4)
        np.testing.assert_array_equal(pixels[4:7, 5:9], expected)

    def test_assignment_colours(self):
        """Test class colours fill each neuron cell and unassigned neurons are grey"""
        image = assignment_map([0, 1, UNASSIGNED, 1], n_classes=2, cell=2)
        self.assertEqual(image.shape, (4, 4, 3))
        colors = class_colors(2)
        self.assertEqual(tuple(image[0, 0]), colors[0])
        self.assertEqual(tuple(image[0, 3]), colors[1])
        self.assertEqual(tuple(image[3, 0]), UNASSIGNED_COLOR)


class RunLogTests(SimpleTestCase):
    def test_log_directory_created_on_first_write(self):
        """Test the run log handler creates nothing until a record is written"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'runs' / 'logs' / 'lmsnn.log'
            handler = RunLogFileHandler(str(path))
            try:
                self.assertFalse(path.parent.exists())
                handler.emit(logging.LogRecord('experiments', logging.INFO, __file__, 1, 'hello', None, None))
                self.assertIn('hello', path.read_text())
            finally:
                handler.close()

    def test_settings_import_has_no_filesystem_side_effect(self):
        """Test loading the settings module does not create the log directory"""
        import lattice_snn.settings as project_settings

        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp) / 'runs'
            try:
                with mock.patch.dict(os.environ, {'LMSNN_OUTPUT_ROOT': str(root)}):
                    importlib.reload(project_settings)
                    self.assertEqual(project_settings.LOG_DIR, root / 'logs')
                self.assertFalse(root.exists())
            finally:
                importlib.reload(project_settings)


class PipelineTests(TestCase):
    """Test the commands end to end on a synthetic IDX dataset"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        write_toy_mnist(self.root / 'mnist')
        self.config = toy_config(self.root)
        self.run_dir = self.root / 'runs' / 'toy' / 'seed_3'
        self.checkpoint = self.run_dir / 'network.lmsnn'

    def tearDown(self):
        self.tmp.cleanup()

    def test_train_label_evaluate(self):
        """Test train, label and evaluate write their artifacts and registry rows"""
        call_command('train', '--config', str(self.config), '--workers', '1')
        for name in ('network.lmsnn', 'config.yaml', 'config.sha256', 'training_log.csv',
                     'schedule_events.csv', 'convergence.csv', 'filters.png'):
            self.assertTrue((self.run_dir / name).exists(), name)
        run = ExperimentRun.objects.get(stage='train')
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.examples_seen, 16)

        log = read_csv(self.run_dir / 'training_log.csv')
        self.assertEqual(log[0], ['example', 'spikes', 'level', 'retries', 'flagged'])
        self.assertEqual(len(log), 17)
        curve = read_csv(self.run_dir / 'convergence.csv')
        self.assertEqual([row[0] for row in curve[1:]], ['12'])

        call_command('label', '--checkpoint', str(self.checkpoint))
        self.assertTrue((self.run_dir / 'readout.lmsnn').exists())
        self.assertTrue((self.run_dir / 'assignments.png').exists())

        call_command('evaluate', '--checkpoint', str(self.checkpoint))
        results = read_csv(self.run_dir / 'results.csv')
        self.assertEqual(results[0], ['seed', 'scheme', 'accuracy', 'std'])
        self.assertEqual([r[1] for r in results[1:]], ['all', 'confidence', 'distance', 'ngram'])
        for scheme in ('all', 'confidence', 'distance', 'ngram'):
            rows = read_csv(self.run_dir / f"confusion_{scheme}.csv")
            self.assertEqual(len(rows[0]), 11)
        self.assertEqual(SchemeResult.objects.filter(run__stage='test').count(), 4)

    def test_multi_seed_summary(self):
        """Test evaluating every seed writes the mean row and mean confusion tables"""
        config = toy_config(self.root, run={'seeds': [3, 4]})
        call_command('train', '--config', str(config), '--workers', '1')
        for seed in (3, 4):
            checkpoint = self.root / 'runs' / 'toy' / f"seed_{seed}" / 'network.lmsnn'
            call_command('label', '--checkpoint', str(checkpoint))
            call_command('evaluate', '--checkpoint', str(checkpoint))

        experiment = self.root / 'runs' / 'toy'
        rows = read_csv(experiment / 'results.csv')
        self.assertEqual(rows[0], ['seed', 'scheme', 'accuracy', 'std'])
        self.assertEqual(len(rows), 1 + 2 * 4 + 4)
        per_seed = {(r[0], r[1]): float(r[2]) for r in rows[1:] if r[0] != 'mean'}
        for r in rows[1:]:
            if r[0] == 'mean':
                values = [per_seed[('3', r[1])], per_seed[('4', r[1])]]
                self.assertAlmostEqual(float(r[2]), float(np.mean(values)), places=5)
                self.assertAlmostEqual(float(r[3]), float(np.std(values)), places=5)
            else:
                acc = float(r[2])
                self.assertAlmostEqual(float(r[3]), math.sqrt(acc * (1 - acc) / 8), places=5)

        _, first = read_percentage_table(experiment / 'seed_3' / 'confusion_all.csv')
        _, second = read_percentage_table(experiment / 'seed_4' / 'confusion_all.csv')
        names, mean = read_percentage_table(experiment / 'confusion_all_mean.csv')
        self.assertEqual(len(names), 10)
        np.testing.assert_allclose(mean, (first + second) / 2, atol=1e-4)

    def test_single_seed_summary(self):
        """Test one evaluated seed still gets a mean row with zero spread"""
        call_command('train', '--config', str(self.config), '--workers', '1')
        call_command('label', '--checkpoint', str(self.checkpoint))
        call_command('evaluate', '--checkpoint', str(self.checkpoint))
        rows = read_csv(self.root / 'runs' / 'toy' / 'results.csv')
        means = [r for r in rows[1:] if r[0] == 'mean']
        self.assertEqual([r[1] for r in means], ['all', 'confidence', 'distance', 'ngram'])
        self.assertTrue(all(r[3] == '0.000000' for r in means))

    def test_two_level_recomputes_twice(self):
        """Test the schedule log holds the initial level and one jump"""
        call_command('train', '--config', str(self.config), '--workers', '1')
        events = read_csv(self.run_dir / 'schedule_events.csv')
        self.assertEqual(events, [['example', 'level'], ['0', '1'], ['2', '20']])
        self.assertEqual(ExperimentRun.objects.get().recomputations, 2)

    def test_pipeline_is_deterministic(self):
        """Test two runs of the same config give identical weights and accuracies"""
        resolved = validate_config(load_config(self.config))
        first = run_trial(resolved, 3)
        resolved['run']['output_root'] = str(self.root / 'again')
        second = run_trial(resolved, 3)
        self.assertTrue(first.ok, first.error)
        self.assertEqual(first.accuracies, second.accuracies)
        w1, m1 = decode_weights(read_container(Path(first.run_dir) / 'network.lmsnn')[1]['WEIGHTS'])
        w2, m2 = decode_weights(read_container(Path(second.run_dir) / 'network.lmsnn')[1]['WEIGHTS'])
        np.testing.assert_array_equal(w1, w2)
        np.testing.assert_array_equal(m1, m2)

    def test_sparse_network_keeps_mask(self):
        """Test pruned synapses stay at zero through training"""
        resolved = validate_config(load_config(self.config, ['network.sparsity=0.5']))
        outcome = run_trial(resolved, 3)
        self.assertTrue(outcome.ok, outcome.error)
        w, mask = decode_weights(read_container(Path(outcome.run_dir) / 'network.lmsnn')[1]['WEIGHTS'])
        self.assertTrue(np.all(w[~mask] == 0.0))
        self.assertLess(mask.mean(), 1.0)

    def test_online_ngram_mode(self):
        """Test the online n-gram table is written during training and used by label"""
        config = toy_config(self.root, readout={'ngram_mode': 'online'})
        call_command('train', '--config', str(config), '--workers', '1')
        self.assertTrue((self.run_dir / 'online_ngrams.lmsnn').exists())
        call_command('label', '--checkpoint', str(self.checkpoint))
        self.assertTrue((self.run_dir / 'readout.lmsnn').exists())

    def test_invalid_config_exit_code(self):
        """Test a validation failure exits with code 1"""
        with self.assertRaises(CommandError) as cm:
            call_command('train', '--config', str(self.config), '--set', 'network.n_neurons=6')
        self.assertEqual(cm.exception.returncode, 1)
        self.assertFalse(ExperimentRun.objects.exists())

    def test_missing_checkpoint_exit_code(self):
        """Test a missing checkpoint exits with code 3"""
        with self.assertRaises(CommandError) as cm:
            call_command('label', '--checkpoint', str(self.root / 'nope' / 'network.lmsnn'))
        self.assertEqual(cm.exception.returncode, 3)

    def test_evaluate_without_label(self):
        """Test evaluating before labelling is an I/O error"""
        call_command('train', '--config', str(self.config), '--workers', '1')
        with self.assertRaises(CommandError) as cm:
            call_command('evaluate', '--checkpoint', str(self.checkpoint))
        self.assertEqual(cm.exception.returncode, 3)

    def test_export_commands(self):
        """Test filter and assignment exports have the lattice geometry"""
        call_command('train', '--config', str(self.config), '--workers', '1')
        call_command('label', '--checkpoint', str(self.checkpoint))
        filters = self.root / 'out' / 'filters.pgm'
        call_command('export_filters', '--checkpoint', str(self.checkpoint), '--output', str(filters))
        self.assertEqual(Image.open(filters).size, (9, 9))
        assignments = self.root / 'out' / 'assignments.png'
        call_command('export_assignments', '--readout', str(self.run_dir / 'readout.lmsnn'),
                     '--output', str(assignments), '--cell', '4')
        self.assertEqual(Image.open(assignments).size, (8, 8))

    def test_grid_two_cells(self):
        """Test a two-cell grid writes one row per cell with every scheme as columns"""
        config = toy_config(self.root)
        data = yaml.safe_load(config.read_text())
        data['grid'] = {'inhibition.c_max': [15.0, 20.0]}
        config.write_text(yaml.safe_dump(data))
        call_command('grid', '--config', str(config), '--workers', '1')
        rows = read_csv(self.root / 'runs' / 'toy' / 'grid.csv')
        schemes = ['all', 'confidence', 'distance', 'ngram']
        self.assertEqual(
            rows[0],
            ['inhibition.c_max'] + [f"{s}_{stat}" for s in schemes for stat in ('mean', 'std')] + ['trials', 'failures'],
        )
        self.assertEqual(len(rows), 3)
        self.assertEqual([r[0] for r in rows[1:]], ['15.0', '20.0'])
        self.assertTrue(all(r[-2:] == ['1', '0'] for r in rows[1:]))
        self.assertTrue(all(r[2] == '0.000000' for r in rows[1:]))
        self.assertEqual(ExperimentRun.objects.filter(stage='trial').count(), 2)

    def test_grid_continues_past_failures(self):
        """Test a failing cell is recorded while the other cell completes"""
        config = toy_config(self.root, readout={'schemes': ['all']})
        data = yaml.safe_load(config.read_text())
        data['grid'] = {'data.dir': [str(self.root / 'mnist'), str(self.root / 'missing')]}
        config.write_text(yaml.safe_dump(data))
        call_command('grid', '--config', str(config), '--workers', '1')
        rows = read_csv(self.root / 'runs' / 'toy' / 'grid.csv')
        self.assertEqual([tuple(r[-2:]) for r in rows[1:]], [('1', '0'), ('0', '1')])
        self.assertEqual(rows[2][1:3], ['nan', 'nan'])
        self.assertEqual(ExperimentRun.objects.filter(status='failed').count(), 1)

    def test_estimate_curve_averages_seeds(self):
        """Test averaging two convergence curves and smoothing the mean"""
        a, b = self.root / 'a.csv', self.root / 'b.csv'
        a.write_text('examples_seen,raw,smoothed\n500,0.2,0.2\n750,0.4,0.4\n')
        b.write_text('examples_seen,raw,smoothed\n500,0.4,0.4\n750,0.6,0.6\n')
        out = self.root / 'mean.csv'
        call_command('estimate_curve', '--input', str(a), str(b), '--output', str(out), '--radius', '1')
        rows = read_csv(out)
        self.assertEqual(rows[1], ['500', '0.300000', '0.400000'])
        self.assertEqual(rows[2], ['750', '0.500000', '0.400000'])
