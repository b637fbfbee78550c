import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from lattice_snn.exceptions import InputDataError

from .loaders import IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC, Dataset, load_frames, load_idx, write_idx
from .services import make_sparsity_mask, rebalance


def toy_dataset(count=20, n_classes=4, side=3, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(count, side * side)) / 255.0
    labels = np.arange(count) % n_classes
    return Dataset(images, labels, n_classes, side, side)


class IdxTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_then_load_preserves_pixels(self):
        """Test an IDX pair written to disk loads back with the same pixels and labels"""
        data = toy_dataset()
        write_idx(data, self.dir / 'img', self.dir / 'lbl')
        loaded = load_idx(self.dir / 'img', self.dir / 'lbl', n_classes=4)
        self.assertEqual(len(loaded), 20)
        self.assertEqual((loaded.height, loaded.width), (3, 3))
        np.testing.assert_allclose(loaded.images, data.images, atol=1e-12)
        np.testing.assert_array_equal(loaded.labels, data.labels)

    def test_bad_magic_reports_offset(self):
        """Test a wrong magic number is reported at byte offset 0"""
        (self.dir / 'img').write_bytes(struct.pack('>IIII', 0x1234, 1, 1, 1) + b'\x00')
        (self.dir / 'lbl').write_bytes(struct.pack('>II', IDX_LABEL_MAGIC, 1) + b'\x00')
        with self.assertRaisesRegex(InputDataError, 'byte offset 0'):
            load_idx(self.dir / 'img', self.dir / 'lbl')

    def test_truncated_pixels(self):
        """Test truncated pixel data names the offset where the file ends"""
        (self.dir / 'img').write_bytes(struct.pack('>IIII', IDX_IMAGE_MAGIC, 2, 2, 2) + b'\x00' * 5)
        (self.dir / 'lbl').write_bytes(struct.pack('>II', IDX_LABEL_MAGIC, 2) + b'\x00\x01')
        with self.assertRaisesRegex(InputDataError, 'byte offset 21'):
            load_idx(self.dir / 'img', self.dir / 'lbl')

    def test_count_mismatch(self):
        """Test image and label counts must agree"""
        (self.dir / 'img').write_bytes(struct.pack('>IIII', IDX_IMAGE_MAGIC, 1, 1, 1) + b'\x00')
        (self.dir / 'lbl').write_bytes(struct.pack('>II', IDX_LABEL_MAGIC, 2) + b'\x00\x01')
        with self.assertRaises(InputDataError):
            load_idx(self.dir / 'img', self.dir / 'lbl')

    def test_missing_file(self):
        """Test a missing file is an input data error"""
        with self.assertRaises(InputDataError):
            load_idx(self.dir / 'nope', self.dir / 'nope2')


class FrameManifestTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _frame(self, name, value, size=(4, 4), mode='L'):
        Image.new(mode, size, value if mode == 'L' else (value, value, value)).save(self.dir / name)

    def test_load_pgm_and_png_frames(self):
        """Test a manifest of PGM and PNG frames loads with relative paths"""
        self._frame('a.pgm', 255)
        self._frame('b.png', 0)
        (self.dir / 'train.csv').write_text('path,label\na.pgm,1\nb.png,0\n')
        data = load_frames(self.dir / 'train.csv')
        self.assertEqual(len(data), 2)
        self.assertEqual(data.n_classes, 2)
        self.assertEqual(data.n_input, 16)
        self.assertTrue(np.all(data.images[0] == 1.0))
        self.assertTrue(np.all(data.images[1] == 0.0))

    def test_rgb_frame_rejected(self):
        """Test frames must be 8-bit grayscale"""
        self._frame('c.png', 10, mode='RGB')
        (self.dir / 'm.csv').write_text('path,label\nc.png,0\n')
        with self.assertRaisesRegex(InputDataError, 'row 2'):
            load_frames(self.dir / 'm.csv')

    def test_mismatched_sizes_rejected(self):
        """Test all frames in a manifest share one size"""
        self._frame('a.png', 1)
        self._frame('b.png', 1, size=(5, 5))
        (self.dir / 'm.csv').write_text('path,label\na.png,0\nb.png,1\n')
        with self.assertRaisesRegex(InputDataError, 'row 3'):
            load_frames(self.dir / 'm.csv')

    def test_bad_header(self):
        """Test manifest needs a path,label header"""
        (self.dir / 'm.csv').write_text('file,class\nx.png,0\n')
        with self.assertRaises(InputDataError):
            load_frames(self.dir / 'm.csv')


class RebalanceTests(SimpleTestCase):
    def test_equal_class_counts(self):
        """Test rebalancing draws the same number from each class"""
        data = toy_dataset(count=22, n_classes=4)
        balanced = rebalance(data, per_class=7, seed=3)
        self.assertEqual(len(balanced), 28)
        np.testing.assert_array_equal(np.bincount(balanced.labels, minlength=4), [7, 7, 7, 7])

    def test_without_replacement_limit(self):
        """Test sampling without replacement cannot exceed the smallest class"""
        data = toy_dataset(count=8, n_classes=4)
        with self.assertRaises(InputDataError):
            rebalance(data, per_class=3, seed=0, replace=False)

    def test_deterministic(self):
        """Test the same seed gives the same draw"""
        data = toy_dataset()
        a = rebalance(data, 5, seed=9)
        b = rebalance(data, 5, seed=9)
        np.testing.assert_array_equal(a.images, b.images)


class SparsityMaskTests(SimpleTestCase):
    def test_keep_fraction(self):
        """Test roughly 1 - sparsity of synapses survive"""
        mask = make_sparsity_mask(784, 100, 0.5, seed=1)
        self.assertEqual(mask.mask.shape, (784, 100))
        self.assertAlmostEqual(mask.kept, 0.5, delta=0.01)

    def test_bounds(self):
        """Test sparsity outside [0, 1] is rejected"""
        with self.assertRaises(InputDataError):
            make_sparsity_mask(4, 4, 1.5, seed=0)

    def test_zero_sparsity_keeps_all(self):
        """Test sparsity 0 keeps every synapse"""
        self.assertTrue(make_sparsity_mask(10, 10, 0.0, seed=0).mask.all())
