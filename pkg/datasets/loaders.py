"""
Dataset ingestion: MNIST IDX files and manifest-listed grayscale frames.
"""
import csv
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from lattice_snn.exceptions import InputDataError

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    height: int
    width: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise InputDataError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.images.ndim != 2 or self.images.shape[1] != self.height * self.width:
            raise InputDataError(
                f"Images of shape {self.images.shape} do not match {self.height}x{self.width}"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InputDataError(f"Labels outside [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def n_input(self):
        return self.height * self.width

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.n_classes, self.height, self.width)

    def head(self, count):
        return self.subset(np.arange(min(count, len(self))))

    def tail(self, count):
        return self.subset(np.arange(max(len(self) - count, 0), len(self)))


def _read_header(data, path, fields, magic):
    needed = 4 * (1 + fields)
    if len(data) < needed:
        raise InputDataError(f"{path}: truncated IDX header at byte offset {len(data)} (need {needed})")
    values = struct.unpack_from('>' + 'I' * (1 + fields), data, 0)
    if values[0] != magic:
        raise InputDataError(
            f"{path}: bad magic 0x{values[0]:08x} at byte offset 0, expected 0x{magic:08x}"
        )
    return values[1:], needed


def load_idx(images_path, labels_path, n_classes=10):
    """Parse a big-endian IDX image/label pair; pixels scaled by 1/255."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    for path in (images_path, labels_path):
        if not path.exists():
            raise InputDataError(f"Missing IDX file {path}")
    image_bytes = images_path.read_bytes()
    label_bytes = labels_path.read_bytes()

    (count, rows, cols), offset = _read_header(image_bytes, images_path, 3, IDX_IMAGE_MAGIC)
    expected = offset + count * rows * cols
    if len(image_bytes) < expected:
        raise InputDataError(
            f"{images_path}: truncated pixel data at byte offset {len(image_bytes)}, expected {expected}"
        )
    (label_count,), label_offset = _read_header(label_bytes, labels_path, 1, IDX_LABEL_MAGIC)
    if len(label_bytes) < label_offset + label_count:
        raise InputDataError(
            f"{labels_path}: truncated labels at byte offset {len(label_bytes)}, "
            f"expected {label_offset + label_count}"
        )
    if label_count != count:
        raise InputDataError(
            f"{labels_path}: count {label_count} at byte offset 4 does not match "
            f"{count} images in {images_path}"
        )

    pixels = np.frombuffer(image_bytes, dtype=np.uint8, count=count * rows * cols, offset=offset)
    labels = np.frombuffer(label_bytes, dtype=np.uint8, count=count, offset=label_offset).astype(np.int64)
    logger.info(f"Loaded {count} images of {rows}x{cols} from {images_path}")
    return Dataset(pixels.reshape(count, rows * cols) / 255.0, labels, n_classes, rows, cols)


def write_idx(dataset, images_path, labels_path):
    """Serialise a dataset back to an IDX pair (pixels rounded to bytes)."""
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8)
    with open(images_path, 'wb') as f:
        f.write(struct.pack('>IIII', IDX_IMAGE_MAGIC, len(dataset), dataset.height, dataset.width))
        f.write(pixels.tobytes())
    with open(labels_path, 'wb') as f:
        f.write(struct.pack('>II', IDX_LABEL_MAGIC, len(dataset)))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def load_mnist(data_dir, split='train'):
    tag = 'train' if split == 'train' else 't10k'
    data_dir = Path(data_dir)
    return load_idx(data_dir / f"{tag}-images-idx3-ubyte", data_dir / f"{tag}-labels-idx1-ubyte")


def _read_frame(path, row_number):
    try:
        with Image.open(path) as img:
            if img.mode != 'L':
                raise InputDataError(f"Manifest row {row_number}: {path} is mode {img.mode}, expected 8-bit grayscale")
            return np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as e:
        raise InputDataError(f"Manifest row {row_number}: cannot read {path}: {e}") from e


def load_frames(manifest_path, n_classes=None):
    """
    Load frames listed in a CSV manifest with header `path,label`.
    Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise InputDataError(f"Missing manifest {manifest_path}")
    with open(manifest_path, newline='', encoding='utf-8') as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise InputDataError(f"{manifest_path}: manifest has no rows")
    if 'path' not in rows[0] or 'label' not in rows[0]:
        raise InputDataError(f"{manifest_path}: header must be 'path,label'")

    frames, labels = [], []
    shape = None
    for row_number, row in enumerate(rows, start=2):
        frame_path = Path(row['path'])
        if not frame_path.is_absolute():
            frame_path = manifest_path.parent / frame_path
        frame = _read_frame(frame_path, row_number)
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise InputDataError(
                f"Manifest row {row_number}: {frame_path} is {frame.shape[0]}x{frame.shape[1]}, "
                f"expected {shape[0]}x{shape[1]}"
            )
        try:
            labels.append(int(row['label']))
        except ValueError as e:
            raise InputDataError(f"Manifest row {row_number}: bad label {row['label']!r}") from e
        frames.append(frame.ravel())

    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    images = np.stack(frames).astype(np.float64) / 255.0
    logger.info(f"Loaded {len(labels)} frames of {shape[0]}x{shape[1]} from {manifest_path}")
    return Dataset(images, labels, n_classes, shape[0], shape[1])
