"""
Image artifacts: tiled filter maps and class-assignment maps.
"""
import logging
from pathlib import Path

import numpy as np
from PIL import Image, ImageColor

from lattice_snn.exceptions import ArtifactIOError, StructuralError
from readout.labeling import UNASSIGNED

logger = logging.getLogger(__name__)

SEPARATOR = 255
UNASSIGNED_COLOR = (128, 128, 128)


def tile_filters(weights, height, width):
    """
    Lay out each neuron's incoming weight column as a height x width tile,
    in lattice order, with 1-px separators. Each tile is min-max scaled to
    0..255 on its own; a constant tile is black.
    """
    n_input, n_neurons = weights.shape
    if n_input != height * width:
        raise StructuralError(f"{n_input} inputs cannot be shown as {height}x{width} tiles")
    side = int(round(n_neurons ** 0.5))
    if side * side != n_neurons:
        raise StructuralError(f"{n_neurons} neurons do not form a square lattice")

    canvas = np.full((side * (height + 1) - 1, side * (width + 1) - 1), SEPARATOR, dtype=np.uint8)
    for i in range(n_neurons):
        tile = weights[:, i].reshape(height, width)
        lo, hi = tile.min(), tile.max()
        scaled = np.zeros_like(tile) if hi <= lo else (tile - lo) / (hi - lo)
        row, col = divmod(i, side)
        top, left = row * (height + 1), col * (width + 1)
        canvas[top:top + height, left:left + width] = np.rint(scaled * 255.0).astype(np.uint8)
    return canvas


def class_colors(n_classes):
    return [ImageColor.getrgb(f"hsl({int(360 * c / n_classes)}, 80%, 50%)") for c in range(n_classes)]


def assignment_map(labels, n_classes, cell=8):
    """RGB image with one cell x cell block per neuron, coloured by class."""
    labels = np.asarray(labels)
    side = int(round(labels.size ** 0.5))
    if side * side != labels.size:
        raise StructuralError(f"{labels.size} neurons do not form a square lattice")
    palette = np.array(class_colors(n_classes) + [UNASSIGNED_COLOR], dtype=np.uint8)
    index = np.where(labels == UNASSIGNED, n_classes, labels).reshape(side, side)
    grid = palette[index]
    return np.kron(grid, np.ones((cell, cell, 1), dtype=np.uint8))


def save_image(path, pixels):
    """Write pixels with Pillow; the format follows the suffix (.pgm, .png, ...)."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(pixels).save(path)
    except (OSError, KeyError, ValueError) as e:
        raise ArtifactIOError(f"Cannot write image {path}: {e}") from e
    logger.info(f"Wrote {path} ({pixels.shape[1]}x{pixels.shape[0]})")
    return path


def export_filters(path, weights, height, width):
    return save_image(path, tile_filters(weights, height, width))


def export_assignments(path, labels, n_classes, cell=8):
    return save_image(path, assignment_map(labels, n_classes, cell))
