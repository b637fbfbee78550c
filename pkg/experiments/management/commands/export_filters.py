import math
from pathlib import Path

import numpy as np

from experiments.exporters import export_filters
from experiments.management.base import ExperimentCommand
from lattice_snn.exceptions import StructuralError
from network.checkpoint import decode_weights, read_container


class Command(ExperimentCommand):
    help = 'Write the learned input weights as a tiled grayscale filter map (PGM or PNG)'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--output', help='Image path; format follows the suffix (default filters.pgm beside the checkpoint)')
        parser.add_argument('--height', type=int)
        parser.add_argument('--width', type=int)

    def run(self, **options):
        metadata, sections = read_container(options['checkpoint'])
        w, _ = decode_weights(sections['WEIGHTS'])
        height = options['height'] or int(metadata.get('height') or 0)
        width = options['width'] or int(metadata.get('width') or 0)
        if not height or not width:
            side = math.isqrt(w.shape[0])
            if side * side != w.shape[0]:
                raise StructuralError(f"{w.shape[0]} inputs are not square; pass --height and --width")
            height = width = side
        output = Path(options['output'] or Path(options['checkpoint']).parent / 'filters.pgm')
        export_filters(output, np.asarray(w), height, width)
        self.stdout.write(self.style.SUCCESS(f"Wrote {w.shape[1]} filters to {output}"))
