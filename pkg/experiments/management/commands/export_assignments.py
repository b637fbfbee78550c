from pathlib import Path

from experiments.exporters import export_assignments
from experiments.management.base import ExperimentCommand
from readout.serialization import load_readout


class Command(ExperimentCommand):
    help = 'Write the class assignment of every neuron as a coloured lattice image'

    def add_arguments(self, parser):
        parser.add_argument('--readout', required=True, help='readout.lmsnn written by label')
        parser.add_argument('--output', help='Image path (default assignments.png beside the readout)')
        parser.add_argument('--cell', type=int, default=8, help='Pixels per neuron')

    def run(self, **options):
        _, assign, _ = load_readout(options['readout'])
        output = Path(options['output'] or Path(options['readout']).parent / 'assignments.png')
        export_assignments(output, assign.labels, assign.n_classes, options['cell'])
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {int(assign.assigned.sum())}/{assign.n_neurons} assigned neurons to {output}"
        ))
