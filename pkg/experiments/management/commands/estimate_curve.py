import numpy as np

from evaluation.convergence import ConvergenceCurve, EstimatePoint, smooth
from evaluation.reports import read_csv, write_curve_csv
from experiments.management.base import ExperimentCommand
from lattice_snn.exceptions import InputDataError


def read_curve(path):
    rows = read_csv(path)
    if not rows or rows[0][:2] != ['examples_seen', 'raw']:
        raise InputDataError(f"{path}: not a convergence CSV")
    return [(int(r[0]), float(r[1])) for r in rows[1:]]


class Command(ExperimentCommand):
    help = 'Re-smooth one convergence curve, or average several (e.g. one per seed) and smooth the mean'

    def add_arguments(self, parser):
        parser.add_argument('--input', nargs='+', required=True, help='convergence.csv file(s)')
        parser.add_argument('--output', required=True)
        parser.add_argument('--radius', type=int, default=10, help='Neighbours on each side')

    def run(self, **options):
        curves = [read_curve(path) for path in options['input']]
        steps = [x for x, _ in curves[0]]
        for path, curve in zip(options['input'][1:], curves[1:]):
            if [x for x, _ in curve] != steps:
                raise InputDataError(f"{path}: estimate points differ from {options['input'][0]}")
        if not steps:
            raise InputDataError('Convergence curve has no points')

        mean = np.mean([[y for _, y in curve] for curve in curves], axis=0)
        points = [EstimatePoint(x, float(y)) for x, y in zip(steps, mean)]
        curve = ConvergenceCurve(points, smooth(mean, options['radius']).tolist())
        write_curve_csv(options['output'], curve)
        self.stdout.write(self.style.SUCCESS(
            f"Smoothed {len(points)} points from {len(curves)} curve(s) into {options['output']}"
        ))
