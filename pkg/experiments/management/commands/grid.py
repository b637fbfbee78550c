from django.conf import settings
from django.core.management.base import CommandError

from experiments.management.base import ExperimentCommand
from experiments.services import run_grid
from lattice_snn.exit_codes import RUNTIME


class Command(ExperimentCommand):
    help = 'Run the full pipeline for every grid cell and seed; writes grid.csv with mean and std per cell'

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument('--workers', type=int, default=None, help='Worker processes (default LMSNN_WORKERS)')

    def run(self, **options):
        config, _ = self.resolve_config(options)
        if not config.get('grid'):
            raise CommandError("The config has no 'grid' section", returncode=1)
        workers = options['workers'] or settings.WORKERS

        rows, outcomes = run_grid(config, workers)
        for outcome in outcomes:
            self.record(config['run']['name'], 'trial', outcome)
        for values, stats, trials, failures in rows:
            cell = ', '.join(str(v) for v in values)
            if not trials:
                self.stdout.write(self.style.WARNING(f"({cell}) no successful trials"))
                continue
            scores = ', '.join(f"{s}={100 * m:.2f}% ± {100 * d:.2f}" for s, (m, d) in stats.items())
            self.stdout.write(f"({cell}) {scores} over {trials}")

        failed = sum(1 for o in outcomes if not o.ok)
        if failed == len(outcomes):
            raise CommandError(f"All {failed} grid trials failed", returncode=RUNTIME)
        if failed:
            self.stdout.write(self.style.WARNING(f"{failed} of {len(outcomes)} trials failed; see grid.csv"))
        self.stdout.write(self.style.SUCCESS(f"Grid finished: {len(outcomes) - failed} trials"))
