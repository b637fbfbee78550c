from django.conf import settings

from experiments.management.base import ExperimentCommand
from experiments.services import run_many, train_trial


class Command(ExperimentCommand):
    help = 'Train one network per seed; writes checkpoints, training logs, convergence curves and filter maps'

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument('--seed', type=int, action='append', help='Train only these seeds (repeatable)')
        parser.add_argument('--workers', type=int, default=None, help='Worker processes (default LMSNN_WORKERS)')

    def run(self, **options):
        extra = []
        if options['seed']:
            extra.append(f"run.seeds={options['seed']}")
        config, digest = self.resolve_config(options, extra_overrides=extra)
        seeds = config['run']['seeds']
        workers = options['workers'] or settings.WORKERS

        self.stdout.write(f"Training {len(seeds)} seed(s) of '{config['run']['name']}' (config {digest[:12]})")
        outcomes = run_many(train_trial, [(config, seed) for seed in seeds], workers)
        for outcome in outcomes:
            self.record(config['run']['name'], 'train', outcome)
            self.report(outcome)
        self.fail_if_any(outcomes)
