import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from experiments.config import config_hash, deep_merge, load_config, parse_override, read_resolved
from experiments.forms import validate_config
from experiments.models import ExperimentRun, SchemeResult
from lattice_snn.exit_codes import RUNTIME, as_command_error

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """
    Shared plumbing: config flags, exception to exit-code translation and
    run-registry bookkeeping. Subclasses implement run(**options).
    """

    def add_config_arguments(self, parser):
        parser.add_argument('--config', help='YAML experiment config merged over the packaged defaults')
        parser.add_argument(
            '--set',
            dest='overrides',
            action='append',
            default=[],
            metavar='SECTION.KEY=VALUE',
            help='Override one config value (repeatable)',
        )

    def resolve_config(self, options, run_directory=None, extra_overrides=()):
        """
        Validated config from --config, or from the config.yaml frozen into
        run_directory when no --config is given, with --set applied last.
        """
        overrides = list(options.get('overrides') or []) + list(extra_overrides)
        if options.get('config') or run_directory is None:
            config = load_config(options.get('config'), overrides)
        else:
            config = read_resolved(run_directory)
            for text in overrides:
                config = deep_merge(config, parse_override(text))
        resolved = validate_config(config)
        return resolved, config_hash(resolved)

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except CommandError:
            raise
        except Exception as e:
            raise as_command_error(e) from e

    def run(self, **options):
        raise NotImplementedError

    def record(self, name, stage, outcome):
        """Store a trial outcome in the run registry; CSVs stay the source of truth."""
        try:
            run = ExperimentRun.objects.create(
                name=name,
                seed=outcome.seed,
                stage=stage,
                config_hash=outcome.config_hash,
                run_dir=outcome.run_dir,
                grid_cell=', '.join(f"{k}={v}" for k, v in outcome.cell),
                status='completed' if outcome.ok else 'failed',
                examples_seen=outcome.examples_seen,
                recomputations=outcome.recomputations,
                flagged_examples=outcome.flagged,
                error=outcome.error,
            )
            for scheme, accuracy in outcome.accuracies.items():
                SchemeResult.objects.create(run=run, scheme=scheme, accuracy=accuracy)
            return run
        except DatabaseError as e:
            logger.warning(f"Run registry unavailable ({e}); run 'manage.py migrate' to enable it")
            return None

    def report(self, outcome):
        if outcome.ok:
            scores = ', '.join(f"{s}={100 * a:.2f}%" for s, a in outcome.accuracies.items())
            self.stdout.write(self.style.SUCCESS(f"seed {outcome.seed}: done in {outcome.run_dir} {scores}".rstrip()))
        else:
            self.stdout.write(self.style.ERROR(f"seed {outcome.seed}: {outcome.error}"))

    def fail_if_any(self, outcomes):
        failed = [o for o in outcomes if not o.ok]
        if failed:
            raise CommandError(
                f"{len(failed)} of {len(outcomes)} run(s) failed: {failed[0].error}",
                returncode=failed[0].exit_code or RUNTIME,
            )


def run_directory_of(path):
    return Path(path).resolve().parent
