from experiments.management.base import ExperimentCommand, run_directory_of
from experiments.services import (
    TrialOutcome,
    evaluate_network,
    load_data,
    load_readout_for,
    restore_network,
    summarize_seeds,
)


class Command(ExperimentCommand):
    help = (
        'Classify the test set under every configured scheme; writes results and confusion CSVs '
        'and refreshes the mean over every evaluated seed'
    )

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='network.lmsnn written by train')
        parser.add_argument('--readout', help='readout.lmsnn written by label (default: next to the checkpoint)')
        self.add_config_arguments(parser)

    def run(self, **options):
        directory = run_directory_of(options['checkpoint'])
        config, digest = self.resolve_config(options, run_directory=directory)
        _, test_set = load_data(config)
        arch, metadata = restore_network(config, options['checkpoint'])
        assign, table = load_readout_for(options['checkpoint'], options['readout'])
        seed = int(metadata.get('seed', 0))

        accuracies = evaluate_network(config, arch, assign, table, test_set, directory, seed)
        outcome = TrialOutcome(seed=seed, run_dir=str(directory), config_hash=digest, accuracies=accuracies)
        outcome.examples_seen = arch.examples_seen
        self.record(config['run']['name'], 'test', outcome)
        for scheme, value in accuracies.items():
            self.stdout.write(self.style.SUCCESS(f"{scheme}: {100 * value:.2f}%"))

        summarised = summarize_seeds(config)
        if summarised > 1:
            self.stdout.write(f"Mean over {summarised} seeds written to {directory.parent}")
