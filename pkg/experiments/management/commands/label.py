from experiments.management.base import ExperimentCommand, run_directory_of
from experiments.services import TrialOutcome, label_network, load_data, restore_network


class Command(ExperimentCommand):
    help = 'Fit neuron labels and the n-gram table on the labelling subset with frozen weights'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='network.lmsnn written by train')
        self.add_config_arguments(parser)

    def run(self, **options):
        directory = run_directory_of(options['checkpoint'])
        config, digest = self.resolve_config(options, run_directory=directory)
        train_set, _ = load_data(config)
        arch, metadata = restore_network(config, options['checkpoint'])
        seed = int(metadata.get('seed', 0))

        assign, table = label_network(config, arch, train_set, directory, digest, seed=seed)
        outcome = TrialOutcome(seed=seed, run_dir=str(directory), config_hash=digest)
        outcome.examples_seen = arch.examples_seen
        self.record(config['run']['name'], 'label', outcome)
        assigned = int(assign.assigned.sum())
        self.stdout.write(self.style.SUCCESS(
            f"Labelled {assigned}/{assign.n_neurons} neurons; "
            f"{len(table.counts)} {table.n}-gram windows written to {directory}"
        ))
