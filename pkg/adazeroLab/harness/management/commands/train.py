from django.core.management.base import BaseCommand

from harness.serializers import load_run_config
from harness.training import train

from ..errors import command_errors


class Command(BaseCommand):
    help = "Train one run per seed from a TOML run config (or the config.json echo of an earlier run)."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help="path to the run config")
        parser.add_argument('--seed', type=int, nargs='+', help="seeds to run; defaults to [run].seeds")
        parser.add_argument('--output-dir', help="overrides [run].output_dir")
        parser.add_argument('--overwrite', action='store_true', help="replace existing run directories")

    def handle(self, *args, **options):
        with command_errors():
            config = load_run_config(options['config'])
            seeds = options['seed'] or list(config.run.seeds)
            for seed in seeds:
                runlog = train(config, seed, output_dir=options['output_dir'], overwrite=options['overwrite'])
                self.stdout.write(self.style.SUCCESS(
                    f"{config.run.name} seed {seed}: coverage {runlog.summary['coverage']}, "
                    f"success {runlog.summary['success_rate']}, hash {runlog.summary['run_hash'][:12]} -> {runlog.run_dir}"
                ))
