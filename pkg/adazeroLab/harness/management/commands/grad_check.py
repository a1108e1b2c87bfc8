import json

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from harness.diagnostics import network_grad_checks

from ..errors import command_errors


class Command(BaseCommand):
    help = "Compare backward passes of the autoencoder, evaluator and policy against central differences."

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--samples-per-block', type=int)
        parser.add_argument('--tolerance', type=float)

    def handle(self, *args, **options):
        tolerance = options['tolerance'] or settings.ADAZERO_GRAD_CHECK['tolerance']
        with command_errors():
            reports = network_grad_checks(seed=options['seed'], samples_per_block=options['samples_per_block'])
        self.stdout.write(json.dumps({name: report.as_dict() for name, report in reports.items()}, indent=2))
        failed = [name for name, report in reports.items() if not report.passed(tolerance)]
        if failed:
            raise CommandError(f"gradient check above {tolerance:g} for: {', '.join(failed)}")
        self.stdout.write(self.style.SUCCESS(f"all networks within {tolerance:g}"))
