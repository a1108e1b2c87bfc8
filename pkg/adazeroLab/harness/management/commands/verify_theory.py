import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from theory.cases import entropy_monotonicity_scan
from theory.sweeps import lemma1_sweep, theorem2_suite

from ..errors import command_errors


class Command(BaseCommand):
    help = "Numerically verify the entropy lemma, the three mastery regimes and binary-entropy monotonicity."

    def add_arguments(self, parser):
        parser.add_argument('--samples', type=int, help="specs checked by the lemma sweep")
        parser.add_argument('--seed', type=int)
        parser.add_argument('--workers', type=int, default=1)
        parser.add_argument('--case-samples', type=int, default=1000, help="specs checked per regime")
        parser.add_argument('--grid-points', type=int, default=999)
        parser.add_argument('--output', help="also write the JSON report here")

    def handle(self, *args, **options):
        with command_errors():
            lemma = lemma1_sweep(samples=options['samples'], seed=options['seed'], workers=options['workers'])
            cases = theorem2_suite(samples=options['case_samples'], seed=options['seed'])
            monotonicity = entropy_monotonicity_scan(options['grid_points'])
        report = {
            'lemma': lemma.as_dict(),
            'cases': cases.as_dict(),
            'monotonicity': monotonicity.as_dict(),
        }
        text = json.dumps(report, indent=2)
        if options['output']:
            Path(options['output']).write_text(text)
        self.stdout.write(text)
        failed = [name for name, part in report.items() if not part['passed']]
        if failed:
            raise CommandError(f"theory checks failed: {', '.join(failed)}")
        self.stdout.write(self.style.SUCCESS("all theory checks passed"))
