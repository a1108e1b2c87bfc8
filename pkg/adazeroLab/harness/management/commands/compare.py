from django.core.management.base import BaseCommand

from harness.compare import compare_runs, coverage_ordering, summarize_runs
from harness.runlog import RunLog

from ..errors import command_errors


class Command(BaseCommand):
    help = "Per-step medians across seeds for each variant, with differences from a baseline variant."

    def add_arguments(self, parser):
        parser.add_argument('run_dirs', nargs='+')
        parser.add_argument('--baseline', help="variant to diff against; defaults to the first run's")
        parser.add_argument('--output', default='comparison.csv')

    def handle(self, *args, **options):
        with command_errors():
            runlogs = [RunLog.load(path) for path in options['run_dirs']]
            table = compare_runs(runlogs, baseline=options['baseline'])
            table.to_csv(options['output'], index=False)
            self.stdout.write(f"{len(table)} rows -> {options['output']}")
            if all(log.summary for log in runlogs):
                summary = summarize_runs(runlogs)
                self.stdout.write(summary.to_string(index=False))
                ordering = coverage_ordering(summary)
                if ordering is not None:
                    self.stdout.write(f"coverage adazero > no_adaptive > no_intrinsic: {ordering}")
