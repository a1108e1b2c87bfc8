from pathlib import Path

from django.core.management.base import BaseCommand

from harness.plotting import plot_curves, plot_density
from harness.runlog import RunLog

from ..errors import command_errors


class Command(BaseCommand):
    help = "Render a run's visit-density heatmap, with the greedy path overlaid when the run logged one."

    def add_arguments(self, parser):
        parser.add_argument('run_dir')
        parser.add_argument('--update', type=int, help="plot the snapshot taken at this update instead of the final density")
        parser.add_argument('--curves', action='store_true', help="also write curves.png (entropy, r_int, alpha)")
        parser.add_argument('--output', help="heatmap path; defaults to <run_dir>/density.png")

    def handle(self, *args, **options):
        with command_errors():
            runlog = RunLog.load(options['run_dir'])
            key = 'final' if options['update'] is None else f"update_{options['update']:05d}"
            density = runlog.density(key)
            target = Path(options['output']) if options['output'] else runlog.run_dir / (
                'density.png' if key == 'final' else f'density_{key}.png'
            )
            path = runlog.summary.get('greedy_path', {}).get('cells') if key == 'final' else None
            plot = plot_density(density, target, path_cells=path)
            self.stdout.write(f"coverage {plot.coverage} cells -> {plot.raster}")
            if plot.overlay:
                self.stdout.write(f"path overlay -> {plot.overlay}")
            if options['curves']:
                curves = plot_curves(runlog.metrics, runlog.run_dir / 'curves.png')
                self.stdout.write(f"curves -> {curves}")
