import io
import json
import math
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from rest_framework import serializers

from adazeroLab.exceptions import HarnessError
from envs.density import VisitDensity
from harness.compare import compare_runs, coverage_ordering, entropy_intrinsic_alignment, summarize_runs
from harness.diagnostics import network_grad_checks
from harness.plotting import density_raster, plot_curves, plot_density
from harness.runlog import METRIC_COLUMNS, RunLog, RunWriter
from harness.serializers import load_run_config, parse_run_config
from harness.training import train

TINY_CONFIG = """
[run]
name = "tiny"
variant = "{variant}"
seeds = [0]
total_steps = 64
checkpoint_every = 2
density_every = 1
alignment_window = 1

[env]
name = "{env}"
size = 6
max_episode_steps = 20

[ppo]
horizon = 16
minibatch = 8
epochs = 1
conv_filters = [4]
hidden = 8

[autoencoder]
conv_filters = [4]
bottleneck = 8
batch_size = 16

[evaluator]
conv_filters = [4]
batch_size = 16
"""


def tiny_document(variant='adazero', env='dark_chamber', output_dir=None):
    document = {
        'run': {'name': 'tiny', 'variant': variant, 'total_steps': 64, 'checkpoint_every': 2,
                'density_every': 1, 'alignment_window': 1},
        'env': {'name': env, 'size': 6, 'max_episode_steps': 20},
        'ppo': {'horizon': 16, 'minibatch': 8, 'epochs': 1, 'conv_filters': [4], 'hidden': 8},
        'autoencoder': {'conv_filters': [4], 'bottleneck': 8, 'batch_size': 16},
        'evaluator': {'conv_filters': [4], 'batch_size': 16},
    }
    if output_dir is not None:
        document['run']['output_dir'] = str(output_dir)
    return document


def metrics_frame(steps=(10, 20, 30), **columns):
    frame = pd.DataFrame({column: np.zeros(len(steps)) for column in METRIC_COLUMNS})
    frame['step'] = list(steps)
    frame['update'] = np.arange(1, len(steps) + 1)
    for column, values in columns.items():
        frame[column] = values
    return frame


def fake_log(variant, metrics, summary=None, name='run'):
    return RunLog(Path(name), {'run': {'variant': variant}}, metrics, summary or {})


class RunConfigTestCase(SimpleTestCase):
    """
    Strict parsing of run configs.
    """

    def test_defaults_are_filled(self):
        config = parse_run_config({'run': {'total_steps': 100}, 'env': {'name': 'dark_chamber'}})
        self.assertEqual(config.run.variant, 'adazero')
        self.assertIsNone(config.run.forced_alpha)
        self.assertEqual(config.run.checkpoint_every, 50, "Testing: cadence comes from settings.")
        self.assertEqual(config.ppo.gamma, 0.99)
        self.assertEqual(config.ppo.clip_eps, 0.2)
        self.assertEqual(config.ppo.lr, 3e-4, "Testing: unset learning rates fall back to [adam].lr.")
        self.assertEqual(config.autoencoder.conv_filters, (8, 16))
        self.assertEqual(config.adam.beta2, 0.999)

    def test_evaluator_schedule_defaults(self):
        """
        Test that the evaluator keeps its own decaying step size unless the run overrides it.
        """
        # Precondition assertion
        config = parse_run_config(tiny_document())
        self.assertEqual(config.evaluator.lr, 1e-2, "Precondition: evaluator lr comes from settings, not [adam].")
        self.assertEqual(config.evaluator.lr_half_life, 25.0, "Precondition: half-life comes from settings.")
        # Testing assertion
        document = tiny_document()
        document['evaluator']['lr_half_life'] = 0.0
        document['evaluator']['lr'] = 1e-3
        config = parse_run_config(document)
        self.assertEqual((config.evaluator.lr, config.evaluator.lr_half_life), (1e-3, 0.0),
                         "Testing: explicit values win, and 0 disables the decay.")

    def test_variants_force_mastery(self):
        for variant, alpha in (('adazero', None), ('no_adaptive', 0.0), ('no_intrinsic', 1.0)):
            config = parse_run_config(tiny_document(variant))
            self.assertEqual(config.run.forced_alpha, alpha)

    def test_unknown_keys_are_fatal(self):
        document = tiny_document()
        document['ppo']['clip_epsilon'] = 0.1
        with self.assertRaises(serializers.ValidationError):
            parse_run_config(document)
        document = tiny_document()
        document['extras'] = {}
        with self.assertRaises(serializers.ValidationError):
            parse_run_config(document)

    def test_invalid_values_rejected(self):
        for section, key, value in (('run', 'variant', 'no_mastery'), ('run', 'total_steps', 0), ('ppo', 'gamma', 1.0)):
            document = tiny_document()
            document[section][key] = value
            with self.assertRaises(serializers.ValidationError, msg=f"{section}.{key}={value!r}"):
                parse_run_config(document)

    def test_custom_grid_needs_a_file(self):
        with self.assertRaises(serializers.ValidationError):
            parse_run_config({'run': {'total_steps': 10}, 'env': {'name': 'custom'}})

    def test_custom_grid_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            grid = Path(tmp) / 'corridor.toml'
            grid.write_text('[grid]\nname = "corridor"\nlayout = """\nS..G\n"""\nmax_episode_steps = 9\n')
            config = parse_run_config({'run': {'total_steps': 10}, 'env': {'name': 'custom', 'grid_file': str(grid), 'max_episode_steps': 4}})
            spec = config.env.build_spec()
        self.assertEqual(spec.name, 'corridor')
        self.assertEqual(spec.goal, (0, 3))
        self.assertEqual(spec.max_episode_steps, 4, "Testing: the run config overrides the grid's limit.")

    def test_toml_and_echo_agree(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'tiny.toml'
            path.write_text(TINY_CONFIG.format(variant='no_adaptive', env='dark_chamber'))
            config = load_run_config(path)
            echo = Path(tmp) / 'config.json'
            echo.write_text(json.dumps(config.to_dict()))
            again = load_run_config(echo)
        self.assertEqual(config, again)
        self.assertEqual(config.config_hash, again.config_hash)

    def test_shipped_configs_parse(self):
        paths = sorted(Path(settings.ADAZERO_CONFIG_DIR).glob('*.toml'))
        self.assertGreaterEqual(len(paths), 6, "Precondition: the example configs are present.")
        for path in paths:
            spec = load_run_config(path).env.build_spec()
            self.assertGreater(spec.height * spec.width, len(spec.walls), path.name)

    def test_missing_file(self):
        with self.assertRaises(HarnessError):
            load_run_config('/nonexistent/run.toml')


class TrainingTestCase(SimpleTestCase):
    """
    Short end-to-end runs on a 6x6 chamber.
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_variant(self, variant='adazero', env='dark_chamber', name='a'):
        config = parse_run_config(tiny_document(variant, env))
        return train(config, seed=0, output_dir=self.root / name)

    def test_run_directory_contents(self):
        runlog = self.run_variant()
        for name in ('config.json', 'metrics.csv', 'rewards.csv', 'density.npz', 'density.csv', 'summary.json'):
            self.assertTrue((runlog.run_dir / name).exists(), name)
        self.assertTrue((runlog.run_dir / 'checkpoints' / 'update_00002' / 'trunk.npz').exists())
        self.assertEqual(list(runlog.metrics.columns), METRIC_COLUMNS)
        self.assertEqual(len(runlog.metrics), 4, "Testing: 64 steps in rollouts of 16.")
        self.assertTrue(runlog.metrics['step'].is_monotonic_increasing)
        self.assertEqual(runlog.metrics['step'].iloc[-1], 64)
        self.assertEqual(len(runlog.rewards()), 64)
        self.assertEqual(runlog.density().total_steps, 64)
        self.assertEqual(runlog.summary['coverage'], runlog.density().coverage())
        self.assertIn('update_00004', runlog.density_keys())

    def test_no_intrinsic_keeps_extrinsic_reward(self):
        rewards = self.run_variant('no_intrinsic').rewards()
        self.assertTrue((rewards['alpha'] == 1.0).all())
        self.assertTrue(np.array_equal(rewards['r_total'].to_numpy(), rewards['r_ext'].to_numpy()))

    def test_no_adaptive_adds_the_whole_bonus(self):
        rewards = self.run_variant('no_adaptive').rewards()
        self.assertTrue((rewards['alpha'] == 0.0).all())
        self.assertTrue(np.allclose(rewards['r_total'], rewards['r_ext'] + rewards['r_int_raw'], rtol=0, atol=1e-12))
        self.assertTrue((rewards['r_int_raw'] > 0.0).all(), "Precondition: the untrained autoencoder is imperfect.")

    def test_normalized_bonus_keeps_raw_reward(self):
        """
        Test that running-std normalization changes the mixed bonus but never the logged raw error.
        """
        # Precondition assertion
        plain = self.run_variant('no_adaptive', name='plain').rewards()
        self.assertTrue(np.array_equal(plain['r_int_norm'], plain['r_int_raw']), "Precondition: unnormalized runs mix the raw value.")
        # Testing assertion
        document = tiny_document('no_adaptive')
        document['autoencoder']['normalize_intrinsic'] = True
        scaled = train(parse_run_config(document), seed=0, output_dir=self.root / 'scaled').rewards()
        first = slice(0, 16)
        self.assertTrue(
            np.allclose(scaled['r_int_raw'][first], plain['r_int_raw'][first], rtol=0, atol=1e-12),
            "Testing: the first rollout sees the same untrained autoencoder, so the raw errors match.",
        )
        self.assertFalse(np.allclose(scaled['r_int_norm'], scaled['r_int_raw']), "Testing: the mixed value is rescaled.")
        # Postcondition assertion
        self.assertTrue(
            np.allclose(scaled['r_total'], scaled['r_ext'] + scaled['r_int_norm'], rtol=0, atol=1e-12),
            "Postcondition: r_total is built from the mixed value.",
        )

    def test_same_seed_same_hash(self):
        first = self.run_variant(name='first')
        second = self.run_variant(name='second')
        self.assertEqual(first.hash, second.hash)
        self.assertEqual(first.summary['run_hash'], first.hash)

    def test_variants_differ_only_in_mastery(self):
        """
        With the evaluator stubbed to output 1, adazero must retrace the no_intrinsic run exactly.
        """
        with patch('exploration.evaluator.score_batch', side_effect=lambda ev, obs_hat: np.ones(len(obs_hat))):
            stubbed = self.run_variant('adazero', name='stubbed')
        forced = self.run_variant('no_intrinsic', name='forced')
        pd.testing.assert_frame_equal(stubbed.rewards(), forced.rewards())
        pd.testing.assert_frame_equal(stubbed.metrics, forced.metrics)

    def test_existing_run_is_protected(self):
        config = parse_run_config(tiny_document())
        train(config, seed=0, output_dir=self.root)
        with self.assertRaises(HarnessError):
            train(config, seed=0, output_dir=self.root)
        train(config, seed=0, output_dir=self.root, overwrite=True)

    def test_four_rooms_records_a_greedy_path(self):
        summary = self.run_variant(env='four_rooms').summary
        path = summary['greedy_path']
        self.assertEqual(path['optimal_length'], 20)
        self.assertEqual(path['cells'][0], [1, 11], "Testing: the path starts at the top-right start cell.")
        self.assertEqual(path['length'], len(path['cells']) - 1)


class RunLogTestCase(SimpleTestCase):

    def test_steps_must_increase(self):
        with tempfile.TemporaryDirectory() as tmp:
            writer = RunWriter(tmp, {'run': {'variant': 'adazero'}})
            row = dict.fromkeys(METRIC_COLUMNS, 0.0)
            writer.append_metrics(dict(row, step=5))
            with self.assertRaises(HarnessError):
                writer.append_metrics(dict(row, step=5))

    def test_overwrite_clears_stale_directories(self):
        """
        Test that overwriting a run also removes the old checkpoints and reconstruction dumps.
        """
        with tempfile.TemporaryDirectory() as tmp:
            run_dir = Path(tmp)
            (run_dir / 'checkpoints' / 'update_00001').mkdir(parents=True)
            (run_dir / 'checkpoints' / 'update_00001' / 'trunk.npz').write_bytes(b'old')
            (run_dir / 'reconstructions').mkdir()
            (run_dir / 'reconstructions' / 'pair_000.png').write_bytes(b'old')
            # Precondition assertion
            with self.assertRaises(HarnessError, msg="Precondition: leftover checkpoints alone mark the directory as a run."):
                RunWriter(run_dir, {'run': {'variant': 'adazero'}})
            # Testing assertion
            RunWriter(run_dir, {'run': {'variant': 'adazero'}}, overwrite=True)
            self.assertFalse((run_dir / 'checkpoints').exists(), "Testing: stale checkpoints are gone.")
            self.assertFalse((run_dir / 'reconstructions').exists(), "Testing: stale reconstructions are gone.")
            # Postcondition assertion
            self.assertTrue((run_dir / 'config.json').exists(), "Postcondition: the new run's config echo is written.")

    def test_load_requires_a_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(HarnessError):
                RunLog.load(tmp)


class DensityPlotTestCase(SimpleTestCase):
    """
    log(1 + count) grayscale heatmaps.
    """

    def test_single_cell(self):
        density = VisitDensity.empty(5, 5)
        density.counts[2, 3] = 7
        raster = density_raster(density)
        self.assertEqual(np.count_nonzero(raster), 1)
        self.assertEqual(raster[2, 3], 255)

    def test_uniform_visits(self):
        density = VisitDensity(np.full((4, 6), 3, dtype=np.int64), 72)
        raster = density_raster(density)
        self.assertTrue(np.all(raster == raster[0, 0]))
        self.assertEqual(raster[0, 0], 255)

    def test_log_scale(self):
        density = VisitDensity(np.array([[0, 1, 3]], dtype=np.int64), 4)
        raster = density_raster(density)
        self.assertEqual(raster[0, 0], 0)
        self.assertEqual(raster[0, 1], 128, "Testing: log 2 / log 4 of full brightness.")

    def test_empty_density_rejected(self):
        with self.assertRaises(HarnessError):
            density_raster(VisitDensity.empty(3, 3))

    def test_files_written(self):
        density = VisitDensity.empty(4, 4)
        density.counts[3, 0] = 2
        density.counts[3, 1] = 1
        with tempfile.TemporaryDirectory() as tmp:
            plot = plot_density(density, Path(tmp) / 'density.png', path_cells=[(3, 0), (3, 1)])
            self.assertTrue(plot.raster.exists())
            self.assertTrue(plot.overlay.exists())
            self.assertEqual(plot.coverage, 2)
            curves = plot_curves(metrics_frame(mean_entropy=[1.0, 0.9, 0.8]), Path(tmp) / 'curves.png')
            self.assertTrue(curves.exists())


class CompareTestCase(SimpleTestCase):

    def test_identical_logs_have_zero_difference(self):
        metrics = metrics_frame(coverage=[3, 5, 8], mean_entropy=[1.3, 1.2, 1.0])
        table = compare_runs([fake_log('adazero', metrics), fake_log('no_adaptive', metrics.copy())])
        diffs = table[[column for column in table.columns if column.endswith('_diff')]]
        self.assertEqual(len(table), 6)
        self.assertTrue((diffs.to_numpy() == 0.0).all())

    def test_medians_across_seeds(self):
        logs = [fake_log('adazero', metrics_frame(coverage=[c, c, c]), name=str(c)) for c in (1, 4, 10)]
        logs.append(fake_log('no_intrinsic', metrics_frame(coverage=[2, 2, 2])))
        table = compare_runs(logs, baseline='no_intrinsic')
        adazero = table[table['variant'] == 'adazero']
        self.assertTrue((adazero['coverage'] == 4).all())
        self.assertTrue((adazero['coverage_diff'] == 2).all())

    def test_rejected_inputs(self):
        metrics = metrics_frame()
        with self.assertRaises(HarnessError):
            compare_runs([fake_log('adazero', metrics)])
        with self.assertRaises(HarnessError):
            compare_runs([fake_log('adazero', metrics), fake_log('adazero', metrics.iloc[:0])])
        with self.assertRaises(HarnessError):
            compare_runs([fake_log('adazero', metrics), fake_log('adazero', metrics.drop(columns=['coverage']))])
        with self.assertRaises(HarnessError):
            compare_runs([fake_log('adazero', metrics), fake_log('adazero', metrics)], baseline='no_adaptive')

    def test_summary_and_ordering(self):
        logs = [
            fake_log(variant, metrics_frame(), {'seed': 0, 'coverage': coverage, 'success_rate': None})
            for variant, coverage in (('adazero', 30), ('no_adaptive', 20), ('no_intrinsic', 10))
        ]
        summary = summarize_runs(logs)
        self.assertEqual(list(summary['variant']), ['adazero', 'no_adaptive', 'no_intrinsic'])
        self.assertTrue(coverage_ordering(summary))
        self.assertIsNone(coverage_ordering(summary[summary['variant'] != 'no_adaptive']))

    def test_alignment(self):
        metrics = metrics_frame(
            steps=range(1, 10),
            mean_entropy=[1.0, 1.1, 1.2, 0.8, 0.9, 0.7, 0.5, 0.4, 0.6],
            mean_r_int=[0.3, 0.3, 0.3, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1],
        )
        self.assertAlmostEqual(entropy_intrinsic_alignment(metrics, 3), 1.0)
        self.assertIsNone(entropy_intrinsic_alignment(metrics, 4), "Testing: two windows are too few.")
        flat = metrics_frame(steps=range(1, 7), mean_entropy=[1.0] * 6, mean_r_int=[0.1, 0.2] * 3)
        self.assertIsNone(entropy_intrinsic_alignment(flat, 2))


class DiagnosticsTestCase(SimpleTestCase):

    def test_networks_pass_gradient_checks(self):
        reports = network_grad_checks(samples_per_block=8)
        self.assertEqual(set(reports), {'autoencoder', 'evaluator', 'policy'})
        for name, report in reports.items():
            self.assertLess(report.max_relative_error, 1e-4, name)


class CommandTestCase(SimpleTestCase):
    """
    The management commands end to end.
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, variant='adazero', env='dark_chamber', extra=''):
        path = self.root / f'{variant}_{env}.toml'
        path.write_text(TINY_CONFIG.format(variant=variant, env=env) + extra)
        return path

    def test_verify_theory(self):
        out = io.StringIO()
        call_command('verify_theory', samples=2000, case_samples=50, seed=1, stdout=out)
        report = json.loads(out.getvalue().split('\nall theory checks passed')[0])
        self.assertTrue(report['lemma']['passed'])
        self.assertEqual(report['lemma']['violations'], 0)
        self.assertTrue(report['cases']['passed'])
        self.assertTrue(report['monotonicity']['passed'])

    def test_grad_check(self):
        out = io.StringIO()
        call_command('grad_check', samples_per_block=5, stdout=out)
        self.assertIn('all networks within', out.getvalue())

    def test_grad_check_failure_exits_nonzero(self):
        with self.assertRaises(CommandError):
            call_command('grad_check', samples_per_block=2, tolerance=1e-300, stdout=io.StringIO())

    def test_train_plot_and_compare(self):
        out = io.StringIO()
        call_command('train', config=str(self.write_config('adazero', 'four_rooms')), output_dir=str(self.root / 'runs'), stdout=out)
        call_command('train', config=str(self.write_config('no_intrinsic', 'four_rooms')), seed=[0, 1],
                     output_dir=str(self.root / 'other'), stdout=out)
        adazero_dir = self.root / 'runs' / 'tiny' / 'seed_0'
        self.assertTrue((adazero_dir / 'summary.json').exists())
        self.assertTrue((self.root / 'other' / 'tiny' / 'seed_1' / 'summary.json').exists())

        call_command('plot_density', str(adazero_dir), curves=True, stdout=out)
        self.assertTrue((adazero_dir / 'density.png').exists())
        self.assertTrue((adazero_dir / 'density_path.png').exists())
        self.assertTrue((adazero_dir / 'curves.png').exists())
        call_command('plot_density', str(adazero_dir), update=2, stdout=out)
        self.assertTrue((adazero_dir / 'density_update_00002.png').exists())

        target = self.root / 'comparison.csv'
        call_command('compare', str(adazero_dir), str(self.root / 'other' / 'tiny' / 'seed_0'),
                     str(self.root / 'other' / 'tiny' / 'seed_1'), output=str(target), stdout=out)
        table = pd.read_csv(target)
        self.assertEqual(set(table['variant']), {'adazero', 'no_intrinsic'})
        self.assertTrue((table.loc[table['variant'] == 'adazero', 'coverage_diff'] == 0).all())

    def test_train_rejects_unknown_keys(self):
        path = self.write_config(extra='\n[logging]\nlevel = "DEBUG"\n')
        with self.assertRaises(CommandError):
            call_command('train', config=str(path), output_dir=str(self.root), stdout=io.StringIO())

    def test_plot_density_missing_run(self):
        with self.assertRaises(CommandError):
            call_command('plot_density', str(self.root / 'missing'), stdout=io.StringIO())

    def test_compare_needs_two_runs(self):
        with self.assertRaises(CommandError):
            call_command('compare', str(self.root / 'missing'), stdout=io.StringIO())

    def test_probe_mastery(self):
        out = io.StringIO()
        call_command('probe_mastery', states=4, steps=20, stdout=out)
        probe = json.loads(out.getvalue())
        self.assertEqual(probe['steps'], 20)
        self.assertFalse(math.isnan(probe['final_median_r_int']))
