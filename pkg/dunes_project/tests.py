import shutil
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from analysis.models import ComparisonRecord
from analysis.reports import parse_reports_csv
from coefficients.velocity import TidalPiecewise
from limit_solver.system import GaugeSpec
from reference_solver.solver import Constant, CosineCombo, WellPrepared
from spectral.fields import SpectralField2
from spectral.snapshots import dump_snapshot, load_snapshot
from .exceptions import ConfigError
from .runconfig import RunConfig

SMALL_RUN = [
    '--set', 'velocity.variant=uniform',
    '--set', 'velocity.u1=1.0',
    '--set', 'velocity.u_thr=0',
    '--set', 'solver.epsilon=0.2',
    '--set', 'solver.order=2',
    '--set', 'solver.grid_n=32',
    '--set', 'solver.T=0.1',
]


class RunConfigTests(SimpleTestCase):

    def test_defaults(self):
        config = RunConfig.defaults()
        self.assertEqual(config.epsilon, 0.01)
        self.assertEqual(config.order, 4)
        self.assertIsNone(config.n_quad)
        self.assertIsNone(config.gauge())
        self.assertIsInstance(config.initial(), CosineCombo)

    def test_round_trip_is_idempotent(self):
        config = RunConfig.parse(
            '[solver]\nepsilon = 0.05\norder = 6\noutput_times = 0.25, 0.5\n\n'
            '[sweep]\nepsilons = 0.1, 0.01\n\n[acceptance]\nmax_l2 = 0.5\n'
        )
        text = config.to_ini()
        again = RunConfig.parse(text)
        self.assertEqual(again.to_ini(), text)
        self.assertEqual(again.digest, config.digest)
        self.assertEqual(again['solver']['output_times'], [0.25, 0.5])
        self.assertEqual(again['acceptance']['max_l2'], 0.5)

    def test_unknown_section(self):
        with self.assertRaises(ConfigError) as caught:
            RunConfig.parse('[plotting]\ncolour = red\n')
        self.assertIn('plotting', str(caught.exception))

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as caught:
            RunConfig.parse('[solver]\nepsilonn = 0.1\n')
        self.assertIn('solver.epsilonn', str(caught.exception))

    def test_invalid_values(self):
        for text in (
            '[solver]\nepsilon = 0\n',
            '[solver]\ngrid_n = 48\n',
            '[solver]\nT = 0\n',
            '[solver]\nT = -0.5\n',
            '[solver]\nT = 1\noutput_times = 2\n',
            '[velocity]\nvariant = custom\nu1 = cos(\nu2 = 0\n',
            '[sweep]\norders = 2, x\n',
            'not an ini file',
        ):
            with self.subTest(text=text), self.assertRaises(ConfigError):
                RunConfig.parse(text)

    def test_overrides(self):
        config = RunConfig.parse('[solver]\nepsilon = 0.1\n', ['solver.epsilon=0.5', 'gauge.mode=explicit', 'gauge.value=0.3'])
        self.assertEqual(config.epsilon, 0.5)
        self.assertEqual(config.gauge(), GaugeSpec(0.3))
        with self.assertRaises(ConfigError):
            RunConfig.defaults(['solver_epsilon=0.5'])

    def test_builders(self):
        config = RunConfig.defaults(['velocity.variant=tidal_piecewise', 'initial.z0=constant', 'initial.value=1.5'])
        self.assertIsInstance(config.velocity(), TidalPiecewise)
        self.assertEqual(config.initial(), Constant(1.5))
        config = RunConfig.defaults(['velocity.variant=uniform', 'velocity.u1=2', 'initial.z0=well_prepared'])
        self.assertEqual((config.velocity().u1, config.velocity().u2), (2.0, 0.0))
        self.assertIsInstance(config.initial(), WellPrepared)

    def test_sweep_plan_falls_back_to_solver(self):
        plan = RunConfig.defaults(['solver.epsilon=0.05', 'sweep.orders=2, 4']).sweep_plan(workers=2)
        self.assertEqual(plan.epsilons, (0.05,))
        self.assertEqual(plan.orders, (2, 4))
        self.assertEqual(plan.times, (1.0,))
        self.assertEqual(plan.workers, 2)
        self.assertEqual(plan.metadata['config_digest'], RunConfig.defaults(['solver.epsilon=0.05', 'sweep.orders=2, 4']).digest)


class DunesCommandTests(TestCase):

    def setUp(self):
        self.directory = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.directory, ignore_errors=True)
        self.stdout = StringIO()
        self.stderr = StringIO()

    def dunes(self, *args):
        call_command('dunes', *args, '--output', str(self.directory), stdout=self.stdout, stderr=self.stderr)

    def test_limit_solve_order_zero(self):
        self.dunes(
            'limit-solve', '--t', '0.5', '--set', 'solver.order=0',
            '--set', 'initial.z0=constant', '--set', 'initial.value=0.7',
        )
        profile, comments = load_snapshot(self.directory / 'profile_t0.5.spec')
        self.assertEqual(profile.order, 0)
        self.assertEqual(profile.coefficient(0, 0, 0), 0.7)
        self.assertTrue(comments[0].startswith('residual='))

    def test_compare_snapshot_with_itself(self):
        coeffs = np.zeros((5, 5))
        coeffs[3, 2] = coeffs[1, 2] = 0.5
        path = dump_snapshot(SpectralField2(2, coeffs, 0.0, True), self.directory / 'z.spec')
        self.dunes('compare', '--snapshot', str(path), '--snapshot', str(path), '--set', 'solver.grid_n=32')
        row, = parse_reports_csv((self.directory / 'compare.csv').read_text())
        self.assertEqual((float(row['l1']), float(row['l2']), float(row['linf'])), (0.0, 0.0, 0.0))

    def test_compare_writes_reports(self):
        self.dunes('compare', *SMALL_RUN, '--t', '0.05,0.1')
        rows = parse_reports_csv((self.directory / 'compare.csv').read_text())
        self.assertEqual([float(row['t']) for row in rows], [0.05, 0.1])
        self.assertTrue(all(row['error'] == '' for row in rows))
        self.assertEqual(ComparisonRecord.objects.filter(study='compare').count(), 2)

    def test_bad_config_exits_with_2(self):
        with self.assertRaises(CommandError) as caught:
            self.dunes('limit-solve', '--set', 'solver.epsilon=-1')
        self.assertEqual(caught.exception.returncode, 2)
        with self.assertRaises(CommandError) as caught:
            self.dunes('limit-solve', '--config', str(self.directory / 'missing.ini'))
        self.assertEqual(caught.exception.returncode, 2)
        with self.assertRaises(CommandError) as caught:
            self.dunes('reference-solve', '--set', 'solver.T=0')
        self.assertEqual(caught.exception.returncode, 2)

    def test_solver_failure_exits_with_3(self):
        with self.assertRaises(CommandError) as caught:
            self.dunes('reference-solve', '--set', 'solver.max_steps=1', '--set', 'solver.epsilon=0.05', '--set', 'solver.order=2')
        self.assertEqual(caught.exception.returncode, 3)

    def test_acceptance_violation_exits_with_4(self):
        self.dunes('compare', *SMALL_RUN, '--set', 'acceptance.max_l2=1e-12')
        self.assertIn('exceeds', self.stderr.getvalue())
        with self.assertRaises(CommandError) as caught:
            self.dunes('compare', *SMALL_RUN, '--set', 'acceptance.max_l2=1e-12', '--assert')
        self.assertEqual(caught.exception.returncode, 4)

    def test_reference_solve_writes_snapshots(self):
        self.dunes('reference-solve', *SMALL_RUN, '--set', 'solver.output_times=0.05')
        self.assertTrue((self.directory / 'z_t0.05.spec').exists())
        self.assertTrue((self.directory / 'z_t0.1.spec').exists())
        self.assertTrue((self.directory / 'stats.txt').read_text().strip())

    def test_small_sweep(self):
        self.dunes('sweep', *SMALL_RUN, '--set', 'sweep.epsilons=0.5, 0.2', '--set', 'sweep.times=0.05', '--set', 'sweep.workers=1')
        text = (self.directory / 'sweep.csv').read_text()
        self.assertIn('# config_digest=', text)
        rows = parse_reports_csv(text)
        self.assertEqual([float(row['epsilon']) for row in rows], [0.5, 0.2])
        self.assertEqual(ComparisonRecord.objects.filter(study='sweep').count(), 2)

    def test_hypotheses_report(self):
        self.dunes('hypotheses', '--density', '16')
        text = (self.directory / 'hypotheses.txt').read_text()
        self.assertTrue(text.startswith('d_estimate '))
        self.assertIn('d_estimate ', self.stdout.getvalue())

    def test_render_and_trace(self):
        self.dunes('limit-solve', *SMALL_RUN)
        self.dunes('render', '--snapshot', str(self.directory / 'profile_t0.1.spec'), '--set', 'solver.grid_n=32')
        self.assertTrue((self.directory / 'profile_t0.1.pgm').read_text().startswith('P2'))
        self.assertTrue((self.directory / 'profile_t0.1.csv').read_text().startswith('# N=32'))
        self.dunes('trace', *SMALL_RUN, '--point', '0.5,0', '--samples', '4')
        lines = [line for line in (self.directory / 'trace.csv').read_text().splitlines() if not line.startswith('#')]
        self.assertEqual(lines[0], 'theta,x1,x2,U1,U2,A_tilde')
        self.assertEqual(len(lines), 5)

    def test_bad_trace_point(self):
        with self.assertRaises(CommandError) as caught:
            self.dunes('trace', '--point', '0.5')
        self.assertEqual(caught.exception.returncode, 2)


class PresetTests(SimpleTestCase):

    def test_presets_parse(self):
        presets = sorted((Path(__file__).resolve().parent.parent / 'presets').glob('*.ini'))
        self.assertEqual(len(presets), 4)
        for path in presets:
            with self.subTest(preset=path.name):
                config = RunConfig.load(path)
                self.assertTrue(str(config.output_dir).startswith('runs'))

    def test_sweep_preset_plan(self):
        plan = RunConfig.load(Path(__file__).resolve().parent.parent / 'presets' / 'wat0_sweep.ini').sweep_plan()
        self.assertEqual(len(plan.cells()) * len(plan.times), 6)
        self.assertEqual(plan.orders, (4,))
        self.assertEqual(plan.times, (1.0,))

    def test_moderate_epsilon_preset_uses_the_piecewise_tide(self):
        config = RunConfig.load(Path(__file__).resolve().parent.parent / 'presets' / 'wat_compare_eps0p1.ini')
        self.assertIsInstance(config.velocity(), TidalPiecewise)
        self.assertEqual(config['sweep']['times'], [0.75, 0.775])
        self.assertEqual(config.epsilon, 0.1)
        self.assertLessEqual(max(config['sweep']['times']), config['solver']['T'])
