import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, TestCase, tag

from coefficients.coefficient_set import CoefficientSet
from coefficients.velocity import ShearSine, TidalPiecewise, UniformVelocity
from dunes_project.exceptions import DimensionError, ParameterError
from limit_solver.system import GaugeSpec
from reference_solver.integrator import IntegratorConfig
from reference_solver.solver import CosineCombo, WellPrepared
from spectral.fields import GridField, GridSpec
from .experiments import (
    SweepPlan, compare_at, compare_times, epsilon_sweep, p_tail_study, period_study, section_study, tail_csv,
    theta_trace,
)
from .models import ComparisonRecord
from .norms import ErrorReport, error_norms
from .reports import graymap, parse_reports_csv, reports_csv


def cosine_grid(n=64):
    x1, _ = GridSpec(n).points()
    return GridField(n, np.cos(2 * np.pi * x1))


class ErrorNormTests(SimpleTestCase):

    def test_identical_fields(self):
        a = cosine_grid()
        self.assertEqual(tuple(error_norms(a, a)), (0.0, 0.0, 0.0))

    def test_constant_offset(self):
        a = cosine_grid()
        for norm in error_norms(a, GridField(a.n, a.values + 1)):
            self.assertAlmostEqual(norm, 1.0, places=12)

    def test_cosine_against_zero(self):
        l1, l2, linf = error_norms(cosine_grid(), np.zeros((64, 64)))
        self.assertAlmostEqual(l1, 2 / np.pi, places=2)
        self.assertAlmostEqual(l2, 1 / np.sqrt(2), places=12)
        self.assertAlmostEqual(linf, 1.0, places=12)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            error_norms(np.zeros((32, 32)), np.zeros((64, 64)))

    def test_norm_axioms(self):
        rng = np.random.default_rng(7)
        zero = np.zeros((16, 16))
        for _ in range(20):
            a, b = rng.normal(size=(2, 16, 16))
            scale = rng.normal()
            for sum_norm, a_norm, b_norm in zip(error_norms(a + b, zero), error_norms(a, zero), error_norms(b, zero)):
                self.assertLessEqual(sum_norm, a_norm + b_norm + 1e-12)
            for scaled, plain in zip(error_norms(scale * a, zero), error_norms(a, zero)):
                self.assertAlmostEqual(scaled, abs(scale) * plain, places=10)
            l1, l2, linf = error_norms(a, b)
            self.assertLessEqual(l2, math.sqrt(l1 * linf) + 1e-12)


class ReportFormatTests(SimpleTestCase):

    def test_csv_columns_and_metadata(self):
        reports = [
            ErrorReport(0.1, 4, 1.0, 0.5, 0.25, 1.0, 2.0, 10),
            ErrorReport.failure(0.01, 4, 1.0, 'step budget exhausted'),
        ]
        text = reports_csv(reports, {'config_digest': 'abc'})
        lines = text.splitlines()
        self.assertTrue(lines[0].startswith('# version='))
        self.assertEqual(lines[1], '# config_digest=abc')
        self.assertEqual(lines[2], 'epsilon,P,t,l1,l2,linf,runtime_s,steps,error')
        rows = parse_reports_csv(text)
        self.assertEqual(rows[0]['P'], '4')
        self.assertEqual(float(rows[0]['l2']), 0.25)
        self.assertEqual(rows[1]['error'], 'step budget exhausted')
        self.assertTrue(math.isnan(float(rows[1]['l1'])))

    def test_graymap(self):
        values = np.arange(12, dtype=float).reshape(4, 3)
        lines = graymap(values).splitlines()
        self.assertEqual(lines[0], 'P2')
        self.assertEqual(lines[2], '4 3')
        self.assertEqual(lines[3], '255')
        levels = [int(v) for line in lines[4:] for v in line.split()]
        self.assertEqual((min(levels), max(levels)), (0, 255))
        flat = graymap(np.ones((2, 2))).splitlines()
        self.assertEqual(flat[4:], ['0 0', '0 0'])


class CompareTests(SimpleTestCase):

    def test_well_prepared_at_start(self):
        coefficients = CoefficientSet(ShearSine())
        report = compare_at(coefficients, 0.1, 4, 0.0, WellPrepared(coefficients, GaugeSpec(0.0)))
        self.assertFalse(report.failed)
        self.assertLessEqual(report.linf, 1e-9)
        self.assertEqual(report.steps, 0)

    def test_solver_failure_is_recorded(self):
        coefficients = CoefficientSet(ShearSine())
        report = compare_at(coefficients, 0.05, 2, 0.5, CosineCombo(), integrator=IntegratorConfig(max_steps=1))
        self.assertTrue(report.failed)
        self.assertIn('step budget', report.error)
        self.assertTrue(math.isnan(report.l2))

    def test_constant_data_stays_on_the_profile(self):
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        report = compare_at(coefficients, 0.2, 2, 0.1, 2.0, grid_n=32)
        self.assertLessEqual(report.linf, 1e-10)

    def test_period_study_times(self):
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        reports = period_study(coefficients, 0.2, 2, CosineCombo(), t0=0.1, grid_n=32)
        for report, expected in zip(reports, [0.1, 0.15, 0.2, 0.25]):
            self.assertAlmostEqual(report.t, expected, places=12)
        self.assertEqual(len(reports), 4)
        self.assertTrue(all(r.l2 >= 0 for r in reports))

    def test_section_study(self):
        coefficients = CoefficientSet(UniformVelocity(1.0, 0.0))
        rows = section_study(coefficients, 0.2, 2, 2.0, [0.0, 0.1], grid_n=32)
        self.assertEqual(len(rows), 64)
        for row in rows:
            self.assertAlmostEqual(row.reference, 2.0, places=10)
            self.assertAlmostEqual(row.limit, 2.0, places=10)
        self.assertEqual(rows[32].t, 0.1)

    def test_theta_trace(self):
        rows = theta_trace(CoefficientSet(ShearSine()), 1.0, [(0.5, 0.0)], samples=8)
        self.assertEqual(len(rows), 8)
        quarter = rows[2]
        self.assertEqual(quarter.theta, 0.25)
        self.assertAlmostEqual(quarter.U1, 1.0, places=12)
        self.assertAlmostEqual(quarter.A_tilde, 1.0, places=12)
        self.assertEqual(quarter.U2, 0.0)

    @tag('slow')
    def test_shear_sine_error_magnitude(self):
        coefficients = CoefficientSet(ShearSine())
        fine = compare_at(coefficients, 0.01, 4, 1.0, CosineCombo())
        coarse = compare_at(coefficients, 0.1, 4, 1.0, CosineCombo())
        self.assertLess(fine.linf, coarse.linf)
        self.assertGreaterEqual(fine.linf, 0.003376 / 10)
        self.assertLessEqual(fine.linf, 0.003376 * 10)

    @tag('slow')
    def test_well_prepared_first_order(self):
        coefficients = CoefficientSet(ShearSine())
        z0 = WellPrepared(coefficients, GaugeSpec(0.0))
        coarse = compare_at(coefficients, 0.02, 4, 1.0, z0)
        fine = compare_at(coefficients, 0.01, 4, 1.0, z0)
        ratio = fine.l2 / coarse.l2
        self.assertGreaterEqual(ratio, 0.25)
        self.assertLessEqual(ratio, 0.8)

    @tag('slow')
    def test_piecewise_tide_error_shrinks_with_epsilon(self):
        coefficients = CoefficientSet(TidalPiecewise(1.0))
        times = [0.75, 0.775]
        coarse = compare_times(coefficients, 0.1, 4, times, CosineCombo())
        fine = compare_times(coefficients, 0.005, 4, times, CosineCombo())
        for coarse_report, fine_report in zip(coarse, fine):
            with self.subTest(t=coarse_report.t):
                self.assertFalse(coarse_report.failed or fine_report.failed)
                self.assertLess(fine_report.l2, coarse_report.l2)


class SweepTests(SimpleTestCase):

    def plan(self, **overrides):
        options = dict(
            coefficients=CoefficientSet(UniformVelocity(1.0, 0.0)), epsilons=(0.5, 0.2), orders=(2,),
            times=(0.05,), grid_n=32, workers=2,
        )
        options.update(overrides)
        return SweepPlan(**options)

    def test_rows_in_plan_order(self):
        result = epsilon_sweep(self.plan(orders=(1, 2)), record_runtime=False)
        cells = [(r.epsilon, r.order) for r in result.reports]
        self.assertEqual(cells, [(0.5, 1), (0.5, 2), (0.2, 1), (0.2, 2)])
        self.assertFalse(result.failures)

    def test_sweep_is_deterministic(self):
        first = epsilon_sweep(self.plan(metadata={'config_digest': 'x'}), record_runtime=False)
        second = epsilon_sweep(self.plan(metadata={'config_digest': 'x'}), record_runtime=False)
        self.assertEqual(first.text, second.text)

    def test_single_epsilon(self):
        text = epsilon_sweep(self.plan(epsilons=(0.5,))).text
        body = [line for line in text.splitlines() if not line.startswith('#')]
        self.assertEqual(len(body), 2)

    def test_failures_become_rows(self):
        result = epsilon_sweep(self.plan(integrator=IntegratorConfig(max_steps=1), epsilons=(0.01,)))
        self.assertEqual(len(result.failures), 1)
        self.assertIn('step budget', parse_reports_csv(result.text)[0]['error'])

    def test_plan_validation(self):
        with self.assertRaises(ParameterError):
            self.plan(epsilons=())
        with self.assertRaises(ParameterError):
            self.plan(epsilons=(0.1, -0.1))

    def test_writes_output(self):
        with tempfile.TemporaryDirectory() as directory:
            result = epsilon_sweep(self.plan(output=Path(directory) / 'sweep.csv'))
            self.assertEqual(result.path.read_text(), result.text)

    @tag('slow')
    def test_shear_sine_sweep_trend(self):
        plan = SweepPlan(CoefficientSet(ShearSine()), (0.1, 0.05, 0.01), (4,), (1.0,), workers=3)
        reports = epsilon_sweep(plan).reports
        self.assertLess(reports[2].linf, reports[0].linf)


class TailStudyTests(SimpleTestCase):

    def test_constant_profile_has_no_tail(self):
        rows = p_tail_study(CoefficientSet(UniformVelocity(1.0, 0.5)), 0.0, [1, 2, 3], GaugeSpec(0.5), grid_n=32)
        self.assertEqual([row.P for row in rows], [1, 2, 3])
        for row in rows:
            self.assertLessEqual(row.rel_l2_gap, 1e-12)

    def test_single_order(self):
        rows = p_tail_study(CoefficientSet(ShearSine()), 1.0, [2], grid_n=32)
        self.assertEqual(rows, [(2, 0.0)])
        self.assertEqual(tail_csv(rows).splitlines()[1:], ['P,rel_l2_gap', '2,0.0'])

    def test_orders_must_increase(self):
        with self.assertRaises(ParameterError):
            p_tail_study(CoefficientSet(ShearSine()), 1.0, [4, 2])

    @tag('slow')
    def test_tail_gaps_decrease(self):
        rows = p_tail_study(CoefficientSet(ShearSine()), 1.0, [2, 4, 6, 8])
        gaps = [row.rel_l2_gap for row in rows]
        self.assertGreater(gaps[0], gaps[1])
        self.assertGreater(gaps[1], gaps[2])
        self.assertGreater(gaps[2], 0.0)
        self.assertEqual(gaps[3], 0.0)
        self.assertLessEqual(gaps[2], 0.1)


class ComparisonRecordTests(TestCase):

    def test_record_reports(self):
        reports = [
            ErrorReport(0.1, 4, 1.0, 0.5, 0.25, 1.0, 2.0, 10),
            ErrorReport.failure(0.01, 4, 1.0, 'diverged'),
        ]
        ComparisonRecord.record(reports, 'sweep', 'abc')
        self.assertEqual(ComparisonRecord.objects.filter(study='sweep').count(), 2)
        failed = ComparisonRecord.objects.get(epsilon=0.01)
        self.assertIsNone(failed.l2)
        self.assertTrue(failed.failed)
        self.assertEqual(str(ComparisonRecord.objects.get(epsilon=0.1)), 'sweep: eps=0.1 P=4 t=1')
