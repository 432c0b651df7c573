import math
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from analysis.experiments import (
    compare_times, epsilon_sweep, p_tail_study, period_study, section_csv, section_study, tail_csv,
    theta_trace, trace_csv,
)
from analysis.models import ComparisonRecord
from analysis.norms import ErrorReport, error_norms
from analysis.reports import render_field, reports_csv, write_text
from coefficients.hypotheses import check_hypotheses
from dunes_project.audit import audited
from dunes_project.exceptions import ConfigError, DunesError
from dunes_project.runconfig import RunConfig
from limit_solver.system import GaugeSpec, solve_profile
from oracle.finite_difference import MIN_EPSILON, cn_limit_march, fd_reference_solve
from reference_solver.solver import ReferenceState, integrate, project_initial
from spectral.fields import GridSpec
from spectral.snapshots import dump_snapshot, load_snapshot
from spectral.transforms import real_grid

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ACCEPTANCE = 4


def _floats(text):
    return [float(value) for value in text.replace(',', ' ').split()]


def _ints(text):
    return [int(value) for value in text.replace(',', ' ').split()]


def _relative_l2(got, expected):
    scale = math.sqrt(float(np.mean(np.asarray(expected) ** 2)))
    gap = math.sqrt(float(np.mean((np.asarray(got) - np.asarray(expected)) ** 2)))
    return gap / scale if scale > 0 else gap


class Command(BaseCommand):
    help = 'Run the two-scale dune solvers and their comparison studies'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)

        def subcommand(name, help_text):
            sub = subparsers.add_parser(name, help=help_text)
            sub.add_argument('--config', type=str, help='Run configuration file (INI)')
            sub.add_argument(
                '--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                help='Override one configuration value; may be repeated',
            )
            sub.add_argument('--output', type=str, help='Output directory (overrides output.directory)')
            return sub

        limit = subcommand('limit-solve', 'Solve the limit system and write the profile snapshot')
        limit.add_argument('--t', type=float, help='Slow time (defaults to solver.T)')

        subcommand('reference-solve', 'Integrate the reference problem and write trajectory snapshots')

        compare = subcommand('compare', 'Compare reference and limit solutions on the grid')
        compare.add_argument('--t', type=str, help='Comparison times, comma separated (defaults to sweep.times or solver.T)')
        compare.add_argument('--assert', dest='enforce', action='store_true', help='Exit with status 4 when an acceptance threshold is exceeded')
        compare.add_argument('--oracle', action='store_true', help='Cross-check against the finite-difference solvers')
        compare.add_argument('--snapshot', action='append', default=[], help='Compare two snapshot files instead of solving')
        compare.add_argument('--theta', type=float, default=0.0, help='Theta cut for 3D snapshots')

        subcommand('sweep', 'Run the epsilon/P/t comparison table')

        hypotheses = subcommand('hypotheses', 'Check the structural hypotheses on the coefficients')
        hypotheses.add_argument('--density', type=int, default=16, help='Samples per axis')
        hypotheses.add_argument('--assert', dest='enforce', action='store_true', help='Exit with status 4 on a violation')

        render = subcommand('render', 'Evaluate a snapshot on the grid and write CSV and graymap')
        render.add_argument('--snapshot', required=True, help='Snapshot file')
        render.add_argument('--theta', type=float, help='Theta cut for 3D snapshots')

        trace = subcommand('trace', 'Velocity and A~ over one tide period at fixed points')
        trace.add_argument('--t', type=float, help='Slow time (defaults to solver.T)')
        trace.add_argument('--point', action='append', default=[], help='x1,x2; may be repeated')
        trace.add_argument('--samples', type=int, default=64)

        period = subcommand('period', 'Comparisons at t0 + n eps/4 within one tide period')
        period.add_argument('--t0', type=float, help='First time (defaults to solver.T)')
        period.add_argument('--subdivisions', type=int, default=4)

        sections = subcommand('sections', 'Reference and limit values along x2 = 0')
        sections.add_argument('--t', type=str, help='Times, comma separated')

        tail = subcommand('tail', 'Relative gap of Z_P to the largest order')
        tail.add_argument('--t', type=float, help='Slow time (defaults to solver.T)')
        tail.add_argument('--orders', type=str, help='Increasing orders, comma separated (defaults to sweep.orders)')

    def handle(self, *args, **options):
        handlers = {
            'limit-solve': self.limit_solve,
            'reference-solve': self.reference_solve,
            'compare': self.compare,
            'sweep': self.sweep,
            'hypotheses': self.hypotheses,
            'render': self.render,
            'trace': self.trace,
            'period': self.period,
            'sections': self.sections,
            'tail': self.tail,
        }
        name = options['subcommand']
        try:
            config = self.load_config(options)
            output = Path(options.get('output') or config.output_dir)
            with audited(f'cli.{name}', config_digest=config.digest):
                handlers[name](config, output, options)
        except ConfigError as exc:
            raise CommandError(f'configuration error: {exc}', returncode=EXIT_CONFIG) from exc
        except DunesError as exc:
            raise CommandError(f'solver failure: {exc}', returncode=EXIT_SOLVER) from exc

    def load_config(self, options):
        overrides = options.get('overrides') or []
        if options.get('config'):
            return RunConfig.load(options['config'], overrides)
        return RunConfig.defaults(overrides)

    def times(self, config, text=None):
        if text:
            try:
                return _floats(text)
            except ValueError:
                raise ConfigError(f'cannot parse times {text!r}')
        return config['sweep']['times'] or [config['solver']['T']]

    def gauge_for(self, config, z0_field):
        return config.gauge() or GaugeSpec.from_initial(z0_field)

    def record(self, reports, study, config):
        if settings.DUNES['RECORD_RESULTS']:
            ComparisonRecord.record(reports, study, config.digest)

    def done(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    # subcommands

    def limit_solve(self, config, output, options):
        t = config['solver']['T'] if options.get('t') is None else options['t']
        z0 = project_initial(config.initial(), config.order)
        result = solve_profile(config.coefficients, t, config.order, self.gauge_for(config, z0), config.n_quad)
        path = dump_snapshot(result.profile, output / f'profile_t{t:.6g}.spec', result.diagnostics.comments())
        self.done(f'Wrote {path} ({result.diagnostics.comments()[0]})')

    def reference_solve(self, config, output, options):
        solver = config['solver']
        z0 = project_initial(config.initial(), config.order)
        trajectory = integrate(
            ReferenceState(0.0, z0, config.epsilon), config.coefficients, solver['T'],
            config.integrator(), solver['output_times'], config.n_quad,
        )
        paths = trajectory.write(output)
        self.done(f'Wrote {len(paths)} snapshots to {output} ({trajectory.stats_line()})')

    def compare(self, config, output, options):
        if options['snapshot']:
            reports = [self.compare_snapshots(config, options['snapshot'], options['theta'])]
        else:
            reports = compare_times(
                config.coefficients, config.epsilon, config.order, self.times(config, options.get('t')),
                config.initial(), config.gauge(), config.grid_n, config.integrator(), config.n_quad,
            )
            self.record(reports, 'compare', config)

        comments = []
        if options['oracle'] and not options['snapshot']:
            comments = self.oracle_checks(config, reports, options['enforce'])
        metadata = {'config_digest': config.digest}
        metadata.update((f'oracle_{i}', line) for i, line in enumerate(comments))
        path = write_text(output / 'compare.csv', reports_csv(reports, metadata))
        self.stdout.write(reports_csv(reports))

        failed = [r for r in reports if r.failed]
        if failed:
            raise CommandError(f'solver failure: {failed[0].error}', returncode=EXIT_SOLVER)
        self.check_acceptance(config, reports, options['enforce'])
        self.done(f'Wrote {path}')

    def compare_snapshots(self, config, paths, theta):
        if len(paths) != 2:
            raise ConfigError(f'--snapshot must be given exactly twice, got {len(paths)}')
        grid = GridSpec(config.grid_n)
        (first, _), (second, _) = (load_snapshot(path) for path in paths)
        values = [
            real_grid(field, grid, theta=theta if field.ndim == 3 else None).values
            for field in (first, second)
        ]
        norms = error_norms(*values)
        return ErrorReport.from_norms(config.epsilon, max(first.order, second.order), first.t_param, norms)

    def oracle_checks(self, config, reports, enforce):
        """
        Finite-difference cross-checks at every comparison time
        """
        tolerance = config['acceptance']['oracle_rel_l2']
        grid = GridSpec(config.grid_n)
        lines = []
        for report in reports:
            if report.failed:
                continue
            z0 = project_initial(config.initial(), config.order)
            gauge = self.gauge_for(config, z0)
            profile = solve_profile(config.coefficients, report.t, config.order, gauge, config.n_quad).profile
            march = cn_limit_march(config.coefficients, report.t, n=grid.n, gauge=gauge)
            gaps = {'limit': _relative_l2(march.values, real_grid(profile, grid, theta=0.0).values)}
            if config.epsilon >= MIN_EPSILON and report.t > 0:
                trajectory = integrate(
                    ReferenceState(0.0, z0, config.epsilon), config.coefficients, report.t,
                    config.integrator(), n_quad=config.n_quad,
                )
                fd = fd_reference_solve(config.coefficients, config.epsilon, grid.n, real_grid(z0, grid).values, report.t)
                gaps['reference'] = _relative_l2(fd.values, real_grid(trajectory.final, grid).values)
            for name, gap in gaps.items():
                line = f't={report.t:g} {name} rel_l2={gap:.6e}'
                lines.append(line)
                self.stdout.write(f'oracle {line}')
                if gap > tolerance:
                    message = f'oracle {name} gap {gap:.3e} exceeds {tolerance:g} at t={report.t:g}'
                    if enforce:
                        raise CommandError(message, returncode=EXIT_ACCEPTANCE)
                    self.stderr.write(self.style.WARNING(message))
        return lines

    def check_acceptance(self, config, reports, enforce):
        acceptance = config['acceptance']
        for report in reports:
            for key, value in (('max_l2', report.l2), ('max_linf', report.linf)):
                limit = acceptance[key]
                if limit is not None and value > limit:
                    message = f'{key[4:]} = {value:.6e} exceeds {limit:g} at eps={report.epsilon:g} t={report.t:g}'
                    if enforce:
                        raise CommandError(message, returncode=EXIT_ACCEPTANCE)
                    self.stderr.write(self.style.WARNING(message))

    def sweep(self, config, output, options):
        result = epsilon_sweep(config.sweep_plan(output / 'sweep.csv'))
        self.record(result.reports, 'sweep', config)
        for report in result.failures:
            self.stderr.write(self.style.WARNING(f'eps={report.epsilon:g} P={report.order} t={report.t:g}: {report.error}'))
        self.done(f'Wrote {result.path} ({len(result.reports)} rows, {len(result.failures)} failed)')

    def hypotheses(self, config, output, options):
        report = check_hypotheses(config.coefficients, sample_density=options['density'])
        text = report.as_text()
        write_text(output / 'hypotheses.txt', text)
        self.stdout.write(text, ending='')
        if options['enforce'] and not report.passed:
            raise CommandError(f'{len(report.violations)} hypothesis violation(s)', returncode=EXIT_ACCEPTANCE)

    def render(self, config, output, options):
        field, comments = load_snapshot(options['snapshot'])
        stem = Path(options['snapshot']).stem
        csv_path, pgm_path = render_field(field, GridSpec(config.grid_n), output, stem, options.get('theta'), comments)
        self.done(f'Wrote {csv_path} and {pgm_path}')

    def trace(self, config, output, options):
        t = config['solver']['T'] if options.get('t') is None else options['t']
        try:
            points = [tuple(_floats(point)) for point in options['point']] or [(0.5, 0.0)]
        except ValueError:
            raise ConfigError(f'cannot parse trace points {options["point"]}')
        if any(len(point) != 2 for point in points):
            raise ConfigError('trace points must be given as x1,x2')
        rows = theta_trace(config.coefficients, t, points, options['samples'])
        path = write_text(output / 'trace.csv', trace_csv(rows, {'config_digest': config.digest}))
        self.done(f'Wrote {path} ({len(rows)} rows)')

    def period(self, config, output, options):
        t0 = config['solver']['T'] if options.get('t0') is None else options['t0']
        reports = period_study(
            config.coefficients, config.epsilon, config.order, config.initial(), config.gauge(), t0,
            options['subdivisions'], config.grid_n, config.integrator(), config.n_quad,
        )
        self.record(reports, 'period', config)
        path = write_text(output / 'period.csv', reports_csv(reports, {'config_digest': config.digest}))
        self.done(f'Wrote {path}')

    def sections(self, config, output, options):
        rows = section_study(
            config.coefficients, config.epsilon, config.order, config.initial(),
            self.times(config, options.get('t')), config.gauge(), config.grid_n, config.integrator(), config.n_quad,
        )
        path = write_text(output / 'sections.csv', section_csv(rows, {'config_digest': config.digest}))
        self.done(f'Wrote {path} ({len(rows)} rows)')

    def tail(self, config, output, options):
        t = config['solver']['T'] if options.get('t') is None else options['t']
        try:
            orders = _ints(options['orders']) if options.get('orders') else config['sweep']['orders'] or [2, 4, 6, 8]
        except ValueError:
            raise ConfigError(f'cannot parse orders {options["orders"]!r}')
        rows = p_tail_study(config.coefficients, t, orders, config.gauge(), config.grid_n, config.n_quad)
        path = write_text(output / 'tail.csv', tail_csv(rows, {'config_digest': config.digest}))
        self.done(f'Wrote {path}')
