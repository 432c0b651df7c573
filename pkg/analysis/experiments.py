"""
Comparisons between the reference solution z^eps(t, .) and the limit
profile Z(t, t/eps, .), and the studies built on them.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from django.conf import settings

from coefficients.coefficient_set import fast_phase
from dunes_project.audit import log_run
from dunes_project.exceptions import DunesError, ParameterError
from limit_solver.system import GaugeSpec, solve_profile
from reference_solver.integrator import IntegratorConfig
from reference_solver.solver import CosineCombo, ReferenceState, integrate, project_initial
from spectral.fields import GridSpec
from spectral.transforms import default_quadrature, real_grid
from .norms import ErrorReport, error_norms
from .reports import reports_csv, rows_csv, write_text

logger = logging.getLogger(__name__)


class TailRow(NamedTuple):
    P: int
    rel_l2_gap: float


class SectionRow(NamedTuple):
    t: float
    x1: float
    reference: float
    limit: float


class TraceRow(NamedTuple):
    theta: float
    x1: float
    x2: float
    U1: float
    U2: float
    A_tilde: float


def _grid(grid_n):
    return GridSpec(grid_n or settings.DUNES['GRID_N'])


def _reference_run(coefficients, epsilon, order, times, z0, integrator, n_quad):
    """
    Project z0 and integrate once up to the latest positive time
    """
    z0_field = project_initial(z0, order)
    positive = sorted({float(t) for t in times if t > 0})
    if not positive:
        return z0_field, None
    trajectory = integrate(
        ReferenceState(0.0, z0_field, epsilon), coefficients, positive[-1],
        integrator or IntegratorConfig.from_settings(), output_times=positive, n_quad=n_quad,
    )
    return z0_field, trajectory


def compare_times(coefficients, epsilon, order, times, z0, gauge=None, grid_n=None, integrator=None,
                  n_quad=None, record_runtime=True):
    """
    One ErrorReport per time; failures are stored in the report's error field
    """
    grid = _grid(grid_n)
    started = time.perf_counter()

    def elapsed():
        return time.perf_counter() - started if record_runtime else 0.0

    try:
        if any(t < 0 for t in times):
            raise ParameterError(f'comparison times must be non-negative, got {list(times)}')
        z0_field, trajectory = _reference_run(coefficients, epsilon, order, times, z0, integrator, n_quad)
    except DunesError as exc:
        logger.warning('Reference run eps=%s P=%s failed: %s', epsilon, order, exc)
        return [ErrorReport.failure(epsilon, order, t, exc, elapsed()) for t in times]

    gauge = gauge or GaugeSpec.from_initial(z0_field)
    steps = trajectory.statistics.accepted if trajectory else 0
    reports = []
    for t in times:
        try:
            profile = solve_profile(coefficients, t, order, gauge, n_quad).profile
            reference = z0_field if t == 0 else trajectory.at(float(t))
            norms = error_norms(
                real_grid(profile, grid, theta=fast_phase(epsilon, t)), real_grid(reference, grid),
            )
            reports.append(ErrorReport.from_norms(epsilon, order, t, norms, elapsed(), steps))
        except DunesError as exc:
            logger.warning('Comparison eps=%s P=%s t=%s failed: %s', epsilon, order, t, exc)
            reports.append(ErrorReport.failure(epsilon, order, t, exc, elapsed()))
    return reports


def compare_at(coefficients, epsilon, order, t, z0, gauge=None, grid_n=None, integrator=None, n_quad=None):
    """
    Distance between z^eps(t, .) and Z(t, t/eps mod 1, .) on the evaluation grid
    """
    report, = compare_times(coefficients, epsilon, order, [t], z0, gauge, grid_n, integrator, n_quad)
    log_run(
        'compare', epsilon=epsilon, order=order, t=t, l1=report.l1, l2=report.l2, linf=report.linf,
        steps=report.steps, error=report.error,
    )
    return report


@dataclass(frozen=True)
class SweepPlan:
    coefficients: object
    epsilons: tuple
    orders: tuple
    times: tuple
    z0: object = field(default_factory=CosineCombo)
    gauge: GaugeSpec | None = None
    grid_n: int | None = None
    integrator: IntegratorConfig | None = None
    n_quad: int | None = None
    workers: int = 1
    output: Path | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ('epsilons', 'orders', 'times'):
            values = tuple(getattr(self, name))
            if not values:
                raise ParameterError(f'sweep {name} must not be empty')
            object.__setattr__(self, name, values)
        if any(not epsilon > 0 for epsilon in self.epsilons):
            raise ParameterError(f'sweep epsilons must be positive, got {self.epsilons}')
        if self.workers < 1:
            raise ParameterError(f'sweep needs at least one worker, got {self.workers}')

    def cells(self):
        return [(epsilon, order) for epsilon in self.epsilons for order in self.orders]


@dataclass(frozen=True)
class SweepResult:
    reports: list
    text: str
    path: Path | None = None

    @property
    def failures(self):
        return [report for report in self.reports if report.failed]


def epsilon_sweep(plan, record_runtime=True):
    """
    One row per (epsilon, P, t), in plan order whatever the pool schedule
    """
    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        futures = [
            pool.submit(
                compare_times, plan.coefficients, epsilon, order, plan.times, plan.z0, plan.gauge,
                plan.grid_n, plan.integrator, plan.n_quad, record_runtime,
            )
            for epsilon, order in plan.cells()
        ]
        reports = [report for future in futures for report in future.result()]

    text = reports_csv(reports, plan.metadata)
    path = write_text(plan.output, text) if plan.output else None
    result = SweepResult(reports, text, path)
    log_run(
        'sweep', epsilons=plan.epsilons, orders=plan.orders, times=plan.times, rows=len(reports),
        failures=len(result.failures), workers=plan.workers,
    )
    return result


def p_tail_study(coefficients, t, orders, gauge=None, grid_n=None, n_quad=None, theta_samples=8):
    """
    Relative L2 gap between each Z_P and the largest order, over a theta lattice
    """
    orders = list(orders)
    if not orders:
        raise ParameterError('the tail study needs at least one order')
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise ParameterError(f'orders must be strictly increasing, got {orders}')
    grid = _grid(grid_n)
    reference_order = orders[-1]
    grid.check_resolves(reference_order)
    n_quad = n_quad or default_quadrature(reference_order)
    gauge = gauge or GaugeSpec()
    thetas = np.arange(theta_samples) / theta_samples

    def samples(order):
        profile = solve_profile(coefficients, t, order, gauge, n_quad).profile
        return np.stack([real_grid(profile, grid, theta=theta).values for theta in thetas])

    reference = samples(reference_order)
    scale = float(np.sqrt(np.mean(reference ** 2)))
    rows = []
    for order in orders[:-1]:
        gap = float(np.sqrt(np.mean((samples(order) - reference) ** 2)))
        rows.append(TailRow(order, gap / scale if scale > 0 else gap))
    rows.append(TailRow(reference_order, 0.0))
    log_run('tail', t=t, orders=orders, gaps=[row.rel_l2_gap for row in rows])
    return rows


def period_study(coefficients, epsilon, order, z0, gauge=None, t0=1.0, subdivisions=4, grid_n=None,
                 integrator=None, n_quad=None, record_runtime=True):
    """
    Comparisons at t0 + n eps / subdivisions for n = 0 .. subdivisions - 1
    """
    if subdivisions < 1:
        raise ParameterError(f'subdivisions must be at least 1, got {subdivisions}')
    times = [t0 + n * epsilon / subdivisions for n in range(subdivisions)]
    return compare_times(coefficients, epsilon, order, times, z0, gauge, grid_n, integrator, n_quad, record_runtime)


def section_study(coefficients, epsilon, order, z0, times, gauge=None, grid_n=None, integrator=None, n_quad=None):
    """
    Reference and limit values along the cut x2 = 0
    """
    grid = _grid(grid_n)
    z0_field, trajectory = _reference_run(coefficients, epsilon, order, times, z0, integrator, n_quad)
    gauge = gauge or GaugeSpec.from_initial(z0_field)
    rows = []
    for t in times:
        profile = solve_profile(coefficients, t, order, gauge, n_quad).profile
        limit = real_grid(profile, grid, theta=fast_phase(epsilon, t)).values[:, 0]
        reference = real_grid(z0_field if t == 0 else trajectory.at(float(t)), grid).values[:, 0]
        rows.extend(
            SectionRow(float(t), float(x1), float(r), float(z))
            for x1, r, z in zip(grid.axis(), reference, limit)
        )
    return rows


def theta_trace(coefficients, t, points, samples=64):
    """
    Velocity and A~ over one tide period at fixed positions
    """
    if samples < 1:
        raise ParameterError(f'samples must be at least 1, got {samples}')
    thetas = np.arange(samples) / samples
    rows = []
    for x1, x2 in points:
        u1, u2 = coefficients.velocity(t, thetas, x1, x2)
        a_tilde = coefficients.eval_A_tilde(t, thetas, x1, x2)
        rows.extend(
            TraceRow(float(theta), float(x1), float(x2), float(v1), float(v2), float(a))
            for theta, v1, v2, a in zip(thetas, u1, u2, a_tilde)
        )
    return rows


def tail_csv(rows, metadata=None):
    return rows_csv(TailRow._fields, rows, metadata)


def section_csv(rows, metadata=None):
    return rows_csv(SectionRow._fields, rows, metadata)


def trace_csv(rows, metadata=None):
    return rows_csv(TraceRow._fields, rows, metadata)
