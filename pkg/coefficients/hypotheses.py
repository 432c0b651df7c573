"""
Sampled checks of the structural assumptions on the laws, the velocity and
the water height. Checks never abort; they fill a HypothesisReport.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from dunes_project.exceptions import ParameterError

logger = logging.getLogger(__name__)

MIN_DENSITY = 16
PERIODICITY_TOLERANCE = 1e-12
DERIVATIVE_STEP = 1e-6
DERIVATIVE_TOLERANCE = 1e-6


class Violation(NamedTuple):
    hypothesis: str
    witness: tuple
    detail: str = ''


@dataclass
class HypothesisReport:
    d_estimate: float = 0.0
    u_thr_used: float = 0.0
    g_thr_estimate: float = 0.0
    a_tilde_inf: float = 0.0
    periodicity_defect: float = 0.0
    threshold_window: tuple | None = None
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def violated(self, hypothesis):
        return any(v.hypothesis == hypothesis for v in self.violations)

    def as_text(self):
        lines = [
            f'd_estimate {self.d_estimate:.6g}',
            f'u_thr_used {self.u_thr_used:.6g}',
            f'g_thr_estimate {self.g_thr_estimate:.6g}',
            f'a_tilde_inf {self.a_tilde_inf:.6g}',
            f'periodicity_defect {self.periodicity_defect:.3e}',
            'threshold_window ' + (
                'none' if self.threshold_window is None
                else f'[{self.threshold_window[0]:.6g}, {self.threshold_window[1]:.6g}]'
            ),
            f'violations {len(self.violations)}',
        ]
        for violation in self.violations:
            witness = ', '.join(f'{w:.6g}' for w in violation.witness)
            lines.append(f'  {violation.hypothesis} at ({witness}) {violation.detail}'.rstrip())
        return '\n'.join(lines) + '\n'


def _derivative(g, u):
    return (g(u + DERIVATIVE_STEP) - g(np.maximum(u - DERIVATIVE_STEP, 0.0))) / (
        u + DERIVATIVE_STEP - np.maximum(u - DERIVATIVE_STEP, 0.0)
    )


def _law_bound(g, speeds):
    return float(np.max(np.abs(g(speeds))) + np.max(np.abs(_derivative(g, speeds))))


def check_hypotheses(coefficients, sample_density=16, t_values=(0.0, 0.5, 1.0), u_max=None):
    """
    Sample laws on a log-spaced speed grid and (U, M) on a (t, theta, x) lattice
    """
    if sample_density < MIN_DENSITY:
        raise ParameterError(f'sample density must be at least {MIN_DENSITY}, got {sample_density}')
    laws, velocity, height = coefficients.laws, coefficients.velocity, coefficients.height
    report = HypothesisReport(u_thr_used=float(velocity.u_thr))

    axis = np.arange(sample_density) / sample_density
    thetas = np.append(axis, 1.0)
    t, theta, x1, x2 = np.meshgrid(np.asarray(t_values, dtype=float), thetas, axis, axis, indexing='ij')
    u1, u2 = velocity(t, theta, x1, x2, reduce=False)
    speed = np.hypot(u1, u2)
    m = height(t, theta, x1, x2)

    # laws
    u_max = u_max or max(1.0, float(np.max(speed)))
    speeds = np.concatenate([[0.0], np.logspace(-6, np.log10(u_max), 8 * sample_density)])
    g_a, g_c = laws.g_a(speeds), laws.g_c(speeds)
    order_defect = np.flatnonzero((g_a < g_c) | (g_c < 0))
    if order_defect.size:
        u = speeds[order_defect[0]]
        report.violations.append(Violation('g-order', (u,), 'g_a >= g_c >= 0 fails'))
    if abs(float(laws.g_c(0.0))) > 0 or abs(float(_derivative(laws.g_c, 0.0))) > DERIVATIVE_TOLERANCE:
        report.violations.append(Violation('g-order', (0.0,), 'g_c(0) = g_c\'(0) = 0 fails'))

    bound = max(_law_bound(laws.g_a, speeds), _law_bound(laws.g_c, speeds))
    extended = np.concatenate([speeds, np.logspace(np.log10(u_max), np.log10(10 * u_max), 2 * sample_density)])
    extended_bound = max(_law_bound(laws.g_a, extended), _law_bound(laws.g_c, extended))
    if extended_bound > bound * (1 + 1e-6):
        report.violations.append(Violation(
            'g-bounded', (10 * u_max,), f'sup |g| + |g\'| grows from {bound:.6g} to {extended_bound:.6g}',
        ))

    above = speeds >= report.u_thr_used
    g_floor = float(np.min(laws.g_a(speeds[above]))) if np.any(above) else 0.0
    if not g_floor > 0:
        report.violations.append(Violation('g-threshold', (report.u_thr_used,), 'g_a not bounded below past U_thr'))

    # velocity and water height
    report.d_estimate = max(bound, _field_bound(velocity, height, t, theta, x1, x2, speed, m))
    report.periodicity_defect = float(max(
        np.max(np.abs(u1[:, 0] - u1[:, -1])),
        np.max(np.abs(u2[:, 0] - u2[:, -1])),
        np.max(np.abs(m[:, 0] - m[:, -1])),
    ))
    if report.periodicity_defect > PERIODICITY_TOLERANCE:
        where = np.unravel_index(np.argmax(np.abs(u1[:, 0] - u1[:, -1]) + np.abs(u2[:, 0] - u2[:, -1])), u1[:, 0].shape)
        report.violations.append(Violation(
            'periodicity', (t[:, 0][where], 0.0, x1[:, 0][where], x2[:, 0][where]),
            f'defect {report.periodicity_defect:.3e}',
        ))

    _check_still_water(report, velocity, height, t, theta, x1, x2, speed)
    _check_threshold_window(report, coefficients, thetas, t, theta, x1, x2, speed)

    a_tilde = coefficients.laws.a * laws.g_a(speed)
    report.a_tilde_inf = float(np.min(a_tilde))
    if not report.a_tilde_inf > 0:
        where = np.unravel_index(np.argmin(a_tilde), a_tilde.shape)
        report.violations.append(Violation(
            'diffusion-lower-bound', (t[where], theta[where], x1[where], x2[where]), 'inf A~ = 0',
        ))

    for violation in report.violations:
        logger.warning('Hypothesis %s not satisfied at %s %s', violation.hypothesis, violation.witness, violation.detail)
    return report


def _field_bound(velocity, height, t, theta, x1, x2, speed, m):
    h = DERIVATIVE_STEP
    bounds = [float(np.max(speed)), float(np.max(np.abs(m)))]
    for shift in ((h, 0, 0, 0), (0, h, 0, 0), (0, 0, h, 0), (0, 0, 0, h)):
        moved = (t + shift[0], theta + shift[1], x1 + shift[2], x2 + shift[3])
        v1, v2 = velocity(*moved, reduce=False)
        base1, base2 = velocity(t, theta, x1, x2, reduce=False)
        bounds.append(float(np.max(np.hypot(v1 - base1, v2 - base2))) / h)
        bounds.append(float(np.max(np.abs(height(*moved) - height(t, theta, x1, x2)))) / h)
    return max(bounds)


def _check_still_water(report, velocity, height, t, theta, x1, x2, speed):
    """
    Where |U| <= U_thr the flow must not vary in t or x
    """
    h = DERIVATIVE_STEP
    base1, base2 = velocity(t, theta, x1, x2, reduce=False)
    base_m = height(t, theta, x1, x2)
    calm = speed <= report.u_thr_used
    for shift in ((h, 0, 0), (0, h, 0), (0, 0, h)):
        v1, v2 = velocity(t + shift[0], theta, x1 + shift[1], x2 + shift[2], reduce=False)
        moved_m = height(t + shift[0], theta, x1 + shift[1], x2 + shift[2])
        rate = (np.hypot(v1 - base1, v2 - base2) + np.abs(moved_m - base_m)) / h
        offending = calm & (rate > DERIVATIVE_TOLERANCE)
        if np.any(offending):
            where = np.unravel_index(np.argmax(np.where(offending, rate, -1.0)), rate.shape)
            report.violations.append(Violation(
                'still-water', (t[where], theta[where], x1[where], x2[where]),
                f'|U| <= U_thr but the flow varies at rate {rate[where]:.3e}',
            ))
            return


def _check_threshold_window(report, coefficients, thetas, t, theta, x1, x2, speed):
    """
    Longest theta run with |U| >= U_thr at every sampled (t, x)
    """
    slowest = np.min(speed, axis=(0, 2, 3))
    strong = slowest >= report.u_thr_used - PERIODICITY_TOLERANCE
    best, start = (0, None), None
    for index, flag in enumerate(strong):
        if flag and start is None:
            start = index
        if (not flag or index == len(strong) - 1) and start is not None:
            stop = index if flag else index - 1
            if stop - start > best[0] or best[1] is None:
                best = (stop - start, (start, stop))
            start = None
    if best[1] is None or best[0] == 0:
        witness = int(np.argmin(slowest))
        report.violations.append(Violation(
            'threshold-window', (float(thetas[witness]),), 'no theta interval with |U| >= U_thr everywhere',
        ))
        return
    first, last = best[1]
    report.threshold_window = (float(thetas[first]), float(thetas[last]))
    inside = (theta >= thetas[first]) & (theta <= thetas[last])
    a_tilde = coefficients.laws.a * coefficients.laws.g_a(speed)
    report.g_thr_estimate = float(np.min(a_tilde[inside]))
