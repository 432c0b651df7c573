"""
Explicit Dormand-Prince 5(4) pair with PI step control, a stability cap on
the step size and cubic Hermite dense output.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from dunes_project.exceptions import DivergenceError, IntegrationFailure, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float | None = None
    h_max: float = math.inf
    max_steps: int = 5_000_000
    safety: float = 0.9

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError(f'tolerances must be positive, got rtol={self.rtol} atol={self.atol}')
        if not self.h_max > 0:
            raise ParameterError(f'h_max must be positive, got {self.h_max}')
        if self.h_init is not None and not self.h_init > 0:
            raise ParameterError(f'h_init must be positive, got {self.h_init}')
        if self.max_steps < 1:
            raise ParameterError(f'max_steps must be at least 1, got {self.max_steps}')

    @classmethod
    def from_settings(cls, **overrides):
        defaults = {
            'rtol': settings.DUNES['RTOL'],
            'atol': settings.DUNES['ATOL'],
            'max_steps': settings.DUNES['MAX_STEPS'],
        }
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)

    def stability_cap(self, epsilon, order, max_a):
        """
        Explicit stability bound set by the fastest decaying resolved mode
        """
        return self.safety * epsilon / (4 * np.pi ** 2 * 2 * order ** 2 * max_a + 1)


class StepController:
    """
    PI controller on the weighted local error
    """

    def __init__(self, safety=0.9, alpha=0.17, beta=0.04, min_factor=0.2, max_factor=10.0):
        self.safety = safety
        self.alpha = alpha
        self.beta = beta
        self.min_factor = min_factor
        self.max_factor = max_factor
        self.previous_error = 1e-4
        self.rejected_last = False

    def accept(self, error):
        if error == 0:
            factor = self.max_factor
        else:
            factor = self.safety * error ** -self.alpha * self.previous_error ** self.beta
            factor = min(self.max_factor, max(self.min_factor, factor))
        if self.rejected_last:
            factor = min(1.0, factor)
        self.previous_error = max(error, 1e-4)
        self.rejected_last = False
        return factor

    def reject(self, error):
        self.rejected_last = True
        return max(self.min_factor, self.safety * error ** -0.2)


@dataclass
class IntegrationStatistics:
    accepted: int = 0
    rejected: int = 0
    h_min: float = math.inf
    h_max: float = 0.0
    evaluations: int = 0

    def record(self, h):
        self.accepted += 1
        self.h_min = min(self.h_min, h)
        self.h_max = max(self.h_max, h)

    def summary(self):
        h_min = 0.0 if self.accepted == 0 else self.h_min
        return f'accepted={self.accepted} rejected={self.rejected} h_min={h_min:.6e} h_max={self.h_max:.6e}'


def hermite(t0, y0, f0, t1, y1, f1, t):
    """
    Cubic Hermite interpolant between two accepted states
    """
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s ** 2 * (3 - 2 * s)
    h11 = s ** 2 * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


class DormandPrince:
    """
    Integrate y' = fun(t, y) for complex state vectors
    """
    C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
    A = [
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
    B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
    # fifth-order weights minus the embedded fourth-order ones
    E = np.array([
        71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
    ])

    def __init__(self, fun, config=None, stability_cap=math.inf):
        self.fun = fun
        self.config = config or IntegratorConfig()
        self.stability_cap = stability_cap
        self.controller = StepController(safety=self.config.safety)
        self.statistics = IntegrationStatistics()

    def _evaluate(self, t, y):
        self.statistics.evaluations += 1
        return self.fun(t, y)

    def error_norm(self, error, y, y_new):
        scale = self.config.atol + self.config.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean(np.abs(error / scale) ** 2)))

    def initial_step(self, t, y, f):
        if self.config.h_init is not None:
            return self.config.h_init
        scale = self.config.atol + self.config.rtol * np.abs(y)
        d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(f / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, self.stability_cap, self.config.h_max)
        f1 = self._evaluate(t + h0, y + h0 * f)
        d2 = np.sqrt(np.mean(np.abs((f1 - f) / scale) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, self.stability_cap, self.config.h_max)

    def step(self, t, y, f, h):
        """
        One Dormand-Prince attempt; returns (y_new, f_new, error estimate)
        """
        stages = [f]
        for i in range(1, 7):
            increment = sum(a * k for a, k in zip(self.A[i], stages) if a != 0)
            stages.append(self._evaluate(t + self.C[i] * h, y + h * increment))
        y_new = y + h * sum(b * k for b, k in zip(self.B, stages) if b != 0)
        error = h * sum(e * k for e, k in zip(self.E, stages) if e != 0)
        return y_new, stages[-1], error

    def integrate(self, t0, y0, t_end, output_times=()):
        """
        March from t0 to t_end; returns the states at t0, every output time and t_end
        """
        if not t_end > t0:
            raise ParameterError(f'end time must exceed start time, got [{t0}, {t_end}]')
        requested = sorted({float(t0), float(t_end), *(float(t) for t in output_times)})
        if requested[0] < t0 or requested[-1] > t_end:
            raise ParameterError(f'output times must lie in [{t0}, {t_end}]')

        t, y = float(t0), np.asarray(y0, dtype=np.complex128).copy()
        f = self._evaluate(t, y)
        outputs = {requested[0]: y.copy()}
        pending = requested[1:]
        h = self.initial_step(t, y, f)
        attempts = 0

        while pending:
            attempts += 1
            if attempts > self.config.max_steps:
                raise IntegrationFailure(
                    f'step budget of {self.config.max_steps} exhausted at t={t:.6g}',
                    state=(t, y), statistics=self.statistics,
                )
            h = min(h, self.stability_cap, self.config.h_max)
            last = t + h >= t_end - 1e-12 * max(1.0, abs(t_end))
            if last:
                h = t_end - t
            if h <= 1e-14 * max(1.0, abs(t)):
                raise IntegrationFailure(
                    f'step size underflow (h={h:.3e}) at t={t:.6g}', state=(t, y), statistics=self.statistics,
                )

            y_new, f_new, error = self.step(t, y, f, h)
            if not np.all(np.isfinite(y_new)):
                raise DivergenceError(
                    f'state became non-finite at t={t + h:.6g}', state=(t, y), statistics=self.statistics,
                )
            norm = self.error_norm(error, y, y_new)
            if norm > 1.0:
                self.statistics.rejected += 1
                h *= self.controller.reject(norm)
                continue

            t_new = t_end if last else t + h
            self.statistics.record(h)
            while pending and pending[0] <= t_new:
                target = pending.pop(0)
                outputs[target] = y_new.copy() if target == t_new else hermite(t, y, f, t_new, y_new, f_new, target)
            t, y, f = t_new, y_new, f_new
            h *= self.controller.accept(norm)

        logger.debug('Integration finished: %s', self.statistics.summary())
        return [(time, outputs[time]) for time in requested], self.statistics
