"""
Reference problem for the oscillating seabed z^eps on the torus

    dz/dt = (1/eps) [div(A^eps grad z) + div C^eps]

written as one dense Galerkin matrix per stage time. A^eps and C^eps are
re-expanded at every stage time because their fast phase t/eps moves
within a step.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dunes_project.audit import log_run
from dunes_project.exceptions import ParameterError
from limit_solver.system import GaugeSpec, solve_profile
from spectral.fields import SpectralField2
from spectral.snapshots import dump_snapshot
from spectral.transforms import default_quadrature, dft_coefficients, slice_theta
from .integrator import DormandPrince, IntegratorConfig

logger = logging.getLogger(__name__)

STABILITY_SAMPLES = 5


@dataclass(frozen=True)
class ReferenceState:
    t: float
    z: SpectralField2
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f'epsilon must be positive, got {self.epsilon}')


# initial conditions

@dataclass(frozen=True)
class CosineCombo:
    """
    sum over h in harmonics of cos(2 pi h x1)
    """
    harmonics: tuple = (1, 2)

    def project(self, order):
        coeffs = np.zeros((2 * order + 1,) * 2, dtype=np.complex128)
        for h in self.harmonics:
            if abs(h) > order:
                continue
            coeffs[order + h, order] += 0.5
            coeffs[order - h, order] += 0.5
        return SpectralField2(order, coeffs, real_valued=True)


@dataclass(frozen=True)
class Constant:
    value: float = 0.0

    def project(self, order):
        return SpectralField2.delta(order, (0, 0), self.value).replace(real_valued=True)


@dataclass(frozen=True)
class SampledInitial:
    """
    Any 1-periodic sampler (x1, x2) -> z0
    """
    sampler: object
    n_quad: int | None = None

    def project(self, order):
        return dft_coefficients(self.sampler, order, self.n_quad, ndim=2)


@dataclass(frozen=True)
class WellPrepared:
    """
    z0 = Z(0, 0, .), the theta = 0 slice of the limit profile at t = 0
    """
    coefficients: object
    gauge: GaugeSpec = field(default_factory=GaugeSpec)
    n_quad: int | None = None

    def project(self, order):
        profile = solve_profile(self.coefficients, 0.0, order, self.gauge, self.n_quad).profile
        sliced = slice_theta(profile, 0.0)
        return sliced.replace(t_param=0.0, real_valued=profile.real_valued)


def project_initial(z0, order):
    if isinstance(z0, (int, float)):
        z0 = Constant(float(z0))
    elif callable(z0) and not hasattr(z0, 'project'):
        z0 = SampledInitial(z0)
    return z0.project(order)


# right-hand side

class ReferenceProblem:
    """
    Time derivative of the coefficient vector, as needed by the integrator
    """

    def __init__(self, coefficients, epsilon, order, n_quad=None):
        if not epsilon > 0:
            raise ParameterError(f'epsilon must be positive, got {epsilon}')
        self.coefficients = coefficients
        self.epsilon = float(epsilon)
        self.order = order
        self.n_quad = n_quad or default_quadrature(order)

    def derivative(self, t, z):
        return z.replace(coeffs=self(t, z.flat()).reshape(z.coeffs.shape), t_param=t)

    def __call__(self, t, y):
        spectra = self.coefficients.reference_spectra(self.epsilon, t, self.order, self.n_quad)
        return (spectra.operator @ y + spectra.div_c.flat()) / self.epsilon


def rhs(state, coefficients, order=None, n_quad=None):
    order = state.z.order if order is None else order
    return ReferenceProblem(coefficients, state.epsilon, order, n_quad).derivative(state.t, state.z)


# trajectories

@dataclass
class Trajectory:
    epsilon: float
    times: list
    snapshots: list
    statistics: object
    runtime_s: float = 0.0

    def at(self, t):
        for time_, snapshot in zip(self.times, self.snapshots):
            if time_ == t:
                return snapshot
        raise KeyError(f'no snapshot at t={t}; available: {self.times}')

    @property
    def final(self):
        return self.snapshots[-1]

    def mass_drift(self):
        mean0 = self.snapshots[0].coefficient(0, 0)
        return max(abs(s.coefficient(0, 0) - mean0) for s in self.snapshots)

    def stats_line(self):
        return self.statistics.summary()

    def write(self, directory):
        """
        One snapshot file per output time plus a stats.txt summary line
        """
        directory = Path(directory)
        paths = []
        for time_, snapshot in zip(self.times, self.snapshots):
            paths.append(dump_snapshot(snapshot, directory / f'z_t{time_:.6g}.spec', comments=[f'epsilon={self.epsilon:.17g}']))
        (directory / 'stats.txt').write_text(self.stats_line() + '\n', encoding='utf-8')
        return paths


def integrate(state0, coefficients, T, config=None, output_times=(), n_quad=None):
    """
    Integrate the reference problem from state0.t to T
    """
    config = config or IntegratorConfig()
    if not T > state0.t:
        raise ParameterError(f'T must exceed the start time {state0.t}, got {T}')
    order = state0.z.order
    problem = ReferenceProblem(coefficients, state0.epsilon, order, n_quad)
    max_a = coefficients.max_a_tilde(np.linspace(state0.t, T, STABILITY_SAMPLES))
    cap = config.stability_cap(state0.epsilon, order, max_a)
    integrator = DormandPrince(problem, config, stability_cap=cap)

    started = time.perf_counter()
    samples, statistics = integrator.integrate(state0.t, state0.z.flat(), T, output_times)
    runtime = time.perf_counter() - started

    width = 2 * order + 1
    snapshots = []
    for t, y in samples:
        z = SpectralField2(order, y.reshape(width, width), t)
        snapshots.append(z.replace(real_valued=state0.z.real_valued and z.hermitian_defect() <= 1e-9))
    trajectory = Trajectory(state0.epsilon, [t for t, _ in samples], snapshots, statistics, runtime)

    log_run(
        'reference_solve', epsilon=state0.epsilon, order=order, T=T, stability_cap=cap, max_a_tilde=max_a,
        accepted=statistics.accepted, rejected=statistics.rejected, h_min=statistics.h_min,
        h_max=statistics.h_max, mass_drift=trajectory.mass_drift(), runtime_s=runtime,
    )
    return trajectory
