"""
Water velocity U(t, theta, x) and water height M(t, theta, x)

Samplers are vectorized: t, theta, x1 and x2 may be scalars or arrays that
broadcast together, and a velocity returns its two components.
"""
from __future__ import annotations

import numpy as np

from dunes_project.exceptions import InvalidSampleError, ParameterError
from .expressions import compile_expression

SAMPLER_VARIABLES = ('t', 'theta', 'x1', 'x2')


class VelocityField:
    """
    Base class; subclasses implement `sample` on a theta already reduced mod 1
    """
    variant = 'abstract'
    u_thr = 0.0

    def __call__(self, t, theta, x1, x2, reduce=True):
        theta = np.asarray(theta, dtype=float)
        if reduce:
            theta = np.mod(theta, 1.0)
        u1, u2 = self.sample(t, theta, x1, x2)
        shape = np.broadcast(np.asarray(t), theta, np.asarray(x1), np.asarray(x2)).shape
        return np.broadcast_to(u1, shape), np.broadcast_to(u2, shape)

    def sample(self, t, theta, x1, x2):
        raise NotImplementedError

    def describe(self):
        return self.variant


class ShearSine(VelocityField):
    """
    U = sin(pi x1) sin(2 pi theta) e1

    sin(pi x1) is only continuous across the x1 seam, so coefficients of this
    field decay algebraically.
    """
    variant = 'shear_sine'

    def __init__(self, u_thr=1.0):
        self.u_thr = float(u_thr)

    def sample(self, t, theta, x1, x2):
        u1 = np.sin(np.pi * np.asarray(x1)) * np.sin(2 * np.pi * theta)
        return u1, np.zeros_like(u1)


class TidalPiecewise(VelocityField):
    """
    Idealized tide: slack, flood ramp, flood plateau with a bump, ramp down,
    slack, then the same pattern reversed for the ebb.

    Breakpoints are theta_i = (i + 1) / 10 for i = 1..8. Ramps run towards
    the neighbouring plateau so the signal is continuous in theta.
    """
    variant = 'tidal_piecewise'

    def __init__(self, u_thr=1.0):
        if not u_thr > 0:
            raise ParameterError(f'U_thr must be positive, got {u_thr}')
        self.u_thr = float(u_thr)
        self.breakpoints = tuple((i + 1) / 10 for i in range(1, 9))

    @staticmethod
    def bump(s):
        return s * (1 - s)

    def psi(self, t, x1):
        amplitude = 1 + np.sin(np.pi * np.asarray(t) / 30)
        return (
            amplitude * 0.1 * (1 + np.sin(2 * np.pi * np.asarray(x1))),
            amplitude * self.u_thr * np.ones_like(np.asarray(x1, dtype=float)),
        )

    def sample(self, t, theta, x1, x2):
        th1, th2, th3, th4, th5, th6, th7, th8 = self.breakpoints
        u_thr = self.u_thr
        theta, x1 = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(x1, dtype=float))
        psi1, psi2 = self.psi(t, x1)
        flood_bump = self.bump((theta - th2) / (th3 - th2))
        ebb_bump = self.bump((theta - th6) / (th7 - th6))

        branches = [
            theta < th1,
            theta < th2,
            theta < th3,
            theta < th4,
            theta < th5,
            theta < th6,
            theta < th7,
            theta < th8,
        ]
        u2 = np.select(branches, [
            0.0,
            (theta - th1) / (th2 - th1) * u_thr,
            u_thr + flood_bump * psi2,
            (th4 - theta) / (th4 - th3) * u_thr,
            0.0,
            -(theta - th5) / (th6 - th5) * u_thr,
            -u_thr - ebb_bump * psi2,
            -(th8 - theta) / (th8 - th7) * u_thr,
        ], default=0.0)
        u1 = np.select(
            [(theta >= th2) & (theta < th3), (theta >= th6) & (theta < th7)],
            [flood_bump * psi1, -ebb_bump * psi1],
            default=0.0,
        )
        return u1, u2

    def threshold_window(self):
        """
        Theta interval on which |U| >= U_thr everywhere
        """
        return self.breakpoints[1], self.breakpoints[2]


class UniformVelocity(VelocityField):
    variant = 'uniform'

    def __init__(self, u1=1.0, u2=0.0, u_thr=0.0):
        self.u1, self.u2 = float(u1), float(u2)
        self.u_thr = float(u_thr)

    def sample(self, t, theta, x1, x2):
        return np.full(np.shape(x1), self.u1), np.full(np.shape(x1), self.u2)


class CustomVelocity(VelocityField):
    """
    User sampler (t, theta, x1, x2) -> (u1, u2), checked for finiteness
    """
    variant = 'custom'

    def __init__(self, sampler, u_thr=0.0, label='custom'):
        self.sampler = sampler
        self.u_thr = float(u_thr)
        self.label = label

    @classmethod
    def from_expressions(cls, u1, u2, u_thr=0.0):
        first = compile_expression(u1, SAMPLER_VARIABLES)
        second = compile_expression(u2, SAMPLER_VARIABLES)
        return cls(lambda t, theta, x1, x2: (first(t, theta, x1, x2), second(t, theta, x1, x2)),
                   u_thr=u_thr, label=f'({u1}; {u2})')

    def sample(self, t, theta, x1, x2):
        u1, u2 = self.sampler(t, theta, x1, x2)
        for component in (u1, u2):
            check_sample(component, t, theta, x1, x2)
        return u1, u2

    def describe(self):
        return f'custom {self.label}'


def check_sample(values, t, theta, x1, x2):
    values = np.asarray(values)
    finite = np.isfinite(values)
    if np.all(finite):
        return
    where = tuple(np.argwhere(~finite)[0]) if values.ndim else ()
    coords = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, theta, x1, x2)))
    point = tuple(float(c[where]) if c.shape == values.shape else float(c.flat[0]) for c in coords)
    raise InvalidSampleError(f'velocity sampler returned a non-finite value at (t, theta, x1, x2)={point}', point=point)


def eval_U(velocity, t, theta, x):
    """
    Velocity vector at one point, theta taken mod 1
    """
    u1, u2 = velocity(t, theta, x[0], x[1])
    return np.array([float(u1), float(u2)])


class WaterHeight:
    """
    M(t, theta, x); the studies use still water (M = 0)
    """

    def __init__(self, sampler=None, variant='zero', value=0.0):
        self.sampler = sampler
        self.variant = variant
        self.value = float(value)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, value):
        return cls(variant='constant', value=value)

    @property
    def is_zero(self):
        return self.sampler is None and self.value == 0.0

    def __call__(self, t, theta, x1, x2):
        shape = np.broadcast(np.asarray(t), np.asarray(theta), np.asarray(x1), np.asarray(x2)).shape
        if self.sampler is None:
            return np.full(shape, self.value)
        values = np.broadcast_to(self.sampler(t, np.mod(theta, 1.0), x1, x2), shape)
        check_sample(values, t, theta, x1, x2)
        return values


VELOCITY_VARIANTS = {
    'shear_sine': ShearSine,
    'tidal_piecewise': TidalPiecewise,
    'uniform': UniformVelocity,
}
