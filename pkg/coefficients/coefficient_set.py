"""
PDE coefficients built from velocity, water height and bedload laws

    A~  = a g_a(|U|)                  C~  = c g_c(|U|) U/|U|
    A~1 = -a b M g_a(|U|)             C~1 = -c b M g_c(|U|) U/|U|
    A^eps(t, x) = A~(t, t/eps, x) + eps A~1(t, t/eps, x), same for C^eps
"""
from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from dunes_project.exceptions import ParameterError
from spectral.fields import GridSpec
from spectral.transforms import (
    default_quadrature, dft_coefficients, divergence_coeffs, divergence_form_matrix, gradient_coeffs,
)
from .laws import BedloadLaws
from .velocity import WaterHeight

logger = logging.getLogger(__name__)

PHYSICAL_EPSILON = 1 / 200
ZERO_SPEED = 1e-14
REFERENCE_CACHE_SIZE = 64
LIMIT_CACHE_SIZE = 16


@dataclass(frozen=True, eq=False)
class CoefficientSpectra:
    """
    Spectral coefficients of A, grad A, C and div C at one slow time t
    """
    a: object
    a_grad: tuple
    c: tuple
    div_c: object

    @property
    def order(self):
        return self.a.order

    @cached_property
    def operator(self):
        """
        Dense matrix of div(A grad .) on the space modes, built on first use
        """
        return divergence_form_matrix(self.a, self.a_grad)


def fast_phase(epsilon, t):
    if not epsilon > 0:
        raise ParameterError(f'epsilon must be positive, got {epsilon}')
    return np.mod(t / epsilon, 1.0)


class CoefficientSet:
    """
    Samplers and cached spectra of the coefficients for one physical setting
    """

    def __init__(self, velocity, laws=None, height=None):
        self.velocity = velocity
        self.laws = laws or BedloadLaws.cubic()
        self.height = height or WaterHeight.zero()
        self._lock = threading.Lock()
        self._key_locks = {}
        self._limit_cache = OrderedDict()
        self._reference = lru_cache(maxsize=REFERENCE_CACHE_SIZE)(self._compute_reference)

    def __repr__(self):
        return f'CoefficientSet(velocity={self.velocity.describe()}, laws={self.laws.name}, height={self.height.variant})'

    def _speed_and_direction(self, t, theta, x1, x2):
        u1, u2 = self.velocity(t, theta, x1, x2)
        speed = np.hypot(u1, u2)
        moving = speed > ZERO_SPEED
        safe = np.where(moving, speed, 1.0)
        return speed, np.where(moving, u1 / safe, 0.0), np.where(moving, u2 / safe, 0.0)

    def eval_A_tilde(self, t, theta, x1, x2):
        speed, _, _ = self._speed_and_direction(t, theta, x1, x2)
        return self.laws.a * self.laws.g_a(speed)

    def eval_C_tilde(self, t, theta, x1, x2):
        """
        c g_c(|U|) U/|U|, extended by zero where |U| <= 1e-14
        """
        speed, d1, d2 = self._speed_and_direction(t, theta, x1, x2)
        magnitude = self.laws.c * self.laws.g_c(speed)
        return magnitude * d1, magnitude * d2

    def eval_A1_C1(self, t, theta, x1, x2):
        speed, d1, d2 = self._speed_and_direction(t, theta, x1, x2)
        weight = -self.laws.b * self.height(t, theta, x1, x2)
        a1 = weight * self.laws.a * self.laws.g_a(speed)
        magnitude = weight * self.laws.c * self.laws.g_c(speed)
        return a1, (magnitude * d1, magnitude * d2)

    @property
    def has_corrections(self):
        return self.laws.b != 0 and not self.height.is_zero

    def eval_eps(self, epsilon, t, x1, x2):
        """
        A^eps and C^eps together from one velocity evaluation
        """
        theta = fast_phase(epsilon, t)
        speed, d1, d2 = self._speed_and_direction(t, theta, x1, x2)
        a = self.laws.a * self.laws.g_a(speed)
        magnitude = self.laws.c * self.laws.g_c(speed)
        if self.has_corrections:
            # A1 = -b M A~ and C1 = -b M C~
            factor = 1 - epsilon * self.laws.b * self.height(t, theta, x1, x2)
            a, magnitude = a * factor, magnitude * factor
        return a, (magnitude * d1, magnitude * d2)

    def eval_A_eps(self, epsilon, t, x1, x2):
        return self.eval_eps(epsilon, t, x1, x2)[0]

    def eval_C_eps(self, epsilon, t, x1, x2):
        return self.eval_eps(epsilon, t, x1, x2)[1]

    def spectral_coefficients(self, t, order, n_quad=None):
        """
        3D spectra (in theta, x1, x2) of A~, grad A~, C~ and div C~ at slow time t

        The most recent LIMIT_CACHE_SIZE keys (t, P, N_quad) are cached;
        concurrent callers asking for the same key wait for a single
        computation.
        """
        n_quad = n_quad or default_quadrature(order)
        key = (float(t), order, n_quad)
        with self._lock:
            cached = self._limit_cache.get(key)
            if cached is not None:
                self._limit_cache.move_to_end(key)
                return cached
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                cached = self._limit_cache.get(key)
            if cached is None:
                try:
                    cached = self._compute_limit(*key)
                    self._store_limit(key, cached)
                finally:
                    with self._lock:
                        self._key_locks.pop(key, None)
        return cached

    def _store_limit(self, key, spectra):
        with self._lock:
            self._limit_cache[key] = spectra
            while len(self._limit_cache) > LIMIT_CACHE_SIZE:
                self._limit_cache.popitem(last=False)

    def _compute_limit(self, t, order, n_quad):
        logger.debug('Computing limit spectra t=%s P=%s N_quad=%s', t, order, n_quad)

        def sampler(th, x1, x2):
            speed, d1, d2 = self._speed_and_direction(t, th, x1, x2)
            magnitude = self.laws.c * self.laws.g_c(speed)
            return self.laws.a * self.laws.g_a(speed), magnitude * d1, magnitude * d2

        a, c1, c2 = dft_coefficients(sampler, order, n_quad, ndim=3, t_param=t)
        return CoefficientSpectra(a, gradient_coeffs(a), (c1, c2), divergence_coeffs(c1, c2))

    def reference_spectra(self, epsilon, t, order, n_quad=None):
        """
        2D spectra of A^eps(t, .), its gradient, C^eps(t, .) and div C^eps(t, .)
        """
        fast_phase(epsilon, t)
        return self._reference(float(epsilon), float(t), order, n_quad or default_quadrature(order))

    def _compute_reference(self, epsilon, t, order, n_quad):
        def sampler(x1, x2):
            a, (c1, c2) = self.eval_eps(epsilon, t, x1, x2)
            return a, c1, c2

        a, c1, c2 = dft_coefficients(sampler, order, n_quad, ndim=2, t_param=t)
        return CoefficientSpectra(a, gradient_coeffs(a), (c1, c2), divergence_coeffs(c1, c2))

    def max_a_tilde(self, t_values, density=32):
        """
        Sampled sup of A~ over theta and x for the given slow times
        """
        x1, x2 = GridSpec(_power_of_two(density)).points()
        thetas = np.arange(density) / density
        peak = 0.0
        for t in np.atleast_1d(t_values):
            for theta in thetas:
                peak = max(peak, float(np.max(self.eval_A_tilde(t, theta, x1, x2))))
        return peak

    def clear_cache(self):
        with self._lock:
            self._limit_cache.clear()
            self._key_locks.clear()
        self._reference.cache_clear()


def _power_of_two(n):
    return 1 << max(1, int(np.ceil(np.log2(n))))
