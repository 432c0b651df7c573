"""
Bedload transport laws g_a, g_c and their constants
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from dunes_project.exceptions import ConfigError, ParameterError


def cubic(u):
    return np.asarray(u, dtype=float) ** 3


@dataclass(frozen=True)
class BedloadLaws:
    """
    Transport constants a, b, c with the speed laws g_a and g_c
    """
    g_a: Callable
    g_c: Callable
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    name: str = 'custom'

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f'transport constant a must be positive, got {self.a}')
        if not self.c > 0:
            raise ParameterError(f'transport constant c must be positive, got {self.c}')
        if not self.b >= 0:
            raise ParameterError(f'transport constant b must be non-negative, got {self.b}')

    @classmethod
    def cubic(cls, a=1.0, b=0.0, c=1.0):
        return cls(cubic, cubic, a, b, c, name='cubic')


BUILTIN_LAWS = {
    'cubic': BedloadLaws.cubic,
}


def get_laws(name, a=1.0, b=0.0, c=1.0):
    try:
        factory = BUILTIN_LAWS[name]
    except KeyError:
        raise ConfigError(f'unknown bedload law {name!r}; available: {", ".join(sorted(BUILTIN_LAWS))}')
    return factory(a=a, b=b, c=c)
