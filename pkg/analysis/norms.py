"""
Discrepancy norms on the evaluation grid, normalized by the number of points
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from dunes_project.exceptions import DimensionError


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float


def _values(field):
    return np.asarray(getattr(field, 'values', field))


def error_norms(a, b):
    """
    (mean |a-b|, sqrt(mean |a-b|^2), max |a-b|) over the grid
    """
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise DimensionError(f'cannot compare grids of shapes {a.shape} and {b.shape}')
    difference = np.abs(a - b)
    return Norms(
        float(np.mean(difference)),
        float(np.sqrt(np.mean(difference ** 2))),
        float(np.max(difference)) if difference.size else 0.0,
    )


@dataclass(frozen=True)
class ErrorReport:
    epsilon: float
    order: int
    t: float
    l1: float = math.nan
    l2: float = math.nan
    linf: float = math.nan
    runtime_s: float = 0.0
    steps: int = 0
    error: str = ''

    @classmethod
    def from_norms(cls, epsilon, order, t, norms, runtime_s=0.0, steps=0):
        return cls(epsilon, order, t, *norms, runtime_s=runtime_s, steps=steps)

    @classmethod
    def failure(cls, epsilon, order, t, error, runtime_s=0.0):
        return cls(epsilon, order, t, runtime_s=runtime_s, error=str(error))

    @property
    def failed(self):
        return bool(self.error)

    @property
    def norms(self):
        return Norms(self.l1, self.l2, self.linf)

    def as_dict(self):
        return asdict(self)
