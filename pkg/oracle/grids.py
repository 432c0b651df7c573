"""
Periodic finite-difference grids and their CSV dumps

    # N=<N>
    i j value
    ...
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dunes_project.exceptions import DimensionError, ParameterError, SnapshotFormatError
from spectral.fields import GridField

MIN_POINTS = 32


def check_points(n):
    if n < MIN_POINTS:
        raise ParameterError(f'finite-difference grids need N >= {MIN_POINTS}, got {n}')


def face_points(n):
    """
    Cell centres and the east/north face midpoints of an n x n periodic grid
    """
    x = np.arange(n) / n
    half = x + 0.5 / n
    return {
        'centre': np.meshgrid(x, x, indexing='ij'),
        'east': np.meshgrid(half, x, indexing='ij'),
        'north': np.meshgrid(x, half, indexing='ij'),
    }


@dataclass(frozen=True, eq=False)
class FDGrid:
    """
    Real samples on an n x n periodic grid, with the march step that produced them
    """
    n: int
    step: float
    values: np.ndarray = field(repr=False)
    time: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        check_points(self.n)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.n, self.n):
            raise DimensionError(f'grid of size {self.n} needs shape {(self.n, self.n)}, got {values.shape}')
        object.__setattr__(self, 'values', values)

    def mean(self):
        return float(np.mean(self.values))

    def as_grid_field(self):
        return GridField(self.n, self.values)


def serialize_grid(values, comments=()):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    lines = [f'# N={n}']
    lines.extend(f'# {comment}' for comment in comments)
    for (i, j), value in np.ndenumerate(values):
        lines.append(f'{i} {j} {format(float(value), ".17g")}')
    return '\n'.join(lines) + '\n'


def parse_grid(text):
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows or not rows[0].startswith('# N='):
        raise SnapshotFormatError('grid dump must start with "# N=<N>"')
    try:
        n = int(rows[0][len('# N='):])
    except ValueError as exc:
        raise SnapshotFormatError(f'bad grid header: {rows[0]!r}') from exc
    values = np.full((n, n), np.nan)
    for line in rows[1:]:
        if line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SnapshotFormatError(f'expected "i j value", got {line!r}')
        try:
            i, j, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise SnapshotFormatError(f'bad grid row {line!r}: {exc}') from exc
        if not (0 <= i < n and 0 <= j < n):
            raise SnapshotFormatError(f'grid index ({i}, {j}) outside [0, {n}) in {line!r}')
        values[i, j] = value
    if np.isnan(values).any():
        raise SnapshotFormatError(f'grid dump of size {n} is missing rows')
    return values


def dump_grid(values, path, comments=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_grid(values, comments), encoding='utf-8')
    return path


def load_grid(path):
    return parse_grid(Path(path).read_text(encoding='utf-8'))
