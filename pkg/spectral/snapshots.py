"""
Plain-text coefficient snapshots

    spectral3 P=<P> t=<t>
    l m n re im
    ...
    # free-form comment lines (diagnostics)

Floats are written with 17 significant digits so a parse/serialize cycle is
bit-exact.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from dunes_project.exceptions import SnapshotFormatError
from .fields import field_class, mode_index

HEADER_PATTERN = re.compile(r'^spectral([23]) P=(\d+) t=(\S+)$')


def _number(value):
    return format(float(value), '.17g')


def serialize_snapshot(field, comments=()):
    lines = [f'spectral{field.ndim} P={field.order} t={_number(field.t_param)}']
    for mode, value in zip(mode_index(field.order, field.ndim), field.flat()):
        indices = ' '.join(str(int(k)) for k in mode)
        lines.append(f'{indices} {_number(value.real)} {_number(value.imag)}')
    lines.extend(f'# {comment}' for comment in comments)
    return '\n'.join(lines) + '\n'


def parse_snapshot(text):
    """
    Parse snapshot text; returns (field, comments)
    """
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    comments = [line[1:].strip() for line in rows if line.startswith('#')]
    body = [line for line in rows if not line.startswith('#')]
    if not body:
        raise SnapshotFormatError('empty snapshot')
    header = HEADER_PATTERN.match(body[0])
    if header is None:
        raise SnapshotFormatError(f'bad snapshot header: {body[0]!r}')
    ndim, order, t_param = int(header.group(1)), int(header.group(2)), float(header.group(3))

    expected = mode_index(order, ndim)
    if len(body) - 1 != len(expected):
        raise SnapshotFormatError(f'expected {len(expected)} mode lines, found {len(body) - 1}')
    coeffs = np.zeros(len(expected), dtype=np.complex128)
    for position, (line, mode) in enumerate(zip(body[1:], expected)):
        parts = line.split()
        if len(parts) != ndim + 2:
            raise SnapshotFormatError(f'line {position + 2}: expected {ndim + 2} columns, got {len(parts)}')
        try:
            indices = [int(p) for p in parts[:ndim]]
            real, imag = float(parts[ndim]), float(parts[ndim + 1])
        except ValueError as exc:
            raise SnapshotFormatError(f'line {position + 2}: {exc}') from exc
        if indices != list(mode):
            raise SnapshotFormatError(f'line {position + 2}: mode {indices} out of lexicographic order')
        coeffs[position] = complex(real, imag)

    cls = field_class(ndim)
    field = cls(order, coeffs.reshape((2 * order + 1,) * ndim), t_param)
    return field.replace(real_valued=field.is_hermitian()), comments


def dump_snapshot(field, path, comments=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_snapshot(field, comments), encoding='utf-8')
    return path


def load_snapshot(path):
    return parse_snapshot(Path(path).read_text(encoding='utf-8'))
