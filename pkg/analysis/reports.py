"""
CSV tables with a '#' metadata header, grid dumps and portable graymaps
"""
from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

import numpy as np

from dunes_project import __version__
from oracle.grids import dump_grid
from spectral.transforms import real_grid
from .serializers import REPORT_COLUMNS, ErrorReportSerializer

GRAY_LEVELS = 255


def config_digest(text):
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def metadata_lines(metadata=None):
    entries = {'version': __version__}
    entries.update(metadata or {})
    return [f'# {key}={value}' for key, value in entries.items()]


def rows_csv(columns, rows, metadata=None):
    buffer = io.StringIO()
    buffer.write(''.join(line + '\n' for line in metadata_lines(metadata)))
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([float(v) if isinstance(v, np.floating) else v for v in row])
    return buffer.getvalue()


def reports_csv(reports, metadata=None):
    """
    ErrorReports as epsilon,P,t,l1,l2,linf,runtime_s,steps,error rows
    """
    data = ErrorReportSerializer(reports, many=True).data
    return rows_csv(REPORT_COLUMNS, ([row[column] for column in REPORT_COLUMNS] for row in data), metadata)


def parse_reports_csv(text):
    """
    Data rows of a report table as dicts, metadata lines skipped
    """
    body = [line for line in text.splitlines() if line and not line.startswith('#')]
    return list(csv.DictReader(body))


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    return path


def graymap(values):
    """
    Plain (P2) graymap, x1 along rows and x2 increasing upwards
    """
    values = np.asarray(values, dtype=float)
    low, high = float(np.min(values)), float(np.max(values))
    span = high - low
    levels = np.zeros(values.shape, dtype=int) if span == 0 else np.rint((values - low) / span * GRAY_LEVELS).astype(int)
    image = levels.T[::-1]
    lines = ['P2', f'# range {low:.6e} {high:.6e}', f'{image.shape[1]} {image.shape[0]}', str(GRAY_LEVELS)]
    lines.extend(' '.join(str(v) for v in row) for row in image)
    return '\n'.join(lines) + '\n'


def render_field(field, grid, directory, stem, theta=None, comments=()):
    """
    Grid CSV and graymap of a snapshot; 3D profiles are cut at theta
    """
    directory = Path(directory)
    if field.ndim == 3 and theta is None:
        theta = 0.0
    values = real_grid(field, grid, theta=theta).values
    csv_path = dump_grid(values, directory / f'{stem}.csv', comments)
    pgm_path = write_text(directory / f'{stem}.pgm', graymap(values))
    return csv_path, pgm_path
