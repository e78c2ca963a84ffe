"""CSV readers/writers for samples, fits, pulses, traces and trajectories.

All files: comma separated, one header row, UTF-8, LF line endings, reals with
17 significant digits.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .bath import CorrelationSample, ExponentialSeries
from .liouville import ControlPulse

SAMPLE_COLUMNS = ("t", "re_C", "im_C")
SERIES_COLUMNS = ("j", "re_c", "im_c", "re_gamma", "im_gamma")
PULSE_COLUMNS = ("t_start", "epsilon")
TRACE_COLUMNS = ("iteration", "fidelity", "objective", "gate_error", "max_pulse_change", "clamped")
RHO_COLUMNS = ("t", "re_r00", "im_r00", "re_r01", "im_r01", "re_r10", "im_r10", "re_r11", "im_r11")
BLOCH_COLUMNS = ("t", "P_x", "P_y", "P_z")


class PulseFormatError(ValueError):
    """Malformed pulse file; ``line`` is the 1-based line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_samples(path, samples):
    return write_rows(path, SAMPLE_COLUMNS,
                      ((s.time, s.value.real, s.value.imag) for s in samples))


def read_samples(path):
    _, rows = read_rows(path)
    return [CorrelationSample(float(t), complex(float(re), float(im))) for t, re, im in rows]


def write_series(path, series: ExponentialSeries):
    return write_rows(path, SERIES_COLUMNS,
                      ((j, c.real, c.imag, g.real, g.imag)
                       for j, (c, g) in enumerate(series.terms)))


def read_series(path, fit_residual=0.0):
    _, rows = read_rows(path)
    terms = [(complex(float(r[1]), float(r[2])), complex(float(r[3]), float(r[4]))) for r in rows]
    return ExponentialSeries(tuple(terms), fit_residual)


def write_pulse(path, pulse: ControlPulse):
    return write_rows(path, PULSE_COLUMNS, zip(pulse.t_start, pulse.values))


def read_pulse(path, dt=None, max_amplitude=math.inf) -> ControlPulse:
    """Load a ``t_start, epsilon`` pulse file.

    The time step is inferred from the ``t_start`` column; a single-row file
    needs ``dt`` explicitly.
    """
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = list(csv.reader(fh))
    if not lines:
        raise PulseFormatError(path, 1, "empty file")
    if [c.strip() for c in lines[0]] != list(PULSE_COLUMNS):
        raise PulseFormatError(path, 1, f"expected header {','.join(PULSE_COLUMNS)}")
    starts, values = [], []
    for lineno, row in enumerate(lines[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise PulseFormatError(path, lineno, f"expected 2 columns, got {len(row)}")
        try:
            t, e = float(row[0]), float(row[1])
        except ValueError:
            raise PulseFormatError(path, lineno, f"not a number: {row!r}") from None
        if not (math.isfinite(t) and math.isfinite(e)):
            raise PulseFormatError(path, lineno, "non-finite value")
        starts.append(t)
        values.append(e)
    if not values:
        raise PulseFormatError(path, len(lines), "no pulse rows")
    if dt is None:
        if len(starts) < 2:
            raise PulseFormatError(path, 2, "cannot infer dt from a single row")
        dt = (starts[-1] - starts[0]) / (len(starts) - 1)
    for lineno, t in enumerate(starts, start=2):
        if abs(t - (lineno - 2) * dt) > 1e-9 * max(1.0, abs(t)):
            raise PulseFormatError(path, lineno, f"t_start={t} is off the uniform grid (dt={dt})")
    try:
        return ControlPulse(dt, values, max_amplitude)
    except ValueError as exc:
        raise PulseFormatError(path, 2, str(exc)) from None


def write_trace(path, records):
    return write_rows(path, TRACE_COLUMNS,
                      ((r.iteration, r.fidelity, r.objective, r.gate_error,
                        r.max_pulse_change, r.clamped) for r in records))


def write_density_trajectory(path, times, rhos):
    rows = []
    for t, r in zip(times, rhos):
        rows.append((t, r[0, 0].real, r[0, 0].imag, r[0, 1].real, r[0, 1].imag,
                     r[1, 0].real, r[1, 0].imag, r[1, 1].real, r[1, 1].imag))
    return write_rows(path, RHO_COLUMNS, rows)


def write_bloch(path, times, polarization):
    return write_rows(path, BLOCH_COLUMNS, ((t, *p) for t, p in zip(times, polarization)))
