"""Experiment configuration, single runs, parameter sweeps and Bloch trajectories."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import csvio
from .bath import BathParams, default_fit_window, fit_exponential_series, sample_correlation
from .krotov import GateTarget, KrotovConfig, evaluate_pulse, run_optimization
from .liouville import (ControlPulse, ExtendedGenerator, SIGMA_X, SIGMA_Y, SIGMA_Z,
                        propagate_forward, vectorize)

log = logging.getLogger(__name__)

SWEEP_AXES = ("t_f", "cutoff", "alpha", "temperature")
SUMMARY_COLUMNS = ("point_value", "alpha", "temperature", "cutoff", "t_f", "iterations",
                   "final_error", "final_fidelity", "fit_terms", "fit_residual", "status")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one optimization (or a sweep of them).

    ``ideal=True`` drops the bath (closed qubit). ``dt``, ``error_threshold`` and
    ``initial_value`` left as None resolve to their defaults per point:
    dt = min(1e-3, t_f/1000), threshold 1e-8 (ideal) or 1e-6 (open), and a
    constant initial pulse at half the amplitude bound.
    """

    gate: str = "z"
    ideal: bool = False
    alpha: float = 0.01
    temperature: float = 1.0
    cutoff: float = 1.0
    t_f: float = 1.0
    omega: float = 1.0
    dt: float | None = None
    lambda_weight: float = 1e-2
    epsilon_ref_mode: str = "previous"
    max_iterations: int = 3000
    error_threshold: float | None = None
    max_amplitude: float = 30.0
    initial_value: float | None = None
    initial_pulse_file: str | None = None
    max_terms: int = 4
    fit_target: float = 1e-7
    fit_samples: int = 2001
    quad_tol: float = 1e-12
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.gate not in ("z", "identity"):
            raise ValueError(f"gate must be 'z' or 'identity', got {self.gate!r}")
        if not self.t_f > 0:
            raise ValueError("t_f must be > 0")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
            if len(self.sweep_values) == 0:
                raise ValueError("sweep needs at least one value")
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def bath(self) -> BathParams | None:
        return None if self.ideal else BathParams(self.alpha, self.cutoff, self.temperature)

    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else min(1e-3 / self.omega, self.t_f / 1000)

    def resolved_threshold(self) -> float:
        if self.error_threshold is not None:
            return self.error_threshold
        return 1e-8 if self.ideal else 1e-6

    def points(self):
        """(index, point value, per-point config) in sweep order."""
        if self.sweep_axis is None:
            yield 0, math.nan, self
            return
        for i, v in enumerate(self.sweep_values):
            yield i, v, replace(self, sweep_axis=None, sweep_values=(), **{self.sweep_axis: v})


# --- config text format ------------------------------------------------------

# config keys / CLI flag names -> field names
ALIASES = {"tf": "t_f", "lambda": "lambda_weight", "max_iter": "max_iterations",
           "out": "output_dir", "initial": "initial_value", "initial_pulse": "initial_pulse_file",
           "ref_mode": "epsilon_ref_mode"}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name, text):
    text = text.strip()
    kind = _FIELD_TYPES[name]
    if name == "sweep_values":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if text.lower() in ("none", ""):
        return None
    if kind == "bool":
        if text.lower() not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"{name}: not a boolean: {text!r}")
        return text.lower() in ("1", "true", "yes")
    if kind == "int":
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_settings(pairs) -> dict:
    """Turn (key, value-text) pairs into ExperimentConfig keyword arguments.

    ``sweep = axis=v1,v2,...`` sets both sweep fields.
    """
    out = {}
    for key, text in pairs:
        key = key.strip().replace("-", "_")
        if key == "sweep":
            axis, _, values = text.partition("=")
            axis = ALIASES.get(axis.strip(), axis.strip())
            out["sweep_axis"] = axis
            out["sweep_values"] = _coerce("sweep_values", values)
            continue
        name = ALIASES.get(key, key)
        if name not in _FIELD_TYPES:
            raise ValueError(f"unknown setting {key!r}")
        out[name] = _coerce(name, text)
    return out


def read_config_file(path) -> dict:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        pairs.append((key, value))
    return parse_settings(pairs)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name, value in asdict(cfg).items():
        if name in ("sweep_axis", "sweep_values"):
            continue
        lines.append(f"{name} = {csvio.fmt(value) if value is not None else 'none'}")
    if cfg.sweep_axis is not None:
        lines.append(f"sweep = {cfg.sweep_axis}=" + ",".join(csvio.fmt(v) for v in cfg.sweep_values))
    return "\n".join(lines) + "\n"


# --- single points -----------------------------------------------------------


def build_generator(cfg: ExperimentConfig):
    """(generator, fitted series or None)."""
    bath = cfg.bath
    if bath is None:
        return ExtendedGenerator(None, cfg.omega), None
    t_max = default_fit_window(cfg.t_f, bath)
    samples = sample_correlation(bath, t_max, cfg.fit_samples, cfg.quad_tol)
    series = fit_exponential_series(samples, cfg.max_terms, cfg.fit_target)
    if not series.converged:
        log.info("CF fit kept %d terms at residual %.3g (target %.3g)",
                 len(series), series.fit_residual, series.target)
    return ExtendedGenerator(series, cfg.omega), series


def initial_pulse(cfg: ExperimentConfig) -> ControlPulse:
    if cfg.initial_pulse_file:
        pulse = csvio.read_pulse(cfg.initial_pulse_file, max_amplitude=cfg.max_amplitude)
        if not math.isclose(pulse.duration, cfg.t_f, rel_tol=1e-9):
            raise ValueError(f"initial pulse lasts {pulse.duration}, expected t_f={cfg.t_f}")
        return pulse
    value = cfg.initial_value if cfg.initial_value is not None else cfg.max_amplitude / 2
    return ControlPulse.constant(value, cfg.t_f, cfg.resolved_dt(), cfg.max_amplitude)


def krotov_config(cfg: ExperimentConfig) -> KrotovConfig:
    return KrotovConfig(initial_pulse(cfg), lambda_weight=cfg.lambda_weight,
                        epsilon_ref_mode=cfg.epsilon_ref_mode,
                        max_iterations=cfg.max_iterations,
                        error_threshold=cfg.resolved_threshold(),
                        max_amplitude=cfg.max_amplitude)


def run_point(cfg: ExperimentConfig):
    """Optimize one configuration; returns (summary dict, OptimizationResult or None)."""
    row = {"alpha": 0.0 if cfg.ideal else cfg.alpha,
           "temperature": 0.0 if cfg.ideal else cfg.temperature,
           "cutoff": math.nan if cfg.ideal else cfg.cutoff, "t_f": cfg.t_f,
           "iterations": 0, "final_error": math.nan, "final_fidelity": math.nan,
           "fit_terms": 0, "fit_residual": math.nan, "status": "ok"}
    try:
        gen, series = build_generator(cfg)
        if series is not None:
            row["fit_terms"] = len(series)
            row["fit_residual"] = series.fit_residual
        target = GateTarget.build(cfg.gate, gen)
        result = run_optimization(target, gen, krotov_config(cfg))
    except Exception as exc:  # a failed point must not abort a sweep
        log.warning("point failed: %s", exc)
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        return row, None
    best = result.best
    row.update(iterations=result.iterations, final_error=best.gate_error,
               final_fidelity=best.fidelity)
    if result.error is not None:
        row["status"] = f"aborted: {result.error}"
    elif best.gate_error > krotov_config(cfg).error_threshold:
        row["status"] = "threshold not reached"
    return row, result


def _point_task(args):
    index, value, cfg = args
    row, result = run_point(cfg)
    pulse = None if result is None else result.pulse
    records = [] if result is None else result.records
    return index, value, row, pulse, records


def point_stem(index, cfg: ExperimentConfig, value) -> str:
    if cfg.sweep_axis is None:
        return f"{index:03d}"
    return f"{index:03d}_{cfg.sweep_axis}={value!r}"


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run every sweep point and write summary.csv plus per-point files.

    Per point: ``pulse_<stem>.csv``, ``trace_<stem>.csv`` and ``config_<stem>.txt``
    (the resolved single-point configuration). Returns the summary rows as dicts.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "experiment.txt").write_text(format_config(cfg), encoding="utf-8")
    tasks = list(cfg.points())
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(_point_task, tasks))
    else:
        done = [_point_task(t) for t in tasks]
    done.sort(key=lambda d: d[0])

    rows = []
    for (index, value, row, pulse, records), (_, _, point_cfg) in zip(done, tasks):
        stem = point_stem(index, cfg, value)
        (out / f"config_{stem}.txt").write_text(format_config(point_cfg), encoding="utf-8")
        if pulse is not None:
            csvio.write_pulse(out / f"pulse_{stem}.csv", pulse)
            csvio.write_trace(out / f"trace_{stem}.csv", records)
        rows.append({"point_value": value, **row})
    csvio.write_rows(out / "summary.csv", SUMMARY_COLUMNS,
                     ([r[c] for c in SUMMARY_COLUMNS] for r in rows))
    return rows


def reevaluate_pulse(cfg: ExperimentConfig, pulse: ControlPulse):
    """(fidelity, gate_error) of a stored pulse under the point's model."""
    gen, _ = build_generator(cfg)
    return evaluate_pulse(GateTarget.build(cfg.gate, gen), gen, pulse)


# --- Bloch trajectories ------------------------------------------------------


def bloch_trajectory(pulse_file, initial_polarization, bath: BathParams | None = None,
                     out_file=None, omega: float = 1.0, max_terms: int = 4,
                     fit_target: float = 1e-7, fit_samples: int = 2001,
                     quad_tol: float = 1e-12):
    """Polarization P_i(t) = Tr(sigma_i rho(t)) from rho(0) = (I + P.sigma)/2.

    Returns (times, array of shape (n + 1, 3)); writes a CSV when ``out_file``
    is given.
    """
    p0 = np.asarray(initial_polarization, dtype=float)
    if p0.shape != (3,):
        raise ValueError("initial polarization must be a 3-vector")
    if np.linalg.norm(p0) > 1 + 1e-12:
        raise ValueError("|P(0)| must be <= 1")
    pulse = csvio.read_pulse(pulse_file)
    if bath is None:
        gen = ExtendedGenerator(None, omega)
    else:
        samples = sample_correlation(bath, default_fit_window(pulse.duration, bath),
                                     fit_samples, quad_tol)
        gen = ExtendedGenerator(fit_exponential_series(samples, max_terms, fit_target), omega)
    rho0 = 0.5 * (np.eye(2) + p0[0] * SIGMA_X + p0[1] * SIGMA_Y + p0[2] * SIGMA_Z)
    props = propagate_forward(pulse, gen)
    vecs = props[:, :4, :4] @ vectorize(rho0)
    rhos = vecs.reshape(-1, 2, 2).transpose(0, 2, 1)  # undo column stacking
    pol = np.stack([np.einsum("ij,tji->t", s, rhos).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)],
                   axis=1)
    times = pulse.grid
    if out_file is not None:
        csvio.write_bloch(out_file, times, pol)
    return times, pol
