"""Gate targets, fidelity/error functionals and the Krotov optimization loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, NumericalError
from .liouville import ControlPulse, ExtendedGenerator, SIGMA_Z

log = logging.getLogger(__name__)

RHO_DIM = 4


def z_gate_superoperator() -> np.ndarray:
    """rho -> sigma_z rho sigma_z, i.e. diag(1, -1, -1, 1) in column stacking."""
    return np.kron(SIGMA_Z.T, SIGMA_Z)


def identity_gate_superoperator() -> np.ndarray:
    return np.eye(4, dtype=complex)


_GATES = {"z": z_gate_superoperator, "identity": identity_gate_superoperator}


@dataclass(frozen=True)
class GateTarget:
    """Target superoperator O and its embedding Q in the extended space."""

    name: str
    qubit_superoperator: np.ndarray
    extended_embedding: np.ndarray

    @classmethod
    def build(cls, name: str, gen: ExtendedGenerator) -> "GateTarget":
        try:
            op = _GATES[name]()
        except KeyError:
            raise ValueError(f"unknown gate {name!r}; choose from {sorted(_GATES)}") from None
        return cls(name, op, gen.embed(op))


def _rho_block(g_final):
    g_final = np.asarray(g_final)
    if g_final.ndim != 2 or g_final.shape[0] != g_final.shape[1] or g_final.shape[0] % 4:
        raise ContractError(f"not an extended propagator: shape {g_final.shape}")
    return g_final[:RHO_DIM, :RHO_DIM]


def trace_fidelity(target: GateTarget, g_final) -> float:
    """Re Tr{O^dag G_rhorho} / 4."""
    if np.shape(g_final) != target.extended_embedding.shape:
        raise ContractError(
            f"propagator shape {np.shape(g_final)} does not match target "
            f"{target.extended_embedding.shape}"
        )
    x = _rho_block(g_final)
    return float(np.trace(target.qubit_superoperator.conj().T @ x).real / RHO_DIM)


def gate_error(target: GateTarget, g_final) -> float:
    """Hilbert-Schmidt distance Tr{(O - G_rhorho)^dag (O - G_rhorho)} / 4."""
    if np.shape(g_final) != target.extended_embedding.shape:
        raise ContractError(
            f"propagator shape {np.shape(g_final)} does not match target "
            f"{target.extended_embedding.shape}"
        )
    diff = target.qubit_superoperator - _rho_block(g_final)
    return float(np.sum(np.abs(diff) ** 2) / RHO_DIM)


@dataclass(frozen=True)
class KrotovConfig:
    """Optimization settings.

    ``epsilon_ref_mode`` is ``"previous"`` (the penalty acts on the change from
    the last iterate) or ``"fixed"`` (penalty relative to ``reference_pulse``,
    defaulting to the initial pulse).
    """

    initial_pulse: ControlPulse
    lambda_weight: float = 1e-2
    epsilon_ref_mode: str = "previous"
    max_iterations: int = 3000
    error_threshold: float = 1e-6
    max_amplitude: float = 30.0
    reference_pulse: ControlPulse | None = None

    def __post_init__(self):
        if not self.lambda_weight > 0:
            raise ValueError("lambda_weight must be > 0")
        if not self.error_threshold > 0:
            raise ValueError("error_threshold must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon_ref_mode not in ("previous", "fixed"):
            raise ValueError(f"unknown epsilon_ref_mode {self.epsilon_ref_mode!r}")
        if np.any(np.abs(self.initial_pulse.values) > self.max_amplitude):
            raise ValueError("initial pulse violates the amplitude bound")
        ref = self.reference_pulse
        if ref is not None and (len(ref) != len(self.initial_pulse) or ref.dt != self.initial_pulse.dt):
            raise ContractError("reference pulse must share the initial pulse's grid")

    @property
    def dt(self) -> float:
        return self.initial_pulse.dt


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    fidelity: float
    objective: float
    gate_error: float
    max_pulse_change: float
    clamped: bool = False


@dataclass
class OptimizationResult:
    """Best pulse found (by gate error) plus the full iteration trace."""

    pulse: ControlPulse
    records: list = field(default_factory=list)
    error: Exception | None = None

    @property
    def best(self) -> IterationRecord:
        return min(self.records, key=lambda r: r.gate_error)

    @property
    def final_error(self) -> float:
        return self.best.gate_error if self.records else float("inf")

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def __iter__(self):
        # allows ``pulse, records = run_optimization(...)``
        return iter((self.pulse, self.records))


def objective(fidelity, pulse: ControlPulse, ref: ControlPulse, cfg: KrotovConfig) -> float:
    """J = F - lambda * dt * sum_i (eps_i - eps_ref_i)^2."""
    if len(pulse) != len(ref) or pulse.dt != ref.dt:
        raise ContractError("pulse and reference are on different grids")
    diff = pulse.values - ref.values
    return float(fidelity - cfg.lambda_weight * pulse.dt * np.dot(diff, diff))


def krotov_update_value(b_t, d_lambda, g_t, lambda_weight) -> float:
    """(1 / 2 lambda) Re Tr{B(t) dLambda/deps G(t)}."""
    if not lambda_weight > 0:
        raise ValueError("lambda_weight must be > 0")
    return float(np.trace(b_t @ d_lambda @ g_t).real / (2.0 * lambda_weight))


def backward_terminal(target: GateTarget) -> np.ndarray:
    """B(t_f) = Q^dag / 4, so that Re Tr{B dLambda G} is dF/d(eps) per unit time."""
    return target.extended_embedding.conj().T / RHO_DIM


def _check(stack, what):
    if not np.all(np.isfinite(stack)):
        raise NumericalError(f"non-finite values in {what}")
    return stack


def run_optimization(target: GateTarget, gen: ExtendedGenerator,
                     cfg: KrotovConfig) -> OptimizationResult:
    """Krotov iteration with sequential (immediate) pulse updates.

    Record 0 evaluates the initial pulse; each further record is one full
    backward + forward-update sweep. Stops once the gate error reaches
    ``cfg.error_threshold`` or after ``cfg.max_iterations`` sweeps, and returns
    the pulse with the lowest gate error seen.
    """
    if target.extended_embedding.shape != (gen.dim, gen.dim):
        raise ContractError("target and generator dimensions differ")
    pulse = ControlPulse(cfg.dt, cfg.initial_pulse.values, cfg.max_amplitude)
    fixed_ref = cfg.reference_pulse or cfg.initial_pulse
    drift, dvec, dt = gen.drift, gen.control_diagonal, pulse.dt
    terminal = backward_terminal(target)
    inv2lam = 1.0 / (2.0 * cfg.lambda_weight)

    try:
        steps = _check(kernels.step_matrices(drift, dvec, pulse.values, dt), "step matrices")
        g_final = _check(kernels.chain_forward(steps, np.eye(gen.dim, dtype=complex))[-1],
                         "forward propagator")
    except NumericalError as exc:
        log.warning("initial propagation failed: %s", exc)
        return OptimizationResult(pulse, [], exc)
    fid = trace_fidelity(target, g_final)
    ref0 = fixed_ref if cfg.epsilon_ref_mode == "fixed" else pulse
    records = [IterationRecord(0, fid, objective(fid, pulse, ref0, cfg),
                               gate_error(target, g_final), 0.0, False)]
    result = OptimizationResult(pulse, records)
    best_err = records[0].gate_error
    log.debug("iter 0: error %.3e", best_err)
    if best_err <= cfg.error_threshold:
        return result

    for k in range(1, cfg.max_iterations + 1):
        try:
            bs = _check(kernels.chain_backward(steps, terminal), "backward propagator")
            base = pulse.values if cfg.epsilon_ref_mode == "previous" else fixed_ref.values
            eps, g_final, steps, n_clamped = kernels.krotov_sweep(
                drift, dvec, base, bs, dt, inv2lam, cfg.max_amplitude)
            _check(g_final, "forward propagator")
        except NumericalError as exc:
            result.error = exc
            log.warning("optimization aborted at iteration %d: %s", k, exc)
            return result
        new_pulse = ControlPulse(dt, eps, cfg.max_amplitude)
        ref = pulse if cfg.epsilon_ref_mode == "previous" else fixed_ref
        fid = trace_fidelity(target, g_final)
        err = gate_error(target, g_final)
        rec = IterationRecord(k, fid, objective(fid, new_pulse, ref, cfg), err,
                              float(np.max(np.abs(eps - pulse.values))), n_clamped > 0)
        records.append(rec)
        pulse = new_pulse
        if err < best_err:
            best_err = err
            result.pulse = pulse
        if k % 100 == 0:
            log.debug("iter %d: error %.3e", k, err)
        if err <= cfg.error_threshold:
            break
    return result


def evaluate_pulse(target: GateTarget, gen: ExtendedGenerator, pulse: ControlPulse):
    """(fidelity, gate_error) of a pulse from a fresh forward propagation."""
    steps = kernels.step_matrices(gen.drift, gen.control_diagonal, pulse.values, pulse.dt)
    g_final = kernels.chain_forward(steps, np.eye(gen.dim, dtype=complex))[-1]
    return trace_fidelity(target, g_final), gate_error(target, g_final)
