"""Superoperators, the extended-space generator and its propagators.

Operators are vectorized by column stacking, vec([[a, b], [c, d]]) = (a, c, b, d),
so that vec(A X B) = (B^T kron A) vec(X).

The extended state stacks (rho, K_1 .. K_J, K_1^dag .. K_J^dag) in 4-blocks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .bath import ExponentialSeries
from .errors import ContractError, NumericalError

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = IDENTITY


def vectorize(a) -> np.ndarray:
    return np.asarray(a, dtype=complex).reshape(-1, order="F")


def devectorize(v) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(2, 2, order="F")


def commutator_superoperator(h) -> np.ndarray:
    """Matrix of A -> -i [H, A]."""
    h = np.asarray(h, dtype=complex)
    return -1j * (np.kron(_I2, h) - np.kron(h.T, _I2))


def left_mult_superoperator(s) -> np.ndarray:
    """Matrix of A -> S A."""
    return np.kron(_I2, np.asarray(s, dtype=complex))


def right_mult_superoperator(s) -> np.ndarray:
    """Matrix of A -> A S."""
    return np.kron(np.asarray(s, dtype=complex).T, _I2)


def system_hamiltonian(epsilon, omega) -> np.ndarray:
    return -0.5 * epsilon * SIGMA_Z - 0.5 * omega * SIGMA_X


def system_liouvillian(epsilon, omega) -> np.ndarray:
    return commutator_superoperator(system_hamiltonian(epsilon, omega))


@dataclass(frozen=True)
class ControlPulse:
    """Piecewise-constant control: ``values[i]`` holds on [i*dt, (i+1)*dt)."""

    dt: float
    values: np.ndarray
    max_amplitude: float = np.inf

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not np.all(np.isfinite(values)):
            raise ValueError("pulse values must be finite")
        if np.any(np.abs(values) > self.max_amplitude):
            raise ValueError(
                f"pulse exceeds |eps| <= {self.max_amplitude}: max {np.max(np.abs(values))}"
            )

    @classmethod
    def constant(cls, value, t_f, dt, max_amplitude=np.inf):
        n = int(round(t_f / dt))
        if n < 1 or not np.isclose(n * dt, t_f, rtol=1e-9, atol=0):
            raise ValueError(f"t_f={t_f} is not a multiple of dt={dt}")
        return cls(dt, np.full(n, float(value)), max_amplitude)

    def __len__(self):
        return len(self.values)

    @property
    def duration(self) -> float:
        return len(self.values) * self.dt

    @property
    def t_start(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def grid(self) -> np.ndarray:
        """Grid points t_i = i*dt, endpoints included."""
        return np.arange(len(self.values) + 1) * self.dt

    def with_values(self, values) -> "ControlPulse":
        return ControlPulse(self.dt, values, self.max_amplitude)


def assemble_generator(epsilon, omega, series: ExponentialSeries | None) -> np.ndarray:
    """Extended generator Lambda(epsilon) acting on (rho, K_j, K_j^dag).

    ``series=None`` gives the bare 4x4 system Liouvillian (no bath).
    """
    ls = system_liouvillian(epsilon, omega)
    if series is None:
        return ls
    if len(series) == 0:
        raise ContractError("series must contain at least one term")
    n_terms = len(series)
    nb = 2 * n_terms + 1
    lam = np.zeros((4 * nb, 4 * nb), dtype=complex)
    lx = commutator_superoperator(SIGMA_X)
    left_x = left_mult_superoperator(SIGMA_X)
    right_x = right_mult_superoperator(SIGMA_X)
    eye4 = np.eye(4)

    def block(i, j):
        return slice(4 * i, 4 * i + 4), slice(4 * j, 4 * j + 4)

    lam[block(0, 0)] = ls
    for j, (c, g) in enumerate(series.terms):
        k, kd = 1 + j, 1 + n_terms + j
        lam[block(0, k)] = lx
        lam[block(0, kd)] = lx
        lam[block(k, 0)] = -1j * c * left_x
        lam[block(k, k)] = ls + g * eye4
        lam[block(kd, 0)] = 1j * np.conj(c) * right_x
        lam[block(kd, kd)] = ls + np.conj(g) * eye4
    return lam


def generator_control_derivative(series: ExponentialSeries | None) -> np.ndarray:
    """d Lambda / d epsilon: block diagonal copies of the sigma_z commutator term."""
    nb = 1 if series is None else 2 * len(series) + 1
    return np.kron(np.eye(nb), commutator_superoperator(-0.5 * SIGMA_Z))


class ExtendedGenerator:
    """Lambda(eps) = drift + eps * control for fixed tunneling and bath fit.

    Parameters
    ----------
    series : ExponentialSeries or None
        Fitted bath correlation function; None for the closed (unitary) qubit.
    omega : float
        Tunneling frequency (1 in the natural units used throughout).
    """

    def __init__(self, series: ExponentialSeries | None, omega: float = 1.0):
        self.series = series
        self.omega = float(omega)
        self.drift = assemble_generator(0.0, self.omega, series)
        self.control = generator_control_derivative(series)
        self.drift.setflags(write=False)
        self.control.setflags(write=False)
        # the control derivative is diagonal in column stacking; kernels rely on it
        self.control_diagonal = np.diag(self.control).copy()
        assert np.count_nonzero(self.control - np.diag(self.control_diagonal)) == 0

    @property
    def block_count(self) -> int:
        return 1 if self.series is None else 2 * len(self.series) + 1

    @property
    def dim(self) -> int:
        return 4 * self.block_count

    def matrix(self, epsilon) -> np.ndarray:
        return self.drift + epsilon * self.control

    def rho_block(self, m) -> np.ndarray:
        """The rho-rho block of an extended matrix (or stack of them)."""
        return np.asarray(m)[..., :4, :4]

    def embed(self, op4) -> np.ndarray:
        """Place a 4x4 superoperator in the rho-rho block, zeros elsewhere."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[:4, :4] = op4
        return out

    def __repr__(self):
        return f"ExtendedGenerator(dim={self.dim}, omega={self.omega})"


def _check_finite(stack, what):
    if not np.all(np.isfinite(stack)):
        raise NumericalError(f"{what} propagation produced non-finite entries")
    return stack


def propagate_forward(pulse: ControlPulse, gen: ExtendedGenerator) -> np.ndarray:
    """RK4 solution of dG/dt = Lambda(t) G, G(0) = I.

    Returns an array of shape (len(pulse) + 1, dim, dim) holding G(i*dt).
    """
    g0 = np.eye(gen.dim, dtype=complex)
    out = kernels.forward(gen.drift, gen.control_diagonal, pulse.values, pulse.dt, g0)
    return _check_finite(out, "forward")


def propagate_backward(pulse: ControlPulse, gen: ExtendedGenerator, terminal) -> np.ndarray:
    """RK4 solution of dB/dt = -B Lambda(t) from B(t_f) = terminal back to t = 0.

    Returns B(i*dt) for every grid point, shape (len(pulse) + 1, dim, dim).
    """
    terminal = np.asarray(terminal, dtype=complex)
    if terminal.shape != (gen.dim, gen.dim):
        raise ContractError(f"terminal has shape {terminal.shape}, expected {(gen.dim, gen.dim)}")
    out = kernels.backward(gen.drift, gen.control_diagonal, pulse.values, pulse.dt, terminal)
    return _check_finite(out, "backward")


def conjugation_superoperator(u) -> np.ndarray:
    """Matrix of A -> U A U^dag."""
    u = np.asarray(u, dtype=complex)
    return np.kron(u.conj(), u)
