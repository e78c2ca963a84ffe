"""Direct integration of the time-nonlocal master equation (test oracle).

    d rho/dt = -i[H_S(t), rho] + L_x K(t) + [L_x K(t)]^dag,
    K(t) = -i int_0^t C(t - t') U(t, t') sigma_x rho(t') U(t, t')^dag dt',

with L_x A = -i[sigma_x, A]. The correlation function comes straight from
quadrature; nothing here depends on the exponential-series fit. The cost is
O(n^2) in the number of steps, so this is for verification only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import BathParams, correlation_function
from .errors import NumericalError
from .liouville import ControlPulse, SIGMA_X, system_hamiltonian, vectorize


@dataclass
class HistoryBuffer:
    """Grid, vectorized states and system evolution operators U_S(t_i)."""

    grid: np.ndarray
    states: list = field(default_factory=list)
    unitary_propagators: list = field(default_factory=list)


def _expm_traceless(h, dt):
    # exp(-i h dt) for traceless Hermitian 2x2 h = a . sigma
    a = np.array([h[0, 1].real, -h[0, 1].imag, h[0, 0].real])
    norm = np.linalg.norm(a)
    if norm == 0:
        return np.eye(2, dtype=complex)
    phi = norm * dt
    return np.cos(phi) * np.eye(2) - 1j * np.sin(phi) * h / norm


def _commutator(a, b):
    return a @ b - b @ a


def correlation_table(p: BathParams, dt: float, n: int, quad_tol: float = 1e-12) -> np.ndarray:
    """C(k dt) for k = 0 .. n from direct quadrature."""
    return np.array([correlation_function(k * dt, p, quad_tol) for k in range(n + 1)])


def propagate_nonlocal(rho0, pulse: ControlPulse, p: BathParams, quad_tol: float = 1e-12,
                       omega: float = 1.0, history: HistoryBuffer | None = None,
                       cf_table=None) -> np.ndarray:
    """Density matrices rho(t_i) on the pulse grid, shape (len(pulse) + 1, 2, 2).

    Heun predictor-corrector on the bath term in the interaction picture of
    the exact piecewise-constant U_S; the memory integral is the trapezoidal
    rule over the full stored history.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12):
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho0) - 1) > 1e-12:
        raise ValueError("rho0 must have unit trace")
    n, dt = len(pulse), pulse.dt
    cf = correlation_table(p, dt, n, quad_tol) if cf_table is None else np.asarray(cf_table)
    if len(cf) < n + 1:
        raise NumericalError("correlation table shorter than the history")

    rhos = np.empty((n + 1, 2, 2), dtype=complex)
    us = np.empty((n + 1, 2, 2), dtype=complex)
    w_hist = np.empty((n + 1, 2, 2), dtype=complex)  # U_j^dag sigma_x rho_j U_j
    rhos[0] = rho0
    us[0] = np.eye(2)
    w_hist[0] = SIGMA_X @ rho0
    k_now = np.zeros((2, 2), dtype=complex)

    def dissipator(k):
        lxk = -1j * _commutator(SIGMA_X, k)
        return lxk + lxk.conj().T

    # interaction picture rho~ = U^dag rho U: the coherent part is exact per
    # step and only the bath term is integrated numerically
    tilde = rho0.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            h = system_hamiltonian(pulse.values[i], omega)
            u_now, u_next = us[i], _expm_traceless(h, dt) @ us[i]
            us[i + 1] = u_next
            ud = u_next.conj().T
            f_i = u_now.conj().T @ dissipator(k_now) @ u_now
            tilde_pred = tilde + dt * f_i

            # trapezoid over nodes 0..i+1; the last node is added separately
            weights = np.full(i + 1, dt)
            weights[0] = dt / 2
            partial = np.tensordot(weights * cf[i + 1:0:-1], w_hist[: i + 1], axes=1)

            def kernel(tilde_end):
                rho_end = u_next @ tilde_end @ ud
                w_end = ud @ SIGMA_X @ rho_end @ u_next
                inner = partial + 0.5 * dt * cf[0] * w_end
                return -1j * u_next @ inner @ ud, w_end, rho_end

            k_pred, _, _ = kernel(tilde_pred)
            tilde = tilde + 0.5 * dt * (f_i + ud @ dissipator(k_pred) @ u_next)
            k_now, w_hist[i + 1], rhos[i + 1] = kernel(tilde)
            if not np.all(np.isfinite(rhos[i + 1])):
                raise NumericalError(f"non-finite density matrix at step {i + 1}")

    if history is not None:
        history.grid = pulse.grid
        history.states = [vectorize(r) for r in rhos]
        history.unitary_propagators = list(us)
    return rhos
