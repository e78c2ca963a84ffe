"""Ohmic bath: spectral density, correlation function, exponential-series fit.

Units: hbar = k_B = 1, frequencies in units of the tunneling frequency Omega,
times in 1/Omega.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ContractError, NumericalError

__all__ = [
    "BathParams",
    "CorrelationSample",
    "ExponentialSeries",
    "spectral_density",
    "correlation_function",
    "correlation_imag_closed_form",
    "sample_correlation",
    "fit_exponential_series",
    "default_fit_window",
]

#: interval-split budget handed to the adaptive quadrature
QUAD_LIMIT = 500


@dataclass(frozen=True)
class BathParams:
    """Ohmic bath parameters.

    ``temperature = 0`` is the zero-temperature limit (coth -> 1).
    """

    alpha: float
    cutoff: float
    temperature: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def omega_max(self) -> float:
        """Upper frequency limit of the quadrature (tail below 1e-15 of the peak)."""
        return self.cutoff * (40.0 + 5.0 * math.log1p(self.temperature / self.cutoff))


@dataclass(frozen=True)
class CorrelationSample:
    time: float
    value: complex

    def __post_init__(self):
        if not self.time >= 0:
            raise ValueError(f"sample time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class ExponentialSeries:
    """C(t) ~ sum_j c_j exp(gamma_j t) with Re(gamma_j) < 0.

    Terms are kept sorted by |Re gamma_j| ascending. ``converged`` is False when
    the fit did not reach its target residual; ``fit_residual`` is then the best
    residual achieved.
    """

    terms: tuple
    fit_residual: float = 0.0
    converged: bool = True
    target: float | None = field(default=None, compare=False)

    def __post_init__(self):
        terms = tuple((complex(c), complex(g)) for c, g in self.terms)
        for _, g in terms:
            if not g.real < 0:
                raise ValueError(f"rate {g} is not decaying")
        terms = tuple(sorted(terms, key=lambda cg: (abs(cg[1].real), cg[1].imag, cg[0].real)))
        object.__setattr__(self, "terms", terms)
        if not self.fit_residual >= 0:
            raise ValueError("fit_residual must be >= 0")

    def __len__(self):
        return len(self.terms)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=complex)

    @property
    def rates(self) -> np.ndarray:
        return np.array([g for _, g in self.terms], dtype=complex)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(np.multiply.outer(t, self.rates)) @ self.amplitudes


def spectral_density(omega, p: BathParams) -> float:
    """J(omega) = alpha * omega * exp(-omega / cutoff)."""
    if omega < 0:
        raise ValueError(f"spectral density is defined for omega >= 0, got {omega}")
    return p.alpha * omega * math.exp(-omega / p.cutoff)


def _thermal_density(omega, p: BathParams) -> float:
    # J(w) coth(w / 2T); the w -> 0 limit is 2 alpha T
    if p.temperature == 0:
        return spectral_density(omega, p)
    x = omega / (2.0 * p.temperature)
    if x < 1e-8:
        xcothx = 1.0 + x * x / 3.0
    else:
        xcothx = x / math.tanh(x)
    return 2.0 * p.temperature * p.alpha * xcothx * math.exp(-omega / p.cutoff)


def _quad(func, upper, weight, tau, quad_tol, what):
    kwargs = dict(epsabs=quad_tol, epsrel=0.0, limit=QUAD_LIMIT, full_output=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if tau == 0.0:
            if weight == "sin":
                return 0.0
            out = integrate.quad(func, 0.0, upper, **kwargs)
        else:
            out = integrate.quad(func, 0.0, upper, weight=weight, wvar=tau,
                                 limlst=QUAD_LIMIT, maxp1=100, **kwargs)
    value, abserr = out[0], out[1]
    if not np.isfinite(value) or abserr > quad_tol:
        raise NumericalError(
            f"{what} quadrature at tau={tau} reached only {abserr:.3g} (requested {quad_tol:.3g})",
            achieved=abserr,
        )
    return value


def correlation_function(tau, p: BathParams, quad_tol: float = 1e-12) -> complex:
    """Bath correlation function C(tau) by adaptive quadrature.

    Re C = int J(w) cos(w tau) coth(w/2T) dw,  Im C = -int J(w) sin(w tau) dw.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if not quad_tol > 0:
        raise ValueError("quad_tol must be > 0")
    if p.alpha == 0:
        return 0j
    upper = p.omega_max
    re = _quad(lambda w: _thermal_density(w, p), upper, "cos", float(tau), quad_tol, "Re C")
    im = _quad(lambda w: spectral_density(w, p), upper, "sin", float(tau), quad_tol, "Im C")
    return complex(re, -im)


def correlation_imag_closed_form(tau, p: BathParams):
    """Im C(tau) = -2 alpha wc^3 tau / (1 + wc^2 tau^2)^2 (temperature independent).

    Works elementwise on arrays.
    """
    wc = p.cutoff
    return -2.0 * p.alpha * wc**3 * tau / (1.0 + (wc * tau) ** 2) ** 2


def sample_correlation(p: BathParams, t_max: float, n_samples: int,
                       quad_tol: float = 1e-12) -> list[CorrelationSample]:
    """Correlation function on the uniform grid ``linspace(0, t_max, n_samples)``."""
    if not t_max > 0:
        raise ValueError("t_max must be > 0")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    step = t_max / (n_samples - 1)
    times = [i * step for i in range(n_samples)]
    times[-1] = float(t_max)
    return [CorrelationSample(t, correlation_function(t, p, quad_tol)) for t in times]


def default_fit_window(t_f: float, p: BathParams) -> float:
    """Fit window covering both the control window and the bath memory time."""
    return max(t_f, 10.0 / p.cutoff)


# --- fitting -----------------------------------------------------------------


def _pencil_rates(y, dt, svd, m):
    """Matrix-pencil estimate of m rates from the right singular vectors."""
    vh = svd[2][:m]
    v = vh.conj().T
    z = np.linalg.eigvals(np.linalg.pinv(v[:-1]) @ v[1:])
    z = z[np.abs(z) > 0]
    return np.log(z.astype(complex)) / dt


def _amplitudes(t, y, rates):
    basis = np.exp(np.outer(t, rates))
    c, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return c


def _refine(t, y, c, g, max_iter=300):
    """Damped Gauss-Newton (Levenberg-Marquardt) on all amplitudes and rates.

    The residual is holomorphic in (c, g), so the complex normal equations are
    the real Gauss-Newton equations. Steps leaving Re(g) < 0 are rejected.
    """
    m = len(g)
    r = np.exp(np.outer(t, g)) @ c - y
    cost = np.vdot(r, r).real
    mu = 1e-3
    for _ in range(max_iter):
        basis = np.exp(np.outer(t, g))
        jac = np.hstack([basis, basis * t[:, None] * c[None, :]])
        a = jac.conj().T @ jac
        b = jac.conj().T @ r
        scale = np.diag(np.diag(a).real)
        improved = False
        while mu < 1e12:
            try:
                step = np.linalg.solve(a + mu * scale, -b)
            except np.linalg.LinAlgError:
                mu *= 4.0
                continue
            c2, g2 = c + step[:m], g + step[m:]
            if np.all(g2.real < 0):
                r2 = np.exp(np.outer(t, g2)) @ c2 - y
                cost2 = np.vdot(r2, r2).real
                if cost2 < cost:
                    rel = (cost - cost2) / cost
                    c, g, r, cost = c2, g2, r2, cost2
                    mu = max(mu / 3.0, 1e-12)
                    improved = True
                    break
            mu *= 4.0
        if not improved or rel < 1e-14:
            break
    return c, g


def _candidates(t, y, dt, svd, m):
    # pencil estimates of order m .. m+3, keeping the m strongest decaying terms
    for order in range(m, m + 4):
        if order > len(svd[1]):
            break
        rates = _pencil_rates(y, dt, svd, order)
        rates = rates[np.isfinite(rates) & (rates.real < 0)]
        if len(rates) == 0:
            continue
        amps = _amplitudes(t, y, rates)
        keep = np.argsort(-np.abs(amps))[:m]
        rates = rates[keep]
        yield _amplitudes(t, y, rates), rates


def fit_exponential_series(samples, max_terms: int = 4,
                           target_residual: float = 1e-7) -> ExponentialSeries:
    """Fit uniformly spaced samples with the fewest decaying exponentials.

    Tries m = 1 .. max_terms terms and returns the first fit whose max absolute
    residual over the grid is at most ``target_residual * |C(0)|``. Each m uses
    matrix-pencil initial rates, least-squares amplitudes and a damped
    Gauss-Newton refinement. If no m reaches the target, the best fit is
    returned with ``converged=False``.
    """
    if len(samples) < 8:
        raise ContractError("fitting needs at least 8 samples")
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    if not target_residual > 0:
        raise ValueError("target_residual must be > 0")
    t = np.array([s.time for s in samples], dtype=float)
    y = np.array([s.value for s in samples], dtype=complex)
    dt = t[1] - t[0]
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ContractError("samples must lie on a uniform increasing grid")
    scale = abs(y[0])
    if scale == 0:
        raise ContractError("C(0) = 0; nothing to fit")
    tolerance = target_residual * scale

    rows = len(y) - len(y) // 3
    hankel = np.lib.stride_tricks.sliding_window_view(y, len(y) - rows + 1)
    svd = np.linalg.svd(hankel, full_matrices=False)

    best = None
    for m in range(1, max_terms + 1):
        for c0, g0 in _candidates(t, y, dt, svd, m):
            c, g = _refine(t, y, c0, g0)
            series = ExponentialSeries(tuple(zip(c, g)))
            resid = float(np.max(np.abs(series(t) - y)))
            if best is None or resid < best.fit_residual:
                best = ExponentialSeries(series.terms, resid, resid <= tolerance, tolerance)
        if best is not None and best.converged:
            return best
    if best is None:
        raise NumericalError("no decaying exponential could be extracted from the samples")
    return best
