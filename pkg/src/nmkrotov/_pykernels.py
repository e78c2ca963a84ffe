"""Pure numpy propagation kernels (fallback for the compiled ``_ckernels``).

For a generator held constant over a step, one classic RK4 step of
dG/dt = L G is exactly G <- P(dt L) G with P(x) = 1 + x + x^2/2 + x^3/6 + x^4/24.
Both backends build these step matrices and chain them.

``dvec`` is the diagonal of dL/d(eps); L(eps) = drift + eps * diag(dvec).
"""
import numpy as np


def _taylor4(x, eye):
    s = eye + x / 4.0
    s = eye + (x @ s) / 3.0
    s = eye + (x @ s) / 2.0
    return eye + x @ s


def step_matrices(drift, dvec, eps, dt):
    eps = np.asarray(eps, dtype=float)
    n, dim = len(eps), drift.shape[0]
    if n == 0:
        return np.empty((0, dim, dim), dtype=complex)
    x = np.broadcast_to(dt * drift, (n, dim, dim)).copy()
    idx = np.arange(dim)
    x[:, idx, idx] += dt * eps[:, None] * dvec[None, :]
    return _taylor4(x, np.eye(dim, dtype=complex))


def chain_forward(steps, g0):
    out = np.empty((len(steps) + 1,) + g0.shape, dtype=complex)
    out[0] = g0
    for i in range(len(steps)):
        np.matmul(steps[i], out[i], out=out[i + 1])
    return out


def chain_backward(steps, terminal):
    n = len(steps)
    out = np.empty((n + 1,) + terminal.shape, dtype=complex)
    out[n] = terminal
    for i in range(n - 1, -1, -1):
        np.matmul(out[i + 1], steps[i], out=out[i])
    return out


def forward(drift, dvec, eps, dt, g0):
    return chain_forward(step_matrices(drift, dvec, eps, dt), g0)


def backward(drift, dvec, eps, dt, terminal):
    return chain_backward(step_matrices(drift, dvec, eps, dt), terminal)


def krotov_sweep(drift, dvec, base, bs, dt, inv2lam, amax):
    """Sequential Krotov forward sweep.

    At each grid point t_i the update uses B(t_i) from the previous iterate and
    the freshly propagated G(t_i); the new value is clamped to |eps| <= amax and
    immediately used for the step to t_{i+1}.

    Returns (new eps, G(t_f), step matrices, number of clamped points).
    """
    n, dim = len(base), drift.shape[0]
    eye = np.eye(dim, dtype=complex)
    idx = np.arange(dim)
    eps = np.empty(n)
    steps = np.empty((n, dim, dim), dtype=complex)
    g = eye.copy()
    clamped = 0
    for i in range(n):
        # Re Tr{B D G} with D diagonal: sum_k d_k (G B)_kk
        grad = np.sum(dvec * np.einsum("ka,ak->k", g, bs[i])).real
        e = base[i] + inv2lam * grad
        if e > amax:
            e, clamped = amax, clamped + 1
        elif e < -amax:
            e, clamped = -amax, clamped + 1
        eps[i] = e
        x = dt * drift.copy()
        x[idx, idx] += dt * e * dvec
        steps[i] = _taylor4(x, eye)
        g = steps[i] @ g
    return eps, g, steps, clamped
