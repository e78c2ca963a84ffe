import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from nmkrotov.bath import BathParams, ExponentialSeries, fit_exponential_series, sample_correlation
from nmkrotov.errors import ContractError, NumericalError
from nmkrotov.liouville import (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, ControlPulse,
                                ExtendedGenerator, assemble_generator,
                                commutator_superoperator, conjugation_superoperator,
                                devectorize, generator_control_derivative,
                                left_mult_superoperator, propagate_backward,
                                propagate_forward, right_mult_superoperator,
                                system_hamiltonian, system_liouvillian, vectorize)

SERIES = ExponentialSeries(((0.012 + 0.004j, -1.1 + 0.2j), (0.006 - 0.002j, -0.35),
                            (0.003 + 0.001j, -3.0 - 1.5j)))


@pytest.fixture(scope="module")
def ohmic_series():
    p = BathParams(0.01, 1.0, 1.0)
    return fit_exponential_series(sample_correlation(p, 10.0, 2001), 4)


def random_pulse(rng, n, dt, scale=10.0):
    return ControlPulse(dt, rng.uniform(-scale, scale, n), 30.0)


def rho_block(props, rho0):
    vecs = props[:, :4, :4] @ vectorize(rho0)
    return vecs.reshape(-1, 2, 2).transpose(0, 2, 1)


class TestVectorize:
    def test_identity(self):
        np.testing.assert_array_equal(vectorize(IDENTITY), [1, 0, 0, 1])

    def test_column_stacking(self):
        a = np.array([[1, 2], [3, 4]])
        np.testing.assert_array_equal(vectorize(a), [1, 3, 2, 4])

    def test_round_trip(self):
        np.testing.assert_array_equal(devectorize(vectorize(SIGMA_X)), SIGMA_X)


class TestSuperoperators:
    def test_commutator_sz_sx(self):
        out = commutator_superoperator(SIGMA_Z) @ vectorize(SIGMA_X)
        np.testing.assert_allclose(out, vectorize(2 * SIGMA_Y), atol=1e-15)

    def test_commutator_identity(self):
        np.testing.assert_array_equal(commutator_superoperator(IDENTITY), np.zeros((4, 4)))

    def test_self_commutator(self):
        np.testing.assert_array_equal(commutator_superoperator(SIGMA_X) @ vectorize(SIGMA_X), 0)

    def test_commutator_random(self, rng):
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        np.testing.assert_allclose(commutator_superoperator(h) @ vectorize(a),
                                   vectorize(-1j * (h @ a - a @ h)), atol=1e-14)

    def test_mult_identity(self):
        np.testing.assert_array_equal(left_mult_superoperator(IDENTITY), np.eye(4))
        np.testing.assert_array_equal(right_mult_superoperator(IDENTITY), np.eye(4))

    def test_left_mult(self):
        np.testing.assert_allclose(left_mult_superoperator(SIGMA_X) @ vectorize(SIGMA_Z),
                                   vectorize(-1j * SIGMA_Y))

    def test_right_mult(self):
        np.testing.assert_allclose(right_mult_superoperator(SIGMA_X) @ vectorize(SIGMA_Z),
                                   vectorize(1j * SIGMA_Y))

    def test_liouvillian_zero(self):
        np.testing.assert_array_equal(system_liouvillian(0.0, 0.0), np.zeros((4, 4)))

    @given(e1=st.floats(-30, 30), e2=st.floats(-30, 30), om=st.floats(0, 5))
    def test_liouvillian_linearity(self, e1, e2, om):
        lhs = system_liouvillian(e1 + e2, om) - system_liouvillian(e2, om)
        np.testing.assert_allclose(lhs, system_liouvillian(e1, 0.0), atol=1e-12)

    def test_liouvillian_on_sx(self):
        # H = -sigma_z, -i[-sz, sx] = -2 sy
        out = system_liouvillian(2.0, 0.0) @ vectorize(SIGMA_X)
        np.testing.assert_allclose(out, vectorize(-2 * SIGMA_Y), atol=1e-15)


class TestGenerator:
    def test_dimension(self):
        assert assemble_generator(0.0, 1.0, SERIES).shape == (28, 28)
        gen = ExtendedGenerator(SERIES)
        assert gen.dim == 28 and gen.block_count == 7

    def test_rho_row_blocks(self):
        lam = assemble_generator(3.0, 1.0, SERIES)
        lx = commutator_superoperator(SIGMA_X)
        for b in range(1, 7):
            np.testing.assert_array_equal(lam[:4, 4 * b:4 * b + 4], lx)
        np.testing.assert_array_equal(lam[:4, :4], system_liouvillian(3.0, 1.0))

    def test_auxiliary_blocks(self):
        lam = assemble_generator(-2.0, 1.0, SERIES)
        ls = system_liouvillian(-2.0, 1.0)
        for j, (c, g) in enumerate(SERIES.terms):
            k, kd = 4 * (1 + j), 4 * (4 + j)
            np.testing.assert_allclose(lam[k:k + 4, :4], -1j * c * left_mult_superoperator(SIGMA_X))
            np.testing.assert_allclose(lam[kd:kd + 4, :4],
                                       1j * np.conj(c) * right_mult_superoperator(SIGMA_X))
            np.testing.assert_allclose(lam[k:k + 4, k:k + 4], ls + g * np.eye(4))
            np.testing.assert_allclose(lam[kd:kd + 4, kd:kd + 4], ls + np.conj(g) * np.eye(4))

    def test_zero_amplitudes_decouple(self):
        zero = ExponentialSeries(((0.0, -1.0), (0.0, -2.0 + 1j)))
        lam = assemble_generator(1.0, 1.0, zero)
        assert np.count_nonzero(lam[4:, :4]) == 0

    def test_empty_series_rejected(self):
        with pytest.raises(ContractError):
            assemble_generator(0.0, 1.0, ExponentialSeries(()))

    def test_control_derivative_matches_finite_difference(self):
        d = generator_control_derivative(SERIES)
        for h in (1e-3, 0.5, 7.0):
            fd = (assemble_generator(2.0 + h, 1.0, SERIES) - assemble_generator(2.0 - h, 1.0, SERIES)) / (2 * h)
            np.testing.assert_allclose(fd, d, atol=1e-12)

    def test_control_derivative_on_sx(self):
        d = generator_control_derivative(SERIES)
        np.testing.assert_allclose(d[:4, :4] @ vectorize(SIGMA_X), vectorize(-SIGMA_Y), atol=1e-15)

    def test_control_derivative_traceless(self):
        assert np.trace(generator_control_derivative(SERIES)) == 0


class TestForward:
    def test_empty_pulse(self):
        props = propagate_forward(ControlPulse(0.01, []), ExtendedGenerator(SERIES))
        assert props.shape == (1, 28, 28)
        np.testing.assert_array_equal(props[0], np.eye(28))

    def test_full_period_is_identity(self):
        gen = ExtendedGenerator(ExponentialSeries(((0.0, -1.0),)))
        props = propagate_forward(ControlPulse.constant(0.0, 2 * np.pi, 2 * np.pi / 6000), gen)
        np.testing.assert_allclose(props[-1][:4, :4], np.eye(4), atol=1e-10)

    def test_half_period_is_sigma_x_conjugation(self):
        gen = ExtendedGenerator(ExponentialSeries(((0.0, -1.0),)))
        props = propagate_forward(ControlPulse.constant(0.0, np.pi, np.pi / 3000), gen)
        np.testing.assert_allclose(props[-1][:4, :4], np.kron(SIGMA_X.T, SIGMA_X), atol=1e-10)

    def test_unitary_limit(self, rng):
        pulse = random_pulse(rng, 2000, 1e-3)
        props = propagate_forward(pulse, ExtendedGenerator(None))
        u = np.eye(2, dtype=complex)
        worst = 0.0
        for i, e in enumerate(pulse.values):
            u = expm(-1j * pulse.dt * system_hamiltonian(e, 1.0)) @ u
            worst = max(worst, np.abs(props[i + 1] - conjugation_superoperator(u)).max())
        assert worst <= 1e-8

    def test_nonfinite_raises(self):
        wild = ExponentialSeries(((1.0, -1e6),))
        with pytest.raises(NumericalError):
            propagate_forward(ControlPulse.constant(0.0, 1.0, 0.01), ExtendedGenerator(wild))


class TestInvariants:
    def _check(self, props, rho0):
        rhos = rho_block(props, rho0)
        trace = np.trace(rhos, axis1=1, axis2=2)
        assert np.abs(trace - 1).max() <= 1e-8
        assert np.abs(rhos - rhos.conj().transpose(0, 2, 1)).max() <= 1e-8

    def test_trace_and_hermiticity_ohmic(self, ohmic_series, rng):
        pulse = random_pulse(rng, 10000, 1e-3)
        props = propagate_forward(pulse, ExtendedGenerator(ohmic_series))
        for _ in range(3):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v) * rng.uniform(1, 2)
            rho0 = 0.5 * (IDENTITY + v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z)
            self._check(props, rho0)

    @settings(max_examples=15, deadline=None)
    @given(data=st.data())
    def test_trace_and_hermiticity_any_fit(self, data):
        n_terms = data.draw(st.integers(1, 4))
        terms = []
        for _ in range(n_terms):
            c = complex(data.draw(st.floats(-0.05, 0.05)), data.draw(st.floats(-0.05, 0.05)))
            g = complex(-data.draw(st.floats(0.05, 10.0)), data.draw(st.floats(-5, 5)))
            terms.append((c, g))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        props = propagate_forward(random_pulse(rng, 2000, 1e-3), ExtendedGenerator(ExponentialSeries(tuple(terms))))
        self._check(props, 0.5 * (IDENTITY + 0.6 * SIGMA_X - 0.3 * SIGMA_Z))

    def test_auxiliary_hermiticity_transport(self, rng):
        props = propagate_forward(random_pulse(rng, 1500, 1e-3), ExtendedGenerator(SERIES))
        for _ in range(3):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            rho0 = a @ a.conj().T
            rho0 /= np.trace(rho0)
            stack = np.zeros(28, dtype=complex)
            stack[:4] = vectorize(rho0)
            states = props @ stack
            for j in range(3):
                k = states[:, 4 * (1 + j):4 * (2 + j)].reshape(-1, 2, 2).transpose(0, 2, 1)
                kd = states[:, 4 * (4 + j):4 * (5 + j)].reshape(-1, 2, 2).transpose(0, 2, 1)
                assert np.abs(kd - k.conj().transpose(0, 2, 1)).max() <= 1e-12

    def test_rk4_order(self, rng):
        gen = ExtendedGenerator(SERIES)
        base = 0.02
        coarse_values = rng.uniform(-10, 10, 5)

        def final(dt):
            reps = int(round(0.2 / dt))
            pulse = ControlPulse(dt, np.repeat(coarse_values, reps))
            return propagate_forward(pulse, gen)[-1]

        ref = final(base / 8)
        e1 = np.abs(final(base) - ref).max()
        e2 = np.abs(final(base / 2) - ref).max()
        assert 12 <= e1 / e2 <= 20


class TestBackward:
    def test_zero_generator(self):
        gen = ExtendedGenerator(None, omega=0.0)
        terminal = np.arange(16).reshape(4, 4).astype(complex)
        bs = propagate_backward(ControlPulse.constant(0.0, 1.0, 0.1), gen, terminal)
        for b in bs:
            np.testing.assert_array_equal(b, terminal)

    def test_duality_constant_control(self, rng):
        gen = ExtendedGenerator(SERIES)
        pulse = ControlPulse.constant(rng.uniform(-10, 10), 1.0, 1e-3)
        terminal = rng.normal(size=(28, 28)) + 1j * rng.normal(size=(28, 28))
        gs = propagate_forward(pulse, gen)
        bs = propagate_backward(pulse, gen, terminal)
        prod = bs @ gs
        assert np.abs(prod - prod[-1]).max() <= 1e-8

    def test_identity_terminal_gives_forward_map(self, rng):
        gen = ExtendedGenerator(SERIES)
        pulse = random_pulse(rng, 1000, 1e-3)
        g_final = propagate_forward(pulse, gen)[-1]
        b0 = propagate_backward(pulse, gen, np.eye(28))[0]
        np.testing.assert_allclose(b0, g_final, atol=1e-10)

    def test_constancy_any_pulse(self, ohmic_series, rng):
        gen = ExtendedGenerator(ohmic_series)
        pulse = random_pulse(rng, 1000, 1e-3, scale=30.0)
        terminal = gen.embed(np.diag([1, -1, -1, 1]).astype(complex))
        prod = propagate_backward(pulse, gen, terminal) @ propagate_forward(pulse, gen)
        assert np.abs(prod - prod[-1]).max() <= 1e-7

    def test_terminal_shape(self):
        with pytest.raises(ContractError):
            propagate_backward(ControlPulse.constant(0, 1, 0.1), ExtendedGenerator(SERIES), np.eye(4))


class TestPulse:
    def test_bound(self):
        with pytest.raises(ValueError):
            ControlPulse(0.1, [31.0], 30.0)

    def test_duration_and_grid(self):
        p = ControlPulse.constant(2.0, 0.5, 0.1)
        assert len(p) == 5 and p.duration == pytest.approx(0.5)
        np.testing.assert_allclose(p.grid, [0, 0.1, 0.2, 0.3, 0.4, 0.5])

    def test_immutable(self):
        p = ControlPulse.constant(2.0, 0.5, 0.1)
        with pytest.raises(ValueError):
            p.values[0] = 1.0
