import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from thermochain.coefficients import J_of_t, g_tilde, interface_coefficients
from thermochain.dispersion import make_dispersion, midpoint_grid
from thermochain.mild import (DampedPropagator, J_eps, J_tilde_eps, kernel_for, solve_deterministic,
                              solve_volterra)
from thermochain.scattering import R_total


def taylor_expm(A, terms=12):
    """Scaled-and-squared truncated Taylor series (independent of the closed form)."""
    s = max(0, int(np.ceil(np.log2(max(np.abs(A).sum(axis=-1).max(), 1e-16)))) + 1)
    B = A / 2**s
    out = np.eye(2) + 0j
    term = np.eye(2) + 0j
    for n in range(1, terms + 1):
        term = term @ B / n
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


@pytest.fixture
def prop(pinned):
    return DampedPropagator(0.1, 0.5, pinned, midpoint_grid(32))


def test_identity_at_zero(prop):
    e11, e12 = prop.e_Omega(0.0)
    assert np.all(e11 == 1) and np.all(e12 == 0)


def test_undamped_limit(acoustic):
    k = midpoint_grid(16)
    p = DampedPropagator(0.0, 1.0, acoustic, k)
    e11, e12 = p.e_Omega(1.7)
    assert np.allclose(e11, np.exp(-1j * acoustic.omega(k) * 1.7), atol=1e-14)
    assert np.all(e12 == 0)


def test_determinant_and_taylor(prop):
    t = 2.3
    M = prop.matrix(t)
    assert np.allclose(np.linalg.det(M), np.exp(-2 * prop.a * t), atol=1e-12)
    Om = prop.omega_matrix()
    for i in range(prop.k.size):
        assert np.allclose(M[i], taylor_expm(Om[i] * t), atol=1e-10)


def test_eigenvalues(prop):
    lp, lm = prop.eigenvalues
    assert np.allclose(np.conj(lp), lm)
    assert np.all(lp.real <= 0)
    ev = np.linalg.eigvals(prop.omega_matrix())
    closed = np.stack([lp, lm], axis=-1)
    dist = np.abs(ev[:, :, None] - closed[:, None, :]).min(axis=-1)
    assert dist.max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 0.3))
def test_semigroup(s, t, eps):
    d = make_dispersion({"preset": "nn_pinned", "omega0": 1.0})
    p = DampedPropagator(eps, 1.0, d, midpoint_grid(16))
    assert np.allclose(p.matrix(s + t), p.matrix(s) @ p.matrix(t), atol=1e-10)


def test_j_eps_at_zero(prop):
    # the defining expression 1/2 exp(Omega 0) f.f equals 1
    assert np.allclose(prop.j_eps(0.0), 1.0)


def test_J_eps_reduces_to_J(acoustic):
    t = np.linspace(0, 5, 11)
    assert np.allclose(J_eps(t, 0.0, 1.0, acoustic, n_k=2048), J_of_t(t, acoustic), atol=1e-10)
    assert np.max(np.abs(J_eps(t, 0.01, 1.0, acoustic, 2048) - J_of_t(t, acoustic))) <= 0.05


def test_volterra_trivial():
    ker = solve_volterra(lambda t: np.cos(t), 0.0, 0.01, 1.0)
    assert np.all(ker.h == 0)
    with pytest.raises(ValueError):
        solve_volterra(lambda t: np.ones_like(t), 100.0, 0.01, 1.0)


def test_volterra_laplace(acoustic):
    eps, g0, g1 = 0.05, 1.0, 1.0
    out = []
    # horizon 20: the neglected tail is below e^{-20} at lambda >= 1
    for dt in (1e-3, 5e-4):
        ker = kernel_for(eps, g0, g1, acoustic, dt, 20.0, n_k=1024)
        out.append(ker)
    for lam in (1.0, 2.0, 4.0):
        want = 1 / (1 + g1 * J_tilde_eps(lam, eps, g0, acoustic))
        assert abs(out[1].laplace(lam) - want) < 1e-6
    assert abs(out[0].laplace(1.0) - out[1].laplace(1.0)) < 1e-7


def test_boundary_resolvent_approaches_nu(acoustic):
    k = midpoint_grid(32)
    c = interface_coefficients(k, 1.0, acoustic)
    means = []
    for e in (1e-1, 1e-2, 1e-3):
        ks = c.k[c.valid & (c.k > 0)]
        # g~_eps uses the damped transform with d(k) = gamma0 eps R(k), gamma0 = 1
        vals = [g_tilde(complex(e, -float(acoustic.omega(kk))), 1.0, acoustic,
                        damping=lambda q, e=e: e * R_total(q)) for kk in ks]
        means.append(np.mean(np.abs(np.array(vals) - c.nu[c.valid & (c.k > 0)])))
    assert means[0] > means[1] > means[2]


def _rhs_factory(N, eps, g0, g1, disp):
    k = np.arange(N) / N
    p = DampedPropagator(eps, g0, disp, k)
    neg = (-np.arange(N)) % N

    def rhs(t, y):
        phi = y[:N] + 1j * y[N:]
        M = np.conj(phi[neg])
        p0 = np.mean(phi - M) / 2j  # momentum at the origin
        d = (-p.a - 1j * p.w) * phi + p.a * M - 1j * g1 * p0.real
        return np.concatenate([d.real, d.imag])
    return rhs


def _rk4(f, y, t, dt):
    n = int(round(t / dt))
    for i in range(n):
        s = i * dt
        k1 = f(s, y)
        k2 = f(s + dt / 2, y + dt / 2 * k1)
        k3 = f(s + dt / 2, y + dt / 2 * k2)
        k4 = f(s + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_free_evolution(acoustic, rng):
    N = 16
    psi = rng.normal(size=N) + 1j * rng.normal(size=N)
    out = solve_deterministic(psi, 2.0, 0.0, 0.0, 0.0, acoustic)
    assert np.allclose(out, np.exp(-1j * acoustic.omega(np.arange(N) / N) * 2.0) * psi, atol=1e-14)


@pytest.mark.slow
def test_matches_direct_integration(pinned, rng):
    N, eps, g0, g1, t = 64, 0.05, 1.0, 1.0, 10.0
    psi = rng.normal(size=N) + 1j * rng.normal(size=N)
    mild = solve_deterministic(psi, t, eps, g0, g1, pinned, dt=1e-3)
    y = _rk4(_rhs_factory(N, eps, g0, g1, pinned), np.concatenate([psi.real, psi.imag]), t, 1e-3)
    direct = y[:N] + 1j * y[N:]
    assert np.sqrt(np.mean(np.abs(mild - direct) ** 2)) < 1e-5


def test_energy_nonincreasing(pinned, rng):
    N = 32
    psi = rng.normal(size=N) + 1j * rng.normal(size=N)
    E = [np.sum(np.abs(solve_deterministic(psi, t, 0.05, 1.0, 1.0, pinned, dt=0.01)) ** 2) for t in np.arange(0, 4.01, 0.5)]
    assert np.all(np.diff(E) <= 1e-9 * E[0])


def test_short_time_against_scipy(pinned, rng):
    N, eps, g0, g1, t = 16, 0.1, 1.0, 2.0, 2.0
    psi = rng.normal(size=N) + 1j * rng.normal(size=N)
    sol = solve_ivp(_rhs_factory(N, eps, g0, g1, pinned), (0, t), np.concatenate([psi.real, psi.imag]),
                    rtol=1e-11, atol=1e-12)
    direct = sol.y[:N, -1] + 1j * sol.y[N:, -1]
    mild = solve_deterministic(psi, t, eps, g0, g1, pinned, dt=2e-3)
    assert np.sqrt(np.mean(np.abs(mild - direct) ** 2)) < 1e-5
