import numpy as np
import pytest

from thermochain.kinetic import KineticGrid, KineticParams, free_flow_interface, solve_kinetic
from thermochain.phonon_mc import Outcome, histogram, interface_event, run_mc, sample_initial
from thermochain.wigner import TestFunction, bump


def params(disp, g0, g1, T=0.0, n_y=64, n_k=130, L=8.0):
    return KineticParams(disp, g0, g1, T, KineticGrid(n_y, n_k, L))


def test_event_free_interface(acoustic, rng):
    p = params(acoustic, 0.0, 0.0)
    out = interface_event(np.full(1000, 0.25), p.rule, rng)
    assert np.all(out == Outcome.TRANSMIT)
    assert interface_event(0.25, p.rule, rng) is Outcome.TRANSMIT


def test_event_frequencies(acoustic):
    p = params(acoustic, 0.0, 1.0)
    n = 10**6
    out = interface_event(np.full(n, 0.25), p.rule, np.random.default_rng(11))
    want = (0.3431458, 0.1715729, 0.4852814)
    for o, q in zip(Outcome, want):
        f = np.mean(out == o)
        assert abs(f - q) < 3 * np.sqrt(q * (1 - q) / n)


def test_event_strong_thermostat(acoustic, rng):
    p = params(acoustic, 0.0, 1e3)
    out = interface_event(np.full(10**4, 0.25), p.rule, rng)
    assert np.mean(out == Outcome.REFLECT) > 0.98


def test_event_rejects_band_edge(acoustic, rng):
    p = params(acoustic, 0.0, 1.0)
    with pytest.raises(ValueError, match="band-edge"):
        interface_event(0.499, p.rule, rng)


def test_sample_initial_mass(acoustic, rng):
    g = KineticGrid(64, 16, 8.0)
    Y, K = g.mesh()
    W0 = np.exp(-Y**2) * (1 + 0.5 * np.cos(2 * np.pi * K))
    y, j, w = sample_initial(W0, g, 1000, rng)
    assert w * y.size == pytest.approx(W0.sum() * g.dy * g.dk)
    assert np.all(np.abs(y) <= g.L / 2) and j.min() >= 0 and j.max() < g.n_k
    with pytest.raises(ValueError, match="nonnegative"):
        sample_initial(-W0, g, 10, rng)


def test_pure_transport(acoustic):
    # no scattering and a transparent interface: particles just translate
    g = KineticGrid(128, 64, 8.0)
    p = KineticParams(acoustic, 0.0, 0.0, 0.0, g)
    Y, K = g.mesh()
    W0 = np.exp(-((Y + 1) / 0.4) ** 2)
    r = run_mc(W0, 0.0, 1.0, 100000, p, seed=2)
    want = free_flow_interface(W0, 1.0, p)
    assert np.all(r.ensemble.n_scatter == 0) and r.ensemble.alive.all()
    for c in (-1.5, -0.5, 0.3):
        G = TestFunction(c, 0.4, bump(0.25, 0.1))
        est, se = r.probe(G)
        assert abs(est - want.functional(G)) < 3 * se + 1e-3 * abs(est)


def test_stationary_coarse_cells(acoustic):
    T = 0.6
    p = params(acoustic, 0.5, 1.0, T, n_y=64, n_k=16)
    r = run_mc(np.full((64, 16), T), T, 1.0, 50000, p, seed=9)
    H, E = histogram(r.ensemble, p.grid, bins=(8, 4))
    z = (H - T) / E
    assert np.abs(z).max() < 4.0
    assert abs(z.mean()) < 3 / np.sqrt(z.size)


def test_histogram_bins_must_divide(acoustic):
    p = params(acoustic, 0.5, 1.0, n_y=16, n_k=16)
    r = run_mc(np.ones((16, 16)), 0.0, 0.1, 200, p, seed=0)
    with pytest.raises(ValueError, match="divide"):
        histogram(r.ensemble, p.grid, bins=(4, 5))


def test_zero_temperature_weight_nonincreasing(acoustic):
    p = params(acoustic, 0.5, 1.0, n_y=64, n_k=32)
    Y, _ = p.grid.mesh()
    W0 = np.exp(-((Y + 0.5) / 0.3) ** 2)
    alive = []
    for t in (0.0, 0.5, 1.0, 2.0):
        e = run_mc(W0, 0.0, t, 20000, p, seed=4).ensemble
        alive.append(e.w[e.alive].sum())
    assert np.all(np.diff(alive) <= 0)
    assert alive[-1] < alive[0]


def test_unscattered_fraction(acoustic):
    # with frozen k every particle keeps its clock rate mu(k)
    p = params(acoustic, 0.7, 0.0, n_y=64, n_k=16)
    n, t = 200000, 0.8
    r = run_mc(np.ones((64, 16)), 0.0, t, n, p, seed=6, freeze_k=True)
    e = r.ensemble
    for j in range(16):
        sel = e.j == j
        m = sel.sum()
        q = np.exp(-p.mu[j] * t)
        frac = np.mean(e.n_scatter[sel] == 0)
        assert abs(frac - q) < 4 * np.sqrt(q * (1 - q) / m) + 1e-12


def test_emission_matches_solver(acoustic):
    # starting empty, everything in the window was emitted by the interface
    T = 0.5
    p = params(acoustic, 1.0, 1.0, T, n_y=128, n_k=16, L=4.0)
    W0 = np.zeros((128, 16))
    r = run_mc(W0, T, 1.0, 20000, p, seed=3, emission_weight=1e-3)
    assert r.ensemble.emitted.all()
    ref = solve_kinetic(W0, 1.0, p, method="direct")
    for c in (-0.6, 0.0, 0.4):
        G = TestFunction(c, 0.3)
        est, se = r.probe(G)
        assert abs(est - ref.functional(G)) < 3 * se + 2e-3 * abs(est)


def test_same_seed_same_result(acoustic):
    p = params(acoustic, 0.5, 1.0, 0.3, n_y=32, n_k=16)
    W0 = np.full((32, 16), 0.3)
    a = run_mc(W0, 0.3, 0.5, 4000, p, seed=12)
    b = run_mc(W0, 0.3, 0.5, 4000, p, seed=12)
    assert np.array_equal(a.field.W, b.field.W)
    c = run_mc(W0, 0.3, 0.5, 4000, p, seed=13)
    assert not np.array_equal(a.field.W, c.field.W)


def test_shape_mismatch(acoustic):
    p = params(acoustic, 0.5, 1.0, n_y=32, n_k=16)
    with pytest.raises(ValueError, match="shape"):
        run_mc(np.ones((16, 16)), 0.0, 0.1, 10, p)
