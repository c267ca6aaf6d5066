"""Invariant suite behind ``thermochain validate``.

Each check returns (passed, detail). The quick set runs in well under a
minute; ``full=True`` adds solver cross-checks.
"""
from __future__ import annotations

import json
import os
import time

import numpy as np
from scipy.special import j0

from .coefficients import J_of_t, interface_coefficients
from .dispersion import make_dispersion, midpoint_grid
from .kinetic import KineticGrid, KineticParams, free_flow_interface, solve_kinetic
from .mild import DampedPropagator
from .phonon_mc import histogram, run_mc
from .scattering import R_total, ScatteringKernel


def check_normalization():
    worst = 0.0
    for preset in ("nn_unpinned", {"preset": "nn_pinned", "omega0": 1.0}):
        d = make_dispersion(preset)
        for g1 in (0.5, 1.0, 2.0):
            c = interface_coefficients(256, g1, d)
            worst = max(worst, float(np.nanmax(np.abs(c.total[c.valid] - 1))))
    return worst < 1e-8, f"max |p+ + p- + g - 1| = {worst:.2e}"


def check_identity():
    worst = 0.0
    for preset in ("nn_unpinned", {"preset": "nn_pinned", "omega0": 1.0}):
        d = make_dispersion(preset)
        c = interface_coefficients(256, 1.0, d)
        v = np.abs(d.omega_bar_prime(c.k))
        lhs = c.nu.real
        rhs = (1 + 1.0 / (2 * v)) * np.abs(c.nu) ** 2
        worst = max(worst, float(np.nanmax(np.abs(lhs - rhs)[c.valid])))
    return worst < 1e-6, f"max identity residual = {worst:.2e}"


def check_closed_form():
    d = make_dispersion("nn_unpinned")
    c = interface_coefficients(np.array([0.25]), 1.0, d, method="richardson", n_k=256)
    want = (0.3431458, 0.1715729, 0.4852814)
    got = (c.p_plus[0], c.p_minus[0], c.g[0])
    err = max(abs(a - b) for a, b in zip(got, want))
    return err < 1e-5, f"(p+, p-, g) at k=1/4 = ({got[0]:.7f}, {got[1]:.7f}, {got[2]:.7f})"


def check_bessel():
    t = np.linspace(0, 20, 51)
    err = float(np.max(np.abs(J_of_t(t, make_dispersion("nn_unpinned")) - j0(2 * t))))
    return err < 1e-8, f"max |J(t) - J0(2t)| = {err:.2e}"


def check_kernel():
    S = ScatteringKernel(1.0, 256)
    err = float(np.max(np.abs(S.row_sum - R_total(S.k))))
    return err < 1e-10, f"max |int R dk' - R(k)| = {err:.2e}"


def check_propagator():
    d = make_dispersion({"preset": "nn_pinned", "omega0": 1.0})
    P = DampedPropagator(0.1, 0.5, d, midpoint_grid(64))
    e11, e12 = P.e_Omega(0.0)
    err = float(max(np.max(np.abs(e11 - 1)), np.max(np.abs(e12))))
    return err < 1e-14, f"|exp(Omega 0) - I| = {err:.1e}"


def check_free_flow():
    d = make_dispersion("nn_unpinned")
    g = KineticGrid(256, 130, 8.0)  # 0.25 is a k-midpoint when n_k = 2 mod 4
    p = KineticParams(d, 0.0, 1.0, 0.0, g)
    Y, _ = g.mesh()
    f = free_flow_interface(((Y >= -1) & (Y <= 0)).astype(float), 1.0, p)
    c = interface_coefficients(np.array([0.25]), 1.0, d, n_k=130)
    got = f.at(0.5, 0.25)
    return abs(got - c.p_plus[0]) < 1e-6, f"W(0.5, 1/4) = {got:.7f}, p+ = {c.p_plus[0]:.7f}"


def check_stationarity():
    d = make_dispersion("nn_unpinned")
    g = KineticGrid(128, 32, 8.0)
    p = KineticParams(d, 0.5, 1.0, 0.7, g)
    W = solve_kinetic(np.full((128, 32), 0.7), 1.0, p, method="direct").W
    err = float(np.max(np.abs(W - 0.7)))
    return err < 1e-9, f"max |W(1) - T| (direct path) = {err:.2e}"


def check_contraction():
    d = make_dispersion("nn_unpinned")
    g = KineticGrid(256, 32, 8.0)
    p = KineticParams(d, 0.5, 1.0, 0.0, g)
    Y, K = g.mesh()
    f = solve_kinetic(np.exp(-((Y + 0.8) / 0.3) ** 2) * (1 + 0 * K), 1.0, p, record=True)
    norms = [n for _, n in f.history]
    inc = float(np.max(np.diff(norms)))
    return inc <= 1e-8, f"max step increase of ||W|| = {inc:.2e}"


def check_mc_stationarity():
    d = make_dispersion("nn_unpinned")
    g = KineticGrid(64, 16, 8.0)
    p = KineticParams(d, 0.5, 1.0, 0.5, g)
    r = run_mc(np.full((64, 16), 0.5), 0.5, 1.0, 50000, p, seed=11)
    H, E = histogram(r.ensemble, g, bins=(8, 4))
    z = float(np.max(np.abs(H - 0.5) / E))
    return z < 3.5, f"max cellwise |z| on 8x4 cells = {z:.2f}"


QUICK = [check_normalization, check_identity, check_closed_form, check_bessel, check_kernel,
         check_propagator, check_free_flow, check_stationarity, check_contraction, check_mc_stationarity]


def check_solver_vs_mc():
    from .wigner import bump
    d = make_dispersion("nn_unpinned")
    g = KineticGrid(256, 64, 8.0)
    p = KineticParams(d, 0.5, 1.0, 0.0, g)
    Y, K = g.mesh()
    W0 = np.exp(-((Y + 0.8) / 0.4) ** 2) * (1 + 0.5 * np.cos(2 * np.pi * K))
    s = solve_kinetic(W0, 0.5, p)
    r = run_mc(W0, 0.0, 0.5, 100000, p, seed=3)
    zs = []
    for c in (-1.0, -0.4, 0.4):
        for kc in (-0.2, 0.2):
            h = bump(kc, 0.12)
            G = (lambda y, k, c=c, h=h: np.exp(-((y - c) / 0.5) ** 2) * h(k))
            est, se = r.probe(G)
            zs.append((est - s.functional(G)) / se)
    z = float(np.max(np.abs(zs)))
    return z < 3, f"max |z| over 6 probes = {z:.2f}"


FULL = [check_solver_vs_mc]


def run_suite(cfg=None, full=False, out=None, stream=print):
    checks = QUICK + (FULL if full else [])
    results = {}
    ok = True
    for chk in checks:
        t0 = time.perf_counter()
        try:
            passed, detail = chk()
        except Exception as e:  # a crashing check is a failed check
            passed, detail = False, f"raised {type(e).__name__}: {e}"
        name = chk.__name__.removeprefix("check_")
        stream(f"{'PASS' if passed else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
        results[name] = {"passed": bool(passed), "detail": detail}
        ok &= bool(passed)
    if out is not None:
        with open(os.path.join(out, "validate.json"), "w") as f:
            json.dump(results, f, indent=2, sort_keys=True)
    return ok
