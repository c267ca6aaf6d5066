"""A wave packet hitting the interface, solved twice.

The deterministic solver and the particle method should give the same
functionals of W(t). With T > 0 the interface also emits phonons, and a
field that starts at T stays there.
"""
import numpy as np

from thermochain.chain import PacketSpec
from thermochain.dispersion import make_dispersion
from thermochain.kinetic import KineticGrid, KineticParams, l2_norm, solve_kinetic
from thermochain.phonon_mc import run_mc
from thermochain.wigner import TestFunction, bump

disp = make_dispersion("nn_unpinned")
grid = KineticGrid(256, 64, 8.0)
Y, K = grid.mesh()
W0 = PacketSpec(A=1.0, sigma=0.3, y0=-0.8, k_center=0.25, k_width=0.08).limit(Y, K)

for T in (0.0, 0.4):
    p = KineticParams(disp, 0.5, 1.0, T, grid)
    det = solve_kinetic(W0, 1.0, p, record=True)
    mc = run_mc(W0, T, 1.0, 50000, p, seed=1)
    print(f"T = {T}: ||W|| {l2_norm(W0, grid):.4f} -> {l2_norm(det.W, grid):.4f}")
    for c, kc, label in ((-0.8, 0.25, "left, right-movers"), (-0.8, -0.25, "left, reflected"),
                         (0.6, 0.25, "right, transmitted")):
        G = TestFunction(c, 0.4, bump(kc, 0.12))
        est, se = mc.probe(G)
        print(f"  {label:20s} solver {det.functional(G):.5f}   particles {est:.5f} +- {se:.5f}")

p = KineticParams(disp, 0.5, 1.0, 0.4, grid)
flat = solve_kinetic(np.full(Y.shape, 0.4), 1.0, p, method="direct")
print(f"\nW = T is stationary: max |W(1) - T| = {np.max(np.abs(flat.W - 0.4)):.1e}")
