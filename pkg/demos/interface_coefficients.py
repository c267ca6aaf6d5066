"""What happens to a phonon at the thermostatted site.

Tabulates transmission, reflection and absorption probabilities across the
band for a weak and a strong thermostat, and shows the two numerical routes
to the boundary value nu agree.
"""
import numpy as np

from thermochain.coefficients import interface_coefficients
from thermochain.dispersion import make_dispersion

disp = make_dispersion("nn_unpinned")
k = np.array([0.05, 0.125, 0.25, 0.375, 0.45])

for g1 in (0.2, 1.0, 10.0):
    c = interface_coefficients(k, g1, disp, n_k=64)
    print(f"gamma1 = {g1}")
    print("     k      p+      p-       g")
    for row in zip(c.k, c.p_plus, c.p_minus, c.g):
        print("  {:5.3f}  {:6.4f}  {:6.4f}  {:6.4f}".format(*row))

# slow phonons near the band edges see the thermostat as a wall
strong = interface_coefficients(k, 1e3, disp, n_k=64)
print("\ngamma1 = 1000 reflects almost everything:", np.round(strong.p_minus, 4))

pinned = make_dispersion({"preset": "nn_pinned", "omega0": 1.0})
a = interface_coefficients(128, 1.0, pinned, method="boundary")
b = interface_coefficients(128, 1.0, pinned, method="richardson")
both = a.valid & b.valid
print(f"pinned chain, boundary vs extrapolated nu: max diff {np.max(np.abs(a.nu - b.nu)[both]):.1e}")
