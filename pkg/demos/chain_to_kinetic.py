"""From the noisy harmonic chain to the kinetic picture.

Runs chain ensembles at shrinking eps and compares the Wigner functional of
the chain with the kinetic solution at the same macroscopic time. Small
ensembles keep this quick; `thermochain converge` runs the full table.
"""
from thermochain import experiments
from thermochain.config import resolve

cfg = resolve({"M": 300, "eps": [1 / 16, 1 / 32, 1 / 64], "grid": {"n_y": 256, "n_k": 64}})
print("probe centers:", [pr["center"] for pr in cfg["probes"]])
for row in experiments.run_converge(cfg):
    worst = max(range(len(row.chain)), key=lambda i: abs(row.chain[i] - row.kinetic[i]))
    print(f"eps = 1/{round(1 / row.eps):3d}: d = {row.d:.4f}  (worst probe G{worst}: chain "
          f"{row.chain[worst]:.4f} +- {row.chain_se[worst]:.4f}, kinetic {row.kinetic[worst]:.4f})")
