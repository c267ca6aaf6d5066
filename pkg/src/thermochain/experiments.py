"""Experiment drivers behind the CLI subcommands.

Every driver takes a resolved config dict (see :mod:`thermochain.config`)
and an output directory, writes CSV/binary artifacts plus ``manifest.json``
and returns the in-memory results.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chain import ChainParams, PacketSpec, Streams, energy_parseval, evolve, init_state, wave_function
from .coefficients import interface_coefficients
from .dispersion import make_dispersion
from .kinetic import KineticGrid, KineticParams, solve_kinetic
from .phonon_mc import run_mc
from .wigner import TestFunction, bump, estimate_wigner, pair_members

COLUMNS = {
    "coeffs.csv": ["k", "nu_re", "nu_im", "p_plus", "p_minus", "g", "sum", "valid"],
    "kinetic.csv": ["y", "k", "W"],
    "mc.csv": ["y", "k", "W", "W_err"],
    "energy.csv": ["t_micro", "mean_energy", "se"],
    "wigner.csv": ["eta", "k", "W_re", "W_im", "W_err", "Y_re", "Y_im", "Y_err"],
    "converge.csv": ["eps", "d", "probe", "chain", "chain_se", "kinetic"],
}


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_manifest(out, cfg, command, files, extra=None):
    man = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "files": {f: COLUMNS.get(os.path.basename(f), []) for f in files},
    }
    if extra:
        man.update(extra)
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(man, f, indent=2, sort_keys=True, default=float)


def _ensure_out(out):
    if not os.path.isdir(out):
        raise FileNotFoundError(f"output directory {out!r} does not exist")
    return out


# -- builders ----------------------------------------------------------------

def dispersion(cfg):
    return make_dispersion(cfg["dispersion"])


def grid(cfg):
    g = cfg["grid"]
    return KineticGrid(g["n_y"], g["n_k"], g["L"])


def kinetic_params(cfg, T=None, grid_=None):
    d = dispersion(cfg)
    gr = grid_ or grid(cfg)
    kc = cfg["kinetic"]
    T = cfg["T"] if T is None else T
    coeffs = interface_coefficients(gr.k, cfg["gamma1"], d, T, method=cfg["coeff_method"])
    return KineticParams(d, cfg["gamma0"], cfg["gamma1"], T, gr, h=kc["h"], tol=kc["tol"],
                         max_iter=kc["max_iter"], interp=kc["interp"], coefficients=coeffs)


def packet(cfg):
    return PacketSpec(**cfg["packet"])


def initial_field(cfg, gr: KineticGrid):
    ini = cfg["initial"]
    Y, K = gr.mesh()
    kind = ini["kind"]
    if kind == "packet":
        return packet(cfg).limit(Y, K)
    if kind == "constant":
        return np.full(Y.shape, float(ini.get("value", cfg["T"])))
    if kind == "indicator":
        a, b = ini.get("a", -1.0), ini.get("b", 0.0)
        return ((Y >= a) & (Y <= b)).astype(float) * float(ini.get("value", 1.0))
    return np.zeros(Y.shape)


def probes(cfg):
    out = []
    for i, p in enumerate(cfg["probes"]):
        h = bump(p["k_center"], p.get("k_width", 0.08)) if "k_center" in p else None
        out.append(TestFunction(p["center"], p["width"], h, name=f"G{i}"))
    return out


# -- subcommands ---------------------------------------------------------------

def run_coeffs(cfg, out):
    _ensure_out(out)
    n_k = cfg["grid"]["n_k"]
    # nodes j/n_k - 1/2 contain k = 0.25 when 4 | n_k; midpoints match the solver grid
    k = np.arange(n_k + 1) / n_k - 0.5 if cfg["coeff_grid"] == "nodes" else grid(cfg).k
    c = interface_coefficients(k, cfg["gamma1"], dispersion(cfg), cfg["T"], method=cfg["coeff_method"])
    rows = [r + (int(v),) for r, v in zip(c.to_rows(), c.valid)]
    write_csv(os.path.join(out, "coeffs.csv"), COLUMNS["coeffs.csv"], rows)
    write_manifest(out, cfg, "coeffs", ["coeffs.csv"])
    return c


def _field_rows(gr, W, err=None):
    for i, y in enumerate(gr.y):
        for j, k in enumerate(gr.k):
            yield (y, k, W[i, j]) if err is None else (y, k, W[i, j], err[i, j])


def run_kinetic(cfg, out):
    _ensure_out(out)
    p = kinetic_params(cfg)
    W0 = initial_field(cfg, p.grid)
    f = solve_kinetic(W0, cfg["t"], p, method=cfg["kinetic"]["method"], record=True)
    write_csv(os.path.join(out, "kinetic.csv"), COLUMNS["kinetic.csv"], _field_rows(p.grid, f.W))
    write_manifest(out, cfg, "kinetic", ["kinetic.csv"], {"l2_history": f.history})
    return f


def run_mc_cmd(cfg, out):
    _ensure_out(out)
    p = kinetic_params(cfg)
    W0 = initial_field(cfg, p.grid)
    m = cfg["mc"]
    r = run_mc(W0, cfg["T"], cfg["t"], m["n_particles"], p, seed=cfg["seed"], n_blocks=m["n_blocks"])
    write_csv(os.path.join(out, "mc.csv"), COLUMNS["mc.csv"], _field_rows(p.grid, r.field.W, r.err))
    write_manifest(out, cfg, "mc", ["mc.csv"])
    return r


# -- microscopic ensembles --------------------------------------------------------

def _init_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]).spawn(3)[2])


def _chain_block(args):
    disp_spec, eps, gamma0, gamma1, T, N, pk, size, t_micro, dt, n_out, seed, block = args
    params = ChainParams(make_dispersion(disp_spec), eps, gamma0, gamma1, T)
    state = init_state(params, N, PacketSpec(**pk), size, _init_rng(seed, block))
    energies = []
    evolve(state, t_micro, Streams.from_seed(seed, block), dt=dt, n_out=n_out,
           observer=lambda s: energies.append((s.t, energy_parseval(s))))
    return wave_function(state).psi_hat, energies


@dataclass
class EnsembleResult:
    psi_hat: np.ndarray
    times: np.ndarray
    energies: np.ndarray  # (n_times, M)
    eps: float
    N: int


def simulate_ensemble(cfg, eps, N, M, t_micro, dt=None, n_out=0, seed=None, workers=None):
    """Chain ensemble in fixed blocks (block b seeded by (seed, b)); order-independent."""
    seed = cfg["seed"] if seed is None else seed
    workers = cfg["workers"] if workers is None else workers
    bs = cfg["block_size"]
    sizes = [min(bs, M - i) for i in range(0, M, bs)]
    jobs = [(cfg["dispersion"], eps, cfg["gamma0"], cfg["gamma1"], cfg["T"], N, cfg["packet"], s,
             t_micro, dt, n_out, seed, b) for b, s in enumerate(sizes)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            res = list(ex.map(_chain_block, jobs))
    else:
        res = [_chain_block(j) for j in jobs]
    psi = np.concatenate([r[0] for r in res])
    times = np.array([t for t, _ in res[0][1]])
    en = np.concatenate([np.stack([e for _, e in r[1]]) for r in res], axis=1)
    return EnsembleResult(psi, times, en, eps, N)


def chain_size(cfg, eps):
    return int(round(cfg["grid"]["L"] / eps / 2)) * 2


def run_chain(cfg, out):
    """Ensemble at eps[0] up to macroscopic time t; Wigner estimate and energy series."""
    _ensure_out(out)
    eps = cfg["eps"][0]
    N = chain_size(cfg, eps)
    ens = simulate_ensemble(cfg, eps, N, cfg["M"], cfg["t"] / eps, cfg["chain"].get("dt"), cfg["chain"]["n_out"])
    est = estimate_wigner(ens.psi_hat, eps, cfg["grid"]["eta_max"], keep_fields=False)
    est.save(os.path.join(out, "wigner.bin"))
    est.to_csv(os.path.join(out, "wigner.csv"))
    se = ens.energies.std(axis=1, ddof=1) / np.sqrt(ens.energies.shape[1])
    write_csv(os.path.join(out, "energy.csv"), COLUMNS["energy.csv"],
              zip(ens.times, ens.energies.mean(axis=1), se))
    write_manifest(out, cfg, "chain", ["wigner.bin", "wigner.csv", "energy.csv"], {"N": N, "eps": eps})
    return est, ens


@dataclass
class ConvergenceRow:
    eps: float
    d: float
    chain: list
    chain_se: list
    kinetic: list


def kinetic_reference(cfg, Gs):
    p = kinetic_params(cfg)
    W0 = packet(cfg).limit(*p.grid.mesh())
    f = solve_kinetic(W0, cfg["t"], p, method=cfg["kinetic"]["method"])
    return [f.functional(G) for G in Gs]


def run_converge(cfg, out=None):
    """d(eps) = max_G |<W_eps(t), G> - <W(t), G>| for each eps in the config."""
    if out is not None:
        _ensure_out(out)
    Gs = probes(cfg)
    ref = kinetic_reference(cfg, Gs)
    rows = []
    for eps in cfg["eps"]:
        N = chain_size(cfg, eps)
        ens = simulate_ensemble(cfg, eps, N, cfg["M"], cfg["t"] / eps, cfg["chain"].get("dt"))
        vals, ses = [], []
        for G in Gs:
            per = pair_members(ens.psi_hat, eps, G, cfg["grid"]["eta_max"])
            vals.append(float(per.real.mean()))
            ses.append(float(per.real.std(ddof=1) / np.sqrt(per.size)))
        d = max(abs(a - b) for a, b in zip(vals, ref))
        rows.append(ConvergenceRow(eps, d, vals, ses, ref))
    if out is not None:
        flat = [(r.eps, r.d, G.name, r.chain[i], r.chain_se[i], r.kinetic[i]) for r in rows for i, G in enumerate(Gs)]
        write_csv(os.path.join(out, "converge.csv"), COLUMNS["converge.csv"], flat)
        write_manifest(out, cfg, "converge", ["converge.csv"],
                       {"d": {str(r.eps): r.d for r in rows},
                        "threshold": 0.08 * max_abs_probe(Gs) * packet(cfg).energy_scale()})
    return rows


def max_abs_probe(Gs):
    return max(G.sup() for G in Gs)
