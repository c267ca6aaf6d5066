"""Monte Carlo particle solver for the kinetic interface problem.

Phonons move with velocity v(k), scatter after exponential clocks of rate
2 gamma0 R(k) into k' ~ R(k, .), and at y = 0 are transmitted, reflected
(k -> -k) or absorbed with probabilities (p+, p-, g). For T > 0 the
interface emits phonons in mode k at rate T g(k) |v(k)| per unit time and
unit dk. Modes live on the kinetic solver's k-grid so both solvers share
one discretization of the collision operator.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .kinetic import KineticField, KineticParams

log = logging.getLogger(__name__)


class Outcome(enum.IntEnum):
    TRANSMIT = 0
    REFLECT = 1
    ABSORB = 2


def interface_event(k, rule, rng):
    """Draw Transmit/Reflect/Absorb for a phonon in the grid cell containing k.

    Accepts a scalar or an array of k; band-edge cells (invalid in the
    coefficient table) are rejected.
    """
    c = rule.coefficients
    n_k = c.k.size
    kk = np.atleast_1d(np.asarray(k, float))
    j = np.clip(np.floor((kk + 0.5) * n_k).astype(int), 0, n_k - 1)
    if not np.all(c.valid[j]):
        raise ValueError(f"interface event requested at band-edge mode(s) {kk[~c.valid[j]]}")
    u = rng.random(kk.shape)
    out = np.where(u < c.p_plus[j], Outcome.TRANSMIT,
                   np.where(u < c.p_plus[j] + c.p_minus[j], Outcome.REFLECT, Outcome.ABSORB))
    return Outcome(int(out[0])) if np.ndim(k) == 0 else out


@dataclass
class PhononEnsemble:
    y: np.ndarray
    j: np.ndarray
    w: np.ndarray
    alive: np.ndarray
    side: np.ndarray
    n_scatter: np.ndarray
    emitted: np.ndarray  # True for particles created at the interface
    t: float = 0.0

    @property
    def size(self):
        return self.y.size

    def k(self, grid):
        return grid.k[self.j]

    @classmethod
    def concat(cls, parts):
        f = {name: np.concatenate([getattr(p, name) for p in parts])
             for name in ("y", "j", "w", "alive", "side", "n_scatter", "emitted")}
        return cls(**f, t=parts[0].t if parts else 0.0)


@dataclass
class MCResult:
    field: KineticField
    err: np.ndarray
    ensemble: PhononEnsemble
    n_initial: int
    weight: float

    def probe(self, G):
        """<W, G> from particles with a standard error.

        The initial particles are an iid sample of fixed size, the emitted
        ones a compound Poisson sum; their variances add.
        """
        e = self.ensemble
        g = self.field.grid
        inside = np.abs(e.y) < g.L / 2
        vals = np.where(e.alive & inside, e.w * G(e.y, g.k[e.j]), 0.0)
        init = vals[~e.emitted]
        emit = vals[e.emitted]
        est = init.sum() + emit.sum()
        n = init.size
        var = n * init.var(ddof=1) if n > 1 else 0.0
        var += np.sum(emit**2)
        return float(est), float(np.sqrt(var))


def _extend(W0, grid, pad_cells):
    """Clamp-extend W0 by pad_cells rows on both sides (matches the solver's outside values)."""
    return np.concatenate([np.repeat(W0[:1], pad_cells, 0), W0, np.repeat(W0[-1:], pad_cells, 0)])


def sample_initial(W0, grid, n, rng, t: float = 0.0, vmax: float = 0.0):
    """Particles from W0 / int W0 on the window extended by vmax*t on each side."""
    pad = int(np.ceil(vmax * t / grid.dy)) if t > 0 else 0
    We = _extend(np.asarray(W0, float), grid, pad)
    if np.any(We < 0):
        raise ValueError("initial field must be nonnegative")
    mass = We.sum() * grid.dy * grid.dk
    if n == 0 or mass == 0:
        return np.empty(0), np.empty(0, int), 0.0
    p = We.ravel() / We.sum()
    cells = rng.choice(p.size, size=n, p=p)
    iy, j = np.divmod(cells, grid.n_k)
    y0 = -grid.L / 2 - pad * grid.dy
    y = y0 + (iy + rng.random(n)) * grid.dy
    return y, j, mass / n


def _advance(ens: PhononEnsemble, trem, params: KineticParams, rng, freeze_k: bool = False):
    """Event-driven motion of all particles for their remaining times."""
    v = params.v
    mu = params.mu
    rule = params.rule
    mirror = params.grid.mirror
    kern = params.kernel
    act = np.nonzero(ens.alive & (trem > 0))[0]
    while act.size:
        j = ens.j[act]
        vv = v[j]
        with np.errstate(divide="ignore"):
            clock = np.where(mu[j] > 0, rng.exponential(1.0, act.size) / np.where(mu[j] > 0, mu[j], 1), np.inf)
            toward = ens.side[act] * vv < 0
            tc = np.where(toward, np.abs(ens.y[act]) / np.abs(np.where(vv == 0, 1, vv)), np.inf)
        tr = trem[act]
        dt = np.minimum(np.minimum(clock, tc), tr)
        ens.y[act] += vv * dt
        trem[act] = tr - dt
        finished = dt >= tr
        cross = ~finished & (tc <= clock)
        scat = ~finished & ~cross
        if np.any(cross):
            ic = act[cross]
            ens.y[ic] = 0.0
            u = rng.random(ic.size)
            jc = ens.j[ic]
            tr_ = u < rule.p_plus[jc]
            rf = ~tr_ & (u < rule.p_plus[jc] + rule.p_minus[jc])
            ens.side[ic[tr_]] *= -1
            ens.j[ic[rf]] = mirror[jc[rf]]
            ens.alive[ic[~tr_ & ~rf]] = False
        if np.any(scat):
            isc = act[scat]
            ens.n_scatter[isc] += 1
            if not freeze_k:
                ens.j[isc] = kern.sample_outgoing_index(ens.j[isc], rng)
        trem[act[finished]] = 0.0
        act = act[~finished]
        act = act[ens.alive[act]]
    return ens


def _block(W0, t, n, params, seed, block, emission_weight, max_particles, freeze_k, initial_weight=None,
           n_blocks: int = 1):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, block])))
    g = params.grid
    vmax = float(np.max(np.abs(params.v)))
    y, j, w0 = sample_initial(W0, g, n, rng, t, vmax)
    if initial_weight is not None and y.size:
        w0 = initial_weight
    ny = y.size
    ys, js, ts, em = [y], [j], [np.full(ny, float(t))], [np.zeros(ny, bool)]
    ws = [np.full(ny, w0)]
    if params.T > 0 and emission_weight > 0:
        # each block carries 1/n_blocks of the emission
        rate = params.T * params.rule.g * np.abs(params.v) * g.dk / emission_weight / n_blocks
        counts = rng.poisson(rate * t)
        total = int(counts.sum())
        cap = max_particles - ny
        if total > cap:
            log.warning("particle cap reached: %d emissions dropped (absorbed)", total - max(cap, 0))
            keep = max(cap, 0)
            idx = np.repeat(np.arange(g.n_k), counts)[:keep]
        else:
            idx = np.repeat(np.arange(g.n_k), counts)
        te = rng.random(idx.size) * t
        ys.append(np.zeros(idx.size))
        js.append(idx)
        ts.append(t - te)
        em.append(np.ones(idx.size, bool))
        ws.append(np.full(idx.size, emission_weight))
    y = np.concatenate(ys)
    j = np.concatenate(js).astype(np.int64)
    emitted = np.concatenate(em)
    side = np.where(y > 0, 1, np.where(y < 0, -1, np.sign(params.v[j]))).astype(np.int64)
    ens = PhononEnsemble(y, j, np.concatenate(ws), np.ones(y.size, bool), side,
                         np.zeros(y.size, np.int64), emitted, float(t))
    _advance(ens, np.concatenate(ts), params, rng, freeze_k)
    return ens


def histogram(ens: PhononEnsemble, grid, bins=None):
    """Cell averages of the particle weights and per-cell standard errors.

    By default the cells are those of the solver grid. ``bins=(n_y, n_k)``
    coarsens to an equal partition of the same window; n_k must divide the
    solver's k-grid size because particle modes live on that grid.
    """
    ny, nk = bins or (grid.n_y, grid.n_k)
    if grid.n_k % nk:
        raise ValueError(f"k-bins {nk} do not divide grid size {grid.n_k}")
    inside = ens.alive & (np.abs(ens.y) < grid.L / 2)
    dy = grid.L / ny
    iy = np.clip(np.floor((ens.y[inside] + grid.L / 2) / dy).astype(int), 0, ny - 1)
    cell = iy * nk + ens.j[inside] // (grid.n_k // nk)
    vol = dy / nk
    w = ens.w[inside]
    H = np.bincount(cell, weights=w, minlength=ny * nk) / vol
    S = np.bincount(cell, weights=w * w, minlength=ny * nk)
    return H.reshape(ny, nk), np.sqrt(S).reshape(ny, nk) / vol


def run_mc(W0, T: float, t: float, n_particles: int, params: KineticParams, seed: int = 0,
           n_blocks: int = 8, emission_weight: float | None = None, max_particles: int | None = None,
           freeze_k: bool = False) -> MCResult:
    """Particle estimate of W(t) on the solver grid.

    ``T`` overrides ``params.T`` (the interface coefficients are reused).
    Particles are split into ``n_blocks`` blocks with independent streams
    seeded by (seed, block); results do not depend on execution order.
    """
    if T != params.T:
        params = params.with_T(T)
    g = params.grid
    W0 = np.asarray(W0, float)
    if W0.shape != (g.n_y, g.n_k):
        raise ValueError(f"W0 shape {W0.shape} does not match the grid {(g.n_y, g.n_k)}")
    vmax = float(np.max(np.abs(params.v)))
    pad = int(np.ceil(vmax * t / g.dy))
    mass = _extend(W0, g, pad).sum() * g.dy * g.dk
    w0 = mass / n_particles if n_particles else 0.0
    if emission_weight is None:
        emission_weight = w0 if w0 > 0 else (T * g.L / max(n_particles, 1))
    if max_particles is None:
        max_particles = 20 * max(n_particles, 1)
    sizes = np.full(n_blocks, n_particles // n_blocks)
    sizes[: n_particles % n_blocks] += 1
    per_block_cap = max_particles // n_blocks
    parts = [_block(W0, t, int(sizes[b]), params, seed, b, emission_weight, per_block_cap, freeze_k, w0, n_blocks)
             for b in range(n_blocks)]
    ens = PhononEnsemble.concat(parts)
    H, E = histogram(ens, g)
    return MCResult(KineticField(H, t, g), E, ens, n_particles, w0)
