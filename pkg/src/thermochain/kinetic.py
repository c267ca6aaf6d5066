"""Deterministic solver for the kinetic equation with a thermostat interface at y = 0.

    dW/dt + v(k) dW/dy = gamma0 L W,   y != 0,

with transmission p+, reflection p- and absorption g at the interface and
thermal creation g T. Transport is done exactly along characteristics
(semi-Lagrangian, positivity-preserving cubic Hermite lookups on each half-line); the
collision gain is handled by Picard iteration of the Duhamel formula on
short time slabs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import InterfaceCoefficients, interface_coefficients
from .dispersion import DispersionRelation, midpoint_grid
from .scattering import ScatteringKernel


class PicardError(RuntimeError):
    pass


@dataclass
class KineticGrid:
    n_y: int = 512
    n_k: int = 256
    L: float = 8.0

    def __post_init__(self):
        if self.n_y % 2 or self.n_k % 2:
            raise ValueError("grid sizes must be even")
        self.dy = self.L / self.n_y
        self.y = -self.L / 2 + (np.arange(self.n_y) + 0.5) * self.dy
        self.k = midpoint_grid(self.n_k)
        self.dk = 1.0 / self.n_k
        self.half = self.n_y // 2
        self.mirror = np.arange(self.n_k)[::-1]

    def mesh(self):
        return np.meshgrid(self.y, self.k, indexing="ij")


@dataclass
class InterfaceRule:
    """Interface coefficients on the solver grid plus the temperature.

    Band-edge cells flagged invalid in the coefficient table are filled from
    the nearest valid cell with the same sign of k.
    """

    coefficients: InterfaceCoefficients
    T: float = 0.0
    p_plus: np.ndarray = field(init=False)
    p_minus: np.ndarray = field(init=False)
    g: np.ndarray = field(init=False)

    def __post_init__(self):
        c = self.coefficients
        k = c.k
        src = np.arange(k.size)
        vi = np.nonzero(c.valid)[0]
        if vi.size == 0:
            raise ValueError("no valid interface cells")
        for i in np.nonzero(~c.valid)[0]:
            same = vi[np.sign(k[vi]) == np.sign(k[i])]
            pool = same if same.size else vi
            src[i] = pool[np.argmin(np.abs(k[pool] - k[i]))]
        self.p_plus = c.p_plus[src]
        self.p_minus = c.p_minus[src]
        self.g = c.g[src]

    def apply(self, same_side_in, other_side_in):
        """Outgoing trace p+ W(transmitted) + p- W(reflected) + g T for each mode."""
        return self.p_plus * same_side_in + self.p_minus * other_side_in + self.g * self.T


@dataclass
class KineticParams:
    disp: DispersionRelation
    gamma0: float
    gamma1: float
    T: float = 0.0
    grid: KineticGrid = field(default_factory=KineticGrid)
    h: float = 0.1
    n_time: int = 4
    n_gauss: int = 4
    tol: float = 1e-10
    max_iter: int = 50
    interp: str = "positive"
    coefficients: InterfaceCoefficients | None = None

    def __post_init__(self):
        if self.coefficients is None:
            self.coefficients = interface_coefficients(self.grid.k, self.gamma1, self.disp, self.T)
        self.rule = InterfaceRule(self.coefficients, self.T)
        self.kernel = ScatteringKernel(self.gamma0, self.grid.n_k)
        self.v = self.disp.omega_bar_prime(self.grid.k)
        # loss rate from the discrete row sums so that L annihilates constants exactly
        self.mu = 2 * self.gamma0 * self.kernel.row_sum

    def with_T(self, T):
        c = self.coefficients
        return KineticParams(self.disp, self.gamma0, self.gamma1, T, self.grid, self.h, self.n_time,
                             self.n_gauss, self.tol, self.max_iter, self.interp, c)


@dataclass
class KineticField:
    W: np.ndarray
    t: float
    grid: KineticGrid
    history: list = field(default_factory=list)

    def functional(self, G):
        y, k = self.grid.mesh()
        return float(np.sum(self.W * G(y, k)) * self.grid.dy * self.grid.dk)

    def at(self, y, k):
        """Value at position y in the k-cell containing k (cubic lookup in y)."""
        y = np.atleast_1d(np.asarray(y, float))
        j = np.clip(np.floor((np.atleast_1d(k) + 0.5) * self.grid.n_k).astype(int), 0, self.grid.n_k - 1)
        j = np.broadcast_to(j, y.shape)
        plan = EvalPlan(self.grid, y, j, np.ones(y.size), np.arange(y.size), y.size)
        out = plan.apply(prepare(self.W, self.grid))
        return out if out.size > 1 else float(out[0])


# -- cubic Hermite on each half-line ----------------------------------

def _to_halves(F, n):
    """(n_y, ...) -> (2, n, ...) ordered by distance from the interface."""
    return np.stack([F[n - 1::-1], F[n:]])


def _raw_slopes(H, dy):
    """Fourth-order differences along axis 1 (one-sided third order near the ends)."""
    d = np.empty_like(H)
    d[:, 2:-2] = (-H[:, 4:] + 8 * H[:, 3:-1] - 8 * H[:, 1:-3] + H[:, :-4]) / (12 * dy)
    d[:, 0] = (-11 * H[:, 0] + 18 * H[:, 1] - 9 * H[:, 2] + 2 * H[:, 3]) / (6 * dy)
    d[:, 1] = (-2 * H[:, 0] - 3 * H[:, 1] + 6 * H[:, 2] - H[:, 3]) / (6 * dy)
    d[:, -1] = (11 * H[:, -1] - 18 * H[:, -2] + 9 * H[:, -3] - 2 * H[:, -4]) / (6 * dy)
    d[:, -2] = (2 * H[:, -1] + 3 * H[:, -2] - 6 * H[:, -3] + H[:, -4]) / (6 * dy)
    return d


def hermite_slopes(H, dy, mode: str = "positive"):
    """Limited slopes along axis 1 of (2, n, n_k) arrays.

    ``"monotone"``: Hyman filter, each interval's cubic is monotone (slopes
    vanish at discrete extrema, which clips smooth peaks at O(dy^2)).
    ``"positive"``: |d| <= 3 f / dy at nonnegative nodes, the sufficient
    condition for a nonnegative cubic on intervals with nonnegative ends;
    smooth extrema keep their fourth-order slopes.
    """
    d = _raw_slopes(H, dy)
    if mode == "positive":
        bound = 3 * np.abs(H) / dy
        return np.where(H >= 0, np.clip(d, -bound, bound), d)
    if mode != "monotone":
        raise ValueError(f"unknown interpolation mode {mode!r}")
    sec = np.diff(H, axis=1) / dy
    # neighbouring secants; the ends only see one
    left = np.concatenate([sec[:, :1], sec], axis=1)
    right = np.concatenate([sec, sec[:, -1:]], axis=1)
    same = left * right > 0
    m = 3 * np.minimum(np.abs(left), np.abs(right))
    s = np.sign(right + left)
    return np.where(same, s * np.minimum(np.abs(d), m) * (np.sign(d) == s), 0.0)


class EvalPlan:
    """Precomputed lookups of half-line Hermite interpolants at scattered points.

    Each component has a signed position ``Y``, a mode index ``j``, a factor
    and a target index; :meth:`apply` returns the factor-weighted sums per
    target for a prepared field.
    """

    def __init__(self, grid: KineticGrid, Y, j, factor, target, n_target):
        n = grid.half
        dy = grid.dy
        nk = grid.n_k
        Y = np.asarray(Y, float)
        side = (Y >= 0).astype(np.int64)
        r = np.abs(Y) / dy - 0.5  # fractional node coordinate
        clamp = r >= n - 1
        extrap = r < 0
        i0 = np.clip(np.floor(r).astype(np.int64), 0, n - 2)
        t = np.where(extrap, r, r - i0)
        t = np.where(clamp, 1.0, t)
        i0 = np.where(clamp, n - 2, i0)
        t2, t3 = t * t, t * t * t
        self.h00 = 2 * t3 - 3 * t2 + 1
        self.h10 = (t3 - 2 * t2 + t) * dy
        self.h01 = -2 * t3 + 3 * t2
        self.h11 = (t3 - t2) * dy
        base = (side * n + i0) * nk + np.asarray(j, np.int64)
        self.idx0 = base
        self.idx1 = base + nk
        self.extrap = np.nonzero(extrap)[0]
        self.Y = Y
        self.j = np.asarray(j, np.int64)
        self.factor = np.asarray(factor, float)
        self.target = np.asarray(target, np.int64)
        self.n_target = n_target

    def values(self, prepared):
        Hf, Df = prepared
        f0, f1 = Hf[self.idx0], Hf[self.idx1]
        val = self.h00 * f0 + self.h10 * Df[self.idx0] + self.h01 * f1 + self.h11 * Df[self.idx1]
        e = self.extrap
        if e.size:
            # half-cell extrapolation toward y = 0: keep it near the linear
            # extrapolation and nonnegative for nonnegative data
            a, b = f0[e], f1[e]
            lin = 1.5 * a - 0.5 * b
            slack = 0.5 * np.abs(a - b)
            lo = np.minimum(a, lin) - slack
            lo = np.where(np.minimum(a, b) >= 0, np.maximum(lo, 0.0), lo)
            hi = np.maximum(a, lin) + slack
            val[e] = np.clip(val[e], lo, hi)
        return val

    def apply_exact(self, fn):
        """Same sums with an analytic fn(Y, j) in place of the interpolant."""
        return np.bincount(self.target, weights=self.factor * fn(self.Y, self.j), minlength=self.n_target)

    def apply(self, prepared, weights=None):
        w = self.factor if weights is None else self.factor * weights
        return np.bincount(self.target, weights=w * self.values(prepared), minlength=self.n_target)


def prepare(F, grid: KineticGrid, mode: str = "positive"):
    H = _to_halves(F, grid.half)
    D = hermite_slopes(H, grid.dy, mode)
    return H.reshape(-1), D.reshape(-1)


# -- characteristics ------------------------------------------------------------

def _crossing_time(y, v):
    """Backward time to reach y = 0 (inf if the backward ray moves away)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where((y * v > 0), y / v, np.inf)
    return u


class _Characteristics:
    """Grid points flattened with their velocities, loss rates and crossing times."""

    def __init__(self, params: KineticParams):
        g = params.grid
        Y, K = np.meshgrid(g.y, np.arange(g.n_k), indexing="ij")
        self.y = Y.ravel()
        self.j = K.ravel()
        self.v = params.v[self.j]
        self.mu = params.mu[self.j]
        self.uc = _crossing_time(self.y, self.v)
        self.P = self.y.size
        self.pp = params.rule.p_plus[self.j]
        self.pm = params.rule.p_minus[self.j]
        self.g = params.rule.g[self.j]
        self.jm = g.mirror[self.j]


def _lookup_plan(params, ch, pts, u, weight, target):
    """Plan for sum over lookups of e^{-mu u} [W(foot) or p+ W(foot) + p- W(-foot, -k)].

    ``pts`` are indices of grid points, ``u`` backward times (same length),
    ``weight`` extra multipliers and ``target`` the output slot per lookup.
    """
    y, v, j = ch.y[pts], ch.v[pts], ch.j[pts]
    foot = y - v * u
    dec = np.exp(-ch.mu[pts] * u) * weight
    crossed = u > ch.uc[pts]
    fac = np.where(crossed, dec * ch.pp[pts], dec)
    Y = [foot]
    J = [j]
    F = [fac]
    T = [target]
    c = np.nonzero(crossed)[0]
    if c.size:
        Y.append(-foot[c])
        J.append(ch.jm[pts][c])
        F.append(dec[c] * ch.pm[pts][c])
        T.append(target[c])
    return (np.concatenate(Y), np.concatenate(J), np.concatenate(F), np.concatenate(T))


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _cgl(m, h):
    return h * 0.5 * (1 - np.cos(np.pi * np.arange(m + 1) / m))


def _lagrange_weights(nodes, r):
    """Matrix L[i, b] = l_b(r_i) for the interpolating polynomial through nodes."""
    r = np.atleast_1d(r)
    L = np.ones((r.size, nodes.size))
    for b in range(nodes.size):
        for c in range(nodes.size):
            if c != b:
                L[:, b] *= (r - nodes[c]) / (nodes[b] - nodes[c])
    return L


class FreeFlow:
    """Exact free flow with interface, U_T(t)."""

    def __init__(self, params: KineticParams, t: float, creation: bool = True):
        self.params = params
        ch = _Characteristics(params)
        pts = np.arange(ch.P)
        u = np.full(ch.P, float(t))
        Y, J, F, T = _lookup_plan(params, ch, pts, u, np.ones(ch.P), pts)
        self.plan = EvalPlan(params.grid, Y, J, F, T, ch.P)
        self.create = np.zeros(ch.P)
        if creation and params.T != 0:
            crossed = t > ch.uc
            self.create[crossed] = np.exp(-ch.mu[crossed] * ch.uc[crossed]) * ch.g[crossed] * params.T

    def __call__(self, W, prepared=None):
        g = self.params.grid
        prepared = prepared or prepare(W, g, self.params.interp)
        return (self.plan.apply(prepared) + self.create).reshape(g.n_y, g.n_k)


class SlabMap:
    """One time slab of length h: W(tau_a) at Chebyshev-Lobatto nodes tau_a.

    W(tau_a) = U_T(tau_a) W_0 + int_0^{tau_a} U_0(tau_a - r) G(r) dr,
    G = 2 gamma0 R W + F, with R W interpolated in time through the nodes.
    A static source F(Y, j) is integrated exactly along the characteristics.
    """

    def __init__(self, params: KineticParams, h: float, creation: bool = True):
        self.params = params
        self.h = h
        g = params.grid
        self.tau = _cgl(params.n_time, h)
        ch = _Characteristics(params)
        self.ch = ch
        self.free = [FreeFlow(params, ta, creation) for ta in self.tau[1:]]
        xg, wg = _gauss(params.n_gauss)
        self.bulk = []   # per target: list of (lagrange row, plan) over non-crossing points
        self.cross = []  # per target: (plan, lagrange matrix per lookup)
        for ta in self.tau[1:]:
            nc = np.nonzero(~(ch.uc < ta))[0]
            plans = []
            for xq, wq in zip(xg, wg):
                u = ta * xq
                Y, J, F, T = _lookup_plan(params, ch, nc, np.full(nc.size, u), np.full(nc.size, ta * wq), nc)
                plans.append((_lagrange_weights(self.tau, ta - u)[0], EvalPlan(g, Y, J, F, T, ch.P)))
            self.bulk.append(plans)
            cr = np.nonzero(ch.uc < ta)[0]
            if cr.size:
                uc = ch.uc[cr]
                us, ws, pts = [], [], []
                for a0, a1 in ((np.zeros(cr.size), uc), (uc, np.full(cr.size, ta))):
                    for xq, wq in zip(xg, wg):
                        us.append(a0 + (a1 - a0) * xq)
                        ws.append((a1 - a0) * wq)
                        pts.append(cr)
                u = np.concatenate(us)
                w = np.concatenate(ws)
                p = np.concatenate(pts)
                Y, J, F, T = _lookup_plan(params, ch, p, u, w, p)
                # each lookup carries its own time r = ta - u
                ulook = self._lookup_times(params, ch, p, u)
                Lm = _lagrange_weights(self.tau, ta - ulook)
                self.cross.append((EvalPlan(g, Y, J, F, T, ch.P), Lm))
            else:
                self.cross.append(None)

    @staticmethod
    def _lookup_times(params, ch, p, u):
        crossed = u > ch.uc[p]
        return np.concatenate([u, u[crossed]])

    def duhamel(self, a, Gs, preps):
        """Collision/source integral for target a (1-based) from node fields Gs."""
        P = self.ch.P
        out = np.zeros(P)
        # time interpolation is clipped to the node range so that G >= 0 stays >= 0
        lo, hi = Gs.min(axis=0), Gs.max(axis=0)
        for lrow, plan in self.bulk[a - 1]:
            comb = np.clip(np.tensordot(lrow, Gs, axes=1), lo, hi)
            out += plan.apply(prepare(comb, self.params.grid, self.params.interp))
        cr = self.cross[a - 1]
        if cr is not None:
            plan, Lm = cr
            node_vals = np.stack([plan.values(pb) for pb in preps], axis=1)
            vals = np.clip(np.sum(Lm * node_vals, axis=1), node_vals.min(axis=1), node_vals.max(axis=1))
            out += np.bincount(plan.target, weights=plan.factor * vals, minlength=P)
        return out

    def source_terms(self, fn, n_sub: int = 8, n_gauss: int = 8):
        """int_0^{tau_a} U_0(tau_a - r) F dr for a static analytic source, per target.

        Composite Gauss rule on each side of the crossing time; the source is
        evaluated exactly, so only quadrature error remains.
        """
        g = self.params.grid
        ch = self.ch
        xg, wg = _gauss(n_gauss)
        xs = ((np.arange(n_sub)[:, None] + xg[None, :]) / n_sub).ravel()
        ws = np.tile(wg, n_sub) / n_sub
        out = []
        pts = np.arange(ch.P)
        for ta in self.tau[1:]:
            cut = np.minimum(ch.uc, ta)
            acc = np.zeros(ch.P)
            for a0, a1 in ((np.zeros(ch.P), cut), (cut, np.full(ch.P, ta))):
                span = a1 - a0
                live = pts[span > 0]
                for x, w in zip(xs, ws):
                    u = a0[live] + span[live] * x
                    Y, J, F, T = _lookup_plan(self.params, ch, live, u, span[live] * w, live)
                    acc += np.bincount(T, weights=F * fn(Y, J), minlength=ch.P)
            out.append(acc.reshape(g.n_y, g.n_k))
        return out

    def run(self, W0, source=None, tol=None, max_iter=None):
        """Picard iteration on the slab; ``source`` is an optional fn(Y, j)."""
        pr = self.params
        g = pr.grid
        tol = pr.tol if tol is None else tol
        max_iter = pr.max_iter if max_iter is None else max_iter
        p0 = prepare(W0, g, pr.interp)
        base = [f(W0, p0) for f in self.free]
        if source is not None:
            if getattr(self, "_src_fn", None) is not source:
                self._src_fn, self._src = source, self.source_terms(source)
            base = [b + s for b, s in zip(base, self._src)]
        Ws = [W0] + base
        if pr.gamma0 == 0:
            return Ws, 0
        norm = math.sqrt(g.dy * g.dk)
        prev = diff = float("nan")
        for it in range(1, max_iter + 1):
            Gs = np.stack([2 * pr.gamma0 * pr.kernel.apply_Rcal(W) for W in Ws])
            preps = [prepare(G, g, pr.interp) for G in Gs]
            new = [W0] + [base[a - 1] + self.duhamel(a, Gs, preps).reshape(g.n_y, g.n_k) for a in range(1, len(Ws))]
            prev, diff = diff, max(np.sqrt(np.sum((n - o) ** 2)) * norm for n, o in zip(new[1:], Ws[1:]))
            Ws = new
            if diff < tol:
                return Ws, it
        raise PicardError(f"Picard iteration did not converge in {max_iter} iterations "
                          f"(last change {diff:.2e}, contraction estimate {diff / prev:.3g})")


# -- public API -----------------------------------------------------------------

def free_flow_interface(W0, t: float, params: KineticParams) -> KineticField:
    """U_T(t) W0: exact transport, interface rule, collision loss without gain."""
    W0 = np.asarray(W0, float)
    return KineticField(FreeFlow(params, t)(W0), t, params.grid)


def _slabs(t, h):
    n = max(1, int(math.ceil(t / h - 1e-9)))
    return n, t / n


def _evolve(W0, t, params, creation, source, record):
    W = np.asarray(W0, float).copy()
    hist = [(0.0, l2_norm(W, params.grid))] if record else []
    if t == 0:
        return W, hist
    # without the collision gain a single exact step suffices
    n, h = (1, t) if params.gamma0 == 0 else _slabs(t, params.h)
    slab = SlabMap(params, h, creation)
    for s in range(n):
        Ws, _ = slab.run(W, source)
        W = Ws[-1]
        if record:
            hist.append(((s + 1) * h, l2_norm(W, params.grid)))
    return W, hist


def cutoff(y, inner: float = 0.5, outer: float = 1.0):
    """Smooth even cutoff: 1 on |y| <= inner, 0 on |y| >= outer."""
    x = (outer - np.abs(np.asarray(y, float))) / (outer - inner)
    x = np.clip(x, 0, 1)

    def f(s):
        return np.where(s > 0, np.exp(-1 / np.where(s > 0, s, 1)), 0.0)
    return f(x) / (f(x) + f(1 - x))


def cutoff_prime(y, inner: float = 0.5, outer: float = 1.0):
    y = np.asarray(y, float)
    x = np.clip((outer - np.abs(y)) / (outer - inner), 0, 1)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    f0, f1 = np.exp(-1 / xs), np.exp(-1 / (1 - xs))
    ds = (f0 / xs**2 * f1 + f0 * f1 / (1 - xs) ** 2) / (f0 + f1) ** 2
    return np.where(inside, -np.sign(y) * ds / (outer - inner), 0.0)


@dataclass
class SourceField:
    """Source F = -T v(k) chi'(y) as a function of (y, mode index) and chi on the grid."""

    T: float
    v: np.ndarray
    chi: np.ndarray

    @classmethod
    def build(cls, params: KineticParams):
        g = params.grid
        return cls(params.T, params.v, np.repeat(cutoff(g.y)[:, None], g.n_k, axis=1))

    def __call__(self, y, j):
        return -self.T * self.v[j] * cutoff_prime(y)

    def on_grid(self, grid: KineticGrid):
        return -self.T * self.v[None, :] * cutoff_prime(grid.y)[:, None]


def solve_kinetic(W0, t: float, params: KineticParams, method: str = "decomposition", record: bool = False) -> KineticField:
    """Solve the kinetic interface problem up to time t.

    For T = 0 this is slab Picard iteration of the Duhamel formula. For
    T > 0, ``method="decomposition"`` evolves W0 - T chi with the T = 0
    semigroup plus the source F = -T v chi' and adds T chi back;
    ``method="direct"`` puts the creation term g T into the free flow.
    """
    W0 = np.asarray(W0, float)
    if params.T == 0 or method == "direct":
        W, hist = _evolve(W0, t, params, True, None, record)
        return KineticField(W, t, params.grid, hist)
    if method != "decomposition":
        raise ValueError(f"unknown method {method!r}")
    src = SourceField.build(params)
    p0 = params.with_T(0.0)
    Wt, hist = _evolve(W0 - params.T * src.chi, t, p0, False, src, record)
    return KineticField(Wt + params.T * src.chi, t, params.grid, hist)


def l2_norm(W, grid: KineticGrid) -> float:
    return float(np.sqrt(np.sum(np.asarray(W) ** 2) * grid.dy * grid.dk))


def traces(W, grid: KineticGrid):
    """One-sided cubic extrapolations W(0-, k), W(0+, k) from the four nearest cells."""
    n = grid.half
    # nodes at distances 0.5, 1.5, 2.5, 3.5 cells -> value at 0
    w = np.array([35, -35, 21, -5]) / 16.0
    left = w @ W[n - 1:n - 5:-1]
    right = w @ W[n:n + 4]
    return left, right


def dissipation_rate(W, params: KineticParams) -> float:
    """-gamma0 sum R(k,k')(W(k)-W(k'))^2 - 1/2 sum v (W(0-)^2 - W(0+)^2)."""
    g = params.grid
    W = np.asarray(W, float)
    S = params.kernel
    # sum_{k,k'} R (W - W')^2 = 2 sum W^2 rowsum - 2 sum W (R W)
    quad_form = 2 * np.sum(W**2 * S.row_sum) * g.dk - 2 * np.sum(W * S.apply_Rcal(W)) * g.dk
    bulk = -params.gamma0 * quad_form * g.dy
    lm, lp = traces(W, g)
    flux = -0.5 * np.sum(params.v * (lm**2 - lp**2)) * g.dk
    return float(bulk + flux)


def interface_residual(W, params: KineticParams):
    """Residual of the interface relations using one-sided traces (per mode)."""
    g = params.grid
    lm, lp = traces(W, g)
    rule = params.rule
    m = g.mirror
    pos = params.v > 0
    res = np.empty(g.n_k)
    # incoming at 0+ for v > 0: transmitted from 0-, reflected from 0+ at -k
    res[pos] = lp[pos] - rule.apply(lm, lp[m])[pos]
    res[~pos] = lm[~pos] - rule.apply(lp, lm[m])[~pos]
    return res
