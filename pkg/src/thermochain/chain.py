"""Microscopic periodic harmonic chain with momentum-exchange noise and a Langevin site.

Arrays are stored in FFT order: index i is the site x = i for i < N/2 and
x = i - N for i >= N/2, so the thermostat (x = 0) sits at index 0. The
leading axis (if any) is the ensemble.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dispersion import DispersionRelation


@dataclass
class ChainParams:
    disp: DispersionRelation
    eps: float
    gamma0: float = 0.0
    gamma1: float = 0.0
    T: float = 0.0

    def default_dt(self):
        dt = 0.1 / self.disp.omega_max
        if self.gamma1 > 0:
            dt = min(dt, 0.1 / self.gamma1)
        return dt


@dataclass
class ChainState:
    q: np.ndarray
    p: np.ndarray
    params: ChainParams
    t: float = 0.0
    steps: int = 0

    @property
    def N(self):
        return self.q.shape[-1]

    def positions(self):
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(int)

    def copy(self):
        return replace(self, q=self.q.copy(), p=self.p.copy())


@dataclass
class WaveField:
    psi_hat: np.ndarray
    eps: float

    @property
    def N(self):
        return self.psi_hat.shape[-1]

    @property
    def k(self):
        return np.arange(self.N) / self.N


def omega_modes(disp, N):
    return disp.omega(np.arange(N) / N)


def wave_function(state: ChainState) -> WaveField:
    w = omega_modes(state.params.disp, state.N)
    return WaveField(w * np.fft.fft(state.q, axis=-1) + 1j * np.fft.fft(state.p, axis=-1), state.params.eps)


def state_from_wave(psi_hat, params: ChainParams) -> ChainState:
    """Invert psi = omega q + i p mode by mode; the zero mode of an acoustic chain gets q = 0."""
    psi_hat = np.asarray(psi_hat, dtype=complex)
    N = psi_hat.shape[-1]
    w = omega_modes(params.disp, N)
    neg = (-np.arange(N)) % N
    conj_neg = np.conj(psi_hat[..., neg])
    with np.errstate(divide="ignore", invalid="ignore"):
        qh = np.where(w > 0, (psi_hat + conj_neg) / (2 * np.where(w > 0, w, 1.0)), 0.0)
    ph = (psi_hat - conj_neg) / 2j
    return ChainState(np.fft.ifft(qh, axis=-1).real, np.fft.ifft(ph, axis=-1).real, params)


def energy(state: ChainState):
    """Total energy and per-site density 1/2 (p_x^2 + q_x (alpha*q)_x)."""
    q, p = state.q, state.p
    aq = np.zeros_like(q)
    for x, a in state.params.disp.coupling.coefficients.items():
        aq += a * np.roll(q, x, axis=-1)
    e = 0.5 * (p * p + q * aq)
    return e.sum(axis=-1), e


def energy_parseval(state: ChainState):
    """1/2 ||psi||^2 via Parseval on the mode grid."""
    psi = wave_function(state).psi_hat
    return 0.5 * np.mean(np.abs(psi) ** 2, axis=-1)


# -- exact sub-flows --------------------------------------------------------

def harmonic_flow(q, p, disp, t):
    N = q.shape[-1]
    w = disp.omega(np.arange(N // 2 + 1) / N)
    qh = np.fft.rfft(q, axis=-1)
    ph = np.fft.rfft(p, axis=-1)
    c = np.cos(w * t)
    s_over_w = t * np.sinc(w * t / np.pi)
    ws = w * np.sin(w * t)
    qn = c * qh + s_over_w * ph
    pn = -ws * qh + c * ph
    return np.fft.irfft(qn, n=N, axis=-1), np.fft.irfft(pn, n=N, axis=-1)


def rotate_triples(a, b, c, angle):
    """Rotate (a, b, c) about (1,1,1) by ``angle`` (vectorized)."""
    m = (a + b + c) / 3.0
    da, db, dc = a - m, b - m, c - m
    cs = np.cos(angle)
    sn = np.sin(angle) / np.sqrt(3.0)
    # A d = (db - dc, dc - da, da - db)
    return (m + cs * da + sn * (db - dc),
            m + cs * db + sn * (dc - da),
            m + cs * dc + sn * (da - db))


def _passes(N):
    """Center sets with pairwise disjoint triples; together they cover every site once."""
    q3 = (N // 3) * 3
    out = [np.arange(r, q3, 3) for r in range(3)]
    out += [np.array([x]) for x in range(q3, N)]
    return out


def noise_flow(p, eps_gamma0, dt, rng, passes=None):
    """Exact rotation of each momentum triple by sqrt(3 eps gamma0) dW."""
    N = p.shape[-1]
    if passes is None:
        passes = _passes(N)
    dW = rng.standard_normal(p.shape) * np.sqrt(dt)
    angle_all = np.sqrt(3.0 * eps_gamma0) * dW
    for ctr in passes:
        lft, rgt = (ctr - 1) % N, (ctr + 1) % N
        a, b, c = rotate_triples(p[..., lft], p[..., ctr], p[..., rgt], angle_all[..., ctr])
        p[..., lft], p[..., ctr], p[..., rgt] = a, b, c
    return p


def ou_flow(p, gamma1, T, dt, rng):
    z = rng.standard_normal(p.shape[:-1])
    decay = np.exp(-gamma1 * dt)
    p[..., 0] = p[..., 0] * decay + np.sqrt(T * (1 - decay**2)) * z
    return p


@dataclass
class Streams:
    bond: np.random.Generator
    thermostat: np.random.Generator

    @classmethod
    def from_seed(cls, seed, block: int = 0):
        ss = np.random.SeedSequence([int(seed), int(block)])
        a, b = ss.spawn(2)
        return cls(np.random.default_rng(a), np.random.default_rng(b))


def step(state: ChainState, dt: float, streams: Streams, check: bool = True) -> ChainState:
    """One Strang step H(dt/2) N(dt) OU(dt) H(dt/2), applied in place."""
    pr = state.params
    q, p = harmonic_flow(state.q, state.p, pr.disp, dt / 2)
    if pr.gamma0 > 0:
        noise_flow(p, pr.eps * pr.gamma0, dt, streams.bond)
    if pr.gamma1 > 0:
        ou_flow(p, pr.gamma1, pr.T, dt, streams.thermostat)
    q, p = harmonic_flow(q, p, pr.disp, dt / 2)
    state.q, state.p = q, p
    state.t += dt
    state.steps += 1
    if check and not (np.isfinite(p).all() and np.isfinite(q).all()):
        raise FloatingPointError(f"non-finite state at step {state.steps}")
    return state


def evolve(state: ChainState, t_micro: float, streams: Streams, dt: float | None = None,
           n_out: int = 0, observer=None) -> ChainState:
    """Advance by t_micro with equal steps no larger than ``dt``.

    Consecutive half harmonic flows are merged into full ones. When
    ``observer`` is given it is called at t=0 and at ``n_out`` equally spaced
    output times.
    """
    pr = state.params
    if dt is None:
        dt = pr.default_dt()
    n = max(1, int(np.ceil(t_micro / dt - 1e-12)))
    h = t_micro / n
    t0 = state.t
    out_steps = {int(round(j * n / n_out)) for j in range(1, n_out + 1)} if n_out else set()
    if observer is not None:
        observer(state)
    q, p = harmonic_flow(state.q, state.p, pr.disp, h / 2)
    for i in range(1, n + 1):
        if pr.gamma0 > 0:
            noise_flow(p, pr.eps * pr.gamma0, h, streams.bond)
        if pr.gamma1 > 0:
            ou_flow(p, pr.gamma1, pr.T, h, streams.thermostat)
        state.steps += 1
        if not np.isfinite(p).all():
            raise FloatingPointError(f"non-finite state at step {state.steps}")
        if i == n or i in out_steps:
            q, p = harmonic_flow(q, p, pr.disp, h / 2)
            state.q, state.p, state.t = q, p, t0 + i * h
            if observer is not None and i in out_steps:
                observer(state)
            if i < n:
                q, p = harmonic_flow(q, p, pr.disp, h / 2)
        else:
            q, p = harmonic_flow(q, p, pr.disp, h)
    return state


# -- initial data -------------------------------------------------------------

@dataclass
class PacketSpec:
    """Random-phase wave packet psi_x = A phi((eps x - y0)/sigma) exp(2 pi i k0 x + iU).

    ``phi`` is the unit Gaussian exp(-z^2/2); k0 is drawn from a Gaussian bump
    of the given center and width restricted to (0, 1/2), or mirrored onto
    both signs when ``symmetric``.
    """

    A: float = 1.0
    sigma: float = 0.5
    y0: float = 0.0
    k_center: float = 0.25
    k_width: float = 0.05
    symmetric: bool = False
    support_sigmas: float = 6.0

    def rho(self, k):
        k = np.asarray(k, dtype=float)
        ak = np.abs(k) if self.symmetric else k
        inside = (ak > 0) & (ak < 0.5)
        z = self._norm()
        out = np.where(inside, np.exp(-0.5 * ((ak - self.k_center) / self.k_width) ** 2), 0.0) / z
        return out / (2.0 if self.symmetric else 1.0)

    def _norm(self):
        from scipy.special import erf
        s = self.k_width * np.sqrt(2)
        return 0.5 * self.k_width * np.sqrt(2 * np.pi) * (erf((0.5 - self.k_center) / s) + erf(self.k_center / s))

    def sample_k0(self, u):
        """Inverse CDF of rho on (0, 1/2) at uniforms u; random sign if symmetric."""
        from scipy.special import erf, erfinv
        s = self.k_width * np.sqrt(2)
        lo, hi = erf(-self.k_center / s), erf((0.5 - self.k_center) / s)
        k = self.k_center + s * erfinv(lo + np.asarray(u) * (hi - lo))
        return np.clip(k, 1e-12, 0.5 - 1e-12)

    def limit(self, y, k):
        """Limiting Wigner function (A^2/2) phi^2((y - y0)/sigma) rho(k)."""
        y = np.asarray(y, dtype=float)
        return 0.5 * self.A**2 * np.exp(-(((y - self.y0) / self.sigma) ** 2)) * self.rho(k)

    def energy_scale(self):
        """Macroscopic energy int W0 = (A^2/2) sigma sqrt(pi)."""
        return 0.5 * self.A**2 * self.sigma * np.sqrt(np.pi)


def init_state(params: ChainParams, N: int, packet: PacketSpec, M: int, rng, stratified: bool = True) -> ChainState:
    """Ensemble of M random-phase packets on an N-site chain (window L = eps N).

    With ``stratified`` the k0 draws are stratified and phases come in
    antithetic pairs; otherwise all draws are i.i.d.
    """
    if N % 2:
        raise ValueError("N must be even")
    L = params.eps * N
    half = packet.support_sigmas * packet.sigma
    if packet.A != 0 and (packet.y0 - half < -L / 2 or packet.y0 + half >= L / 2):
        raise ValueError(f"packet support [{packet.y0 - half:.3g}, {packet.y0 + half:.3g}] wraps the window of length {L:.3g}")
    if stratified:
        # antithetic phase pairs (U, U + pi/2) share k0, so sum e^{2iU} = 0 exactly
        n_pair = (M + 1) // 2
        u = (np.arange(n_pair) + rng.random(n_pair)) / n_pair
        k0 = np.repeat(packet.sample_k0(u), 2)[:M]
        U = np.repeat(rng.random(n_pair) * 2 * np.pi, 2)[:M] + np.tile([0.0, np.pi / 2], n_pair)[:M]
        sgn = np.repeat(np.where(rng.random(n_pair) < 0.5, -1.0, 1.0), 2)[:M]
    else:
        k0 = packet.sample_k0(rng.random(M))
        U = rng.random(M) * 2 * np.pi
        sgn = np.where(rng.random(M) < 0.5, -1.0, 1.0)
    if packet.symmetric:
        k0 = k0 * sgn
    x = np.fft.fftfreq(N, 1.0 / N)
    env = packet.A * np.exp(-0.5 * ((params.eps * x - packet.y0) / packet.sigma) ** 2)
    psi = env[None, :] * np.exp(1j * (2 * np.pi * k0[:, None] * x[None, :] + U[:, None]))
    return state_from_wave(np.fft.fft(psi, axis=-1), params)


# -- second-moment oracles ------------------------------------------------------

def _triple_generator(N, x):
    """Matrix of Y_x acting on momenta: rows/cols (x-1, x, x+1)."""
    A = np.zeros((N, N))
    a, b, c = (x - 1) % N, x % N, (x + 1) % N
    A[a, b], A[a, c] = 1, -1
    A[b, c], A[b, a] = 1, -1
    A[c, a], A[c, b] = 1, -1
    return A


def linear_sde_matrices(params: ChainParams, N: int):
    """Drift F, noise matrices B_x and constant diffusion for z = (q, p).

    The momentum drift contains the Ito term (eps gamma0 / 2) sum_x A_x^2.
    """
    if N > 32:
        raise ValueError("exact covariance limited to N <= 32")
    alpha = np.zeros((N, N))
    for x, a in params.disp.coupling.coefficients.items():
        alpha += a * np.roll(np.eye(N), x, axis=1)
    eg = params.eps * params.gamma0
    Ys = [_triple_generator(N, x) for x in range(N)]
    F = np.zeros((2 * N, 2 * N))
    F[:N, N:] = np.eye(N)
    F[N:, :N] = -alpha
    F[N:, N:] = 0.5 * eg * sum(Y @ Y for Y in Ys)
    F[N, N] -= params.gamma1
    Bs = []
    for Y in Ys:
        B = np.zeros((2 * N, 2 * N))
        B[N:, N:] = np.sqrt(eg) * Y
        Bs.append(B)
    Q = np.zeros((2 * N, 2 * N))
    Q[N, N] = 2 * params.gamma1 * params.T
    return F, Bs, Q


def evolve_covariance_exact(M0, params: ChainParams, t_micro: float, dt: float = 1e-3):
    """RK4 for dM/dt = F M + M F^T + sum B M B^T + Q (second moments of (q, p))."""
    M0 = np.asarray(M0, dtype=float)
    N = M0.shape[0] // 2
    F, Bs, Q = linear_sde_matrices(params, N)
    Bst = np.stack(Bs)
    BstT = Bst.transpose(0, 2, 1).copy()

    def rhs(M):
        return F @ M + M @ F.T + (Bst @ M @ BstT).sum(axis=0) + Q

    n = max(1, int(np.ceil(t_micro / dt - 1e-12)))
    h = t_micro / n
    M = M0.copy()
    for _ in range(n):
        k1 = rhs(M)
        k2 = rhs(M + 0.5 * h * k1)
        k3 = rhs(M + 0.5 * h * k2)
        k4 = rhs(M + h * k3)
        M = M + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return M


def scheme_covariance(M0, params: ChainParams, t_micro: float, dt: float):
    """Exact second moments of the splitting scheme itself (no sampling).

    Each random triple rotation with angle variance v = 3 eps gamma0 dt
    contributes E[R M R^T] with E cos = e^{-v/2}, E cos^2 = (1+e^{-2v})/2,
    E sin^2 = (1-e^{-2v})/2.
    """
    M = np.array(M0, dtype=float)
    N = M.shape[0] // 2
    n = max(1, int(np.ceil(t_micro / dt - 1e-12)))
    h = t_micro / n
    eye = np.eye(2 * N)

    def harmonic(tau):
        cols = []
        for j in range(2 * N):
            q, p = harmonic_flow(eye[j, :N], eye[j, N:], params.disp, tau)
            cols.append(np.concatenate([q, p]))
        return np.array(cols).T

    H = harmonic(h / 2)
    v = 3 * params.eps * params.gamma0 * h
    ec, ec2, es2 = np.exp(-v / 2), (1 + np.exp(-2 * v)) / 2, (1 - np.exp(-2 * v)) / 2
    Pi = np.full((3, 3), 1 / 3)
    Pp = np.eye(3) - Pi
    Ar = np.array([[0, 1, -1], [-1, 0, 1], [1, -1, 0]]) / np.sqrt(3)
    decay = np.exp(-params.gamma1 * h)
    for _ in range(n):
        M = H @ M @ H.T
        if params.gamma0 > 0:
            for ctr in _passes(N):
                for x in ctr:
                    idx = N + np.array([(x - 1) % N, x % N, (x + 1) % N])
                    rest = np.setdiff1d(np.arange(2 * N), idx)
                    # off-diagonal blocks see E[R]; the diagonal block the full second moment
                    ER = Pi + ec * Pp
                    blk = M[np.ix_(idx, idx)]
                    new_blk = Pi @ blk @ Pi + ec * (Pi @ blk @ Pp + Pp @ blk @ Pi) + ec2 * Pp @ blk @ Pp + es2 * Ar @ blk @ Ar.T
                    Mn = M.copy()
                    Mn[np.ix_(idx, rest)] = ER @ M[np.ix_(idx, rest)]
                    Mn[np.ix_(rest, idx)] = M[np.ix_(rest, idx)] @ ER.T
                    Mn[np.ix_(idx, idx)] = new_blk
                    M = Mn
        if params.gamma1 > 0:
            M[N, :] *= decay
            M[:, N] *= decay
            M[N, N] += params.T * (1 - decay**2)
        M = H @ M @ H.T
    return M


def moments_from_states(q, p):
    """Empirical second moments E[z z^T] and their standard errors."""
    z = np.concatenate([q, p], axis=-1)
    prod = z[:, :, None] * z[:, None, :]
    mean = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(z.shape[0])
    return mean, se
