"""Deterministic damped dynamics with a single damped site.

Each mode pair Phi = (phi(k), phi(-k)*) evolves under
Omega(k) = [[-a - i w, a], [a, -a + i w]], a = gamma0 eps R(k),
forced by the momentum p0 at the origin. The momentum solves a Volterra
equation of the second kind whose resolvent kernel is computed here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import J_tilde
from .dispersion import DispersionRelation
from .scattering import R_total


def _sinc_t(w, t):
    """sin(w t)/w, continuous at w=0."""
    return t * np.sinc(w * t / np.pi)


class DampedPropagator:
    """Per-mode damped rotation exp(Omega_eps(k) t) in closed form."""

    def __init__(self, eps: float, gamma0: float, disp: DispersionRelation, k):
        self.eps = float(eps)
        self.gamma0 = float(gamma0)
        self.disp = disp
        self.k = np.asarray(k, dtype=float)
        self.w = disp.omega(self.k)
        self.a = self.gamma0 * self.eps * R_total(self.k)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.beta = np.where(self.w > 0, self.gamma0 * R_total(self.k) / self.w, 0.0)
        eb = self.eps * self.beta
        if np.any(eb >= 1):
            raise ValueError("eps*beta(k) must stay below 1 on the grid")
        self.w_eps = self.w * np.sqrt(1 - eb**2)

    @property
    def eigenvalues(self):
        return -self.a + 1j * self.w_eps, -self.a - 1j * self.w_eps

    def e_Omega(self, t):
        """Entries (e11, e12) with exp(Omega t) = [[e11, e12], [e12, conj(e11)]]."""
        t = np.asarray(t, dtype=float)[..., None] if np.ndim(t) else float(t)
        damp = np.exp(-self.a * t)
        c = np.cos(self.w_eps * t)
        sn = _sinc_t(self.w_eps, t)
        e11 = damp * (c - 1j * self.w * sn)
        e12 = damp * self.a * sn + 0j
        return e11, e12

    def matrix(self, t):
        e11, e12 = self.e_Omega(t)
        m = np.empty(np.shape(e11) + (2, 2), dtype=complex)
        m[..., 0, 0] = e11
        m[..., 0, 1] = e12
        m[..., 1, 0] = e12
        m[..., 1, 1] = np.conj(e11)
        return m

    def omega_matrix(self):
        m = np.empty(self.k.shape + (2, 2), dtype=complex)
        m[..., 0, 0] = -self.a - 1j * self.w
        m[..., 0, 1] = self.a
        m[..., 1, 0] = self.a
        m[..., 1, 1] = -self.a + 1j * self.w
        return m

    def j_eps(self, t):
        """1/2 exp(Omega t) f.f with f = (1, -1)."""
        t = np.asarray(t, dtype=float)[..., None] if np.ndim(t) else float(t)
        return np.exp(-self.a * t) * (np.cos(self.w_eps * t) - self.a * _sinc_t(self.w_eps, t))


def J_eps(t, eps: float, gamma0: float, disp: DispersionRelation, n_k: int = 512):
    """int j_eps(t, k) dk by the periodic midpoint rule (spectral for smooth j)."""
    k = -0.5 + (np.arange(n_k) + 0.5) / n_k
    prop = DampedPropagator(eps, gamma0, disp, k)
    return prop.j_eps(t).mean(axis=-1)


def J_tilde_eps(lam, eps: float, gamma0: float, disp: DispersionRelation):
    """Laplace transform of J_eps: int lam / (lam^2 + 2 a(k) lam + omega^2) dk."""
    if eps == 0 or gamma0 == 0:
        return J_tilde(lam, disp)
    return J_tilde(lam, disp, damping=lambda k: gamma0 * eps * R_total(k))


@dataclass
class VolterraKernel:
    """Resolvent g(ds) = delta(ds) + h(s) ds of p + gamma1 J*p = p^0."""

    dt: float
    t_max: float
    h: np.ndarray
    J: np.ndarray

    @property
    def t(self):
        return np.arange(self.h.size) * self.dt

    def laplace(self, lam):
        """1 + int_0^{t_max} e^{-lam s} h(s) ds, trapezoid with an end correction."""
        f = np.exp(-lam * self.t) * self.h
        integral = self.dt * (f.sum() - 0.5 * (f[0] + f[-1]))
        # Euler-Maclaurin O(dt^2) correction from one-sided end slopes
        d0 = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * self.dt)
        d1 = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * self.dt)
        integral -= self.dt**2 / 12 * (d1 - d0)
        return 1.0 + integral

    def convolve(self, x):
        """(g * x)(t_n) = x_n + int_0^{t_n} h(t_n - s) x(s) ds on the same grid (trapezoid)."""
        x = np.asarray(x)
        n = min(x.shape[0], self.h.size)
        out = np.array(x[:n], dtype=np.result_type(x, float))
        for i in range(1, n):
            w = self.h[i::-1] * self.dt
            acc = w @ x[: i + 1]
            acc = acc - 0.5 * (w[0] * x[0] + w[-1] * x[i])
            out[i] = out[i] + acc
        return out


def solve_volterra(J, gamma1: float, dt: float, t_max: float | None = None) -> VolterraKernel:
    """Trapezoidal scheme for h = -gamma1 J - gamma1 J*h from kernel samples J(n dt).

    ``J`` is an array of samples on n*dt; or a callable of t evaluated on the grid.
    """
    if callable(J):
        n = int(round(t_max / dt)) + 1
        Jv = np.asarray(J(np.arange(n) * dt), dtype=float)
    else:
        Jv = np.asarray(J, dtype=float)
        n = Jv.size
    if gamma1 * dt * np.max(np.abs(Jv)) >= 0.5:
        raise ValueError("step too large: need gamma1*dt*max|J| < 1/2")
    h = np.zeros(n)
    if gamma1 == 0:
        return VolterraKernel(dt, (n - 1) * dt, h, Jv)
    h[0] = -gamma1 * Jv[0]
    denom = 1 + 0.5 * gamma1 * dt * Jv[0]
    for i in range(1, n):
        # trapezoid over [0, t_i]: weights 1/2 at both ends
        acc = dt * (Jv[i:0:-1] @ h[:i]) - 0.5 * dt * Jv[i] * h[0]
        h[i] = (-gamma1 * Jv[i] - gamma1 * acc) / denom
    return VolterraKernel(dt, (n - 1) * dt, h, Jv)


def kernel_for(eps, gamma0, gamma1, disp, dt, t_max, n_k: int = 512):
    """Resolvent kernel built from J_eps sampled on the time grid."""
    n = int(round(t_max / dt)) + 1
    t = np.arange(n) * dt
    Jv = np.concatenate([J_eps(t[i:i + 256], eps, gamma0, disp, n_k) for i in range(0, n, 256)])
    return solve_volterra(Jv, gamma1, dt)


def solve_deterministic(psi_hat, t: float, eps: float, gamma0: float, gamma1: float,
                        disp: DispersionRelation, dt: float = 1e-3):
    """Mild solution on the mode grid k_j = j/N for a noise-free damped chain.

    Returns the wave field phi(t, k_j). The kernel J_eps is built from the
    same N-point mode sum, so the result solves the finite system exactly up
    to the O(dt^2) trapezoid error.
    """
    psi = np.asarray(psi_hat, dtype=complex)
    N = psi.size
    k = np.arange(N) / N
    prop = DampedPropagator(eps, gamma0, disp, k)
    neg = (-np.arange(N)) % N
    P = psi
    M = np.conj(psi[neg])
    if gamma1 == 0:
        e11, e12 = prop.e_Omega(t)
        return e11 * P + e12 * M
    n = int(round(t / dt))
    if not np.isclose(n * dt, t):
        raise ValueError("t must be a multiple of dt")
    ts = np.arange(n + 1) * dt
    e11, e12 = prop.e_Omega(ts)  # (n+1, N)
    # p0^0(s) = 1/(2i) mean_k [(e11 P + e12 M) - (e12 P + conj(e11) M)]
    p00 = ((e11 * P + e12 * M) - (e12 * P + np.conj(e11) * M)).mean(axis=1) / 2j
    Jv = prop.j_eps(ts).mean(axis=1)
    ker = solve_volterra(Jv, gamma1, dt)
    p0 = ker.convolve(p00.real)
    # Duhamel: -i gamma1 int_0^t exp(Omega(t-s)) f p0(s) ds, first component
    w = np.full(n + 1, dt)
    w[0] = w[-1] = dt / 2
    col = (e11 - e12)[::-1]  # exp(Omega(t-s)) f, first row, s ascending
    forced = -1j * gamma1 * (w * p0) @ col
    return e11[-1] * P + e12[-1] * M + forced
