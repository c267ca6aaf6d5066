"""Fourier-Wigner estimates from ensembles of chain wave fields.

For a field psi_hat on the mode grid k_j = j/N and scale eps (window
L = eps N), the estimator on eta_m = 2m/L pairs modes j - m and j + m:

    W(eta_m, k_j) = (eps/2) E[conj(psi(k_j - m/N)) psi(k_j + m/N)]
    Y(eta_m, k_j) = (eps/2) E[psi(-k_j + m/N) psi(k_j + m/N)]

Binary layout written by :meth:`WignerEstimate.save` (little endian)::

    magic   8 bytes  b"TCWIG001"
    N       int64
    eps     float64
    eta_max float64
    M       int64
    n_eta   int64
    W, Y          complex128[n_eta, N]
    W_err, Y_err  float64[n_eta, N]
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

MAGIC = b"TCWIG001"


@dataclass
class WignerEstimate:
    eta: np.ndarray
    k: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    W_err: np.ndarray
    Y_err: np.ndarray
    M: int
    eps: float
    eta_max: float
    fields: np.ndarray | None = None

    @property
    def N(self):
        return self.k.size

    @property
    def L(self):
        return self.eps * self.N

    @property
    def d_eta(self):
        return 2.0 / self.L

    def save(self, path):
        with open(path, "wb") as f:
            f.write(MAGIC)
            np.array([self.N], "<i8").tofile(f)
            np.array([self.eps, self.eta_max], "<f8").tofile(f)
            np.array([self.M, self.eta.size], "<i8").tofile(f)
            for a in (self.W, self.Y):
                a.astype("<c16").tofile(f)
            for a in (self.W_err, self.Y_err):
                a.astype("<f8").tofile(f)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            if f.read(8) != MAGIC:
                raise ValueError("not a Wigner estimate file")
            N = int(np.fromfile(f, "<i8", 1)[0])
            eps, eta_max = np.fromfile(f, "<f8", 2)
            M, n_eta = (int(v) for v in np.fromfile(f, "<i8", 2))
            W = np.fromfile(f, "<c16", n_eta * N).reshape(n_eta, N)
            Y = np.fromfile(f, "<c16", n_eta * N).reshape(n_eta, N)
            We = np.fromfile(f, "<f8", n_eta * N).reshape(n_eta, N)
            Ye = np.fromfile(f, "<f8", n_eta * N).reshape(n_eta, N)
        m = (n_eta - 1) // 2
        L = eps * N
        eta = 2.0 * np.arange(-m, m + 1) / L
        return cls(eta, np.arange(N) / N, W, Y, We, Ye, M, float(eps), float(eta_max))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["eta", "k", "W_re", "W_im", "W_err", "Y_re", "Y_im", "Y_err"])
            for i, e in enumerate(self.eta):
                for j, kk in enumerate(self.k):
                    w.writerow([f"{e:.10g}", f"{kk:.10g}", f"{self.W[i, j].real:.10g}", f"{self.W[i, j].imag:.10g}",
                                f"{self.W_err[i, j]:.6g}", f"{self.Y[i, j].real:.10g}", f"{self.Y[i, j].imag:.10g}",
                                f"{self.Y_err[i, j]:.6g}"])


def _eta_index(eps, N, eta_max):
    L = eps * N
    m_max = int(np.floor(eta_max * L / 2 + 1e-9))
    m_max = min(m_max, N // 2 - 1)
    return np.arange(-m_max, m_max + 1), L


def _mean_se(x):
    M = x.shape[0]
    mean = x.mean(axis=0)
    if M < 2:
        return mean, np.zeros(mean.shape)
    var = (np.abs(x - mean) ** 2).sum(axis=0) / (M - 1)
    return mean, np.sqrt(var / M)


def estimate_wigner(fields, eps: float, eta_max: float = 16.0, keep_fields: bool = True) -> WignerEstimate:
    """Ensemble estimate of (W, Y) on eta = 2m/L, |eta| <= eta_max.

    ``fields`` is an (M, N) array of psi_hat (or a sequence of WaveField).
    """
    if not isinstance(fields, np.ndarray):
        fl = list(fields)
        Ns = {f.N for f in fl}
        es = {f.eps for f in fl}
        if len(Ns) != 1 or len(es) != 1 or not np.isclose(es.pop(), eps):
            raise ValueError("grid mismatch: fields must share N and eps")
        fields = np.stack([f.psi_hat for f in fl])
    fields = np.atleast_2d(np.asarray(fields, dtype=complex))
    M, N = fields.shape
    ms, L = _eta_index(eps, N, eta_max)
    W = np.empty((ms.size, N), complex)
    Y = np.empty((ms.size, N), complex)
    We = np.empty((ms.size, N))
    Ye = np.empty((ms.size, N))
    j = np.arange(N)
    for i, m in enumerate(ms):
        plus = fields[:, (j + m) % N]
        w = 0.5 * eps * np.conj(fields[:, (j - m) % N]) * plus
        y = 0.5 * eps * fields[:, (-j + m) % N] * plus
        W[i], We[i] = _mean_se(w)
        Y[i], Ye[i] = _mean_se(y)
    return WignerEstimate(2.0 * ms / L, j / N, W, Y, We, Ye, M, float(eps), float(eta_max),
                          fields if keep_fields else None)


class TestFunction:
    """G(y, k) = exp(-(y - c)^2 / (2 s^2)) h(k) with closed-form transform in y.

    G_hat(eta, k) = s sqrt(2 pi) exp(-2 pi^2 s^2 eta^2 - 2 pi i eta c) h(k).
    """

    __test__ = False  # not a pytest class

    def __init__(self, center: float, width: float, k_profile=None, name: str = ""):
        self.center = float(center)
        self.width = float(width)
        self.h = k_profile if k_profile is not None else (lambda k: np.ones_like(np.asarray(k, dtype=float)))
        self.name = name

    def __call__(self, y, k):
        y = np.asarray(y, dtype=float)
        return np.exp(-0.5 * ((y - self.center) / self.width) ** 2) * self.h(k)

    def hat(self, eta, k):
        eta = np.asarray(eta, dtype=float)
        s = self.width
        g = s * np.sqrt(2 * np.pi) * np.exp(-2 * np.pi**2 * s**2 * eta**2 - 2j * np.pi * eta * self.center)
        return g * self.h(k)

    def eta_cutoff(self, tol: float = 1e-14):
        """|eta| beyond which |G_hat| < tol * max|G_hat|."""
        return np.sqrt(np.log(1 / tol) / (2 * np.pi**2 * self.width**2))

    def norm_A(self, n_k: int = 1024):
        """int sup_k |G_hat(eta, k)| d eta (closed form for the Gaussian factor)."""
        k = (np.arange(n_k) + 0.5) / n_k - 0.5
        return float(np.max(np.abs(self.h(k))))

    def sup(self, n_k: int = 1024):
        return self.norm_A(n_k)


def bump(center: float, width: float):
    """Smooth periodic bump in k: exp((cos(2 pi (k - c)) - 1) / (2 pi w)^2)."""
    a = 1.0 / (2 * np.pi * width) ** 2

    def h(k):
        return np.exp(a * (np.cos(2 * np.pi * (np.asarray(k, dtype=float) - center)) - 1))
    return h


def pair(est: WignerEstimate, G: TestFunction):
    """<W, G> = sum conj(W_hat) G_hat d_eta d_k with its standard error.

    The error is propagated per realization when fields are available,
    otherwise from the cellwise errors assuming independence.
    """
    cut = G.eta_cutoff()
    if cut > est.eta.max() + est.d_eta and G.eta_cutoff(1e-8) > est.eta.max():
        raise ValueError("test function not resolved within eta_max of the estimate")
    Gh = G.hat(est.eta[:, None], est.k[None, :])
    w = est.d_eta / est.N
    val = np.sum(np.conj(est.W) * Gh) * w
    if est.fields is None:
        se = np.sqrt(np.sum((est.W_err * np.abs(Gh)) ** 2)) * w
        return val, se
    per = pair_members(est.fields, est.eps, G, est.eta_max)
    mean, se = _mean_se(per)
    return mean, se


def pair_members(fields, eps: float, G: TestFunction, eta_max: float = 16.0):
    """Per-realization pairing values (length M)."""
    fields = np.atleast_2d(fields)
    M, N = fields.shape
    ms, L = _eta_index(eps, N, eta_max)
    j = np.arange(N)
    k = j / N
    out = np.zeros(M, complex)
    for m in ms:
        gh = G.hat(2.0 * m / L, k)
        if np.max(np.abs(gh)) < 1e-300:
            continue
        w = 0.5 * eps * np.conj(fields[:, (j - m) % N]) * fields[:, (j + m) % N]
        out += np.conj(w) @ gh
    return out * (2.0 / L) / N


@dataclass
class BoundReport:
    passed: bool
    max_ratio: float

    def __str__(self):
        return f"initial bound: {'pass' if self.passed else 'fail'} (max ratio {self.max_ratio:.3g})"


def check_initial_bound(est: WignerEstimate, C: float, kappa: float) -> BoundReport:
    """Check |W| + |Y| <= C (1 + eta^2)^(-3/2 - kappa) on the grid."""
    env = C * (1 + est.eta[:, None] ** 2) ** (-1.5 - kappa)
    ratio = float(np.max((np.abs(est.W) + np.abs(est.Y)) / env))
    return BoundReport(ratio <= 1.0, ratio)
