"""Momentum-exchange scattering kernels and the collision operator."""
from __future__ import annotations

import numpy as np

from .dispersion import midpoint_grid


def _s(k):
    return np.sin(np.pi * np.asarray(k, dtype=float))


def _c(k):
    return np.cos(np.pi * np.asarray(k, dtype=float))


def r_kernel(k, kp):
    return 4 * _s(k) * _s(np.subtract(k, kp)) * _s(2 * np.asarray(k) - kp)


def R_pair(k, kp):
    """Pair kernel 1/2 [r^2(k, k-k') + r^2(k, k+k')]."""
    k = np.asarray(k, dtype=float)
    kp = np.asarray(kp, dtype=float)
    return 0.5 * (r_kernel(k, k - kp) ** 2 + r_kernel(k, k + kp) ** 2)


def R_pair_expanded(k, kp):
    # 16 s^2(k) s^2(k') [s^2(k) c^2(k') + s^2(k') c^2(k)]
    sk, sp, ck, cp = _s(k) ** 2, _s(kp) ** 2, _c(k) ** 2, _c(kp) ** 2
    return 16 * sk * sp * (sk * cp + sp * ck)


def R_total(k):
    return _s(2 * np.asarray(k, dtype=float)) ** 2 + 2 * _s(k) ** 2


def theta_hat(k):
    return 8 * _s(k) ** 2 * (1 + 2 * _c(k) ** 2)


# component CDFs of the outgoing density on [-1/2, 1/2]
def _cdf_a(x):
    # density 2 sin^2(2 pi x) = 8 s^2 c^2
    return x + 0.5 - np.sin(4 * np.pi * x) / (4 * np.pi)


def _cdf_b(x):
    # density (8/3) sin^4(pi x)
    return x + 0.5 - 2 * np.sin(2 * np.pi * x) / (3 * np.pi) + np.sin(4 * np.pi * x) / (12 * np.pi)


def _pdf_a(x):
    return 2 * np.sin(2 * np.pi * x) ** 2


def _pdf_b(x):
    return (8.0 / 3.0) * np.sin(np.pi * x) ** 4


class ScatteringKernel:
    """Collision operator L and gain operator on a midpoint k-grid.

    Parameters
    ----------
    gamma0 : float
        Bulk noise strength.
    n_k : int
        Number of midpoint cells on the torus (even).
    """

    def __init__(self, gamma0: float = 1.0, n_k: int = 256):
        self.gamma0 = float(gamma0)
        self.n_k = int(n_k)
        self.k = midpoint_grid(self.n_k)
        self.dk = 1.0 / self.n_k
        self.pair = R_pair(self.k[:, None], self.k[None, :])
        self.total = R_total(self.k)
        # discrete row sums; agree with total to roundoff for n_k >= 8
        self.row_sum = self.pair.sum(axis=1) * self.dk
        self._row_cdf = None
        self._tables = None

    def apply_Rcal(self, F):
        """Gain operator int R(k,k') F(k') dk' along the last axis."""
        return np.asarray(F) @ self.pair.T * self.dk

    def apply_L(self, F):
        F = np.asarray(F, dtype=float)
        return 2 * (self.apply_Rcal(F) - self.row_sum * F)

    def gain_at(self, F, k):
        """Evaluate int R(k,k') F(k') dk' at arbitrary k by midpoint quadrature."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return R_pair(k[:, None], self.k[None, :]) @ np.asarray(F) * self.dk

    # -- sampling ---------------------------------------------------------
    def _inverse_tables(self):
        if self._tables is None:
            x = np.linspace(-0.5, 0.5, 20001)
            self._tables = (x, _cdf_a(x), _cdf_b(x))
        return self._tables

    @staticmethod
    def _invert(u, x, table, cdf, pdf):
        k = np.interp(u, table, x)
        for _ in range(3):
            p = pdf(k)
            step = np.where(p > 1e-12, (cdf(k) - u) / np.where(p > 1e-12, p, 1.0), 0.0)
            k = np.clip(k - step, -0.5, 0.5)
        return k

    def sample_outgoing(self, k, rng):
        """Draw k' with density R(k,k')/R(k) for arbitrary (continuous) k."""
        k = np.asarray(k, dtype=float)
        if np.any(R_total(k) < 1e-12):
            raise ValueError("sample_outgoing needs R_total(k) > 0 (k = 0 has no scattering)")
        shape = k.shape
        k = k.ravel()
        s2, c2 = _s(k) ** 2, _c(k) ** 2
        wa = s2 / (s2 + 3 * c2)
        pick_a = rng.random(k.size) < wa
        u = rng.random(k.size)
        x, ta, tb = self._inverse_tables()
        out = np.where(
            pick_a,
            self._invert(u, x, ta, _cdf_a, _pdf_a),
            self._invert(u, x, tb, _cdf_b, _pdf_b),
        )
        return out.reshape(shape)

    def row_cdf(self):
        """Cumulative row tables of R(k_i, k_j) / sum_j R(k_i, k_j) on the grid."""
        if self._row_cdf is None:
            c = np.cumsum(self.pair, axis=1)
            c /= c[:, -1:]
            c[:, -1] = 1.0
            self._row_cdf = c
        return self._row_cdf

    def sample_outgoing_index(self, j, rng):
        """Grid version: draw outgoing cell indices for incoming cell indices j."""
        j = np.asarray(j)
        cdf = self.row_cdf()[j]
        u = rng.random(j.shape)
        return np.minimum((cdf < u[..., None]).sum(axis=-1), self.n_k - 1)
