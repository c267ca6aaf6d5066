"""Thermostat transfer functions and interface coefficients.

J(t) = int cos(omega t) dk, its Laplace transform J~(lambda), the resolvent
g~ = (1 + gamma1 J~)^-1, its boundary value nu(k) on the imaginary axis and
the transmission/reflection/absorption probabilities built from nu.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .dispersion import DispersionRelation, midpoint_grid

RICHARDSON_EPS = (1e-2, 1e-3, 1e-4)
NU_TOL = 1e-4


def J_of_t(t, disp: DispersionRelation, tol: float = 1e-12):
    """int_T cos(omega(k) t) dk by adaptive quadrature (scalar or array t)."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for i, tt in enumerate(ts):
        val, _ = quad(lambda k: np.cos(disp.omega(k) * tt), 0.0, 0.5, epsabs=tol / 2, epsrel=1e-13, limit=1000)
        out[i] = 2 * val
    return out.reshape(np.shape(t))[()]


def _resonance(lam, disp):
    """k in (0, 1/2) where omega(k) = Im(-lambda), if inside the band."""
    u = -complex(lam).imag
    u = abs(u)
    if disp.omega_min < u < disp.omega_max:
        return [float(disp.inverse_branch(u, 1))]
    return None


def J_tilde(lam, disp: DispersionRelation, damping=None):
    """Laplace transform int lam / (lam^2 + 2 lam d(k) + omega^2) dk, Re lam > 0.

    ``damping`` is an optional callable d(k) >= 0; ``None`` gives the
    undamped transform of J.
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise ValueError("J_tilde needs Re(lambda) > 0")
    l2 = lam * lam

    if damping is None:
        def f(k):
            return lam / (l2 + disp.omega(k) ** 2)
    else:
        def f(k):
            return lam / (l2 + 2 * lam * damping(k) + disp.omega(k) ** 2)

    pts = _resonance(lam, disp)
    kw = dict(epsabs=1e-14, epsrel=1e-12, limit=4000)
    if pts:
        # break at the resonance and at multiples of its width
        k0 = pts[0]
        width = lam.real / max(abs(float(disp.omega_prime(k0))), 1e-300)
        br = [k0]
        for c in (1.0, 10.0, 100.0, 1000.0):
            br += [k0 - c * width, k0 + c * width]
        kw["points"] = sorted(b for b in br if 0.0 < b < 0.5)
    re, _ = quad(lambda k: f(k).real, 0.0, 0.5, **kw)
    im = 0.0 if lam.imag == 0 else quad(lambda k: f(k).imag, 0.0, 0.5, **kw)[0]
    return 2 * complex(re, im)


def g_tilde(lam, gamma1: float, disp: DispersionRelation, damping=None):
    if gamma1 == 0:
        return 1.0 + 0j
    return 1.0 / (1.0 + gamma1 * J_tilde(lam, disp, damping))


_JT_CACHE: dict = {}


def _disp_key(disp):
    c = disp.coupling
    return (c.name, c.pinning, tuple(sorted(c.coefficients.items())))


def _boundary_Jtilde(k: float, disp, eps: float):
    key = (_disp_key(disp), round(abs(float(k)), 15), eps)
    v = _JT_CACHE.get(key)
    if v is None:
        v = J_tilde(eps - 1j * float(disp.omega(k)), disp)
        _JT_CACHE[key] = v
    return v


def _extrapolate(eps, vals):
    """Polynomial extrapolation to 0 (Neville) and the change from dropping the coarsest node."""
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(vals, dtype=complex)

    def neville(x, y):
        p = list(y)
        n = len(x)
        for m in range(1, n):
            for i in range(n - m):
                p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
        return p[0]

    full = neville(eps, vals)
    reduced = neville(eps[1:], vals[1:])
    return full, abs(full - reduced)


def nu(k, gamma1: float, disp: DispersionRelation, eps_nodes=RICHARDSON_EPS):
    """Boundary value lim g~(eps - i omega(k)); returns (nu, error estimate).

    Raises ``ArithmeticError`` when the extrapolation error exceeds 1e-4.
    """
    val, err = _nu_raw(k, gamma1, disp, eps_nodes)
    if err > NU_TOL:
        raise ArithmeticError(f"nu extrapolation did not converge at k={k}: error {err:.2e}")
    return val, err


def richardson_nodes(k, disp, eps_nodes=RICHARDSON_EPS):
    """Shrink the nodes when omega(k) is within 20*eps_max of a band edge.

    The boundary function is analytic in eps only within the frequency
    distance to the nearest band edge; interior cells keep the nominal nodes.
    """
    w = float(disp.omega(k))
    gap = min(w - disp.omega_min, disp.omega_max - w)
    s = min(1.0, gap / (20 * eps_nodes[0]))
    return tuple(e * s for e in eps_nodes)


def _nu_raw(k, gamma1, disp, eps_nodes):
    if gamma1 == 0:
        return 1.0 + 0j, 0.0
    nodes = richardson_nodes(k, disp, eps_nodes)
    g = [1.0 / (1.0 + gamma1 * _boundary_Jtilde(k, disp, e)) for e in nodes]
    return _extrapolate(nodes, g)


def _pv_band(k0: float, disp, n_theta: int = 4096):
    """PV int_0^{1/2} dk / (omega^2 - omega0^2) in band coordinates.

    With u = omega^2 = u_min + (D/2)(1 - cos th), k(th) is odd and analytic,
    so the integral becomes (1/D) PV int_{-pi}^{pi} k'(th) / (cos th0 - cos th).
    Subtracting k'(th0) removes both poles (the PV of 1/(cos th0 - cos th)
    over a period vanishes); the remainder is periodic and smooth, so the
    trapezoid rule converges spectrally.
    """
    u_min, u_max = disp.omega_min**2, disp.omega_max**2
    D = u_max - u_min
    w0 = float(disp.omega(k0))
    c0 = 1.0 - 2.0 * (w0**2 - u_min) / D
    th0 = float(np.arccos(np.clip(c0, -1, 1)))

    def kprime(th):
        u = u_min + 0.5 * D * (1 - np.cos(th))
        kk = disp.inverse_branch(np.sqrt(np.clip(u, disp.omega_min**2, disp.omega_max**2)), 1)
        return 0.5 * D * np.sin(th) / (2 * disp.omega(kk) * disp.omega_prime(kk))

    th = -np.pi + (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    th = np.abs(th)  # integrand is even
    g = kprime(th)
    g0 = kprime(np.array([th0]))[0]
    den = np.cos(th0) - np.cos(th)
    close = np.abs(den) < 1e-9
    # removable point: derivative ratio g'(th0) / sin(th0)
    h = 1e-6
    lim = (kprime(np.array([th0 + h]))[0] - kprime(np.array([th0 - h]))[0]) / (2 * h) / np.sin(th0)
    rem = np.where(close, lim, (g - g0) / np.where(close, 1.0, den))
    return rem.sum() * (2 * np.pi / n_theta) / D


def boundary_J_tilde(k, disp: DispersionRelation):
    """Exact boundary value J~(0+ - i omega(k)) by the Sokhotski-Plemelj split.

    Real part is 1/(2|v(k)|); the imaginary part is
    -2 omega0 PV int_0^{1/2} dk' / (omega(k')^2 - omega0^2).
    """
    k0 = abs(float(k))
    w0 = float(disp.omega(k0))
    v = abs(float(disp.omega_bar_prime(k0)))
    key = (_disp_key(disp), round(k0, 15), "pv")
    im = _JT_CACHE.get(key)
    if im is None:
        im = -2 * w0 * _pv_band(k0, disp)
        _JT_CACHE[key] = im
    return complex(1.0 / (2 * v), im)


def nu_boundary(k, gamma1: float, disp: DispersionRelation):
    if gamma1 == 0:
        return 1.0 + 0j
    return 1.0 / (1.0 + gamma1 * boundary_J_tilde(k, disp))


@dataclass
class InterfaceCoefficients:
    """Interface coefficient tables on a k-grid.

    Invalid (band-edge or non-converged) cells carry NaN.
    """

    k: np.ndarray
    nu: np.ndarray
    nu_err: np.ndarray
    wp: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    g: np.ndarray
    valid: np.ndarray
    gamma1: float
    T: float = 0.0

    @property
    def total(self):
        return self.p_plus + self.p_minus + self.g

    def to_rows(self):
        for i in range(self.k.size):
            yield (self.k[i], self.nu[i].real, self.nu[i].imag, self.p_plus[i], self.p_minus[i], self.g[i], self.total[i])


def band_edge_mask(k, n_k: int):
    k = np.asarray(k, dtype=float)
    return np.minimum(np.abs(k), np.abs(0.5 - np.abs(k))) >= 1.0 / n_k


def interface_coefficients(k_grid, gamma1: float, disp: DispersionRelation, T: float = 0.0,
                           method: str = "boundary", n_k: int | None = None):
    """Tabulate nu, wp = gamma1 nu / (2|v|), p+ = |1-wp|^2, p- = |wp|^2, g = gamma1 |nu|^2/|v|.

    ``k_grid`` is an array of midpoints or an integer grid size. ``method``
    selects how nu is obtained: ``"boundary"`` (exact principal-value split,
    default) or ``"richardson"`` (extrapolation of g~(eps - i omega)). The
    boundary route reports a zero error estimate. ``n_k`` sets the band-edge
    exclusion width 1/n_k; it defaults to the number of points, which is
    wrong for short ad-hoc point lists.
    """
    if np.isscalar(k_grid):
        k_grid = midpoint_grid(int(k_grid))
    k = np.asarray(k_grid, dtype=float)
    valid = band_edge_mask(k, n_k or k.size)
    nu_v = np.full(k.size, np.nan + 0j)
    err = np.full(k.size, np.nan)
    # evaluate on |k| once, reuse for the mirror cell
    done = {}
    for i in np.nonzero(valid)[0]:
        a = round(abs(k[i]), 15)
        if a not in done:
            if method == "richardson":
                done[a] = _nu_raw(a, gamma1, disp, RICHARDSON_EPS)
            elif method == "boundary":
                done[a] = (nu_boundary(a, gamma1, disp), 0.0)
            else:
                raise ValueError(f"unknown method {method!r}")
        nu_v[i], err[i] = done[a]
    valid &= np.nan_to_num(err, nan=np.inf) <= NU_TOL
    v = np.abs(disp.omega_bar_prime(k))
    with np.errstate(invalid="ignore", divide="ignore"):
        wp = gamma1 * nu_v / (2 * v)
        pp = np.abs(1 - wp) ** 2
        pm = np.abs(wp) ** 2
        gg = gamma1 * np.abs(nu_v) ** 2 / v
    for arr in (nu_v, wp, pp, pm, gg):
        arr[~valid] = np.nan
    return InterfaceCoefficients(k, nu_v, err, wp, pp, pm, gg, valid, float(gamma1), float(T))
