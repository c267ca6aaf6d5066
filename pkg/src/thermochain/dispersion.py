"""Lattice couplings and the dispersion relation of the harmonic chain.

A coupling is a finitely supported even sequence ``alpha_x``; its symbol
``alpha_hat(k) = sum_x alpha_x cos(2 pi x k)`` is the squared frequency.
Wavenumbers live on the unit torus ``[-1/2, 1/2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CouplingError(ValueError):
    """Raised when a coupling violates evenness or positivity."""


def wrap_torus(k):
    """Map wavenumbers into [-1/2, 1/2)."""
    k = np.asarray(k, dtype=float)
    return k - np.floor(k + 0.5)


@dataclass(frozen=True)
class LatticeCoupling:
    """Finitely supported even coupling ``alpha_x``.

    ``coefficients`` maps signed integer offsets to real values.
    """

    coefficients: dict
    name: str = "custom"
    pinning: float = 0.0

    def symbol(self, k):
        k = np.abs(wrap_torus(k))
        out = np.zeros_like(k)
        for x, a in self.coefficients.items():
            out = out + a * np.cos(2 * np.pi * x * k)
        return out

    def symbol_prime(self, k):
        """Derivative of the symbol in k."""
        k = wrap_torus(k)
        out = np.zeros_like(k)
        for x, a in self.coefficients.items():
            out = out - 2 * np.pi * x * a * np.sin(2 * np.pi * x * k)
        return out

    @property
    def support(self):
        return max(abs(int(x)) for x in self.coefficients)


def _check_coupling(coef: dict, n_grid: int = 4096):
    for x, a in coef.items():
        if not np.isclose(coef.get(-x, 0.0), a, rtol=0, atol=1e-14):
            raise CouplingError(f"coupling not even: alpha[{x}]={a} but alpha[{-x}]={coef.get(-x, 0.0)}")
    c = LatticeCoupling(coef)
    # k = 0 is checked separately below (acoustic chains vanish there)
    k = np.linspace(0.0, 0.5, n_grid // 2 + 1)[1:]
    s = c.symbol(k)
    if s.min() <= 0:
        j = int(np.argmin(s))
        raise CouplingError(f"symbol not positive: alpha_hat({k[j]:.6g}) = {s[j]:.6g}")
    s0 = float(c.symbol(0.0))
    if s0 < -1e-14:
        raise CouplingError(f"symbol negative at k=0: {s0}")
    if abs(s0) <= 1e-14:
        # second derivative at 0 is -sum 4 pi^2 x^2 alpha_x
        curv = -sum(4 * np.pi**2 * x * x * a for x, a in coef.items())
        if curv <= 0:
            raise CouplingError("alpha_hat(0) = 0 without positive curvature at k=0")


def build_coupling(spec, validate: bool = True) -> LatticeCoupling:
    """Build a coupling from a preset name or a dict.

    Accepted forms: ``"nn_unpinned"``, ``{"preset": "nn_pinned", "omega0": w}``,
    ``{"preset": "custom", "coefficients": {offset: value}}``. Custom lists of
    ``[offset, value]`` pairs are also accepted.
    """
    if isinstance(spec, str):
        spec = {"preset": spec}
    preset = spec.get("preset", "custom")
    if preset == "nn_unpinned":
        return LatticeCoupling({0: 2.0, 1: -1.0, -1: -1.0}, name="nn_unpinned")
    if preset == "nn_pinned":
        w0 = float(spec.get("omega0", 1.0))
        if w0 <= 0:
            raise CouplingError("nn_pinned needs omega0 > 0")
        return LatticeCoupling({0: 2.0 + w0**2, 1: -1.0, -1: -1.0}, name="nn_pinned", pinning=w0)
    if preset != "custom":
        raise CouplingError(f"unknown preset {preset!r}")
    raw = spec.get("coefficients")
    if raw is None:
        raise CouplingError("custom coupling needs 'coefficients'")
    if isinstance(raw, dict):
        coef = {int(x): float(a) for x, a in raw.items()}
    else:
        coef = {int(x): float(a) for x, a in raw}
    if validate:
        _check_coupling(coef)
    return LatticeCoupling(coef, name="custom")


@dataclass(frozen=True)
class DispersionRelation:
    """omega(k) = sqrt(alpha_hat(k)) together with group velocity and inverses."""

    coupling: LatticeCoupling
    _band: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        k = np.linspace(0, 0.5, 4097)
        w = self.omega(k)
        object.__setattr__(self, "_band", (float(w.min()), float(w.max())))

    @property
    def kind(self):
        return self.coupling.name

    @property
    def omega_min(self):
        return self._band[0]

    @property
    def omega_max(self):
        return self._band[1]

    def omega(self, k):
        k = np.abs(wrap_torus(k))
        if self.kind == "nn_unpinned":
            return 2 * np.sin(np.pi * k)
        if self.kind == "nn_pinned":
            return np.sqrt(self.coupling.pinning**2 + 4 * np.sin(np.pi * k) ** 2)
        return np.sqrt(np.maximum(self.coupling.symbol(k), 0.0))

    def omega_prime(self, k):
        """d omega / dk. At k=0 of an acoustic chain the right derivative is used."""
        k = wrap_torus(k)
        sgn = np.where(k < 0, -1.0, 1.0)
        if self.kind == "nn_unpinned":
            return 2 * np.pi * np.cos(np.pi * k) * sgn
        if self.kind == "nn_pinned":
            return 2 * np.pi * np.sin(2 * np.pi * k) / self.omega(k)
        w = self.omega(k)
        ak = np.abs(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.coupling.symbol_prime(ak) / (2 * w)
        # acoustic limit at k=0: omega ~ c|k|
        c0 = np.sqrt(max(-sum(4 * np.pi**2 * x * x * a for x, a in self.coupling.coefficients.items()), 0.0) / 2)
        d = np.where(w > 0, d, c0)
        return d * sgn

    def omega_bar_prime(self, k):
        return self.omega_prime(k) / (2 * np.pi)

    def inverse_branch(self, u, sign: int = 1):
        """Return k with omega(k) = u; k in [0, 1/2] for sign=+1, negated for -1."""
        u = np.asarray(u, dtype=float)
        tol = 1e-12 * max(1.0, self.omega_max)
        if np.any(u < self.omega_min - tol) or np.any(u > self.omega_max + tol):
            raise ValueError(f"frequency outside band [{self.omega_min}, {self.omega_max}]")
        u = np.clip(u, self.omega_min, self.omega_max)
        if self.kind == "nn_unpinned":
            k = np.arcsin(np.clip(u / 2, 0, 1)) / np.pi
        elif self.kind == "nn_pinned":
            s2 = (u**2 - self.coupling.pinning**2) / 4
            k = np.arcsin(np.sqrt(np.clip(s2, 0, 1))) / np.pi
        else:
            k = self._invert_numeric(u)
        return sign * k

    def _invert_numeric(self, u):
        # Newton with bisection safeguard on [0, 1/2]; assumes unimodality
        shape = np.shape(u)
        u = np.atleast_1d(u).astype(float)
        lo = np.zeros_like(u)
        hi = np.full_like(u, 0.5)
        k = np.full_like(u, 0.25)
        for _ in range(200):
            f = self.omega(k) - u
            lo = np.where(f < 0, k, lo)
            hi = np.where(f >= 0, k, hi)
            d = self.omega_prime(k)
            with np.errstate(divide="ignore", invalid="ignore"):
                kn = k - f / d
            bad = ~np.isfinite(kn) | (kn <= lo) | (kn >= hi)
            kn = np.where(bad, 0.5 * (lo + hi), kn)
            if np.all(np.abs(kn - k) < 1e-15) or np.all(hi - lo < 1e-15):
                k = kn
                break
            k = kn
        return k.reshape(shape)[()]


@dataclass
class UnimodalReport:
    passed: bool
    decreasing_intervals: list

    def __str__(self):
        if self.passed:
            return "unimodal: pass"
        parts = ", ".join(f"[{a:.4f}, {b:.4f}]" for a, b in self.decreasing_intervals[:5])
        return f"unimodal: fail (omega decreases on {parts})"


def validate_unimodal(disp: DispersionRelation, n_grid: int = 4096) -> UnimodalReport:
    """List grid intervals in (0, 1/2) on which omega decreases."""
    k = np.linspace(0, 0.5, n_grid + 1)
    w = disp.omega(k)
    dec = np.diff(w) < 0
    spans = []
    i = 0
    while i < dec.size:
        if dec[i]:
            j = i
            while j + 1 < dec.size and dec[j + 1]:
                j += 1
            spans.append((float(k[i]), float(k[j + 1])))
            i = j + 1
        else:
            i += 1
    return UnimodalReport(not spans, spans)


def make_dispersion(spec, validate: bool = True) -> DispersionRelation:
    if isinstance(spec, DispersionRelation):
        return spec
    if isinstance(spec, LatticeCoupling):
        return DispersionRelation(spec)
    return DispersionRelation(build_coupling(spec, validate=validate))


def midpoint_grid(n: int):
    """Cell midpoints of a uniform n-cell grid on [-1/2, 1/2); excludes 0 and 1/2 for even n."""
    if n % 2:
        raise ValueError("k-grid size must be even")
    return -0.5 + (np.arange(n) + 0.5) / n
