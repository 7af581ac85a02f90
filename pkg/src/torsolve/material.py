"""Bilinear uniaxial curves, TTO ceramic/metal grading, and sampled material fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class BilinearCurve:
    """Elastic / linear-hardening uniaxial curve.

    ``alpha = 0`` is perfectly plastic, ``alpha = 1`` purely elastic.
    """

    E: float
    nu: float
    sigma_y: float
    E_h: float

    def __post_init__(self):
        if not self.E > 0:
            raise MaterialError(f"E must be positive, got {self.E}")
        if not 0 <= self.nu < 0.5:
            raise MaterialError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")
        if not self.sigma_y > 0:
            raise MaterialError(f"yield stress must be positive, got {self.sigma_y}")
        if not 0 <= self.E_h <= self.E * (1 + 1e-12):
            raise MaterialError(f"hardening modulus must lie in [0, E], got {self.E_h}")

    @classmethod
    def from_alpha(cls, E, nu, sigma_y, alpha) -> "BilinearCurve":
        return cls(E=float(E), nu=float(nu), sigma_y=float(sigma_y), E_h=float(alpha) * float(E))

    @property
    def alpha(self) -> float:
        return self.E_h / self.E

    @property
    def eps_y(self) -> float:
        return self.sigma_y / self.E

    @property
    def G(self) -> float:
        return self.E / (2 * (1 + self.nu))

    def stress(self, eps):
        return uniaxial_stress(eps, self.E, self.sigma_y, self.E_h)


def uniaxial_stress(eps, E, sigma_y, E_h):
    """Stress on the bilinear curve; the elastic branch owns ``eps == eps_y``."""
    eps = np.asarray(eps, dtype=float)
    E, sigma_y, E_h = np.asarray(E, float), np.asarray(sigma_y, float), np.asarray(E_h, float)
    eps_y = sigma_y / E
    alpha = E_h / E
    return np.where(eps <= eps_y, E * eps, sigma_y * (1 - alpha) + E_h * eps)


def uniaxial_slope(eps, E, sigma_y, E_h):
    eps = np.asarray(eps, dtype=float)
    return np.where(eps <= np.asarray(sigma_y) / np.asarray(E), E, E_h)


# ---------------------------------------------------------------------------
# TTO two-phase grading


@dataclass(frozen=True)
class TtoFgm:
    """Ceramic/metal FGM graded along y with ``V_c = (0.5 + y/h)**k``.

    The ceramic is linear elastic.  ``q = math.inf`` gives the Voigt limit
    ``R = 1``; ``q = 0`` gives ``R = E_c / E_m``.
    """

    E_c: float
    nu_c: float
    E_m: float
    nu_m: float
    sigma_ym: float
    E_mh: float
    k: float
    q: float
    h: float

    def __post_init__(self):
        for name in ("E_c", "E_m", "sigma_ym", "h"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive")
        for name in ("nu_c", "nu_m"):
            if not 0 <= getattr(self, name) < 0.5:
                raise MaterialError(f"{name} must lie in [0, 0.5)")
        if not 0 <= self.E_mh <= self.E_m:
            raise MaterialError("metal hardening modulus must lie in [0, E_m]")
        if not self.k >= 0:
            raise MaterialError("power-law exponent k must be non-negative")
        if not self.q >= 0:
            raise MaterialError("stress-transfer parameter q must be non-negative or inf")

    @property
    def R(self) -> float:
        if math.isinf(self.q):
            return 1.0
        return (self.q + self.E_c) / (self.q + self.E_m)

    def ceramic_fraction(self, y):
        y = np.asarray(y, dtype=float)
        half = self.h / 2
        if np.any(np.abs(y) > half * (1 + 1e-12)):
            raise MaterialError(f"y outside the graded strip [-{half}, {half}]")
        s = np.clip(0.5 + y / self.h, 0.0, 1.0)
        if self.k == 0:
            return np.ones_like(s)
        return s**self.k

    def ceramic_fraction_dy(self, y):
        y = np.asarray(y, dtype=float)
        s = np.clip(0.5 + y / self.h, 0.0, 1.0)
        if self.k == 0:
            return np.zeros_like(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.k * s ** (self.k - 1) / self.h
        return np.where(s > 0, d, 0.0 if self.k > 1 else np.inf)

    def properties(self, y):
        """(E, nu, sigma_y, E_h) arrays at heights ``y``."""
        vc = self.ceramic_fraction(y)
        vm = 1.0 - vc
        R = self.R
        den = R * vm + vc
        E = (R * self.E_m * vm + self.E_c * vc) / den
        nu = self.nu_m * vm + self.nu_c * vc
        sy = self.sigma_ym * (vm + self.E_c / (R * self.E_m) * vc)
        Eh = (R * self.E_mh * vm + self.E_c * vc) / den
        return E, nu, sy, Eh

    def property_gradients(self, y):
        """d/dy of E and nu at heights ``y``."""
        vc = self.ceramic_fraction(y)
        dvc = self.ceramic_fraction_dy(y)
        R = self.R
        den = R * (1 - vc) + vc
        # dE/dvc for E = (R Em (1-vc) + Ec vc) / (R (1-vc) + vc)
        dE_dvc = R * (self.E_c - self.E_m) / den**2
        dnu_dvc = self.nu_c - self.nu_m
        # k < 1 leaves dvc infinite on the metal face; a constant property stays flat there
        with np.errstate(invalid="ignore"):
            dE = np.where(dE_dvc == 0, 0.0, dE_dvc * dvc)
            dnu = np.where(dnu_dvc == 0, 0.0, dnu_dvc * dvc)
        return dE, dnu


def tto_point(y: float, fgm: TtoFgm) -> BilinearCurve:
    E, nu, sy, Eh = (float(v) for v in fgm.properties(y))
    return BilinearCurve(E=E, nu=nu, sigma_y=sy, E_h=min(Eh, E))


# ---------------------------------------------------------------------------
# secant relations


def effective_poisson(E_eff, E, nu):
    E_eff = np.asarray(E_eff, dtype=float)
    if np.any(E_eff <= 0):
        raise MaterialError("effective modulus must be positive")
    return 0.5 + (np.asarray(nu) - 0.5) * E_eff / np.asarray(E)


def effective_shear(E_eff, nu_eff):
    return np.asarray(E_eff) / (2.0 * (1.0 + np.asarray(nu_eff)))


# ---------------------------------------------------------------------------
# sampled fields


@dataclass(frozen=True)
class MaterialField:
    """Per-point curve parameters plus the spatial gradients of E and nu."""

    E: np.ndarray
    nu: np.ndarray
    sigma_y: np.ndarray
    E_h: np.ndarray
    dE: np.ndarray  # (P, 2)
    dnu: np.ndarray  # (P, 2)

    @property
    def eps_y(self) -> np.ndarray:
        return self.sigma_y / self.E

    @property
    def G(self) -> np.ndarray:
        return self.E / (2 * (1 + self.nu))

    def __len__(self):
        return len(self.E)

    def curve(self, i: int) -> BilinearCurve:
        return BilinearCurve(float(self.E[i]), float(self.nu[i]), float(self.sigma_y[i]),
                             float(min(self.E_h[i], self.E[i])))

    def stress(self, eps):
        return uniaxial_stress(eps, self.E, self.sigma_y, self.E_h)

    def with_hardening_floor(self, eta: float) -> "MaterialField":
        if eta <= 0:
            return self
        return MaterialField(self.E, self.nu, self.sigma_y, np.maximum(self.E_h, eta * self.E),
                             self.dE, self.dnu)


def sample_field(model, points) -> MaterialField:
    """Sample a ``BilinearCurve`` (homogeneous) or ``TtoFgm`` at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    zeros = np.zeros((n, 2))
    if isinstance(model, BilinearCurve):
        full = np.ones(n)
        return MaterialField(model.E * full, model.nu * full, model.sigma_y * full,
                             model.E_h * full, zeros, zeros.copy())
    if isinstance(model, TtoFgm):
        y = pts[:, 1]
        E, nu, sy, Eh = model.properties(y)
        dE, dnu = model.property_gradients(y)
        grad_E = np.column_stack([np.zeros(n), dE])
        grad_nu = np.column_stack([np.zeros(n), dnu])
        return MaterialField(E, nu, sy, np.minimum(Eh, E), grad_E, grad_nu)
    raise MaterialError(f"unsupported material model {type(model).__name__}")
