"""Multiquadric basis, its closed-form Poisson particular solution, and interpolation.

With ``q = sqrt(r**2 + c**2)`` the particular solution ``u`` of
``laplacian(u) = q`` is

    u(r) = -(c**3 / 3) * log(c*q + c**2) + (r**2 + 4*c**2) * q / 9

and its derivatives reduce to

    u'(r) / r            = (q**2 + c*q + c**2) / (3*(q + c))
    d/dr(u'(r) / r) / r  = (q + 2*c) / (3*(q + c)**2)

so that ``grad u = g(r) * d`` and ``hess u = g(r) * I + g2(r) * d d^T`` with
``d`` the offset from the centre.  Both factors are smooth at ``r = 0``.

``c`` carries length units; the default 0.1 is tuned for centimetre-scale
sections and does not rescale with the geometry.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)

DEFAULT_SHAPE_PARAMETER = 0.1
DEFAULT_CONDITION_CAP = 1e12


class ConditioningError(RuntimeError):
    pass


def mq_value(r, c):
    return np.sqrt(np.asarray(r, dtype=float) ** 2 + c * c)


def mq_particular(r, c):
    q = mq_value(r, c)
    r = np.asarray(r, dtype=float)
    return -(c**3 / 3.0) * np.log(c * q + c * c) + (r * r + 4 * c * c) * q / 9.0


def mq_particular_g(r, c):
    """``u'(r) / r`` for the particular solution."""
    q = mq_value(r, c)
    return (q * q + c * q + c * c) / (3.0 * (q + c))


def mq_particular_g2(r, c):
    """``(d/dr)(u'(r)/r) / r``."""
    q = mq_value(r, c)
    return (q + 2 * c) / (3.0 * (q + c) ** 2)


def mq_particular_dr(r, c):
    return np.asarray(r, dtype=float) * mq_particular_g(r, c)


def mq_particular_grad(offset, c):
    """Gradient of the particular solution at ``offset = x - centre`` (..., 2)."""
    d = np.asarray(offset, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    return mq_particular_g(r, c)[..., None] * d


def mq_particular_laplacian(r, c):
    """Closed-form Laplacian ``2 g + r^2 g2``; equals ``mq_value`` identically."""
    r = np.asarray(r, dtype=float)
    return 2.0 * mq_particular_g(r, c) + r * r * mq_particular_g2(r, c)


@dataclass(frozen=True)
class RbfConfig:
    c: float = DEFAULT_SHAPE_PARAMETER
    condition_cap: float = DEFAULT_CONDITION_CAP
    tikhonov: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"shape parameter c must be positive, got {self.c}")
        if self.tikhonov < 0:
            raise ValueError("tikhonov shift must be non-negative")


class InterpolationMatrix:
    """Factorised MQ collocation matrix ``Phi[i, j] = f_j(x_i)``."""

    def __init__(self, centers, config: RbfConfig | None = None):
        self.config = config or RbfConfig()
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        c = self.config.c
        d = self.centers[:, None, :] - self.centers[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(r, np.inf)
        if np.min(r) <= 0:
            raise ValueError("interpolation centers must be distinct")
        np.fill_diagonal(r, 0.0)
        self.matrix = mq_value(r, c)
        a = self.matrix
        if self.config.tikhonov:
            a = a + self.config.tikhonov * np.eye(len(a))
        self.condition = float(np.linalg.cond(a))
        if not np.isfinite(self.condition) or self.condition > self.config.condition_cap:
            raise ConditioningError(
                f"MQ interpolation matrix has condition {self.condition:.3e} > cap "
                f"{self.config.condition_cap:.1e} for c = {c}; rescale c relative to the "
                "point spacing or enable a Tikhonov shift"
            )
        logger.debug("MQ matrix M=%d, c=%g, cond=%.3e", len(a), c, self.condition)
        self._lu = sla.lu_factor(a)

    @property
    def m(self) -> int:
        return len(self.centers)

    def fit(self, values) -> np.ndarray:
        """Coefficients reproducing ``values`` at the centres."""
        return sla.lu_solve(self._lu, np.asarray(values, dtype=float))

    def basis(self, points) -> np.ndarray:
        """Basis values ``f_j(p_i)``, shape (P, M)."""
        d = np.atleast_2d(points)[:, None, :] - self.centers[None, :, :]
        return mq_value(np.hypot(d[..., 0], d[..., 1]), self.config.c)

    def basis_grad(self, points) -> tuple[np.ndarray, np.ndarray]:
        """x and y derivatives of every basis function at ``points``."""
        d = np.atleast_2d(points)[:, None, :] - self.centers[None, :, :]
        q = mq_value(np.hypot(d[..., 0], d[..., 1]), self.config.c)
        return d[..., 0] / q, d[..., 1] / q

    def evaluate(self, coefficients, points):
        """Series value and gradient at ``points``."""
        k = np.asarray(coefficients, dtype=float)
        fx, fy = self.basis_grad(points)
        value = self.basis(points) @ k
        return value, np.column_stack([fx @ k, fy @ k])


def build_interpolation(centers, c: float = DEFAULT_SHAPE_PARAMETER, **kwargs) -> InterpolationMatrix:
    return InterpolationMatrix(centers, RbfConfig(c=c, **kwargs))


def fit_field(interp: InterpolationMatrix, values) -> np.ndarray:
    return interp.fit(values)


def eval_series(interp: InterpolationMatrix, coefficients, points):
    return interp.evaluate(coefficients, points)
