"""Constant-element BEM with analog-equation domain sources for the warping problem.

The warping function of a bar with a variable shear modulus ``G`` satisfies

    G lap(phi) + G_x phi_x + G_y phi_y = y G_x - x G_y     in the section
    dphi/dn = y n_x - x n_y                                on the boundary

``lap(phi)`` is replaced by a fictitious source expanded in multiquadrics,
``b = sum_j a_j f_j``; boundary integrals turn the domain terms into boundary
ones through the particular solutions of ``lap(u_j) = f_j``.  The boundary
unknowns are eliminated so that ``phi`` and all its derivatives at the
collocation points are affine in ``a``:  ``phi_kl = A_kl a + c_kl``.

Kernel integrals over straight elements are evaluated in closed form by
default (complex-variable antiderivatives of ``log(zeta - z)`` and its
derivatives), which keeps near-boundary field evaluation accurate.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .geometry import BoundaryMesh, CollocationSet, SectionShape
from .rbf import (
    InterpolationMatrix,
    RbfConfig,
    mq_particular,
    mq_particular_g,
    mq_particular_g2,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DERIVATIVES = ("0", "x", "y", "xx", "yy", "xy")


class BemError(RuntimeError):
    pass


class SingularSystemError(BemError):
    pass


class NearSingularWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# kernel integrals


@dataclass
class KernelIntegrals:
    """Integrals of ``log(r)/2pi`` (G) and its normal derivative (H) per element.

    Every array has shape (P, N): P field points, N elements.  Suffixes are
    derivatives with respect to the field point.
    """

    G: dict[str, np.ndarray] = field(default_factory=dict)
    H: dict[str, np.ndarray] = field(default_factory=dict)


def kernel_integrals(points, mesh: BoundaryMesh, order: int = 2, quadrature="analytic",
                     on_boundary: bool = False) -> KernelIntegrals:
    """Integrate the Laplace kernels over every element, seen from ``points``.

    ``order`` is the highest field-point derivative needed (0, 1 or 2).
    ``quadrature`` is ``"analytic"`` or a Gauss-Legendre point count.  With
    ``on_boundary`` the points are the element midpoints themselves; the self
    term of G is integrated exactly and the principal value of H is zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = (pts[:, 0] + 1j * pts[:, 1])[:, None]
    p1 = (mesh.start[:, 0] + 1j * mesh.start[:, 1])[None, :]
    p2 = (mesh.end[:, 0] + 1j * mesh.end[:, 1])[None, :]
    t = (mesh.tangent[:, 0] + 1j * mesh.tangent[:, 1])[None, :]
    nrm = (mesh.normal[:, 0] + 1j * mesh.normal[:, 1])[None, :]
    ct = np.conj(t)

    I0, I1, I2, I3 = _analytic_moments(z, p1, p2, ct, order)
    if quadrature != "analytic":
        ng = int(quadrature)
        if ng < 1:
            raise ValueError("Gauss order must be positive")
        G0, G1, G2, G3 = _gauss_moments(z, p1, p2, mesh.length[None, :], ng, order)
        if on_boundary:
            diag = np.eye(len(pts), mesh.n, dtype=bool)
            G0 = np.where(diag, I0, G0)
            if order >= 1:
                G1 = np.where(diag, I1, G1)
        I0, I1, I2, I3 = G0, G1, G2, G3

    out = KernelIntegrals()
    out.G["0"] = I0 / TWO_PI
    H0 = (nrm * I1).real / TWO_PI
    if on_boundary:
        np.fill_diagonal(H0, 0.0)
    out.H["0"] = H0
    if order >= 1:
        dA = -I1 / TWO_PI
        dB = nrm * I2 / TWO_PI
        out.G["x"], out.G["y"] = dA.real, -dA.imag
        out.H["x"], out.H["y"] = dB.real, -dB.imag
    if order >= 2:
        d2A = -I2 / TWO_PI
        d2B = nrm * 2.0 * I3 / TWO_PI
        out.G["xx"], out.G["yy"], out.G["xy"] = d2A.real, -d2A.real, -d2A.imag
        out.H["xx"], out.H["yy"], out.H["xy"] = d2B.real, -d2B.real, -d2B.imag
    return out


def _analytic_moments(z, p1, p2, ct, order):
    """Exact ``int ln|zeta-z| ds`` (real) and ``int (zeta-z)^-k ds`` for k = 1..3."""
    w1 = (p1 - z) * ct
    w2 = (p2 - z) * ct
    # both endpoints share the offset from the element line; pin it so the
    # principal logarithm sees the same side of its branch cut at each end
    d = 0.5 * (w1.imag + w2.imag)
    scale = np.abs(w2 - w1)
    d = np.where(np.abs(d) < 1e-13 * scale, 0.0, d)
    w1 = w1.real + 1j * d
    w2 = w2.real + 1j * d
    with np.errstate(divide="ignore", invalid="ignore"):
        lw1, lw2 = np.log(w1), np.log(w2)
        I0 = (_wlogw(w2, lw2) - w2 - _wlogw(w1, lw1) + w1).real
        L = lw2 - lw1
        I1 = ct * L
        I2 = I3 = None
        if order >= 1:
            z1, z2 = p1 - z, p2 - z
            I2 = ct * (1.0 / z1 - 1.0 / z2)
            if order >= 2:
                I3 = ct * 0.5 * (1.0 / z1**2 - 1.0 / z2**2)
    return I0, I1, I2, I3


def _wlogw(w, lw):
    return np.where(w == 0, 0.0, w * lw)


def _gauss_moments(z, p1, p2, length, ng, order):
    xg, wg = np.polynomial.legendre.leggauss(ng)
    I0 = np.zeros(np.broadcast_shapes(z.shape, p1.shape))
    I1 = np.zeros_like(I0, dtype=complex)
    I2 = np.zeros_like(I1) if order >= 1 else None
    I3 = np.zeros_like(I1) if order >= 2 else None
    jac = 0.5 * length
    for xi, wi in zip(xg, wg):
        zeta = 0.5 * (p1 + p2) + 0.5 * xi * (p2 - p1)
        inv = 1.0 / (zeta - z)
        I0 = I0 + wi * jac * np.log(np.abs(zeta - z))
        I1 = I1 + wi * jac * inv
        if order >= 1:
            I2 = I2 + wi * jac * inv**2
        if order >= 2:
            I3 = I3 + wi * jac * inv**3
    return I0, I1, I2, I3


# ---------------------------------------------------------------------------
# particular-solution tables


def particular_tables(points, centers, c: float, order: int = 2) -> dict[str, np.ndarray]:
    """Particular solution ``u_j`` and its derivatives at ``points`` (P, M)."""
    d = np.atleast_2d(points)[:, None, :] - np.atleast_2d(centers)[None, :, :]
    dx, dy = d[..., 0], d[..., 1]
    r = np.hypot(dx, dy)
    out = {"0": mq_particular(r, c)}
    if order >= 1:
        g = mq_particular_g(r, c)
        out["x"], out["y"] = g * dx, g * dy
        if order >= 2:
            g2 = mq_particular_g2(r, c)
            out["xx"] = g + g2 * dx * dx
            out["yy"] = g + g2 * dy * dy
            out["xy"] = g2 * dx * dy
    return out


# ---------------------------------------------------------------------------
# operators


@dataclass
class BemOperators:
    """Assembled boundary and collocation-point operators for one geometry."""

    mesh: BoundaryMesh
    colloc: CollocationSet
    interp: InterpolationMatrix
    quadrature: object
    H: np.ndarray  # N x N, includes the -1/2 free term
    G: np.ndarray  # N x N
    F: np.ndarray  # N x M
    beta3: np.ndarray  # N
    U: np.ndarray  # N x M, u_j at element midpoints
    Un: np.ndarray  # N x M, du_j/dn at element midpoints
    S: np.ndarray = None  # N x M
    s: np.ndarray = None  # N
    S_mult: np.ndarray = None  # M, compatibility multiplier per unit a
    s_mult: float = 0.0
    Fkl: dict[str, np.ndarray] = field(default_factory=dict)  # M x M
    Hkl: dict[str, np.ndarray] = field(default_factory=dict)  # M x N
    Gkl: dict[str, np.ndarray] = field(default_factory=dict)  # M x N
    A: dict[str, np.ndarray] = field(default_factory=dict)  # M x M, phi_kl = A a + C
    C: dict[str, np.ndarray] = field(default_factory=dict)  # M
    basis_integrals: np.ndarray = None  # M, int over the section of f_j

    @property
    def c(self) -> float:
        return self.interp.config.c

    @property
    def Phi(self) -> np.ndarray:
        return self.interp.matrix

    @property
    def n(self) -> int:
        return self.mesh.n

    @property
    def m(self) -> int:
        return self.colloc.m

    def field_rows(self, points, order: int = 2):
        """(A, C) rows giving ``phi_kl = A a + C`` at arbitrary interior points."""
        ker = kernel_integrals(points, self.mesh, order=order, quadrature=self.quadrature)
        part = particular_tables(points, self.colloc.points, self.c, order=order)
        A, C = {}, {}
        for kl in DERIVATIVES[: {0: 1, 1: 3, 2: 6}[order]]:
            Fk = part[kl] + ker.G[kl] @ self.Un - ker.H[kl] @ self.U
            A[kl] = Fk + ker.H[kl] @ self.S
            C[kl] = ker.H[kl] @ self.s - ker.G[kl] @ self.beta3
        return A, C


def assemble(mesh: BoundaryMesh, colloc: CollocationSet, rbf_config: RbfConfig | None = None,
             quadrature="analytic", shape: SectionShape | None = None) -> BemOperators:
    """Build every geometry-dependent operator, including the boundary reduction."""
    rbf_config = rbf_config or RbfConfig()
    if np.any(mesh.length <= 0):
        k = int(np.flatnonzero(mesh.length <= 0)[0])
        raise BemError(f"boundary element {k} has zero length")
    _check_clearance(mesh, colloc)
    c = rbf_config.c
    interp = InterpolationMatrix(colloc.points, rbf_config)
    mids = mesh.midpoint

    kb = kernel_integrals(mids, mesh, order=0, quadrature=quadrature, on_boundary=True)
    Ht = kb.H["0"]
    Gb = kb.G["0"]
    H = Ht - 0.5 * np.eye(mesh.n)

    pb = particular_tables(mids, colloc.points, c, order=1)
    U = pb["0"]
    Un = pb["x"] * mesh.normal[:, 0:1] + pb["y"] * mesh.normal[:, 1:2]
    F = 0.5 * U + Gb @ Un - Ht @ U
    beta3 = mids[:, 1] * mesh.normal[:, 0] - mids[:, 0] * mesh.normal[:, 1]

    ops = BemOperators(mesh=mesh, colloc=colloc, interp=interp, quadrature=quadrature,
                       H=H, G=Gb, F=F, beta3=beta3, U=U, Un=Un)
    reduce_boundary(ops)

    ki = kernel_integrals(colloc.points, mesh, order=2, quadrature=quadrature)
    pi = particular_tables(colloc.points, colloc.points, c, order=2)
    for kl in DERIVATIVES:
        ops.Hkl[kl] = ki.H[kl]
        ops.Gkl[kl] = ki.G[kl]
        ops.Fkl[kl] = pi[kl] + ki.G[kl] @ Un - ki.H[kl] @ U
        ops.A[kl] = ops.Fkl[kl] + ki.H[kl] @ ops.S
        ops.C[kl] = ki.H[kl] @ ops.s - ki.G[kl] @ beta3
    ops.basis_integrals = basis_domain_integrals(mesh, colloc.points, c)
    return ops


def basis_domain_integrals(mesh: BoundaryMesh, centers, c: float, order: int = 8) -> np.ndarray:
    """``int_Omega f_j`` as the boundary flux ``int_Gamma du_j/dn ds`` (Gauss per element)."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    total = np.zeros(len(centers))
    for xi, wi in zip(xg, wg):
        p = mesh.start + 0.5 * (xi + 1.0) * (mesh.end - mesh.start)
        part = particular_tables(p, centers, c, order=1)
        un = part["x"] * mesh.normal[:, 0:1] + part["y"] * mesh.normal[:, 1:2]
        total += (0.5 * wi * mesh.length) @ un
    return total


def _check_clearance(mesh: BoundaryMesh, colloc: CollocationSet) -> None:
    d = mesh.midpoint[:, None, :] - colloc.points[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    k, j = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[k, j] < min(colloc.inset, 0.5 * mesh.length[k]):
        warnings.warn(
            f"collocation point {j} at {colloc.points[j]} lies {dist[k, j]:.3g} from boundary "
            f"node {k}; kernels are nearly singular",
            NearSingularWarning,
            stacklevel=3,
        )


def reduce_boundary(ops: BemOperators):
    """Eliminate the boundary unknowns: ``phi = S a + s``.

    The Neumann problem leaves ``phi`` free up to a constant, so ``H`` has the
    null vector 1.  The system is bordered with the gauge ``sum(phi) = 0`` and a
    scalar multiplier that absorbs the discrete compatibility defect.
    """
    n = ops.n
    Hb = np.zeros((n + 1, n + 1))
    Hb[:n, :n] = ops.H
    Hb[:n, n] = 1.0
    Hb[n, :n] = 1.0
    rhs = np.zeros((n + 1, ops.m + 1))
    rhs[:n, : ops.m] = -ops.F
    rhs[:n, ops.m] = ops.G @ ops.beta3
    lu = sla.lu_factor(Hb)
    rcond = lapack.dgecon(lu[0], np.linalg.norm(Hb, 1))[0]
    if rcond < 1e-13:
        raise SingularSystemError(
            f"boundary system is rank deficient beyond the constant mode (rcond={rcond:.2e})"
        )
    sol = sla.lu_solve(lu, rhs)
    ops.S = sol[:n, : ops.m]
    ops.s = sol[:n, ops.m]
    ops.S_mult = sol[n, : ops.m]
    ops.s_mult = float(sol[n, ops.m])
    return ops.S, ops.s


# ---------------------------------------------------------------------------
# solution


@dataclass
class WarpingSolution:
    a: np.ndarray
    phi_boundary: np.ndarray
    phi_n: np.ndarray
    fields: dict[str, np.ndarray]  # derivatives of phi at the collocation points
    compatibility: float
    rcond: float
    residual: float  # max |K a - g|
    rhs_scale: float

    @property
    def phi(self):
        return self.fields["0"]


def warping_system(ops: BemOperators, G, grad_G):
    """Matrix ``K`` and right side ``g`` of the collocation equations for ``a``."""
    G = np.asarray(G, dtype=float)
    Gx, Gy = np.asarray(grad_G, dtype=float).T
    x, y = ops.colloc.x, ops.colloc.y
    K = G[:, None] * ops.Phi + Gx[:, None] * ops.A["x"] + Gy[:, None] * ops.A["y"]
    g = Gx * (y - ops.C["x"]) - Gy * (x + ops.C["y"])
    return K, g


def solve_coefficients(ops: BemOperators, G, grad_G):
    K, g = warping_system(ops, G, grad_G)
    lu = sla.lu_factor(K, check_finite=False)
    rcond = lapack.dgecon(lu[0], np.linalg.norm(K, 1))[0]
    if not rcond > 1e-15:
        raise SingularSystemError(f"warping system is singular (rcond={rcond:.2e})")
    a = sla.lu_solve(lu, g, check_finite=False)
    return a, K, g, lu, rcond


def solve_warping(ops: BemOperators, G, grad_G) -> WarpingSolution:
    """Solve the collocation equations for a given shear-modulus field at the M points."""
    G = np.asarray(G, dtype=float)
    if np.any(~np.isfinite(G)) or np.any(G <= 0):
        raise BemError("effective shear modulus must be positive at every collocation point")
    a, K, g, _, rcond = solve_coefficients(ops, G, grad_G)
    fields = {kl: ops.A[kl] @ a + ops.C[kl] for kl in DERIVATIVES}
    phi_b = ops.S @ a + ops.s
    res = float(np.max(np.abs(K @ a - g))) if len(a) else 0.0
    scale = float(np.max(np.abs(g))) if len(g) else 0.0
    lam = float(ops.S_mult @ a + ops.s_mult)
    return WarpingSolution(a=a, phi_boundary=phi_b, phi_n=ops.beta3.copy(), fields=fields,
                           compatibility=lam, rcond=rcond, residual=res, rhs_scale=scale)


def eval_fields(solution: WarpingSolution, ops: BemOperators, points, shape: SectionShape | None = None):
    """phi and its first/second derivatives at arbitrary interior points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if shape is not None and not np.all(shape.contains(pts)):
        bad = int(np.flatnonzero(~shape.contains(pts))[0])
        raise BemError(f"query point {pts[bad]} is not strictly inside the section")
    d = pts[:, None, :] - ops.mesh.midpoint[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1]).min(axis=1)
    if np.any(dist < 1e-12 * ops.mesh.perimeter):
        raise BemError("query point lies on the boundary where the kernels are singular")
    near = dist < ops.mesh.length.max()
    if np.any(near):
        warnings.warn(
            f"{int(near.sum())} query point(s) closer than one element length to the boundary; "
            "field values there are low accuracy",
            NearSingularWarning,
            stacklevel=2,
        )
    A, C = ops.field_rows(pts, order=2)
    return {kl: A[kl] @ solution.a + C[kl] for kl in A}


def boundary_tangential_derivative(ops: BemOperators, phi_boundary) -> np.ndarray:
    """d(phi)/ds at every element midpoint from the boundary nodal values.

    Three-point arc-length differences; at a corner the stencil stays on the
    element's own edge.
    """
    mesh = ops.mesh
    phi = np.asarray(phi_boundary, dtype=float)
    n = mesh.n
    t = mesh.tangent
    ell = mesh.length
    idx = np.arange(n)
    prv, nxt = (idx - 1) % n, (idx + 1) % n
    cos_prev = np.einsum("ij,ij->i", t, t[prv])
    cos_next = np.einsum("ij,ij->i", t, t[nxt])
    smooth_prev = cos_prev > np.cos(np.radians(20))
    smooth_next = cos_next > np.cos(np.radians(20))

    out = np.empty(n)
    for i in range(n):
        if smooth_prev[i] and smooth_next[i]:
            nodes = [prv[i], i, nxt[i]]
            s = np.array([-(ell[prv[i]] + ell[i]) / 2, 0.0, (ell[i] + ell[nxt[i]]) / 2])
        elif smooth_next[i]:
            j2 = nxt[nxt[i]]
            nodes = [i, nxt[i], j2]
            s1 = (ell[i] + ell[nxt[i]]) / 2
            s = np.array([0.0, s1, s1 + (ell[nxt[i]] + ell[j2]) / 2])
        elif smooth_prev[i]:
            j2 = prv[prv[i]]
            nodes = [j2, prv[i], i]
            s1 = (ell[i] + ell[prv[i]]) / 2
            s = np.array([-s1 - (ell[prv[i]] + ell[j2]) / 2, -s1, 0.0])
        else:
            out[i] = 0.0
            continue
        out[i] = _lagrange_slope_at_zero(s, phi[nodes])
    return out


def _lagrange_slope_at_zero(s, f):
    s0, s1, s2 = s
    f0, f1, f2 = f
    return (f0 * (0 - s1 + 0 - s2) / ((s0 - s1) * (s0 - s2))
            + f1 * (0 - s0 + 0 - s2) / ((s1 - s0) * (s1 - s2))
            + f2 * (0 - s0 + 0 - s1) / ((s2 - s0) * (s2 - s1)))
