"""Deformation-theory elastoplastic torsion as one nonlinear system in the secant field.

The secant modulus is expanded as ``E_eff(p) = sum_j k_j f_j(p)`` over the
collocation points.  For a prescribed twist ``theta`` the residual at point j is
the distance of its (strain intensity, stress intensity) pair from the local
uniaxial curve; Newton iteration on ``k`` drives every residual to zero.  Each
residual evaluation is one linear warping solve with the current
``G_eff = E_eff / (2 (1 + nu_eff))`` field.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import postprocess
from .bem import (
    BemOperators,
    SingularSystemError,
    WarpingSolution,
    assemble,
    boundary_tangential_derivative,
    solve_coefficients,
    DERIVATIVES,
)
from .geometry import SectionShape, discretize_boundary, generate_collocation
from .material import MaterialField, sample_field
from .rbf import RbfConfig

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)
JACOBIANS = ("fd", "broyden", "analytic")


class PlasticityError(RuntimeError):
    pass


class ConvergenceError(PlasticityError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class NonPositiveModulusError(PlasticityError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 50
    jacobian: str = "fd"
    max_halvings: int = 20
    hardening_floor: float = 0.0
    fd_rel_step: float = 1e-6

    def __post_init__(self):
        if self.jacobian not in JACOBIANS:
            raise ValueError(f"jacobian must be one of {JACOBIANS}, got {self.jacobian!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.hardening_floor < 0:
            raise ValueError("hardening_floor must be non-negative")


@dataclass
class PlasticState:
    """Converged (or evaluated) state at one twist rate.  Treat as read-only."""

    theta: float
    k: np.ndarray
    points: np.ndarray
    material: MaterialField
    E_eff: np.ndarray
    grad_E: np.ndarray
    nu_eff: np.ndarray
    G_eff: np.ndarray
    grad_G: np.ndarray
    warping: WarpingSolution
    gamma_xz: np.ndarray
    gamma_yz: np.ndarray
    tau_xz: np.ndarray
    tau_yz: np.ndarray
    sigma_eq: np.ndarray
    eps_eq: np.ndarray
    residual: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)
    Mt: float = float("nan")
    Mt_quadrature: float = float("nan")

    @property
    def plastic(self) -> np.ndarray:
        return self.eps_eq > self.material.eps_y

    @property
    def residual_norm(self) -> float:
        """Max residual relative to the smallest local yield stress."""
        return float(np.max(np.abs(self.residual)) / np.min(self.material.sigma_y))

    @property
    def plastic_fraction(self) -> float:
        return float(np.mean(self.plastic))

    @property
    def moment_agreement(self) -> float:
        if not np.isfinite(self.Mt_quadrature) or self.Mt == 0:
            return float("nan")
        return abs(self.Mt - self.Mt_quadrature) / abs(self.Mt)


@dataclass
class FirstYield:
    theta_el: float
    M_el: float
    location: np.ndarray
    on_boundary: bool
    index: int


@dataclass
class SweepStep:
    theta: float
    theta_ratio: float
    Mt: float
    Mt_ratio: float
    plastic_fraction: float
    plastic_count: int
    iterations: int
    residual_norm: float
    state: PlasticState | None = None


@dataclass
class SweepResult:
    theta_el: float
    M_el: float
    steps: list[SweepStep] = field(default_factory=list)
    failed: bool = False
    message: str = ""

    @property
    def thetas(self):
        return np.array([s.theta for s in self.steps])

    @property
    def moments(self):
        return np.array([s.Mt for s in self.steps])


class TorsionModel:
    """Geometry, operators and material field for one cross-section.

    Everything that does not depend on the twist or on the secant field is
    built once here; ``solve_at_theta`` and ``sweep`` reuse it.
    """

    def __init__(self, shape: SectionShape, material, n_elements: int = 300, m_target: int = 450,
                 inset: float | None = None, rbf: RbfConfig | None = None,
                 options: SolverOptions | None = None, quadrature="analytic"):
        self.shape = shape
        self.material_model = material
        self.options = options or SolverOptions()
        self.mesh = discretize_boundary(shape, n_elements)
        if inset is None:
            inset = float(self.mesh.length.mean())
        self.colloc = generate_collocation(shape, m_target, inset)
        self.ops: BemOperators = assemble(self.mesh, self.colloc, rbf or RbfConfig(), quadrature=quadrature)
        self.points = self.colloc.points
        self.material = sample_field(material, self.points).with_hardening_floor(self.options.hardening_floor)
        self.boundary_material = sample_field(material, self.mesh.midpoint)
        phi_x, phi_y = self.ops.interp.basis_grad(self.points)
        self.Phi = self.ops.Phi
        self.Phi_x, self.Phi_y = phi_x, phi_y
        self.k_elastic = self.ops.interp.fit(self.material.E)
        self._cells = None
        self._first_yield: FirstYield | None = None

    @property
    def m(self) -> int:
        return self.colloc.m

    @property
    def cells(self):
        if self._cells is None:
            self._cells = postprocess.voronoi_cells(self.shape, self.points)
        return self._cells

    # ------------------------------------------------------------------
    # field chain

    def secant_fields(self, k):
        E = self.Phi @ k
        gE = np.column_stack([self.Phi_x @ k, self.Phi_y @ k])
        return E, gE

    def shear_fields(self, E_eff, grad_E):
        """nu_eff, G_eff and grad(G_eff), chained analytically through the secant relations."""
        mat = self.material
        E0, nu0 = mat.E, mat.nu
        rho = E_eff / E0
        nu = 0.5 + (nu0 - 0.5) * rho
        D = 2.0 * (1.0 + nu)
        G = E_eff / D
        grad_nu = (mat.dnu * rho[:, None]
                   + (nu0 - 0.5)[:, None] * (grad_E / E0[:, None] - (E_eff / E0**2)[:, None] * mat.dE))
        grad_G = grad_E / D[:, None] - (2.0 * E_eff / D**2)[:, None] * grad_nu
        return nu, G, grad_G

    def evaluate(self, k, theta: float, E_override=None) -> PlasticState:
        """Run the full chain k -> E_eff -> G_eff -> warping -> intensities -> residual."""
        k = np.asarray(k, dtype=float)
        E_eff, grad_E = self.secant_fields(k) if E_override is None else E_override
        if np.any(~np.isfinite(E_eff)) or np.any(E_eff <= 0):
            raise NonPositiveModulusError("secant modulus is non-positive at some collocation point")
        nu, G, grad_G = self.shear_fields(E_eff, grad_E)
        a, K, g, _, rcond = solve_coefficients(self.ops, G, grad_G)
        return self._state_from_coefficients(theta, k, E_eff, grad_E, nu, G, grad_G, a, K, g, rcond)

    def _state_from_coefficients(self, theta, k, E_eff, grad_E, nu, G, grad_G, a, K, g, rcond):
        ops = self.ops
        fields = {kl: ops.A[kl] @ a + ops.C[kl] for kl in DERIVATIVES}
        warping = WarpingSolution(
            a=a, phi_boundary=ops.S @ a + ops.s, phi_n=ops.beta3, fields=fields,
            compatibility=float(ops.S_mult @ a + ops.s_mult), rcond=rcond,
            residual=float(np.max(np.abs(K @ a - g))), rhs_scale=float(np.max(np.abs(g))),
        )
        x, y = self.points[:, 0], self.points[:, 1]
        gxz, gyz = postprocess.strain_components(theta, fields["x"], fields["y"], x, y)
        txz, tyz = G * gxz, G * gyz
        seq, eeq = postprocess.intensities(txz, tyz, gxz, gyz, nu)
        res = seq - self.material.stress(eeq)
        return PlasticState(theta=float(theta), k=k, points=self.points, material=self.material,
                            E_eff=E_eff, grad_E=grad_E, nu_eff=nu, G_eff=G, grad_G=grad_G,
                            warping=warping, gamma_xz=gxz, gamma_yz=gyz, tau_xz=txz, tau_yz=tyz,
                            sigma_eq=seq, eps_eq=eeq, residual=res)

    def residual(self, k, theta: float) -> np.ndarray:
        return self.evaluate(k, theta).residual

    def _fast_residual(self, E_eff, grad_E, theta):
        if np.any(E_eff <= 0):
            raise NonPositiveModulusError("secant modulus is non-positive")
        nu, G, grad_G = self.shear_fields(E_eff, grad_E)
        a, *_ = solve_coefficients(self.ops, G, grad_G)
        ops = self.ops
        x, y = self.points[:, 0], self.points[:, 1]
        px = ops.A["x"] @ a + ops.C["x"] - y
        py = ops.A["y"] @ a + ops.C["y"] + x
        mag = abs(theta) * np.hypot(px, py)
        seq = SQRT3 * G * mag
        eeq = SQRT3 * mag / (2.0 * (1.0 + nu))
        return seq - self.material.stress(eeq)

    # ------------------------------------------------------------------
    # Jacobians

    def jacobian_fd(self, k, theta, r0):
        """Forward differences, one warping solve per coefficient."""
        E0, gE0 = self.secant_fields(k)
        scale = float(np.max(self.material.E))
        steps = np.maximum(self.options.fd_rel_step * np.abs(k), self.options.fd_rel_step * scale)
        J = np.empty((self.m, self.m))
        for j in range(self.m):
            h = steps[j]
            E = E0 + h * self.Phi[:, j]
            gE = gE0 + h * np.column_stack([self.Phi_x[:, j], self.Phi_y[:, j]])
            J[:, j] = (self._fast_residual(E, gE, theta) - r0) / h
        return J

    def jacobian_analytic(self, state: PlasticState):
        """Exact derivative of the residual with respect to k (one extra multi-RHS solve)."""
        mat = self.material
        ops = self.ops
        th = abs(state.theta)
        E0, nu0 = mat.E, mat.nu
        e = state.E_eff
        ex, ey = state.grad_E.T
        rho = e / E0
        beta = (nu0 - 0.5) / E0
        nu = state.nu_eff
        D = 2.0 * (1.0 + nu)
        Ge = 1.0 / D - 2.0 * beta * e / D**2
        nux = mat.dnu[:, 0] * rho + (nu0 - 0.5) * (ex / E0 - e * mat.dE[:, 0] / E0**2)
        nuy = mat.dnu[:, 1] * rho + (nu0 - 0.5) * (ey / E0 - e * mat.dE[:, 1] / E0**2)
        gam_x = mat.dnu[:, 0] / E0 - (nu0 - 0.5) * mat.dE[:, 0] / E0**2
        gam_y = mat.dnu[:, 1] / E0 - (nu0 - 0.5) * mat.dE[:, 1] / E0**2
        Gxe = -2 * beta * ex / D**2 - 2 * nux / D**2 - 2 * e * gam_x / D**2 + 8 * beta * e * nux / D**3
        Gye = -2 * beta * ey / D**2 - 2 * nuy / D**2 - 2 * e * gam_y / D**2 + 8 * beta * e * nuy / D**3
        Gx_ex = 1.0 / D - 2.0 * e * beta / D**2
        Gy_ey = Gx_ex

        f = state.warping.fields
        x, y = self.points[:, 0], self.points[:, 1]
        u = self.Phi @ state.warping.a
        px, py = f["x"] - y, f["y"] + x
        B = ((u * Ge + px * Gxe + py * Gye)[:, None] * self.Phi
             + (px * Gx_ex)[:, None] * self.Phi_x + (py * Gy_ey)[:, None] * self.Phi_y)
        K = (state.G_eff[:, None] * self.Phi + state.grad_G[:, 0][:, None] * ops.A["x"]
             + state.grad_G[:, 1][:, None] * ops.A["y"])
        Da = -sla.solve(K, B, check_finite=False)
        P = np.hypot(px, py)
        P = np.where(P > 0, P, np.finfo(float).tiny)
        dP = (px / P)[:, None] * (ops.A["x"] @ Da) + (py / P)[:, None] * (ops.A["y"] @ Da)
        G = state.G_eff
        dsig = SQRT3 * th * ((P * Ge)[:, None] * self.Phi + G[:, None] * dP)
        deps = SQRT3 * th * (dP / D[:, None] - (2 * beta * P / D**2)[:, None] * self.Phi)
        slope = np.where(state.eps_eq <= mat.eps_y, mat.E, mat.E_h)
        return dsig - slope[:, None] * deps

    # ------------------------------------------------------------------
    # drivers

    def elastic_state(self, theta: float = 1.0) -> PlasticState:
        state = self.evaluate(self.k_elastic, theta)
        self._attach_moments(state)
        return state

    def first_yield(self) -> FirstYield:
        """Twist at which the first evaluation point reaches its yield strain.

        Evaluation points are the collocation points and the boundary element
        midpoints; on the boundary the shear strain is purely tangential and
        is formed from the tangential derivative of the boundary warping.
        """
        if self._first_yield is not None:
            return self._first_yield
        ref = self.elastic_state(1.0)
        eps_in = ref.eps_eq
        mesh = self.mesh
        phi_s = boundary_tangential_derivative(self.ops, ref.warping.phi_boundary)
        xm, ym = mesh.midpoint.T
        tx, ty = mesh.tangent.T
        gam_t = phi_s - ym * tx + xm * ty
        bmat = self.boundary_material
        eps_b = SQRT3 * np.abs(gam_t) / (2.0 * (1.0 + bmat.nu))
        with np.errstate(divide="ignore"):
            ratio_in = np.where(eps_in > 0, self.material.eps_y / eps_in, np.inf)
            ratio_b = np.where(eps_b > 0, bmat.eps_y / eps_b, np.inf)
        i_in, i_b = int(np.argmin(ratio_in)), int(np.argmin(ratio_b))
        if not np.isfinite(min(ratio_in[i_in], ratio_b[i_b])):
            raise PlasticityError("elastic strain field vanishes; first yield is undefined")
        if ratio_b[i_b] <= ratio_in[i_in]:
            theta_el, loc, on_b, idx = ratio_b[i_b], mesh.midpoint[i_b], True, i_b
        else:
            theta_el, loc, on_b, idx = ratio_in[i_in], self.points[i_in], False, i_in
        self._first_yield = FirstYield(theta_el=float(theta_el), M_el=float(theta_el * ref.Mt),
                                       location=np.array(loc), on_boundary=on_b, index=idx)
        return self._first_yield

    def _attach_moments(self, state: PlasticState) -> PlasticState:
        state.Mt = postprocess.torsional_moment(state, self.ops)
        state.Mt_quadrature = postprocess.quadrature_moment(state, self.shape, self.cells)
        agreement = state.moment_agreement
        if np.isfinite(agreement) and agreement > 0.01:
            logger.warning("boundary and quadrature moments differ by %.2f%% at theta=%g",
                           100 * agreement, state.theta)
        return state

    def solve_at_theta(self, theta: float, warm_start=None) -> PlasticState:
        """Newton-Raphson on the secant coefficients at fixed twist ``theta``."""
        if not theta > 0:
            raise ValueError("theta must be positive")
        opts = self.options
        k = np.array(self.k_elastic if warm_start is None else warm_start, dtype=float)
        sy_min = float(np.min(self.material.sigma_y))
        state = self.evaluate(k, theta)
        history = []
        J = None
        for it in range(1, opts.max_iter + 1):
            r = state.residual
            rn = float(np.max(np.abs(r))) / sy_min
            history.append(rn)
            if rn < opts.tol:
                state.iterations = it
                state.history = history
                return self._attach_moments(state)
            if it == opts.max_iter:
                break
            if opts.jacobian == "analytic":
                J = self.jacobian_analytic(state)
            elif opts.jacobian == "fd" or J is None:
                J = self.jacobian_fd(k, theta, r)
            try:
                dk = sla.solve(J, -r, check_finite=False)
            except (sla.LinAlgError, ValueError):
                dk = np.linalg.lstsq(J, -r, rcond=None)[0]
            new = self._line_search(k, dk, theta, r)
            if new is None and opts.jacobian == "broyden":
                J = self.jacobian_fd(k, theta, r)
                dk = sla.solve(J, -r, check_finite=False)
                new = self._line_search(k, dk, theta, r)
            if new is None:
                raise ConvergenceError(
                    f"line search failed at theta={theta:g} after {it} iterations "
                    f"(residual {rn:.3e})", history)
            k_new, state_new = new
            if opts.jacobian == "broyden":
                s = k_new - k
                J = J + np.outer(state_new.residual - r - J @ s, s) / (s @ s)
            k, state = k_new, state_new
        raise ConvergenceError(
            f"Newton did not converge at theta={theta:g} in {opts.max_iter} iterations "
            f"(residual history {', '.join(f'{h:.2e}' for h in history[-5:])})", history)

    def _line_search(self, k, dk, theta, r):
        norm0 = float(np.linalg.norm(r))
        lam = 1.0
        for _ in range(self.options.max_halvings + 1):
            trial = k + lam * dk
            try:
                st = self.evaluate(trial, theta)
            except (NonPositiveModulusError, SingularSystemError):
                lam *= 0.5
                continue
            if np.linalg.norm(st.residual) < norm0:
                return trial, st
            lam *= 0.5
        return None

    def solve_ratio(self, ratio: float, warm_start=None) -> PlasticState:
        return self.solve_at_theta(ratio * self.first_yield().theta_el, warm_start)

    def sweep(self, thetas, keep_states: bool = False) -> SweepResult:
        """Sequential warm-started solves over an increasing twist schedule."""
        thetas = np.asarray(thetas, dtype=float)
        if len(thetas) == 0 or np.any(np.diff(thetas) <= 0) or thetas[0] <= 0:
            raise ValueError("theta schedule must be positive and strictly increasing")
        fy = self.first_yield()
        result = SweepResult(theta_el=fy.theta_el, M_el=fy.M_el)
        k = None
        for th in thetas:
            try:
                st = self.solve_at_theta(float(th), warm_start=k)
            except PlasticityError as exc:
                result.failed = True
                result.message = str(exc)
                logger.error("sweep aborted at theta=%g: %s", th, exc)
                break
            k = st.k
            result.steps.append(SweepStep(
                theta=st.theta, theta_ratio=st.theta / fy.theta_el, Mt=st.Mt,
                Mt_ratio=st.Mt / fy.M_el, plastic_fraction=st.plastic_fraction,
                plastic_count=int(st.plastic.sum()), iterations=st.iterations,
                residual_norm=st.residual_norm, state=st if keep_states else None,
            ))
        return result

    def sweep_ratios(self, ratios, keep_states: bool = False) -> SweepResult:
        fy = self.first_yield()
        return self.sweep(np.asarray(ratios, dtype=float) * fy.theta_el, keep_states=keep_states)


def default_schedule(theta_el: float, ratio_max: float, steps: int = 12) -> np.ndarray:
    """Geometric twist schedule from half the first-yield twist up to ``ratio_max``."""
    if ratio_max <= 0.5:
        raise ValueError("ratio_max must exceed 0.5")
    return theta_el * np.geomspace(0.5, ratio_max, steps)


# module-level entry points mirroring the model methods


def first_yield_twist(model: TorsionModel) -> FirstYield:
    return model.first_yield()


def residual(k, theta, model: TorsionModel) -> np.ndarray:
    return model.residual(k, theta)


def solve_at_theta(model: TorsionModel, theta: float, warm_start=None) -> PlasticState:
    return model.solve_at_theta(theta, warm_start)


def sweep(model: TorsionModel, thetas, keep_states: bool = False) -> SweepResult:
    return model.sweep(thetas, keep_states)
