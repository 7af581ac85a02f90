"""Derived fields, torsional moment (boundary-only and direct quadrature), references."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon

from .bem import BemOperators
from .geometry import SectionShape

SQRT3 = np.sqrt(3.0)

FIELD_COLUMNS = ("x", "y", "phi", "w", "gamma_xz", "gamma_yz", "tau_xz", "tau_yz",
                 "sigma_eq", "eps_eq", "E_eff", "plastic")


@dataclass
class FieldTable:
    columns: dict[str, np.ndarray]

    def __len__(self):
        return len(self.columns["x"])

    def __getitem__(self, name):
        return self.columns[name]

    def rows(self):
        cols = [self.columns[c] for c in FIELD_COLUMNS]
        for i in range(len(self)):
            yield tuple(c[i] for c in cols)


def strain_components(theta, phi_x, phi_y, x, y):
    return theta * (phi_x - y), theta * (phi_y + x)


def intensities(tau_xz, tau_yz, gamma_xz, gamma_yz, nu_eff):
    sigma_eq = SQRT3 * np.hypot(tau_xz, tau_yz)
    eps_eq = SQRT3 * np.hypot(gamma_xz, gamma_yz) / (2.0 * (1.0 + nu_eff))
    return sigma_eq, eps_eq


def derive_fields(state) -> FieldTable:
    """Row-wise field table at the collocation points of a converged state."""
    pts = state.points
    f = state.warping.fields
    gxz, gyz = strain_components(state.theta, f["x"], f["y"], pts[:, 0], pts[:, 1])
    txz, tyz = state.G_eff * gxz, state.G_eff * gyz
    seq, eeq = intensities(txz, tyz, gxz, gyz, state.nu_eff)
    plastic = (eeq > state.material.eps_y).astype(int)
    return FieldTable({
        "x": pts[:, 0], "y": pts[:, 1], "phi": f["0"], "w": state.theta * f["0"],
        "gamma_xz": gxz, "gamma_yz": gyz, "tau_xz": txz, "tau_yz": tyz,
        "sigma_eq": seq, "eps_eq": eeq, "E_eff": state.E_eff, "plastic": plastic,
    })


# ---------------------------------------------------------------------------
# torsional moment


def moment_integrand(tau_xz, tau_yz, x, y):
    return x * tau_yz - y * tau_xz


def torsional_moment(state, ops: BemOperators) -> float:
    """Fit ``x tau_yz - y tau_xz`` with multiquadrics and integrate on the boundary."""
    pts = state.points
    R = moment_integrand(state.tau_xz, state.tau_yz, pts[:, 0], pts[:, 1])
    abar = ops.interp.fit(R)
    return float(abar @ ops.basis_integrals)


def moment_from_values(R, ops: BemOperators) -> float:
    return float(ops.interp.fit(R) @ ops.basis_integrals)


def boundary_torsion_constant(ops: BemOperators, phi_boundary) -> float:
    """Homogeneous torsion constant ``Ip - int_Gamma phi dphi/dn ds`` from boundary data alone.

    ``p . n`` is constant on a straight element, so Simpson's rule integrates
    the polar moment exactly.
    """
    mesh = ops.mesh
    a, b, m = mesh.start, mesh.end, mesh.midpoint
    r2 = lambda p: p[:, 0] ** 2 + p[:, 1] ** 2  # noqa: E731
    pn = np.einsum("ij,ij->i", m, mesh.normal)
    ip = np.sum(mesh.length * pn * (r2(a) + 4 * r2(m) + r2(b)) / 6.0) / 4.0
    return float(ip - np.sum(mesh.length * np.asarray(phi_boundary) * ops.beta3))


def voronoi_cells(shape: SectionShape, points) -> tuple[np.ndarray, np.ndarray]:
    """Areas and centroids of the Voronoi cells of ``points`` clipped to ``shape``."""
    return _voronoi_cells(shape, np.asarray(points, dtype=float))


def _voronoi_cells(shape, pts):
    if shape.is_curved:
        outline = shape._outline
    else:
        outline = shape.corner_vertices()
    domain = Polygon(outline)
    cells = shapely.voronoi_polygons(MultiPoint([tuple(p) for p in pts]), extend_to=domain.buffer(domain.length))
    polys = list(cells.geoms)
    areas = np.zeros(len(pts))
    cents = pts.copy()
    tree = shapely.STRtree(shapely.points(pts))
    for poly in polys:
        idx = tree.query(poly, predicate="contains")
        if len(idx) != 1:
            continue
        clipped = poly.intersection(domain)
        j = int(idx[0])
        areas[j] = clipped.area
        if clipped.area > 0:
            c = clipped.centroid
            cents[j] = (c.x, c.y)
    return areas, cents


def quadrature_moment(state, shape: SectionShape, cells=None) -> float:
    """Independent area quadrature of the moment over collocation Voronoi cells.

    Each cell contributes ``A (R + grad(R) . (centroid - node))``, exact for
    an integrand linear over the cell.
    """
    pts = state.points
    x, y = pts[:, 0], pts[:, 1]
    f = state.warping.fields
    th = state.theta
    G = state.G_eff
    Gx, Gy = state.grad_G.T
    px, py = f["x"] - y, f["y"] + x
    txz, tyz = th * G * px, th * G * py
    dxtxz = th * (Gx * px + G * f["xx"])
    dytxz = th * (Gy * px + G * (f["xy"] - 1.0))
    dxtyz = th * (Gx * py + G * (f["xy"] + 1.0))
    dytyz = th * (Gy * py + G * f["yy"])
    R = x * tyz - y * txz
    Rx = tyz + x * dxtyz - y * dxtxz
    Ry = -txz + x * dytyz - y * dytxz
    areas, cents = cells if cells is not None else voronoi_cells(shape, pts)
    corr = Rx * (cents[:, 0] - x) + Ry * (cents[:, 1] - y)
    return float(np.sum(areas * (R + corr)))


# ---------------------------------------------------------------------------
# references


def analytic_references(shape: SectionShape, sigma_y: float) -> tuple[float, float]:
    """Classical first-yield and fully plastic torques (von Mises shear yield)."""
    if shape.kind == "rectangle":
        b, h = sorted((shape.b, shape.h))
        return 0.142 * h * b * b * sigma_y, 0.0962 * (3 * h - b) * b * b * sigma_y
    if shape.kind == "equilateral_triangle":
        b3 = shape.b**3
        return 0.02884 * sigma_y * b3, 0.04811 * sigma_y * b3
    raise ValueError(f"no closed-form reference torques for {shape.kind}")


def plastic_region(state) -> tuple[np.ndarray, float]:
    """Per-point plastic labels and the plastic fraction of the collocation set."""
    labels = np.asarray(state.plastic, dtype=bool)
    return labels, float(labels.mean()) if len(labels) else 0.0


def rectangle_torsion_constant(b: float, h: float, terms: int = 200) -> float:
    """Series torsion constant of a b x h rectangle (b the shorter side)."""
    b, h = sorted((b, h))
    n = np.arange(1, 2 * terms, 2)
    series = np.sum(np.tanh(n * np.pi * h / (2 * b)) / n**5)
    return h * b**3 * (1.0 / 3.0 - 64.0 / np.pi**5 * (b / h) * series)
