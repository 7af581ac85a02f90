"""Elastoplastic Saint-Venant torsion of homogeneous and graded bars.

Constant boundary elements handle the warping function's boundary, a
multiquadric expansion carries the variable-coefficient domain term, and the
secant modulus field is found by Newton iteration under deformation-theory
plasticity.
"""
from .geometry import SectionShape, discretize_boundary, generate_collocation, point_in_domain
from .material import BilinearCurve, MaterialField, TtoFgm, sample_field, tto_point
from .rbf import RbfConfig, InterpolationMatrix
from .bem import assemble, solve_warping, eval_fields
from .plasticity import PlasticState, SolverOptions, SweepResult, TorsionModel
from .postprocess import analytic_references, derive_fields, torsional_moment

__all__ = [
    "SectionShape", "discretize_boundary", "generate_collocation", "point_in_domain",
    "BilinearCurve", "MaterialField", "TtoFgm", "sample_field", "tto_point",
    "RbfConfig", "InterpolationMatrix",
    "assemble", "solve_warping", "eval_fields",
    "PlasticState", "SolverOptions", "SweepResult", "TorsionModel",
    "analytic_references", "derive_fields", "torsional_moment",
]
__version__ = "0.1.0"
