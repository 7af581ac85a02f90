import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torsolve.material import (
    BilinearCurve,
    MaterialError,
    TtoFgm,
    effective_poisson,
    effective_shear,
    sample_field,
    tto_point,
    uniaxial_stress,
)

from conftest import STEEL, fgm


def test_curve_elastic_and_plastic_branches():
    c = BilinearCurve.from_alpha(200.0, 0.3, 2.0, 0.25)
    assert c.eps_y == pytest.approx(0.01)
    assert c.stress(0.005) == pytest.approx(1.0)
    assert c.stress(0.02) == pytest.approx(2.0 + 50.0 * 0.01)


def test_curve_is_continuous_at_yield():
    c = BilinearCurve.from_alpha(210600.0, 0.3, 24.0, 0.3)
    e = c.eps_y
    assert c.stress(e) == pytest.approx(c.sigma_y, rel=1e-14)
    assert c.stress(np.nextafter(e, 1.0)) == pytest.approx(c.sigma_y, rel=1e-12)


def test_perfectly_plastic_plateau():
    assert np.allclose(STEEL.stress([0.001, 0.01, 1.0]), 24.0)


def test_alpha_one_is_elastic():
    c = BilinearCurve.from_alpha(100.0, 0.2, 1.0, 1.0)
    assert c.stress(0.5) == pytest.approx(50.0)


@pytest.mark.parametrize("kw", [dict(E=-1, nu=0.3, sigma_y=1, E_h=0), dict(E=1, nu=0.5, sigma_y=1, E_h=0),
                                dict(E=1, nu=0.3, sigma_y=0, E_h=0), dict(E=1, nu=0.3, sigma_y=1, E_h=2)])
def test_curve_validation(kw):
    with pytest.raises(MaterialError):
        BilinearCurve(**kw)


def test_tto_ratio_and_modulus_hand_values():
    f = TtoFgm(5000, 0.25, 3000, 0.25, 5.0, 500.0, k=1.0, q=0.0, h=10.0)
    assert f.R == pytest.approx(5.0 / 3.0)
    E, nu, sy, Eh = f.properties(0.0)  # V_c = 0.5 at mid-height for k = 1
    assert E == pytest.approx(3750.0)
    assert nu == pytest.approx(0.25)


def test_tto_voigt_limit():
    f = fgm(2.0)
    assert f.R == 1.0
    y = np.linspace(-5, 5, 21)
    vc = f.ceramic_fraction(y)
    E, *_ = f.properties(y)
    assert np.allclose(E, 3000 * (1 - vc) + 5000 * vc)


def test_tto_voigt_gives_uniform_yield_strain():
    E, _, sy, _ = fgm(3.0).properties(np.linspace(-5, 5, 11))
    assert np.allclose(sy / E, 5.0 / 3000.0)


def test_tto_k_zero_is_pure_ceramic():
    E, nu, sy, Eh = fgm(0.0).properties(np.linspace(-5, 5, 7))
    assert np.allclose(E, 5000.0) and np.allclose(Eh, 5000.0)


def test_tto_top_face_is_ceramic():
    E, *_ = fgm(1.0).properties(5.0)
    assert E == pytest.approx(5000.0)


def test_tto_linear_composition_for_k_one():
    y = np.linspace(-5, 5, 11)
    assert np.allclose(fgm(1.0).ceramic_fraction(y), 0.5 + y / 10.0)


def test_tto_outside_strip():
    with pytest.raises(MaterialError):
        fgm(1.0).properties(5.5)


def test_tto_gradients_by_finite_differences():
    f = TtoFgm(5000, 0.2, 3000, 0.3, 5.0, 500.0, k=2.5, q=800.0, h=10.0)
    y, h = np.array([-3.0, 0.4, 4.1]), 1e-6
    dE, dnu = f.property_gradients(y)
    Ep, nup, *_ = f.properties(y + h)
    Em, num, *_ = f.properties(y - h)
    assert np.allclose(dE, (Ep - Em) / (2 * h), rtol=1e-6)
    assert np.allclose(dnu, (nup - num) / (2 * h), rtol=1e-6)


def test_tto_point_curve():
    c = tto_point(0.0, fgm(1.0, q=0.0))
    assert isinstance(c, BilinearCurve)
    assert c.E == pytest.approx(3750.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 20), st.one_of(st.just(math.inf), st.floats(0, 1e6)))
def test_tto_modulus_bounded_by_phases(k, q):
    E, *_ = fgm(k, q).properties(np.linspace(-5, 5, 201))
    assert np.all(E >= 3000 * (1 - 1e-12)) and np.all(E <= 5000 * (1 + 1e-12))


def test_effective_poisson_limits():
    assert effective_poisson(1.0, 1.0, 0.3) == pytest.approx(0.3)
    assert effective_poisson(1e-9, 1.0, 0.3) == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(MaterialError):
        effective_poisson(0.0, 1.0, 0.3)


def test_effective_shear_elastic():
    assert effective_shear(210600.0, 0.3) == pytest.approx(STEEL.G)


def test_sample_field_homogeneous_has_zero_gradients():
    mf = sample_field(STEEL, np.zeros((5, 2)))
    assert np.all(mf.E == 210600.0) and not mf.dE.any() and not mf.dnu.any()


def test_sample_field_depends_on_y_only():
    mf = sample_field(fgm(2.0), [[-2.0, 1.0], [2.0, 1.0]])
    assert mf.E[0] == mf.E[1]


def test_hardening_floor():
    mf = sample_field(STEEL, np.zeros((3, 2))).with_hardening_floor(0.01)
    assert np.allclose(mf.E_h, 2106.0)


def test_uniaxial_stress_vectorised_tie():
    eps_y = 24.0 / 210600.0
    assert uniaxial_stress(eps_y, 210600.0, 24.0, 0.0) == pytest.approx(24.0, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0, 0.05), st.floats(0, 0.05))
def test_uniaxial_stress_nondecreasing(alpha, e1, e2):
    c = BilinearCurve.from_alpha(1000.0, 0.3, 2.0, alpha)
    lo, hi = sorted((e1, e2))
    assert c.stress(hi) >= c.stress(lo)


def test_perfectly_plastic_at_twice_yield():
    assert STEEL.stress(2 * STEEL.eps_y) == pytest.approx(24.0)


@pytest.mark.parametrize("q", [0.0, 250.0, math.inf])
def test_metal_face_is_pure_metal(q):
    c = tto_point(-5.0, fgm(2.0, q))
    assert (c.E, c.nu, c.sigma_y, c.E_h) == pytest.approx((3000.0, 0.25, 5.0, 500.0))


def test_half_secant_modulus():
    E = 210600.0
    nu = effective_poisson(E / 2, E, 0.3)
    assert nu == pytest.approx(0.4, rel=1e-15)
    assert effective_shear(E / 2, nu) == pytest.approx(E / (4 * 1.4), rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(0.0, 0.49))
def test_effective_poisson_range(ratio, nu):
    v = effective_poisson(ratio * 100.0, 100.0, nu)
    assert nu - 1e-15 <= v < 0.5
