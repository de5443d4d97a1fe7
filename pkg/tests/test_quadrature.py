import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import beta

import oracles
from fracdensity.core import QuadratureSettings
from fracdensity.quadrature import (box_point_integral, cell_half_space_integral,
                                    face_integral, gauss01, half_space_constant, offset_table,
                                    omega_adaptive, omega_midpoint, quadrature_error_estimate,
                                    sharp_complement_constant, touching_omegas,
                                    unit_cell_perimeter)

SET = QuadratureSettings()


def test_gauss01_integrates_polynomials():
    x, w = gauss01(5)
    assert w.sum() == pytest.approx(1.0)
    assert np.dot(w, x ** 9) == pytest.approx(0.1)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_offset_table_1d_against_double_integral(s):
    tab = offset_table(1, s, 8, SET)
    assert tab[0] == 0.0
    for d in (1, 2, 3, 7):
        ref = oracles.pair_integral_1d(0.0, 1.0, float(d), d + 1.0, s)
        assert tab[d] == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("d", [(1, 0), (1, 1), (2, 1), (3, 0)])
def test_offset_table_2d_against_polar_oracle(d):
    tab = offset_table(2, 0.25, 5, SET)
    assert tab[d] == pytest.approx(oracles.tent_weight_2d(d, 0.25), rel=1e-7)
    assert tab[d] == tab[d[::-1]]


def test_touching_weights_2d_frozen():
    # face and corner neighbours at s = 1/4 (polar oracle values)
    w = touching_omegas(2, 0.25, SET.near_order, SET.near_depth)
    assert w[1] == pytest.approx(3.64708752, rel=1e-7)
    assert w[2] == pytest.approx(0.6760084, rel=1e-6)


def test_offset_table_rejects_large_s():
    with pytest.raises(ValueError):
        offset_table(1, 0.5, 4, SET)


@given(st.integers(8, 40), st.sampled_from([0.1, 0.25, 0.45]))
def test_far_weights_approach_point_kernel(d, s):
    tab = offset_table(1, s, d + 1, SET)
    assert tab[d] == pytest.approx(float(omega_midpoint([[d]], s)[0]), rel=2e-2)
    assert tab[d] < tab[d - 1]


def test_adaptive_matches_oracle_for_separated_offset():
    val = omega_adaptive(np.array([2.0]), 0.3, 8, 6)
    assert val == pytest.approx(oracles.pair_integral_1d(0, 1, 2, 3, 0.3), rel=1e-9)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_unit_cell_perimeter_1d_closed_form(s):
    assert unit_cell_perimeter(1, s) == pytest.approx(2.0 / (2 * s * (1 - 2 * s)), rel=1e-10)


def test_unit_cell_perimeter_2d_polar_oracle():
    s = 0.25

    def inner(th):
        c, sn = abs(math.cos(th)), abs(math.sin(th))
        rmax = 1.0 / max(c, sn)
        f = lambda r: r ** (-1 - 2 * s) * (1 - max(0, 1 - r * c) * max(0, 1 - r * sn))
        return integrate.quad(f, 0, rmax, epsabs=1e-13)[0] + rmax ** (-2 * s) / (2 * s)

    ref = 4 * integrate.quad(inner, 0, math.pi / 4, epsabs=1e-12, points=[])[0] * 2
    assert unit_cell_perimeter(2, s) == pytest.approx(ref, rel=1e-8)


def test_half_space_and_sharp_constants():
    s = 0.3
    assert half_space_constant(1, s) == pytest.approx(1 / (2 * s))
    # substituting t = y u separates the plane integral into a Beta function
    inner = integrate.quad(lambda u: (1 + u * u) ** (-1 - s), -np.inf, np.inf)[0]
    ref = inner * integrate.quad(lambda y: y ** (-1 - 2 * s), 1, np.inf)[0]
    assert half_space_constant(2, s) == pytest.approx(ref, rel=1e-7)
    assert ref == pytest.approx(beta(0.5, s + 0.5) / (2 * s), rel=1e-8)
    assert sharp_complement_constant(1, 0.25) == pytest.approx(2 * math.sqrt(2) / 0.5)
    assert sharp_complement_constant(2, s) == pytest.approx(2 * math.pi * math.pi ** s / (2 * s))


def test_box_point_integral_1d_closed_form():
    s = 0.25
    x = np.array([[2.0], [-0.5]])
    got = box_point_integral(x, [0.0], [1.0], s)
    ref = [(1.0 ** (-2 * s) - 2.0 ** (-2 * s)) / (2 * s), (0.5 ** (-2 * s) - 1.5 ** (-2 * s)) / (2 * s)]
    np.testing.assert_allclose(got, ref, rtol=1e-12)
    inside = box_point_integral(np.array([[0.5]]), [0.0], [1.0], s, exterior=True)
    assert inside[0] == pytest.approx(oracles.fraclap_chi_interval(0.5, s), rel=1e-12)


def test_box_point_integral_2d_against_dblquad():
    s = 0.2
    x = np.array([[2.0, 0.3]])
    ref = integrate.dblquad(lambda b, a: ((x[0, 0] - a) ** 2 + (x[0, 1] - b) ** 2) ** (-1 - s),
                            0, 1, 0, 1, epsabs=1e-13)[0]
    assert box_point_integral(x, [0.0, 0.0], [1.0, 1.0], s)[0] == pytest.approx(ref, rel=1e-8)


def test_face_integral_against_quad():
    s = 0.3
    x = np.array([[0.2, 0.1]])
    ref = integrate.quad(lambda t: (1.0 + (t - 0.1) ** 2) ** (-(2 + 2 * s) / 2), -1, 2)[0]
    assert face_integral(x, 0, 1.2, [0.0, -1.0], [0.0, 2.0], s)[0] == pytest.approx(ref, rel=1e-9)


def test_cell_half_space_integral_1d():
    s = 0.25
    got = cell_half_space_integral(np.array([0.0]), np.array([1.0]), 3.0, 1.0, 1, s)
    ref = integrate.quad(lambda x: (3.0 - x) ** (-2 * s) / (2 * s), 0, 1)[0]
    assert float(np.asarray(got).ravel()[0]) == pytest.approx(ref, rel=1e-12)


def test_error_estimate_is_small_and_shrinks_with_depth():
    fine = quadrature_error_estimate(1, 0.25, SET)
    coarse = quadrature_error_estimate(1, 0.25, QuadratureSettings(near_depth=1, far_order=1))
    assert set(fine) >= {"near_rel_error", "far_rel_error"}
    assert fine["near_rel_error"] < 1e-6
    assert max(coarse["near_rel_error"], coarse["far_rel_error"]) > \
        max(fine["near_rel_error"], fine["far_rel_error"])
