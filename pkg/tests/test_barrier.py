import math

import numpy as np
import pytest

from fracdensity.barrier import (BarrierParams, barrier_geometry, barrier_sweep, build_barrier,
                                 choose_cb, expected_comparability_constant, profile, verify_barrier)
from fracdensity.core import ExteriorData, ModelParams

P1 = ModelParams(1, 0.25)


def test_profile_values():
    p = BarrierParams(4.0, 0.125)
    r = np.array([0.0, 3.5, 3.9, 4.0, 7.0])
    expected = [2 / math.sqrt(5), 2 / math.sqrt(1.5), 2 / math.sqrt(1.1), 2.0, 2.0]
    np.testing.assert_allclose(profile(p, r, 0.25), expected)


def test_parameter_validation():
    for kw in ({"R": 0.5, "tau": 1}, {"R": 2, "tau": 0}, {"R": 2, "tau": 1, "C_b": 1.0},
               {"R": 2, "tau": 1, "clamp": 3.0}):
        with pytest.raises(ValueError):
            BarrierParams(**kw)
    with pytest.raises(ValueError):
        barrier_geometry(2.0, 0.3, 1)


def test_barrier_is_radial_in_2d():
    p2 = ModelParams(2, 0.25)
    g = barrier_geometry(4.0, 0.5, 2)
    w = build_barrier(BarrierParams(4.0, 0.125), g, 0.25)
    vals = w.values.reshape(16, 16)
    np.testing.assert_array_equal(vals, vals.T)
    np.testing.assert_array_equal(vals, vals[::-1, :])
    rep = verify_barrier(w, BarrierParams(4.0, 0.125), p2)
    assert rep.comparability_constant == pytest.approx(
        expected_comparability_constant(BarrierParams(4.0, 0.125), g, 0.25), rel=1e-12)


def test_barrier_must_fit_and_be_one_outside():
    g = barrier_geometry(2.0, 0.25, 1)
    with pytest.raises(ValueError, match="fit"):
        build_barrier(BarrierParams(3.0, 0.1), g, 0.25)
    g = barrier_geometry(3.0, 0.25, 1)
    w = build_barrier(BarrierParams(2.0, 0.1), g, 0.25)
    with pytest.raises(ValueError, match="outside"):
        verify_barrier(w.with_values(np.zeros(24)), BarrierParams(2.0, 0.1), P1)
    bad = type(w)(g, w.values, ExteriorData.zero())
    with pytest.raises(ValueError):
        verify_barrier(bad, BarrierParams(2.0, 0.1), P1)


def test_margins_of_floor_profile():
    out = barrier_sweep(P1, [4.0, 8.0, 16.0], 0.125, 0.25)
    assert out["C_b"] == 2.0 and out["comparability_exact"]
    assert out["nonincreasing"]
    assert all(not r.degenerate for r in out["reports"])
    # the profile stays far from the constant, so the one-sided bound is violated at the centre
    assert out["passing_radii"] == [] and out["R0"] is None
    for r in out["reports"]:
        assert r.range_constant >= 1.0 - 1e-12


def test_degenerate_profile_is_flagged():
    p = BarrierParams(4.0, 0.125, C_b=64.0)
    w = build_barrier(p, barrier_geometry(4.0, 0.25, 1), 0.25)
    rep = verify_barrier(w, p, P1)
    assert rep.degenerate and rep.one_sided_pass and rep.worst_margin == pytest.approx(-0.25)
    out = barrier_sweep(P1, [2.0, 4.0], 0.125, 0.25, C_b=64.0)
    assert out["passing_radii"] == [2.0, 4.0] and out["nondegenerate_passing_radii"] == []


def test_choose_cb_rules():
    assert choose_cb(P1, 0.125, [4.0], 0.25) == 2.0
    cb = choose_cb(P1, 0.125, [2.0, 4.0], 0.25, rule="largest_radius")
    assert cb in (2.0 ** j for j in range(1, 11))
    with pytest.raises(ValueError):
        choose_cb(P1, 0.125, [4.0], 0.25, rule="median")
