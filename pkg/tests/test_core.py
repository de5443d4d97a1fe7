import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracdensity.core import (ExteriorData, GridFunction, GridGeometry, ModelParams,
                              QuadratureSettings, Thresholds, ball_mask, box_mask,
                              make_indicator, pointwise_min, sphere_area, unit_ball_volume)
from fracdensity.levelset import level_measures


def test_geometry_basic_quantities():
    g = GridGeometry((1.0, -1.0), 2.0, 8)
    assert g.n == 2 and g.m == 8 and g.num_cells == 64
    assert g.h == 0.5 and g.cell_volume == 0.25 and g.volume == 16.0
    np.testing.assert_array_equal(g.lo, [-1.0, -3.0])
    np.testing.assert_array_equal(g.hi, [3.0, 1.0])
    c = g.centers()
    assert c.shape == (64, 2)
    np.testing.assert_allclose(c[0], [-0.75, -2.75])
    np.testing.assert_allclose(c.mean(axis=0), [1.0, -1.0])


def test_geometry_rejects_bad_input():
    with pytest.raises(ValueError):
        GridGeometry((0.0,), -1.0, 4)
    with pytest.raises(ValueError):
        GridGeometry((0.0,) * 4, 1.0, 4)
    with pytest.raises(ValueError):
        GridGeometry((0.0, 0.0), (1.0, 2.0), 4)
    with pytest.raises(ValueError):
        GridGeometry((0.0,), 1.0, 0)


@given(st.integers(1, 3), st.integers(1, 7), st.data())
def test_flat_index_round_trip(n, m, data):
    g = GridGeometry((0.0,) * n, 1.0, m)
    k = data.draw(st.integers(0, g.num_cells - 1))
    assert g.flat_index(g.multi_index()[k])[0] == k
    assert g.locate(g.centers()[k]) == k


def test_locate_outside_box():
    g = GridGeometry((0.0,), 1.0, 4)
    with pytest.raises(IndexError):
        g.locate([1.5])


def test_model_params_validation():
    assert ModelParams(2, 0.4).sobolev_exponent == pytest.approx(2 * 2 / (2 - 0.8))
    assert ModelParams(1, 0.25).extrapolated_regime
    for n, s in ((0, 0.2), (1, 0.0), (1, 1.0), (1, 0.6), (4, 0.2)):
        with pytest.raises(ValueError):
            ModelParams(n, s)
    with pytest.raises(ValueError, match="density subcommands require"):
        ModelParams(2, 0.6).require_density_range()
    p = ModelParams(1, 0.25).with_quadrature(near_depth=2)
    assert p.quadrature.near_depth == 2
    with pytest.raises(ValueError):
        QuadratureSettings(separation=1.0)


def test_exterior_evaluate_and_round_trip():
    pts = np.array([[-2.0, 5.0], [3.0, 0.0]])
    hs = ExteriorData.half_space((2.0, 0.0))
    np.testing.assert_array_equal(hs.evaluate(pts), [-1.0, 1.0])
    assert hs.direction == (1.0, 0.0)
    for ext in (ExteriorData.zero(), ExteriorData.constant(-1.0), hs,
                ExteriorData.from_dict({"kind": "radial", "name": "tanh_well"})):
        back = ExteriorData.from_dict(ext.to_dict())
        assert back.to_dict() == ext.to_dict()
    rad = ExteriorData.from_dict({"kind": "radial", "name": "tanh_well"})
    assert rad.limit == pytest.approx(1.0)
    with pytest.raises(ValueError, match="divergent"):
        ExteriorData.radial(lambda r: np.log(r))
    with pytest.raises(ValueError):
        ExteriorData.half_space((0.0, 0.0))


def test_exterior_min():
    a, b = ExteriorData.constant(1.0), ExteriorData.constant(-1.0)
    assert a.min(b) == b
    m = ExteriorData.from_dict({"kind": "radial", "name": "tanh_well"}).min(ExteriorData.zero())
    np.testing.assert_allclose(m.evaluate([[0.0], [5.0]]), [np.tanh(-1.0), 0.0])
    with pytest.raises(ValueError):
        ExteriorData.half_space((1.0,)).min(a)


def test_grid_function_validation_and_io(tmp_path):
    g = GridGeometry((0.0,), 1.0, 4)
    with pytest.raises(ValueError):
        GridFunction(g, [0.0] * 3)
    with pytest.raises(ValueError):
        GridFunction(g, [0.0, 0.0, 2.0, 0.0])
    f = GridFunction(g, [-1.0, -0.5, 0.5, 1.0], ExteriorData.half_space((1.0,)))
    with pytest.raises(ValueError):
        f.values[0] = 3.0
    path = tmp_path / "f.json"
    f.save(path)
    assert json.loads(path.read_text())["format"] == "fracdensity.gridfunction/1"
    back = GridFunction.load(path)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.exterior == f.exterior and back.geometry.same_as(g)


def test_indicator_support_matches_level_measures():
    g = GridGeometry((0.0, 0.0), 1.0, 8)
    cells = [0, 5, 9, 63]
    chi = make_indicator(cells, g)
    prof = level_measures(chi)
    assert chi.support_measure() == prof.support == 4 * g.cell_volume
    assert make_indicator([[0, 0], [7, 7]], g).support_measure() == 2 * g.cell_volume
    with pytest.raises(IndexError):
        make_indicator([64], g)


def test_scaled_dilated_and_pointwise_min():
    g = GridGeometry((0.0,), 1.0, 4)
    f = make_indicator([1, 2], g)
    assert f.scaled(-3.0).range == (-3.0, 0.0)
    d = f.dilated(2.0)
    assert d.geometry.h == 2 * g.h
    u = GridFunction(g, [0.1, 0.2, -0.3, 0.4])
    w = GridFunction(g, [0.0, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(pointwise_min(u, w).values, [0.0, 0.2, -0.3, 0.4])


def test_masks_and_constants():
    g = GridGeometry((0.0, 0.0), 1.0, 4)
    assert ball_mask(g, 0.5).sum() == 4
    assert box_mask(g, [0, 0], [1, 1]).sum() == 4
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_thresholds():
    t = Thresholds(0.2, -0.3, 0.5)
    assert t.theta_low == -0.5 and t.theta_high == 0.2
    with pytest.raises(ValueError):
        Thresholds(1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        Thresholds(0.0, 0.0, 2.0)
