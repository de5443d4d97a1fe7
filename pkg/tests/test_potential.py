import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracdensity.potential import (check_wcond, find_grow_constant, from_callable,
                                   from_descriptor, grow_holds, load_csv, quartic)


def test_quartic_values():
    W = quartic()
    t = np.array([-1.0, 0.0, 0.5, 1.0])
    np.testing.assert_allclose(W.W(t), [0.0, 0.25, 0.140625, 0.0])
    np.testing.assert_allclose(W.dW(t), [0.0, 0.0, -0.375, 0.0])
    np.testing.assert_allclose(W.ddW([-1.0, 1.0]), [2.0, 2.0])


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_stable_difference_matches_subtraction(a, b):
    W = quartic()
    assert W.diff(a, b) == pytest.approx(W.W(a) - W.W(b), abs=1e-15)


def test_wcond_accepts_quartic_and_rejects_defects():
    assert check_wcond(quartic()).passed
    flat = from_callable(lambda t: (1 - t * t) ** 4)
    rep = check_wcond(flat)
    assert not rep.passed and rep.worst.startswith("W''")
    shifted = from_callable(lambda t: (1 - t * t) ** 2 + 0.1)
    assert check_wcond(shifted).worst.startswith("W(")
    with pytest.raises(ValueError, match="undefined"):
        check_wcond(from_callable(np.sqrt))


def test_grow_constant_of_quartic():
    W = quartic()
    c = find_grow_constant(W)
    assert c == 0.5
    assert grow_holds(W, c) and not grow_holds(W, 2 * c)
    # a deep well breaks the second inequality at the top ladder value
    assert find_grow_constant(W.scaled(40.0)) < c


def test_grow_constant_degenerate_well():
    with pytest.raises(ValueError, match="degenerate"):
        find_grow_constant(from_callable(lambda t: (1 + t) ** 6 * (1 - t) ** 2))


def test_csv_round_trip(tmp_path):
    t = np.linspace(-1, 1, 401)
    path = tmp_path / "w.csv"
    path.write_text("t,W\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(t, quartic().W(t))))
    W = load_csv(path)
    x = np.linspace(-0.95, 0.95, 17)
    np.testing.assert_allclose(W.W(x), quartic().W(x), atol=1e-7)
    # the interpolant only reproduces W'(+-1) = 0 to the sampling accuracy
    assert check_wcond(W, tol=1e-4).passed
    assert from_descriptor({"csv": str(path), "scale": 2.0}).W(0.0) == pytest.approx(0.5)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n0.5,1\n")
    with pytest.raises(ValueError):
        load_csv(bad)


def test_descriptors():
    assert from_descriptor(None).descriptor == "quartic"
    assert from_descriptor("quartic").W(0.0) == 0.25
    with pytest.raises(ValueError):
        from_descriptor("sextic")
