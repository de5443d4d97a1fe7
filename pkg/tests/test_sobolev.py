import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fracdensity.core import ExteriorData, GridFunction, GridGeometry, ModelParams
from fracdensity.sobolev import (LINK_NAMES, cut_levels, cutting_sequence,
                                 estimate_best_constant, lp_norm_sq, random_step_function,
                                 sobolev_check)

P1 = ModelParams(1, 0.25)


def chi_unit(m=1024):
    return GridFunction(GridGeometry((0.5,), 0.5, m), np.ones(m))


def test_chain_values_of_interval_indicator():
    rep = sobolev_check(chi_unit(), P1)
    c = 2 * math.sqrt(2) / 0.5
    expected = (1.0, 4 / math.sqrt(15), 4 / 3, 16 / 3,
                64 / c * oracles.gagliardo_chi_interval(0.25))
    np.testing.assert_allclose(rep.values(), expected, rtol=1e-6)
    assert rep.passed and all(rep.links) and len(rep.links) == len(LINK_NAMES) - 1
    assert rep.proof_constant == pytest.approx(64 / c)


def test_lp_norm():
    g = GridGeometry((1.0,), 1.0, 2)
    f = GridFunction(g, [1.0, -2.0], range=(-2, 2))
    assert lp_norm_sq(f, p=2) == pytest.approx(5.0)
    assert lp_norm_sq(f, s=0.25) == pytest.approx(17.0 ** 0.5)
    with pytest.raises(ValueError):
        lp_norm_sq(f)


def test_cut_levels():
    g = GridGeometry((1.0,), 1.0, 2)
    f = GridFunction(g, [5.0, -0.5], range=(-8, 8))
    c = cut_levels(f, 2.0)
    assert c.values.tolist() == [2.0, -0.5] and c.range == (-2.0, 2.0)
    with pytest.raises(ValueError):
        cut_levels(f, 0.0)
    reps = cutting_sequence(f, P1, levels=(4, 1))
    assert len(reps) == 2 and reps[0].lp_norm_sq < reps[1].lp_norm_sq


def test_rejects_non_compact_data():
    g = GridGeometry((0.0,), 1.0, 4)
    with pytest.raises(ValueError):
        sobolev_check(GridFunction(g, np.zeros(4), ExteriorData.constant(1.0)), P1)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1), st.sampled_from([(1, 0.1), (1, 0.4), (2, 0.25)]))
def test_chain_holds_for_random_step_functions(seed, ns):
    n, s = ns
    g = GridGeometry((0.0,) * n, 1.0, 32 if n == 1 else 8)
    f = random_step_function(g, np.random.default_rng(seed))
    rep = sobolev_check(f, ModelParams(n, s))
    assert rep.passed, rep.to_dict()
    assert rep.implied_constant <= rep.proof_constant


def test_best_constant_estimate_is_below_proof_constant():
    g = GridGeometry((0.0,), 1.0, 32)
    out = estimate_best_constant(lambda rng: random_step_function(g, rng), P1, 10)
    assert 0 < out["best_constant"] <= out["proof_constant"]
    assert len(out["ratios"]) == 10
    with pytest.raises(ValueError):
        estimate_best_constant(lambda rng: None, P1, 0)
