"""Radial barrier candidates and numerical checks of their two properties.

The candidate is the clamped power profile

    1 + w(x) = min(clamp, C_b (R + 1 - |x|)^(-2s))   for |x| < R,
    w(x) = 1                                          for |x| >= R,

which has the two-sided comparability with ``(R + 1 - |x|)^(-2s)`` built
in.  The one-sided bound ``-(-Delta)^s w <= tau (1 + w)`` is then tested
cell by cell with the raw kernel.

A profile that is clamped in every cell is the constant ``w = 1``; it
satisfies the one-sided bound trivially and is flagged as degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ExteriorData, GridFunction, GridGeometry, ModelParams
from .kernel import error_model, frac_laplacian_field

CB_LADDER = tuple(2.0 ** j for j in range(1, 11))


@dataclass(frozen=True)
class BarrierParams:
    """Radius ``R``, slack ``tau``, profile constant ``C_b`` and clamp for ``1 + w``."""

    R: float
    tau: float
    C_b: float = 2.0
    clamp: float = 2.0

    def __post_init__(self):
        if not self.R >= 1:
            raise ValueError("R must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.C_b > 1:
            raise ValueError("C_b must exceed 1")
        if not 0 < self.clamp <= 2:
            raise ValueError("the clamp for 1 + w must lie in (0, 2]")


def barrier_geometry(R: float, h: float, n: int) -> GridGeometry:
    """The box ``[-R, R]^n`` with cell width ``h`` (``2R/h`` must be an integer)."""
    m = int(round(2 * R / h))
    if not math.isclose(m * h, 2 * R):
        raise ValueError("2R must be a multiple of h")
    return GridGeometry((0.0,) * n, float(R), m)


def profile(p: BarrierParams, r, s: float) -> np.ndarray:
    """``1 + w`` at radii ``r``."""
    r = np.asarray(r, dtype=float)
    inner = np.minimum(p.clamp, p.C_b * np.maximum(p.R + 1.0 - r, 1.0) ** (-2.0 * s))
    return np.where(r < p.R, inner, 2.0)


def build_barrier(p: BarrierParams, geometry: GridGeometry, s: float) -> GridFunction:
    """Barrier values at the cell centres; exterior data is the constant 1."""
    room = float(np.min(np.minimum(-geometry.lo, geometry.hi)))
    if p.R > room * (1 + 1e-12):
        raise ValueError("the ball B_R does not fit in the grid box")
    r = np.linalg.norm(geometry.centers(), axis=1)
    w = profile(p, r, s) - 1.0
    return GridFunction(geometry, np.clip(w, -1.0, 1.0), ExteriorData.constant(1.0))


@dataclass
class BarrierReport:
    R: float
    worst_margin: float
    one_sided_pass: bool
    comparability_constant: float
    range_constant: float
    degenerate: bool
    tolerance: float
    radius: np.ndarray
    margin: np.ndarray

    def to_dict(self) -> dict:
        return {"R": self.R, "worst_margin": self.worst_margin, "one_sided_pass": self.one_sided_pass,
                "comparability_constant": self.comparability_constant, "range_constant": self.range_constant,
                "degenerate": self.degenerate, "tolerance": self.tolerance}


def verify_barrier(w: GridFunction, p: BarrierParams, params: ModelParams,
                   tol: float = 1e-8) -> BarrierReport:
    """Check both barrier properties for ``w`` on the cells inside ``B_R``.

    The first property is checked through the margin
    ``-(-Delta)^s w - tau (1 + w)`` (violation if above the tolerance, which
    adds the relative quadrature error bound to ``tol``).  For the second,
    the smallest ``C`` making both comparability bounds hold is reported;
    ``range_constant`` is the largest ``C`` with ``1 + w >= C R^(-2s)``.
    """
    s = params.s
    r = np.linalg.norm(w.geometry.centers(), axis=1)
    out = r >= p.R
    if w.exterior.kind != "constant" or w.exterior.value != 1.0 or \
            np.any(w.values[out] != 1.0):
        raise ValueError("w must equal 1 outside B_R")
    inside = np.flatnonzero(~out)
    lap = frac_laplacian_field(w, params, inside)
    one_w = 1.0 + w.values[inside]
    margin = -lap - p.tau * one_w
    slack = tol + error_model(params)["relative_bound"] * float(np.max(np.abs(lap), initial=0.0))
    rho = p.R + 1.0 - r[inside]
    ratio = one_w * rho ** (2.0 * s)
    comp = float(max(ratio.max(), (1.0 / ratio).max()))
    worst = float(margin.max())
    return BarrierReport(float(p.R), worst, bool(worst <= slack), comp,
                         float(one_w.min() * p.R ** (2.0 * s)),
                         bool(np.all(w.values == 1.0)), slack, r[inside], margin)


def expected_comparability_constant(p: BarrierParams, geometry: GridGeometry, s: float) -> float:
    """Comparability constant implied by the construction alone."""
    r = np.linalg.norm(geometry.centers(), axis=1)
    rho = p.R + 1.0 - r[r < p.R]
    upper = np.minimum(p.C_b, p.clamp * rho ** (2.0 * s))
    lower = np.maximum(1.0 / p.C_b, 1.0 / (p.clamp * rho ** (2.0 * s)))
    return float(max(upper.max(), lower.max()))


def choose_cb(params: ModelParams, tau: float, radii, h: float, rule: str = "floor") -> float:
    """Pick ``C_b`` from the ladder 2, 4, 8, ...

    ``"floor"`` (default) takes the smallest value that keeps ``w``
    continuous across the sphere and the lower comparability bound with
    constant 1, which is ``C_b = 2``.  ``"largest_radius"`` takes the
    smallest value for which the one-sided bound holds at the largest radius
    of the sweep (such a barrier may be degenerate; check the report).
    """
    if rule == "floor":
        return CB_LADDER[0]
    if rule != "largest_radius":
        raise ValueError(f"unknown rule {rule!r}")
    R = max(radii)
    for cb in CB_LADDER:
        p = BarrierParams(R, tau, cb)
        g = barrier_geometry(R, h, params.n)
        if verify_barrier(build_barrier(p, g, params.s), p, params).one_sided_pass:
            return cb
    raise ValueError("no ladder value of C_b satisfies the bound at the largest radius")


def barrier_sweep(params: ModelParams, radii, tau: float, h: float, C_b: float | None = None,
                  rule: str = "floor") -> dict:
    """Build and verify barriers for several radii with one ``C_b``."""
    radii = sorted(float(R) for R in radii)
    cb = choose_cb(params, tau, radii, h, rule) if C_b is None else float(C_b)
    reports = []
    for R in radii:
        p = BarrierParams(R, tau, cb)
        g = barrier_geometry(R, h, params.n)
        w = build_barrier(p, g, params.s)
        rep = verify_barrier(w, p, params)
        rep.comparability_expected = expected_comparability_constant(p, g, params.s)
        reports.append(rep)
    worst = [r.worst_margin for r in reports]
    passing = [r.R for r in reports if r.one_sided_pass]
    return {
        "C_b": cb, "tau": tau, "reports": reports, "worst_margins": worst,
        "nonincreasing": bool(all(b <= a + 1e-12 for a, b in zip(worst, worst[1:]))),
        "passing_radii": passing,
        "nondegenerate_passing_radii": [r.R for r in reports if r.one_sided_pass and not r.degenerate],
        "R0": next((R for i, R in enumerate(radii)
                    if all(r.one_sided_pass for r in reports[i:])), None),
        "comparability_exact": bool(all(math.isclose(r.comparability_constant, r.comparability_expected, rel_tol=1e-12)
                               for r in reports)),
    }
