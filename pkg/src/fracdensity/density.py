"""Volume and defect profiles of minimizers, and the density inequalities.

``V(R) = |{u > theta} ∩ B_R|`` and ``A(R) = c ∫_{B_R ∩ {w < u <= theta}} (u-w)^2``
are exact cell sums in the piecewise-constant model (ball membership by cell
centre).  Empirical constants are reported, never compared with fixed
values: the underlying results only assert that such constants exist.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ExteriorData, GridFunction, GridGeometry, ModelParams, unit_ball_volume
from .kernel import total_energy
from .minimize import MinimizeOptions, MinimizeReport, minimize
from .potential import Potential


def _radii(R):
    R = np.asarray(R, dtype=float).reshape(-1)
    if np.any(R <= 0):
        raise ValueError("radii must be positive")
    if np.any(np.diff(R) <= 0):
        raise ValueError("radii must be strictly increasing")
    return R


def _distances(geometry: GridGeometry, center=None):
    c = np.zeros(geometry.n) if center is None else np.asarray(center, dtype=float)
    return np.linalg.norm(geometry.centers() - c, axis=1)


def _check_inside(geometry: GridGeometry, R, center=None):
    c = np.zeros(geometry.n) if center is None else np.asarray(center, dtype=float)
    room = float(np.min(np.minimum(c - geometry.lo, geometry.hi - c)))
    if R[-1] > room * (1 + 1e-12):
        raise ValueError(f"ball of radius {R[-1]:g} exceeds the grid box")


@dataclass
class VolumeTable:
    R: np.ndarray
    V: np.ndarray
    boundary_error: np.ndarray

    def to_rows(self):
        return [(float(r), float(v), float(e)) for r, v, e in
                zip(self.R, self.V, self.boundary_error)]


def volume_profile(u: GridFunction, theta: float, R, center=None) -> VolumeTable:
    """``V(R)`` for each radius, with the volume of cells straddling the sphere."""
    R = _radii(R)
    _check_inside(u.geometry, R, center)
    d = _distances(u.geometry, center)
    hv = u.geometry.cell_volume
    above = u.values > theta
    order = np.argsort(d, kind="stable")
    ds, ab = d[order], above[order]
    cum = np.concatenate([[0], np.cumsum(ab)])
    tol = 1e-12 * max(1.0, float(R[-1]))
    V = hv * cum[np.searchsorted(ds, R + tol, side="right")]
    reach = 0.5 * u.geometry.h * math.sqrt(u.geometry.n)
    err = np.array([hv * np.count_nonzero(np.abs(d - r) <= reach) for r in R])
    return VolumeTable(R, V, err)


def defect_profile(u: GridFunction, w: GridFunction, theta_star: float, c_grow: float, R,
                   center=None) -> np.ndarray:
    """``A(R) = c_grow * sum over cells in B_R with w < u <= theta_star of (u-w)^2 h^n``."""
    if not u.geometry.same_as(w.geometry):
        raise ValueError("geometry mismatch between u and the barrier")
    R = _radii(R)
    _check_inside(u.geometry, R, center)
    d = _distances(u.geometry, center)
    sel = (w.values < u.values) & (u.values <= theta_star)
    contrib = np.where(sel, (u.values - w.values) ** 2, 0.0)
    tol = 1e-12 * max(1.0, float(R[-1]))
    return np.array([c_grow * u.geometry.cell_volume * math.fsum(contrib[d <= r + tol])
                     for r in R])


def _with_origin(R, V):
    R = np.asarray(R, dtype=float)
    V = np.asarray(V, dtype=float)
    if R[0] > 0:
        R, V = np.concatenate([[0.0], R]), np.concatenate([[0.0], V])
    return R, V


def check_la8(R, V, n: int, s: float, K: float) -> dict:
    """Ratios ``RHS(R) / V(R-K)^{(n-2s)/n}`` with ``RHS = int_0^R (R+1-t)^{-2s} dV(t)``.

    ``V`` is interpolated linearly between table radii (and ``V(0) = 0``);
    the kernel is integrated exactly on every interval, so linear ``V``
    gives the closed-form value.  Radii where ``V(R-K) = 0`` are undefined
    and excluded from the minimum.
    """
    if not s < 0.5:
        raise ValueError("this inequality is stated for s < 1/2")
    Rg, Vg = _with_origin(R, V)
    if np.any(np.diff(Vg) < 0):
        raise ValueError("V must be nondecreasing")
    e = 1.0 - 2.0 * s
    ratios, rhs_all = [], []
    for j in range(1, len(Rg)):
        Rj = Rg[j]
        t0, t1 = Rg[:j], Rg[1:j + 1]
        slope = (Vg[1:j + 1] - Vg[:j]) / (t1 - t0)
        rhs = math.fsum(slope * ((Rj + 1 - t0) ** e - (Rj + 1 - t1) ** e) / e)
        rhs_all.append(rhs)
        if Rj - K <= 0:
            ratios.append(math.nan)
            continue
        lhs = float(np.interp(Rj - K, Rg, Vg)) ** ((n - 2.0 * s) / n)
        ratios.append(rhs / lhs if lhs > 0 else math.nan)
    ratios = np.array(ratios)
    valid = ratios[np.isfinite(ratios)]
    return {"R": Rg[1:].tolist(), "rhs": rhs_all, "ratio": ratios.tolist(),
            "c3": float(valid.min()) if valid.size else math.nan}


def check_doubling(R, V, n: int, s: float) -> dict:
    """Ratios ``r^{2s} V(r)^{(n-2s)/n} / V(2r)`` for table radii with ``2r`` in range.

    ``V(2r)`` is interpolated linearly.  Radii with ``V(2r) = 0`` are flagged.
    """
    Rg, Vg = _with_origin(R, V)
    R = np.asarray(R, dtype=float)
    V = np.asarray(V, dtype=float)
    use = 2 * R <= Rg[-1] * (1 + 1e-12)
    rs, ratios, flagged = [], [], []
    for r, v in zip(R[use], V[use]):
        v2 = float(np.interp(2 * r, Rg, Vg))
        rs.append(float(r))
        if v2 == 0:
            flagged.append(float(r))
            ratios.append(math.nan)
        else:
            ratios.append(r ** (2 * s) * v ** ((n - 2.0 * s) / n) / v2)
    arr = np.array(ratios)
    valid = arr[np.isfinite(arr)]
    return {"r": rs, "ratio": ratios, "flagged": flagged,
            "C": float(valid.max()) if valid.size else math.nan,
            "median": float(np.median(valid)) if valid.size else math.nan}


def density_theorem_check(u: GridFunction, theta1: float, theta2: float, R, R_min: float = 0.0,
                          floor: float = 0.0) -> dict:
    """Check ``u(0) > theta1`` and report ``min V(R)/R^n`` with threshold ``theta2``."""
    cell = u.geometry.locate(np.zeros(u.n))
    u0 = float(u.values[cell])
    out = {"u0": u0, "hypothesis": u0 > theta1, "theta1": theta1, "theta2": theta2,
           "unit_ball_volume": unit_ball_volume(u.n)}
    if not u0 > theta1:
        out.update(skipped=True, reason="u(0) <= theta1: the statement is vacuous")
        return out
    tab = volume_profile(u, theta2, R)
    ratio = tab.V / tab.R ** u.n
    keep = tab.R >= R_min
    low = tab.R[keep & (ratio < floor)]
    out.update(skipped=False, R=tab.R.tolist(), V=tab.V.tolist(), ratio=ratio.tolist(),
               min_ratio=float(ratio[keep].min()) if np.any(keep) else math.nan,
               R_bar=float(low.max()) if low.size else None)
    return out


def layer_minimizers(params: ModelParams, W: Potential, radii, h: float,
                     opts: MinimizeOptions = MinimizeOptions(),
                     exterior: ExteriorData | None = None) -> list:
    """Minimizers on the boxes ``[-R, R]^n`` (cell width ``h``) with half-space data."""
    params.require_density_range()
    ext = exterior if exterior is not None else \
        ExteriorData.half_space((1.0,) + (0.0,) * (params.n - 1))
    out = []
    for R in radii:
        m = int(round(2 * R / h))
        if not math.isclose(m * h, 2 * R):
            raise ValueError(f"radius {R} is not a multiple of h/2")
        geom = GridGeometry((0.0,) * params.n, float(R), m)
        out.append(minimize(params, geom, None, ext, W, opts))
    return out


def energy_growth_check(params: ModelParams, W: Potential, radii, h: float,
                        opts: MinimizeOptions = MinimizeOptions(),
                        exterior: ExteriorData | None = None, reports=None) -> dict:
    """Least-squares slope of ``log E(u_R; B_R)`` against ``log R``.

    Raises
    ------
    RuntimeError
        If the solver does not converge at some radius.
    """
    radii = list(radii)
    if len(radii) < 4:
        raise ValueError("need at least four radii")
    if reports is None:
        reports = layer_minimizers(params, W, radii, h, opts, exterior)
    for R, rep in zip(radii, reports):
        if not rep.converged:
            raise RuntimeError(f"solver did not converge at R = {R} (residual {rep.residual:.3g})")
    E = np.array([total_energy(r.solution, None, W, params).total for r in reports])
    out = {"R": [float(r) for r in radii], "energy": E.tolist(), "target": params.n - 2 * params.s}
    if np.any(E <= 0):
        out.update(degenerate=True, slope=math.nan, residual=math.nan,
                   reason="zero energy at some radius; the power-law fit is undefined")
        return out
    x, y = np.log(radii), np.log(E)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    out.update(degenerate=False, slope=float(coef[0]), intercept=float(coef[1]),
               residual=float(np.sqrt(res[0] / len(x))) if res.size else 0.0)
    return out


@dataclass
class DensityTables:
    """Everything the density pipeline measures for one sweep."""

    R: list
    V: list
    A: list = field(default_factory=list)
    K: float = 0.0
    c3: float = math.nan
    C: float = math.nan
    cbar: float = math.nan
    Rbar: float | None = None
    exponent: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)
