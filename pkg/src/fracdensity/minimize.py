"""Projected-gradient minimization of the nonlocal Allen-Cahn energy.

Cells of the grid outside the minimization region keep the exterior data
(sampled at cell centres) and, together with the analytic exterior beyond
the box, form the boundary condition.

Energy changes along trial steps are computed from the exact quadratic
structure of the interaction energy,

    E(u + d) - E(u) = <grad K(u), d> + K_0(d) + h^n sum_i [W(u_i + d_i) - W(u_i)],

where ``K_0`` is the interaction energy of ``d`` with zero exterior data.
This avoids the cancellation of subtracting two large energies, so the
monotonicity of the trace is meaningful all the way down to tight
tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ExteriorData, GridFunction, GridGeometry, ModelParams
from .kernel import (energy_gradient, frac_laplacian_field, get_operator, region_mask,
                     total_energy)
from .potential import Potential


@dataclass(frozen=True)
class MinimizeOptions:
    """Solver settings.

    Attributes
    ----------
    max_iters : int
    tol : float
        Stop when the largest projected residual (per unit volume) is below this.
    armijo : float
        Sufficient-decrease parameter of the backtracking line search.
    shrink : float
        Step reduction factor per backtracking trial.
    min_step : float
        Smallest relative step tried before declaring convergence at machine precision.
    bounds : tuple
        Projection bounds, ``(-1, 1)``.
    init : optional
        ``None`` (natural extension of the exterior data), a float, an array
        of cell values, a GridFunction, or a path to a saved GridFunction.
    checkpoint_every : int
        Save the iterate every this many iterations (0 disables).
    checkpoint_path : str, optional
    """

    max_iters: int = 20000
    tol: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    min_step: float = 1e-14
    bounds: tuple = (-1.0, 1.0)
    init: object = None
    checkpoint_every: int = 0
    checkpoint_path: Optional[str] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.shrink < 1 or not 0 < self.armijo < 1:
            raise ValueError("line-search parameters must lie in (0, 1)")


@dataclass
class MinimizeReport:
    """Outcome of :func:`minimize`.

    ``label`` records that the result is a critical point found by descent,
    which need not be a global minimizer.
    """

    solution: GridFunction
    energy_trace: list
    residual: float
    iterations: int
    converged: bool
    stalled: bool = False
    slack: float = 0.0
    region: np.ndarray = field(default=None, repr=False)
    label: str = "computed minimizer (local)"

    def to_dict(self) -> dict:
        return {"label": self.label, "iterations": self.iterations, "converged": self.converged,
                "stalled_at_machine_precision": self.stalled, "residual": self.residual,
                "slack": self.slack, "energy": self.energy_trace[-1],
                "energy_trace_length": len(self.energy_trace)}


def el_residual(u: GridFunction, W: Potential, params: ModelParams, region=None,
                bounds=(-1.0, 1.0)):
    """Euler-Lagrange residual ``2 (-Delta)^s u + W'(u)`` per cell of the region.

    The factor 2 makes the residual equal to the energy gradient divided by
    the cell volume (the kernel carries no normalizing constant).

    Returns
    -------
    raw, projected : ndarray
        Full-length arrays (zero outside the region).  ``projected`` zeroes
        the components pointing out of the box constraint at active bounds.
    """
    if np.any(np.abs(u.values) > 1.0):
        raise ValueError("u must take values in [-1, 1]")
    mask = region_mask(u.geometry, region)
    rows = np.flatnonzero(mask)
    raw = np.zeros(u.geometry.num_cells)
    raw[rows] = 2.0 * frac_laplacian_field(u, params, rows) + W.dW(u.values[rows])
    return raw, project(raw, u.values, mask, bounds)


def project(g, u, mask, bounds=(-1.0, 1.0)):
    lo, hi = bounds
    p = np.where(mask, g, 0.0)
    p = np.where((u <= lo) & (p > 0), 0.0, p)
    p = np.where((u >= hi) & (p < 0), 0.0, p)
    return p


def _initial_values(geometry: GridGeometry, exterior: ExteriorData, init, bounds):
    boundary = np.clip(exterior.evaluate(geometry.centers()), *bounds)
    if init is None:
        return boundary
    if isinstance(init, str):
        init = GridFunction.load(init)
    if isinstance(init, GridFunction):
        if not init.geometry.same_as(geometry):
            raise ValueError("initial grid function has a different geometry")
        return np.array(init.values)
    arr = np.asarray(init, dtype=float)
    if arr.ndim == 0:
        return np.full(geometry.num_cells, float(arr))
    if arr.shape != (geometry.num_cells,):
        raise ValueError("initial values have the wrong length")
    return arr.copy()


def minimize(params: ModelParams, geometry: GridGeometry, region, exterior: ExteriorData,
             W: Potential, opts: MinimizeOptions = MinimizeOptions()) -> MinimizeReport:
    """Minimize the energy in ``region`` with the given exterior data.

    Projected gradient descent with a Jacobi-scaled Barzilai-Borwein step and
    Armijo backtracking along the projection arc.  Values outside the region
    are the exterior data sampled at cell centres and never change.

    Returns
    -------
    MinimizeReport
        ``converged`` is true iff the projected residual reached ``opts.tol``.
        If backtracking cannot find descent, the iteration stops with
        ``stalled = True`` and the remaining residual reported as ``slack``.
    """
    mask = region_mask(geometry, region)
    rows = np.flatnonzero(mask)
    lo, hi = opts.bounds
    boundary = np.clip(exterior.evaluate(geometry.centers()), lo, hi)
    u = np.clip(_initial_values(geometry, exterior, opts.init, opts.bounds), lo, hi)
    u[~mask] = boundary[~mask]
    op = get_operator(geometry, params, exterior)
    hn = geometry.cell_volume
    # diagonal of the Hessian of K divided by h^n (Jacobi scaling)
    diag = 2.0 * op.cell_mass / hn

    def gf(v):
        return GridFunction(geometry, v, exterior)

    def grad(v):
        return energy_gradient(gf(v), mask, W, params)

    E = total_energy(gf(u), mask, W, params).total
    trace = [E]
    g = grad(u)
    res = float(np.max(np.abs(project(g / hn, u, mask, opts.bounds)), initial=0.0))
    step = 1.0 / (diag + 2.0)
    it = 0
    stalled = False
    while res > opts.tol and it < opts.max_iters:
        it += 1
        t = step
        gK = g - hn * np.where(mask, W.dW(u), 0.0)
        accepted = False
        while t >= opts.min_step / diag:
            trial = u.copy()
            trial[rows] = np.clip(u[rows] - t * g[rows] / hn, lo, hi)
            d = trial - u
            if not np.any(d):
                break
            lin = math.fsum(g[rows] * d[rows])
            dE = (math.fsum(gK[rows] * d[rows]) + op.quadratic_form(d, mask)
                  + hn * math.fsum(W.diff(trial[rows], u[rows])))
            if dE <= opts.armijo * lin and dE <= 0.0:
                accepted = True
                break
            t *= opts.shrink
        if not accepted:
            stalled = True
            break
        g_new = grad(trial)
        s_vec = (trial - u)[rows]
        y_vec = (g_new - g)[rows] / hn
        sy = math.fsum(s_vec * y_vec)
        step = math.fsum(s_vec * s_vec) / sy if sy > 0 else t * 2.0
        step = min(max(step, 1e-3 / diag), 1e3 / diag)
        u, g = trial, g_new
        E = E + dE
        trace.append(E)
        res = float(np.max(np.abs(project(g / hn, u, mask, opts.bounds)), initial=0.0))
        if opts.checkpoint_every and opts.checkpoint_path and it % opts.checkpoint_every == 0:
            gf(u).save(opts.checkpoint_path)
    if opts.checkpoint_path:
        gf(u).save(opts.checkpoint_path)
    converged = res <= opts.tol
    return MinimizeReport(gf(u), trace, res, it, converged, stalled and not converged,
                          0.0 if converged else res, mask)
