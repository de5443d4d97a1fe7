"""Nonlocal energies and the fractional Laplacian on piecewise-constant grids.

The kernel is the raw ``|x - y|^(-n-2s)`` with no normalizing constant.

For grid values ``u`` on the box ``B`` and a region ``Omega`` (a set of grid
cells), the localized interaction energy is

    K(u; Omega) = 1/2 sum_{i,j in Omega} W_ij (u_i - u_j)^2
                + sum_{i in Omega, j in B minus Omega} W_ij (u_i - u_j)^2
                + sum_{i in Omega} X_i(u_i)

where ``W_ij`` is the exact cell-pair weight and ``X_i(t)`` is the
interaction of cell ``i`` (carrying the value ``t``) with the exterior data
on the complement of the box.  ``X_i(t) = m0_i t^2 - 2 m1_i t + m2_i`` is a
quadratic whose moments are computed once per geometry and exterior data.

The total kernel mass of a cell is known exactly (the unit-cell perimeter
``P``), so ``m0_i = h^(n-2s) P - sum_{j != i} W_ij`` holds without any
truncation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import backend
from .core import ExteriorData, GridFunction, GridGeometry, ModelParams
from .quadrature import (cell_half_space_integral, offset_table, quadrature_error_estimate,
                         unit_cell_perimeter)

__all__ = [
    "EnergyBreakdown", "KernelOperator", "get_operator", "region_mask", "gagliardo_sq",
    "energy_K", "total_energy", "frac_laplacian", "frac_laplacian_field", "energy_gradient",
    "error_model",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Parts of the energy of ``u`` in a region.

    Attributes
    ----------
    interaction_inner : float
        Pairs inside the region, with the factor 1/2.
    interaction_cross : float
        Region against everything outside it (grid cells and exterior data).
    potential_term : float
        Integral of ``W(u)`` over the region.
    total : float
    """

    interaction_inner: float
    interaction_cross: float
    potential_term: float
    total: float

    def to_dict(self) -> dict:
        return {"interaction_inner": self.interaction_inner,
                "interaction_cross": self.interaction_cross,
                "potential_term": self.potential_term, "total": self.total}


def _require_pc(params: ModelParams):
    if not params.s < 0.5:
        raise ValueError("piecewise-constant functions with jumps have infinite energy for "
                         "s >= 1/2; kernel operations need s < 1/2")


def _check_dims(geometry: GridGeometry, params: ModelParams):
    if geometry.n != params.n:
        raise ValueError(f"grid dimension {geometry.n} does not match n = {params.n}")


class KernelOperator:
    """Pair weights and exterior moments for one geometry and exterior.

    Parameters
    ----------
    geometry : GridGeometry
    params : ModelParams
        ``params.s`` must be below 1/2.
    exterior : ExteriorData
        Values on the complement of the box.

    Notes
    -----
    Pair weights are ``h^(n-2s) * omega(offset)``; the offset table is shared
    by all cells.  A dense ``N x N`` matrix is cached when it has at most
    ``quadrature.max_dense_entries`` entries; otherwise weights are looked
    up on the fly from the table.
    """

    def __init__(self, geometry: GridGeometry, params: ModelParams,
                 exterior: ExteriorData | None = None):
        _require_pc(params)
        _check_dims(geometry, params)
        self.geometry = geometry
        self.params = params
        self.exterior = exterior if exterior is not None else ExteriorData.zero()
        n, s, m = geometry.n, params.s, geometry.m
        self.scale = geometry.h ** (n - 2.0 * s)
        self.table = offset_table(n, s, m, params.quadrature)
        self.idx = geometry.multi_index()
        self.stride = np.array([m ** (n - 1 - k) for k in range(n)], dtype=np.int64)
        self._flat_table = np.ascontiguousarray(self.table.reshape(-1))
        N = geometry.num_cells
        self.dense = None
        if N * N <= params.quadrature.max_dense_entries:
            off = np.zeros((N, N), dtype=np.int64)
            for k in range(n):
                off += np.abs(self.idx[:, k][:, None] - self.idx[None, :, k]) * self.stride[k]
            self.dense = np.ascontiguousarray(self.scale * self._flat_table[off])
        self.cell_mass = self.scale * unit_cell_perimeter(n, s)
        self.m0, self.m1, self.m2 = self._exterior_moments()
        for a in (self.m0, self.m1, self.m2):
            a.setflags(write=False)

    # -- weights --------------------------------------------------------------

    def weight(self, i: int, j: int) -> float:
        """Pair weight of cells ``i`` and ``j`` (zero for ``i == j``)."""
        d = np.abs(self.idx[i] - self.idx[j])
        return float(self.scale * self.table[tuple(d)])

    def _correlate(self, field, table=None, shape=None):
        """sum_j omega(j - i) field_j for every box cell i (field on a lattice).

        ``field`` lives on a lattice of ``shape`` cells per axis centred on the
        box; the result is restricted to the box cells.
        """
        n, m = self.geometry.n, self.geometry.m
        table = self.table if table is None else table
        shape = (m,) * n if shape is None else shape
        E = table.shape[0]
        kern = table
        for ax in range(n):
            kern = np.concatenate([np.flip(np.take(kern, range(1, E), axis=ax), axis=ax), kern],
                                  axis=ax)
        full = fftconvolve(np.asarray(field, dtype=float).reshape(shape), kern, mode="same")
        lo = (shape[0] - m) // 2
        sl = tuple(slice(lo, lo + m) for _ in range(n))
        return full[sl].reshape(-1)

    def box_row_sums(self, weights=None) -> np.ndarray:
        """sum_{j != i} W_ij * weights_j over box cells (weights default to 1)."""
        N = self.geometry.num_cells
        w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
        if self.dense is not None:
            return self.dense @ w
        return self.scale * self._correlate(w)

    # -- exterior -------------------------------------------------------------

    def _exterior_moments(self):
        ext = self.exterior
        m0 = np.maximum(self.cell_mass - self.box_row_sums(), 0.0)
        if ext.kind == "zero":
            z = np.zeros_like(m0)
            return m0, z, z.copy()
        if ext.kind == "constant":
            return m0, ext.value * m0, ext.value ** 2 * m0
        if ext.kind == "half_space":
            axis = self._aligned_half_space_axis()
            if axis is not None:
                return self._half_space_moments(m0, axis)
        return self._ghost_moments(m0)

    def _aligned_half_space_axis(self):
        """Axis of a half-space whose boundary plane lies on cell faces, else None."""
        e = np.asarray(self.exterior.direction)
        k = int(np.argmax(np.abs(e)))
        if not np.allclose(np.delete(e, k), 0.0, atol=1e-14):
            return None
        g = self.geometry
        faces = g.lo[k] + g.h * np.arange(g.m + 1)
        if g.lo[k] < 0.0 < g.hi[k] and not np.any(np.isclose(faces, 0.0, atol=1e-12 * g.h)):
            return None
        return k

    def _half_space_moments(self, m0, axis):
        g = self.geometry
        e = np.asarray(self.exterior.direction)
        sgn = 1.0 if e[axis] > 0 else -1.0
        c = g.centers()[:, axis]
        pos = c > 0
        lo, hi = c - g.h / 2, c + g.h / 2
        tv = g.h ** (g.n - 1)
        # kernel mass from each cell to the far half-space (the side without the cell)
        far_pos = cell_half_space_integral(np.where(pos, -hi, lo), np.where(pos, -lo, hi),
                                           0.0, tv, g.n, self.params.s)
        box_other = np.where(pos, self.box_row_sums(~pos), self.box_row_sums(pos))
        x_other = np.clip(far_pos - box_other, 0.0, m0)
        side = np.where(pos, 1.0, -1.0) * sgn
        m1 = side * (m0 - 2.0 * x_other)
        return m0, m1, m0.copy()

    def _ghost_moments(self, m0):
        """Exterior data sampled on ghost cells out to the truncation radius;
        beyond it, the limit at infinity carries the exact remaining mass."""
        g, q = self.geometry, self.params.quadrature
        R = q.far_truncation if q.far_truncation is not None else 4.0 * g.half_width
        pad = max(0, int(math.ceil((R - g.half_width) / g.h)))
        M = g.m + 2 * pad
        table = offset_table(g.n, self.params.s, (M + g.m) // 2 + 1, q)
        grids = np.meshgrid(*[g.center[k] + (np.arange(M) + 0.5 - M / 2.0) * g.h
                              for k in range(g.n)], indexing="ij")
        pts = np.stack([gr.ravel() for gr in grids], axis=1)
        inbox = np.zeros((M,) * g.n, dtype=bool)
        inbox[tuple(slice(pad, pad + g.m) for _ in range(g.n))] = True
        inbox = inbox.reshape(-1)
        vals = np.where(inbox, 0.0, self.exterior.evaluate(pts))
        ghost = (~inbox).astype(float)
        shape = (M,) * g.n
        s1 = self.scale * self._correlate(vals, table, shape)
        s2 = self.scale * self._correlate(vals * vals, table, shape)
        sg = self.scale * self._correlate(ghost, table, shape)
        rest = np.maximum(m0 - sg, 0.0)
        return (m0, s1 + self.exterior.limit_mean() * rest,
                s2 + self.exterior.limit_square_mean() * rest)

    def exterior_energy(self, u, rows=None) -> np.ndarray:
        """Interaction of the values ``u`` (of the cells ``rows``) with the exterior data."""
        u = np.asarray(u, dtype=float)
        rows = self._rows(rows)
        m0, m1, m2 = self.m0[rows], self.m1[rows], self.m2[rows]
        if self.exterior.kind in ("zero", "constant"):
            v = self.exterior.value
            return (u - v) ** 2 * m0
        return np.maximum(u * u * m0 - 2.0 * u * m1 + m2, 0.0)

    # -- pair loops -----------------------------------------------------------

    def interaction(self, u, rows=None) -> np.ndarray:
        """sum_j W_ij (u_i - u_j) over box cells j, for each i in ``rows``."""
        u = np.ascontiguousarray(u, dtype=float)
        rows = self._rows(rows)
        out = np.empty(len(rows))
        ops, nt = backend.ops(), backend.get_num_threads()
        if self.dense is not None:
            ops.interaction_rows_dense(self.dense, u, rows, out, nt)
        else:
            ops.interaction_rows_table(self._flat_table, self.idx, self.stride, self.scale,
                                       u, rows, out, nt)
        return out

    def energy_rows(self, u, inside, rows=None):
        """Per-row inner (halved) and cross pair energies for the region ``inside``."""
        u = np.ascontiguousarray(u, dtype=float)
        inside = np.ascontiguousarray(inside, dtype=np.uint8)
        rows = self._rows(rows if rows is not None else np.flatnonzero(inside))
        inner, cross = np.empty(len(rows)), np.empty(len(rows))
        ops, nt = backend.ops(), backend.get_num_threads()
        if self.dense is not None:
            ops.energy_rows_dense(self.dense, u, inside, rows, inner, cross, nt)
        else:
            ops.energy_rows_table(self._flat_table, self.idx, self.stride, self.scale, u,
                                  inside, rows, inner, cross, nt)
        return inner, cross

    def _rows(self, rows):
        if rows is None:
            return np.arange(self.geometry.num_cells, dtype=np.int64)
        return np.ascontiguousarray(rows, dtype=np.int64)

    def quadratic_form(self, d, inside) -> float:
        """K(u + d) - K(u) - <grad K(u), d> for ``d`` supported in ``inside``.

        Equals the interaction energy of ``d`` with zero exterior data.
        """
        d = np.where(inside, d, 0.0)
        inner, cross = self.energy_rows(d, inside)
        rows = np.flatnonzero(inside)
        return math.fsum(inner) + math.fsum(cross) + math.fsum(d[rows] ** 2 * self.m0[rows])


_CACHE: dict = {}
_CACHE_LIMIT = 8


def _exterior_key(ext: ExteriorData):
    return (ext, id(ext.profile) if ext.profile is not None else None)


def get_operator(geometry: GridGeometry, params: ModelParams,
                 exterior: ExteriorData | None = None) -> KernelOperator:
    """Cached :class:`KernelOperator` for the given inputs."""
    exterior = exterior if exterior is not None else ExteriorData.zero()
    key = (geometry, params, _exterior_key(exterior))
    op = _CACHE.get(key)
    if op is None:
        op = KernelOperator(geometry, params, exterior)
        if len(_CACHE) >= _CACHE_LIMIT:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = op
    return op


def region_mask(geometry: GridGeometry, region=None) -> np.ndarray:
    """Boolean cell mask of a region.

    ``region`` may be ``None`` (whole box), a boolean mask, an array of flat
    cell indices, or a ``(lo, hi)`` pair of box corners (cells whose centres
    lie in the closed box).
    """
    N = geometry.num_cells
    if region is None:
        return np.ones(N, dtype=bool)
    if isinstance(region, tuple) and len(region) == 2:
        from .core import box_mask
        return box_mask(geometry, region[0], region[1])
    arr = np.asarray(region)
    if arr.dtype == bool:
        if arr.shape != (N,):
            raise ValueError("region mask has the wrong length")
        return arr.copy()
    mask = np.zeros(N, dtype=bool)
    if arr.size:
        if arr.min() < 0 or arr.max() >= N:
            raise IndexError("region cell index out of grid bounds")
        mask[arr.astype(np.int64)] = True
    return mask


def _energy_parts(u: GridFunction, mask, params):
    op = get_operator(u.geometry, params, u.exterior)
    inner, cross = op.energy_rows(u.values, mask)
    rows = np.flatnonzero(mask)
    ext = op.exterior_energy(u.values[rows], rows)
    return math.fsum(inner), math.fsum(cross) + math.fsum(ext)


def gagliardo_sq(f: GridFunction, params: ModelParams, method: str = "pairs") -> float:
    """Full-space Gagliardo double integral of a compactly supported grid function.

    Parameters
    ----------
    f : GridFunction
        Must have zero exterior data.
    params : ModelParams
    method : {"pairs", "form"}
        ``"pairs"`` sums squared differences pair by pair; ``"form"`` uses
        the bilinear form ``2 (sum_i f_i (Lf)_i + sum_i f_i^2 m0_i)``.  The
        two agree to rounding and serve as mutual checks.

    Returns
    -------
    float
        ``inf`` if ``s >= 1/2`` and ``f`` has a jump (every nonzero grid
        function does), since the seminorm then diverges.
    """
    if f.exterior.kind != "zero":
        raise ValueError("gagliardo_sq needs compactly supported data (zero exterior)")
    _check_dims(f.geometry, params)
    if not np.any(f.values):
        return 0.0
    if not params.s < 0.5:
        return math.inf
    op = get_operator(f.geometry, params, f.exterior)
    if method == "pairs":
        inner, cross = _energy_parts(f, np.ones(f.geometry.num_cells, dtype=bool), params)
        return 2.0 * (inner + cross)
    if method == "form":
        v = f.values
        Lf = op.interaction(v)
        return 2.0 * (math.fsum(v * Lf) + math.fsum(v * v * op.m0))
    raise ValueError(f"unknown method {method!r}")


def energy_K(u: GridFunction, region, params: ModelParams) -> float:
    """Interaction energy ``K(u; Omega)`` (inner plus cross parts)."""
    _require_pc(params)
    _check_dims(u.geometry, params)
    inner, cross = _energy_parts(u, region_mask(u.geometry, region), params)
    return inner + cross


def total_energy(u: GridFunction, region, W, params: ModelParams) -> EnergyBreakdown:
    """Interaction energy plus ``int_Omega W(u)`` (exact for piecewise constants)."""
    if np.any(np.abs(u.values) > 1.0):
        raise ValueError("u must take values in [-1, 1]")
    _require_pc(params)
    _check_dims(u.geometry, params)
    mask = region_mask(u.geometry, region)
    inner, cross = _energy_parts(u, mask, params)
    pot = u.geometry.cell_volume * math.fsum(W.W(u.values[mask]))
    return EnergyBreakdown(inner, cross, pot, inner + cross + pot)


def frac_laplacian_field(u: GridFunction, params: ModelParams, rows=None) -> np.ndarray:
    """Cell averages of ``(-Delta)^s u`` for the cells in ``rows`` (default: all)."""
    _check_dims(u.geometry, params)
    op = get_operator(u.geometry, params, u.exterior)
    rows = op._rows(rows)
    v = u.values
    return (op.interaction(v, rows) + v[rows] * op.m0[rows] - op.m1[rows]) \
        / u.geometry.cell_volume


def frac_laplacian(u: GridFunction, i: int, params: ModelParams) -> float:
    """Cell average over cell ``i`` of the principal-value fractional Laplacian."""
    if not 0 <= int(i) < u.geometry.num_cells:
        raise IndexError("cell index out of grid bounds")
    return float(frac_laplacian_field(u, params, [int(i)])[0])


def energy_gradient(u: GridFunction, region, W, params: ModelParams) -> np.ndarray:
    """Gradient of the total energy with respect to the values in the region.

    Entries outside the region are zero.  In the region,
    ``grad_i = h^n (2 (-Delta)^s u_i + W'(u_i))``.
    """
    mask = region_mask(u.geometry, region)
    rows = np.flatnonzero(mask)
    g = np.zeros(u.geometry.num_cells)
    lap = frac_laplacian_field(u, params, rows)
    g[rows] = u.geometry.cell_volume * (2.0 * lap + W.dW(u.values[rows]))
    return g


def error_model(params: ModelParams, geometry: GridGeometry | None = None,
                exterior: ExteriorData | None = None) -> dict:
    """Description and size estimate of the quadrature error."""
    _require_pc(params)
    out = quadrature_error_estimate(params.n, params.s, params.quadrature)
    out["kernel"] = "raw |x-y|^(-n-2s), no normalizing constant"
    if geometry is not None:
        q = params.quadrature
        R = q.far_truncation if q.far_truncation is not None else 4.0 * geometry.half_width
        ext = exterior if exterior is not None else ExteriorData.zero()
        op = get_operator(geometry, params, ext)
        out["storage"] = "dense" if op.dense is not None else "offset-table"
        if ext.kind in ("zero", "constant"):
            out["exterior_rule"] = "exact lattice identity"
        elif ext.kind == "half_space" and op._aligned_half_space_axis() is not None:
            out["exterior_rule"] = "closed-form half-space integral"
        else:
            out["exterior_rule"] = "ghost cells with limit-value tail"
            out["truncation_radius"] = R
    out["relative_bound"] = 10.0 * max(out["near_rel_error"], out["far_rel_error"])
    return out
