"""Grid geometry, piecewise-constant grid functions and exterior data.

Everything in this module is immutable after construction.  Values live on a
uniform grid of congruent cubic cells covering an axis-aligned box; the
function is constant on each open cell.  Outside the box the function is given
by closed-form exterior data, never by grid values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

MAX_DIM = 3


@dataclass(frozen=True)
class QuadratureSettings:
    """Knobs for the nonlocal quadrature.

    near_depth
        Maximum levels of 2^n-fold subdivision used on near-field cell pairs.
    separation
        Pairs whose centers are farther apart than ``separation`` cell widths
        are treated as far field.
    far_truncation
        Radius beyond which non-constant exterior data is replaced by its
        limit at infinity.  ``None`` means four box half-widths.
    near_order, far_order
        Gauss-Legendre points per axis on each quadrature piece.  A
        ``far_order`` of 0 selects the plain midpoint rule for far pairs.
    max_dense_entries
        Cap on the number of entries of a cached dense pair-weight matrix;
        larger grids evaluate weights on the fly from the offset table.
    """

    near_depth: int = 6
    separation: float = 3.0
    far_truncation: Optional[float] = None
    near_order: int = 8
    far_order: int = 4
    max_dense_entries: int = 1 << 24

    def __post_init__(self):
        if self.near_depth < 0:
            raise ValueError("near_depth must be >= 0")
        if not self.separation > 1.0:
            raise ValueError("separation factor must be > 1")
        if self.far_truncation is not None and not self.far_truncation > 0:
            raise ValueError("far_truncation must be positive")
        if self.near_order < 1 or self.far_order < 0:
            raise ValueError("quadrature orders must be positive")


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``n``, fractional order ``s`` and quadrature settings."""

    n: int
    s: float
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.n!r}")
        if self.n > MAX_DIM:
            raise ValueError(f"dimensions above {MAX_DIM} are not supported")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")
        if not self.n > 2 * self.s:
            raise ValueError("need n > 2s")

    @property
    def sobolev_exponent(self) -> float:
        return 2.0 * self.n / (self.n - 2.0 * self.s)

    @property
    def extrapolated_regime(self) -> bool:
        """True for n = 1 runs; the density estimates are stated for n >= 2."""
        return self.n == 1

    def require_density_range(self):
        if not self.s < 0.5:
            raise ValueError("density subcommands require s ∈ (0,1/2)")

    def with_quadrature(self, **kw) -> "ModelParams":
        return replace(self, quadrature=replace(self.quadrature, **kw))


@dataclass(frozen=True)
class GridGeometry:
    """Uniform grid of ``cells_per_axis**n`` cubic cells on an axis-aligned box."""

    center: tuple
    half_width: float
    cells_per_axis: int

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        if not 1 <= len(c) <= MAX_DIM:
            raise ValueError("box dimension must be 1, 2 or 3")
        hw = np.atleast_1d(np.asarray(self.half_width, dtype=float))
        if hw.size > 1:
            if hw.size != len(c) or not np.all(hw == hw[0]):
                raise ValueError("cells must be cubes: all half-widths must agree")
        object.__setattr__(self, "half_width", float(hw[0]))
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if int(self.cells_per_axis) < 1:
            raise ValueError("cells_per_axis must be >= 1")
        object.__setattr__(self, "cells_per_axis", int(self.cells_per_axis))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def m(self) -> int:
        return self.cells_per_axis

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def num_cells(self) -> int:
        return self.m ** self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.half_width

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.half_width

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.n

    def axis_centers(self, axis: int) -> np.ndarray:
        i = np.arange(self.m, dtype=float)
        return self.center[axis] + (i + 0.5 - self.m / 2.0) * self.h

    def multi_index(self) -> np.ndarray:
        """(N, n) integer cell indices in row-major order."""
        grids = np.meshgrid(*[np.arange(self.m)] * self.n, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def centers(self) -> np.ndarray:
        idx = self.multi_index().astype(float)
        return np.asarray(self.center) + (idx + 0.5 - self.m / 2.0) * self.h

    def flat_index(self, multi) -> np.ndarray:
        multi = np.atleast_2d(np.asarray(multi, dtype=np.int64))
        if multi.shape[1] != self.n:
            raise ValueError("index dimension mismatch")
        if np.any(multi < 0) or np.any(multi >= self.m):
            raise IndexError("cell index out of grid bounds")
        return np.ravel_multi_index(tuple(multi.T), (self.m,) * self.n)

    def locate(self, point) -> int:
        """Flat index of the cell containing ``point`` (upper cell on shared faces)."""
        p = np.asarray(point, dtype=float).reshape(self.n)
        k = np.floor((p - self.lo) / self.h).astype(np.int64)
        if np.any(k < 0) or np.any(k >= self.m):
            raise IndexError(f"point {p} lies outside the grid box")
        return int(self.flat_index(k)[0])

    def same_as(self, other: "GridGeometry") -> bool:
        return (self.center == other.center and self.half_width == other.half_width
                and self.m == other.m)

    def scaled(self, factor: float) -> "GridGeometry":
        return GridGeometry(tuple(factor * c for c in self.center), factor * self.half_width, self.m)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "half_width": self.half_width,
                "cells_per_axis": self.m}


EXTERIOR_KINDS = ("zero", "constant", "half_space", "radial")


@dataclass(frozen=True)
class ExteriorData:
    """Closed-form values of a function on the complement of the grid box.

    Build instances with :meth:`zero`, :meth:`constant`, :meth:`half_space`
    or :meth:`radial`.  A radial profile needs a finite limit at infinity;
    pass it as ``limit`` or let it be estimated (a profile with no limit is
    rejected because the exterior tail of the energy would diverge).
    """

    kind: str = "zero"
    value: float = 0.0
    direction: tuple = ()
    profile: Optional[Callable] = field(default=None, compare=False)
    limit: Optional[float] = None
    name: str = ""
    bounds: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.kind not in EXTERIOR_KINDS:
            raise ValueError(f"unknown exterior kind {self.kind!r}")
        if self.kind == "half_space":
            e = np.asarray(self.direction, dtype=float)
            norm = np.linalg.norm(e)
            if e.size == 0 or not norm > 0:
                raise ValueError("half-space data needs a nonzero direction")
            object.__setattr__(self, "direction", tuple(e / norm))
        if self.kind == "radial":
            if self.profile is None:
                raise ValueError("radial exterior data needs a profile callable")
            if self.limit is None:
                object.__setattr__(self, "limit", _estimate_limit(self.profile))

    @classmethod
    def zero(cls) -> "ExteriorData":
        return cls("zero", 0.0, bounds=(0.0, 0.0))

    @classmethod
    def constant(cls, value: float) -> "ExteriorData":
        value = float(value)
        return cls("constant", value, bounds=(min(value, -1.0), max(value, 1.0)))

    @classmethod
    def half_space(cls, direction) -> "ExteriorData":
        return cls("half_space", direction=tuple(np.atleast_1d(direction).astype(float)))

    @classmethod
    def radial(cls, profile: Callable, limit: Optional[float] = None, name: str = "",
               bounds=(-1.0, 1.0)) -> "ExteriorData":
        return cls("radial", profile=profile, limit=limit, name=name, bounds=tuple(bounds))

    def evaluate(self, points) -> np.ndarray:
        """Exterior values at ``points`` of shape (P, n)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "zero":
            return np.zeros(len(pts))
        if self.kind == "constant":
            return np.full(len(pts), self.value)
        if self.kind == "half_space":
            e = np.asarray(self.direction)
            if pts.shape[1] != e.size:
                raise ValueError("direction dimension does not match points")
            return np.sign(pts @ e)
        r = np.linalg.norm(pts, axis=1)
        return np.asarray(self.profile(r), dtype=float) * np.ones(len(pts))

    def limit_mean(self) -> float:
        """Direction-averaged value at infinity (a half-space splits 1/2 : 1/2)."""
        if self.kind == "half_space":
            return 0.0
        if self.kind == "radial":
            return float(self.limit)
        return self.value

    def limit_square_mean(self) -> float:
        if self.kind == "half_space":
            return 1.0
        if self.kind == "radial":
            return float(self.limit) ** 2
        return self.value ** 2

    def min(self, other: "ExteriorData") -> "ExteriorData":
        """Pointwise minimum of two exterior descriptors."""
        if self == other and self.kind != "radial":
            return self
        if self.kind in ("zero", "constant") and other.kind in ("zero", "constant"):
            v = min(self.value, other.value)
            return ExteriorData.zero() if v == 0.0 else ExteriorData.constant(v)
        f, g = self, other
        lim = min(f.limit_mean(), g.limit_mean()) if "half_space" not in (f.kind, g.kind) else None
        if lim is None:
            raise ValueError("pointwise min of half-space and other data is not radial; "
                             "not representable")
        if f.kind == "radial" or g.kind == "radial":
            def prof(r, f=f, g=g):
                return np.minimum(_radial_values(f, r), _radial_values(g, r))
            return ExteriorData.radial(prof, limit=lim, name=f"min({f.describe()},{g.describe()})")
        raise ValueError("incompatible exterior data for pointwise min")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value:g})"
        if self.kind == "half_space":
            return "half_space(" + ",".join(f"{v:g}" for v in self.direction) + ")"
        if self.kind == "radial":
            return f"radial({self.name or 'profile'}, limit={self.limit:g})"
        return "zero"

    def to_dict(self) -> dict:
        if self.kind == "radial":
            if not self.name:
                raise ValueError("only named radial profiles can be serialized")
            return {"kind": "radial", "name": self.name, "limit": self.limit}
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        if self.kind == "half_space":
            d["direction"] = list(self.direction)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExteriorData":
        kind = d.get("kind", "zero")
        if kind == "zero":
            return cls.zero()
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "half_space":
            return cls.half_space(d["direction"])
        if kind == "radial":
            name = d["name"]
            if name not in RADIAL_PROFILES:
                raise ValueError(f"unknown radial profile {name!r}")
            return cls.radial(RADIAL_PROFILES[name], limit=d.get("limit"), name=name)
        raise ValueError(f"unknown exterior kind {kind!r}")


def _radial_values(ext: ExteriorData, r):
    r = np.asarray(r, dtype=float)
    if ext.kind == "radial":
        return np.asarray(ext.profile(r), dtype=float) * np.ones_like(r)
    return np.full_like(r, ext.value)


def _estimate_limit(profile: Callable, tol: float = 1e-6) -> float:
    radii = 2.0 ** np.arange(10, 40, 2)
    vals = np.asarray(profile(radii), dtype=float) * np.ones_like(radii)
    if not np.all(np.isfinite(vals)):
        raise ValueError("divergent tail: radial profile is not finite at large radii")
    if abs(vals[-1] - vals[-2]) > tol * max(1.0, abs(vals[-1])):
        raise ValueError("divergent tail: radial profile has no limit at infinity")
    return float(vals[-1])


RADIAL_PROFILES = {
    # 1 far away, -1 near the origin; used by examples and the CLI.
    "tanh_well": lambda r: np.tanh(np.asarray(r, dtype=float) - 1.0),
}


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function on a grid plus exterior data.

    ``values`` holds one real per cell in row-major order and is stored as a
    read-only array.
    """

    geometry: GridGeometry
    values: np.ndarray
    exterior: ExteriorData = field(default_factory=ExteriorData.zero)
    range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.geometry.num_cells:
            raise ValueError(f"expected {self.geometry.num_cells} values, got {v.size}")
        lo, hi = (float(self.range[0]), float(self.range[1]))
        if not lo <= hi:
            raise ValueError("range must satisfy lo <= hi")
        if v.size and (np.nanmin(v) < lo or np.nanmax(v) > hi or np.any(np.isnan(v))):
            raise ValueError(f"values outside declared range [{lo}, {hi}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "range", (lo, hi))

    @property
    def n(self) -> int:
        return self.geometry.n

    def with_values(self, values, range=None) -> "GridFunction":
        return GridFunction(self.geometry, values, self.exterior,
                            self.range if range is None else range)

    def scaled(self, factor: float) -> "GridFunction":
        """The function ``factor * f`` (exterior data must be zero)."""
        if self.exterior.kind != "zero":
            raise ValueError("scaling is only defined here for compactly supported data")
        lo, hi = sorted((factor * self.range[0], factor * self.range[1]))
        return GridFunction(self.geometry, factor * self.values, self.exterior, (lo, hi))

    def dilated(self, factor: float) -> "GridFunction":
        """The function ``x -> f(x / factor)`` on the correspondingly dilated grid."""
        if self.exterior.kind not in ("zero", "constant"):
            raise ValueError("dilation is only supported for constant exterior data")
        return GridFunction(self.geometry.scaled(factor), self.values, self.exterior, self.range)

    def support_measure(self) -> float:
        return np.count_nonzero(self.values) * self.geometry.cell_volume

    def to_dict(self) -> dict:
        return {
            "format": "fracdensity.gridfunction/1",
            "n": self.n,
            "box": {"center": list(self.geometry.center), "half_width": self.geometry.half_width},
            "cells_per_axis": self.geometry.m,
            "exterior": self.exterior.to_dict(),
            "range": list(self.range),
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridFunction":
        geom = GridGeometry(tuple(d["box"]["center"]), d["box"]["half_width"], d["cells_per_axis"])
        if geom.n != d.get("n", geom.n):
            raise ValueError("record dimension disagrees with box dimension")
        ext = ExteriorData.from_dict(d.get("exterior", {"kind": "zero"}))
        rng = tuple(d.get("range", (-1.0, 1.0)))
        return cls(geom, np.asarray(d["values"], dtype=float), ext, rng)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GridFunction":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Thresholds:
    theta1: float
    theta2: float
    c_grow: float

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            if not -1.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1)")
        if not 0.0 < self.c_grow < 2.0:
            raise ValueError("c_grow must be positive and below 2")

    @property
    def theta_low(self) -> float:
        return min(self.theta1, self.theta2, -1.0 + self.c_grow)

    @property
    def theta_high(self) -> float:
        return max(self.theta1, self.theta2, -1.0 + self.c_grow)


def make_indicator(cells: Sequence, geometry: GridGeometry) -> GridFunction:
    """Characteristic function of a set of cells (compact support, range [0, 1]).

    ``cells`` may contain flat indices or rows of multi-indices.
    """
    cells = np.asarray(cells, dtype=np.int64)
    v = np.zeros(geometry.num_cells)
    if cells.size:
        if cells.ndim == 2:
            flat = geometry.flat_index(cells)
        else:
            flat = cells.reshape(-1)
            if np.any(flat < 0) or np.any(flat >= geometry.num_cells):
                raise IndexError("cell index out of grid bounds")
        v[flat] = 1.0
    return GridFunction(geometry, v, ExteriorData.zero(), (0.0, 1.0))


def pointwise_min(u: GridFunction, w: GridFunction) -> GridFunction:
    if not u.geometry.same_as(w.geometry):
        raise ValueError("geometry mismatch")
    ext = u.exterior.min(w.exterior)
    rng = (min(u.range[0], w.range[0]), min(u.range[1], w.range[1]))
    return GridFunction(u.geometry, np.minimum(u.values, w.values), ext, rng)


def ball_mask(geometry: GridGeometry, radius: float, center=None) -> np.ndarray:
    """Cells whose center lies in the closed ball of the given radius."""
    c = np.zeros(geometry.n) if center is None else np.asarray(center, dtype=float)
    d = np.linalg.norm(geometry.centers() - c, axis=1)
    return d <= radius * (1 + 1e-12)


def box_mask(geometry: GridGeometry, lo, hi) -> np.ndarray:
    """Cells whose center lies in the axis-aligned box [lo, hi]."""
    x = geometry.centers()
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (geometry.n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (geometry.n,))
    return np.all((x >= lo) & (x <= hi), axis=1)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 points for n = 1)."""
    return n * unit_ball_volume(n)
