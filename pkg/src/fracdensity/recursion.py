"""Growth recursions of the form ``r^sigma alpha(r) V(r)^{(nu-sigma)/nu} <= C V(gamma r)``.

Here ``alpha(r) = min(1, log V(r) / log r)`` with natural logarithms.  The
hypotheses can only be verified on a finite grid of radii; every report
states the range that was checked.  The lower-bound iteration

    L_0 = mu,   L_{j+1} = r_j^sigma alpha_j L_j^{(nu-sigma)/nu} / C,   r_j = gamma^j R_o,

is the constructive content of the hypothesis: if ``V(r_j) >= L_j`` then
``V(r_{j+1}) >= L_{j+1}``.  Its exponent map ``beta -> sigma + beta (1 - sigma/nu)``
has the fixed point ``nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RecursionParams:
    sigma: float
    nu: float
    gamma: float
    C: float
    mu: float
    R_o: float

    def __post_init__(self):
        if not self.sigma > 0 or not self.mu > 0:
            raise ValueError("sigma and mu must be positive")
        if not self.nu > self.sigma:
            raise ValueError("nu must exceed sigma")
        for name in ("gamma", "C", "R_o"):
            if not getattr(self, name) > 1:
                raise ValueError(f"{name} must exceed 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("sigma", "nu", "gamma", "C", "mu", "R_o")}


@dataclass(frozen=True)
class GrowthFunction:
    """A positive nondecreasing ``V`` on ``(0, inf)``.

    Build with :meth:`power`, :meth:`constant`, :meth:`piecewise` or
    :meth:`tabulated`.  Tabulated values are interpolated linearly in
    log-log coordinates and are undefined outside the table.
    """

    kind: str
    data: dict = field(default_factory=dict)

    @classmethod
    def power(cls, exponent: float, scale: float = 1.0) -> "GrowthFunction":
        if not scale > 0 or exponent < 0:
            raise ValueError("need a positive scale and a nonnegative exponent")
        return cls("power", {"scale": float(scale), "exponent": float(exponent)})

    @classmethod
    def constant(cls, value: float) -> "GrowthFunction":
        if not value > 0:
            raise ValueError("V must be positive")
        return cls("constant", {"value": float(value)})

    @classmethod
    def piecewise(cls, breaks, scales, exponents) -> "GrowthFunction":
        """Power laws ``scales[k] r^exponents[k]`` on ``[breaks[k-1], breaks[k])``.

        ``breaks`` has one entry fewer than ``scales``; the result must be
        nondecreasing, which is checked at every break.
        """
        breaks = [float(b) for b in breaks]
        if len(scales) != len(exponents) or len(breaks) != len(scales) - 1:
            raise ValueError("inconsistent piece counts")
        if any(b <= 0 for b in breaks) or breaks != sorted(breaks):
            raise ValueError("breaks must be positive and increasing")
        if any(a <= 0 for a in scales) or any(e < 0 for e in exponents):
            raise ValueError("pieces must be positive and nondecreasing")
        for k, b in enumerate(breaks):
            left = scales[k] * b ** exponents[k]
            right = scales[k + 1] * b ** exponents[k + 1]
            if right < left * (1 - 1e-12):
                raise ValueError(f"V decreases at r = {b:g}")
        return cls("piecewise", {"breaks": breaks, "scales": [float(a) for a in scales],
                                 "exponents": [float(e) for e in exponents]})

    @classmethod
    def tabulated(cls, r, V) -> "GrowthFunction":
        r = [float(x) for x in r]
        V = [float(x) for x in V]
        if len(r) != len(V) or len(r) < 2:
            raise ValueError("need at least two (r, V) pairs")
        if any(x <= 0 for x in r) or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be positive and increasing")
        if any(v <= 0 for v in V):
            raise ValueError("V must be positive")
        if any(b < a for a, b in zip(V, V[1:])):
            raise ValueError("V must be nondecreasing")
        return cls("tabulated", {"r": r, "V": V})

    @classmethod
    def from_dict(cls, d: dict) -> "GrowthFunction":
        kind = d.get("kind")
        args = {k: v for k, v in d.items() if k != "kind"}
        if kind == "power":
            return cls.power(args["exponent"], args.get("scale", 1.0))
        if kind == "constant":
            return cls.constant(args["value"])
        if kind == "piecewise":
            return cls.piecewise(args["breaks"], args["scales"], args["exponents"])
        if kind == "tabulated":
            return cls.tabulated(args["r"], args["V"])
        raise ValueError(f"unknown growth function kind {kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.data}

    @property
    def domain(self) -> tuple:
        if self.kind == "tabulated":
            return self.data["r"][0], self.data["r"][-1]
        return 0.0, math.inf

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("V is defined for r > 0")
        d = self.data
        if self.kind == "power":
            return d["scale"] * r ** d["exponent"]
        if self.kind == "constant":
            return np.full_like(r, d["value"])
        if self.kind == "piecewise":
            k = np.searchsorted(d["breaks"], r, side="right")
            return np.asarray(d["scales"])[k] * r ** np.asarray(d["exponents"])[k]
        lo, hi = self.domain
        if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
            raise ValueError(f"r outside the tabulated range [{lo:g}, {hi:g}]")
        return np.exp(np.interp(np.log(r), np.log(d["r"]), np.log(d["V"])))


def alpha(Vr, r):
    """``min(1, log V / log r)`` for ``r > 1``."""
    Vr = np.asarray(Vr, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 1):
        raise ValueError("alpha needs r > 1")
    return np.minimum(1.0, np.log(Vr) / np.log(r))


def default_grid(p: RecursionParams, steps: int = 40, per_step: int = 8) -> np.ndarray:
    """Geometric grid from ``R_o`` to ``gamma^steps R_o``."""
    return p.R_o * p.gamma ** np.linspace(0.0, steps, steps * per_step + 1)


def check_hypothesis(V: GrowthFunction, p: RecursionParams, r_grid=None) -> dict:
    """Evaluate ``V(R_o) >= mu`` and the recursion inequality at each grid radius.

    Returns
    -------
    dict
        ``pass``, ``first_violation`` (radius or None), ``failed`` (which
        hypothesis), ``verified_range``, and per-radius ``lhs``/``rhs``.
    """
    r = default_grid(p) if r_grid is None else np.asarray(r_grid, dtype=float)
    if r.size == 0 or np.any(r < p.R_o * (1 - 1e-12)):
        raise ValueError("grid radii must lie in [R_o, inf)")
    r = np.sort(r)
    out = {"verified_range": [float(r[0]), float(r[-1])], "params": p.to_dict(),
           "V": V.to_dict()}
    V0 = float(V(p.R_o))
    if V0 < p.mu:
        out.update({"pass": False, "first_violation": float(p.R_o), "failed": "V(R_o) >= mu",
                    "lhs": [], "rhs": []})
        return out
    Vr = V(r)
    lhs = r ** p.sigma * alpha(Vr, r) * Vr ** ((p.nu - p.sigma) / p.nu)
    rhs = p.C * V(p.gamma * r)
    bad = np.flatnonzero(lhs > rhs * (1 + 1e-12))
    out.update({"lhs": lhs.tolist(), "rhs": rhs.tolist(), "r": r.tolist(),
                "pass": bool(bad.size == 0),
                "first_violation": float(r[bad[0]]) if bad.size else None,
                "failed": "recursion inequality" if bad.size else None})
    return out


def fitted_exponent(r, L) -> float:
    """Least-squares slope of ``log L`` against ``log r``."""
    x, y = np.log(np.asarray(r, dtype=float)), np.log(np.asarray(L, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


def propagate_lower_bound(V: GrowthFunction, p: RecursionParams, steps: int = 40) -> dict:
    """Run the lower-bound iteration for ``steps`` steps.

    The fitted exponent uses the last half of the chain.

    Raises
    ------
    ValueError
        If the hypothesis fails at some ``r_j`` of the chain, or if ``L_j``
        drops to 1 or below (``alpha`` then no longer gives a lower bound).
    """
    if steps < 2:
        raise ValueError("need at least two steps")
    r = p.R_o * p.gamma ** np.arange(steps + 1, dtype=float)
    hyp = check_hypothesis(V, p, r[:-1])
    if not hyp["pass"]:
        raise ValueError(f"hypothesis fails at r = {hyp['first_violation']:g} ({hyp['failed']})")
    L = [float(p.mu)]
    for j in range(steps):
        if L[-1] <= 1.0:
            raise ValueError(f"lower bound L_{j} = {L[-1]:.3g} <= 1; the iteration degenerates")
        a = min(1.0, math.log(L[-1]) / math.log(r[j]))
        L.append(r[j] ** p.sigma * a * L[-1] ** ((p.nu - p.sigma) / p.nu) / p.C)
    L = np.array(L)
    half = (steps + 1) // 2
    Vr = V(r)
    return {"r": r.tolist(), "L": L.tolist(), "V": Vr.tolist(),
            "exponent": fitted_exponent(r[half:], L[half:]), "target": p.nu,
            "below_V": bool(np.all(L <= Vr * (1 + 1e-12))),
            "c_empirical": float(np.min(L[half:] / r[half:] ** p.nu)),
            "verified_range": hyp["verified_range"]}
