"""The fractional Sobolev inequality, link by link.

For compactly supported ``f`` with dyadic profile ``a_k`` the proof chain is

    ||f||_p^2 <= 4 (sum_k 2^{2kn/(n-2s)} a_k)^{(n-2s)/n}
              <= 4 sum_k 4^k a_k^{(n-2s)/n}
              <= 4 C_1 sum_{a_k != 0} a_{k+1} a_k^{-2s/n} 4^k
              <= (4 C_1 / c) [f]^2

with ``p = 2n/(n-2s)``, ``C_1 = 4^{n/(n-2s)}`` from the summation lemma
with base 4, and ``c = c(n,s)`` from the dyadic lower bound.  Every link is
evaluated separately so that a failure points at one step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .core import ExteriorData, GridFunction, GridGeometry, ModelParams
from .kernel import error_model, gagliardo_sq
from .levelset import _tail, dyadic_energy_bound, level_measures, os2_constant

LINK_NAMES = ("lp_norm_sq", "layer_sum", "dyadic_sum", "summation_bound", "gagliardo_bound")


def cut_levels(f: GridFunction, N: float) -> GridFunction:
    """``f`` clamped to ``[-N, N]``."""
    if not N > 0:
        raise ValueError("cut level must be positive")
    lo, hi = max(f.range[0], -N), min(f.range[1], N)
    lo, hi = min(lo, hi), max(lo, hi)
    return GridFunction(f.geometry, np.clip(f.values, -N, N), f.exterior, (lo, hi))


def lp_norm_sq(f: GridFunction, p: float | None = None, s: float | None = None) -> float:
    """``(sum_i |f_i|^p h^n)^{2/p}``; ``p`` defaults to ``2n/(n-2s)`` (pass ``s``)."""
    if p is None:
        if s is None:
            raise ValueError("give the exponent p or the order s")
        n = f.n
        if not n > 2 * s:
            raise ValueError("need n > 2s")
        p = 2.0 * n / (n - 2.0 * s)
    v = np.abs(f.values)
    if not np.any(v):
        return 0.0
    # factor out the maximum to keep the power sum in range
    vmax = float(v.max())
    total = math.fsum((v / vmax) ** p) * f.geometry.cell_volume
    return vmax * vmax * total ** (2.0 / p)


@dataclass
class SobolevReport:
    """Values of the chain; ``links[i]`` says value ``i`` is at most value ``i+1``."""

    lp_norm_sq: float
    layer_sum: float
    dyadic_sum: float
    summation_bound: float
    gagliardo_bound: float
    gagliardo: float
    dyadic_bound: float
    links: tuple
    passed: bool
    implied_constant: float
    proof_constant: float
    slack: float

    def values(self) -> tuple:
        return tuple(getattr(self, k) for k in LINK_NAMES)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["links"] = list(self.links)
        return d


def _chain_values(f: GridFunction, params: ModelParams):
    n, s = params.n, params.s
    q = (n - 2.0 * s) / n
    prof = level_measures(f)
    a = np.asarray(prof.a)
    ks = prof.ks.astype(float)
    S = prof.support
    base = 2.0 ** (2.0 * n / (n - 2.0 * s))
    if S == 0.0:
        layer = dyad_sum = 0.0
    else:
        layer = 4.0 * (math.fsum(base ** ks * a) + S * _tail(base, prof.k_min)) ** q
        dyad_sum = 4.0 * (math.fsum(4.0 ** ks * a ** q) + S ** q * _tail(4.0, prof.k_min))
    dyad = dyadic_energy_bound(prof, n, s)
    C1 = 4.0 ** (n / (n - 2.0 * s))
    c = os2_constant(n, s)
    g = gagliardo_sq(f, params)
    return (lp_norm_sq(f, s=s), layer, dyad_sum, 4.0 * C1 * dyad, 4.0 * C1 / c * g), g, dyad


def sobolev_check(f: GridFunction, params: ModelParams, rel_slack: float = 1e-9) -> SobolevReport:
    """Evaluate every link of the Sobolev chain for ``f``.

    Links that only involve level-set sums are checked to ``rel_slack``;
    the last link also allows the relative quadrature error bound of the
    kernel.
    """
    if f.exterior.kind != "zero":
        raise ValueError("f must be compactly supported (zero exterior data)")
    if not params.n > 2 * params.s:
        raise ValueError("need n > 2s")
    vals, g, dyad = _chain_values(f, params)
    quad = error_model(params)["relative_bound"] if params.s < 0.5 else 0.0
    links = []
    for i in range(4):
        tol = rel_slack + (quad if i == 3 else 0.0)
        links.append(bool(vals[i] <= vals[i + 1] * (1.0 + tol) + 1e-300))
    C1 = 4.0 ** (params.n / (params.n - 2.0 * params.s))
    proof_c = 4.0 * C1 / os2_constant(params.n, params.s)
    implied = vals[0] / g if g > 0 else 0.0
    return SobolevReport(*vals, g, dyad, tuple(links), all(links), implied, proof_c,
                         rel_slack + quad)


def cutting_sequence(f: GridFunction, params: ModelParams, levels=(1, 2, 4, 8)) -> list:
    """Sobolev reports of ``f`` cut at each level (in increasing order)."""
    return [sobolev_check(cut_levels(f, N), params) for N in sorted(levels)]


def random_step_function(geometry: GridGeometry, rng: np.random.Generator,
                         fill: float | None = None, max_level: int = 4) -> GridFunction:
    """A random compactly supported step function.

    A random fraction of the cells carries values ``+-2^e`` with ``e``
    uniform in ``[-max_level, max_level]``; the rest is zero.
    """
    N = geometry.num_cells
    fill = rng.uniform(0.05, 0.6) if fill is None else fill
    on = rng.random(N) < fill
    if not np.any(on):
        on[rng.integers(N)] = True
    e = rng.uniform(-max_level, max_level, N)
    v = np.where(on, rng.choice([-1.0, 1.0], N) * 2.0 ** e, 0.0)
    bound = float(np.max(np.abs(v)))
    return GridFunction(geometry, v, ExteriorData.zero(), (-bound, bound))


def estimate_best_constant(family: Callable, params: ModelParams, trials: int,
                           rng: np.random.Generator | None = None) -> dict:
    """Largest observed ``||f||_p^2 / [f]^2`` over functions drawn from ``family``.

    ``family(rng)`` must return a compactly supported GridFunction.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    best, ratios = 0.0, []
    for _ in range(trials):
        f = family(rng)
        if f.exterior.kind != "zero":
            raise ValueError("family produced a function without compact support")
        g = gagliardo_sq(f, params)
        r = lp_norm_sq(f, s=params.s) / g if g > 0 else 0.0
        ratios.append(r)
        best = max(best, r)
    C1 = 4.0 ** (params.n / (params.n - 2.0 * params.s))
    return {"best_constant": best, "proof_constant": 4.0 * C1 / os2_constant(params.n, params.s),
            "ratios": ratios}
