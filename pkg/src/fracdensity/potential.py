"""Double-well potentials, their structural conditions, and the growth constant.

A potential is given by evaluators for ``W``, ``W'`` and ``W''`` on
``[-1, 1]``.  The default is the quartic ``(1 - t^2)^2 / 4``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

LADDER = tuple(2.0 ** -j for j in range(1, 21))


@dataclass(frozen=True)
class Potential:
    """A double-well potential on [-1, 1].

    Parameters
    ----------
    W, dW, ddW : callable
        Vectorized evaluators of the potential and its first two derivatives.
    descriptor : str
        Human-readable description, embedded in reports.
    diff_fn : callable, optional
        Stable evaluator of ``W(a) - W(b)``; defaults to plain subtraction.
    """

    W: Callable
    dW: Callable
    ddW: Callable
    descriptor: str = "custom"
    diff_fn: Optional[Callable] = field(default=None, compare=False)

    def diff(self, a, b):
        """``W(a) - W(b)``, computed without cancellation when possible."""
        if self.diff_fn is not None:
            return self.diff_fn(np.asarray(a, float), np.asarray(b, float))
        return self.W(a) - self.W(b)

    def scaled(self, factor: float) -> "Potential":
        f = float(factor)
        d = self.diff_fn
        return Potential(lambda t: f * self.W(t), lambda t: f * self.dW(t),
                         lambda t: f * self.ddW(t), f"{f:g}*{self.descriptor}",
                         None if d is None else (lambda a, b: f * d(a, b)))

    def to_dict(self) -> dict:
        return {"descriptor": self.descriptor}


def quartic() -> Potential:
    """The Allen-Cahn well ``W(t) = (1 - t^2)^2 / 4``."""
    return Potential(
        lambda t: 0.25 * (1.0 - np.asarray(t, float) ** 2) ** 2,
        lambda t: np.asarray(t, float) ** 3 - np.asarray(t, float),
        lambda t: 3.0 * np.asarray(t, float) ** 2 - 1.0,
        "quartic",
        lambda a, b: 0.25 * (a - b) * (a + b) * (a * a + b * b - 2.0),
    )


def from_callable(W: Callable, dW: Optional[Callable] = None, ddW: Optional[Callable] = None,
                  descriptor: str = "callable", step: float = 1e-5) -> Potential:
    """Wrap a user function, filling in missing derivatives by central differences.

    One-sided differences are used at the endpoints so that only ``[-1, 1]``
    is sampled.
    """
    def _d(f, order):
        def g(t):
            t = np.asarray(t, float)
            hstep = step if order == 1 else step ** 0.5 * 0.1
            lo = np.maximum(t - hstep, -1.0)
            hi = np.minimum(t + hstep, 1.0)
            mid = 0.5 * (lo + hi)
            if order == 1:
                return (f(hi) - f(lo)) / (hi - lo)
            half = 0.5 * (hi - lo)
            return (f(hi) - 2.0 * f(mid) + f(lo)) / (half * half)
        return g

    dW = dW if dW is not None else _d(W, 1)
    ddW = ddW if ddW is not None else _d(dW, 1)
    return Potential(lambda t: np.asarray(W(np.asarray(t, float)), float), dW, ddW, descriptor)


def load_csv(path) -> Potential:
    """Potential from a two-column CSV ``t, W(t)`` (monotone cubic interpolation).

    A header row is allowed.  Samples must cover ``[-1, 1]``.
    """
    ts, ws = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                t, w = float(row[0]), float(row[1])
            except ValueError:
                if ts:
                    raise
                continue
            ts.append(t)
            ws.append(w)
    order = np.argsort(ts)
    t = np.asarray(ts)[order]
    w = np.asarray(ws)[order]
    if len(t) < 4 or t[0] > -1.0 or t[-1] < 1.0:
        raise ValueError("potential table must have >= 4 samples covering [-1, 1]")
    p = PchipInterpolator(t, w)
    return Potential(p, p.derivative(1), p.derivative(2), f"csv:{path}")


@dataclass
class WcondReport:
    passed: bool
    worst: str
    location: float
    violation: float
    values: dict

    def to_dict(self) -> dict:
        return {"pass": self.passed, "worst": self.worst, "location": self.location,
                "violation": self.violation, "values": self.values}


def check_wcond(W: Potential, m: int = 256, tol: float = 1e-8) -> WcondReport:
    """Check the structural conditions on an ``m``-point mesh of [-1, 1].

    The conditions are ``W(+-1) = 0``, ``W > 0`` inside, ``W'(+-1) = 0`` and
    ``W''(+-1) > 0``.  ``C^2`` regularity is probed by requiring finite
    values of all three evaluators at every mesh point.  Equalities are
    tested to ``tol``; ``W''(+-1) > 0`` means exceeding ``1e-6`` times the
    largest ``|W''|`` on the mesh, which separates genuine curvature from
    finite-difference noise.
    """
    if m < 16:
        raise ValueError("mesh size must be at least 16")
    t = np.linspace(-1.0, 1.0, m)
    with np.errstate(all="ignore"):
        vals = [np.asarray(f(t), float) * np.ones_like(t) for f in (W.W, W.dW, W.ddW)]
    for name, v in zip(("W", "W'", "W''"), vals):
        bad = ~np.isfinite(v)
        if np.any(bad):
            raise ValueError(f"{name} is undefined at t = {t[bad][0]:g}")
    w, dw, ddw = vals
    interior = t[1:-1]
    floor = 1e-6 * max(1.0, float(np.max(np.abs(ddw))))
    violations = {
        "W(-1)=0": (abs(w[0]), -1.0),
        "W(+1)=0": (abs(w[-1]), 1.0),
        "W'(-1)=0": (abs(dw[0]), -1.0),
        "W'(+1)=0": (abs(dw[-1]), 1.0),
        "W''(-1)>0": (max(0.0, floor - ddw[0]), -1.0),
        "W''(+1)>0": (max(0.0, floor - ddw[-1]), 1.0),
    }
    k = int(np.argmin(w[1:-1]))
    violations["W>0 inside"] = (max(0.0, -w[1:-1][k]) + (tol if w[1:-1][k] <= 0 else 0.0),
                                float(interior[k]))
    name, (viol, loc) = max(violations.items(), key=lambda kv: kv[1][0])
    passed = bool(viol <= tol)
    return WcondReport(passed, "none" if passed else name, loc if not passed else float("nan"),
                       float(viol), {"W''(-1)": float(ddw[0]), "W''(+1)": float(ddw[-1])})


def grow_holds(W: Potential, c: float, points: int = 512) -> bool:
    """Whether both growth inequalities hold at ``c`` on a sample grid.

    First:  ``W(t) >= W(r) + c (1+r)(t-r) + c (t-r)^2`` for
    ``-1 <= r <= t <= -1+c``.
    Second: ``W(r) - W(t) <= (1+r)/c`` for ``-1 <= r <= t <= 1``.
    """
    x = np.linspace(-1.0, -1.0 + c, points)
    r, t = np.meshgrid(x, x, indexing="ij")
    up = t >= r
    lhs = W.diff(t[up], r[up])
    rhs = c * (1.0 + r[up]) * (t[up] - r[up]) + c * (t[up] - r[up]) ** 2
    if np.any(lhs < rhs * (1.0 - 1e-9)):
        return False
    y = np.linspace(-1.0, 1.0, points)
    wy = np.asarray(W.W(y), float)
    # for fixed r the worst t maximizes W(r) - W(t): t with the smallest W on [r, 1]
    suffix_min = np.minimum.accumulate(wy[::-1])[::-1]
    return bool(np.all(wy - suffix_min <= (1.0 + y) / c + 1e-13))


def find_grow_constant(W: Potential, points: int = 512, verify_points: Optional[int] = None,
                       ladder=LADDER) -> float:
    """Largest ladder value ``c = 2^-j`` satisfying the growth condition.

    The candidate is accepted only if it also passes on a ten times finer
    verification grid.

    Raises
    ------
    ValueError
        If no candidate down to ``2^-20`` passes (degenerate potential).
    """
    verify_points = 10 * points if verify_points is None else verify_points
    for c in ladder:
        if grow_holds(W, c, points) and grow_holds(W, c, verify_points):
            return c
    raise ValueError("no growth constant down to 2^-20: the potential looks degenerate at -1")


BUILTIN = {"quartic": quartic}


def from_descriptor(desc) -> Potential:
    """Build a potential from a config descriptor: ``"quartic"`` or ``{"csv": path}``."""
    if desc is None or desc == "quartic":
        return quartic()
    if isinstance(desc, dict):
        if "csv" in desc:
            base = load_csv(desc["csv"])
        else:
            base = BUILTIN[desc.get("builtin", "quartic")]()
        return base.scaled(desc["scale"]) if "scale" in desc else base
    if isinstance(desc, str) and desc in BUILTIN:
        return BUILTIN[desc]()
    raise ValueError(f"unknown potential descriptor {desc!r}")
