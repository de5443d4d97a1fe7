"""Command-line entry point: ``fracdensity <subcommand> [--config PATH] ...``.

Every subcommand reads one JSON configuration (validated against the bundled
schema, unknown keys rejected), writes a JSON summary plus CSV tables and,
where a plot applies, an SVG line chart into ``--out``.  Exit status is 0
when every check passes, 2 when some check fails and 1 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import backend

SUBCOMMANDS = ("minimize", "density", "sobolev-check", "levelset", "set-sobolev",
               "barrier-verify", "recursion", "grow-constant", "bench")

DEFAULTS = {
    "model": {"n": 1, "s": 0.25, "quadrature": {}},
    "grid": {"center": [0.0], "half_width": 1.0, "cells_per_axis": 64},
    "potential": "quartic",
    "exterior": {"kind": "half_space", "direction": [1.0]},
    "minimize": {"max_iters": 20000, "tol": 1e-6, "init": None, "region": {"kind": "all"},
                 "checkpoint_every": 0, "checkpoint_path": None},
    "density": {"radii": [8, 16, 32, 64], "h": 0.25, "theta": 0.0, "theta1": 0.0,
                "theta2": 0.0, "K": 2.0, "c_grow": None, "C_b": None,
                "growth_tolerance": 0.3, "density_floor": 0.0},
    "sobolev": {"input": None, "cases": [[1, 0.1], [1, 0.25], [1, 0.4], [2, 0.25]],
                "trials": 100, "cells_per_axis": {"1": 64, "2": 16, "3": 8},
                "rel_slack": 1e-9, "cut_levels": []},
    "levelset": {"input": None, "T": [2, 4, 8], "points": []},
    "set_sobolev": {"input": None, "points": []},
    "barrier": {"radii": [16, 32, 64, 128], "h": 0.25, "tau": None, "C_b": None,
                "rule": "floor"},
    "recursion": {"params": {"sigma": 0.5, "nu": 2.0, "gamma": 2.0, "C": 1.5, "mu": 100.0,
                             "R_o": 10.0},
                  "V": {"kind": "power", "exponent": 2.0}, "steps": 40,
                  "grid_points_per_step": 8},
    "grow_constant": {"points": 512},
    "bench": {"sizes": [256, 1024, 2048], "threads": [1, 2, 4, 8], "backends": [],
              "repeats": 3},
    "seed": 0,
    "out": "fracdensity-out",
}


class ConfigError(Exception):
    """Invalid configuration or command line (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# --- configuration -------------------------------------------------------------


def _data(name: str):
    return resources.files("fracdensity").joinpath("data", name)


def schema() -> dict:
    return json.loads(_data("config.schema.json").read_text(encoding="utf-8"))


def csv_columns() -> dict:
    return json.loads(_data("csv_columns.json").read_text(encoding="utf-8"))


def fixture_path(name: str = "chi_unit_interval.json") -> str:
    return str(_data(f"fixtures/{name}"))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("V",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate(cfg: dict):
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {exc.message}") from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def load_config(path=None, overrides=()) -> dict:
    """Defaults, then the JSON file at ``path``, then ``key.path=value`` overrides."""
    user = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        _validate(user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        key, val = item.split("=", 1)
        _set_path(user, key.strip(), _parse_value(val))
    cfg = _merge(DEFAULTS, user)
    _validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON of ``cfg`` without the output directory."""
    body = {k: v for k, v in cfg.items() if k != "out"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _file_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# --- output --------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return "" if math.isnan(x) else repr(x)
    return str(v)


def _svg_number(x: float) -> str:
    return f"{x:.2f}"


def line_chart(series, title: str, xlabel: str, ylabel: str, logx=False, logy=False) -> str:
    """A minimal SVG line chart.

    ``series`` is a list of ``(label, xs, ys)``; non-finite points (and
    nonpositive ones on log axes) are dropped.
    """
    W, H, L, R, T, B = 640, 420, 70, 20, 40, 55
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for label, xs, ys in series:
        keep = [(tx(float(x)), ty(float(y))) for x, y in zip(xs, ys)
                if x is not None and y is not None and math.isfinite(float(x))
                and math.isfinite(float(y)) and (not logx or x > 0) and (not logy or y > 0)]
        pts.append((label, keep))
    allp = [p for _, k in pts for p in k] or [(0.0, 0.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def X(v):
        return L + (v - x0) / (x1 - x0) * (W - L - R)

    def Y(v):
        return H - B - (v - y0) / (y1 - y0) * (H - T - B)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W // 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
           f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>']
    fmt = "{:.3g}"
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        xl = fmt.format(10 ** xv if logx else xv)
        yl = fmt.format(10 ** yv if logy else yv)
        out.append(f'<text x="{_svg_number(X(xv))}" y="{H - B + 18}" text-anchor="middle" '
                   f'font-size="11">{xl}</text>')
        out.append(f'<text x="{L - 6}" y="{_svg_number(Y(yv) + 4)}" text-anchor="end" '
                   f'font-size="11">{yl}</text>')
    out.append(f'<text x="{(L + W - R) // 2}" y="{H - 12}" text-anchor="middle" '
               f'font-size="13">{xlabel}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="16" y="{(T + H - B) // 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {(T + H - B) // 2})">{ylabel}'
               f'{" (log)" if logy else ""}</text>')
    for k, (label, keep) in enumerate(pts):
        c = colors[k % len(colors)]
        if keep:
            path = " ".join(f"{_svg_number(X(a))},{_svg_number(Y(b))}" for a, b in keep)
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{W - R - 4}" y="{T + 14 * (k + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


class Reporter:
    """Writes the files of one run; every JSON report carries the config hash."""

    def __init__(self, out_dir: str, cfg: dict, error_model: dict, inputs=None):
        self.out = out_dir
        self.meta = {"config_hash": config_hash(cfg), "error_model": error_model,
                     "inputs": inputs or {}}
        self.columns = csv_columns()
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def json(self, name: str, data: dict):
        doc = {**self.meta, **data}
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_clean(doc), fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")

    def csv(self, name: str, rows, columns=None):
        cols = list(columns if columns is not None else self.columns[name])
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                if len(row) != len(cols):
                    raise ValueError(f"{name}: row has {len(row)} fields, expected {len(cols)}")
                w.writerow([_cell(v) for v in row])

    def svg(self, name: str, text: str):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# --- builders ------------------------------------------------------------------


def _params(cfg, n=None, s=None):
    from .core import ModelParams, QuadratureSettings
    m = cfg["model"]
    return ModelParams(int(n if n is not None else m["n"]), float(s if s is not None else m["s"]),
                       QuadratureSettings(**m.get("quadrature", {})))


def _error_model(params) -> dict:
    from .kernel import error_model
    if params.s >= 0.5:
        return {"kernel": "raw |x-y|^(-n-2s), no normalizing constant",
                "note": "piecewise-constant functions with jumps have infinite seminorm "
                        "for s >= 1/2; no quadrature is performed"}
    return error_model(params)


def _geometry(cfg):
    from .core import GridGeometry
    g = cfg["grid"]
    return GridGeometry(tuple(float(c) for c in g["center"]), float(g["half_width"]),
                        int(g["cells_per_axis"]))


def _exterior(cfg):
    from .core import ExteriorData
    return ExteriorData.from_dict(cfg["exterior"])


def _potential(cfg):
    from .potential import from_descriptor
    return from_descriptor(cfg["potential"])


def _input(path, what):
    from .core import GridFunction
    if path is None:
        raise ConfigError(f"{what} needs an input grid function (--input or {what}.input)")
    if not os.path.isfile(path):
        raise ConfigError(f"input file not found: {path}")
    try:
        return GridFunction.load(path)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read grid function {path}: {exc}") from None


def _reason(code, message, **extra):
    return {"code": code, "message": message, **extra}


# --- subcommands ---------------------------------------------------------------


def cmd_minimize(cfg, rep_factory):
    from .core import ball_mask, box_mask
    from .kernel import total_energy
    from .minimize import MinimizeOptions, minimize

    params, geom, ext, W = _params(cfg), _geometry(cfg), _exterior(cfg), _potential(cfg)
    if geom.n != params.n:
        raise ConfigError("grid dimension differs from model.n")
    mc = cfg["minimize"]
    reg = mc["region"]
    if reg["kind"] == "all":
        region = None
    elif reg["kind"] == "box":
        region = box_mask(geom, reg["lo"], reg["hi"])
    else:
        region = ball_mask(geom, reg["radius"])
    opts = MinimizeOptions(max_iters=mc["max_iters"], tol=mc["tol"], init=mc["init"],
                           checkpoint_every=mc["checkpoint_every"],
                           checkpoint_path=mc["checkpoint_path"])
    rep = rep_factory(_error_model_geometry(params, geom, ext))
    res = minimize(params, geom, region, ext, W, opts)
    res.solution.save(rep.path("solution.json"))
    trace = res.energy_trace
    monotone = all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))
    energy = total_energy(res.solution, res.region, W, params)
    reasons = []
    if not res.converged:
        reasons.append(_reason("not_converged", "projected residual above tolerance",
                               residual=res.residual))
    if not monotone:
        reasons.append(_reason("energy_increase", "energy trace is not nonincreasing"))
    rep.csv("energy_trace.csv", list(enumerate(trace)))
    centers = geom.centers()
    xcols = ["x"] + [f"x{k + 1}" for k in range(1, geom.n)]
    rep.csv("profile.csv", [(i, *centers[i], res.solution.values[i])
                            for i in range(geom.num_cells)], ["cell", *xcols, "u"])
    rep.svg("energy_trace.svg", line_chart([("energy", list(range(len(trace))), trace)],
                                           "energy trace", "iteration", "energy"))
    rep.json("minimize.json", {"pass": not reasons, "reasons": reasons, **res.to_dict(),
                               "energy_breakdown": energy.to_dict(), "monotone_trace": monotone,
                               "extrapolated_regime": params.extrapolated_regime})
    return not reasons


def _error_model_geometry(params, geom, ext):
    from .kernel import error_model
    return error_model(params, geom, ext)


def cmd_density(cfg, rep_factory):
    from .barrier import BarrierParams, build_barrier
    from .core import unit_ball_volume
    from .density import (check_doubling, check_la8, defect_profile, density_theorem_check,
                          energy_growth_check, layer_minimizers, volume_profile)
    from .kernel import total_energy
    from .minimize import MinimizeOptions
    from .potential import find_grow_constant

    if not cfg["model"]["s"] < 0.5:
        raise ConfigError("density subcommands require s ∈ (0,1/2)")
    params = _params(cfg)
    W = _potential(cfg)
    dc, mc = cfg["density"], cfg["minimize"]
    radii = sorted(float(r) for r in dc["radii"])
    n, s = params.n, params.s
    ext_cfg = cfg["exterior"]
    # a half-space direction of the wrong length falls back to the first axis
    ext = None if ext_cfg["kind"] == "half_space" and len(ext_cfg.get("direction", [])) != n \
        else _exterior(cfg)
    rep = rep_factory(_error_model(params))
    opts = MinimizeOptions(max_iters=mc["max_iters"], tol=mc["tol"])
    sols = layer_minimizers(params, W, radii, dc["h"], opts, ext)
    reasons = []
    for R, r in zip(radii, sols):
        if not r.converged:
            reasons.append(_reason("not_converged", f"solver did not converge at R = {R:g}",
                                   R=R, residual=r.residual))
    V, err = [], []
    for R, r in zip(radii, sols):
        tab = volume_profile(r.solution, dc["theta"], [R])
        V.append(float(tab.V[0]))
        err.append(float(tab.boundary_error[0]))
    ball = [unit_ball_volume(n) * R ** n for R in radii]
    c_grow = dc["c_grow"]
    A = [None] * len(radii)
    if dc["C_b"] is not None:
        if c_grow is None:
            c_grow = find_grow_constant(W)
        A = []
        for R, r in zip(radii, sols):
            w = build_barrier(BarrierParams(R, c_grow / 4.0, dc["C_b"]), r.solution.geometry, s)
            A.append(float(defect_profile(r.solution, w, dc["theta"], c_grow, [R])[0]))
    la8 = check_la8(radii, V, n, s, dc["K"])
    dbl = check_doubling(radii, V, n, s)
    energies = [total_energy(r.solution, None, W, params).total for r in sols]
    growth = None
    if not reasons and len(radii) >= 4:
        growth = energy_growth_check(params, W, radii, dc["h"], opts, ext, reports=sols)
        target = n - 2 * s
        if growth.get("degenerate"):
            reasons.append(_reason("degenerate_growth", growth["reason"]))
        elif abs(growth["slope"] - target) > dc["growth_tolerance"]:
            reasons.append(_reason("growth_exponent",
                                   f"fitted exponent {growth['slope']:.4f} is farther than "
                                   f"{dc['growth_tolerance']} from n-2s = {target:g}"))
    if not (math.isfinite(la8["c3"]) and la8["c3"] > 0):
        reasons.append(_reason("la8_constant", "no positive empirical c3 on this table"))
    if not math.isfinite(dbl["C"]):
        reasons.append(_reason("doubling_constant", "no finite empirical doubling constant"))
    dens = density_theorem_check(sols[-1].solution, dc["theta1"], dc["theta2"], radii,
                                 floor=dc["density_floor"])
    la8_ratio = la8["ratio"][-len(radii):]
    rep.csv("density.csv", [(R, v, v / b, e, a, q, E, r.residual, r.iterations)
                            for R, v, b, e, a, q, E, r in
                            zip(radii, V, ball, err, A, la8_ratio, energies, sols)])
    rep.csv("doubling.csv", list(zip(dbl["r"], dbl["ratio"])))
    rep.svg("density_ratio.svg",
            line_chart([("V(R)/|B_R|", radii, [v / b for v, b in zip(V, ball)])],
                       "volume fraction of {u > theta}", "R", "V(R)/|B_R|", logx=True))
    rep.svg("energy_growth.svg",
            line_chart([("E(u_R; B_R)", radii, energies),
                        ("R^(n-2s) scaled", radii,
                         [energies[0] * (R / radii[0]) ** (n - 2 * s) for R in radii])],
                       "energy growth", "R", "energy", logx=True, logy=True))
    med = dbl["median"]
    rep.json("density.json", {
        "pass": not reasons, "reasons": reasons, "R": radii, "V": V, "A": A,
        "V_over_ball": [v / b for v, b in zip(V, ball)], "c_grow": c_grow,
        "la8": la8, "doubling": {**dbl, "stable": bool(math.isfinite(dbl["C"])
                                                       and dbl["C"] <= 2 * med)},
        "energy_growth": growth, "density_theorem": dens,
        "solver": [r.to_dict() for r in sols],
        "extrapolated_regime": params.extrapolated_regime,
        "note": "empirical constants are reported, not compared with fixed values"})
    return not reasons


def cmd_sobolev(cfg, rep_factory, rng):
    from .core import GridGeometry
    from .sobolev import LINK_NAMES, cut_levels, random_step_function, sobolev_check

    sc = cfg["sobolev"]
    rows, reports, reasons = [], [], []
    inputs = {}
    if sc["input"] is not None:
        f = _input(sc["input"], "sobolev")
        inputs[sc["input"]] = _file_hash(sc["input"])
        params = _params(cfg, n=f.n)
        rep = rep_factory(_error_model(params), inputs)
        funcs = [(0, params, -1, f)]
        funcs += [(0, params, -1, cut_levels(f, N)) for N in sorted(sc["cut_levels"])]
    else:
        rep = rep_factory(_error_model(_params(cfg)))
        funcs = []
        for ci, (n, s) in enumerate(sc["cases"]):
            params = _params(cfg, n=int(n), s=float(s))
            m = int(sc["cells_per_axis"][str(int(n))])
            geom = GridGeometry((0.0,) * int(n), 1.0, m)
            funcs += [(ci, params, t, random_step_function(geom, rng))
                      for t in range(sc["trials"])]
    for ci, params, t, f in funcs:
        r = sobolev_check(f, params, sc["rel_slack"])
        rows.append((ci, params.n, params.s, t, *r.values(), r.gagliardo, r.passed))
        reports.append(r)
        if not r.passed:
            bad = [LINK_NAMES[i] for i, ok in enumerate(r.links) if not ok]
            reasons.append(_reason("chain_link", "Sobolev chain link fails", case=ci, trial=t,
                                   links=bad))
    rep.csv("sobolev_links.csv", rows)
    out = {"pass": not reasons, "reasons": reasons, "count": len(reports),
           "violations": len(reasons)}
    if sc["input"] is not None:
        out["report"] = reports[0].to_dict()
        out["gagliardo"] = reports[0].gagliardo
        out["cut_reports"] = [r.to_dict() for r in reports[1:]]
    else:
        out["cases"] = sc["cases"]
        out["max_implied_constant"] = {
            str(ci): max(r.implied_constant for (c, *_), r in zip(funcs, reports) if c == ci)
            for ci in range(len(sc["cases"]))}
    rep.json("sobolev.json", out)
    return not reasons


def cmd_levelset(cfg, rep_factory):
    from .levelset import level_measures, os2_check, summation_lemma

    lc = cfg["levelset"]
    f = _input(lc["input"], "levelset")
    params = _params(cfg, n=f.n)
    rep = rep_factory(_error_model(params), {lc["input"]: _file_hash(lc["input"])})
    prof = level_measures(f)
    reasons = []
    summ = []
    for T in lc["T"]:
        r = summation_lemma(prof, float(T), params.n, params.s)
        summ.append((float(T), r))
        if not r.passed:
            reasons.append(_reason("summation", f"summation inequality fails for T = {T:g}"))
    os2 = os2_check(f, params) if params.s < 0.5 else None
    if os2 is not None and not os2["pass"]:
        reasons.append(_reason("dyadic_lower_bound", "dyadic lower bound fails"))
    comp = _complements(f, lc["points"], params, reasons)
    rep.csv("levelset_profile.csv", list(zip(prof.ks, prof.a, prof.d)))
    rep.csv("summation.csv", [(T, r.lhs, r.rhs, r.ratio, r.bound, r.passed) for T, r in summ])
    _complement_csv(rep, comp, f.n)
    rep.json("levelset.json", {"pass": not reasons, "reasons": reasons,
                               "profile": {"k_min": prof.k_min, "k_max": prof.k_max,
                                           "a": list(prof.a)},
                               "summation": [{"T": T, **r.to_dict()} for T, r in summ],
                               "dyadic_lower_bound": os2,
                               "complement": [{"x": x, **r.to_dict()} for x, r in comp]})
    return not reasons


def _complements(f, points, params, reasons):
    from .levelset import complement_integral
    E = np.flatnonzero(f.values != 0)
    out = []
    for x in points:
        if len(x) != f.n:
            raise ConfigError(f"point {x} does not have dimension {f.n}")
        r = complement_integral(E, x, f.geometry, params)
        out.append((list(map(float, x)), r))
        if not r.passed:
            reasons.append(_reason("complement_bound", "complement integral below the bound",
                                   x=list(x)))
    return out


def _complement_csv(rep, comp, n):
    cols = ["x"] + [f"x{k + 1}" for k in range(1, n)] + ["integral", "bound", "ratio", "passed"]
    rep.csv("complement.csv", [(*x, r.integral, r.bound, r.ratio, r.passed) for x, r in comp],
            cols)


def cmd_set_sobolev(cfg, rep_factory):
    from .levelset import set_sobolev

    sc = cfg["set_sobolev"]
    f = _input(sc["input"], "set_sobolev")
    params = _params(cfg, n=f.n)
    if params.s >= 0.5:
        raise ConfigError("set-sobolev needs s < 1/2 (sets of cells have infinite perimeter "
                          "energy otherwise)")
    rep = rep_factory(_error_model(params), {sc["input"]: _file_hash(sc["input"])})
    E = np.flatnonzero(f.values != 0)
    if E.size == 0:
        raise ConfigError("the input has empty support")
    res = set_sobolev(E, f.geometry, params)
    reasons = [] if res["pass"] else [_reason("set_sobolev", "set inequality fails")]
    comp = _complements(f, sc["points"], params, reasons)
    _complement_csv(rep, comp, f.n)
    rep.json("set_sobolev.json", {"pass": not reasons, "reasons": reasons, **res,
                                  "measure": float(E.size * f.geometry.cell_volume),
                                  "complement": [{"x": x, **r.to_dict()} for x, r in comp]})
    return not reasons


def cmd_barrier(cfg, rep_factory):
    from .barrier import barrier_sweep
    from .potential import find_grow_constant

    if not cfg["model"]["s"] < 0.5:
        raise ConfigError("barrier-verify requires s ∈ (0,1/2)")
    params = _params(cfg)
    bc = cfg["barrier"]
    c_grow = None
    tau = bc["tau"]
    if tau is None:
        c_grow = find_grow_constant(_potential(cfg))
        tau = c_grow / 4.0
    rep = rep_factory(_error_model(params))
    sw = barrier_sweep(params, bc["radii"], tau, bc["h"], bc["C_b"], bc["rule"])
    reps = sw["reports"]
    reasons = []
    if not sw["comparability_exact"]:
        reasons.append(_reason("comparability", "comparability constant differs from the construction"))
    if not sw["nonincreasing"]:
        reasons.append(_reason("margin_trend", "worst margin increases with R",
                               worst_margins=sw["worst_margins"]))
    if not sw["nondegenerate_passing_radii"]:
        msg = ("no radius where the one-sided bound holds" if not sw["passing_radii"] else
               "the bound holds only where the barrier is the constant w = 1")
        reasons.append(_reason("one_sided", msg, passing_radii=sw["passing_radii"]))
    rep.csv("barrier_summary.csv", [(r.R, r.worst_margin, r.one_sided_pass, r.comparability_constant,
                                     r.comparability_expected, r.range_constant, r.degenerate)
                                    for r in reps])
    margin_rows = []
    for r in reps:
        order = np.lexsort((r.margin, r.radius))
        margin_rows += [(r.R, r.radius[i], r.margin[i]) for i in order]
    rep.csv("barrier_margins.csv", margin_rows)
    series = []
    for r in reps:
        order = np.argsort(r.radius, kind="stable")
        series.append((f"R = {r.R:g}", (r.radius[order] / r.R).tolist(),
                       r.margin[order].tolist()))
    rep.svg("barrier_margins.svg", line_chart(series, "one-sided margin", "|x| / R", "margin"))
    rep.json("barrier.json", {
        "pass": not reasons, "reasons": reasons, "C_b": sw["C_b"], "tau": tau,
        "c_grow": c_grow, "rule": bc["rule"] if bc["C_b"] is None else "given",
        "worst_margins": sw["worst_margins"], "nonincreasing": sw["nonincreasing"],
        "passing_radii": sw["passing_radii"],
        "nondegenerate_passing_radii": sw["nondegenerate_passing_radii"],
        "R0": sw["R0"], "comparability_exact": sw["comparability_exact"],
        "reports": [{**r.to_dict(), "comparability_expected": r.comparability_expected} for r in reps]})
    return not reasons


def cmd_recursion(cfg, rep_factory):
    from .recursion import (GrowthFunction, RecursionParams, check_hypothesis, default_grid,
                            propagate_lower_bound)

    rc = cfg["recursion"]
    try:
        p = RecursionParams(**{k: float(v) for k, v in rc["params"].items()})
        V = GrowthFunction.from_dict(rc["V"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid recursion block: {exc}") from None
    rep = rep_factory(_error_model(_params(cfg)))
    grid = default_grid(p, rc["steps"], rc["grid_points_per_step"])
    lo, hi = V.domain
    grid = grid[(grid >= lo) & (grid * p.gamma <= hi)]
    hyp = check_hypothesis(V, p, grid)
    reasons, chain = [], None
    if not hyp["pass"]:
        reasons.append(_reason("hypothesis", f"hypothesis '{hyp['failed']}' fails",
                               first_violation=hyp["first_violation"]))
    else:
        try:
            chain = propagate_lower_bound(V, p, rc["steps"])
        except ValueError as exc:
            reasons.append(_reason("propagation", str(exc)))
        if chain is not None and not chain["below_V"]:
            reasons.append(_reason("lower_bound", "propagated bound exceeds V"))
    rep.csv("recursion_hypothesis.csv", list(zip(hyp.get("r", []), hyp["lhs"], hyp["rhs"])))
    if chain is not None:
        rep.csv("recursion_chain.csv", [(j, r, L, v) for j, (r, L, v) in
                                        enumerate(zip(chain["r"], chain["L"], chain["V"]))])
        rep.svg("recursion_exponent.svg",
                line_chart([("L_j", chain["r"], chain["L"]), ("V(r_j)", chain["r"], chain["V"])],
                           "propagated lower bound", "r", "value", logx=True, logy=True))
    hyp_out = {k: v for k, v in hyp.items() if k not in ("lhs", "rhs", "r")}
    chain_out = None if chain is None else {k: v for k, v in chain.items()
                                            if k not in ("r", "L", "V")}
    rep.json("recursion.json", {"pass": not reasons, "reasons": reasons, "hypothesis": hyp_out,
                                "chain": chain_out})
    return not reasons


def cmd_grow_constant(cfg, rep_factory):
    from .potential import check_wcond, find_grow_constant

    W = _potential(cfg)
    rep = rep_factory(_error_model(_params(cfg)))
    wc = check_wcond(W)
    reasons, c = [], None
    if not wc.passed:
        reasons.append(_reason("wcond", f"structural condition fails: {wc.worst}",
                               location=wc.location))
    try:
        c = find_grow_constant(W, cfg["grow_constant"]["points"])
    except ValueError as exc:
        reasons.append(_reason("grow", str(exc)))
    rep.csv("wcond.csv", [("structural", wc.violation, wc.passed),
                          ("W''(-1)", wc.values["W''(-1)"], wc.values["W''(-1)"] > 0),
                          ("W''(+1)", wc.values["W''(+1)"], wc.values["W''(+1)"] > 0),
                          ("c_grow", c, c is not None)])
    rep.json("grow_constant.json", {"pass": not reasons, "reasons": reasons,
                                    "wcond": wc.to_dict(), "c_grow": c,
                                    "tau_default": None if c is None else c / 4.0,
                                    "potential": W.to_dict()})
    return not reasons


def cmd_bench(cfg, rep_factory):
    from .bench import run_bench

    bc = cfg["bench"]
    params = _params(cfg)
    rep = rep_factory(_error_model(params))
    rows = run_bench(bc["sizes"], bc["threads"], bc["backends"] or None, params.n, params.s,
                     bc["repeats"], cfg["seed"])
    rep.csv("bench.csv", rows)
    rep.json("bench.json", {"pass": True, "reasons": [], "available": backend.available(),
                            "rows": [dict(zip(csv_columns()["bench.csv"], r)) for r in rows],
                            "note": "timings are machine dependent; not an acceptance gate"})
    return True


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracdensity", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--threads", type=int, help="threads for the pair loops")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field, e.g. model.s=0.4 (repeatable)")
        sp.add_argument("--n", type=int, help="shortcut for --set model.n=N")
        sp.add_argument("--s", type=float, help="shortcut for --set model.s=S")
        if name in ("sobolev-check", "levelset", "set-sobolev"):
            sp.add_argument("--input", help="grid function JSON file")
    return p


def run(argv=None) -> int:
    """Run one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = list(args.set)
        if args.n is not None:
            overrides.append(f"model.n={args.n}")
        if args.s is not None:
            overrides.append(f"model.s={args.s}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.out is not None:
            overrides.append(f"out={json.dumps(args.out)}")
        section = {"sobolev-check": "sobolev", "levelset": "levelset",
                   "set-sobolev": "set_sobolev"}.get(args.command)
        if section and args.input is not None:
            overrides.append(f"{section}.input={json.dumps(args.input)}")
        cfg = load_config(args.config, overrides)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            backend.set_num_threads(args.threads)
        rng = np.random.default_rng(cfg["seed"])

        def factory(err, inputs=None):
            return Reporter(cfg["out"], cfg, err, inputs)

        handlers = {
            "minimize": lambda: cmd_minimize(cfg, factory),
            "density": lambda: cmd_density(cfg, factory),
            "sobolev-check": lambda: cmd_sobolev(cfg, factory, rng),
            "levelset": lambda: cmd_levelset(cfg, factory),
            "set-sobolev": lambda: cmd_set_sobolev(cfg, factory),
            "barrier-verify": lambda: cmd_barrier(cfg, factory),
            "recursion": lambda: cmd_recursion(cfg, factory),
            "grow-constant": lambda: cmd_grow_constant(cfg, factory),
            "bench": lambda: cmd_bench(cfg, factory),
        }
        try:
            ok = handlers[args.command]()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    except ConfigError as exc:
        print(f"fracdensity: error: {exc}", file=sys.stderr)
        print(json.dumps({"code": "config", "message": str(exc)}, ensure_ascii=False),
              file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return 0 if ok else 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
