"""Config-driven batch runner: ``wsl <subcommand> --config <file> [--jobs N] [--out DIR]``.

Every run writes CSV/JSON artifacts plus ``manifest.json`` listing them.
Exit status is 0 on success, 1 on usage or configuration errors and 2 when
a numerical assertion fails (bound violated, unexpected pole, decay exponent
or identity convergence outside the expected range).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_ASSERT = 0, 1, 2
OUT_ENV = "WSL_OUT"
MANIFEST = "manifest.json"
KINDS = ("check-geometry", "sweep-resolvent", "scan-resonances", "verify-resfree", "propagate",
         "verify-identities")


class UsageError(Exception):
    """Bad command line or configuration (exit status 1)."""


# --------------------------------------------------------------------------- schema

_num = (int, float)
_NOTSET = object()


def _pos(v):
    return isinstance(v, _num) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _nonneg(v):
    return isinstance(v, _num) and not isinstance(v, bool) and math.isfinite(v) and v >= 0


def _real(v):
    return isinstance(v, _num) and not isinstance(v, bool) and math.isfinite(v)


def _posint(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _reals(v):
    return isinstance(v, list) and len(v) > 0 and all(_real(x) for x in v)


def _pair(v):
    return isinstance(v, list) and len(v) == 2 and all(_real(x) for x in v) and v[0] < v[1]


def _bool(v):
    return isinstance(v, bool)


def _str(v):
    return isinstance(v, str)


def _dict(v):
    return isinstance(v, dict)


_IDENTITIES = ("morawetz", "ibpe", "ibpy", "translation", "xrint1", "xrint2")

COMMON = {
    "kind": (_str, None, "one of " + ", ".join(KINDS)),
    "label": (_str, None, "a string"),
    "domain": (_dict, _NOTSET, "an object {\"type\": ..., \"params\": {...}}"),
    "seed": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0, 42, "a non-negative integer"),
    "out": (_str, None, "a directory path"),
}

SCHEMA = {
    "check-geometry": {
        "samples": (_posint, 400, "a positive integer"),
        "expect_theorem_class": (_str, None, "a theorem class string"),
        "expect_star_shaped": (_bool, None, "a boolean"),
    },
    "sweep-resolvent": {
        "h": (_pos, _NOTSET, "a positive number"),
        "L": (_pos, _NOTSET, "a positive number"),
        "delta": (lambda v: _pos(v) and v <= 1, 1.0, "a number in (0, 1]"),
        "E": (_reals, None, "a non-empty list of numbers"),
        "emin": (_real, None, "a number"),
        "emax": (_real, None, "a number"),
        "esteps": (_posint, None, "a positive integer"),
        "eps": (lambda v: _reals(v) and all(x > 0 for x in v), _NOTSET, "a list of positive numbers"),
        "weight": (lambda v: v in ("poly_minus", "morawetz_w"), "poly_minus", "\"poly_minus\" or \"morawetz_w\""),
        "check_bound": (_bool, None, "a boolean"),
        "headroom": (_pos, 1.07, "a positive number"),
        "expect_slope": (_pair, None, "a pair [lo, hi]"),
        "flag_divergence": (_bool, True, "a boolean"),
    },
    "scan-resonances": {
        "h": (_pos, _NOTSET, "a positive number"),
        "L": (_pos, _NOTSET, "a positive number"),
        "emin": (_real, _NOTSET, "a number"),
        "emax": (_real, _NOTSET, "a number"),
        "step": (_pos, 0.01, "a positive number"),
        "refine": (_bool, True, "a boolean"),
        "persistence": (_bool, True, "a boolean"),
        "expect_dips": (lambda v: v == "thresholds" or (isinstance(v, list) and all(_real(x) for x in v)),
                        [], "a list of numbers or \"thresholds\""),
        "tolerance": (_pos, 1e-2, "a positive number"),
        "edge_points": (lambda v: isinstance(v, list) and all(_real(x) for x in v), [], "a list of numbers"),
    },
    "verify-resfree": {
        "h": (_pos, _NOTSET, "a positive number"),
        "L": (_pos, _NOTSET, "a positive number"),
        "E_train": (_reals, [30.0, 60.0], "a list of numbers"),
        "E_verify": (_reals, [45.0, 90.0, 120.0], "a list of numbers"),
        "samples": (_posint, 20, "a positive integer"),
        "c1_candidates": (lambda v: _reals(v) and all(x > 0 for x in v), [1.0, 0.5, 0.2, 0.1, 0.05],
                          "a list of positive numbers"),
        "safety": (_pos, 1.5, "a positive number"),
        "c1": (_nonneg, None, "a non-negative number"),
        "c2": (_pos, None, "a positive number"),
        "pole_threshold": (_pos, None, "a positive number"),
    },
    "propagate": {
        "h": (_pos, _NOTSET, "a positive number"),
        "L": (_pos, _NOTSET, "a positive number"),
        "T": (_pos, _NOTSET, "a positive number"),
        "cfl": (_pos, 0.6, "a positive number"),
        "center": (lambda v: isinstance(v, list) and len(v) == 2 and all(_real(x) for x in v), _NOTSET,
                   "a pair [x, y]"),
        "radius": (_pos, 1.0, "a positive number"),
        "m": (lambda v: v in (0, 1) and not isinstance(v, bool), 0, "0 or 1"),
        "chi": (_pair, _NOTSET, "a pair [inner, outer]"),
        "window": (_pair, _NOTSET, "a pair [t_min, t_max]"),
        "record_every": (_posint, 1, "a positive integer"),
        "norm": (lambda v: v in (0, 1) and not isinstance(v, bool), 0, "0 or 1"),
        "expect_exponent": (_pair, None, "a pair [lo, hi]"),
    },
    "verify-identities": {
        "hs": (lambda v: _reals(v) and len(v) >= 2 and all(x > 0 for x in v), _NOTSET,
               "a list of at least two positive grid spacings"),
        "L": (_pos, _NOTSET, "a positive number"),
        "z": (lambda v: isinstance(v, list) and len(v) == 2 and all(_real(x) for x in v) and v[1] > 0,
              [10.0, 1.0], "a pair [E, eps] with eps > 0"),
        "source": (lambda v: isinstance(v, list) and len(v) == 3 and all(_real(x) for x in v) and v[2] > 0,
                   _NOTSET, "a triple [x, y, width]"),
        "localize": (_pair, None, "a pair [inner, outer]"),
        "weight": (lambda v: v in ("basic", "tanh"), "tanh", "\"basic\" or \"tanh\""),
        "delta": (lambda v: _pos(v) and v <= 1, 1.0, "a number in (0, 1]"),
        "identities": (lambda v: isinstance(v, list) and set(v) <= set(_IDENTITIES) and len(v) > 0,
                       None, "a list drawn from " + ", ".join(_IDENTITIES)),
        "R": (_pos, None, "a positive number"),
        "min_factor": (_pos, 1.5, "a positive number"),
        "poincare_trials": (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0, 0,
                            "a non-negative integer"),
        "poincare_deltas": (lambda v: _reals(v) and all(0 < x <= 1 for x in v), [0.1, 0.5, 1.0],
                            "a list of numbers in (0, 1]"),
        "poincare_slack": (_nonneg, 0.05, "a non-negative number"),
    },
}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key)
    return f"line {line}: " if line else ""


def parse_config(text: str, kind: str, source: str = "<config>") -> dict:
    """Parse and validate a JSON config for ``kind``; messages carry line numbers."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{source}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{source}: top level must be a JSON object")
    return validate_config(doc, kind, text, source)


def validate_config(doc: dict, kind: str, text: str = "", source: str = "<config>") -> dict:
    schema = {**COMMON, **SCHEMA[kind]}
    if doc.get("kind", kind) != kind:
        raise UsageError(f"{source}: {_where(text, 'kind')}config kind {doc['kind']!r} does not match "
                         f"subcommand {kind!r}")
    cfg = {}
    for key in doc:
        if key not in schema:
            raise UsageError(f"{source}: {_where(text, key)}unknown key {key!r} for {kind}")
    for key, (check, default, what) in schema.items():
        if key in doc and doc[key] is not None:
            if not check(doc[key]):
                raise UsageError(f"{source}: {_where(text, key)}{key!r} must be {what}, got {doc[key]!r}")
            cfg[key] = doc[key]
        elif default is _NOTSET:
            raise UsageError(f"{source}: missing required key {key!r} for {kind}")
        else:
            cfg[key] = default
    cfg["kind"] = kind
    from .geometry import GeometryError, domain_from_json

    try:
        cfg["_domain"] = domain_from_json(cfg["domain"])
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{source}: {_where(text, 'domain')}bad domain: {exc}") from None
    if kind == "sweep-resolvent":
        has_range = any(cfg[k] is not None for k in ("emin", "emax", "esteps"))
        if cfg["E"] is None and not (cfg["emin"] is not None and cfg["emax"] is not None and cfg["esteps"]):
            raise UsageError(f"{source}: sweep needs \"E\" or all of emin/emax/esteps")
        if cfg["E"] is not None and has_range:
            raise UsageError(f"{source}: {_where(text, 'E')}give either \"E\" or emin/emax/esteps, not both")
        if has_range and not cfg["emin"] < cfg["emax"]:
            raise UsageError(f"{source}: {_where(text, 'emin')}emin must be below emax")
    if kind == "scan-resonances" and not cfg["emin"] < cfg["emax"]:
        raise UsageError(f"{source}: {_where(text, 'emin')}emin must be below emax")
    return cfg


def _public(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def config_sha256(cfg: dict) -> str:
    blob = json.dumps(_public(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------- outputs


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


class Output:
    """Output directory that remembers every file written."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.root / name

    def csv(self, name: str, header, rows) -> Path:
        p = self._path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(r[k]) for k in header])
        return p

    def json(self, name: str, obj) -> Path:
        p = self._path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        return p

    def manifest(self, cfg: dict, started: str, elapsed: float, status: int, summary: dict) -> Path:
        files = [{"path": f, "sha256": hashlib.sha256((self.root / f).read_bytes()).hexdigest()}
                 for f in self.files]
        doc = {
            "config_sha256": config_sha256(cfg),
            "tool_version": __version__,
            "versions": {"python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "started": started,
            "elapsed_s": elapsed,
            "kind": cfg["kind"],
            "label": cfg.get("label"),
            "domain": cfg.get("_domain").name if cfg.get("_domain") is not None else None,
            "exit_code": status,
            "summary": summary,
            "config": _public(cfg),
            "files": files,
        }
        p = self.root / MANIFEST
        p.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
        return p


# --------------------------------------------------------------------------- runners


def _grid(cfg):
    from .discretize import build_grid
    from .geometry import GeometryError

    try:
        return build_grid(cfg["_domain"], cfg["h"], cfg["L"])
    except GeometryError as exc:
        raise UsageError(f"bad grid parameters: {exc}") from None


def run_check_geometry(cfg, out: Output, jobs: int):
    from .geometry import report

    dom = cfg["_domain"]
    rep = report(dom, cfg["samples"])
    doc = {"domain": dom.name, "star_shaped": rep.star_shaped, **rep.to_json()}
    out.json("geometry.json", doc)
    out.csv("violations.csv", ["x", "y"], [{"x": x, "y": y} for x, y in rep.violating_points])
    failures = []
    if cfg["expect_theorem_class"] is not None and rep.theorem_class != cfg["expect_theorem_class"]:
        failures.append(f"theorem_class {rep.theorem_class!r} != expected {cfg['expect_theorem_class']!r}")
    if cfg["expect_star_shaped"] is not None and rep.star_shaped != cfg["expect_star_shaped"]:
        failures.append("domain is not star-shaped in x: x nu_x > 0 somewhere on the boundary" if rep.star_shaped is False else
                        "domain is unexpectedly star-shaped in x")
    summary = {"theorem_class": rep.theorem_class, "star_shaped": rep.star_shaped,
               "sup_x_nu_x": rep.sup_x_nu_x, "failures": failures}
    return summary, not failures


def run_sweep(cfg, out: Output, jobs: int):
    from .dtn import sweep_bound, resolvent_bound

    dom = cfg["_domain"]
    grid = _grid(cfg)
    if cfg["E"] is not None:
        Es = [float(e) for e in cfg["E"]]
    else:
        Es = [float(e) for e in np.linspace(cfg["emin"], cfg["emax"], cfg["esteps"])]
    res = sweep_bound(dom, Es, cfg["eps"], cfg["delta"], grid, cfg["weight"], check_bound=cfg["check_bound"],
                      headroom=cfg["headroom"], jobs=jobs, seed=cfg["seed"])
    rows = sorted((p.row() for p in res.probes), key=lambda r: (r["E"], r["eps"]))
    for r in rows:
        r["bound"] = cfg["headroom"] * resolvent_bound(complex(r["E"], r["eps"]), cfg["delta"])
    out.csv("sweep.csv", ["E", "eps", "delta", "norm_estimate", "iterations", "residual", "L", "h", "bound"], rows)
    doc = res.to_json()
    failures = []
    if res.bound_violations:
        failures.append(f"{len(res.bound_violations)} probe(s) exceed headroom x 3/delta (1 + |z|^1/2)")
    if cfg["flag_divergence"] and res.divergent_E:
        failures.append("resolvent estimates diverge as eps -> 0 at E = "
                        + ", ".join(repr(e) for e in res.divergent_E) + " (embedded threshold resonance)")
    if cfg["expect_slope"] is not None:
        lo, hi = cfg["expect_slope"]
        if not (lo <= res.slope <= hi):
            failures.append(f"fitted slope {res.slope!r} outside [{lo!r}, {hi!r}]")
    doc["failures"] = failures
    out.json("sweep.json", doc)
    summary = {"slope": res.slope, "max_ratio_to_bound": max(r["norm_estimate"] / r["bound"] for r in rows),
               "bound_violations": len(res.bound_violations), "divergent_E": res.divergent_E, "failures": failures}
    return summary, not failures


def _expected_dips(cfg, dom):
    if cfg["expect_dips"] == "thresholds":
        lo, hi = cfg["emin"], cfg["emax"]
        return [float(s) for s in np.unique(np.round(dom.basis(64).sigmas ** 2, 12)) if lo < s < hi]
    return [float(e) for e in cfg["expect_dips"]]


def run_scan(cfg, out: Output, jobs: int):
    from .resonance import locate_pole, scan_real_axis
    from .riemann import BoundaryPoint

    dom = cfg["_domain"]
    grid = _grid(cfg)
    steps = int(round((cfg["emax"] - cfg["emin"]) / cfg["step"])) + 1
    res = scan_real_axis(dom, (cfg["emin"], cfg["emax"]), steps, grid, refine=cfg["refine"],
                         persistence=cfg["persistence"])
    out.csv("scan.csv", ["re_z", "im_z", "flipped_modes", "sigma_min"], res.rows())
    found = [d.location.real for d in res.persistent_dips] if cfg["persistence"] else \
        [d.location.real for d in res.dips]
    edge = []
    for E in cfg["edge_points"]:
        dip, flags = locate_pole(dom, BoundaryPoint(float(E)), grid)
        edge.append({"seed": float(E), "location": dip.location.real, "sigma_min": dip.sigma_min,
                     "persistent": dip.persistent, "flags": flags, "history": dip.history})
        if dip.persistent:
            found.append(dip.location.real)
    expected = _expected_dips(cfg, dom)
    tol = cfg["tolerance"]
    unexpected = [e for e in found if not any(abs(e - x) <= tol for x in expected)]
    missing = [x for x in expected if not any(abs(e - x) <= tol for e in found)]
    failures = []
    if unexpected:
        failures.append("unexpected pole(s) at E = " + ", ".join(repr(e) for e in unexpected))
    if missing:
        failures.append("no persistent dip near expected E = " + ", ".join(repr(e) for e in missing))
    doc = {"dips": [d.to_json() for d in res.dips], "edge": edge, "expected": expected, "found": sorted(found),
           "skipped": res.skipped, "failures": failures}
    out.json("dips.json", doc)
    summary = {"persistent_dips": sorted(found), "expected": expected, "failures": failures}
    return summary, not failures


def _resfree_task(args):
    spec, h, L, E, c1, samples, c2, thr, seed = args
    from .discretize import build_grid
    from .geometry import domain_from_json
    from .resonance import verify_resonance_free

    dom = domain_from_json(spec)
    return verify_resonance_free(dom, E, c1, build_grid(dom, h, L), samples, c2, thr, seed).to_json()


def run_resfree(cfg, out: Output, jobs: int):
    from .resonance import calibrate

    dom = cfg["_domain"]
    grid = _grid(cfg)
    if cfg["c1"] is not None and cfg["c2"] is not None and cfg["pole_threshold"] is not None:
        cal = {"c1": cfg["c1"], "c2": cfg["c2"], "pole_threshold": cfg["pole_threshold"], "training": {}}
    else:
        cal = calibrate(dom, grid, tuple(cfg["E_train"]), tuple(cfg["c1_candidates"]), cfg["samples"],
                        cfg["safety"], cfg["seed"]).to_json()
    out.json("calibration.json", cal)
    args = [(dom.spec, grid.h, grid.L, float(E), cal["c1"], cfg["samples"], cal["c2"], cal["pole_threshold"],
             cfg["seed"]) for E in cfg["E_verify"]]
    if jobs > 1 and dom.spec:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_resfree_task, args))
    else:
        from .resonance import verify_resonance_free

        reports = [verify_resonance_free(dom, a[3], a[4], grid, a[5], a[6], a[7], a[8]).to_json() for a in args]
    rows = []
    for rep in reports:
        for s, sm, nm in zip(rep["samples"], rep["sigma_min"], rep["norms"]):
            rows.append({"E": rep["E"], "radius": rep["radius"], "re_z": s["re"], "im_z": s["im"],
                         "flipped_modes": " ".join(map(str, s.get("flipped", []))), "sigma_min": sm,
                         "chi_norm": nm, "bound": cal["c2"] * math.sqrt(1 + rep["E"])})
    out.csv("resfree.csv", ["E", "radius", "re_z", "im_z", "flipped_modes", "sigma_min", "chi_norm", "bound"],
            rows)
    out.json("resfree.json", {"calibration": cal, "reports": reports})
    failures = [f"E={r['E']!r}: pole indicator or chi R chi bound failed" for r in reports if not r["ok"]]
    summary = {"c1": cal["c1"], "c2": cal["c2"], "ok_by_E": {repr(r["E"]): r["ok"] for r in reports},
               "failures": failures}
    return summary, not failures


def run_propagate(cfg, out: Output, jobs: int):
    from .discretize import assemble_laplacian, cutoff
    from .geometry import GeometryError
    from .waves import WaveState, fit_decay, initial_bump, propagate

    grid = _grid(cfg)
    try:
        f1, f2 = initial_bump(grid, cfg["center"], cfg["radius"], cfg["m"])
        chi = cutoff(grid.X, cfg["chi"][0], cfg["chi"][1], 0.0)
        _, series = propagate(grid, assemble_laplacian(grid), WaveState(f1, f2), cfg["T"], cfg["cfl"], chi,
                              cfg["record_every"], support_radius=cfg["radius"] + math.hypot(*cfg["center"]))
    except (GeometryError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    out.csv("series.csv", ["t", "norm_m0", "norm_m1", "energy"], series.rows())
    t, n0, n1, e = series.as_arrays()
    fit = fit_decay(t, n0 if cfg["norm"] == 0 else n1, tuple(cfg["window"]))
    failures = []
    if cfg["expect_exponent"] is not None:
        lo, hi = cfg["expect_exponent"]
        if not (lo <= fit.exponent <= hi):
            failures.append(f"decay exponent {fit.exponent!r} outside [{lo!r}, {hi!r}]")
    drift = float(np.ptp(e) / abs(e[0])) if e.size and e[0] else 0.0
    doc = {"fit": fit.to_json(), "energy_drift": drift, "unknowns": grid.n, "failures": failures}
    out.json("decay.json", doc)
    summary = {"exponent": fit.exponent, "energy_drift": drift, "failures": failures}
    return summary, not failures


def _poincare_trials(cfg, rng):
    from .discretize import build_grid
    from .identities import poincare_check
    from scipy.ndimage import gaussian_filter

    dom = cfg["_domain"]
    grid = build_grid(dom, cfg["hs"][0], cfg["L"])
    x0 = dom.x0 if dom.Y_minus.is_empty else 0.0
    keep = grid.X >= x0
    worst = {}
    for delta in cfg["poincare_deltas"]:
        ratios = []
        for _ in range(cfg["poincare_trials"]):
            field = rng.standard_normal(grid.mask.shape)
            sigma = rng.uniform(0.0, 8.0)
            if sigma > 0.5:
                field = gaussian_filter(field, sigma)
            u = field[grid.mask] * keep
            ratios.append(poincare_check(grid, u, delta, x0, cfg["poincare_slack"]).ratio)
        rep = poincare_check(grid, u, delta, x0, cfg["poincare_slack"])
        worst[repr(float(delta))] = {"max_ratio": max(ratios), "bound": rep.bound, "slack": rep.slack,
                                     "ok": max(ratios) <= rep.bound + rep.slack}
    return worst


def run_identities(cfg, out: Output, jobs: int):
    from .discretize import build_grid
    from .dtn import assemble_system
    from .identities import (build_weight_basic, eigenvalue_identity_check, ibpe_residual, ibpy_residual,
                             localize, morawetz_residual, tanh_weight)
    from .riemann import SheetPoint

    dom = cfg["_domain"]
    E, eps = cfg["z"]
    z = complex(E, eps)
    names = cfg["identities"] or list(_IDENTITIES)
    cx, cy, width = cfg["source"]
    two_ended = not dom.Y_minus.is_empty
    if cfg["weight"] == "basic":
        w = build_weight_basic(cfg["delta"])
    else:
        w = tanh_weight(1.0, dom.x0 if not two_ended else 0.0)
    loc = cfg["localize"]
    if loc is None:
        loc = [dom.R0 + 0.2, dom.R0 + 1.0]
    R = cfg["R"] if cfg["R"] is not None else dom.R0 + 0.5
    rows = []
    for h in sorted(cfg["hs"], reverse=True):
        try:
            grid = build_grid(dom, h, cfg["L"])
        except Exception as exc:
            raise UsageError(f"bad grid parameters: {exc}") from None
        system = assemble_system(grid, SheetPoint(z))
        f = np.exp(-((grid.X - cx) ** 2 + (grid.Y - cy) ** 2) / width)
        u = system.solve(f)
        v = localize(grid, u, *loc)
        reps = {}
        if "morawetz" in names:
            reps["morawetz"] = morawetz_residual(grid, v, w, E, eps)
        if "ibpe" in names:
            reps["ibpe"] = ibpe_residual(grid, v, tanh_weight(1.0, dom.x0), E, eps)
        if "ibpy" in names:
            reps["ibpy"] = ibpy_residual(grid, v, E, eps, "yj")
        if "translation" in names:
            reps["translation"] = ibpy_residual(grid, v, E, eps, "translation")
        if "xrint1" in names or "xrint2" in names:
            r1, r2 = eigenvalue_identity_check(grid, u, E, R, eps)
            if "xrint1" in names:
                reps["xrint1"] = r1
            if "xrint2" in names:
                reps["xrint2"] = r2
        for name in sorted(reps):
            r = reps[name]
            rows.append({"identity": name, "h": h, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual,
                         "relative_residual": r.relative_residual, "boundary_term": r.boundary_term})
    out.csv("identities.csv", ["identity", "h", "lhs", "rhs", "residual", "relative_residual", "boundary_term"],
            rows)
    factors = {}
    failures = []
    for name in sorted({r["identity"] for r in rows}):
        res = [r["residual"] for r in rows if r["identity"] == name]
        fs = [a / b if b > 0 else math.inf for a, b in zip(res, res[1:])]
        factors[name] = fs
        if any(f < cfg["min_factor"] for f in fs):
            failures.append(f"{name}: refinement factors {fs} below {cfg['min_factor']!r}")
    poinc = {}
    if cfg["poincare_trials"]:
        poinc = _poincare_trials(cfg, np.random.default_rng(cfg["seed"]))
        for d, rec in poinc.items():
            if not rec["ok"]:
                failures.append(f"Poincare ratio {rec['max_ratio']!r} exceeds bound at delta={d}")
    doc = {"factors": factors, "poincare": poinc, "failures": failures}
    out.json("identities.json", doc)
    return doc, not failures


RUNNERS = {
    "check-geometry": run_check_geometry,
    "sweep-resolvent": run_sweep,
    "scan-resonances": run_scan,
    "verify-resfree": run_resfree,
    "propagate": run_propagate,
    "verify-identities": run_identities,
}


def run(cfg: dict, out_dir, jobs: int = 1) -> int:
    """Execute a validated config; returns the exit status."""
    out = Output(out_dir)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    summary, ok = RUNNERS[cfg["kind"]](cfg, out, jobs)
    status = EXIT_OK if ok else EXIT_ASSERT
    out.manifest(cfg, started, time.perf_counter() - t0, status, summary)
    return status


# --------------------------------------------------------------------------- report

_TARGETS = {
    "check-geometry": "star-shaped in x (x nu_x <= 0)",
    "sweep-resolvent": "3/delta (1 + |z|^1/2) bound; slope vs 0.5",
    "scan-resonances": "dips vs thresholds",
    "verify-resfree": "no pole, chi R chi <= c2 (1 + E)^1/2",
    "propagate": "decay exponent vs -3/2 (half-strip) or -1",
    "verify-identities": "residual reduction >= 1.5x; Poincare constant",
}


def _headline(kind: str, s: dict) -> str:
    if kind == "check-geometry":
        return f"class={s.get('theorem_class')} sup x*nu_x={s.get('sup_x_nu_x')!r}"
    if kind == "sweep-resolvent":
        return f"slope={s.get('slope')!r} max/bound={s.get('max_ratio_to_bound')!r}"
    if kind == "scan-resonances":
        return f"dips={s.get('persistent_dips')} expected={s.get('expected')}"
    if kind == "verify-resfree":
        return f"c1={s.get('c1')!r} c2={s.get('c2')!r}"
    if kind == "propagate":
        return f"exponent={s.get('exponent')!r}"
    if kind == "verify-identities":
        return "min factor=" + repr(min((f for fs in s.get("factors", {}).values() for f in fs), default=math.nan))
    return ""


def report(run_dir, out_dir=None) -> dict:
    """Collect every manifest below ``run_dir`` into one summary grouped by domain."""
    root = Path(run_dir)
    if not root.is_dir():
        raise UsageError(f"{run_dir}: not a directory")
    manifests = sorted(p for p in root.rglob(MANIFEST))
    runs = []
    for p in manifests:
        doc = json.loads(p.read_text())
        if doc.get("kind") == "report":
            continue
        runs.append({"dir": str(p.parent.relative_to(root)), "kind": doc.get("kind"), "label": doc.get("label"),
                     "domain": doc.get("domain"), "pass": doc.get("exit_code") == EXIT_OK,
                     "target": _TARGETS.get(doc.get("kind"), ""),
                     "headline": _headline(doc.get("kind"), doc.get("summary", {})),
                     "failures": doc.get("summary", {}).get("failures", [])})
    if not runs:
        raise UsageError(f"{run_dir}: missing manifests (no run outputs found)")
    by_domain = {}
    for r in runs:
        by_domain.setdefault(r["domain"] or "?", []).append(r)
    lines = []
    for dom in sorted(by_domain):
        lines.append(f"[{dom}]")
        for r in sorted(by_domain[dom], key=lambda r: (r["kind"], r["dir"])):
            tag = "PASS" if r["pass"] else "FAIL"
            name = r["label"] or r["dir"]
            lines.append(f"  {tag}  {r['kind']:<18} {name:<28} {r['headline']}")
            for f in r["failures"]:
                lines.append(f"        - {f}")
    table = "\n".join(lines) + "\n"
    summary = {"runs": len(runs), "passed": sum(r["pass"] for r in runs), "by_domain": by_domain}
    if out_dir is not None:
        out = Output(out_dir)
        out.json("report.json", summary)
        (out.root / "report.txt").write_text(table)
        out.files.append("report.txt")
        cfg = {"kind": "report", "run_dir": str(run_dir)}
        out.manifest(cfg, datetime.now(timezone.utc).isoformat(timespec="seconds"), 0.0,
                     EXIT_OK if summary["passed"] == summary["runs"] else EXIT_ASSERT, {})
    summary["table"] = table
    return summary


# --------------------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"wsl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="output directory (overrides config and $" + OUT_ENV + ")")
        if kind == "sweep-resolvent":
            p.add_argument("--domain", help="domain JSON file (overrides the config's domain)")
            p.add_argument("--delta", type=float)
            p.add_argument("--emin", type=float)
            p.add_argument("--emax", type=float)
            p.add_argument("--esteps", type=int)
            p.add_argument("--epslist", help="comma-separated eps values")
            p.add_argument("--h", type=float)
            p.add_argument("--L", type=float)
    p = sub.add_parser("report")
    p.add_argument("dir", help="directory containing run outputs")
    p.add_argument("--out", help="where to write report.json/report.txt")
    return ap


def _load(args, kind: str) -> dict:
    doc, text, source = {}, "", "<flags>"
    if args.config:
        source = args.config
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{source}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{source}: top level must be a JSON object")
    if kind == "sweep-resolvent":
        if args.domain:
            try:
                doc["domain"] = json.loads(Path(args.domain).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read domain file: {exc}") from None
        for key in ("delta", "emin", "emax", "esteps", "h", "L"):
            v = getattr(args, key)
            if v is not None:
                doc[key] = v
        if args.emin is not None or args.emax is not None or args.esteps is not None:
            doc.pop("E", None)
        if args.epslist:
            try:
                doc["eps"] = [float(s) for s in args.epslist.split(",")]
            except ValueError:
                raise UsageError("--epslist must be comma-separated numbers") from None
    elif not args.config:
        raise UsageError(f"{kind} needs --config")
    return validate_config(doc, kind, text, source)


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "report":
            summary = report(args.dir, args.out)
            sys.stdout.write(summary["table"])
            return EXIT_OK if summary["passed"] == summary["runs"] else EXIT_ASSERT
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
        cfg = _load(args, args.command)
        out_dir = args.out or os.environ.get(OUT_ENV) or cfg.get("out") or "wsl-out"
        status = run(cfg, out_dir, args.jobs)
    except UsageError as exc:
        print(f"wsl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = json.loads((Path(out_dir) / MANIFEST).read_text())
    for f in manifest["summary"].get("failures", []):
        print(f"wsl: assertion failed: {f}", file=sys.stderr)
    print(f"wsl: {args.command} -> {out_dir} (exit {status})")
    return status


if __name__ == "__main__":
    sys.exit(main())
