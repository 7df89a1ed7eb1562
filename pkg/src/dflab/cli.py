"""Command-line front end.

Exit codes: 0 when every contract passes, 1 on a contract failure, 2 on a
usage or configuration error.
"""

import argparse
import csv
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, DflabError, NoFeasibleEta, ParamBound

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["example"],
    "properties": {
        "example": {"type": "string"},
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "grids": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "boundary_budget": {"type": "integer", "minimum": 1},
                "k_budget": {"type": "integer", "minimum": 1},
                "k_grid": {"type": "object", "additionalProperties": False,
                           "properties": {"n_r": {"type": "integer", "minimum": 2},
                                          "n_theta": {"type": "integer", "minimum": 4}}},
                "vertex_exclusion": {"type": "number", "minimum": 0},
                "shells": {"type": "array", "items": _POS, "minItems": 1},
                "levi_budget": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "alpha_projection": _POS, "beta_psd": _NUM, "dc_alpha": _POS,
                "fd_step": _POS, "levi": _NUM, "levi_rel": _POS, "tube_fraction": _POS,
            },
        },
        "certify": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "weight": {"enum": ["zero", "leaf", "compare"]},
                "eta_lo": _POS, "eta_hi": _POS, "bisection_tol": _POS,
                "exterior_eta": _POS,
                "require_weight_inequality": {"type": "boolean"},
            },
        },
        "gvf": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "eps": _POS, "gamma": _POS, "m": {"type": "integer", "minimum": 1},
                "scaling_eps": {"type": "array", "items": _POS, "minItems": 2},
                "scaling_rtol": _POS,
                "obstruction_C": _POS,
                "Y_family": {"type": "array", "items": {"type": "object"}},
            },
        },
    },
}

DEFAULTS = {
    "params": {},
    "seed": 0,
    "grids": {"boundary_budget": 1000, "k_budget": 100, "k_grid": {"n_r": 12, "n_theta": 48},
              "vertex_exclusion": 0.2, "levi_budget": 2000},
    "tolerances": {"alpha_projection": 1e-6, "beta_psd": -1e-8, "dc_alpha": 1e-3,
                   "fd_step": 1e-4, "levi": -1e-8, "levi_rel": 1e-6, "tube_fraction": 0.05},
    "certify": {"weight": "zero", "eta_lo": 0.05, "eta_hi": 0.99, "bisection_tol": 1e-2,
                "exterior_eta": 0.9, "require_weight_inequality": False},
    "gvf": {"eps": 0.1, "scaling_eps": [0.2, 0.1, 0.05], "scaling_rtol": 1.5,
            "obstruction_C": 2.0,
            "Y_family": [{"kind": "zero"}, {"kind": "cos", "amplitude": 0.3}]},
}


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path, seed=None):
    """Read, validate and resolve a JSON run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = seed
    from .examples import EXAMPLES
    if cfg["example"] not in EXAMPLES:
        raise ConfigError(f"unknown example {cfg['example']!r}")
    return cfg


# ------------------------------------------------------------------ helpers

_DROP = ("runtime", "eigenvalues", "points")


def _clean(obj):
    """JSON-ready copy: arrays to lists, drop runtimes and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k not in _DROP}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write(out_dir, report, rows, dim):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "eigenvalues.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = []
        for j in range(dim):
            head += [f"re_z{j + 1}", f"im_z{j + 1}"]
        w.writerow(head + ["shell", "min_eig"])
        for z, shell, lam in rows:
            row = []
            for c in z:
                row += [repr(float(c.real)), repr(float(c.imag))]
            w.writerow(row + [repr(float(shell)), repr(float(lam))])


def _rows(Z, shell, lam):
    return [(Z[i], shell, lam[i]) for i in range(len(lam))]


def _entry(cfg):
    from .domain import SignedDistanceField
    from .examples import get_example

    try:
        e = get_example(cfg["example"], cfg["params"])
    except TypeError as exc:
        raise ConfigError(f"bad example parameters: {exc}") from exc
    sdf = SignedDistanceField(e.domain, tube_fraction=cfg["tolerances"]["tube_fraction"])
    return e, sdf


def _k_points(e, sdf, cfg):
    from .domain import boundary_points
    from .examples import worm_k_grid

    g = cfg["grids"]
    Z = worm_k_grid(e.worm, g["k_grid"]["n_r"], g["k_grid"]["n_theta"], g["vertex_exclusion"])
    return boundary_points(sdf, Z)


def _header(cfg, command):
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command,
            "config": cfg}


# ----------------------------------------------------------------- commands

def cmd_verify_forms(cfg, jobs):
    from .domain import boundary_sample
    from .forms import alpha_projection_residual, beta_matrix, dc_alpha_identity_residual
    from .wirtinger import min_eigenvalue

    e, sdf = _entry(cfg)
    tol = cfg["tolerances"]
    bp = boundary_sample(e.domain, cfg["grids"]["boundary_budget"], cfg["seed"])
    res = alpha_projection_residual(bp)
    lam = min_eigenvalue(beta_matrix(bp.delta_jet))
    ia, ib = int(np.argmax(res)), int(np.argmin(lam))
    rep = _header(cfg, "verify-forms")
    rep["alpha_projection"] = {"max_residual": res[ia], "worst_point": bp.z[ia],
                               "pass": bool(res[ia] < tol["alpha_projection"])}
    rep["beta_psd"] = {"min_eigenvalue": lam[ib], "worst_point": bp.z[ib],
                       "pass": bool(lam[ib] >= tol["beta_psd"])}
    ok = rep["alpha_projection"]["pass"] and rep["beta_psd"]["pass"]
    if e.worm is not None:
        kp = _k_points(e, sdf, cfg)
        kp = kp[np.arange(min(len(kp), cfg["grids"]["k_budget"]))]
        h = tol["fd_step"]
        r1 = dc_alpha_identity_residual(sdf, kp, h)
        r2 = dc_alpha_identity_residual(sdf, kp, h / 2)
        i = int(np.argmax(r1))
        rep["dc_alpha"] = {"max_residual": r1[i], "max_residual_half_step": float(r2.max()),
                           "ratio": float(r1.max() / r2.max()), "worst_point": kp.z[i],
                           "n": len(kp), "pass": bool(r1[i] < tol["dc_alpha"])}
        ok &= rep["dc_alpha"]["pass"]
    rep["pass"] = bool(ok)
    return rep, _rows(bp.z, 0.0, lam), 0 if ok else 1


def _certify_one(e, sdf, cfg, weight_kind, jobs):
    from .dfindex import certify_index_lower_bound
    from .domain import boundary_sample
    from .examples import leaf_package_for_worm_like, worm_leaf_weight_builder
    from .weights import zero_weight

    c = cfg["certify"]
    shells = cfg["grids"].get("shells") or e.grids["shells"]
    if e.worm is not None:
        bp = _k_points(e, sdf, cfg)
    else:
        bp = boundary_sample(e.domain, cfg["grids"]["boundary_budget"], cfg["seed"])
    if weight_kind == "leaf":
        if e.worm is None:
            raise ConfigError("leaf weights need a worm-like example")
        pkg = leaf_package_for_worm_like(e.worm, bp.z)
        builder = worm_leaf_weight_builder(pkg, sdf, bp.z)
    else:
        dim = e.domain.dim
        builder = lambda eta: zero_weight(dim)  # noqa: E731
    try:
        eta, hist = certify_index_lower_bound(sdf, builder, bp, shells, c["eta_lo"], c["eta_hi"],
                                              c["bisection_tol"], jobs,
                                              c["require_weight_inequality"])
        return {"weight": weight_kind, "certified_eta": eta, "history": hist, "feasible": True,
                "n_boundary": len(bp), "shells": shells}, builder, bp, shells
    except NoFeasibleEta as exc:
        return {"weight": weight_kind, "certified_eta": 0.0, "feasible": False,
                "reason": str(exc), "n_boundary": len(bp), "shells": shells}, builder, bp, shells


def cmd_certify(cfg, jobs):
    from .dfindex import CertificationRequest, certify, check_stein_exterior
    from .domain import boundary_sample
    from .weights import zero_weight

    e, sdf = _entry(cfg)
    c = cfg["certify"]
    if not 0 < c["eta_lo"] < c["eta_hi"] < 1:
        raise ConfigError("need 0 < eta_lo < eta_hi < 1")
    rep = _header(cfg, "certify")
    rows = []
    kinds = ["zero", "leaf"] if c["weight"] == "compare" else [c["weight"]]
    runs = {}
    for kind in kinds:
        res, builder, bp, shells = _certify_one(e, sdf, cfg, kind, jobs)
        if res["feasible"]:
            final = certify(CertificationRequest(sdf, builder(res["certified_eta"]),
                                                 res["certified_eta"], bp, tuple(shells), jobs))
            res["margins"] = final
            for sh in final["theta"]["shells"]:
                rows += _rows(sh["points"], sh["offset"], sh["eigenvalues"])
        runs[kind] = res
    rep["runs"] = runs
    if c["weight"] == "compare":
        rep["leaf_exceeds_trivial"] = bool(runs["leaf"]["certified_eta"]
                                           > runs["zero"]["certified_eta"])
        ok = rep["leaf_exceeds_trivial"]
    else:
        ok = runs[kinds[0]]["feasible"]
    if e.worm is None and c["weight"] == "zero":
        b = boundary_sample(e.domain, cfg["grids"]["boundary_budget"], cfg["seed"])
        shells = cfg["grids"].get("shells") or e.grids["shells"]
        ext = check_stein_exterior(CertificationRequest(sdf, zero_weight(e.domain.dim),
                                                        c["exterior_eta"], b, tuple(shells), jobs))
        rep["exterior"] = {"eta": c["exterior_eta"], **ext}
        ok &= ext["pass"]
    rep["pass"] = bool(ok)
    return rep, rows, 0 if ok else 1


def _Y_callbacks(specs, C):
    from . import wirtinger as W

    out, names = [], []
    for sp in specs:
        kind = sp.get("kind")
        if kind == "zero":
            def Y(z):
                return 0.0 * W.real(z[1])
            names.append("zero")
        elif kind == "cos":
            a = float(sp.get("amplitude", 0.3))

            def Y(z, a=a):
                return a * W.real(z[1]) * W.power(W.abs2(z[1]), -0.5)
            names.append(f"cos_{a:g}")
        elif kind == "constant":
            v = float(sp.get("value", 0.0))

            def Y(z, v=v):
                return v + 0.0 * W.real(z[1])
            names.append(f"constant_{v:g}")
        else:
            raise ConfigError(f"unknown Y kind {kind!r}")
        Y.dim = 2
        out.append(Y)
    return out, names


def cmd_check_gvf(cfg, jobs):
    from .domain import boundary_points
    from .examples import MuCuspFamily, on_cut, worm_base_field, worm_k_grid, worm_vertex_samples
    from .gvf import (AnnulusFieldParams, blended_field, check_good_field, h_from_field,
                      obstruction_scan, psi_scaling)

    e, sdf = _entry(cfg)
    if e.worm is None:
        raise ConfigError("check-gvf needs a worm-like example")
    g = cfg["gvf"]
    rep = _header(cfg, "check-gvf")
    ok = True
    rows = []
    C = g["obstruction_C"]
    Ys, names = _Y_callbacks(g["Y_family"], C)
    try:
        obs = obstruction_scan(sdf, Ys, C, names=names)
    except ParamBound as exc:
        raise ConfigError(str(exc)) from exc
    rep["obstruction"] = obs
    ok &= obs["pass"]
    if isinstance(e.worm.mu, MuCuspFamily):
        gamma = g.get("gamma", e.worm.mu.gamma)
        prm = AnnulusFieldParams(gamma, g["eps"], g.get("m"))
        base = worm_base_field(g["eps"])
        kg = cfg["grids"]["k_grid"]
        Zk = worm_k_grid(e.worm, kg["n_r"], kg["n_theta"], 0.0)
        Zk = Zk[~on_cut(Zk)]
        Zv = worm_vertex_samples(e.worm, prm.zeta, gamma)
        bp = boundary_points(sdf, np.concatenate([Zk, Zv]))
        X = blended_field(base, [0, 1], prm, sdf, leaf_coord=1)
        chk = check_good_field(X, bp)
        bk = boundary_points(sdf, Zk)
        hb = h_from_field(base, bk)
        rep["base_field"] = check_good_field(base, bk)
        rep["base_h"] = {k: v for k, v in hb.items() if k not in ("re_h", "im_h")}
        rep["blended_field"] = {"cutoff": prm.to_dict(), "n_vertex_samples": len(Zv), **chk}
        sc = psi_scaling(gamma, g["scaling_eps"], g.get("m"))
        lo, hi = 4.0 / g["scaling_rtol"], 4.0 * g["scaling_rtol"]
        sc["pass"] = bool(all(lo <= r <= hi for v in sc["ratios"].values() for r in v))
        rep["psi_scaling"] = sc
        ok &= chk["pass"] and sc["pass"] and rep["base_field"]["pass"]
        coef, _ = X(bp.z)
        Xd = np.abs(np.angle(np.einsum("nk,nk->n", coef, bp.delta_jet.dz)))
        rows = _rows(bp.z, 0.0, Xd)
    rep["pass"] = bool(ok)
    return rep, rows, 0 if ok else 1


def cmd_verify_example(cfg, jobs):
    from .domain import boundary_sample, levi_spectrum
    from .examples import (MuCuspFamily, mu_hypothesis_report, nonisotropic_collar_check,
                           worm_levi_ad, worm_levi_closed_form)

    e, sdf = _entry(cfg)
    tol = cfg["tolerances"]
    rep = _header(cfg, "verify-example")
    bp = boundary_sample(e.domain, cfg["grids"]["levi_budget"], cfg["seed"])
    lam = levi_spectrum(bp).min_eigenvalue
    i = int(np.argmin(lam))
    rep["levi"] = {"min_eigenvalue": lam[i], "worst_point": bp.z[i], "n": len(bp),
                   "pass": bool(lam[i] >= tol["levi"])}
    ok = rep["levi"]["pass"]
    if e.worm is not None:
        hyp = mu_hypothesis_report(e.worm.mu, seed=cfg["seed"])
        rep["mu_hypotheses"] = hyp
        if e.has_contract:
            ok &= hyp["pass"]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg["seed"], 21])))
        w = 1.5 * rng.standard_normal(20000) + 1.5j * rng.standard_normal(20000)
        mv = np.real(e.worm.mu(w))
        w = w[(mv > 2 * e.worm.t_min * e.worm.B) & (mv < e.worm.A) & (np.abs(w) > 0.05)][:500]
        if len(w) and e.has_contract:
            th = rng.uniform(0, 2 * np.pi, len(w))
            lev, Z, L = worm_levi_closed_form(w, th, e.worm)
            ad, _ = worm_levi_ad(e.worm, Z, L)
            rel = np.abs(lev - ad) / np.maximum(np.abs(ad), 1e-300)
            rep["levi_closed_form"] = {"max_relative_error": float(rel.max()), "n": len(w),
                                       "min_value": float(lev.min()),
                                       "pass": bool(rel.max() < tol["levi_rel"] and lev.min() > 0)}
            ok &= rep["levi_closed_form"]["pass"]
        if isinstance(e.worm.mu, MuCuspFamily):
            cmax = 2.0 ** (-(e.worm.mu.j - e.worm.mu.k) / e.worm.mu.j)
            rep["collar"] = nonisotropic_collar_check(e.worm.mu, 0.5 * cmax, seed=cfg["seed"])
    rep["pass"] = bool(ok)
    return rep, _rows(bp.z, 0.0, lam), 0 if ok else 1


COMMANDS = {
    "verify-forms": cmd_verify_forms,
    "certify": cmd_certify,
    "check-gvf": cmd_check_gvf,
    "verify-example": cmd_verify_example,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="dflab", description="Diederich-Fornaess index toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["list-examples"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "list-examples")
        p.add_argument("--out", default="dflab_out")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if args.command == "list-examples":
        from .examples import EXAMPLES, get_example
        out = [{"name": n, "has_contract": get_example(n).has_contract} for n in EXAMPLES]
        print(json.dumps(out, indent=2))
        return 0
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
        rep, rows, code = COMMANDS[args.command](cfg, args.jobs)
    except (ConfigError, ParamBound, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DflabError as exc:
        print(f"contract failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        rep = {**_header(cfg, args.command), "pass": False,
               "error": {"type": type(exc).__name__, "message": str(exc)}}
        _write(args.out, rep, [], 0)
        return 1
    dim = len(rows[0][0]) if rows else 0
    _write(args.out, rep, rows, dim)
    print(json.dumps({"command": args.command, "pass": rep["pass"], "out": args.out}))
    return code


if __name__ == "__main__":
    sys.exit(main())
