"""Batch front-end: simulate, compute variations and integrals, run checks.

A run is a pure function of its resolved configuration: flags override
config-file values, the effective configuration is echoed into every output
artifact, and no artifact carries wall-clock state, so re-running a config
reproduces outputs byte for byte. Exit codes: 0 success, 1 input error,
2 hypothesis-check refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import itocheck, pathcore, stochastic, variation, young, young2d

COMMANDS = ("simulate", "variation", "young1d", "young2d", "localtime",
            "ito-check", "condition-check", "examples")


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _write_json(path, payload, config):
    payload = dict(payload)
    payload["config"] = config
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_config(args, defaults):
    config = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _CliError(f"malformed config: {exc}")
        if not isinstance(loaded, dict):
            raise _CliError("config file must hold a JSON object")
        config.update(loaded)
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            config[key] = val
    return config


def _common_flags(p, *, seeds=False, tol=False, force=False):
    p.add_argument("--config", help="JSON file with parameter defaults")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    if seeds:
        p.add_argument("--seeds", type=int, default=None,
                       help="number of replicates")
    if tol:
        p.add_argument("--tol", type=float, default=None)
    if force:
        p.add_argument("--force", action="store_true", default=None)


def _function_1d(name):
    base, params = pathcore._parse_name(name)
    if base == "x3cos":
        return pathcore.x3cos, pathcore.x3cos_left_derivative
    if base == "ramp":
        (a,) = params or [0.0]
        return (lambda x: np.maximum(np.asarray(x, float) - a, 0.0),
                lambda x: (np.asarray(x, float) > a).astype(float))
    if base == "polynomial":
        if not params:
            raise _CliError("polynomial(...) needs coefficients")
        dcoeffs = [k * c for k, c in enumerate(params)][1:] or [0.0]
        return (lambda x: np.polynomial.polynomial.polyval(np.asarray(x, float), params),
                lambda x: np.polynomial.polynomial.polyval(np.asarray(x, float), dcoeffs))
    raise _CliError(f"no 1-d function named {name!r}")


def _function_2d(name):
    base, _ = pathcore._parse_name(name)
    if base == "x3t3cos":
        return pathcore.x3t3cos, pathcore.x3t3cos_dt, pathcore.x3t3cos_dx
    raise _CliError(f"no 2-d function named {name!r}")


def _field_callable(name):
    base, _ = pathcore._parse_name(name)
    table = {
        "xysin": pathcore.xysin,
        "x3t3cos": pathcore.x3t3cos,
        "xy": lambda x, y: np.asarray(x, float) * np.asarray(y, float),
        "one": lambda x, y: np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape),
    }
    if base not in table:
        raise _CliError(f"no field function named {name!r}")
    return table[base]


def _out_dir(config):
    return Path(config.get("out") or "out")


# ---------------------------------------------------------------------------
# Commands.

def _cmd_condition_check(argv):
    p = _Parser(prog="pqvar condition-check")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--nmax", type=int, default=None)
    _common_flags(p, force=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"p": 1.0, "q": 1.0, "delta": 0.25,
                                 "nmax": 1000, "out": None, "force": False})
    cond = young2d.check_series_condition(config["p"], config["q"],
                                          config["delta"], config["nmax"])
    lo, hi = cond.alpha_interval
    status = "feasible" if cond.feasible else "infeasible"
    print(f"p={config['p']} q={config['q']}: {status}")
    print(f"alpha interval: ({lo!r}, {hi!r})")
    if cond.feasible:
        print(f"alpha={cond.alpha!r} effective_delta={cond.effective_delta!r}")
        for n, s in cond.partial_sums:
            print(f"  partial sum N={n}: {s!r}")
        print(f"  tail bound: {cond.tail_bound!r}")
    if config.get("out"):
        _write_json(_out_dir(config) / "condition.json", cond.to_json(), config)
    if not cond.feasible and not config.get("force"):
        return 2
    return 0


def _cmd_simulate(argv):
    p = _Parser(prog="pqvar simulate")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--drift", type=float, default=None)
    p.add_argument("--volatility", type=float, default=None)
    _common_flags(p, seeds=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"steps": 1024, "t": 1.0, "x0": 0.0,
                                 "drift": 0.0, "volatility": 1.0,
                                 "seed": 0, "seeds": 1, "out": "out"})
    spec = stochastic.SemimartingaleSpec(
        T=config["t"], n_steps=config["steps"], drift=config["drift"],
        volatility=config["volatility"], x0=config["x0"], seed=config["seed"])
    outdir = _out_dir(config)
    outdir.mkdir(parents=True, exist_ok=True)
    finals = []
    for rep in range(config["seeds"]):
        b = stochastic.simulate(spec, replicate=rep)
        finals.append(float(b.x[-1]))
        with open(outdir / f"path_{rep:04d}.csv", "w") as fh:
            fh.write("t,x,m,v,qv\n")
            for row in zip(b.times, b.x, b.m, b.v, b.qv):
                fh.write(",".join(repr(float(c)) for c in row) + "\n")
    summary = {"final_values": finals,
               "mean_final": float(np.mean(finals)),
               "var_final": float(np.var(finals, ddof=1)) if len(finals) > 1 else 0.0}
    _write_json(outdir / "simulate_summary.json", summary, config)
    print(f"wrote {config['seeds']} paths to {outdir}")
    return 0


def _cmd_variation(argv):
    p = _Parser(prog="pqvar variation")
    p.add_argument("--path-csv", dest="path_csv")
    p.add_argument("--field-csv", dest="field_csv")
    p.add_argument("--function")
    p.add_argument("--grid", help="a,b,n (1-d) or a,b,n,c,d,m (2-d)")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--budget", type=int, default=None)
    _common_flags(p)
    args = p.parse_args(argv)
    config = _load_config(args, {"p": 2.0, "q": None, "budget": 10,
                                 "out": None, "path_csv": None,
                                 "field_csv": None, "function": None,
                                 "grid": None})
    data = None
    if config.get("path_csv"):
        data = pathcore.SampledPath.from_csv(config["path_csv"])
    elif config.get("field_csv"):
        data = pathcore.SampledField.from_csv(config["field_csv"])
    elif config.get("function"):
        if not config.get("grid"):
            raise _CliError("--function needs --grid")
        parts = [float(v) for v in str(config["grid"]).split(",")]
        if len(parts) == 3:
            grid = np.linspace(parts[0], parts[1], int(parts[2]) + 1)
        elif len(parts) == 6:
            grid = (np.linspace(parts[0], parts[1], int(parts[2]) + 1),
                    np.linspace(parts[3], parts[4], int(parts[5]) + 1))
        else:
            raise _CliError("--grid must have 3 or 6 comma-separated values")
        data = pathcore.make_test_function(config["function"], grid)
    else:
        raise _CliError("need one of --path-csv, --field-csv, --function")

    if isinstance(data, pathcore.SampledPath):
        report = variation.p_variation_exact(data, config["p"])
    else:
        q = config.get("q") or 1.0
        report = variation.pq_variation_grid(data, config["p"], q,
                                             budget=config["budget"])
    print(f"exponents={report.exponents} value={report.value!r} "
          f"exactness={report.exactness}")
    if config.get("out"):
        _write_json(_out_dir(config) / "variation.json", report.to_json(), config)
    return 0


def _cmd_young1d(argv):
    p = _Parser(prog="pqvar young1d")
    p.add_argument("--f", dest="f_name")
    p.add_argument("--g", dest="g_name")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    _common_flags(p, tol=True, force=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"f_name": "polynomial(0,1)",
                                 "g_name": "polynomial(0,1)",
                                 "a": 0.0, "b": 1.0, "tol": 1e-4,
                                 "p": None, "q": None, "force": False,
                                 "out": None})
    f, _ = _function_1d(config["f_name"])
    g, _ = _function_1d(config["g_name"])
    try:
        res = young.young_integral_1d(
            f, g, interval=(config["a"], config["b"]), tol=config["tol"],
            p=config["p"], q=config["q"], force=bool(config["force"]))
    except young.YoungHypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    print(f"value={res.value!r} gap={res.gap!r} verdict={res.verdict}")
    if config.get("out"):
        _write_json(_out_dir(config) / "young1d.json", res.to_json(), config)
    return 0


def _cmd_young2d(argv):
    p = _Parser(prog="pqvar young2d")
    p.add_argument("--F", dest="f_name")
    p.add_argument("--G", dest="g_name")
    p.add_argument("--rect", help="x0,x1,y0,y1")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--jump-eps", dest="jump_eps", type=float, default=None)
    p.add_argument("--jump-grid", dest="jump_grid", type=int, default=None)
    p.add_argument("--backward", action="store_true", default=None)
    _common_flags(p, tol=True, force=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"f_name": "xy", "g_name": "xy",
                                 "rect": "0,1,0,1", "tol": 1e-3,
                                 "p": None, "q": None, "jump_eps": None,
                                 "jump_grid": 33, "backward": False,
                                 "force": False, "out": None})
    F = _field_callable(config["f_name"])
    G = _field_callable(config["g_name"])
    r = [float(v) for v in str(config["rect"]).split(",")]
    if len(r) != 4:
        raise _CliError("--rect must be x0,x1,y0,y1")
    rect = ((r[0], r[1]), (r[2], r[3]))
    jumps = young2d.JumpSets()
    if config.get("jump_eps"):
        gx = np.linspace(r[0], r[1], config["jump_grid"])
        gy = np.linspace(r[2], r[3], config["jump_grid"])
        xm, ym = np.meshgrid(gx, gy, indexing="ij")
        fld = pathcore.SampledField(gx, gy, G(xm, ym))
        jumps = young2d.JumpSets.detect(fld, config["jump_eps"])
        print(f"jump sets: H={list(jumps.H)} H'={list(jumps.Hprime)}")
    pq = None
    if config.get("p") is not None and config.get("q") is not None:
        pq = (config["p"], config["q"])
    fn = (young2d.young_integral_2d_backward if config.get("backward")
          else young2d.young_integral_2d)
    try:
        res = fn(F, G, rect=rect, jumps=jumps, tol=config["tol"], pq=pq,
                 force=bool(config["force"]))
    except young.YoungHypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    print(f"value={res.value!r} gap={res.gap!r} verdict={res.verdict}")
    if config.get("out"):
        payload = res.to_json()
        payload["jumps"] = {"H": list(jumps.H), "Hprime": list(jumps.Hprime)}
        _write_json(_out_dir(config) / "young2d.json", payload, config)
    return 0


def _cmd_localtime(argv):
    p = _Parser(prog="pqvar localtime")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--estimator", choices=("tanaka", "occupation"), default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    _common_flags(p, seeds=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"steps": 4096, "levels": 128, "x0": 0.0,
                                 "estimator": "tanaka", "eps": 0.05,
                                 "seed": 0, "seeds": 1, "out": "out"})
    spec = stochastic.SemimartingaleSpec(n_steps=config["steps"],
                                         x0=config["x0"], seed=config["seed"])
    outdir = _out_dir(config)
    for rep in range(config["seeds"]):
        b = stochastic.simulate(spec, replicate=rep)
        lo, hi = b.x.min(), b.x.max()
        pad = 0.01 * (hi - lo)
        levels = np.linspace(lo - pad, hi + pad, config["levels"] + 1)
        if config["estimator"] == "tanaka":
            ltf = stochastic.local_time_tanaka(b, levels)
        else:
            ltf = stochastic.local_time_occupation(b, levels, config["eps"])
        fld = ltf.as_field("L")
        outdir.mkdir(parents=True, exist_ok=True)
        fld.to_csv(outdir / f"localtime_{rep:04d}.csv")
        _write_json(outdir / f"localtime_{rep:04d}.json",
                    {"convention": ltf.convention,
                     "estimator": ltf.estimator,
                     "levels": ltf.levels.tolist(),
                     "times": ltf.times.tolist(),
                     "max_jump_part": float(np.max(np.abs(ltf.h)))},
                    config)
    print(f"wrote {config['seeds']} local-time fields to {outdir}")
    return 0


def _cmd_ito_check(argv):
    p = _Parser(prog="pqvar ito-check")
    p.add_argument("--mode", choices=("time-independent", "time-dependent"),
                   default=None)
    p.add_argument("--function", default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    _common_flags(p, seeds=True, force=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"mode": "time-independent",
                                 "function": "x3cos", "x0": 0.2,
                                 "seed": 0, "seeds": 1, "force": False,
                                 "p": 1.2, "q": 1.0, "out": "out"})
    base = stochastic.SemimartingaleSpec(x0=config["x0"], seed=config["seed"])
    outdir = _out_dir(config)
    residuals = []
    for rep in range(config["seeds"]):
        spec = replace(base, seed=config["seed"] + rep)
        try:
            if config["mode"] == "time-independent":
                f, grad = _function_1d(config["function"])
                rep_obj = itocheck.verify_ito_time_independent(f, grad, spec)
            else:
                f, dts, dxs = _function_2d(config["function"])
                rep_obj = itocheck.verify_ito_time_dependent(
                    f, dts, dxs, spec, pq_assert=(config["p"], config["q"]),
                    force=bool(config["force"]))
        except young.YoungHypothesisError as exc:
            print(f"refused: {exc}", file=sys.stderr)
            return 2
        residuals.append([r for _, r in rep_obj.refinement])
        _write_json(outdir / f"ito_{rep:04d}.json", rep_obj.to_json(), config)
    med = np.median(np.asarray(residuals), axis=0).tolist()
    _write_json(outdir / "ito_medians.json",
                {"median_residuals": med,
                 "n_steps": [int(n) for n, _ in itocheck.DEFAULT_SCHEDULE]},
                config)
    print("median residuals per level: "
          + " ".join(repr(v) for v in med))
    return 0


def _cmd_examples(argv):
    p = _Parser(prog="pqvar examples")
    p.add_argument("--name", choices=("tanaka", "x3cos", "x3t3cos", "xysin",
                                      "mollifier"), default=None)
    _common_flags(p, seeds=True)
    args = p.parse_args(argv)
    config = _load_config(args, {"name": "tanaka", "seed": 0, "seeds": 1,
                                 "out": "out"})
    outdir = _out_dir(config)
    name = config["name"]
    if name == "tanaka":
        f, grad = _function_1d("ramp(0.1)")
        for rep in range(config["seeds"]):
            spec = stochastic.SemimartingaleSpec(x0=0.2,
                                                 seed=config["seed"] + rep)
            rep_obj = itocheck.verify_ito_time_independent(
                f, grad, spec, schedule=((2**10, 2**6), (2**12, 2**8)),
                q_assert=1.5, check_variation=False)
            _write_json(outdir / f"tanaka_{rep:04d}.json", rep_obj.to_json(),
                        config)
        print(f"wrote {config['seeds']} reports to {outdir}")
        return 0
    if name == "x3cos":
        return _cmd_ito_check(["--mode", "time-independent", "--function",
                               "x3cos", "--seeds", str(config["seeds"]),
                               "--seed", str(config["seed"]),
                               "--out", str(outdir)])
    if name == "x3t3cos":
        return _cmd_ito_check(["--mode", "time-dependent", "--function",
                               "x3t3cos", "--seeds", str(config["seeds"]),
                               "--seed", str(config["seed"]),
                               "--out", str(outdir)])
    if name == "xysin":
        return _cmd_variation(["--function", "xysin", "--grid",
                               "0.05,1,24,0,1,4", "--p", "1.5", "--q", "1",
                               "--out", str(outdir)])
    if name == "mollifier":
        spec = pathcore.MollifierSpec()
        rows = []
        xs = np.linspace(-1.0, 1.0, 2001)
        for n in (4, 16, 64):
            gn = pathcore.mollify_1d(pathcore.x3cos, n, spec)
            rows.append([int(n), float(np.max(np.abs(gn(xs) - pathcore.x3cos(xs))))])
        _write_json(outdir / "mollifier.json",
                    {"sup_distance_per_order": rows}, config)
        print("sup distances:", rows)
        return 0
    raise _CliError(f"unknown example {name!r}")


_DISPATCH = {
    "simulate": _cmd_simulate,
    "variation": _cmd_variation,
    "young1d": _cmd_young1d,
    "young2d": _cmd_young2d,
    "localtime": _cmd_localtime,
    "ito-check": _cmd_ito_check,
    "condition-check": _cmd_condition_check,
    "examples": _cmd_examples,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: pqvar COMMAND [options]\ncommands: " + ", ".join(COMMANDS))
        return 0
    command, rest = argv[0], argv[1:]
    if command not in _DISPATCH:
        print(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
              file=sys.stderr)
        return 1
    try:
        return _DISPATCH[command](rest)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
