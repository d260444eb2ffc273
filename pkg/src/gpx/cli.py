"""``gpx`` command line: simulate, tail, pickands, criterion, lil, berman, plot.

Settings are layered: built-in defaults, then ``--config FILE`` (a JSON
object), then explicit flags.  Every subcommand writes a JSON report with
``schema_version``, ``command``, the fully resolved ``config``, ``result``
and a ``metadata`` block.  Only ``metadata`` (timestamp, version) varies
between identical runs.

Exit codes: 0 success, 2 invalid input or configuration, 1 computation failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import berman, correlation, extremes, gaussim, lil, orderstats, svg
from .rng import seed_from_env

SCHEMA_VERSION = "1"
DEFAULT_SEED = 0

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_POS_INT = {"type": "integer", "minimum": 1}
_STR = {"type": "string"}
_OPT_NUM = {"type": ["number", "null"]}
_OPT_INT = {"type": ["integer", "null"]}
_OPT_STR = {"type": ["string", "null"]}

_MODEL = {
    "family": {"enum": ["powered-exponential", "cauchy", "table"]},
    "c": _OPT_NUM, "alpha": _NUM, "lam": _OPT_NUM, "gamma": _OPT_NUM,
    "c_prime": _OPT_NUM, "table": _OPT_STR,
}
_MODEL_DEFAULTS = {"family": "powered-exponential", "c": 1.0, "alpha": 2.0, "lam": None,
                   "gamma": None, "c_prime": None, "table": None}
_COMMON = {"seed": {"type": "integer", "minimum": 0}, "threads": _OPT_INT, "out": _OPT_STR}

COMMANDS = {
    "simulate": ({**_MODEL, "n": _POS_INT, "t0": _NUM, "horizon": _NUM, "mesh": _NUM,
                  "replicate": {"type": "integer", "minimum": 0}, "data": _OPT_STR,
                  "format": {"enum": ["csv", "binary"]}},
                 {**_MODEL_DEFAULTS, "n": 1, "t0": 0.0, "horizon": 1.0, "mesh": 0.01,
                  "replicate": 0, "data": None, "format": "csv"}),
    "tail": ({**_MODEL, "n": _POS_INT, "r": _POS_INT, "u": _NUM, "theta": _NUM,
              "reps": _POS_INT, "H": _OPT_NUM, "halving": {"type": "boolean"}},
             {**_MODEL_DEFAULTS, "n": 1, "r": 1, "u": 3.0, "theta": 0.1, "reps": 100000,
              "H": None, "halving": True}),
    "pickands": ({"alpha": _NUM, "k": _POS_INT, "T": {"type": "array", "items": _NUM, "minItems": 1},
                  "theta": _NUM, "reps": _POS_INT, "max_halvings": {"type": "integer", "minimum": 0},
                  "estimator": {"enum": ["shifted", "direct"]}, "ladder_csv": _OPT_STR},
                 {"alpha": 1.0, "k": 1, "T": [8.0, 16.0, 32.0], "theta": 0.002, "reps": 4000,
                  "max_halvings": 3, "estimator": "shifted", "ladder_csv": None}),
    "criterion": ({"p": _NUM, "n": _POS_INT, "r": _POS_INT, "alpha": _NUM, "c": _NUM, "H": _OPT_NUM,
                   "T": _OPT_NUM, "u_max": _NUM},
                  {"p": 1.0, "n": 1, "r": 1, "alpha": 2.0, "c": 1.0, "H": None, "T": None,
                   "u_max": 1e12}),
    "lil": ({**_MODEL, "n": _POS_INT, "r": _POS_INT, "p": _NUM, "horizon": _NUM, "theta": _NUM,
             "runs": _POS_INT, "t_start": _OPT_NUM, "bins": _POS_INT, "H": _OPT_NUM,
             "crossings_csv": _OPT_STR},
            {**_MODEL_DEFAULTS, "n": 1, "r": 1, "p": 1.0, "horizon": 1e4, "theta": 0.1, "runs": 50,
             "t_start": None, "bins": 8, "H": None, "crossings_csv": None}),
    "berman": ({"instances": _OPT_STR, "count": _POS_INT, "calibrate": {"type": "integer", "minimum": 0},
                "d_max": {"type": "integer", "minimum": 2, "maximum": 4},
                "n_max": _POS_INT, "exponent": {"enum": ["stated", "proof"]}, "csv": _OPT_STR},
               {"instances": None, "count": 300, "calibrate": 200, "d_max": 4, "n_max": 2,
                "exponent": "stated", "csv": None}),
    "plot": ({"input": _STR, "title": _STR}, {"input": "", "title": ""}),
}

EPILOGS = {
    "simulate": "CSV columns: t,path_1,...,path_n.  Binary (GPX1): header magic,N,n,mesh,seed,t0 "
                "then n*N little-endian float64.",
    "pickands": "Ladder CSV columns: alpha,k,T,theta,value,ci,replicates.",
    "lil": "Crossing CSV columns (run 0): t,x_value,f_p,crossed.",
    "berman": "Batch CSV columns: instance_id,d,n,r,lhs_diff,bound,ratio (empty ratio = undefined).",
    "plot": "Input CSV columns: t,x_value,f_p,crossed.  Output: SVG.",
}


def config_schema(command: str) -> dict:
    props, _ = COMMANDS[command]
    return {"type": "object", "properties": {**props, **_COMMON}, "additionalProperties": False}


REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "command", "config", "result", "metadata"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": list(COMMANDS)},
        "config": {"type": "object"},
        "result": {"type": "object"},
        "metadata": {"type": "object", "required": ["timestamp"]},
    },
    "additionalProperties": False,
}


def validate_report(report: dict) -> None:
    """Check a report's envelope and its embedded config against the command schema."""
    jsonschema.validate(report, REPORT_SCHEMA)
    jsonschema.validate(report["config"], config_schema(report["command"]))


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("correlation model")
    g.add_argument("--family", choices=["powered-exponential", "cauchy", "table"])
    g.add_argument("--c", type=float, help="local constant C in 1 - r(t) ~ C|t|^alpha")
    g.add_argument("--alpha", type=float)
    g.add_argument("--lam", type=float, help="decay exponent lambda")
    g.add_argument("--gamma", type=float, help="Cauchy gamma")
    g.add_argument("--c-prime", dest="c_prime", type=float, help="Cauchy c'")
    g.add_argument("--table", help="CSV with columns t,r (tabulated family)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    mk = {}
    for name in COMMANDS:
        sp = sub.add_parser(name, epilog=EPILOGS.get(name), argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", dest="config_file", help="JSON object of settings; flags override it")
        sp.add_argument("--seed", type=int, help="master seed (fallback: GPX_SEED, then 0)")
        sp.add_argument("--threads", type=int, help="cap on worker threads")
        sp.add_argument("--out", help="JSON report path (default: stdout)")
        mk[name] = sp

    s = mk["simulate"]
    _model_flags(s)
    s.add_argument("--n", type=int)
    s.add_argument("--t0", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--mesh", type=float)
    s.add_argument("--replicate", type=int)
    s.add_argument("--data", help="path data file")
    s.add_argument("--format", choices=["csv", "binary"])

    s = mk["tail"]
    _model_flags(s)
    s.add_argument("--n", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--u", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--reps", type=int)
    s.add_argument("--H", type=float, help="H_{alpha,rhat} for the asymptotic value")
    s.add_argument("--no-halving", dest="halving", action="store_false")

    s = mk["pickands"]
    s.add_argument("--alpha", type=float)
    s.add_argument("--k", type=int)
    s.add_argument("--T", type=float, nargs="+", help="horizons; three or more are extrapolated")
    s.add_argument("--theta", type=float, help="initial mesh")
    s.add_argument("--reps", type=int)
    s.add_argument("--max-halvings", dest="max_halvings", type=int)
    s.add_argument("--estimator", choices=["shifted", "direct"])
    s.add_argument("--ladder-csv", dest="ladder_csv")

    s = mk["criterion"]
    s.add_argument("--p", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--c", type=float)
    s.add_argument("--H", type=float)
    s.add_argument("--T", type=float, help="lower integration limit (default max(s_min, e^e))")
    s.add_argument("--u-max", dest="u_max", type=float)

    s = mk["lil"]
    _model_flags(s)
    s.add_argument("--n", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--p", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--runs", type=int)
    s.add_argument("--t-start", dest="t_start", type=float)
    s.add_argument("--bins", type=int)
    s.add_argument("--H", type=float)
    s.add_argument("--crossings-csv", dest="crossings_csv")

    s = mk["berman"]
    s.add_argument("--instances", help="JSON list of instances; default is a random family")
    s.add_argument("--count", type=int, help="random instances to draw")
    s.add_argument("--calibrate", type=int, help="leading instances used to fit the constants")
    s.add_argument("--d-max", dest="d_max", type=int)
    s.add_argument("--n-max", dest="n_max", type=int)
    s.add_argument("--exponent", choices=["stated", "proof"])
    s.add_argument("--csv")

    s = mk["plot"]
    s.add_argument("--input", help="crossing CSV")
    s.add_argument("--title")
    return parser


def resolve_config(command: str, flags: dict) -> dict:
    """Defaults < config file < flags; seed falls back to ``GPX_SEED``."""
    file_cfg: dict = {}
    path = flags.pop("config_file", None)
    if path is not None:
        try:
            file_cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    _, defaults = COMMANDS[command]
    cfg = {**defaults, "seed": None, "threads": None, "out": None, **file_cfg, **flags}
    if cfg["seed"] is None:
        cfg["seed"] = seed_from_env(DEFAULT_SEED)
    try:
        jsonschema.validate(cfg, config_schema(command))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid config: {exc.message}") from None
    return cfg


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ValidationError(f"output path not writable: {path}")


def _model(cfg: dict) -> correlation.CorrelationModel:
    fam = cfg["family"]
    if fam == "powered-exponential":
        return correlation.powered_exponential(cfg["c"], cfg["alpha"], cfg["lam"] or 1.0)
    if fam == "cauchy":
        if cfg["c_prime"] is None or cfg["gamma"] is None:
            raise ValidationError("cauchy family needs --c-prime and --gamma")
        return correlation.cauchy(cfg["c_prime"], cfg["alpha"], cfg["gamma"])
    if cfg["table"] is None:
        raise ValidationError("table family needs --table")
    return correlation.load_table(cfg["table"], cfg["c"], cfg["alpha"], cfg["lam"] or 1.0)


# ---------------------------------------------------------------------------
# subcommands


def _simulate(cfg):
    model = _model(cfg)
    grid = gaussim.GridSpec(cfg["t0"], cfg["horizon"], cfg["mesh"])
    ens = gaussim.sample_stationary(model, grid, cfg["n"], cfg["seed"], cfg["replicate"])
    if cfg["data"]:
        (gaussim.write_csv if cfg["format"] == "csv" else gaussim.write_binary)(ens, cfg["data"])
    v = ens.values
    return {"model": model.describe(), "points": grid.count, "mesh": grid.mesh,
            "mean": v.mean(axis=1).tolist(), "var": v.var(axis=1).tolist(), "data": cfg["data"]}


def _tail(cfg):
    est = orderstats.empirical_tail(_model(cfg), cfg["n"], cfg["r"], cfg["u"], cfg["theta"],
                                    cfg["reps"], cfg["seed"], H=cfg["H"], threads=cfg["threads"],
                                    check_halving=cfg["halving"])
    return est.to_dict()


def _estimate_dict(e: extremes.PickandsEstimate) -> dict:
    return {"T": e.T, "theta": e.theta, "mesh": e.mesh, "value": e.value, "h_T": e.h_T,
            "se": e.se, "ci_half_width": e.ci_half_width, "replicates": e.replicates}


def _pickands(cfg):
    Ts = cfg["T"]
    if len(Ts) < 3:
        ladder = [extremes.pickands_estimate(cfg["alpha"], cfg["k"], T, cfg["theta"], cfg["reps"],
                                             cfg["seed"], estimator=cfg["estimator"],
                                             threads=cfg["threads"], stream=100 + i)
                  for i, T in enumerate(Ts)]
        if cfg["ladder_csv"]:
            extremes.write_ladder_csv(ladder, cfg["ladder_csv"])
        return {"ladder": [_estimate_dict(e) for e in ladder], "constant": None}
    pc = extremes.pickands_constant(cfg["alpha"], cfg["k"], Ts, cfg["theta"], cfg["reps"],
                                    cfg["seed"], max_halvings=cfg["max_halvings"],
                                    estimator=cfg["estimator"], threads=cfg["threads"])
    if cfg["ladder_csv"]:
        extremes.write_ladder_csv(pc.history[-1][2], cfg["ladder_csv"])
    levels = [{"theta": th, "intercept": fit.intercept, "intercept_se": fit.intercept_se,
               "slope": fit.slope, "ladder": [_estimate_dict(e) for e in ladder]}
              for th, fit, ladder in pc.history]
    return {"constant": {"value": pc.value, "se": pc.se, "ci_half_width": pc.ci_half_width,
                         "theta": pc.theta, "stable": pc.stable}, "levels": levels}


def _criterion(cfg):
    fam = lil.ThresholdFamily(cfg["p"], cfg["n"], cfg["r"], cfg["alpha"], cfg["c"], cfg["H"])
    out = {"verdict": lil.classify_dichotomy(fam), "exponent_shift": fam.exponent_shift,
           "s_min": fam.s_min, "integral": None}
    try:
        K = fam.gf_constant
    except ValueError:
        return out
    T = cfg["T"] if cfg["T"] is not None else max(fam.s_min, lil.E_E)
    res = lil.integral_If(lil.gf_tail_form(fam), T, cfg["u_max"],
                          threshold=(lambda s: lil.f_p(fam, s), fam.rhat))
    out["gf_constant"] = K
    out["integral"] = {"T": T, "u_max": cfg["u_max"], "verdict": res.verdict, "value": res.value,
                       "numeric": res.numeric, "remainder": res.remainder, "growth": res.growth,
                       "validity_band": res.in_band}
    return out


def _lil(cfg):
    model = _model(cfg)
    lc = lil.LilConfig(model, cfg["n"], cfg["r"], cfg["p"], cfg["horizon"], cfg["theta"],
                       cfg["runs"], cfg["seed"], cfg["t_start"], cfg["H"], cfg["bins"], cfg["threads"])
    rep = lil.lil_experiment(lc)
    if cfg["crossings_csv"]:
        grid = gaussim.GridSpec.covering(rep.t_start, lc.horizon, rep.mesh)
        ens = gaussim.sample_stationary(model, grid, lc.n, lc.seed, 0)
        path = orderstats.order_statistic_path(ens, lc.r)
        lil.write_crossing_csv(path, lc.family(), cfg["crossings_csv"])
    out = rep.to_dict()
    out.pop("config")
    out.pop("per_run")
    out["family"] = lc.family().describe()
    return out


def _berman(cfg):
    if cfg["instances"]:
        insts = berman.load_instances(cfg["instances"])
    else:
        gen = np.random.default_rng(cfg["seed"])
        insts = [berman.random_instance(gen, cfg["d_max"], cfg["n_max"]) for _ in range(cfg["count"])]
    reports = berman.check_batch(insts, cfg["exponent"], cfg["threads"])
    if cfg["csv"]:
        berman.write_batch_csv(reports, cfg["csv"])
    k = min(cfg["calibrate"], len(reports))
    calib, held = reports[:k], reports[k:]
    consts = berman.fit_constants(calib)
    bad = berman.held_out_violations(held, consts) if held else []
    status = {}
    for rep in reports:
        status[rep.status] = status.get(rep.status, 0) + 1
    return {"instances": len(reports), "status_counts": dict(sorted(status.items())),
            "constants": [{"n": n, "r": r, "C_hat": c} for (n, r), c in sorted(consts.items())],
            "held_out": len(held), "held_out_violations": [k + i for i in bad],
            "reports": [rep.to_dict() for rep in reports]}


def _plot(cfg):
    if not cfg["input"]:
        raise ValidationError("plot needs --input")
    if not cfg["out"]:
        raise ValidationError("plot needs --out for the SVG")
    markers = svg.plot_crossing_csv(cfg["input"], cfg["out"], cfg["title"])
    return {"svg": cfg["out"], "markers": markers}


HANDLERS = {"simulate": _simulate, "tail": _tail, "pickands": _pickands, "criterion": _criterion,
            "lil": _lil, "berman": _berman, "plot": _plot}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def make_report(command: str, cfg: dict, result: dict) -> dict:
    from . import __version__
    return _clean({"schema_version": SCHEMA_VERSION, "command": command, "config": cfg,
                   "result": result,
                   "metadata": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                                "version": __version__}})


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand, write artifacts; returns the exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    flags = vars(ns)
    command = flags.pop("command")
    try:
        cfg = resolve_config(command, flags)
        for key in ("out", "data", "ladder_csv", "crossings_csv", "csv"):
            _check_writable(cfg.get(key))
        result = HANDLERS[command](cfg)
    except (ValueError, jsonschema.ValidationError, OSError) as exc:
        print(f"gpx {command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any numerical failure maps to exit 1
        print(f"gpx {command}: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report = make_report(command, cfg, result)
    validate_report(report)
    text = dumps(report)
    if command != "plot" and cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())
