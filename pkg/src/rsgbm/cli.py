"""Command-line front end.

    rsgbm COMMAND [--config FILE] [--model FILE] [--output PATH] [--format csv|json]

The configuration document is JSON:

    {"command": "spectrum", "model": "model.json" or {...inline...},
     "params": {...}, "output": null, "format": "csv"}

Flags given on the command line override the matching top-level keys.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

from .ctmc import SeriesConfig, TwoStateModel, model_from_dict, model_issues
from .errors import (DomainError, ModelError, NumericalError, ParseError, RSGBMError,
                     ValidationError)
from .quadrature import QuadConfig

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3

MODEL_KEYS = {"Q", "mu", "sigma", "x0", "initial_state"}
MC_DEFAULTS = {"n_paths": 100_000, "master_seed": 20240601, "refinement": 1024,
               "confidence_level": 0.99}
BARRIER = {"a": None, "T": None}
PARAM_DEFAULTS = {
    "classify": {"tolerance": None},
    "spectrum": {"p_grid": [0.0, 0.5, 1.0, 1.5, 2.0], "convexity_tol": 1e-8},
    "moments": {"t_grid": [0.5, 1.0, 2.0, 5.0], "series_eps": 1e-12, "max_terms": 500},
    "fpp-bounds": {**BARRIER, "variant": "density", "series_eps": 1e-12, "max_terms": 500,
                   "quad_rtol": 1e-10},
    "fpp-mc": {**BARRIER, "mc": MC_DEFAULTS},
    "slepian": {**BARRIER, "mc": MC_DEFAULTS, "zero_eta": False},
    "validate": {"master_seed": 20240601, "path_scale": 1.0},
}
FORMATS = {"classify": ("json",), "spectrum": ("csv", "json"), "moments": ("csv", "json"),
           "fpp-bounds": ("json",), "fpp-mc": ("json",), "slepian": ("json",),
           "validate": ("json",)}
COMMANDS = tuple(PARAM_DEFAULTS)


@dataclass
class RunConfig:
    command: str
    model: object = None  # RegimeModel, None for validate
    params: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"
    model_path: str | None = None


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_params(cmd, given, errors):
    defaults = PARAM_DEFAULTS[cmd]
    if not isinstance(given, dict):
        errors.append(("params", "must be an object"))
        return {}
    out = {}
    for k in given:
        if k not in defaults:
            errors.append((f"params.{k}", f"unknown key for {cmd}"))
    for k, d in defaults.items():
        v = given.get(k, d)
        if k == "mc":
            v = _check_mc(v, errors)
        out[k] = v
    for k in ("a", "T"):
        if k in out:
            if out[k] is None:
                errors.append((f"params.{k}", "required"))
            elif not _is_number(out[k]) or out[k] <= 0:
                errors.append((f"params.{k}", f"must be a positive number, got {out[k]!r}"))
    for k in ("p_grid", "t_grid"):
        if k in out:
            g = out[k]
            if not (isinstance(g, list) and g and all(_is_number(x) for x in g)):
                errors.append((f"params.{k}", "must be a nonempty list of numbers"))
            elif any(b <= a for a, b in zip(g, g[1:])):
                errors.append((f"params.{k}", "must be strictly increasing"))
            elif k == "p_grid" and g[0] < 0:
                errors.append(("params.p_grid", "moment orders must be >= 0"))
            elif k == "t_grid" and g[0] <= 0:
                errors.append(("params.t_grid", "times must be > 0"))
    for k in ("series_eps", "quad_rtol", "convexity_tol", "path_scale"):
        if k in out and not (_is_number(out[k]) and out[k] > 0):
            errors.append((f"params.{k}", f"must be a positive number, got {out[k]!r}"))
    if "max_terms" in out and not (isinstance(out["max_terms"], int) and out["max_terms"] >= 1):
        errors.append(("params.max_terms", "must be a positive integer"))
    if "tolerance" in out and out["tolerance"] is not None and not (
            _is_number(out["tolerance"]) and out["tolerance"] >= 0):
        errors.append(("params.tolerance", "must be null or a number >= 0"))
    if "variant" in out and out["variant"] not in ("density", "printed"):
        errors.append(("params.variant", "must be 'density' or 'printed'"))
    if "master_seed" in out and not (isinstance(out["master_seed"], int)
                                     and 0 <= out["master_seed"] < 2 ** 64):
        errors.append(("params.master_seed", "must be a 64-bit unsigned integer"))
    if "zero_eta" in out and not isinstance(out["zero_eta"], bool):
        errors.append(("params.zero_eta", "must be true or false"))
    return out


def _check_mc(v, errors):
    if not isinstance(v, dict):
        errors.append(("params.mc", "must be an object"))
        return dict(MC_DEFAULTS)
    for k in v:
        if k not in MC_DEFAULTS:
            errors.append((f"params.mc.{k}", "unknown key"))
    out = {k: v.get(k, d) for k, d in MC_DEFAULTS.items()}
    if not (isinstance(out["n_paths"], int) and out["n_paths"] >= 100):
        errors.append(("params.mc.n_paths", "must be an integer >= 100"))
    if not (isinstance(out["master_seed"], int) and 0 <= out["master_seed"] < 2 ** 64):
        errors.append(("params.mc.master_seed", "must be a 64-bit unsigned integer"))
    r = out["refinement"]
    if not (isinstance(r, int) and r >= 1 and r & (r - 1) == 0):
        errors.append(("params.mc.refinement", "must be a power of two"))
    c = out["confidence_level"]
    if not (_is_number(c) and 0 < c < 1):
        errors.append(("params.mc.confidence_level", "must lie in (0, 1)"))
    return out


def _load_model_doc(ref, base_dir, errors):
    if isinstance(ref, str):
        path = ref if os.path.isabs(ref) or base_dir is None else os.path.join(base_dir, ref)
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            errors.append(("model", f"cannot read {path}: {exc.strerror}"))
            return None, path
        try:
            return json.loads(text), path
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from exc
    if isinstance(ref, dict):
        return ref, None
    errors.append(("model", "must be a file path or an inline object"))
    return None, None


def parse_config(text, base_dir=None, overrides=None):
    """Parse and fully validate a run configuration.

    Raises ParseError (with line and column) for malformed JSON and
    ValidationError listing every semantic problem found.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ValidationError([("", "configuration must be a JSON object")])
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    errors = []
    allowed = {"command", "model", "params", "output", "format"}
    for k in doc:
        if k not in allowed:
            errors.append((k, "unknown key"))
    cmd = doc.get("command")
    if cmd not in PARAM_DEFAULTS:
        errors.append(("command", f"must be one of {', '.join(COMMANDS)}, got {cmd!r}"))
        raise ValidationError(errors)
    params = _check_params(cmd, doc.get("params", {}), errors)
    fmt = doc.get("format", FORMATS[cmd][0])
    if fmt not in FORMATS[cmd]:
        errors.append(("format", f"{cmd} supports {', '.join(FORMATS[cmd])}, got {fmt!r}"))
    out = doc.get("output")
    if out is not None and not isinstance(out, str):
        errors.append(("output", "must be a path or null"))

    model, model_path = None, None
    if cmd != "validate":
        if "model" not in doc:
            errors.append(("model", "required"))
        else:
            mdoc, model_path = _load_model_doc(doc["model"], base_dir, errors)
            if mdoc is not None:
                model = _build_model(cmd, mdoc, errors)
    elif "model" in doc:
        errors.append(("model", "validate does not take a model"))
    if model is not None and "a" in params and _is_number(params["a"]):
        if not params["a"] < model.x0:
            errors.append(("params.a", f"barrier must be below x0 = {model.x0!r}"))
    if errors:
        raise ValidationError(errors)
    return RunConfig(cmd, model, params, out, fmt, model_path)


def _build_model(cmd, mdoc, errors):
    if not isinstance(mdoc, dict):
        errors.append(("model", "must be a JSON object"))
        return None
    bad = False
    for k in mdoc:
        if k not in MODEL_KEYS:
            errors.append((f"model.{k}", "unknown key"))
    for k in ("Q", "mu", "sigma"):
        if k not in mdoc:
            errors.append((f"model.{k}", "required"))
            bad = True
    if bad:
        return None
    issues = model_issues(mdoc["Q"], mdoc["mu"], mdoc["sigma"], mdoc.get("x0", 1.0),
                          mdoc.get("initial_state", 0))
    errors.extend((f"model.{f}", m) for f, m in issues)
    if issues or any(k not in MODEL_KEYS for k in mdoc):
        return None
    model = model_from_dict(mdoc)
    if cmd in ("moments", "fpp-bounds", "fpp-mc", "slepian"):
        if model.n_states != 2:
            errors.append(("model.Q", f"{cmd} needs a two-state model"))
            return None
        if model.initial_state != 0:
            errors.append(("model.initial_state", f"{cmd} assumes the chain starts in state 0"))
            return None
    return model


# --------------------------------------------------------------- running

def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _query(cfg):
    from .firstpassage import FirstPassageQuery
    m = TwoStateModel.from_regime(cfg.model)
    return FirstPassageQuery(m, m.regime.x0, float(cfg.params["a"]), float(cfg.params["T"]))


def _mc(cfg):
    from .montecarlo import MCConfig
    return MCConfig(**cfg.params["mc"])


def execute(cfg):
    """Run a validated configuration; returns (text, exit code)."""
    p = cfg.params
    if cfg.command == "classify":
        from .spectral import classify
        return _json(classify(cfg.model, p["tolerance"]).to_dict()), EXIT_OK
    if cfg.command == "spectrum":
        from .spectral import lyapunov_curve
        curve = lyapunov_curve(cfg.model, p["p_grid"], p["convexity_tol"])
        if curve.convexity_violations:
            print(f"warning: convexity violated at grid indices {curve.convexity_violations}",
                  file=sys.stderr)
        if cfg.format == "csv":
            return curve.to_csv(), EXIT_OK
        return _json({"p": curve.p.tolist(), "growth_rate": curve.growth_rate.tolist(),
                      "convexity_violations": curve.convexity_violations}), EXIT_OK
    if cfg.command == "moments":
        from .moments import lnx_moments, moments_csv
        series = SeriesConfig(p["series_eps"], p["max_terms"])
        res = [lnx_moments(TwoStateModel.from_regime(cfg.model), t, series) for t in p["t_grid"]]
        if cfg.format == "csv":
            return moments_csv(res), EXIT_OK
        return _json([{"t": r.t, "mean": r.mean, "second_moment": r.second_moment,
                       "variance": r.variance, "terms_used": r.terms_used} for r in res]), EXIT_OK
    if cfg.command == "fpp-bounds":
        from .firstpassage import bounds
        q = _query(cfg)
        r = bounds(q, SeriesConfig(p["series_eps"], p["max_terms"]),
                   QuadConfig(rtol=p["quad_rtol"]), p["variant"])
        return _json(r.to_dict(q)), EXIT_OK
    if cfg.command == "fpp-mc":
        from .montecarlo import estimate_first_passage
        q = _query(cfg)
        return _json({"query": q.to_dict(), **estimate_first_passage(q, _mc(cfg)).to_dict()}), EXIT_OK
    if cfg.command == "slepian":
        from .firstpassage import slepian_upper
        q = _query(cfg)
        est = slepian_upper(q, _mc(cfg), diagnostic_zero_eta=p["zero_eta"])
        return _json({"query": q.to_dict(), **est.to_dict()}), EXIT_OK
    if cfg.command == "validate":
        from .validation import ValidationConfig, report_json, run_validation
        report, timings = run_validation(ValidationConfig(p["master_seed"], None, p["path_scale"]))
        for k, sec in timings.items():
            print(f"criterion {k}: {sec:.1f} s", file=sys.stderr)
        for r in report["criteria"]:
            print(f"criterion {r['criterion']} ({r['name']}): {'PASS' if r['passed'] else 'FAIL'}",
                  file=sys.stderr)
        return report_json(report), EXIT_OK if report["passed"] else EXIT_ACCEPTANCE
    raise AssertionError(cfg.command)


def run(cfg):
    """Execute and write the output; diagnostics go to standard error."""
    try:
        text, code = execute(cfg)
    except (DomainError, ModelError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="rsgbm", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--model", help="model JSON file (overrides the config)")
    ap.add_argument("--output", help="output path (default: standard output)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--threads", type=int, help="worker threads for Monte Carlo")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ["RSGBM_THREADS"] = str(args.threads)
    base_dir = None
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
        base_dir = os.path.dirname(os.path.abspath(args.config))
    else:
        text = "{}"
    overrides = {"command": args.command, "model": args.model, "output": args.output,
                 "format": args.format}
    try:
        cfg = parse_config(text, base_dir, overrides)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        for f, m in exc.errors:
            print(f"invalid {f or 'config'}: {m}", file=sys.stderr)
        return EXIT_INVALID
    except RSGBMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
