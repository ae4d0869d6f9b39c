"""Command-line front end.

Every run resolves a flat configuration (defaults, then ``--config``, then
flags), validates it, dispatches to one experiment and writes CSV and/or
JSON with the resolved configuration embedded, so any output file can be fed
back through ``--config`` to reproduce it.

Exit codes: 0 success, 2 validation error, 3 numerical-accuracy error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import bridges, estimator, fbm, fou, kernels, quad
from .errors import AccuracyError, DegenerateDenominatorError, DiagnosticsError, DomainError, SynthesisError

DEFAULT_SEED = 20240
COMMANDS = ("simulate", "estimate", "mc", "verify-kernels", "verify-quad", "bridge")
KERNEL_MODES = ("divergence", "drift", "contraction", "split")
BRIDGE_METHODS = ("all",) + tuple(m.value for m in bridges.Method)
FORMATS = ("csv", "json", "both")

KEYS = (
    "gamma.lambda",
    "gamma.omega",
    "hurst",
    "t_end",
    "n_steps",
    "n_reps",
    "seed",
    "t_list",
    "n_list",
    "alpha",
    "g_exp",
    "method",
    "mode",
    "correction",
    "density",
    "out_path",
    "format",
)

BASE_DEFAULTS: dict[str, Any] = {
    "gamma.lambda": 1.0,
    "gamma.omega": 1.0,
    "hurst": 0.35,
    "seed": DEFAULT_SEED,
    "out_path": None,
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"t_end": 10.0, "n_steps": 1024, "format": "csv"},
    "estimate": {"t_end": 50.0, "n_steps": 8192, "n_reps": 1, "correction": "feasible", "format": "csv"},
    "mc": {
        "t_list": [25.0, 50.0, 100.0],
        "n_steps": 16384,
        "n_reps": 500,
        "correction": "oracle",
        "format": "both",
    },
    "verify-kernels": {
        "mode": "divergence",
        "t_end": 10.0,
        "t_list": [10.0, 20.0, 40.0],
        "n_list": [64, 128, 256, 512],
        "n_steps": 48,
        "density": 12.8,
        "method": "auto",
        "format": "csv",
    },
    "verify-quad": {"t_list": [25.0, 50.0, 100.0], "format": "csv"},
    "bridge": {
        "alpha": 0.1,
        "t_end": 1.0,
        "method": "all",
        "n_steps": 8192,
        "n_reps": 40000,
        "format": "csv",
    },
}


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line, exit 2
        raise ConfigError(message)


# --------------------------------------------------------------------------
# parsing and validation


def _floats(s: str) -> list[float]:
    return [float(x) for x in str(s).split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in str(s).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfou", description="Complex fOU drift estimation and fBm kernel checks.")
    p.add_argument("--version", action="version", version=f"cfou {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file or a previous output file")
        s.add_argument("--threads", type=int, help="worker cap (fallback: CFOU_THREADS)")
        s.add_argument("--gamma.lambda", dest="gamma.lambda", type=float)
        s.add_argument("--gamma.omega", dest="gamma.omega", type=float)
        s.add_argument("--hurst", type=float)
        s.add_argument("--t-end", dest="t_end", type=float)
        s.add_argument("--n-steps", dest="n_steps", type=int)
        s.add_argument("--n-reps", dest="n_reps", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--t-list", dest="t_list", type=_floats)
        s.add_argument("--n-list", dest="n_list", type=_ints)
        s.add_argument("--alpha", type=float)
        s.add_argument("--g-exp", dest="g_exp", type=float)
        s.add_argument("--method")
        s.add_argument("--mode", choices=KERNEL_MODES)
        s.add_argument("--correction", choices=estimator.CORRECTIONS)
        s.add_argument("--density", type=float)
        s.add_argument("--out-path", dest="out_path")
        s.add_argument("--format", choices=FORMATS)
    return p


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    """Read ``{"command", "params"}`` from a config file or a previous output.

    Accepted: a plain JSON config, a JSON report (``meta.config``) or a CSV
    whose ``# config:`` metadata line holds the JSON config.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if "meta" in data and "config" in data["meta"]:
            data = data["meta"]["config"]
    else:
        lines = [ln[len("# config:") :] for ln in text.splitlines() if ln.startswith("# config:")]
        if not lines:
            raise ConfigError(f"no embedded config in {path}")
        data = json.loads(lines[0])
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"command", "params"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    params = data.get("params", {})
    bad = set(params) - set(KEYS)
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    return data


def resolve_config(command: str, file_cfg: dict | None, flags: dict[str, Any]) -> dict[str, Any]:
    if file_cfg and file_cfg.get("command", command) != command:
        raise ConfigError(f"config is for {file_cfg['command']!r}, not {command!r}")
    params = {**BASE_DEFAULTS, **COMMAND_DEFAULTS[command]}
    if file_cfg:
        params.update(file_cfg.get("params", {}))
    params.update({k: v for k, v in flags.items() if v is not None and k in KEYS})
    validate(command, params)
    return {"command": command, "params": {k: params[k] for k in sorted(params)}}


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(command: str, p: dict[str, Any]) -> None:
    _check(command in COMMANDS, f"unknown command {command!r}")
    bad = set(p) - set(KEYS)
    _check(not bad, f"unknown config keys: {sorted(bad)}")
    num = lambda k: isinstance(p.get(k), (int, float)) and not isinstance(p.get(k), bool) and np.isfinite(p[k])
    _check(num("gamma.lambda") and p["gamma.lambda"] > 0, "gamma.lambda must be a positive number")
    _check(num("gamma.omega"), "gamma.omega must be a finite number")
    _check(num("hurst") and 0 < p["hurst"] < 1, "hurst must lie in (0, 1)")
    _check(isinstance(p["seed"], int) and 0 <= p["seed"] < 2**64, "seed must be an integer in [0, 2^64)")
    if "t_end" in p:
        _check(num("t_end") and p["t_end"] > 0, "t_end must be positive")
    if "n_steps" in p:
        _check(isinstance(p["n_steps"], int) and p["n_steps"] >= 2, "n_steps must be an integer >= 2")
    if "n_reps" in p:
        lo = 2 if command == "mc" else 1
        _check(isinstance(p["n_reps"], int) and p["n_reps"] >= lo, f"n_reps must be an integer >= {lo}")
    if "t_list" in p:
        tl = p["t_list"]
        _check(isinstance(tl, list) and len(tl) > 0, "t_list must be a non-empty list")
        _check(all(isinstance(t, (int, float)) and t > 0 for t in tl), "t_list entries must be positive")
    if "n_list" in p:
        nl = p["n_list"]
        _check(isinstance(nl, list) and len(nl) > 0, "n_list must be a non-empty list")
        _check(all(isinstance(n, int) and n >= 8 for n in nl), "n_list entries must be integers >= 8")
    for k in ("alpha", "g_exp"):
        if p.get(k) is not None:
            _check(num(k) and 0 < p[k] < 1, f"{k} must lie in (0, 1)")
    if "density" in p:
        _check(num("density") and p["density"] > 0, "density must be positive")
    _check(p.get("format") in FORMATS, f"format must be one of {FORMATS}")
    if command == "verify-kernels":
        _check(p.get("mode") in KERNEL_MODES, f"mode must be one of {KERNEL_MODES}")
        _check(p.get("method") in ("auto", "step", "extrapolated"), "method must be auto, step or extrapolated")
    if command == "bridge":
        _check(p.get("method") in BRIDGE_METHODS, f"method must be one of {BRIDGE_METHODS}")
        _check(p["alpha"] < p["hurst"], "alpha must lie in (0, hurst)")
        if p.get("g_exp") is not None:
            _check(p["g_exp"] > p["hurst"], "g_exp must lie in (hurst, 1)")
    if command in ("estimate", "mc"):
        _check(p.get("correction") in estimator.CORRECTIONS, f"correction must be one of {estimator.CORRECTIONS}")


def resolve_threads(flag: int | None) -> int:
    raw = flag if flag is not None else os.environ.get("CFOU_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"threads must be an integer, got {raw!r}") from None
    _check(n >= 1, "threads must be >= 1")
    return n


# --------------------------------------------------------------------------
# experiments; each returns (csv_header, csv_rows, json_payload)


def _gamma(p) -> fou.DriftParam:
    return fou.DriftParam(p["gamma.lambda"], p["gamma.omega"])


def _cplx(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def run_simulate(p, threads):
    grid = fbm.UniformGrid(p["t_end"], p["n_steps"])
    path = fou.simulate_fou(_gamma(p), p["hurst"], grid, fbm.Seed(p["seed"]))
    rows = [(t, z.real, z.imag) for t, z in zip(grid.nodes, path.values)]
    payload = {"t": grid.nodes.tolist(), "re_z": path.values.real.tolist(), "im_z": path.values.imag.tolist()}
    return ("t", "re_z", "im_z"), rows, payload


def run_estimate(p, threads):
    g = _gamma(p)
    grid = fbm.UniformGrid(p["t_end"], p["n_steps"])
    est = estimator.estimate_batch(g, p["hurst"], grid, p["seed"], list(range(p["n_reps"])), p["correction"])
    rows = [(i, p["t_end"], e.real, e.imag) for i, e in enumerate(est)]
    payload = {
        "gamma": _cplx(g.gamma),
        "estimates": [_cplx(e) for e in est],
        "mean_abs_error": float(np.mean(np.abs(est - g.gamma))),
    }
    return ("rep", "T", "re_gamma_hat", "im_gamma_hat"), rows, payload


def run_mc(p, threads):
    rep = estimator.run_mc_experiment(
        _gamma(p),
        p["hurst"],
        p["t_list"],
        p["n_steps"],
        p["n_reps"],
        p["seed"],
        correction=p["correction"],
        threads=threads,
    )
    payload = rep.to_dict()
    try:
        payload["diagnostics"] = estimator.normality_diagnostics(rep).to_dict()
    except DiagnosticsError as exc:
        payload["diagnostics"] = {"unavailable": str(exc)}
    return estimator.CSV_COLUMNS, rep.csv_rows(), payload


def run_verify_kernels(p, threads):
    g, H, mode = _gamma(p), p["hurst"], p["mode"]
    if mode == "divergence":
        table = kernels.divergence_probe(H, g, p["t_end"], p["n_list"])
        return kernels.CSV_COLUMNS, table.csv_rows(), {"growth_ratio": table.growth_ratio()}
    if mode == "drift":
        norm = kernels.drift_sweep(g, H, p["t_list"], p["density"], quantity="norm", method=p["method"])
        inner = kernels.drift_sweep(g, H, p["t_list"], p["density"], quantity="inner", method=p["method"])
        a, b = kernels.linear_coefficients(g, H)
        rows = [("norm",) + r for r in norm.csv_rows()] + [("inner",) + r for r in inner.csv_rows()]
        payload = {
            "norm_coefficient": a,
            "inner_coefficient": _cplx(b),
            "norm_slope": _cplx(kernels.slope(norm)),
            "inner_slope": _cplx(kernels.slope(inner)),
        }
        return ("quantity",) + kernels.CSV_COLUMNS, rows, payload
    if mode == "contraction":
        vals = [(T, p["n_steps"], kernels.contraction_norm(g, H, T, p["n_steps"])) for T in sorted(p["t_list"])]
        return ("T", "n", "contraction_norm"), vals, {"values": [list(v) for v in vals]}
    split = kernels.three_term_split(g, H, p["t_end"])
    return ("term", "value"), sorted(split.items()), split


def _quad_rows(p):
    H, g = p["hurst"], complex(_gamma(p).gamma)
    b = 2 * H - 1
    jobs: list[tuple[str, Callable[[float], quad.ExpansionResult]]] = [
        (f"key0(beta={b:g})", lambda T: quad.asym_key0(b, T)),
        (f"key(a1={b:g},a2={b:g})", lambda T: quad.asym_key(b, b, T)),
        ("key(a1=-0.5,a2=-0.5)", lambda T: quad.asym_key(-0.5, -0.5, T)),
    ]
    for which in quad.CoroIntegral:
        jobs.append((f"coro({which.value})", lambda T, w=which: quad.asym_coro(g, H, T, w)))
    rows, rates = [], {}
    for name, fn in jobs:
        try:
            res = [fn(T) for T in sorted(p["t_list"])]
        except DomainError as exc:
            rates[name] = {"skipped": str(exc)}
            continue
        for r in res:
            ve, vq = complex(r.value_expansion), complex(r.value_quadrature)
            rows.append((name, r.t_end, ve.real, ve.imag, vq.real, vq.imag, r.abs_gap, r.gap_order))
        rates[name] = {"gap_order": res[0].gap_order, "gap_rate": quad.gap_rate(res) if len(res) > 1 else None}
    return rows, rates


def run_verify_quad(p, threads):
    rows, rates = _quad_rows(p)
    header = ("expansion", "T", "expansion_re", "expansion_im", "quadrature_re", "quadrature_im", "abs_gap", "gap_order")
    return header, rows, {"rates": rates}


def run_bridge(p, threads):
    bp = bridges.BridgeParams(p["hurst"], p["alpha"], p["t_end"])
    methods = tuple(bridges.Method) if p["method"] == "all" else (bridges.Method(p["method"]),)
    rows = bridges.moment_table(
        bp, methods=methods, n_steps=p["n_steps"], n_reps=p["n_reps"], seed=p["seed"], g_exp=p.get("g_exp")
    )
    payload = {"rows": [dict(zip(bridges.TABLE_COLUMNS, r)) for r in rows]}
    if p.get("g_exp") is not None:
        payload["bridge_limit_terms"] = bridges.bridge_limit_terms(p["hurst"], p["g_exp"])
    return bridges.TABLE_COLUMNS, rows, payload


RUNNERS = {
    "simulate": run_simulate,
    "estimate": run_estimate,
    "mc": run_mc,
    "verify-kernels": run_verify_kernels,
    "verify-quad": run_verify_quad,
    "bridge": run_bridge,
}


# --------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return _cplx(x)
    if isinstance(x, np.generic):
        return x.item()
    if hasattr(x, "__dataclass_fields__"):
        return _jsonable(asdict(x))
    if hasattr(x, "value") and hasattr(x, "name"):  # enum
        return x.value
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def embedded_config(config: dict) -> dict:
    """The config stored in outputs; the destination path is not part of a run."""
    params = {k: v for k, v in config["params"].items() if k != "out_path"}
    return {"command": config["command"], "params": params}


def metadata(config: dict) -> dict:
    return {"tool": "cfou", "version": __version__, "seed": config["params"]["seed"], "config": embedded_config(config)}


def render_csv(config: dict, header, rows) -> str:
    buf = io.StringIO()
    meta = metadata(config)
    buf.write(f"# tool: cfou {meta['version']}\n")
    buf.write(f"# seed: {meta['seed']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def render_json(config: dict, payload) -> str:
    return json.dumps({"meta": metadata(config), "report": _jsonable(payload)}, indent=2, sort_keys=True) + "\n"


def write_outputs(config: dict, header, rows, payload) -> list[str]:
    p = config["params"]
    fmt, out = p["format"], p["out_path"]
    texts = {}
    if fmt in ("csv", "both"):
        texts["csv"] = render_csv(config, header, rows)
    if fmt in ("json", "both"):
        texts["json"] = render_json(config, payload)
    if out is None:
        for t in texts.values():
            sys.stdout.write(t)
        return []
    base = Path(out)
    written = []
    for ext, t in texts.items():
        target = base if len(texts) == 1 else base.with_suffix("." + ext)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(t)
        written.append(str(target))
    return written


def dispatch(config: dict, threads: int = 1) -> list[str]:
    header, rows, payload = RUNNERS[config["command"]](config["params"], threads)
    return write_outputs(config, header, rows, payload)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k in KEYS}
        file_cfg = load_config_file(args.config) if args.config else None
        config = resolve_config(args.command, file_cfg, flags)
        threads = resolve_threads(args.threads)
        for path in dispatch(config, threads):
            print(f"wrote {path}", file=sys.stderr)
        return 0
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ConfigError, DomainError, json.JSONDecodeError, OSError) as exc:
        print(f"error: validation: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (AccuracyError, SynthesisError, DegenerateDenominatorError, DiagnosticsError, FloatingPointError) as exc:
        print(f"error: numerical: {_one_line(exc)}", file=sys.stderr)
        return 3


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__
