"""Command-line front end: ``fibered-dyn <subcommand> --config cfg.json``.

Every run validates its JSON config against :data:`CONFIG_SCHEMA` before
doing any numerical work, then writes a JSON report (and CSV/PGM artifacts
where relevant) to the output directory.  Exit status:

* 0 -- every requested check passed its tolerance band;
* 1 -- a check ran but fell outside its band;
* 2 -- the config could not be read or failed validation;
* 3 -- a numerical failure (invalid map, non-convergence, degenerate fiber).

``FIBERED_DYN_SEED`` and ``FIBERED_DYN_WORKERS`` override the config; the
``--seed`` and ``--workers`` flags override both.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .algebra import UniPoly
from .bifurcation import (ParamFamily, bump, laplacian_density, negative_fraction, pairing,
                          scan_sigma, scan_sigma_periodic, sub_mean_value_fraction, to_pgm)
from .catalog import builtin_family, builtin_map
from .errors import FiberedDynError
from .geometry import FiberedMap, validate
from .green import DEFAULT_TOL, relative_green
from .lyapunov import Estimate, bj_check, exponents, sigma_periodic_approx
from .sampling import (P2_FUNCTIONS, bias_floor, combined_se, integrate, nested_integral,
                       sample_base, sample_equilibrium, sample_fiber_measure)

SUBCOMMANDS = ("validate", "green", "sample", "lyapunov", "bj-check", "periodic-check",
               "decomp-check", "bif-scan")
SEED_ENV = "FIBERED_DYN_SEED"
WORKERS_ENV = "FIBERED_DYN_WORKERS"

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_RECT = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_POLY = {"type": "array", "items": _COMPLEX, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "map": {"oneOf": [{"type": "string"}, {"type": "object"}]},
        "family": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["p", "q", "rect"],
                    "properties": {
                        "p": {"type": "object", "patternProperties": {r"^\d+$": _POLY},
                              "additionalProperties": False},
                        "q": {"type": "object", "patternProperties": {r"^\d+,\d+$": _POLY},
                              "additionalProperties": False},
                        "rect": _RECT,
                        "name": {"type": "string"},
                    },
                },
            ]
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "N": {"type": "integer", "minimum": 100},
        "n": {"type": "integer", "minimum": 1, "maximum": 10},
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 10}},
        "K": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "measure": {"enum": ["mu_f", "mu_theta", "fiber"]},
        "base_point": _COMPLEX,
        "method": {"enum": ["direct", "pairing"]},
        "blur": {"type": "number", "minimum": 0},
        "gap_tol": {"type": "number", "minimum": 0},
        "pgm": {"type": "boolean"},
        "bump": {
            "type": "object",
            "additionalProperties": False,
            "required": ["center", "radius"],
            "properties": {"center": _COMPLEX, "radius": {"type": "number", "exclusiveMinimum": 0}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["nx"],
            "properties": {
                "nx": {"type": "integer", "minimum": 3, "maximum": 4096},
                "ny": {"type": "integer", "minimum": 3, "maximum": 4096},
                "rect": _RECT,
            },
        },
    },
}

# per-subcommand defaults and required keys
_DEFAULTS = {
    "validate": {},
    "green": {"tol": DEFAULT_TOL, "base_point": [0.0, 0.0], "pgm": True,
              "grid": {"nx": 64, "rect": [-2.0, 2.0, -2.0, 2.0]}},
    "sample": {"N": 10_000, "measure": "mu_f", "base_point": [0.0, 0.0]},
    "lyapunov": {"N": 100_000},
    "bj-check": {"N": 100_000, "tol": DEFAULT_TOL},
    "periodic-check": {"N": 100_000, "n_list": [3, 4, 5, 6], "tol": DEFAULT_TOL, "gap_tol": 0.01},
    "decomp-check": {"N": 20_000, "K": 50},
    "bif-scan": {"N": 20_000, "method": "direct", "blur": 0.0, "pgm": True, "tol": DEFAULT_TOL,
                 "grid": {"nx": 64}},
}
_NEEDS = {"bif-scan": "family"}


class ConfigError(Exception):
    """Raised for unreadable or invalid configuration."""


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def resolve_config(command: str, cfg: dict, seed: Optional[int] = None,
                   workers: Optional[int] = None, out: Optional[str] = None,
                   environ=None) -> dict:
    """Merge defaults, config file, environment and flags; validate the result."""
    environ = os.environ if environ is None else environ
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config error at {list(exc.absolute_path)}: {exc.message}") from exc
    merged = copy.deepcopy(_DEFAULTS[command])
    for key, val in cfg.items():
        if isinstance(val, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **val}
        else:
            merged[key] = val
    merged.setdefault("seed", 0)
    merged.setdefault("workers", 1)
    for key, env, flag in (("seed", SEED_ENV, seed), ("workers", WORKERS_ENV, workers)):
        if env in environ:
            try:
                merged[key] = int(environ[env])
            except ValueError as exc:
                raise ConfigError(f"{env} must be an integer") from exc
        if flag is not None:
            merged[key] = flag
    if out is not None:
        merged["out"] = out
    merged.setdefault("out", ".")
    try:
        jsonschema.validate(merged, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config error at {list(exc.absolute_path)}: {exc.message}") from exc
    need = _NEEDS.get(command, "map")
    if need not in merged:
        raise ConfigError(f"{command} needs a {need!r} entry")
    return merged


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON of everything that affects the numbers."""
    core = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def _complex(pair) -> complex:
    return complex(pair[0], pair[1])


def resolve_map(spec) -> FiberedMap:
    if isinstance(spec, str):
        try:
            return builtin_map(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return FiberedMap.from_json(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build map from config: {exc}") from exc


def resolve_family(spec, rect=None) -> ParamFamily:
    if isinstance(spec, str):
        try:
            return builtin_family(spec, rect)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    p = {int(k): UniPoly([_complex(c) for c in v]) for k, v in spec["p"].items()}
    q = {tuple(int(x) for x in k.split(",")): UniPoly([_complex(c) for c in v])
         for k, v in spec["q"].items()}
    try:
        return ParamFamily.from_skew(p, q, rect or spec["rect"], spec.get("name", "inline"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build family from config: {exc}") from exc


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _est(e: Estimate, seed: int, **extra) -> dict:
    return {"value": e.value, "se": e.se, "N": e.n, "seed": seed, "method": e.method, **extra}


def _check(name: str, value: float, band: float, passed: bool) -> dict:
    return {"name": name, "value": value, "band": band, "passed": bool(passed)}


class Run:
    """Collects the report and artifacts of one subcommand invocation."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.report = {"command": command, "version": __version__, "config": cfg,
                       "config_hash": config_hash(cfg), "seed": cfg["seed"], "results": {},
                       "checks": [], "artifacts": []}

    def check(self, name: str, value: float, band: float, passed: bool) -> None:
        self.report["checks"].append(_check(name, value, band, passed))

    def artifact(self, name: str, data) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data)
        self.report["artifacts"].append(name)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.report["checks"])

    def finish(self, status: int) -> int:
        self.report["status"] = status
        self.artifact(f"{self.command}.json", json.dumps(self.report, indent=2, sort_keys=True,
                                                         default=_json_default) + "\n")
        return status


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(run: Run) -> None:
    f = resolve_map(run.cfg["map"])
    rep = validate(f)
    run.report["results"] = {"map": f.to_json(), "validation": rep.to_json()}
    if not rep.passed:
        raise FiberedDynError("map failed validation: " + ", ".join(rep.failures()))


def cmd_green(run: Run) -> None:
    """Relative Green function on the fiber over ``base_point``, on a grid of ``z`` values."""
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    grid = cfg["grid"]
    nx = grid["nx"]
    ny = grid.get("ny", nx)
    x0, x1, y0, y1 = grid.get("rect", [-2.0, 2.0, -2.0, 2.0])
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    z = xs[None, :] + 1j * ys[:, None]
    t = _complex(cfg["base_point"])
    X = np.stack([np.full(z.shape, t), np.ones(z.shape, complex), z], axis=-1)
    g = relative_green(f, X, cfg["tol"])
    vals = np.asarray(g.value, float)
    lines = ["x_index,y_index,value,bound"]
    for iy in range(ny):
        for ix in range(nx):
            lines.append(f"{ix},{iy},{float(vals[iy, ix])!r},{g.truncation_bound!r}")
    run.artifact("green.csv", "\n".join(lines) + "\n")
    run.report["results"] = {
        "base_point": cfg["base_point"], "grid": {"nx": nx, "ny": ny, "rect": [x0, x1, y0, y1]},
        "min": {"value": float(np.min(vals)), "truncation_bound": g.truncation_bound},
        "max": {"value": float(np.max(vals)), "truncation_bound": g.truncation_bound},
        "iterations_used": g.iterations_used, "tol": cfg["tol"],
    }
    run.check("G >= -2 tol", float(np.min(vals)), -2 * cfg["tol"], np.min(vals) >= -2 * cfg["tol"])
    if cfg["pgm"]:
        img, mapping = to_pgm(vals)
        run.artifact("green.pgm", img)
        run.report["results"]["pgm_mapping"] = mapping


def cmd_sample(run: Run) -> None:
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    if cfg["measure"] == "mu_f":
        s = sample_equilibrium(f, cfg["N"], seed=cfg["seed"])
    elif cfg["measure"] == "mu_theta":
        s = sample_base(f, cfg["N"], seed=cfg["seed"])
    else:
        t = _complex(cfg["base_point"])
        s = sample_fiber_measure(f, np.array([t, 1.0]), cfg["N"], seed=cfg["seed"])
    run.artifact("sample.csv", s.to_csv())
    run.report["results"] = {"sample": s.metadata()}


def _exponent_report(f: FiberedMap, N: int, seed: int):
    ss = np.random.SeedSequence(seed).spawn(2)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in ss]
    sf = sample_equilibrium(f, N, seed=seeds[0])
    st = sample_base(f, N, seed=seeds[1])
    return exponents(f, sf, st), seeds


def cmd_lyapunov(run: Run) -> None:
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    rep, seeds = _exponent_report(f, cfg["N"], cfg["seed"])
    run.report["results"] = {
        "lambda_f": _est(rep.lambda_f, seeds[0]),
        "lambda_f_direct": _est(rep.lambda_f_direct, seeds[0]),
        "lambda_theta": _est(rep.lambda_theta, seeds[1]),
        "lambda_sigma": _est(rep.lambda_sigma, seeds[0]),
        "lambda_0": {"value": rep.lambda_0, "se": 0.0},
        "dropped": rep.dropped,
    }
    half = 0.5 * math.log(f.d)
    run.check("Lambda_sigma >= log d - 3 SE", rep.lambda_sigma.value,
              math.log(f.d) - 3 * rep.lambda_sigma.se,
              rep.lambda_sigma.value >= math.log(f.d) - 3 * rep.lambda_sigma.se)
    run.check("Lambda_theta >= log(d)/2 - 3 SE", rep.lambda_theta.value,
              half - 3 * rep.lambda_theta.se, rep.lambda_theta.value >= half - 3 * rep.lambda_theta.se)


def cmd_bj_check(run: Run) -> None:
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    rep = bj_check(f, cfg["N"], seed=cfg["seed"], tol=cfg["tol"])
    out = rep.to_json()
    out["tol"] = cfg["tol"]
    out["seed"] = cfg["seed"]
    run.report["results"] = out
    run.check("|direct - (log d + pairing)| <= 3 SE", rep.discrepancy, 3 * rep.combined_se,
              rep.within_band)


def cmd_periodic_check(run: Run) -> None:
    """``Lambda_sigma,n`` for each ``n`` against the direct estimate of ``Lambda_sigma``."""
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    rep, seeds = _exponent_report(f, cfg["N"], cfg["seed"])
    ls = rep.lambda_sigma
    rows = []
    for n in sorted(cfg["n_list"]):
        approx = sigma_periodic_approx(f, n, cfg["tol"], seed=cfg["seed"])
        rows.append({"n": n, "value": approx.value, "gap": approx.value - ls.value, "se": ls.se,
                     "tol": cfg["tol"], "cycles": len(approx.table)})
    run.report["results"] = {"lambda_sigma_direct": _est(ls, seeds[0]), "periodic": rows}
    gaps = [abs(r["gap"]) for r in rows]
    band = cfg["gap_tol"] + 3 * ls.se
    run.check(f"|Lambda_sigma,{rows[-1]['n']} - Lambda_sigma|", gaps[-1], band, gaps[-1] <= band)
    mono = all(b <= a + 3 * ls.se for a, b in zip(gaps, gaps[1:]))
    run.check("gaps nonincreasing in n (3 SE)", max((b - a for a, b in zip(gaps, gaps[1:])),
                                                    default=0.0), 3 * ls.se, mono)


def cmd_decomp_check(run: Run) -> None:
    """Direct integral over the P^2 sample against the nested fiber-over-base integral."""
    cfg = run.cfg
    f = resolve_map(cfg["map"])
    ss = np.random.SeedSequence(cfg["seed"]).spawn(3)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in ss]
    sf = sample_equilibrium(f, cfg["N"], seed=seeds[0])
    nb = max(100, cfg["N"] // cfg["K"])
    base = sample_base(f, nb, seed=seeds[1], n_chains=min(nb, 1000))
    rows = []
    for phi in P2_FUNCTIONS:
        dv, dse = integrate(sf, phi)
        nv, nse = nested_integral(f, phi, base, cfg["K"], seed=seeds[2])
        band = 3 * combined_se(dse, nse) + bias_floor(f.d)
        rows.append({"phi": phi.name, "direct": {"value": dv, "se": dse, "N": cfg["N"]},
                     "nested": {"value": nv, "se": nse, "N": nb, "K": cfg["K"]},
                     "difference": {"value": dv - nv, "se": combined_se(dse, nse)}})
        run.check(f"{phi.name}: |direct - nested| <= 3 SE", dv - nv, band, abs(dv - nv) <= band)
    run.report["results"] = {"functions": rows, "seeds": seeds}


def cmd_bif_scan(run: Run) -> None:
    cfg = run.cfg
    grid_cfg = cfg["grid"]
    fam = resolve_family(cfg["family"], grid_cfg.get("rect"))
    nx = grid_cfg["nx"]
    ny = grid_cfg.get("ny", nx)
    t0 = time.perf_counter()
    if "n" in cfg:
        g = scan_sigma_periodic(fam, cfg["n"], nx, ny, tol=cfg["tol"], seed=cfg["seed"])
    else:
        g = scan_sigma(fam, nx, ny, N=cfg["N"], seed=cfg["seed"], method=cfg["method"],
                       tol=cfg["tol"])
    elapsed = time.perf_counter() - t0
    dens = laplacian_density(g, cfg["blur"])
    run.artifact("scan.csv", g.to_csv())
    run.artifact("density.csv", dens.to_csv())
    neg = negative_fraction(dens)
    smv = sub_mean_value_fraction(g)
    meta = {k: v for k, v in g.meta.items() if not isinstance(v, np.ndarray)}
    run.report["results"] = {
        "family": fam.name, "rect": list(g.rect), "nx": nx, "ny": ny, "scan": meta,
        "masked_cells": int(g.mask.sum()), "eps_noise": dens.meta["eps_noise"],
        "negative_fraction": neg, "sub_mean_value_fraction": smv,
        "max_se": float(np.max(np.where(g.mask, 0, g.se))), "seconds": elapsed,
    }
    run.check("cells with Laplacian < -eps_noise", neg, 0.01, neg <= 0.01)
    run.check("cells obeying sub-mean value within 3 SE", smv, 0.99, smv >= 0.99)
    if "bump" in cfg:
        phi = bump(_complex(cfg["bump"]["center"]), cfg["bump"]["radius"])
        run.report["results"]["bump_pairing"] = {"value": pairing(dens, phi),
                                                 "se": _pairing_se(dens, phi)}
    if cfg["pgm"]:
        img, mapping = to_pgm(np.where(dens.mask, 0, dens.values))
        run.artifact("density.pgm", img)
        run.report["results"]["pgm_mapping"] = mapping


def _pairing_se(dens, phi) -> float:
    """SE of the bump pairing treating cell Laplacian errors as independent (an upper-bound proxy)."""
    w = phi(dens.lam())
    return float(np.sqrt(np.sum(np.where(dens.mask, 0, dens.se * w) ** 2)) * dens.cell_area)


_COMMANDS = {
    "validate": cmd_validate, "green": cmd_green, "sample": cmd_sample,
    "lyapunov": cmd_lyapunov, "bj-check": cmd_bj_check, "periodic-check": cmd_periodic_check,
    "decomp-check": cmd_decomp_check, "bif-scan": cmd_bif_scan,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibered-dyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a JSON config")
        p.add_argument("--seed", type=int, help="global seed (u64)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker count recorded in the report")
    return parser


def run(command: str, cfg: dict) -> int:
    """Execute one subcommand on a resolved config; returns the exit status."""
    r = Run(command, cfg)
    try:
        _COMMANDS[command](r)
    except ConfigError as exc:
        r.report["error"] = str(exc)
        return r.finish(2)
    except (FiberedDynError, ArithmeticError) as exc:
        r.report["error"] = f"{type(exc).__name__}: {exc}"
        return r.finish(3)
    return r.finish(0 if r.passed else 1)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, load_config(args.config), args.seed, args.workers,
                             args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = run(args.command, cfg)
    print(f"{args.command}: exit {status} (report in {Path(cfg['out']) / (args.command + '.json')})")
    return status


if __name__ == "__main__":
    sys.exit(main())
