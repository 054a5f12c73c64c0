"""Batch driver: ``bergman-lab <command> --config cfg.json [--out DIR] [--seed N]``.

Every run writes ``<command>.json`` (and a CSV table where one makes sense)
into the output directory.  Exit codes: 0 success, 2 config error, 3 numeric
guard tripped, 4 resource cap.
"""
from __future__ import annotations

import os
import sys

# thread caps must be in place before numpy loads its BLAS
_threads = os.environ.get("BERGMAN_LAB_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import AnalyticFunction, ZeroSequence, from_config
from .errors import (BergmanLabError, NumericGuardError, ParameterError, PreconditionError,
                     ResourceError, UnsupportedVariantError)
from .quadrature import make_grid, node_count

COMMANDS = ("weight-report", "zero-test", "factorize", "dominate", "sample", "kernel-check")
WEIGHT_KINDS = ("lebesgue", "standard", "power", "log-power", "exp-decay",
                "vanishing-annuli", "user-table")
DEFAULT_GRID = {"levels": 12, "angular_base": 64, "node_cap": 6_000_000}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


class ConfigError(ParameterError):
    """All violations found in a config; ``violations`` holds ``(code, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{c}: {m}" for c, m in self.violations))


@dataclass
class ExperimentConfig:
    command: str
    weight: str = "lebesgue"
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "."
    raw: dict = field(default_factory=dict)

    def sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# (name, lower, upper, lower_open, upper_open); None means unbounded
PARAM_RANGES = {
    "p": (0, None, True, False), "q": (0, None, True, False),
    "p1": (0, None, True, False), "p2": (0, None, True, False),
    "epsilon": (0, None, True, False), "r": (0, 1, True, True), "R": (0, 0.5, True, False),
    "gamma": (0, 1, True, True), "depth": (0, 30, False, False),
    "max_degree": (0, 40, False, False), "trials": (1, 100_000, False, False),
    "tail_tol": (0, None, True, False), "delta_guard": (0, 1, True, True),
    "scale": (0, None, False, False), "radius": (0, 1, True, False),
    "inner_levels": (1, 12, False, False),
}
FILE_PARAMS = ("atoms_csv", "density_csv")


def _in_range(v, lo, hi, lo_open, hi_open):
    if lo is not None and (v < lo or (lo_open and v == lo)):
        return False
    if hi is not None and (v > hi or (hi_open and v == hi)):
        return False
    return True


def parse_config(text, base_dir=".") -> ExperimentConfig:
    """Validate a JSON config; raises ConfigError listing every violation."""
    bad = []
    try:
        raw = json.loads(text) if isinstance(text, (str, bytes)) else dict(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("bad-json", str(exc))]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([("bad-json", "config must be a JSON object")])

    command = raw.get("command")
    if command is None:
        bad.append(("missing-command", "no command given"))
    elif command not in COMMANDS:
        bad.append(("unknown-command", f"{command!r} is not one of {', '.join(COMMANDS)}"))

    weight = raw.get("weight", "lebesgue")
    if not isinstance(weight, str) or weight.partition(":")[0] not in WEIGHT_KINDS:
        bad.append(("unknown-weight", f"{weight!r}"))
    elif weight.startswith("user-table:"):
        path = Path(base_dir, weight.partition(":")[2])
        if not path.is_file():
            bad.append(("missing-file", str(path)))
        else:
            weight = f"user-table:{path}"

    grid = dict(DEFAULT_GRID)
    grid.update(raw.get("grid") or {})
    for key in ("levels", "angular_base", "node_cap"):
        v = grid.get(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v != int(v) or v < 1:
            bad.append((f"out-of-range:grid.{key}", f"{v!r} must be a positive integer"))
    if not any(c.startswith("out-of-range:grid") for c, _ in bad):
        grid = {k: int(v) for k, v in grid.items()}
        if grid["levels"] > 20:
            bad.append(("out-of-range:grid.levels", "at most 20 levels"))
        elif node_count(grid["levels"], grid["angular_base"]) > grid["node_cap"]:
            bad.append(("resource-cap", "grid exceeds node_cap"))

    params = raw.get("params") or {}
    if not isinstance(params, dict):
        bad.append(("out-of-range:params", "params must be an object"))
        params = {}
    for name, value in params.items():
        if name in PARAM_RANGES:
            if not isinstance(value, (int, float)) or isinstance(value, bool) \
                    or not _in_range(value, *PARAM_RANGES[name]):
                bad.append((f"out-of-range:{name}", f"{value!r}"))
        elif name in FILE_PARAMS and not Path(base_dir, str(value)).is_file():
            bad.append(("missing-file", str(Path(base_dir, str(value)))))

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        bad.append(("out-of-range:seed", f"{seed!r}"))
    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(command, weight, grid, params, seed,
                            str(raw.get("output_dir", ".")), raw)


# ------------------------------------------------------------ serialization

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    return str(x)


def fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps(obj, indent=0) -> str:
    """JSON with 17-significant-digit floats and non-finite values as strings."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return fmt_float(obj)
    return json.dumps(obj)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


# ------------------------------------------------------------ commands

def _function(params, key="function", default=None) -> AnalyticFunction:
    spec = params.get(key)
    if spec is None:
        if default is None:
            raise ConfigError([(f"missing-param:{key}", "a function description is required")])
        return default
    return from_config(spec)


def _zeros(params) -> ZeroSequence:
    return ZeroSequence.from_pairs(
        [(complex(float(z[0]), float(z[1])), int(z[2]) if len(z) > 2 else 1)
         for z in params.get("zeros", [])])


def _cmd_weight_report(cfg, weight, grid, out):
    from .weights import class_report
    P = cfg.params
    depth = int(P.get("depth", min(10, grid.levels)))
    qs = tuple(float(q) for q in P.get("qs", (2.0,)))
    radii = tuple(float(r) for r in P.get("cq_radii", (0.5,)))
    rep = class_report(weight, qs, depth, grid, radii)
    d = rep.to_dict()
    header = ["weight", "depth", "doubling_constant", "dhat_trend"]
    row = [rep.weight, rep.depth, rep.doubling_constant_Dhat, rep.dhat_trend]
    for q, b in rep.bq_constants.items():
        header += [f"B_{q:g}", f"B_{q:g}_trend"]
        row += [b.value if b.value is not None else "", b.trend]
    write_csv(out / "weight-report.csv", header, [row])
    return d, {"depth": ("config" if "depth" in P else "default"),
               "trend_factor": "weights.GROWTH_FACTOR"}


def _cmd_zero_test(cfg, weight, grid, out):
    from .zero_sets import ZeroSetAux, corollary1_search, perturb_check, perturbed_point, prop2_ratio
    P = cfg.params
    Z = _zeros(P)
    p = float(P.get("p", 2.0))
    f = _function(P, default=AnalyticFunction.blaschke(Z.expanded()))
    lower, upper = prop2_ratio(f, Z, p, weight, grid)
    cor = corollary1_search(Z, p, weight, int(P.get("max_degree", 4)), grid)
    aux = ZeroSetAux.of(Z)
    res = {"zeros": [[a, int(m)] for a, m in zip(Z.points, Z.mults)],
           "p": p,
           "prop2": {"f_over_h": lower, "h_over_f": upper},
           "corollary1": {"best_value": cor.best_value, "coeffs": cor.coeffs,
                          "sweeps": cor.sweeps},
           "blaschke2_sum": aux.blaschke2_sum, "separation": aux.separation}
    if "gamma" in P:
        g = float(P["gamma"])
        Z2 = ZeroSequence.from_pairs([(perturbed_point(a, g), int(m))
                                      for a, m in zip(Z.points, Z.mults)])
        res["perturbation"] = perturb_check(Z, g, Z2, p).__dict__
    return res, {"corollary1_stop": "zero_sets.MAX_SWEEPS / 1e-13 decrease"}


def _cmd_factorize(cfg, weight, grid, out):
    from .factorization import split_factorize
    P = cfg.params
    f = _function(P)
    p = float(P.get("p", 1.0))
    p1 = float(P.get("p1", 2.0 * p))
    p2 = float(P.get("p2", 1.0 / (1.0 / p - 1.0 / p1)))
    res = split_factorize(f, p, p1, p2, weight, int(P.get("trials", 64)), grid, seed=cfg.seed)
    write_csv(out / "factorize-trials.csv", ["trial", "young_middle"],
              [[i, float(v)] for i, v in enumerate(res.objectives)])
    return res.to_dict(), {"residual_tol": "factorization.RESIDUAL_TOL",
                           "chain_rtol": "factorization.CHAIN_RTOL"}


def _cmd_dominate(cfg, weight, grid, out):
    from .dominating import bad_set_sweep
    from .kernels import KernelEvaluator
    P = cfg.params
    f = _function(P)
    p = float(P.get("p", 2.0))
    kind = P.get("kind", "kernel")
    ks = range(1, int(P.get("max_k", 8)) + 1)
    if kind == "kernel":
        q = float(P.get("q", 1.0))
        if not q < p:
            raise ConfigError([("out-of-range:q", "kernel threshold needs q < p")])
        K = KernelEvaluator(weight, tail_tol=float(P.get("tail_tol", 1e-10)), closed_form=True)
        sw = bad_set_sweep("kernel", f, p, weight, grid, q=q, K=K, ks=ks)
    elif kind == "local":
        sw = bad_set_sweep("local", f, p, weight, grid, r=float(P.get("r", 0.5)), ks=ks)
    else:
        raise ConfigError([("out-of-range:kind", f"{kind!r}")])
    write_csv(out / "dominate-sweep.csv", ["epsilon", "bad_mass"],
              [[float(e), float(m)] for e, m in zip(sw.eps, sw.masses)])
    return sw.to_dict(), {"epsilon_grid": "2^-k, k=1..max_k"}


def _measure(P, weight):
    from .quadrature import Annulus
    from .sampling import DiscMeasure
    base = Path(P.get("_base_dir", "."))
    if "atoms_csv" in P or "density_csv" in P:
        mu = DiscMeasure.from_csv(base / P["atoms_csv"] if "atoms_csv" in P else None,
                                  base / P["density_csv"] if "density_csv" in P else None)
    else:
        mu = DiscMeasure.from_weight(weight)
    if "radius" in P:
        mu = mu.restricted(Annulus(0.0, float(P["radius"])))
    if "scale" in P:
        mu = mu.scaled(float(P["scale"]))
    return mu


def _cmd_sample(cfg, weight, grid, out):
    from .sampling import sampling_pipeline
    P = cfg.params
    mu = _measure(P, weight)
    fam = [from_config(s) for s in P.get("family", [])] or [
        AnalyticFunction.polynomial([1.0]), AnalyticFunction.polynomial([0.0, 1.0]),
        AnalyticFunction.polynomial([0.0, 0.0, 1.0]), AnalyticFunction.blaschke([0.5])]
    rep = sampling_pipeline(mu, weight, float(P.get("p", 2.0)), float(P.get("r", 0.25)),
                            float(P.get("epsilon", 0.5)), fam, grid,
                            int(P.get("depth", min(6, grid.levels))),
                            branch=P.get("branch", "doubling"), k_star=bool(P.get("k_star", False)))
    return rep.to_dict(), {"norm_floor": "sampling.NORM_FLOOR"}


def _cmd_kernel_check(cfg, weight, grid, out):
    from .kernels import KernelEvaluator, kernel_integrals
    P = cfg.params
    K = KernelEvaluator(weight, tail_tol=float(P.get("tail_tol", 1e-10)),
                        delta_guard=float(P.get("delta_guard", 1e-3)))
    pts = [complex(float(v[0]), float(v[1])) for v in P.get("points", [[0.0, 0.0], [0.5, 0.0]])]
    rows, res = [], {"points": []}
    inner = make_grid(int(P.get("inner_levels", 6)), 32)
    one, _ = kernel_integrals(K, lambda w: np.ones(w.shape), np.array(pts), inner)
    for z, integ in zip(pts, one):
        norm = K.kernel_norm_sq(z)
        entry = {"z": z, "kernel_norm_sq": norm.value, "comparison_ratio": norm.comparison_ratio,
                 "terms": K.last_evaluation.terms if K.last_evaluation else None,
                 "reproduces_one": float(np.real(integ))}
        if K.weight.kernel_closed_form is not None:
            x = abs(z) ** 2
            entry["closed_form_error"] = abs(norm.value - float(np.real(K.weight.kernel_closed_form(x))))
        res["points"].append(entry)
        rows.append([z.real, z.imag, norm.value, float(np.real(integ))])
    write_csv(out / "kernel-check.csv", ["re", "im", "kernel_norm_sq", "reproduces_one"], rows)
    return res, {"tail_tol": "config" if "tail_tol" in P else "kernels.DEFAULT_TAIL_TOL",
                 "delta_guard": "config" if "delta_guard" in P else "kernels.DEFAULT_DELTA_GUARD"}


RUNNERS = {
    "weight-report": _cmd_weight_report,
    "zero-test": _cmd_zero_test,
    "factorize": _cmd_factorize,
    "dominate": _cmd_dominate,
    "sample": _cmd_sample,
    "kernel-check": _cmd_kernel_check,
}


def run(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Execute ``cfg`` and write its reports; returns the JSON document."""
    from .weights import weight_from_name
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    weight = weight_from_name(cfg.weight)
    grid = make_grid(cfg.grid["levels"], cfg.grid["angular_base"],
                     node_cap=cfg.grid["node_cap"])
    results, provenance = RUNNERS[cfg.command](cfg, weight, grid, out)
    doc = {
        "command": cfg.command,
        "version": __version__,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "weight": cfg.weight,
        "grid": grid.params(),
        "tolerance_provenance": provenance,
        "results": results,
    }
    text = dumps(_plain(doc)) + "\n"
    with open(out / f"{cfg.command}.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return doc


def build_parser():
    ap = argparse.ArgumentParser(prog="bergman-lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("BERGMAN_LAB_THREADS")
    if threads is not None and not (threads.isdigit() and int(threads) > 0):
        print("config error: out-of-range:BERGMAN_LAB_THREADS", file=sys.stderr)
        return EXIT_CONFIG
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        print(f"config error: missing-file: {path}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: bad-json: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(raw, dict):
        raw.setdefault("command", args.command)
        if args.seed is not None:
            raw["seed"] = args.seed
    try:
        cfg = parse_config(raw, base_dir=path.parent)
        if cfg.command != args.command:
            raise ConfigError([("command-mismatch",
                                f"config says {cfg.command!r}, command line says {args.command!r}")])
        cfg.params = dict(cfg.params, _base_dir=str(path.parent))
        run(cfg, args.out)
    except ConfigError as exc:
        for code, msg in exc.violations:
            print(f"config error: {code}: {msg}", file=sys.stderr)
        if all(code == "resource-cap" for code, _ in exc.violations):
            return EXIT_RESOURCE
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericGuardError, ArithmeticError) as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, PreconditionError, UnsupportedVariantError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BergmanLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
