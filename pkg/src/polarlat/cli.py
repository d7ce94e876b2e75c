"""Command-line entry point: ``polarlat {transform,asymptotic,simulate,verify}``.

Exit codes: 0 success, 2 config or schema error, 3 mathematical or
statistical violation, 4 resource guard.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .cosets import ModulusOverflow
from .engine import (DEFAULT_BUDGET, DEFAULT_DELTA, AmbiguousDelta, ResourceLimit, SourceSpec,
                     cesaro_q, evolve, summary, table_csv)
from .lattice import (LatticeError, chain_lattice, divisor_lattice, explicit_lattice,
                      verify_laws)
from .montecarlo import EmptyPhi, SampleConfig, quotient_entropy_gate, simulate_block, \
    validate_coset_tracking
from .schemas import CONFIG_SCHEMA, OUTPUT_SCHEMAS
from .solver import StructurallyAmbiguous, prufer_mu, solve_mu
from .vectors import EpsVector, InvalidVector, entropy_coefficients, identity_battery, \
    random_grid_vectors

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_RESOURCE = 0, 2, 3, 4


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- config handling -------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        raise ConfigError("", "--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None


def apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(cfg)

    def put(section, key, value):
        if value is not None:
            cfg.setdefault(section, {})[key] = value

    levels_section = "montecarlo" if getattr(args, "command", None) == "simulate" else "transform"
    put(levels_section, "levels", getattr(args, "levels", None))
    put("transform", "window", getattr(args, "window", None))
    put("classify", "delta", getattr(args, "delta", None))
    put("montecarlo", "samples", getattr(args, "samples", None))
    put("montecarlo", "seed", getattr(args, "seed", None))
    put("verify", "pairs", getattr(args, "pairs", None))
    put("output", "format", getattr(args, "format", None))
    put("output", "path", getattr(args, "out", None))
    if getattr(args, "exact", False):
        cfg["exact"] = True
    workers = getattr(args, "workers", None)
    if workers is None and os.environ.get("POLARLAT_WORKERS"):
        try:
            workers = int(os.environ["POLARLAT_WORKERS"])
        except ValueError:
            raise ConfigError("POLARLAT_WORKERS", "must be an integer") from None
    if workers is not None:
        cfg["workers"] = workers
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path)
        raise ConfigError(path or "<root>", exc.message) from None


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def build_lattice(spec: dict):
    try:
        if spec["type"] == "divisor":
            return divisor_lattice(spec["modulus"])
        if spec["type"] == "chain":
            return chain_lattice(spec["prime"], spec["height"])
        orders = {}
        for e in spec["elements"]:
            if str(e) not in spec["order"]:
                raise ConfigError("lattice.order", f"no order given for element {e!r}")
            orders[e] = spec["order"][str(e)]
        return explicit_lattice(spec["elements"], [tuple(c) for c in spec["covers"]], orders)
    except LatticeError as exc:
        raise ConfigError("lattice", f"{type(exc).__name__}: {exc}") from None


def _element(lat, key, path: str):
    for e in lat.elements:
        if str(e) == str(key):
            return e
    raise ConfigError(path, f"{key!r} is not an element of {lat.name}")


def build_dist(lat, obj: dict, path: str, exact: bool, normalize: bool) -> EpsVector:
    mapping = {_element(lat, k, f"{path}.{k}"): v for k, v in obj.items()}
    try:
        return EpsVector.from_mapping(lat, mapping, exact=exact, normalize=normalize)
    except InvalidVector as exc:
        raise ConfigError(path, str(exc)) from None


def build_source(lat, cfg: dict, exact: bool) -> SourceSpec:
    if "source" not in cfg:
        raise ConfigError("source", "a source is required for this command")
    spec = cfg["source"]
    norm = cfg.get("normalize", False)
    if spec["kind"] == "stationary":
        return SourceSpec.stationary(build_dist(lat, spec["dist"], "source.dist", exact, norm))
    if spec["kind"] == "periodic":
        return SourceSpec.periodic([build_dist(lat, d, f"source.dists.{i}", exact, norm)
                                    for i, d in enumerate(spec["dists"])])
    prefix = [build_dist(lat, d, f"source.prefix.{i}", exact, norm)
              for i, d in enumerate(spec["prefix"])]
    tail = build_dist(lat, spec["tail"], "source.tail", exact, norm)
    return SourceSpec.explicit_prefix(prefix, tail)


# -- output --------------------------------------------------------------------------

def _emit(text: str, path: str | None, suffix: str = "") -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    if suffix:
        target = target.with_name(target.name + suffix)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)


def _dump(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _provenance_comment(meta: dict) -> str:
    return f"# config_digest={meta['config_digest']} seed={meta['seed']}\n"


def _check_output(command: str, obj: dict) -> None:
    jsonschema.validate(obj, OUTPUT_SCHEMAS[command])


def _histogram_csv(pairs, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_provenance_comment(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["element", "mass"])
    for e, m in pairs:
        w.writerow([e, m])
    return buf.getvalue()


def _svg(pairs, title: str, path: str) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("--svg", "matplotlib is not installed (pip install .[plot])") from None
    labels = [str(e) for e, _ in pairs]
    values = [float(m) for _, m in pairs]
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(labels) + 2), 3))
    ax.bar(labels, values, color="#4a6fa5")
    ax.set_ylabel("mass")
    ax.set_xlabel("element")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- commands ------------------------------------------------------------------------

def cmd_transform(cfg: dict, meta: dict, args) -> int:
    lat = build_lattice(cfg["lattice"])
    exact = cfg.get("exact", False)
    source = build_source(lat, cfg, exact)
    t = cfg.get("transform", {})
    delta = cfg.get("classify", {}).get("delta", DEFAULT_DELTA)
    table = evolve(source, t.get("levels", 3), t.get("window", 1), exact=exact,
                   workers=cfg.get("workers", 1), budget=t.get("budget", DEFAULT_BUDGET))
    out = {**meta, **summary(table, delta), "delta": delta}
    _check_output("transform", out)
    fmt = cfg.get("output", {}).get("format", "json")
    path = cfg.get("output", {}).get("path")
    csv_text = _provenance_comment(meta) + table_csv(table)
    if path is not None:
        _emit(csv_text, path, ".csv")
        _emit(_dump(out), path, ".json")
    else:
        _emit(csv_text if fmt == "csv" else _dump(out), None)
    if args.svg:
        pairs = [(e, out["mu_hat"][str(e)]) for e in lat.elements]
        _svg(pairs, f"empirical level distribution, n={table.level}", args.svg)
    return EXIT_OK


def cmd_asymptotic(cfg: dict, meta: dict, args) -> int:
    lat = build_lattice(cfg["lattice"])
    source = build_source(lat, cfg, exact=True)
    Q = cesaro_q(source).to_exact()
    query = cfg.get("asymptotic", {}).get("query")
    N = lat.top if query is None else _element(lat, query, "asymptotic.query")
    mu = solve_mu(lat, N, Q)
    shortcut = None
    if lat.is_chain():
        shortcut = "chain: mu equals Q"
        if prufer_mu(Q).mass != {e: m for e, m in mu.mass.items() if m}:
            print("chain shortcut disagrees with the walk", file=sys.stderr)
            return EXIT_VIOLATION
    h_q = entropy_coefficients(Q)
    h_mu = entropy_coefficients(mu.as_vector())
    body = mu.to_dict()
    body["shortcut"] = shortcut
    out = {**meta, **body,
           "mu_query": body["mu"].get(str(N), 0),
           "entropy_q": math.fsum(float(c) * math.log(p) for p, c in h_q.items()),
           "entropy_mu": math.fsum(float(c) * math.log(p) for p, c in h_mu.items()),
           "entropy_exact_match": h_q == h_mu}
    _check_output("asymptotic", out)
    path = cfg.get("output", {}).get("path")
    pairs = [(e, mu[e]) for e in lat.elements]
    if cfg.get("output", {}).get("format", "json") == "csv":
        _emit(_histogram_csv([(e, str(m)) for e, m in pairs], meta), path)
    else:
        _emit(_dump(out), path)
    if args.svg:
        _svg(pairs, "limiting level distribution", args.svg)
    if any(m < 0 for m in mu.mass.values()) or not out["entropy_exact_match"]:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_simulate(cfg: dict, meta: dict, args) -> int:
    lat = build_lattice(cfg["lattice"])
    source = build_source(lat, cfg, exact=False)
    mc = cfg.get("montecarlo", {})
    levels = mc.get("levels", cfg.get("transform", {}).get("levels", 2))
    if levels > 12:
        raise ConfigError("montecarlo.levels", "sampling supports at most 12 levels")
    sc = SampleConfig(source, levels, mc.get("samples", 100000), mc.get("seed", 0))
    stats = simulate_block(sc, workers=cfg.get("workers", 1))
    report = validate_coset_tracking(stats, mc.get("tol", 0.02))
    gate = quotient_entropy_gate(stats)
    out = {**meta, **report, "quotient_gate": gate, "pass": bool(report["pass"] and gate["pass"])}
    _check_output("simulate", out)
    path = cfg.get("output", {}).get("path")
    if cfg.get("output", {}).get("format", "json") == "csv":
        buf = io.StringIO()
        buf.write(_provenance_comment(meta))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "tv", "entropy_hat", "entropy_pred", "sigma", "pass"])
        for r in report["per_index"]:
            w.writerow([r["index"], repr(r["tv_max"]), repr(r["entropy_hat"]),
                        repr(r["entropy_pred"]), repr(r["sigma"]), r["pass"]])
        _emit(buf.getvalue(), path)
    else:
        _emit(_dump(out), path)
    return EXIT_OK if out["pass"] else EXIT_VIOLATION


def cmd_verify(cfg: dict, meta: dict, args) -> int:
    lat = build_lattice(cfg["lattice"])
    v = cfg.get("verify", {})
    pairs = v.get("pairs", 1000)
    laws = verify_laws(lat)
    identities: dict = {}
    violations = [dict(kind="law", **d) for d in laws.to_dict()["violations"]]
    if pairs:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(v.get("seed", 0))))
        exact = cfg.get("exact", False)
        unit = 720
        A = random_grid_vectors(lat, rng, pairs, unit)
        B = random_grid_vectors(lat, rng, pairs, unit)
        if exact:
            worst = identity_battery(A, B, lat, unit)
            tol = 0
        else:
            worst = identity_battery(A / unit, B / unit, lat, 1.0)
            tol = 1e-12
        for name, (val, (row, a, b)) in sorted(worst.items()):
            identities[name] = {"max_discrepancy": float(val) if not exact else int(val)}
            if val > tol:
                violations.append({"kind": "identity", "law": name,
                                   "witness": [int(row), repr(a), repr(b)],
                                   "e1": [str(Fraction(int(x), unit)) for x in A[row]],
                                   "e2": [str(Fraction(int(x), unit)) for x in B[row]]})
    out = {**meta, "lattice": lat.name, "pairs": pairs, "exact": cfg.get("exact", False),
           "laws": laws.to_dict(), "identities": identities, "violations": violations,
           "pass": not violations}
    _check_output("verify", out)
    _emit(_dump(out), cfg.get("output", {}).get("path"))
    return EXIT_OK if out["pass"] else EXIT_VIOLATION


COMMANDS = {"transform": cmd_transform, "asymptotic": cmd_asymptotic,
            "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--levels", type=int, help="butterfly levels n")
    common.add_argument("--window", type=int, help="number of 2^n blocks m")
    common.add_argument("--delta", type=float, help="classification threshold")
    common.add_argument("--samples", type=int, help="Monte Carlo samples")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--workers", type=int, help="worker threads (env POLARLAT_WORKERS)")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--exact", action="store_true", help="rational arithmetic")
    common.add_argument("--out", help="output path")
    common.add_argument("--pairs", type=int, help="random vector pairs for verify")
    common.add_argument("--svg", help="also write a bar chart (needs matplotlib)")
    p = argparse.ArgumentParser(prog="polarlat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = apply_overrides(load_config(args.config), args)
        validate_config(cfg)
        seed = cfg.get("montecarlo", {}).get("seed", 0) if args.command == "simulate" else \
            cfg.get("verify", {}).get("seed", 0) if args.command == "verify" else None
        meta = {"config_digest": config_digest(cfg), "seed": seed, "command": args.command}
        return COMMANDS[args.command](cfg, meta, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceLimit, ModulusOverflow) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except AmbiguousDelta as exc:
        print(f"config error: classify.delta: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StructurallyAmbiguous, EmptyPhi) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (LatticeError, InvalidVector, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
