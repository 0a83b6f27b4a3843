"""Command line front end.

Subcommands:
  bound         optimize the midpoint deviation bound over a distance grid
  simulate      draw random pairs through a map and check them against a bound
  recover       identify the signed coordinate bijection behind an operator
  keps          sweep the deviation-ratio search over an eps grid
  verify-suite  run the built-in verification criteria

Exit codes: 0 success, 1 margin or criterion failures, 2 configuration
problems, 3 certificate mismatches (halving, modulus domination, repair
hypothesis), 4 expansion constant at or past the uniqueness limit,
5 recovery failures.

With --deterministic the output contains no timestamp, so identical
configurations produce byte-identical files.  --jobs only parallelizes
work; it never changes the emitted rows.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import banach_stone, bounds, figures, keps, perturb, spaces, verify
from .errors import (
    ConfigError,
    EmptyForBothSigns,
    HalvingViolated,
    HypothesisFailed,
    IsoperturbError,
    ModulusMismatch,
    MTooLarge,
    PositiveOverflow,
    RecoveryFailed,
)

__all__ = ["main", "build_parser"]


# ---------------------------------------------------------------------------
# argument plumbing

_GLOBAL_KEYS = ("seed", "jobs", "out", "format", "deterministic", "plot", "config")

_SUB_KEYS = {
    "bound": ("phi", "d", "d_min", "d_max", "d_count", "n_max", "xi_domain",
              "xi_range", "require_halving"),
    "simulate": ("map", "phi", "pairs", "box", "tol", "norm"),
    "recover": ("map", "table", "claimed_m", "claimed_l", "stability_samples"),
    "keps": ("eps", "eps_min", "eps_max", "eps_count", "knots", "budget", "dim"),
    "verify-suite": ("only",),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--deterministic", action="store_true",
                        help="omit timestamps for byte-identical output")
    common.add_argument("--plot", action="store_true",
                        help="also render a PNG figure next to --out")
    common.add_argument("--config", default=None,
                        help="JSON file supplying any of this subcommand's options")

    p = argparse.ArgumentParser(prog="isoperturb",
                                description="perturbed-isometry bounds and recovery")
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bound", parents=[common],
                       help="optimized midpoint bounds over a distance grid")
    b.add_argument("--phi", default=None,
                   help="perturbation JSON, inline or @file")
    b.add_argument("--d", default=None, help="comma separated distances")
    b.add_argument("--d-min", type=float, default=None)
    b.add_argument("--d-max", type=float, default=None)
    b.add_argument("--d-count", type=int, default=None)
    b.add_argument("--n-max", type=int, default=None, help="deepest halving level")
    b.add_argument("--xi-domain", type=float, default=None, help="domain net density")
    b.add_argument("--xi-range", type=float, default=None, help="range net density")
    b.add_argument("--require-halving", action="store_true",
                   help="refuse perturbations without the halving property")

    s = sub.add_parser("simulate", parents=[common],
                       help="random pairs through a map, checked against a bound")
    s.add_argument("--map", default=None, help="map JSON, inline or @file")
    s.add_argument("--phi", default=None,
                   help="dominating perturbation JSON (default: claimed modulus)")
    s.add_argument("--pairs", type=int, default=None, help="number of pairs")
    s.add_argument("--box", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"), help="sampling box per coordinate")
    s.add_argument("--tol", type=float, default=None, help="violation tolerance")
    s.add_argument("--norm", choices=spaces.NORM_TAGS, default=None)

    r = sub.add_parser("recover", parents=[common],
                       help="recover a signed coordinate bijection")
    r.add_argument("--map", default=None, help="map JSON, inline or @file")
    r.add_argument("--table", default=None,
                   help="CSV oracle with in_* and out_* columns")
    r.add_argument("--claimed-m", type=float, default=None,
                   help="claimed expansion constant")
    r.add_argument("--claimed-l", type=float, default=None,
                   help="claimed additive constant")
    r.add_argument("--stability-samples", type=int, default=None,
                   help="random inputs for the stability report")

    k = sub.add_parser("keps", parents=[common],
                       help="deviation-ratio search over an eps grid")
    k.add_argument("--eps", default=None, help="comma separated eps values")
    k.add_argument("--eps-min", type=float, default=None)
    k.add_argument("--eps-max", type=float, default=None)
    k.add_argument("--eps-count", type=int, default=None)
    k.add_argument("--knots", type=int, default=None, help="breakpoints per axis")
    k.add_argument("--budget", type=int, default=None, help="proposal evaluations")
    k.add_argument("--dim", type=int, default=None, help="1 or 2 axes")

    v = sub.add_parser("verify-suite", parents=[common],
                       help="run the built-in verification criteria")
    v.add_argument("--only", default=None,
                   help="comma separated criterion ids or names")

    return p


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from --config; command line always wins."""
    if args.config is None:
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {args.config}: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(_GLOBAL_KEYS) | set(_SUB_KEYS[args.cmd]) | {"subcommand"}
    for key, val in cfg.items():
        name = key.replace("-", "_")
        if name not in allowed:
            raise ConfigError(f"unknown config key {key!r} for {args.cmd}")
        if name == "subcommand":
            if val != args.cmd:
                raise ConfigError(f"config is for {val!r}, not {args.cmd!r}")
            continue
        if name in ("deterministic", "plot", "require_halving"):
            if val:
                setattr(args, name, True)
        elif getattr(args, name, None) is None:
            setattr(args, name, val)
    return args


def _resolve(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def _json_arg(raw, what: str):
    if isinstance(raw, dict):
        return raw
    text = str(raw)
    if text.startswith("@"):
        try:
            with open(text[1:], "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read {what} file: {e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"bad {what} JSON: {e}")


def _float_list(raw, what: str) -> list[float]:
    if isinstance(raw, (list, tuple)):
        return [float(x) for x in raw]
    try:
        return [float(x) for x in str(raw).split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad {what} list: {raw!r}")


# ---------------------------------------------------------------------------
# output plumbing

def _sanitize(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "overflow"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, dict):
        return {k: _sanitize(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_sanitize(x) for x in v]
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    v = _sanitize(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _emit(args, meta: dict, columns, rows: list[dict], payload=None) -> None:
    """Write rows (or an arbitrary JSON payload) to --out or stdout."""
    fmt = _resolve(args, "format", "json" if payload is not None else "csv")
    meta = dict(sorted(meta.items()))
    if not args.deterministic:
        meta["generated_at"] = datetime.now(timezone.utc).isoformat()
    if fmt == "json":
        doc = {"meta": _sanitize(meta)}
        if payload is not None:
            doc.update(_sanitize(payload))
        else:
            doc["rows"] = [_sanitize(r) for r in rows]
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        for key, val in meta.items():
            buf.write(f"# {key}={_cell(val)}\n")
        if payload is not None and not rows:
            rows = [payload]
            columns = list(payload.keys())
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_cell(r.get(c)) for c in columns])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _figure_path(args) -> str:
    if not args.out:
        raise ConfigError("--plot needs --out to know where the figure goes")
    return os.path.splitext(args.out)[0] + ".png"


def _chunks(n: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, n)) if n else 1
    step = -(-n // jobs)
    return [(i, min(i + step, n)) for i in range(0, n, step)]


# ---------------------------------------------------------------------------
# subcommands

def _cmd_bound(args) -> int:
    if args.phi is None:
        raise ConfigError("bound needs --phi")
    phi = perturb.from_json(_json_arg(args.phi, "phi"))
    if args.d is not None:
        ds = _float_list(args.d, "d")
    elif None not in (args.d_min, args.d_max, args.d_count):
        ds = [float(x) for x in np.geomspace(args.d_min, args.d_max, args.d_count)]
    else:
        raise ConfigError("bound needs --d or all of --d-min/--d-max/--d-count")
    n_max = int(_resolve(args, "n_max", bounds.DEFAULT_MAX_DEPTH))
    xi = None
    if (args.xi_domain is None) != (args.xi_range is None):
        raise ConfigError("--xi-domain and --xi-range go together")
    if args.xi_domain is not None:
        xi = (float(args.xi_domain), float(args.xi_range))
    if args.require_halving:
        hc = perturb.check_halving(phi)
        if not hc.ok:
            raise HalvingViolated(
                f"halving fails first at t = {hc.first_violation}"
            )

    reports = []
    for d in ds:
        try:
            reports.append(bounds.optimize_bound(phi, d, n_max=n_max, xi=xi))
        except PositiveOverflow:
            reports.append(None)
    extra = sorted({k for r in reports if r for k in r.corollary_values})
    rows = []
    for d, r in zip(ds, reports):
        if r is None:
            row = {"d": d, "n_star": None, "k": None, "bound": math.inf,
                   "method": "overflow"}
            row.update({key: None for key in extra})
        else:
            row = {"d": r.d, "n_star": r.n_star, "k": r.k, "bound": r.bound,
                   "method": r.method}
            for key in extra:
                row[key] = r.corollary_values.get(key)
        rows.append(row)
    meta = {"subcommand": "bound", "phi": json.dumps(perturb.to_json(phi), sort_keys=True),
            "n_max": n_max, "seed": int(_resolve(args, "seed", 0))}
    if xi:
        meta["xi_domain"], meta["xi_range"] = xi
    _emit(args, meta, ["d", "n_star", "k", "bound", "method"] + extra, rows)
    if args.plot:
        fig_rows = [dict(r, corollary_values=rep.corollary_values if rep else {})
                    for r, rep in zip(rows, reports)]
        figures.render_bound_curves(fig_rows, _figure_path(args))
    return 0


def _cmd_simulate(args) -> int:
    if args.map is None:
        raise ConfigError("simulate needs --map")
    m = spaces.map_from_json(_json_arg(args.map, "map"))
    if args.phi is not None:
        phi = perturb.from_json(_json_arg(args.phi, "phi"))
    else:
        M, L = m.claimed_modulus
        phi = perturb.PerturbationFunction.affine(M, L)
    n_pairs = int(_resolve(args, "pairs", 200))
    if n_pairs < 1:
        raise ConfigError("--pairs must be >= 1")
    lo, hi = _resolve(args, "box", (-10.0, 10.0))
    if not lo < hi:
        raise ConfigError("--box needs LO < HI")
    tol = float(_resolve(args, "tol", 1e-9))
    norm = _resolve(args, "norm", "sup")
    seed = int(_resolve(args, "seed", 0))
    jobs = int(_resolve(args, "jobs", 1))

    rng = np.random.default_rng(seed)
    pts = spaces.random_cloud(rng, 2 * n_pairs, m.dim, float(lo), float(hi))
    pairs = [(tuple(pts[2 * i]), tuple(pts[2 * i + 1])) for i in range(n_pairs)]

    def run(span):
        i0, i1 = span
        rep = spaces.check_against_bound(m, phi, pairs[i0:i1], norm_tag=norm, tol=tol)
        return [dataclasses.replace(r, pair_id=r.pair_id + i0) for r in rep.rows]

    spans = _chunks(n_pairs, jobs)
    if len(spans) > 1:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(spans[0])]
    margins = [r for part in parts for r in part]
    violations = [r for r in margins if r.margin < -tol]

    rows = [dataclasses.asdict(r) for r in margins]
    meta = {
        "subcommand": "simulate",
        "map": json.dumps(spaces.map_to_json(m), sort_keys=True),
        "phi": json.dumps(perturb.to_json(phi), sort_keys=True),
        "pairs": n_pairs, "box_lo": float(lo), "box_hi": float(hi),
        "tol": tol, "norm": norm, "seed": seed,
        "violations": len(violations),
    }
    _emit(args, meta, ["pair_id", "d", "deviation", "bound", "margin"], rows)
    if args.plot:
        figures.render_margin_scatter(rows, _figure_path(args))
    return 1 if violations else 0


def _read_table(path: str):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            names = reader.fieldnames or []
            in_cols = sorted((c for c in names if c.startswith("in_")),
                             key=lambda c: int(c[3:]))
            out_cols = sorted((c for c in names if c.startswith("out_")),
                              key=lambda c: int(c[4:]))
            if not in_cols or not out_cols:
                raise ConfigError("table needs in_* and out_* columns")
            ins, outs = [], []
            for rec in reader:
                ins.append([float(rec[c]) for c in in_cols])
                outs.append([float(rec[c]) for c in out_cols])
    except OSError as e:
        raise ConfigError(f"cannot read table: {e}")
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad table row: {e}")
    return np.array(ins), np.array(outs)


def _cmd_recover(args) -> int:
    if (args.map is None) == (args.table is None):
        raise ConfigError("recover needs exactly one of --map or --table")
    if args.map is not None:
        m = spaces.map_from_json(_json_arg(args.map, "map"))
        oracle = banach_stone.OperatorOracle.from_map(
            m, claimed_M=args.claimed_m, claimed_L=args.claimed_l
        )
    else:
        if args.claimed_m is None or args.claimed_l is None:
            raise ConfigError("--table needs --claimed-m and --claimed-l")
        ins, outs = _read_table(args.table)
        oracle = banach_stone.OperatorOracle.from_table(
            ins, outs, claimed_M=args.claimed_m, claimed_L=args.claimed_l
        )

    rec, diag = banach_stone.recover(oracle)
    margins = {"condition_ii": diag.condition_ii_margin}
    n_samples = int(_resolve(args, "stability_samples", 0))
    if n_samples > 0:
        rng = np.random.default_rng(int(_resolve(args, "seed", 0)))
        samples = rng.uniform(-1.0, 1.0, size=(n_samples, oracle.n_in))
        rep = banach_stone.stability_report(oracle, rec, samples)
        margins["stability_sup_excess"] = rep.sup_excess
        margins["stability_delta_hat"] = rep.delta_hat

    payload = {
        "sigma": list(rec.sigma),
        "lambda": list(rec.signs),
        "D": diag.D_used,
        "m": diag.m_used,
        "m_escalations": diag.m_escalations,
        "margins": margins,
    }
    meta = {"subcommand": "recover", "claimed_M": oracle.claimed_M,
            "claimed_L": oracle.claimed_L, "n": oracle.n_in,
            "seed": int(_resolve(args, "seed", 0))}
    fmt = _resolve(args, "format", "json")
    if fmt == "json":
        _emit(args, meta, [], [], payload=payload)
    else:
        meta.update({"D": diag.D_used, "m": diag.m_used,
                     **{f"margin_{k}": v for k, v in margins.items()}})
        rows = [{"coordinate": x, "sigma": rec.sigma[x], "sign": rec.signs[x]}
                for x in range(oracle.n_in)]
        _emit(args, meta, ["coordinate", "sigma", "sign"], rows)
    if args.plot:
        figures.render_recovery_matrix(rec.sigma, rec.signs, _figure_path(args))
    return 0


def _cmd_keps(args) -> int:
    if args.eps is not None:
        eps_values = _float_list(args.eps, "eps")
    elif None not in (args.eps_min, args.eps_max, args.eps_count):
        eps_values = [float(x) for x in
                      np.geomspace(args.eps_min, args.eps_max, args.eps_count)]
    else:
        raise ConfigError("keps needs --eps or all of --eps-min/--eps-max/--eps-count")
    knots = int(_resolve(args, "knots", 1))
    budget = int(_resolve(args, "budget", 200))
    dim = int(_resolve(args, "dim", 1))
    seed = int(_resolve(args, "seed", 0))
    jobs = int(_resolve(args, "jobs", 1))

    caps = [keps.upper_bounds(e) for e in eps_values]

    def run(e: float):
        inst = keps.search_lower_bound(e, knots=knots, budget=budget,
                                       seed=seed, dim=dim)
        return inst.ratio

    if jobs > 1 and len(eps_values) > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, len(eps_values))) as pool:
            found = list(pool.map(run, eps_values))
    else:
        found = [run(e) for e in eps_values]

    rows = [
        {"eps": e, "vestfrid_ratio": keps.vestfrid_ratio(e),
         "best_found": best, "cor33_bound": cap.global_cap}
        for e, best, cap in zip(eps_values, found, caps)
    ]
    meta = {"subcommand": "keps", "knots": knots, "budget": budget,
            "dim": dim, "seed": seed}
    _emit(args, meta, ["eps", "vestfrid_ratio", "best_found", "cor33_bound"], rows)
    if args.plot:
        figures.render_keps_sweep(rows, _figure_path(args))
    return 0


def _cmd_verify_suite(args) -> int:
    only = None
    if args.only is not None:
        only = [s.strip() for s in str(args.only).split(",") if s.strip() != ""]
    seed = int(_resolve(args, "seed", verify.DEFAULT_SEED))
    jobs = int(_resolve(args, "jobs", 1))
    if only is None:
        names = [name for _, name, _ in verify.CRITERIA]
    else:
        names = only
    try:
        if jobs > 1 and len(names) > 1:
            with ThreadPoolExecutor(max_workers=min(jobs, len(names))) as pool:
                results = list(pool.map(lambda n: verify.run_suite([n], seed=seed)[0],
                                        names))
        else:
            results = verify.run_suite(names, seed=seed)
    except KeyError as e:
        raise ConfigError(str(e))

    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.cid:2d} {res.name}: {res.detail}")
    if args.out:
        rows = [dataclasses.asdict(r) for r in results]
        meta = {"subcommand": "verify-suite", "seed": seed,
                "passed": sum(r.passed for r in results), "total": len(results)}
        _emit(args, meta, ["cid", "name", "passed", "detail"], rows)
    return 0 if all(r.passed for r in results) else 1


_HANDLERS = {
    "bound": _cmd_bound,
    "simulate": _cmd_simulate,
    "recover": _cmd_recover,
    "keps": _cmd_keps,
    "verify-suite": _cmd_verify_suite,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return _HANDLERS[args.cmd](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (HalvingViolated, ModulusMismatch, HypothesisFailed) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except MTooLarge as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (RecoveryFailed, EmptyForBothSigns) as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except IsoperturbError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
