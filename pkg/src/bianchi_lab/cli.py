"""Command-line orchestration: verification suites, slab experiments and
the convention audit, with machine-readable reports.

Exit codes: 0 all cases pass, 1 case failures, 2 usage/manifest errors,
3 internal failure, 4 convention mismatch in the audit search.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

MANIFEST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "suite": {"enum": ["algebra", "calculus", "boundary",
                           "linearization", "green", "bvp", "all"]},
        "preset": {"enum": ["flat_cartesian", "flat_slab_periodic",
                            "polar_ball", "conformal_bump",
                            "curved_generic"]},
        "dim": {"type": "integer", "minimum": 3, "maximum": 6},
        "dims": {"type": "array", "items": {"type": "integer",
                                            "minimum": 3, "maximum": 6}},
        "dims_weyl": {"type": "array", "items": {"type": "integer",
                                                 "minimum": 4, "maximum": 6}},
        "grid": {"type": "array", "items": {"type": "integer", "minimum": 4}},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "source": {"enum": ["discrete-admissible", "continuum-admissible",
                            "inadmissible-divergence",
                            "inadmissible-boundary"]},
        "study": {"type": "boolean"},
        "serial": {"type": "boolean"},
        "out": {"type": "string"},
        "format": {"enum": ["json", "csv"]},
    },
}

DEFAULTS = {
    "suite": "all",
    "preset": "flat_slab_periodic",
    "dim": 3,
    "dims": None,
    "grid": None,
    "seed": 1,
    "eps": 1e-3,
    "source": None,
    "study": False,
    "serial": False,
    "out": None,
    "format": "json",
}


def _load_manifest(path: str) -> dict:
    import jsonschema

    with open(path) as fh:
        data = json.load(fh)
    jsonschema.validate(data, MANIFEST_SCHEMA)
    return data


def _merged_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.manifest:
        cfg.update(_load_manifest(args.manifest))
    for key in ("suite", "preset", "dim", "seed", "eps", "source", "out",
                "format"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "grid", None):
        cfg["grid"] = [int(g) for g in args.grid.split(",")]
    if getattr(args, "tol", None) is not None:
        cfg["tol"] = args.tol
    if getattr(args, "study", False):
        cfg["study"] = True
    if getattr(args, "serial", False):
        cfg["serial"] = True
    return cfg


def _report(cfg: dict, cases: list, extra_meta: dict | None = None) -> dict:
    from . import __version__
    from .conventions import load_conventions

    meta = {
        "tool": "bianchi-lab",
        "version": __version__,
        "seed": cfg["seed"],
        "preset": cfg["preset"],
        "dim": cfg["dim"],
        "grid": cfg.get("grid"),
        "serial": bool(cfg.get("serial")),
        "conventions_hash": load_conventions()["hash"],
    }
    if extra_meta:
        meta.update(extra_meta)
    summary = {
        "total": len(cases),
        "passed": sum(1 for c in cases if c["pass"]),
        "failed": sum(1 for c in cases if not c["pass"]),
    }
    return {"meta": meta, "cases": cases, "summary": summary}


def _emit(report: dict, cfg: dict) -> None:
    if cfg.get("format") == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "value", "tolerance", "pass", "anchor"])
        for c in report["cases"]:
            writer.writerow([c["name"], repr(c["value"]),
                             repr(c["tolerance"]), c["pass"], c["anchor"]])
        text = buf.getvalue()
    else:
        text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if cfg.get("out"):
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_case_lines(cases: list) -> None:
    for c in cases:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{status}] {c['name']}: value={c['value']:.3e} "
              f"tol={c['tolerance']:.3e} ({c['anchor']})")


def cmd_verify(args) -> int:
    cfg = _merged_config(args)
    from .verify import run_suite

    try:
        cases = run_suite(cfg["suite"], cfg)
    except KeyError:
        print(f"unknown suite {cfg['suite']!r}", file=sys.stderr)
        return 2
    report = _report(cfg, cases, {"command": "verify",
                                  "suite": cfg["suite"]})
    _print_case_lines(cases)
    _emit(report, cfg)
    return 0 if report["summary"]["failed"] == 0 else 1


def cmd_solve(args) -> int:
    cfg = _merged_config(args)
    if cfg["preset"] != "flat_slab_periodic":
        print("the solvability experiment runs on the flat periodic slab "
              "only; other backgrounds would need the lifted operators",
              file=sys.stderr)
        return 2
    import numpy as np

    from .bvp import (assemble, cohomology_probe, deflated_gap,
                      lateral_block_svals, make_source, solve_least_squares)
    from .charts import make_chart

    chart = make_chart(cfg["preset"], cfg["dim"])
    grid = cfg.get("grid") or [16]
    kinds = ([cfg["source"]] if cfg.get("source") else
             ["discrete-admissible", "continuum-admissible",
              "inadmissible-divergence", "inadmissible-boundary"])
    cases = []
    tables = {}
    for kind in kinds:
        rels = []
        for n in grid:
            if kind == "discrete-admissible" and n < 15:
                continue
            src = make_source(n, chart, kind, seed=cfg["seed"])
            system = assemble(n, chart)
            _, rep = solve_least_squares(system, src)
            rels.append((n, rep.relative_residual))
            admissible = kind.endswith("admissible") \
                and not kind.startswith("inadmissible")
            if admissible and kind == "discrete-admissible":
                cases.append({"name": f"solve-{kind}-n{n}",
                              "value": rep.relative_residual,
                              "tolerance": 1e-8,
                              "pass": rep.relative_residual <= 1e-8,
                              "anchor": "bvp.solvable-discrete"})
            elif kind.startswith("inadmissible"):
                cases.append({"name": f"solve-{kind}-n{n}",
                              "value": rep.relative_residual,
                              "tolerance": 0.05,
                              "pass": rep.relative_residual >= 0.05,
                              "anchor": f"bvp.obstruction-"
                                        f"{kind.split('-')[1]}"})
        tables[kind] = rels
        if cfg.get("study") and len(rels) >= 3 and \
                kind == "continuum-admissible":
            ns = [r[0] for r in rels]
            vals = [r[1] for r in rels]
            slope = float(np.polyfit(np.log([1.0 / n for n in ns]),
                                     np.log(vals), 1)[0])
            cases.append({"name": "solve-continuum-slope", "value": slope,
                          "tolerance": 1.8, "pass": slope >= 1.8,
                          "anchor": "bvp.solvable-continuum"})
    n0 = min(grid)
    spec = lateral_block_svals(n0, cfg["dim"])["spectrum"]
    gap, nkernel = deflated_gap(n0, cfg["dim"])
    probe = cohomology_probe(n0, chart)
    meta = {
        "command": "solve",
        "sigma_min": float(spec[0]),
        "kernel_dim": int(nkernel),
        "gap_beyond_kernel": float(gap),
        "cohomology": {"dim_h0": probe["dim_h0"],
                       "dim_h1": probe["dim_h1"]},
        "residual_tables": tables,
    }
    report = _report(cfg, cases, meta)
    _print_case_lines(cases)
    _emit(report, cfg)
    return 0 if report["summary"]["failed"] == 0 else 1


def cmd_audit(args) -> int:
    from .conventions import (canonical_json, compute_conventions,
                              load_conventions, save_conventions)

    try:
        fresh = compute_conventions()
    except RuntimeError as exc:
        print(f"convention search failed: {exc}", file=sys.stderr)
        return 4
    if args.write:
        save_conventions(fresh, args.write)
        print(f"conventions written to {args.write} "
              f"(hash {fresh['hash']})")
        return 0
    committed = load_conventions()
    same = canonical_json(fresh) == canonical_json(committed)
    print(f"recomputed hash {fresh['hash']}, committed {committed['hash']}")
    if not same:
        for key in ("ricci_action", "constraints"):
            if fresh[key] != committed[key]:
                print(f"MISMATCH {key}: recomputed {fresh[key]} "
                      f"!= committed {committed[key]}")
        return 1
    print("conventions match the committed artifact")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bianchi-lab",
        description="verification suites for gauged linearized Einstein "
                    "boundary-value problems on desk-scale geometries")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="JSON manifest path")
        p.add_argument("--preset", choices=list(
            MANIFEST_SCHEMA["properties"]["preset"]["enum"]))
        p.add_argument("--dim", type=int)
        p.add_argument("--grid", help="comma-separated resolutions")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--eps", type=float)
        p.add_argument("--out", help="report output path")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--serial", action="store_true",
                       help="single-threaded, bit-reproducible runs")
        p.add_argument("--study", action="store_true",
                       help="append convergence studies")

    pv = sub.add_parser("verify", help="run a verification suite")
    pv.add_argument("--suite", choices=list(
        MANIFEST_SCHEMA["properties"]["suite"]["enum"]))
    common(pv)
    pv.set_defaults(func=cmd_verify)

    ps = sub.add_parser("solve", help="run the slab solvability experiment")
    ps.add_argument("--source", choices=list(
        MANIFEST_SCHEMA["properties"]["source"]["enum"]))
    common(ps)
    ps.set_defaults(func=cmd_solve)

    pa = sub.add_parser("audit", help="recompute the convention constants")
    pa.add_argument("--write", help="write a fresh conventions artifact")
    pa.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    if "--serial" in (argv or sys.argv[1:]):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
    threads = os.environ.get("BIANCHI_LAB_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = threads

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failures
        import jsonschema

        if isinstance(exc, jsonschema.ValidationError):
            print(f"manifest error: {exc.message}", file=sys.stderr)
            return 2
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
