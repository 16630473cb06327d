"""``holonomy-lab`` command line: run / list / describe."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import HolonomyLabError, __version__
from .config import ConfigError, load_config
from .experiments import REGISTRY, run_experiment

SCHEMA = "holonomy-lab/report"
SCHEMA_VERSION = "1.0.0"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    fields: list[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: _jsonable(v) for k, v in r.items()})


def error_object(exc: BaseException, code: int) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, HolonomyLabError):
        err["code"], err["details"] = exc.code, exc.details
    return {"error": err}


def _report(cfg, result, out: Path, workers: int) -> dict:
    tables = {}
    for name, rows in result.tables.items():
        fn = f"{cfg.experiment}_{name}.csv"
        write_csv(out / fn, rows)
        tables[name] = {"file": fn, "rows": len(rows)}
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "experiment": cfg.experiment,
        "anchors": list(REGISTRY[cfg.experiment].anchors),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "passed": result.passed,
        "summary": result.summary,
        "criteria": [c.as_dict() for c in result.criteria],
        "tables": tables,
        "timing": {**result.timing, "workers": workers},
    }


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(json.dumps(error_object(exc, EXIT_USAGE)), file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        print(json.dumps(error_object(ConfigError("--workers must be >= 1"), EXIT_USAGE)), file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or cfg.output.get("dir", f"results/{cfg.experiment}"))
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = run_experiment(cfg, args.workers)
    except (HolonomyLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        err = error_object(exc, EXIT_FAIL)
        err["error"]["traceback"] = traceback.format_exc(limit=3)
        report = {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "version": __version__,
                  "experiment": cfg.experiment, "seed": cfg.seed, "config": cfg.to_dict(), "passed": False,
                  "criteria": [], **err}
        (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2) + "\n")
        print(json.dumps(_jsonable(err)), file=sys.stderr)
        return EXIT_FAIL
    report = _report(cfg, result, out, args.workers)
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2) + "\n")
    for c in result.criteria:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.as_dict()['value']} {c.comparison} "
              f"{c.as_dict()['tol']}  [{c.anchor}]")
    print(f"report: {out / 'report.json'}")
    if not result.passed:
        failed = [c.name for c in result.criteria if not c.passed]
        err = {"error": {"type": "CriteriaFailed", "message": f"failed criteria: {', '.join(failed)}",
                         "exit_code": EXIT_FAIL, "failed": failed}}
        print(json.dumps(err), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _entry(name: str) -> dict:
    e = REGISTRY[name]
    return {"name": e.name, "description": e.description, "anchors": list(e.anchors), "expected": e.expected,
            "negative_control": e.negative_control}


def cmd_list(args) -> int:
    if args.json:
        print(json.dumps([_entry(n) for n in REGISTRY], indent=2))
        return EXIT_OK
    width = max(map(len, REGISTRY))
    for name, e in REGISTRY.items():
        tag = "  (negative control)" if e.negative_control else ""
        print(f"{name:<{width}}  {', '.join(e.anchors)}{tag}")
    return EXIT_OK


def cmd_describe(args) -> int:
    if args.experiment not in REGISTRY:
        print(json.dumps(error_object(ConfigError(f"unknown experiment {args.experiment!r}"), EXIT_USAGE)),
              file=sys.stderr)
        return EXIT_USAGE
    d = _entry(args.experiment)
    if args.json:
        print(json.dumps(d, indent=2))
        return EXIT_OK
    print(d["name"] + (" (negative control)" if d["negative_control"] else ""))
    print(f"  {d['description']}")
    print(f"  anchors:  {', '.join(d['anchors'])}")
    print(f"  expected: {d['expected']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holonomy-lab", description="Numerical holonomy and curvature experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a YAML config")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", default=None, help="output directory (default: results/<experiment>)")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list experiments")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(func=cmd_list)
    d = sub.add_parser("describe", help="describe one experiment")
    d.add_argument("experiment")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_describe)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)  # argparse exits with 2 on usage errors
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
