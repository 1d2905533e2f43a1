"""``roughheat <experiment> --config <path> --out <dir> [--seed N ...]``

Writes one CSV per result table, ``schema.json`` describing every CSV,
``manifest.json`` (config echo, seeds, versions, check outcomes) and prints
one PASS/FAIL line per acceptance check.  Exit status: 0 when every required
check passes, 1 on an acceptance failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .experiments import EXPERIMENTS, ExperimentResult, Table, run_experiment, threads

log = logging.getLogger("roughheat")


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def table_filename(experiment: str, table: Table) -> str:
    stem = f"{experiment}_{table.name}"
    return f"{stem}_seed{table.seed}.csv" if table.seed is not None else f"{stem}.csv"


def write_table(path: Path, table: Table) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(x) for x in row])


def _json_value(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_outputs(out: Path, result: ExperimentResult, cfg: RunConfig) -> list:
    out.mkdir(parents=True, exist_ok=True)
    files, schema = [], {}
    for t in result.tables:
        name = table_filename(result.name, t)
        write_table(out / name, t)
        files.append(name)
        schema[name] = {"experiment": result.name, "table": t.name, "seed": t.seed,
                        "description": t.doc, "columns": list(t.columns)}
    checks_table = Table("checks", ["check", "passed", "required", "value", "threshold", "detail"],
                         [[c.name, c.passed, c.required, c.value, c.threshold, c.detail] for c in result.checks],
                         doc="acceptance checks; required=false marks supplementary diagnostics")
    name = table_filename(result.name, checks_table)
    write_table(out / name, checks_table)
    files.append(name)
    schema[name] = {"experiment": result.name, "table": "checks", "seed": None,
                    "description": checks_table.doc, "columns": checks_table.columns}
    with open(out / "schema.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "experiment": result.name,
        "seeds": list(cfg.seeds),
        "config": cfg.echo(),
        "versions": {"roughheat": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "passed": result.passed,
        "checks": [{"name": c.name, "passed": bool(c.passed), "required": c.required,
                    "value": _json_value(c.value), "threshold": c.threshold, "detail": c.detail}
                   for c in result.checks],
        "files": files,
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_value)
        fh.write("\n")
    return files


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughheat", description="Run a named experiment suite.")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS), help="experiment name")
    p.add_argument("--config", default=None, help="INI config or a previous manifest.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, nargs="+", default=None, help="seed list (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed:
            cfg = cfg.with_seeds(args.seed)
        threads()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: output directory not writable: {exc}", file=sys.stderr)
        return 2

    result = run_experiment(args.experiment, cfg)
    write_outputs(out, result, cfg)
    for c in result.checks:
        print(c.line())
    failed = [c.name for c in result.checks if c.required and not c.passed]
    if failed:
        print(f"{result.name}: FAIL ({len(failed)} acceptance check(s) failed: {'; '.join(failed)})")
        return 1
    print(f"{result.name}: PASS")
    return 0


if __name__ == "__main__":
    sys.exit(main())
