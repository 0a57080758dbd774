"""Command line orchestration: parse a config, run checks, write reports."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from . import checks as ck
from .core import PrecisionPolicy
from .errors import ConfigError, MulticritError, UnknownCheck
from .fixtures import FixtureStore, make_key
from .maps import MapSpec, validate_homeomorphism
from .rotation import RotationTarget, tune_map

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def load_schema(name: str) -> dict:
    return json.loads(resources.files("multicrit").joinpath("schemas", name).read_text())


# -- config ----------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    fmap: MapSpec
    target: RotationTarget
    levels: tuple[int, int]
    checks: list[str]
    precision: str = "standard"
    jobs: int = 1
    out_dir: Path = Path("multicrit-out")
    report_name: str = "report.json"
    fixtures_path: str | None = None
    tune: bool = True
    tolerance: float = 1e-10
    base_points: int = 32
    seed: int = 0
    bounded_levels: tuple[int, ...] | None = None
    max_i: int = 64
    delta: float = 0.05
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        lv = data["levels"]
        if lv["min"] > lv["max"]:
            raise ConfigError(f"levels.min = {lv['min']} exceeds levels.max = {lv['max']}")
        out = data.get("output", {})
        bl = data.get("bounded_levels")
        return cls(
            fmap=MapSpec.from_dict(data["map"]),
            target=RotationTarget.from_dict(data["target"]),
            levels=(lv["min"], lv["max"]),
            checks=list(data.get("checks", ck.ALL_CHECKS)),
            precision=data.get("precision", "standard"),
            jobs=data.get("jobs", 1),
            out_dir=Path(out.get("dir", "multicrit-out")),
            report_name=out.get("report", "report.json"),
            fixtures_path=out.get("fixtures"),
            tune=data.get("tune", True),
            tolerance=data.get("tolerance", 1e-10),
            base_points=data.get("base_points", 32),
            seed=data.get("seed", 0),
            bounded_levels=tuple(bl) if bl else None,
            max_i=data.get("max_i", 64),
            delta=data.get("delta", 0.05),
            raw=data,
        )


def _node_line(node, path) -> int | None:
    """1-based line of the YAML node at ``path``, or of its deepest existing parent."""
    line = node.start_mark.line + 1
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse JSON or YAML config text; every error names a line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as je:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as ye:
            mark = getattr(ye, "problem_mark", None)
            line = mark.line + 1 if mark else je.lineno
            raise ConfigError(f"{source}:{line}: {getattr(ye, 'problem', None) or ye}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: config must be a mapping")
    validator = jsonschema.Draft202012Validator(load_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        root = yaml.compose(text)
        msgs = []
        for e in errors:
            path = list(e.absolute_path)
            where = "/".join(str(p) for p in path) or "(root)"
            msgs.append(f"{source}:{_node_line(root, path)}: {where}: {e.message}")
        raise ConfigError("\n".join(msgs))
    try:
        return ExperimentConfig.from_dict(data)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"{source}:1: {e}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"{p}: {e.strerror}") from None
    return parse_config_text(text, str(p))


# -- running ---------------------------------------------------------------------


def prepare(cfg: ExperimentConfig) -> MapSpec:
    """Tune the map to the target rotation number and locate its critical points."""
    if cfg.tune:
        fmap, _ = tune_map(cfg.fmap, cfg.target, cfg.tolerance)
        return fmap
    validate_homeomorphism(cfg.fmap)
    return cfg.fmap


def _run_one(args):
    name, ctx = args
    return ck.run_check(name, ctx)


def apply_fixtures(res: ck.CheckResult, store: FixtureStore, map_hash: str) -> dict:
    """Resolve a check's fixture requests; adjusts its status in place."""
    out = {}
    outcomes = []
    for level, const, value, mode in res.fixtures:
        key = make_key(map_hash, f"{res.name}.{const}", level)
        stored = store.get(key)
        outcome = store.check(key, value, mode)
        outcomes.append(outcome)
        out[key] = {"value": float(value), "stored": stored, "mode": mode, "result": outcome}
    if res.status == ck.PASS:
        if "fail" in outcomes:
            res.status = ck.FAIL
            res.notes.append("measured constant outside 2x of its fixture")
        elif "fixture-recorded" in outcomes:
            res.status = "fixture-recorded"
    elif res.status == ck.DEGRADED and "fail" in outcomes:
        res.status = ck.FAIL
    return out


def run(cfg: ExperimentConfig, store: FixtureStore | None = None) -> dict:
    """Execute the configured checks and assemble the report (nothing is written)."""
    store = store or FixtureStore(cfg.fixtures_path)
    report = {
        "schema_version": SCHEMA_VERSION,
        "map": cfg.fmap.to_dict(),
        "map_hash": cfg.fmap.digest(),
        "target": cfg.target.to_dict(),
        "levels": list(cfg.levels),
        "precision": cfg.precision,
        "setup_error": None,
        "checks": [],
    }
    runtimes = {}
    try:
        fmap = prepare(cfg)
    except MulticritError as e:
        report["setup_error"] = f"{type(e).__name__}: {e}"
        for name in cfg.checks:
            report["checks"].append({**ck.result_to_record(ck.CheckResult(name, ck.FAIL,
                                     notes=["map preparation failed"])), "fixtures": {}})
        report["timestamp"] = {"generated": _now(), "runtimes": runtimes}
        return report
    report["map"] = fmap.to_dict()
    report["map_hash"] = fmap.digest()
    report["rotation_number"] = cfg.target.value
    report["critical_points"] = [{"location": c.location, "criticality": c.criticality}
                                 for c in fmap.critical_points]
    ctx = ck.RunContext(fmap, cfg.target, cfg.levels, PrecisionPolicy.from_name(cfg.precision),
                        cfg.base_points, cfg.seed, cfg.bounded_levels, cfg.max_i, cfg.delta)
    names = [n for n in ck.ALL_CHECKS if n in cfg.checks]
    if cfg.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, [(n, ctx) for n in names]))
    else:
        results = [ck.run_check(n, ctx) for n in names]
    for res in results:
        fx = apply_fixtures(res, store, report["map_hash"])
        rec = ck.result_to_record(res)
        rec["fixtures"] = fx
        report["checks"].append(rec)
        runtimes[res.name] = res.runtime
    store.save()
    report["timestamp"] = {"generated": _now(), "runtimes": runtimes}
    return report


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def exit_code(report: dict) -> int:
    if report.get("setup_error"):
        return EXIT_FAIL
    return EXIT_FAIL if any(r["status"] == ck.FAIL for r in report["checks"]) else EXIT_OK


def emit_plot_data(report: dict, which: str) -> str:
    """CSV text of the series a check recorded."""
    rec = next((r for r in report.get("checks", []) if r["name"] == which), None)
    if rec is None:
        raise UnknownCheck(which)
    series = rec.get("series")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if series:
        w.writerow(series["columns"])
        w.writerows(series["rows"])
    return buf.getvalue()


def write_outputs(report: dict, out_dir: Path, report_name: str = "report.json") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / report_name
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    for rec in report["checks"]:
        if rec.get("series"):
            (out_dir / f"{rec['name']}.csv").write_text(emit_plot_data(report, rec["name"]))
    return path


# -- argparse ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multicrit",
                                 description="Numerical verification of multicritical circle map geometry.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the checks named in a config file")
    r.add_argument("--config", required=True, help="JSON or YAML experiment config")
    r.add_argument("--precision", choices=["standard", "extended"], help="override the config")
    r.add_argument("--jobs", type=int, help="number of worker processes")
    r.add_argument("--out", help="output directory for report.json and CSV tables")
    r.add_argument("--fixtures", help="fixture file (default: $MULTICRIT_FIXTURES/fixtures.json)")

    p = sub.add_parser("plot", help="print the CSV series of one check from a report")
    p.add_argument("report", help="report.json written by 'run'")
    p.add_argument("check", help="check name")
    p.add_argument("--out", help="write to this file instead of stdout")

    f = sub.add_parser("fixtures", help="inspect or clear recorded fixtures")
    f.add_argument("action", choices=["list", "reset"])
    f.add_argument("--fixtures", help="fixture file (default: $MULTICRIT_FIXTURES/fixtures.json)")
    return ap


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.precision:
        cfg.precision = args.precision
    if args.jobs:
        cfg.jobs = args.jobs
    if args.out:
        cfg.out_dir = Path(args.out)
    if args.fixtures:
        cfg.fixtures_path = args.fixtures
    report = run(cfg)
    path = write_outputs(report, cfg.out_dir, cfg.report_name)
    for rec in report["checks"]:
        print(f"{rec['name']:<22} {rec['status']}")
    if report["setup_error"]:
        print(f"setup error: {report['setup_error']}", file=sys.stderr)
    print(f"report written to {path}")
    return exit_code(report)


def _cmd_plot(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read report: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = emit_plot_data(report, args.check)
    except UnknownCheck as e:
        print(f"unknown check {e.args[0]!r} in report", file=sys.stderr)
        return EXIT_FAIL
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    store = FixtureStore(args.fixtures)
    if args.action == "reset":
        store.reset()
        print(f"removed fixtures at {store.path}")
    else:
        for key, value in store.items():
            print(f"{key}\t{value!r}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "plot": _cmd_plot, "fixtures": _cmd_fixtures}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
