"""Command-line front end: norms, constant estimates, checks and named reproductions.

Every run is fully described by an :class:`ExperimentConfig`, which is echoed
verbatim into the report.  Reports are JSON; tables go to companion CSV files
whose bodies are byte-identical across reruns with the same seed.

Exit codes: 0 pass, 1 check failure, 2 usage or parse error, 3 partial
result after a budget overflow.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .constants import SearchFamily, estimate
from .constants.checks import CHECKS, ModeUnavailable, run_check
from .greedy import BudgetExceeded
from .optim import DEFAULT_BUDGET, DEFAULT_TOL
from .spaces import NormModel, parse_spec
from .weights import Weight

FORMAT_VERSION = 1
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    """Bad input: unparsable file, unknown name, inconsistent configuration."""


# configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    spec: dict
    weight: dict = field(default_factory=lambda: {"kind": "constant", "c": 1.0})
    window: Optional[int] = None
    v: Optional[dict] = None  # second weight for the weight-transfer check
    family: dict = field(default_factory=dict)  # SearchFamily parameters other than window
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    tol: float = DEFAULT_TOL
    estimates: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    exact_only: bool = False
    workers: int = 1

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise UsageError("config must be a JSON object")
        obj = {k: v for k, v in obj.items() if k != "format_version"}
        known = {f.name for f in fields(cls)}
        extra = sorted(set(obj) - known)
        if extra:
            raise UsageError(f"unknown config keys: {', '.join(extra)}")
        if "spec" not in obj:
            raise UsageError("config needs a 'spec'")
        return cls(**obj)

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION, **asdict(self)}

    # derived objects
    def model(self) -> NormModel:
        return NormModel.build(parse_spec(self.spec), self.window)

    def w(self) -> Weight:
        return Weight.from_json(self.weight)

    def search_family(self, window: int) -> SearchFamily:
        params = {"seed": self.seed, **self.family, "window": window}
        return SearchFamily.from_json(params)


def _load_json(arg: str, what: str):
    """Inline JSON (starting with ``{`` or ``[``) or a path to a JSON file."""
    text = arg.strip()
    try:
        if not text.startswith(("{", "[")):
            text = Path(arg).read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} {arg!r}: {exc}") from exc


def _load_vector(arg: str) -> np.ndarray:
    text = arg.strip()
    if not text.startswith("[") and Path(arg).is_file():
        try:
            text = Path(arg).read_text().strip()
        except OSError as exc:
            raise UsageError(f"cannot read vector {arg!r}: {exc}") from exc
    try:
        vals = json.loads(text) if text.startswith("[") else [float(t) for t in text.replace(",", " ").split()]
        x = np.asarray(vals, dtype=float)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse vector: {exc}") from exc
    if x.ndim != 1 or x.size == 0:
        raise UsageError("vector must be a nonempty flat list of numbers")
    return x


def _default_seed() -> int:
    env = os.environ.get("GREEDYLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"GREEDYLAB_SEED must be an integer, got {env!r}") from exc


def config_from_args(args) -> ExperimentConfig:
    obj = _load_json(args.config, "config") if args.config else {}
    if args.spec:
        obj["spec"] = _load_json(args.spec, "spec")
    if args.weight:
        obj["weight"] = _load_json(args.weight, "weight")
    if args.window is not None:
        obj["window"] = args.window
    if args.budget is not None:
        obj["budget"] = args.budget
    if args.tol is not None:
        obj["tol"] = args.tol
    if args.workers is not None:
        obj["workers"] = args.workers
    if args.seed is not None:
        obj["seed"] = args.seed
    elif "seed" not in obj:
        obj["seed"] = _default_seed()
    for key in ("estimates", "checks"):
        extra = getattr(args, key, None)
        if extra:
            obj[key] = list(obj.get(key, [])) + extra
    cfg = ExperimentConfig.from_json(obj)
    try:
        model = cfg.model()
        cfg.w()
        if cfg.v is not None:
            Weight.from_json(cfg.v)
        cfg.search_family(model.window)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    cfg.window = model.window
    return cfg


# parallel map ------------------------------------------------------------------


def pmap(fn: Callable, items: list, workers: int = 1) -> list:
    """Ordered map; ``workers > 1`` uses processes, the merge order never changes."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# work items (top level so they pickle) -------------------------------------------


def estimate_item(args: tuple) -> dict:
    name, spec, weight, window, family, budget, tol = args
    model = NormModel.build(parse_spec(spec), window)
    fam = SearchFamily.from_json(family)
    try:
        e = estimate(name, model, Weight.from_json(weight), fam, budget=budget, tol=tol)
        out = e.to_json()
    except BudgetExceeded as exc:
        out = exc.partial.to_json() if exc.partial is not None else {"name": name, "value": None}
        out["status"] = "partial"
        out["error"] = str(exc)
    out.pop("family", None)
    return {"kind": "estimate", **out}


def check_item(args: tuple) -> dict:
    check_id, spec, weight, v, window, family, budget, tol, exact_only = args
    model = NormModel.build(parse_spec(spec), window)
    fam = SearchFamily.from_json(family)
    vw = Weight.from_json(v) if v is not None else None
    try:
        rep = run_check(check_id, model, Weight.from_json(weight), fam, v=vw, budget=budget, tol=tol,
                        exact_only=exact_only)
        out = {**rep.to_json(), "status": "ok"}
    except BudgetExceeded as exc:
        out = {**exc.partial.to_json(), "status": "partial", "error": str(exc)}
    except ModeUnavailable as exc:
        out = {"check_id": check_id, "mode": "exact", "binding": True, "all_pass": False,
               "status": "mode-unavailable", "error": str(exc), "instances": []}
    out["spec"] = spec
    out["weight"] = weight
    return {"kind": "check", **out}


def check_failed(item: dict) -> bool:
    return item.get("status") == "ok" and item.get("binding") and not item.get("all_pass")


# rendering ---------------------------------------------------------------------------


def fmt(v) -> str:
    """CSV cell: 12 significant digits for floats, JSON for containers."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=_json_default)
    return str(v)


def csv_text(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in rows:
        wr.writerow([fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _sanitize(o):
    """Make floats JSON-safe (nan/inf as strings) and numpy values plain."""
    if isinstance(o, dict):
        return {str(k): _sanitize(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_sanitize(v) for v in o]
    if isinstance(o, np.ndarray):
        return _sanitize(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else fmt(o)
    return o


def summary_rows(items: list[dict]) -> list[dict]:
    rows = []
    for it in items:
        if it["kind"] == "estimate":
            rows.append({"kind": "estimate", "name": it.get("name"), "value": it.get("value"),
                         "known": it.get("known"), "status": it.get("status"), "examined": it.get("examined"),
                         "budget_flags": it.get("budget_flags", [])})
        elif it["kind"] == "check":
            rows.append({"kind": "check", "name": it.get("check_id"), "spec": it.get("spec"),
                         "mode": it.get("mode"), "binding": it.get("binding"), "all_pass": it.get("all_pass"),
                         "max_ratio": it.get("max_ratio"), "n_instances": it.get("n_instances"),
                         "status": it.get("status"), "budget_flags": it.get("budget_flags", [])})
    return rows


def instance_rows(items: list[dict]) -> list[dict]:
    rows = []
    for it in items:
        if it["kind"] != "check":
            continue
        for inst in it.get("instances", []):
            rows.append({"check_id": it["check_id"], "spec": it.get("spec"), "label": inst["label"],
                         "lhs": inst["lhs"], "rhs": inst["rhs"], "ratio": inst["ratio"], "pass": inst["pass"],
                         "witness": inst["witness"]})
    return rows


def _compact(item: dict) -> dict:
    if item.get("kind") != "check" or not item.get("instances"):
        return item
    worst = max(item["instances"], key=lambda i: i["ratio"])
    out = {k: v for k, v in item.items() if k != "instances"}
    out["worst_instance"] = worst
    return out


def emit(report: dict, tables: dict[str, list[dict]], out: Optional[str], fmt_name: str) -> None:
    """Write the report (and its tables) to ``out``, or a compact version to stdout."""
    report = _sanitize(report)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        stem = path.with_suffix("")
        if fmt_name == "json":
            path.write_text(json.dumps(report, indent=1, sort_keys=False) + "\n")
        for name, rows in tables.items():
            if rows:
                target = path if (fmt_name == "csv" and name == "summary") else Path(f"{stem}.{name}.csv")
                target.write_text(csv_text(rows))
        return
    if fmt_name == "csv":
        sys.stdout.write(csv_text(tables.get("summary") or []))
        return
    small = dict(report)
    small["results"] = [_compact(it) for it in report.get("results", [])]
    sys.stdout.write(json.dumps(small, indent=1) + "\n")


def make_report(command: str, config: dict, results: list[dict], started: float, **extra) -> dict:
    flags = sorted({f for it in results for f in it.get("budget_flags", []) or []})
    return {"format_version": FORMAT_VERSION, "artifact_version": __version__, "command": command,
            "config": config, "results": results, "budget_flags": flags,
            "wall_clock_s": round(time.perf_counter() - started, 3), **extra}


def exit_code(results: list[dict], criteria: Optional[list[dict]] = None) -> int:
    if any(it.get("status") == "mode-unavailable" for it in results):
        return EXIT_USAGE
    if any(check_failed(it) for it in results):
        return EXIT_FAIL
    if criteria and not all(c["pass"] for c in criteria):
        return EXIT_FAIL
    if any(it.get("status") == "partial" for it in results):
        return EXIT_PARTIAL
    return EXIT_PASS


# commands ---------------------------------------------------------------------------------


def cmd_norm(args) -> int:
    spec = _load_json(args.spec_file, "spec")
    x = _load_vector(args.vector_file)
    try:
        model = NormModel.build(parse_spec(spec), len(x))
        value = model.norm(x)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid spec or vector: {exc}") from exc
    print(f"{value:.12f}")
    return EXIT_PASS


def _items_for(cfg: ExperimentConfig, kind: str) -> list[tuple]:
    fam = cfg.search_family(cfg.window).to_json()
    if kind == "estimate":
        if not cfg.estimates:
            raise UsageError("no estimates selected (config 'estimates' or --name)")
        return [(n, cfg.spec, cfg.weight, cfg.window, fam, cfg.budget, cfg.tol) for n in cfg.estimates]
    if not cfg.checks:
        raise UsageError("no checks selected (config 'checks' or --name)")
    unknown = [c for c in cfg.checks if c not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; registered: {', '.join(CHECKS)}")
    return [(c, cfg.spec, cfg.weight, cfg.v, cfg.window, fam, cfg.budget, cfg.tol, cfg.exact_only)
            for c in cfg.checks]


def cmd_run(args) -> int:
    started = time.perf_counter()
    cfg = config_from_args(args)
    kind = args.command
    items = _items_for(cfg, kind)
    if kind == "estimate":
        from .constants.estimates import parse_name
        for it in items:
            try:
                parse_name(it[0])
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
    results = pmap(estimate_item if kind == "estimate" else check_item, items, cfg.workers)
    report = make_report(kind, cfg.to_json(), results, started)
    tables = {"summary": summary_rows(results), "instances": instance_rows(results)}
    emit(report, tables, args.out, args.format)
    code = exit_code(results)
    print(f"{kind}: {len(results)} item(s), exit {code}", file=sys.stderr)
    return code


def cmd_reproduce(args) -> int:
    from .reproductions import REPRODUCTIONS, run_reproduction

    if args.name not in REPRODUCTIONS:
        raise UsageError(f"unknown reproduction {args.name!r}; registered: {', '.join(REPRODUCTIONS)}")
    started = time.perf_counter()
    seed = args.seed if args.seed is not None else _default_seed()
    res = run_reproduction(args.name, seed=seed, workers=args.workers or 1)
    report = make_report("reproduce", res["config"], res["results"], started,
                         name=args.name, criteria=res["criteria"], tables=res["tables"])
    tables = dict(res["tables"])
    tables["criteria"] = res["criteria"]
    if res["results"]:
        tables["summary"] = summary_rows(res["results"])
    emit(report, tables, args.out, args.format)
    for c in res["criteria"]:
        print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['name']}: {c['detail']}", file=sys.stderr)
    code = exit_code(res["results"], res["criteria"])
    print(f"reproduce {args.name}: exit {code}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="greedylab",
                                description="Weighted greedy-algorithm constants on finite windows.")
    p.add_argument("--version", action="version", version=f"greedylab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("norm", help="evaluate the norm of one vector")
    s.add_argument("spec_file", help="space spec (JSON file or inline JSON)")
    s.add_argument("vector_file", help="coefficients (JSON list, or whitespace/comma separated; file or inline)")
    s.set_defaults(func=cmd_norm)

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("config", nargs="?", help="experiment config (JSON file or inline JSON)")
            sp.add_argument("--spec", help="space spec, overrides the config")
            sp.add_argument("--weight", help="weight descriptor, overrides the config")
            sp.add_argument("--window", type=int)
            sp.add_argument("--budget", type=int)
            sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int, help="RNG seed (fallback: GREEDYLAB_SEED, then 0)")
        sp.add_argument("--workers", type=int, help="process count; 1 (default) runs in-process")
        sp.add_argument("--out", help="report path; tables go to <stem>.<table>.csv")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    s = sub.add_parser("estimate", help="estimate named constants")
    common(s)
    s.add_argument("--name", dest="estimates", action="append", help="constant name, repeatable (e.g. Ca, 'd(4)')")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("check", help="run registered inequality checks")
    common(s)
    s.add_argument("--name", dest="checks", action="append", help="check id, repeatable")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("reproduce", help="run a named reproduction")
    s.add_argument("name")
    common(s, with_config=False)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"greedylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
