"""Command-line entry point: ``composed-lab <command> [options]``.

Exit codes: 0 success, 1/2 for ``sanstype check`` (ExecErr/CompileErr),
64 usage error, 65 invalid configuration or input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import composed_training as ct
from . import discrete_composed as dc
from . import spline
from .errors import InvalidInput, InvalidParameter, InvalidState
from .sanstype.corrupt import CORRUPTIONS, corrupt_with_kind
from .sanstype import dataset as st_dataset
from .sanstype.generate import generate as generate_programs
from .sanstype import lang as st_lang
from .valid_set import ValidSet

EX_USAGE = 64
EX_DATAERR = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- helpers ---------------------------------------------------------------


def threads() -> int:
    """Worker cap from COMPOSED_LAB_THREADS (default 1)."""
    raw = os.environ.get("COMPOSED_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameter(f"COMPOSED_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidParameter("COMPOSED_LAB_THREADS must be at least 1")
    return n


def fan_out(fn, items: list) -> list:
    """Map fn over items, in parallel up to the thread cap; results stay in input order."""
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def csv_text(fields: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_manifest(out: Path, command: str, config: dict, seed, started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "composed_lab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": round(time.time() - started, 3),
    }
    (out / "manifest.json").write_text(dump_json(manifest))


def emit(args, files: dict[str, str], stdout_name: str, config: dict, seed, started: float) -> None:
    """Write files plus a manifest into --out, or print the main file to stdout."""
    if args.out is None:
        sys.stdout.write(files[stdout_name])
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    write_manifest(out, args.command, config, seed, started)


def load_spec(args) -> spline.StaircaseSpec:
    if args.spec is None:
        return spline.StaircaseSpec.rounding_staircase(5, 0.5)
    path = Path(args.spec)
    if not path.is_file():
        raise InvalidInput(f"spec file not found: {path}")
    try:
        return spline.StaircaseSpec.load(path)
    except (KeyError, json.JSONDecodeError) as e:
        raise InvalidInput(f"cannot read spec {path}: {e}") from None


def load_valid_set(args, spec: spline.StaircaseSpec) -> ValidSet:
    """--valid-set file if given, else the distinct staircase values."""
    if getattr(args, "valid_set", None):
        path = Path(args.valid_set)
        if not path.is_file():
            raise InvalidInput(f"valid-set file not found: {path}")
        return ValidSet.load(path)
    return ValidSet(np.unique(spec.values, axis=0))


# --- commands --------------------------------------------------------------


def cmd_norms(args, started) -> int:
    spec = load_spec(args)
    V = load_valid_set(args, spec)
    report = spline.theorem_report(spec, V, args.eps, spec_id=args.spec or "rounding_staircase")
    files = {
        "norms.csv": csv_text(spline.CSV_FIELDS, [spline.report_csv_row(report)]),
        "norms.json": dump_json(report),
    }
    emit(args, files, "norms.csv", {"spec": spec.to_dict(), "eps": args.eps}, None, started)
    return 0


def cmd_construct(args, started) -> int:
    spec = load_spec(args)
    V = load_valid_set(args, spec)
    fs = spline.base_construction_multi(spec, V, args.eps)
    out = {
        "spec": spec.to_dict(),
        "epsilon": spline.default_epsilon(V) if args.eps is None else args.eps,
        "coordinates": [
            {"knots": f.x, "values": f.y, "left_slope": f.left_slope, "right_slope": f.right_slope,
             "norm": spline.spline_norm(f)}
            for f in fs
        ],
        "grid_match": spline.composition_matches(fs, spec, V),
    }
    emit(args, {"construction.json": dump_json(out)}, "construction.json", {"spec": spec.to_dict(), "eps": args.eps},
         None, started)
    return 0


def _staircase_job(job):
    spec_dict, config = job
    return ct.run_staircase_experiment(spline.StaircaseSpec.from_dict(spec_dict), config)


def cmd_train_staircase(args, started) -> int:
    spec = load_spec(args)
    base = ct.ComposedConfig(lam=args.lam, sigma=args.sigma, base_epochs=args.epochs, lr=args.lr)
    seeds = list(range(args.seed, args.seed + args.seeds))
    configs = [ct.ComposedConfig(**{**asdict(base), "seed": s}) for s in seeds]
    reports = fan_out(_staircase_job, [(spec.to_dict(), c) for c in configs])
    rows = [r for rep in reports for r in ct.report_rows(rep)]
    files = {"staircase.csv": csv_text(ct.CSV_FIELDS, rows), "staircase.json": dump_json(reports)}
    emit(args, files, "staircase.csv", {"spec": spec.to_dict(), **asdict(base), "seeds": seeds}, seeds, started)
    return 0


def _discrete_job(config):
    task = dc.make_discrete_task(seed=config.seed)
    return dc.run_discrete_experiment(task, config)


def cmd_train_discrete(args, started) -> int:
    base = dc.DiscreteConfig(lam=args.lam, gamma=args.gamma, scale=args.scale, steps=args.steps, lr=args.lr)
    seeds = list(range(args.seed, args.seed + args.seeds))
    configs = [dc.DiscreteConfig(**{**asdict(base), "seed": s}) for s in seeds]
    reports = fan_out(_discrete_job, configs)
    rows = [r for rep in reports for r in dc.discrete_report_rows(rep)]
    files = {"discrete.csv": csv_text(dc.DISCRETE_CSV_FIELDS, rows), "discrete.json": dump_json(reports)}
    emit(args, files, "discrete.csv", {**asdict(base), "seeds": seeds}, seeds, started)
    return 0


def cmd_reinforce_check(args, started) -> int:
    if args.samples < 2:
        raise InvalidParameter("--samples must be at least 2")
    instances = []
    for i in range(args.instances):
        seed = args.seed + i
        model, den, X, Y = dc.random_instance(args.space, seed)
        exact = dc.exact_grad(model, den, X, Y, lam=args.lam, gamma=args.gamma, scale=args.scale)
        est, err = dc.reinforce_grad(
            model, den, X, Y, lam=args.lam, gamma=args.gamma, scale=args.scale, n_samples=args.samples, seed=seed
        )
        instances.append({"seed": seed, "max_z_score": float(dc.z_scores(est, err, exact).max())})
    worst = max(r["max_z_score"] for r in instances)
    result = {
        "space": args.space,
        "samples": args.samples,
        "threshold": args.threshold,
        "instances": instances,
        "max_z_score": worst,
        "pass": bool(worst <= args.threshold),
    }
    config = {k: getattr(args, k) for k in ("space", "samples", "instances", "lam", "gamma", "scale", "threshold")}
    emit(args, {"reinforce.json": dump_json(result)}, "reinforce.json", config, args.seed, started)
    return 0


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def cmd_sanstype_gen(args, started) -> int:
    if args.out is not None and args.full:
        cfg = st_dataset.DatasetConfig(seed=args.seed)
        out = Path(args.out)
        st_dataset.emit_dataset(out, cfg)
        write_manifest(out, "sanstype gen", asdict(cfg), args.seed, started)
        return 0
    examples = generate_programs(args.seed, args.n, ood=args.ood)
    split = "ood" if args.ood else "gen"
    text = _jsonl(ex.record(f"{split}-{i}") for i, ex in enumerate(examples))
    config = {"n": args.n, "ood": args.ood}
    emit(args, {"programs.jsonl": text}, "programs.jsonl", config, args.seed, started)
    return 0


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.is_file():
        raise InvalidInput(f"file not found: {p}")
    return p.read_text()


def cmd_sanstype_corrupt(args, started) -> int:
    code = _read_text(args.file)
    noisy, kind = corrupt_with_kind(code, np.random.default_rng(args.seed), args.kind)
    if args.out is None:
        sys.stdout.write(noisy)
        return 0
    emit(args, {"corrupted.cpp": noisy}, "corrupted.cpp", {"kind": kind}, args.seed, started)
    return 0


def cmd_sanstype_check(args, started) -> int:
    code = _read_text(args.file)
    tests = []
    if args.tests:
        path = Path(args.tests)
        if not path.is_file():
            raise InvalidInput(f"tests file not found: {path}")
        try:
            tests = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise InvalidInput(f"cannot read tests {path}: {e}") from None
        if isinstance(tests, dict):
            tests = tests.get("tests", [])
    outcome = st_lang.check(code, tests)
    print(outcome.kind if not outcome.message else f"{outcome.kind}: {outcome.message}")
    return outcome.exit_code


def cmd_sanstype_stats(args, started) -> int:
    stats = st_dataset.generation_stats(args.seed, args.n)
    emit(args, {"stats.json": dump_json(stats)}, "stats.json", {"n": args.n}, args.seed, started)
    return 0


def cmd_report(args, started) -> int:
    """Collect the CSV outputs found under run directories into one table per kind."""
    merged: dict[str, list[str]] = {}
    for d in args.runs:
        root = Path(d)
        if not root.is_dir():
            raise InvalidInput(f"not a directory: {root}")
        for path in sorted(root.glob("*.csv")):
            lines = path.read_text().splitlines()
            if not lines:
                continue
            header, body = lines[0], lines[1:]
            table = merged.setdefault(path.name, [header])
            if table[0] != header:
                raise InvalidInput(f"{path} has a different header from earlier {path.name} files")
            table.extend(body)
    files = {name: "\n".join(lines) + "\n" for name, lines in sorted(merged.items())}
    summary = "".join(f"# {name}\n{text}" for name, text in files.items())
    files["report.txt"] = summary
    emit(args, files, "report.txt", {"runs": args.runs}, None, started)
    return 0


# --- argument parsing ------------------------------------------------------


def _add_out(p):
    p.add_argument("--out", help="directory for output files and manifest.json (default: print to stdout)")


def _add_spec(p):
    p.add_argument("--spec", help="staircase JSON {intervals, values} (default: values 1..5, gap 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="composed-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"composed-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("norms", help="norm bounds and measured construction norm for a staircase")
    _add_spec(p)
    p.add_argument("--valid-set", help="valid set JSON (list of points); default: the staircase values")
    p.add_argument("--eps", type=float, default=None, help="inward shift of the construction")
    _add_out(p)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("construct", help="knots of the low-norm base function for a staircase")
    _add_spec(p)
    p.add_argument("--valid-set")
    p.add_argument("--eps", type=float, default=None)
    _add_out(p)
    p.set_defaults(func=cmd_construct)

    defaults = ct.ComposedConfig()
    p = sub.add_parser("train-staircase", help="standard vs composed ReLU training on a staircase")
    _add_spec(p)
    p.add_argument("--lambda", dest="lam", type=float, default=defaults.lam)
    p.add_argument("--sigma", type=float, default=defaults.sigma)
    p.add_argument("--epochs", type=int, default=defaults.base_epochs)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    _add_out(p)
    p.set_defaults(func=cmd_train_staircase)

    ddefaults = dc.DiscreteConfig()
    p = sub.add_parser("train-discrete", help="standard, test-time denoiser and composed arms on the discrete toy")
    p.add_argument("--lambda", dest="lam", type=float, default=ddefaults.lam)
    p.add_argument("--gamma", type=float, default=ddefaults.gamma)
    p.add_argument("--scale", type=float, default=ddefaults.scale)
    p.add_argument("--steps", type=int, default=ddefaults.steps)
    p.add_argument("--lr", type=float, default=ddefaults.lr)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1)
    _add_out(p)
    p.set_defaults(func=cmd_train_discrete)

    p = sub.add_parser("reinforce-check", help="compare the score-function estimate with the exact gradient")
    p.add_argument("--space", type=int, default=4, help="output space size (vocab**length)")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=ddefaults.lam)
    p.add_argument("--gamma", type=float, default=ddefaults.gamma)
    p.add_argument("--scale", type=float, default=ddefaults.scale)
    p.add_argument("--threshold", type=float, default=3.0, help="largest allowed z-score")
    _add_out(p)
    p.set_defaults(func=cmd_reinforce_check)

    st = sub.add_parser("sanstype", help="SansType generation, corruption and checking")
    st_sub = st.add_subparsers(dest="action", required=True, parser_class=_Parser)

    p = st_sub.add_parser("gen", help="generate programs as JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--ood", action="store_true", help="use the out-of-distribution templates")
    p.add_argument("--full", action="store_true", help="with --out, write every dataset split at default sizes")
    _add_out(p)
    p.set_defaults(func=cmd_sanstype_gen)

    p = st_sub.add_parser("corrupt", help="apply one random corruption to code")
    p.add_argument("file", nargs="?", help="code file (default: stdin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=CORRUPTIONS)
    _add_out(p)
    p.set_defaults(func=cmd_sanstype_corrupt)

    p = st_sub.add_parser("check", help="classify code; exit 0 Correct, 1 ExecErr, 2 CompileErr")
    p.add_argument("file", nargs="?", help="code file (default: stdin)")
    p.add_argument("--tests", help='JSON list of {"stdin", "stdout"}')
    p.set_defaults(func=cmd_sanstype_check)

    p = st_sub.add_parser("stats", help="generator statistics and corruption break rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--ood", action="store_true", help="accepted for symmetry; statistics do not depend on templates")
    _add_out(p)
    p.set_defaults(func=cmd_sanstype_stats)

    p = sub.add_parser("report", help="merge CSV outputs from run directories")
    p.add_argument("runs", nargs="+", help="directories written with --out")
    _add_out(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    started = time.time()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(e, file=sys.stderr)
        return EX_USAGE
    if args.command == "sanstype":
        args.command = f"sanstype {args.action}"
    try:
        return args.func(args, started)
    except (InvalidInput, InvalidParameter, InvalidState) as e:
        print(f"composed-lab: {e}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
