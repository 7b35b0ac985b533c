"""Command line front end: ``elond simulate <scenario>`` and ``elond stream``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import typing
from pathlib import Path

import numpy as np
import yaml

from .core import DiscountSequence, Kind, Statistic
from .procedures import UniformSource, canonical_name, make_procedure, restore
from .simlab import SCENARIOS, TRIAL_RUNNERS, ConfigError, run_trials, summarize
from .simlab.runner import DEFAULT_SEED

SCHEMA_VERSION = 1
OUTPUT_ENV = "ELOND_OUTPUT_DIR"
RUN_KEYS = {"scenario", "trials", "seed", "horizons", "output_dir", "workers", "trajectory"}


def fmt(v) -> str:
    """Locale-independent, round-trip formatting."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class CsvOut:
    def __init__(self, path: Path, schema: str, header: list[str]):
        self.path = path
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._fh.write(f"# schema: elond.{schema}/{SCHEMA_VERSION}\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(header)

    def row(self, *values) -> None:
        self._w.writerow([fmt(v) for v in values])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------- config


def _mark(node) -> str:
    return f"line {node.start_mark.line + 1}"


def load_config(path: str | None) -> tuple[dict, dict]:
    """Parse a YAML mapping; returns (values, {key: 'line N'})."""
    if path is None:
        return {}, {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if root is None:
        return {}, {}
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{path}:{_mark(root)}: top level must be a mapping")
    lines = {}
    for knode, vnode in root.value:
        if knode.value in lines:
            raise ConfigError(f"{path}:{_mark(knode)}: duplicate key {knode.value!r}")
        lines[knode.value] = f"{path}:{_mark(knode)}"
    return yaml.safe_load(text) or {}, lines


def _coerce(name: str, ftype, value):
    hint = str(ftype)
    try:
        if hint in ("int", "<class 'int'>"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if hint in ("float", "<class 'float'>"):
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if hint in ("tuple", "<class 'tuple'>"):
            if isinstance(value, str):
                value = [float(v) for v in value.split(",")]
            return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r} as {hint.strip('<>').replace('class ', '')}") from None
    return value


def _parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def build_run(scenario: str, args) -> dict:
    values, lines = load_config(args.config)
    if "scenario" in values and values["scenario"] != scenario:
        raise ConfigError(f"{lines.get('scenario', 'config')}: scenario {values['scenario']!r} "
                          f"does not match subcommand {scenario!r}")
    for item in args.set or []:
        k, v = _parse_override(item)
        values[k] = v
        lines[k] = f"--set {k}"
    for flag, key in (("alpha", "alpha"), ("horizon", "T"), ("trials", "trials"), ("workers", "workers")):
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
            lines[key] = f"--{flag}"
    if args.seed is not None:
        values["seed"] = args.seed
        lines["seed"] = "--seed"

    cls = SCENARIOS[scenario]
    hints = typing.get_type_hints(cls)
    fields = {f.name for f in dataclasses.fields(cls)}
    params = {}
    for key, val in values.items():
        where = lines.get(key, key)
        if key in RUN_KEYS:
            continue
        if key not in fields:
            raise ConfigError(f"{where}: unknown key {key!r} for scenario {scenario!r}; "
                              f"allowed: {sorted(fields | RUN_KEYS)}")
        try:
            params[key] = _coerce(key, hints[key], val)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    try:
        sc = cls(**params)
    except ConfigError as exc:
        raise ConfigError(f"{args.config or 'flags'}: {exc}") from None

    seed = values.get("seed", DEFAULT_SEED)
    if seed == "random":
        seed = int(np.random.SeedSequence().entropy % (2**63))
    elif isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        try:
            seed = int(str(seed))
            if seed < 0:
                raise ValueError
        except ValueError:
            raise ConfigError(f"{lines.get('seed', 'seed')}: seed must be a nonnegative integer or 'random'") from None
    trials = values.get("trials", 200)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"{lines.get('trials', 'trials')}: trials must be a positive integer")
    workers = values.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"{lines.get('workers', 'workers')}: workers must be a positive integer")
    T = sc.T
    horizons = values.get("horizons") or sorted({max(1, T // 4), max(1, T // 2), T})
    if not isinstance(horizons, list) or any(not isinstance(h, int) or not 1 <= h <= T for h in horizons):
        raise ConfigError(f"{lines.get('horizons', 'horizons')}: horizons must be integers in [1, {T}]")
    out = args.output_dir or values.get("output_dir") or os.environ.get(OUTPUT_ENV) or "."
    traj = values.get("trajectory", True) and not args.no_trajectory
    return {"scenario": sc, "seed": seed, "trials": trials, "workers": workers,
            "horizons": horizons, "output_dir": Path(out), "trajectory": traj}


# ---------------------------------------------------------------- simulate


def _write_trace_outputs(name: str, results: list[dict], run: dict) -> list[Path]:
    out = run["output_dir"]
    written = []
    if run["trajectory"]:
        path = out / f"{name}_trajectory.csv"
        with CsvOut(path, "trajectory", ["trial", "t", "procedure", "alpha_t", "statistic", "rejected", "is_null"]) as w:
            for trial, res in enumerate(results):
                for proc, tr in res.items():
                    for k in range(tr.horizon):
                        w.row(trial, k + 1, proc, tr.levels[k], tr.statistics[k], bool(tr.rejected[k]), bool(tr.is_null[k]))
        written.append(path)
    path = out / f"{name}_summary.csv"
    with CsvOut(path, "summary", ["procedure", "horizon", "FDR", "FDR_SE", "power", "power_SE"]) as w:
        for proc, s in summarize(results).items():
            for h in run["horizons"]:
                a = s.at(h)
                w.row(proc, h, a["FDR"], a["FDR_SE"], a["power"], a["power_SE"])
    written.append(path)
    return written


def _write_fcr_outputs(results: list[dict], run: dict) -> list[Path]:
    out = run["output_dir"]
    written = []
    path = out / "fcr_intervals.csv"
    with CsvOut(path, "intervals", ["trial", "procedure", "index", "level", "lower", "upper", "empty", "covered"]) as w:
        for trial, res in enumerate(results):
            for proc, r in res.items():
                for k in np.flatnonzero(r["selected"]):
                    empty = bool(np.isnan(r["lower"][k]))
                    w.row(trial, proc, k + 1, r["levels"][k], r["lower"][k], r["upper"][k], empty, not r["miscovered"][k])
    written.append(path)
    path = out / "fcr_summary.csv"
    with CsvOut(path, "fcr-summary", ["procedure", "horizon", "FCR", "FCR_SE", "selected", "selected_SE"]) as w:
        for proc in results[0]:
            fcp = np.stack([r[proc]["fcp"] for r in results])
            nsel = np.stack([np.cumsum(r[proc]["selected"]) for r in results])
            n = len(results)
            for h in run["horizons"]:
                f, c = fcp[:, h - 1], nsel[:, h - 1]
                se = (lambda x: x.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0)
                w.row(proc, h, f.mean(), se(f), c.mean(), se(c))
    written.append(path)
    return written


def cmd_simulate(args) -> int:
    scenario = args.scenario
    run = build_run(scenario, args)
    run["output_dir"].mkdir(parents=True, exist_ok=True)
    results = run_trials(TRIAL_RUNNERS[scenario], run["scenario"], run["trials"], run["seed"], run["workers"])
    name = scenario.replace("-", "_")
    if scenario == "fcr":
        paths = _write_fcr_outputs(results, run)
    elif scenario == "wcs":
        paths = _write_trace_outputs(name, [r["traces"] for r in results], run)
    else:
        paths = _write_trace_outputs(name, results, run)
    for p in paths:
        print(p)
    return 0


# ---------------------------------------------------------------- stream


def parse_discount(text: str | None) -> DiscountSequence:
    if text is None or text == "default":
        return DiscountSequence.default()
    if text.startswith("power:"):
        return DiscountSequence.power(float(text.split(":", 1)[1]))
    raise ConfigError(f"unknown discount {text!r}; use 'default' or 'power:S'")


def _parse_line(line: str, expected: Kind) -> tuple[Statistic, float | None]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) not in (2, 3):
        raise ValueError("expected 'kind,value[,u]'")
    try:
        kind = Kind(parts[0].lower())
    except ValueError:
        raise ValueError(f"unknown kind {parts[0]!r} (use e or p)") from None
    if kind is not expected:
        raise ValueError(f"procedure takes {expected.value}-values, got {kind.value}")
    value = float(parts[1])
    if kind is Kind.PVALUE and not np.isfinite(value):
        raise ValueError("p-value must be finite")
    stat = Statistic(kind, value)
    u = float(parts[2]) if len(parts) == 3 else None
    return stat, u


def write_snapshot(proc, path: str) -> None:
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    tmp.write_text(json.dumps(proc.snapshot(), indent=1), encoding="utf-8")
    os.replace(tmp, path)


def cmd_stream(args, stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if args.snapshot_in:
        proc = restore(json.loads(Path(args.snapshot_in).read_text(encoding="utf-8")))
    else:
        if not 0 < args.alpha < 1:
            raise ConfigError("--alpha must lie in (0, 1)")
        uniforms = UniformSource(args.uniform_seed, args.uniform_mode)
        proc = make_procedure(canonical_name(args.procedure), args.alpha, parse_discount(args.discount),
                              uniforms=uniforms, w0=args.w0, lag=args.lag)
    for lineno, raw in enumerate(stdin, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "!snapshot":
            if not args.snapshot_out:
                print(f"line {lineno}: no --snapshot-out path configured", file=stderr)
                continue
            write_snapshot(proc, args.snapshot_out)
            continue
        try:
            stat, u = _parse_line(line, proc.kind)
            if u is not None and not proc.randomized:
                raise ValueError(f"{proc.name} takes no uniform draw")
            rec = proc.process(stat, u)
        except (ValueError, TypeError) as exc:
            print(f"line {lineno}: {exc}; skipped", file=stderr)
            continue
        stdout.write(f"{rec.index},{fmt(rec.level)},{fmt(rec.rejected)},{proc.n_rejections}\n")
        stdout.flush()
    if args.snapshot_out:
        write_snapshot(proc, args.snapshot_out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elond", description="Online FDR/FCR control with e-values.")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo scenario and write CSV files")
    sim.add_argument("scenario", choices=sorted(SCENARIOS))
    sim.add_argument("--config", help="YAML file of scenario and run keys")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--horizon", type=int, help="number of hypotheses T")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--seed", help="master seed (integer) or 'random'")
    sim.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or .)")
    sim.add_argument("--no-trajectory", action="store_true", help="skip the per-step trajectory CSV")
    sim.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stream", help="decide a stream of statistics read from stdin")
    st.add_argument("--procedure", default="e-LOND")
    st.add_argument("--alpha", type=float, default=0.05)
    st.add_argument("--discount", default="default", help="'default' or 'power:S'")
    st.add_argument("--w0", type=float, default=0.9)
    st.add_argument("--lag", type=int, default=0)
    st.add_argument("--uniform-mode", choices=("independent", "shared"), default="independent")
    st.add_argument("--uniform-seed", type=int, default=DEFAULT_SEED)
    st.add_argument("--snapshot-in", help="resume from a snapshot file")
    st.add_argument("--snapshot-out", help="snapshot path, written at EOF and on '!snapshot' lines")
    st.set_defaults(func=cmd_stream)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"elond: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"elond: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"elond: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
