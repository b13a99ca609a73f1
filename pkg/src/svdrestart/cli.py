"""Command-line entry point: ``svdrestart {run,gen,bench,profile}``.

Exit codes: 0 ok, 1 usage or invalid configuration, 2 data error
(unreadable or malformed input, infeasible generator spec), 3 numerical
failure (eigensolver did not converge).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .engine import (
    POLICY_TYPES,
    RestartFailure,
    policy_from_dict,
    run,
    updater_from_dict,
)
from .evaluation import (
    Setup,
    _report,
    error_accumulation_profile,
    error_series,
    reports_to_csv,
    scalability_probe,
    sweep_fixed_max_error,
    sweep_fixed_restarts,
)
from .lanczos import EigenSolverError
from .spectral import SimilarityFn
from .stream import (
    EQUAL_EDGES,
    EQUAL_TIME,
    EdgeListError,
    SyntheticSpec,
    generate,
    generate_events,
    load_events,
    num_nodes,
    slice_events,
    split_static_count,
    write_events,
)

THREADS_ENV = "SVDRESTART_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

RUN_COLUMNS = ["t", "restarted", "loss", "bound", "margin", "loss_after", "edges",
               "delta_nnz", "lambda1", "n_support", "nabla_entries", "matvecs",
               "loss_entry_visits"]
TIMING_COLUMNS = ["monitor_seconds", "restart_seconds"]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run or bench needs; serialized into every output."""

    input: str | None = None
    synthetic: dict | None = None
    static_fraction: float | None = None
    static_count: int | None = None
    T: int = 50
    slicing: str = EQUAL_EDGES
    k: int = 100
    similarity: str = "identity"
    policy: dict = field(default_factory=lambda: {"name": "TIMERS", "theta": 0.05})
    updater: dict = field(default_factory=lambda: {"name": "hold"})
    seed: int = 0
    tol: float = 1e-10
    dense_oracle: bool = False
    timing: bool = False
    output: str | None = None
    json_output: str | None = None

    def validate(self) -> None:
        if (self.input is None) == (self.synthetic is None):
            raise UsageError("give exactly one of an input edge list or a synthetic spec")
        if self.static_fraction is not None and self.static_count is not None:
            raise UsageError("--static-fraction and --static-count are mutually exclusive")
        if self.static_fraction is not None and not 0 < self.static_fraction < 1:
            raise UsageError("static fraction must lie in (0, 1)")
        if self.static_count is not None and self.static_count < 0:
            raise UsageError("static count must be non-negative")
        if self.synthetic is not None and (self.static_fraction is not None
                                           or self.static_count is not None):
            raise UsageError("static split options only apply to an input edge list")
        if self.T < 1:
            raise UsageError("T must be at least 1")
        if self.k < 1:
            raise UsageError("k must be at least 1")
        if self.slicing not in (EQUAL_EDGES, EQUAL_TIME):
            raise UsageError(f"unknown slicing mode {self.slicing!r}")
        if self.tol <= 0:
            raise UsageError("tol must be positive")
        try:
            SimilarityFn(self.similarity)
            policy_from_dict(self.policy)
            updater_from_dict(self.updater)
            if self.synthetic is not None:
                SyntheticSpec.from_dict(self.synthetic)
        except (TypeError, ValueError, KeyError) as exc:
            raise UsageError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# helpers


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _num(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _provenance(config: dict) -> list[str]:
    return [f"svdrestart {__version__}", "config " + json.dumps(config, sort_keys=True)]


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def _load_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a JSON object")
    # a report embeds its config; accept it directly for reruns
    return data.get("config", data)


def _header_fields(path: str) -> dict:
    """``# key: value`` header lines written by ``gen``."""
    out = {}
    try:
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                key, sep, value = line[1:].partition(":")
                if sep:
                    out[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return out


def build_setup(cfg: RunConfig) -> Setup:
    """Load or generate the dynamic matrix described by ``cfg``."""
    sim = SimilarityFn(cfg.similarity)
    if cfg.synthetic is not None:
        spec = SyntheticSpec.from_dict(cfg.synthetic)
        try:
            a0, stream = generate(spec, cfg.T)
        except ValueError as exc:
            raise DataError(f"synthetic spec: {exc}") from None
        n = spec.n
    else:
        header = _header_fields(cfg.input)
        try:
            events = load_events(cfg.input)
        except EdgeListError as exc:
            raise DataError(f"{cfg.input}:{exc.line}: {exc}") from None
        except OSError as exc:
            raise DataError(f"cannot read {cfg.input}: {exc}") from None
        if not events:
            raise DataError(f"{cfg.input}: no events")
        n = int(header.get("nodes", num_nodes(events)))
        if n < num_nodes(events):
            raise DataError(f"{cfg.input}: header declares {n} nodes but ids reach {num_nodes(events) - 1}")
        if cfg.static_count is not None:
            count = cfg.static_count
        elif cfg.static_fraction is not None:
            count = min(math.ceil(cfg.static_fraction * len(events)), len(events) - 1)
        elif "static_count" in header:
            count = int(header["static_count"])
        else:
            count = min(math.ceil(0.6 * len(events)), len(events) - 1)
        if not 0 <= count < len(events):
            raise DataError(f"static count {count} leaves no evolving events out of {len(events)}")
        a0, evolving = split_static_count(events, count, n)
        time_range = None
        if cfg.slicing == EQUAL_TIME and "time_range" in header:
            lo, hi = (float(x) for x in header["time_range"].split())
            time_range = (lo, hi)
        try:
            stream = slice_events(evolving, cfg.T, cfg.slicing, n=n, time_range=time_range)
        except ValueError as exc:
            raise DataError(f"{cfg.input}: {exc}") from None
    k = min(cfg.k, max(n // 2, 1))
    return Setup(a0, stream, k, sim, cfg.tol, cfg.seed)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be positive")
    return value


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg: RunConfig) -> int:
    """Run one policy over one stream; write the per-slice CSV and a JSON summary."""
    cfg.validate()
    setup = build_setup(cfg)
    policy = policy_from_dict(cfg.policy)
    updater = updater_from_dict(cfg.updater)
    result = run(setup.a0, setup.stream, setup.sim, setup.k, policy, updater, tol=setup.tol,
                 keep_factors=False)
    rec = result.record

    columns = list(RUN_COLUMNS)
    true_r = None
    if cfg.dense_oracle:
        columns.append("true_r")
        true_r = error_series(setup, result).r
    if cfg.timing:
        columns += TIMING_COLUMNS
    resolved = cfg.to_dict() | {"k": setup.k}

    buf = io.StringIO()
    for line in _provenance(resolved):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for i, row in enumerate(rec.rows):
        d = asdict(row)
        if true_r is not None:
            d["true_r"] = true_r[i]
        w.writerow([_num(d[c]) for c in columns])
    _write(cfg.output, buf.getvalue())

    if cfg.json_output:
        last = result.factors[-1]
        summary = {
            "version": __version__,
            "config": resolved,
            "n": setup.a0.n,
            "T": setup.T,
            "restarts": rec.restarts,
            "restart_slices": rec.restart_slices(),
            "initial_loss": rec.initial_loss,
            "final_loss": rec.rows[-1].loss_after if rec.rows else rec.initial_loss,
            "final_values": [float(x) for x in last.signed_values()],
            "monitoring_cost": rec.monitoring_cost(),
        }
        if true_r is not None:
            summary["max_true_r"] = max(true_r, default=0.0)
        if cfg.timing:
            summary["timing"] = {c: sum(getattr(r, c) for r in rec.rows) for c in TIMING_COLUMNS}
        _write(cfg.json_output, _dumps(summary))
    return EXIT_OK


@dataclass
class BenchConfig:
    """A grid of policies by seeds over one synthetic family or one input file."""

    run: RunConfig = field(default_factory=RunConfig)
    policies: list = field(default_factory=lambda: ["TIMERS", "LWI2", "Heu-FL", "Heu-FT"])
    seeds: list = field(default_factory=lambda: [0])
    fixed_restarts: int | None = None
    max_error: float | None = None
    profile: list | None = None
    out_dir: str | None = None

    def validate(self) -> None:
        self.run.validate()
        if not self.policies:
            raise UsageError("at least one policy is needed")
        for name in self.policies:
            if name not in POLICY_TYPES:
                raise UsageError(f"unknown policy {name!r}; choose from {sorted(POLICY_TYPES)}")
        if len(set(self.policies)) != len(self.policies):
            raise UsageError("duplicate policy names")
        if not self.seeds:
            raise UsageError("at least one seed is needed")
        if self.fixed_restarts is not None and self.max_error is not None:
            raise UsageError("--fixed-restarts and --max-error are mutually exclusive")
        if self.fixed_restarts is not None and not 0 <= self.fixed_restarts <= self.run.T:
            raise UsageError(f"fixed restarts must lie in [0, {self.run.T}]")
        if self.max_error is not None and not self.max_error >= 0:
            raise UsageError("max error must be non-negative")
        if self.profile is not None:
            if not self.profile or min(self.profile) < 1:
                raise UsageError("profile intervals must be positive integers")
            if max(self.profile) + 1 > self.run.T:
                raise UsageError(f"profile intervals need T >= {max(self.profile) + 1}")
        if self.run.input is not None and len(self.seeds) > 1:
            raise UsageError("several seeds only make sense with a synthetic spec")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        run_cfg = RunConfig.from_dict(d.pop("run", {}))
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown bench config keys: {sorted(unknown)}")
        return cls(run=run_cfg, **d)


def _bench_cell(bench: BenchConfig, seed: int) -> dict:
    cfg = bench.run
    if cfg.synthetic is not None:
        cfg = replace(cfg, synthetic=cfg.synthetic | {"seed": seed})
    cfg = replace(cfg, seed=seed)
    setup = build_setup(cfg)
    updater = updater_from_dict(cfg.updater)
    base = {name: POLICY_TYPES[name]() for name in bench.policies}
    if cfg.policy["name"] in base:
        base[cfg.policy["name"]] = policy_from_dict(cfg.policy)
    policies = [base[name] for name in bench.policies]
    out = {"seed": seed}
    if bench.fixed_restarts is not None:
        out["reports"] = sweep_fixed_restarts(setup, policies, bench.fixed_restarts, updater)
    elif bench.max_error is not None:
        out["reports"] = sweep_fixed_max_error(setup, policies, bench.max_error, updater)
    else:
        out["reports"] = [_report(setup, p, setup.run(p, updater)) for p in policies]
    if bench.profile is not None:
        out["profile"] = error_accumulation_profile(setup, bench.profile)
    return out


def _profile_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "delta", "mean_r", "std_r"])
    for seed, prof in rows:
        for delta, (mean, std) in sorted(prof.items()):
            w.writerow([seed, delta, repr(mean), repr(std)])
    return buf.getvalue()


def cmd_bench(bench: BenchConfig) -> int:
    """Compare policies across seeds; write a merged CSV and per-cell JSON."""
    bench.validate()
    threads = _threads()
    seeds = list(bench.seeds)

    def attempt(seed):
        try:
            return _bench_cell(bench, seed)
        except (RestartFailure, EigenSolverError) as exc:
            return {"seed": seed, "error": f"{type(exc).__name__}: {exc}", "kind": "numeric"}
        except (ValueError, RuntimeError, DataError) as exc:
            return {"seed": seed, "error": f"{type(exc).__name__}: {exc}", "kind": "data"}

    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(attempt, seeds))
    else:
        cells = [attempt(s) for s in seeds]

    resolved = bench.to_dict()
    header = "".join(f"# {line}\n" for line in _provenance(resolved))
    reports = [r for c in cells for r in c.get("reports", [])]
    failures = [{"seed": c["seed"], "error": c["error"], "kind": c["kind"]}
                for c in cells if "error" in c]
    text = reports_to_csv(reports)
    if bench.run.timing:
        lines = text.splitlines()
        lines[0] += ",monitor_seconds,restart_seconds"
        for i, rep in enumerate(reports, start=1):
            lines[i] += f",{rep.timing['monitor_seconds']!r},{rep.timing['restart_seconds']!r}"
        text = "\n".join(lines) + "\n"
    _write(bench.run.output, header + text)

    if bench.profile is not None:
        prof = _profile_csv([(c["seed"], c["profile"]) for c in cells if "profile" in c])
        if bench.out_dir:
            _write(str(Path(bench.out_dir) / "profile.csv"), header + prof)
        else:
            sys.stdout.write(prof)

    if bench.out_dir:
        for c in cells:
            doc = {"version": __version__, "config": resolved, "seed": c["seed"]}
            if "error" in c:
                doc["error"] = c["error"]
            else:
                doc["reports"] = [_strip_timing(r.to_dict(), bench.run.timing) for r in c["reports"]]
                if "profile" in c:
                    doc["profile"] = {str(d): list(v) for d, v in sorted(c["profile"].items())}
            _write(str(Path(bench.out_dir) / f"cell_seed{c['seed']}.json"), _dumps(doc))
        _write(str(Path(bench.out_dir) / "failures.json"), _dumps(failures))
    for f in failures:
        print(f"cell seed={f['seed']} failed: {f['error']}", file=sys.stderr)
    if any(f["kind"] == "numeric" for f in failures):
        return EXIT_NUMERIC
    return EXIT_DATA if failures else EXIT_OK


def _strip_timing(d: dict, keep: bool) -> dict:
    if not keep:
        d = dict(d)
        d.pop("timing", None)
    return d


def cmd_gen(spec: SyntheticSpec, T: int, out_path: str) -> int:
    """Write a synthetic stream as an edge list that ``run`` reads back exactly."""
    try:
        static, evolving = generate_events(spec, T)
    except ValueError as exc:
        raise DataError(f"synthetic spec: {exc}") from None
    header = [
        f"svdrestart {__version__}",
        "spec: " + json.dumps(spec.to_dict(), sort_keys=True),
        f"nodes: {spec.n}",
        f"static_count: {len(static)}",
        f"slices: {T}",
        f"time_range: 1 {T}",
    ]
    try:
        write_events(out_path, static + evolving, header)
    except OSError as exc:
        raise DataError(f"cannot write {out_path}: {exc}") from None
    return EXIT_OK


def cmd_profile(cfg: RunConfig, intervals: list[int]) -> int:
    """Mean/std relative error after ``delta`` slices of frozen factors."""
    cfg.validate()
    if not intervals or min(intervals) < 1:
        raise UsageError("intervals must be positive integers")
    if max(intervals) + 1 > cfg.T:
        raise UsageError(f"intervals need T >= {max(intervals) + 1}")
    setup = build_setup(cfg)
    prof = error_accumulation_profile(setup, intervals)
    header = "".join(f"# {line}\n" for line in _provenance(cfg.to_dict() | {"intervals": intervals}))
    _write(cfg.output, header + _profile_csv([(cfg.seed, prof)]))
    return EXIT_OK


def cmd_scaling(sizes: list[int], k: int, T: int, theta: float, seed: int, out: str | None) -> int:
    if len(sizes) < 2 or min(sizes) < 2:
        raise UsageError("need at least two sizes, each >= 2")
    res = scalability_probe(sizes, k=k, T=T, theta=theta, seed=seed)
    res["config"] = {"sizes": sizes, "k": k, "T": T, "theta": theta, "seed": seed}
    res["version"] = __version__
    _write(out, _dumps(res))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic stream (instead of --input)")
    g.add_argument("--variant", choices=["random", "celebrity", "community"])
    g.add_argument("--spec", help="JSON file with generator fields")
    g.add_argument("-n", "--nodes", type=int)
    g.add_argument("--m-static", type=int)
    g.add_argument("--m-evolve", type=int)
    g.add_argument("--trigger-slice", type=int)
    g.add_argument("--celebrity-node", type=int)
    g.add_argument("--attach-fraction", type=float)
    g.add_argument("--node-fraction", type=float)
    g.add_argument("--num-communities", type=int)
    g.add_argument("--intra-prob", type=float)
    g.add_argument("--num-events", type=int)


_SPEC_FLAGS = {"nodes": "n", "m_static": "m_static", "m_evolve": "m_evolve",
               "trigger_slice": "trigger_slice", "celebrity_node": "celebrity_node",
               "attach_fraction": "attach_fraction", "node_fraction": "node_fraction",
               "num_communities": "num_communities", "intra_prob": "intra_prob",
               "num_events": "num_events", "variant": "variant"}


def _spec_from_args(args, base: dict | None = None) -> dict | None:
    spec = dict(base or {})
    if args.spec:
        spec |= _load_json(args.spec)
    for flag, key in _SPEC_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            spec[key] = value
    if not spec:
        return None
    if args.seed is not None:
        spec["seed"] = args.seed
    return spec


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config (a RunConfig, or any report embedding one)")
    p.add_argument("-i", "--input", help="edge list 'u v [w] [ts]'")
    p.add_argument("--static-fraction", type=float, help="leading share of events forming A0 (default 0.6)")
    p.add_argument("--static-count", type=int, help="number of leading events forming A0")
    p.add_argument("-T", "--slices", type=int, help="number of time slices (default 50)")
    p.add_argument("--slicing", choices=[EQUAL_EDGES, EQUAL_TIME])
    p.add_argument("-k", "--rank", type=int, help="rank, capped at n/2 (default 100)")
    p.add_argument("--similarity", choices=["identity", "laplacian"])
    p.add_argument("--policy", choices=sorted(POLICY_TYPES), help="restart policy (default TIMERS)")
    p.add_argument("--theta", type=float, help="TIMERS margin threshold (default 0.05)")
    p.add_argument("--knob", type=float, help="policy knob for the baselines")
    p.add_argument("--updater", choices=["hold", "first_order"])
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--dense-oracle", action="store_true", default=None,
                   help="add the true relative error column (dense eigensolve per slice)")
    p.add_argument("--timing", action="store_true", default=None,
                   help="add wall-clock columns (output is then not reproducible)")
    p.add_argument("-o", "--output", help="CSV output path (default stdout)")
    _add_spec_args(p)


def _config_from_args(args, base: RunConfig | None = None) -> RunConfig:
    if args.config:
        base = RunConfig.from_dict(_load_json(args.config))
    elif base is None:
        base = RunConfig()
    d = base.to_dict()
    simple = {"input": "input", "static_fraction": "static_fraction",
              "static_count": "static_count", "slices": "T", "slicing": "slicing",
              "rank": "k", "similarity": "similarity", "seed": "seed", "tol": "tol",
              "dense_oracle": "dense_oracle", "timing": "timing", "output": "output"}
    for flag, key in simple.items():
        value = getattr(args, flag, None)
        if value is not None:
            d[key] = value
    if getattr(args, "json", None) is not None:
        d["json_output"] = args.json
    spec = _spec_from_args(args, d.get("synthetic"))
    if spec is not None:
        d["synthetic"] = spec
    if args.input is not None and base.synthetic is not None and spec == base.synthetic:
        d["synthetic"] = None

    policy = dict(d["policy"])
    if args.policy is not None and args.policy != policy.get("name"):
        policy = {"name": args.policy}
    if args.theta is not None:
        if policy["name"] != "TIMERS":
            raise UsageError("--theta only applies to the TIMERS policy; use --knob")
        policy["theta"] = args.theta
    if args.knob is not None:
        cls = POLICY_TYPES[policy["name"]]
        field_name = cls().knob_name
        value = args.knob
        if field_name in ("edges_per_restart", "slices_per_restart"):
            if not float(value).is_integer():
                raise UsageError(f"{policy['name']} needs an integer knob")
            value = int(value)
        policy[field_name] = value
    d["policy"] = policy
    if args.updater is not None:
        d["updater"] = {"name": args.updater}
    return RunConfig.from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svdrestart", description=(
        "Error-bounded restarts of truncated eigendecompositions for dynamic networks. "
        f"Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure. "
        f"{THREADS_ENV} sets the worker threads used by 'bench'."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="monitor one stream with one policy")
    _add_run_args(p)
    p.add_argument("--json", help="JSON summary output path")

    p = sub.add_parser("gen", help="write a synthetic stream as an edge list")
    _add_spec_args(p)
    p.add_argument("-T", "--slices", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("bench", help="compare policies across seeds")
    _add_run_args(p)
    p.add_argument("--policies", default=None,
                   help="comma-separated policy names (default all four)")
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default 0)")
    p.add_argument("--fixed-restarts", type=int, help="tune every policy to this restart count")
    p.add_argument("--max-error", type=float, help="fewest restarts keeping max relative error below this")
    p.add_argument("--profile", type=_int_list, metavar="DELTAS",
                   help="also write the error-accumulation table for these intervals")
    p.add_argument("--out-dir", help="directory for per-cell JSON and profile.csv")
    p.add_argument("--bench-config", help="JSON BenchConfig")

    p = sub.add_parser("profile", help="error growth after a restart, or scaling with --sizes")
    _add_run_args(p)
    p.add_argument("--intervals", type=_int_list, default=[1, 2, 5, 10],
                   help="slice gaps to profile (default 1,2,5,10)")
    p.add_argument("--sizes", type=_int_list,
                   help="run the scalability probe over these node counts instead")
    return parser


def _dispatch(args) -> int:
    if args.command == "gen":
        if args.slices < 1:
            raise UsageError("T must be at least 1")
        spec = _spec_from_args(args)
        if spec is None:
            raise UsageError("gen needs generator fields (--variant, -n, ... or --spec)")
        try:
            spec_obj = SyntheticSpec.from_dict(spec)
        except TypeError as exc:
            raise UsageError(str(exc)) from None
        return cmd_gen(spec_obj, args.slices, args.output)

    bench = None
    if args.command == "bench" and args.bench_config:
        bench = BenchConfig.from_dict(_load_json(args.bench_config))
    cfg = _config_from_args(args, bench.run if bench else None)

    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "profile":
        if args.sizes:
            return cmd_scaling(args.sizes, 10 if args.rank is None else cfg.k,
                               20 if args.slices is None else cfg.T,
                               cfg.policy.get("theta", 0.05), cfg.seed, cfg.output)
        return cmd_profile(cfg, args.intervals)

    if bench is None:
        bench = BenchConfig(run=cfg)
    else:
        bench.run = cfg
    if args.policies is not None:
        bench.policies = [x for x in args.policies.split(",") if x]
    if args.seeds is not None:
        bench.seeds = args.seeds
    if args.fixed_restarts is not None:
        bench.fixed_restarts = args.fixed_restarts
    if args.max_error is not None:
        bench.max_error = args.max_error
    if args.profile is not None:
        bench.profile = args.profile
    if args.out_dir is not None:
        bench.out_dir = args.out_dir
    return cmd_bench(bench)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help / --version exit 0, parse errors exit 1
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"svdrestart: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"svdrestart: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RestartFailure, EigenSolverError) as exc:
        print(f"svdrestart: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
