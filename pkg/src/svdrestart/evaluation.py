"""Metrics and experiment protocols: relative error, restart-budget sweeps,
link prediction, eigenvalue tracking, error-accumulation profiles and
scalability probes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bound import MonitorState, loss_update_delta
from .engine import (
    LWI2,
    FirstOrderPerturb,
    HeuFL,
    HeuFT,
    Hold,
    ReplayCache,
    RunResult,
    Timers,
    policy_to_dict,
    run,
)
from .spectral import (
    DeltaMatrix,
    SimilarityFn,
    SpectralFactors,
    SymSparseMatrix,
    dense_eigs_oracle,
    topk_eigs,
)
from .stream import SliceStream, SyntheticSpec, generate, make_rng

__all__ = [
    "ErrorSeries",
    "ExperimentReport",
    "GroundTruth",
    "Setup",
    "error_accumulation_profile",
    "eigen_tracking",
    "error_series",
    "fit_restart_budget",
    "link_prediction",
    "relative_error",
    "reports_to_csv",
    "scalability_probe",
    "sweep_fixed_max_error",
    "sweep_fixed_restarts",
]

CSV_HEADER = ["policy", "knob_name", "knob", "restarts", "max_r", "avg_r", "exact", "seed"]


def relative_error(J: float, L: float, scale: float = 1.0) -> float:
    """``(J - L) / L``, snapped to 0 when ``|J - L| <= 1e-9 L``.

    ``L <= 0`` is only accepted when ``J`` is also zero up to ``1e-9 * scale``.
    """
    if L <= 0:
        if J <= 1e-9 * scale:
            return 0.0
        raise ValueError(f"minimum loss is {L}; relative error undefined for J={J}")
    if abs(J - L) <= 1e-9 * L:
        return 0.0
    return (J - L) / L


@dataclass
class ErrorSeries:
    r: list[float]

    @property
    def max_r(self) -> float:
        return max(self.r) if self.r else 0.0

    @property
    def avg_r(self) -> float:
        return math.fsum(self.r) / len(self.r) if self.r else 0.0


@dataclass
class GroundTruth:
    """Dense-oracle minimum loss and leading eigenvalue for slices 0..T."""

    min_loss: list[float]
    lambda1: list[float]
    frob_sq: list[float]


@dataclass
class Setup:
    """One dynamic matrix to experiment on, with shared caches per updater."""

    a0: SymSparseMatrix
    stream: SliceStream
    k: int
    sim: SimilarityFn = field(default_factory=SimilarityFn)
    tol: float = 1e-10
    seed: int | None = None
    _caches: dict = field(default_factory=dict, repr=False)
    _truth: GroundTruth | None = field(default=None, repr=False)

    @classmethod
    def synthetic(cls, spec: SyntheticSpec, T: int, k: int, **kw) -> "Setup":
        a0, stream = generate(spec, T)
        return cls(a0, stream, min(k, spec.n), seed=spec.seed, **kw)

    @property
    def T(self) -> int:
        return self.stream.T

    def cache(self, updater=Hold()) -> ReplayCache:
        return self._caches.setdefault(updater, ReplayCache())

    def run(self, policy, updater=Hold(), **kw) -> RunResult:
        track = isinstance(policy, Timers) or kw.pop("track_bound", False)
        return run(self.a0, self.stream, self.sim, self.k, policy, updater, tol=self.tol,
                   track_bound=track, cache=self.cache(updater), **kw)

    def matrices(self):
        """Yield ``S_t`` for t = 0..T (the same object, mutated in place)."""
        a = self.a0.copy()
        s = self.sim.apply(a)
        yield s
        for da in self.stream.slices:
            ds = self.sim.delta(a, da, s)
            a.apply(da)
            s.apply(ds)
            yield s

    def ground_truth(self) -> GroundTruth:
        if self._truth is None:
            losses, lams, frobs = [], [], []
            for s in self.matrices():
                values, _ = dense_eigs_oracle(s)
                sq = np.sort(values * values)[::-1]
                losses.append(math.fsum(sq[self.k:]))
                lams.append(float(values[0]) if values.size else 0.0)
                frobs.append(s.frob_sq)
            self._truth = GroundTruth(losses, lams, frobs)
        return self._truth


def error_series(setup: Setup, result: RunResult) -> ErrorSeries:
    """Per-slice relative error of the factors returned at each slice."""
    truth = setup.ground_truth()
    r = [max(relative_error(row.loss_after, truth.min_loss[row.t], truth.frob_sq[row.t]), 0.0)
         for row in result.record.rows]
    return ErrorSeries(r)


@dataclass
class ExperimentReport:
    policy: str
    params: dict
    errors: ErrorSeries
    restarts: int
    seed: int | None = None
    exact: bool = True
    timing: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def knob_name(self) -> str:
        return next((k for k in self.params if k not in ("name", "mode")), "")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["errors"] = {"r": list(self.errors.r), "max_r": self.errors.max_r,
                       "avg_r": self.errors.avg_r}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["errors"] = ErrorSeries(list(d["errors"]["r"]))
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def csv_row(self) -> list:
        name = self.knob_name
        return [self.policy, name, self.params.get(name, ""), self.restarts,
                repr(self.errors.max_r), repr(self.errors.avg_r), int(self.exact),
                "" if self.seed is None else self.seed]


def reports_to_csv(reports: Sequence[ExperimentReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in reports:
        w.writerow(rep.csv_row())
    return buf.getvalue()


def _report(setup: Setup, policy, result: RunResult, exact=True, with_errors=True, **extra):
    errors = error_series(setup, result) if with_errors else ErrorSeries([])
    rows = result.record.rows
    timing = {"monitor_seconds": sum(r.monitor_seconds for r in rows),
              "restart_seconds": sum(r.restart_seconds for r in rows)}
    return ExperimentReport(policy.name, policy_to_dict(policy), errors, result.record.restarts,
                            seed=setup.seed, exact=exact, timing=timing, extra=extra)


# ---------------------------------------------------------------------------
# knob searches


def _is_threshold(policy) -> bool:
    return isinstance(policy, (Timers, LWI2))


def _integer_candidates(setup: Setup, policy) -> list[int]:
    T = setup.T
    if isinstance(policy, HeuFT):
        return list(range(1, T + 2))
    edges = setup.stream.edge_counts()
    sums = {sum(edges[i:j]) for i in range(T) for j in range(i + 1, T + 1)}
    sums.add(sum(edges) + 1)
    return sorted(x for x in sums if x >= 1)


def _upper_threshold(setup: Setup, policy, updater, count_at) -> float:
    hi = 1.0
    for _ in range(80):
        if count_at(hi) == 0:
            return hi
        hi *= 2.0
    raise RuntimeError(f"{policy.name}: could not find a threshold with zero restarts")


def fit_restart_budget(setup: Setup, policy, target: int, updater=Hold(), iters: int = 60):
    """Smallest knob whose run restarts exactly ``target`` times.

    Returns ``(policy, result, exact)``; when no knob hits the target the
    nearest count is returned with ``exact=False``.
    """
    runs: dict = {}

    def at(value):
        if value not in runs:
            runs[value] = setup.run(policy.with_knob(value), updater)
        return runs[value]

    def count_at(value):
        return at(value).record.restarts

    if _is_threshold(policy):
        lo = 0.0
        hi = _upper_threshold(setup, policy, updater, count_at)
        if count_at(lo) <= target:
            best = lo
        else:
            # invariant: count(lo) > target >= count(hi)
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if count_at(mid) > target:
                    lo = mid
                else:
                    hi = mid
            best = hi
        if count_at(best) != target:
            cands = [v for v in (lo, hi, best)]
            best = min(cands, key=lambda v: (abs(count_at(v) - target), v))
    else:
        cands = _integer_candidates(setup, policy)
        hits = [v for v in cands if count_at(v) == target]
        if hits:
            best = min(hits)
        else:
            best = min(cands, key=lambda v: (abs(count_at(v) - target), v))
    res = at(best)
    return policy.with_knob(best), res, res.record.restarts == target


def sweep_fixed_restarts(setup: Setup, policies, target_restarts: int,
                         updater=Hold()) -> list[ExperimentReport]:
    """Tune every policy to the same restart count and report its errors."""
    reports = []
    for proto in policies:
        pol, res, exact = fit_restart_budget(setup, proto, target_restarts, updater)
        reports.append(_report(setup, pol, res, exact=exact))
    return reports


def min_restarts_for_error(setup: Setup, policy, target_max_r: float, updater=Hold(),
                           iters: int = 60):
    """Knob with the fewest restarts whose run keeps ``max(r) <= target``.

    Threshold knobs: bisection for the largest feasible threshold. Integer
    knobs: exhaustive scan over the values where behaviour can change.
    Returns ``(policy, result, trace)`` with ``trace`` the visited
    ``(knob, restarts, max_r)`` triples.
    """
    trace = []

    def probe(value):
        res = setup.run(policy.with_knob(value), updater)
        mr = error_series(setup, res).max_r
        trace.append((value, res.record.restarts, mr))
        return res, mr

    if _is_threshold(policy):
        lo_res, lo_r = probe(0.0)
        if lo_r > target_max_r:
            raise ValueError(
                f"{policy.name}: max error {lo_r:.3g} at the most eager setting exceeds {target_max_r}")
        if math.isinf(target_max_r):
            return policy.with_knob(math.inf), probe(math.inf)[0], trace
        hi = 1.0
        while probe(hi)[1] <= target_max_r and trace[-1][1] > 0:
            hi *= 2.0
            if hi > 2.0 ** 80:
                break
        lo, best = 0.0, (0.0, lo_res)
        if trace[-1][2] <= target_max_r:
            best = (hi, setup.run(policy.with_knob(hi), updater))
        else:
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                res, mr = probe(mid)
                if mr <= target_max_r:
                    lo, best = mid, (mid, res)
                else:
                    hi = mid
        return policy.with_knob(best[0]), best[1], trace

    feasible = []
    for v in _integer_candidates(setup, policy):
        res, mr = probe(v)
        if mr <= target_max_r:
            feasible.append((res.record.restarts, -v, v, res))
    if not feasible:
        raise ValueError(f"{policy.name}: no setting reaches max error {target_max_r}")
    _, _, v, res = min(feasible, key=lambda x: (x[0], x[1]))
    return policy.with_knob(v), res, trace


def sweep_fixed_max_error(setup: Setup, policies, target_max_r: float,
                          updater=Hold()) -> list[ExperimentReport]:
    reports = []
    for proto in policies:
        pol, res, trace = min_restarts_for_error(setup, proto, target_max_r, updater)
        reports.append(_report(setup, pol, res, trace=[list(t) for t in trace]))
    return reports


# ---------------------------------------------------------------------------
# applications


def _hidden_positions(setup: Setup, hide_fraction: float, seed: int, mode: str) -> set:
    positions = {(i, j) for i, j, _ in setup.a0.entries()}
    for d in setup.stream.slices:
        positions.update((i, j) for i, j, _ in d.entries())
    ordered = sorted(positions)
    rng = make_rng(seed)
    if mode == "global":
        count = math.ceil(hide_fraction * len(ordered))
        idx = rng.choice(len(ordered), size=count, replace=False) if count else []
        return {ordered[i] for i in np.sort(idx)}
    if mode == "per_slice":
        # one uniform draw per position keeps the hidden set consistent across slices
        draws = rng.random(len(ordered))
        return {p for p, u in zip(ordered, draws) if u < hide_fraction}
    raise ValueError(f"unknown hiding mode {mode!r}")


def _strip(m: SymSparseMatrix, hidden: set, cls) -> SymSparseMatrix:
    out = cls(m.n)
    for i, j, w in m.entries():
        if (i, j) not in hidden:
            out.set(i, j, w)
    return out


def visible_setup(setup: Setup, hidden: set) -> Setup:
    slices = [_strip(d, hidden, DeltaMatrix) for d in setup.stream.slices]
    stream = SliceStream(slices, setup.stream.slicing_mode, list(setup.stream.event_counts))
    return Setup(_strip(setup.a0, hidden, SymSparseMatrix), stream, setup.k, setup.sim,
                 setup.tol, setup.seed)


def link_prediction(setup: Setup, policies, hide_fraction: float = 0.1,
                    seeds: Sequence[int] = range(10), restarts: int | None = None,
                    mode: str = "per_slice") -> dict[str, float]:
    """Mean relative MSE on hidden entries, ``(MSE_policy - MSE_opt) / MSE_opt``.

    ``MSE_opt`` uses a fresh rank-k decomposition of the visible matrix at the
    same slice. With ``restarts`` set, each policy is first tuned to that
    restart count on the visible stream of every seed.
    """
    if not 0 < hide_fraction < 1:
        raise ValueError("hide_fraction must lie in (0, 1)")
    per_policy: dict[str, list[float]] = {p.name: [] for p in policies}
    for seed in seeds:
        hidden = _hidden_positions(setup, hide_fraction, seed, mode)
        if not hidden:
            raise ValueError("hidden set is empty")
        vis = visible_setup(setup, hidden)
        cache = vis.cache()
        # targets: full S_t at hidden positions that currently hold an edge
        targets = []
        for s in setup.matrices():
            pos = [(i, j, s.get(i, j)) for i, j in sorted(hidden) if s.get(i, j) != 0.0]
            targets.append(pos)
        results = {}
        for proto in policies:
            pol = proto if restarts is None else fit_restart_budget(vis, proto, restarts)[0]
            results[proto.name] = vis.run(pol)
        opt = []
        for t, s in enumerate(vis.matrices()):
            if t not in cache.decomps:
                cache.decomps[t] = topk_eigs(s, vis.k, tol=vis.tol)
            opt.append(SpectralFactors.from_eigs(*cache.decomps[t]))
        for name, res in results.items():
            rel = []
            for t in range(1, setup.T + 1):
                pos = targets[t]
                if not pos:
                    continue
                rows = np.asarray([p[0] for p in pos])
                cols = np.asarray([p[1] for p in pos])
                truth = np.asarray([p[2] for p in pos])
                mse_p = float(np.mean((res.factors[t].entries_at(rows, cols) - truth) ** 2))
                mse_o = float(np.mean((opt[t].entries_at(rows, cols) - truth) ** 2))
                if mse_o > 0:
                    rel.append(relative_error(mse_p, mse_o))
            per_policy[name].append(float(np.mean(rel)) if rel else 0.0)
    return {name: float(np.mean(v)) for name, v in per_policy.items()} | {
        f"{name}/per_seed": v for name, v in per_policy.items()}


def eigen_tracking(setup: Setup, policies, restarts: int,
                   updater: FirstOrderPerturb = FirstOrderPerturb()) -> dict[str, float]:
    """RMSE of the tracked leading eigenvalue against the dense oracle, per policy,
    with every policy tuned to ``restarts`` restarts under ``updater``."""
    truth = setup.ground_truth()
    out = {}
    for proto in policies:
        _, res, exact = fit_restart_budget(setup, proto, restarts, updater)
        err = [row.lambda1 - truth.lambda1[row.t] for row in res.record.rows]
        out[proto.name] = math.sqrt(math.fsum(e * e for e in err) / len(err)) if err else 0.0
        out[f"{proto.name}/exact"] = exact
    return out


def error_accumulation_profile(setup: Setup, intervals: Sequence[int]) -> dict[int, tuple[float, float]]:
    """Mean and standard deviation over ``t0`` of the error at ``t0 + delta``
    after a fresh decomposition at ``t0`` with frozen factors."""
    intervals = sorted(set(int(d) for d in intervals))
    if not intervals or intervals[0] < 1:
        raise ValueError("intervals must be positive")
    T = setup.T
    if T < intervals[-1] + 1:
        raise ValueError(f"need T >= {intervals[-1] + 1}")
    truth = setup.ground_truth()
    cache = setup.cache()
    samples: dict[int, list[float]] = {d: [] for d in intervals}
    a = setup.a0.copy()
    s = setup.sim.apply(a)
    for t0 in range(0, T):
        if t0 >= 1:
            da = setup.stream.slices[t0 - 1]
            ds = setup.sim.delta(a, da, s)
            a.apply(da)
            s.apply(ds)
        if t0 < 1 or t0 > T - intervals[0]:
            continue
        if t0 not in cache.decomps:
            cache.decomps[t0] = topk_eigs(s, setup.k, tol=setup.tol)
        values, vectors = cache.decomps[t0]
        f = SpectralFactors.from_eigs(values, vectors)
        state = MonitorState.at_restart(s, values, t0)
        a_w, s_w = a.copy(), s.copy()
        for step in range(1, intervals[-1] + 1):
            t = t0 + step
            if t > T:
                break
            da = setup.stream.slices[t - 1]
            ds = setup.sim.delta(a_w, da, s_w)
            a_w.apply(da)
            loss_update_delta(state, f, s_w, ds)
            s_w.apply(ds)
            if step in samples:
                samples[step].append(
                    max(relative_error(state.current_loss, truth.min_loss[t], truth.frob_sq[t]), 0.0))
    return {d: (float(np.mean(v)), float(np.std(v))) for d, v in samples.items() if v}


# ---------------------------------------------------------------------------
# scalability


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def scalability_probe(sizes: Sequence[int], k: int = 10, T: int = 20, theta: float = 0.05,
                      static_per_node: float = 4.0, evolve_per_node: float = 2.0,
                      seed: int = 0, variant: str = "random") -> dict:
    """Run the bound-monitored policy at each size on a random stream and
    record wall-clock and instrumented work; fit log-log slopes."""
    rows = []
    for n in sizes:
        spec = SyntheticSpec(variant=variant, n=int(n), m_static=int(static_per_node * n),
                             m_evolve=int(evolve_per_node * n), seed=seed)
        a0, stream = generate(spec, T)
        t0 = time.perf_counter()
        res = run(a0, stream, SimilarityFn(), min(k, n), Timers(theta), keep_factors=False)
        total = time.perf_counter() - t0
        recs = res.record.rows
        rows.append({
            "n": int(n),
            "edges": a0.num_edges + sum(d.num_edges for d in stream.slices),
            "delta_nnz": sum(r.delta_nnz for r in recs),
            "support_rows": sum(r.n_support for r in recs),
            "monitoring_cost": res.record.monitoring_cost(),
            "monitor_seconds": sum(r.monitor_seconds for r in recs),
            "restart_seconds": sum(r.restart_seconds for r in recs),
            "total_seconds": total,
            "restarts": res.record.restarts,
        })
    col = lambda key: [r[key] for r in rows]  # noqa: E731
    slopes = {}
    if len({r["n"] for r in rows}) >= 2:
        slopes = {
            "time_vs_nodes": loglog_slope(col("n"), col("total_seconds")),
            "time_vs_edges": loglog_slope(col("edges"), col("total_seconds")),
            "cost_vs_delta_nnz": loglog_slope(col("delta_nnz"), col("monitoring_cost")),
            "cost_vs_support": loglog_slope(col("support_rows"), col("monitoring_cost")),
        }
    return {"rows": rows, "slopes": slopes}
