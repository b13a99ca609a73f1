"""Per-slice restart loop, restart policies and incremental updaters."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Union

import numpy as np

from .bound import MonitorState, loss_update_delta, loss_update_rows, lower_bound
from .spectral import (
    DeltaMatrix,
    EigenSolverError,
    SimilarityFn,
    SpectralFactors,
    SymSparseMatrix,
    topk_eigs,
)
from .stream import SliceStream

__all__ = [
    "FirstOrderPerturb",
    "HeuFL",
    "HeuFT",
    "Hold",
    "LWI2",
    "ReplayCache",
    "RestartFailure",
    "RunRecord",
    "RunResult",
    "SliceRow",
    "Timers",
    "decide",
    "policy_from_dict",
    "run",
    "update_first_order",
    "update_hold",
]


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class Timers:
    """Restart when ``(J - B) / B > theta`` or the bound is vacuous (``B <= 0``)."""

    theta: float = 0.05
    name = "TIMERS"
    knob_name = "theta"

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("theta must be non-negative")

    @property
    def knob(self):
        return self.theta

    def with_knob(self, value):
        return replace(self, theta=value)


@dataclass(frozen=True)
class LWI2:
    """Restart when the reconstruction loss exceeds a threshold.

    ``mode='relative'`` compares ``(J - J_0) / J_0`` against the threshold,
    with ``J_0`` the loss of the initial decomposition; ``mode='absolute'``
    compares ``J`` itself.
    """

    loss_threshold: float = 0.1
    mode: str = "relative"
    name = "LWI2"
    knob_name = "loss_threshold"

    def __post_init__(self):
        if not self.loss_threshold >= 0:
            raise ValueError("loss_threshold must be non-negative")
        if self.mode not in ("relative", "absolute"):
            raise ValueError(f"unknown LWI2 mode {self.mode!r}")

    @property
    def knob(self):
        return self.loss_threshold

    def with_knob(self, value):
        return replace(self, loss_threshold=value)


@dataclass(frozen=True)
class HeuFL:
    """Restart once ``edges_per_restart`` edges changed since the last restart."""

    edges_per_restart: int = 1000
    name = "Heu-FL"
    knob_name = "edges_per_restart"

    def __post_init__(self):
        if int(self.edges_per_restart) < 1:
            raise ValueError("edges_per_restart must be positive")

    @property
    def knob(self):
        return self.edges_per_restart

    def with_knob(self, value):
        return replace(self, edges_per_restart=int(value))


@dataclass(frozen=True)
class HeuFT:
    """Restart every ``slices_per_restart`` slices."""

    slices_per_restart: int = 10
    name = "Heu-FT"
    knob_name = "slices_per_restart"

    def __post_init__(self):
        if int(self.slices_per_restart) < 1:
            raise ValueError("slices_per_restart must be positive")

    @property
    def knob(self):
        return self.slices_per_restart

    def with_knob(self, value):
        return replace(self, slices_per_restart=int(value))


RestartPolicy = Union[Timers, LWI2, HeuFL, HeuFT]
POLICY_TYPES = {cls.name: cls for cls in (Timers, LWI2, HeuFL, HeuFT)}


def policy_to_dict(policy: RestartPolicy) -> dict:
    return {"name": policy.name, **asdict(policy)}


def policy_from_dict(d: dict) -> RestartPolicy:
    d = dict(d)
    cls = POLICY_TYPES.get(d.pop("name", None))
    if cls is None:
        raise ValueError(f"unknown policy; expected one of {sorted(POLICY_TYPES)}")
    return cls(**d)


def decide(policy: RestartPolicy, state: MonitorState, slice_index: int,
           edges_since_restart: int) -> bool:
    if isinstance(policy, Timers):
        b = state.current_bound
        if not b > 0:
            return True
        return (state.current_loss - b) / b > policy.theta
    if isinstance(policy, LWI2):
        j = state.current_loss
        j0 = state.initial_loss or 0.0
        if policy.mode == "relative" and j0 > 0:
            return (j - j0) / j0 > policy.loss_threshold
        return j > policy.loss_threshold
    if isinstance(policy, HeuFL):
        return edges_since_restart >= policy.edges_per_restart
    if isinstance(policy, HeuFT):
        return slice_index - state.t_prime >= policy.slices_per_restart
    raise TypeError(f"not a restart policy: {policy!r}")


# ---------------------------------------------------------------------------
# updaters


@dataclass(frozen=True)
class Hold:
    """Keep the factors frozen between restarts."""

    name = "hold"

    def update(self, f, s_prev, delta):
        return update_hold(f, delta), ()


@dataclass(frozen=True)
class FirstOrderPerturb:
    """First-order symmetric eigen-perturbation of the tracked pairs.

    Mixing terms with ``|lambda_l - lambda_j| < gap_floor`` are skipped;
    ``gap_floor = inf`` updates eigenvalues only.
    """

    gap_floor: float = 1e-6
    name = "first_order"

    def __post_init__(self):
        if not self.gap_floor > 0:
            raise ValueError("gap_floor must be positive")

    def update(self, f, s_prev, delta):
        new = update_first_order(f, s_prev, delta, self.gap_floor)
        if new is f:
            return f, ()
        changed = np.flatnonzero(np.any(new.u != f.u, axis=1) | np.any(new.v != f.v, axis=1))
        if not np.array_equal(new.sigma, f.sigma):
            changed = np.arange(f.n)
        return new, changed


Updater = Union[Hold, FirstOrderPerturb]


def updater_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name", "hold")
    if name == "hold":
        return Hold()
    if name == "first_order":
        return FirstOrderPerturb(**d)
    raise ValueError(f"unknown updater {name!r}")


def update_hold(f: SpectralFactors, delta: DeltaMatrix) -> SpectralFactors:
    return f


def update_first_order(f: SpectralFactors, s_prev: SymSparseMatrix, delta: DeltaMatrix,
                       gap_floor: float = 1e-6) -> SpectralFactors:
    """``lambda_l += u_l' D u_l``; ``u_l += sum_j (u_j' D u_l) / (lambda_l - lambda_j) u_j``.

    The sum runs over the other tracked pairs only. Columns are renormalized
    and re-sorted by magnitude afterwards.
    """
    if delta.is_empty() or f.k == 0:
        return f
    lam = f.signed_values()
    rows, cols, vals = delta.coo()
    support = np.unique(rows)
    # D U only has rows on the support of D
    du = np.zeros((support.size, f.k))
    loc = np.searchsorted(support, rows)
    np.add.at(du, loc, vals[:, None] * f.u[cols])
    coupling = f.u[support].T @ du  # U' D U, k x k
    new_lam = lam + np.diag(coupling)

    gaps = lam[None, :] - lam[:, None]  # gaps[j, l] = lambda_l - lambda_j
    with np.errstate(divide="ignore", invalid="ignore"):
        mix = np.where(np.abs(gaps) >= gap_floor, coupling / gaps, 0.0)
    np.fill_diagonal(mix, 0.0)
    u = f.u + f.u @ mix
    norms = np.linalg.norm(u, axis=0)
    norms[norms == 0] = 1.0
    u = u / norms
    order = np.lexsort((np.arange(f.k), -new_lam, -np.abs(new_lam)))
    new_lam = new_lam[order]
    u = u[:, order]
    return SpectralFactors.from_eigs(new_lam, u)


# ---------------------------------------------------------------------------
# run records


@dataclass
class SliceRow:
    t: int
    restarted: bool
    loss: float          # J(t) before any restart at t
    bound: float         # B(t); nan when not tracked
    margin: float        # (J - B) / B; inf when B <= 0
    loss_after: float    # loss of the factors returned for slice t
    edges: int           # changed positions of the adjacency slice
    delta_nnz: int       # stored positions of the similarity change (M_S)
    lambda1: float       # signed largest-magnitude tracked eigenvalue
    n_support: int = 0   # rows of the perturbation operator (N_L)
    nabla_entries: int = 0
    matvecs: int = 0
    loss_entry_visits: int = 0
    monitor_seconds: float = 0.0
    restart_seconds: float = 0.0


@dataclass
class RunRecord:
    policy: str
    rows: list[SliceRow] = field(default_factory=list)
    initial_loss: float = 0.0
    initial_lambda1: float = 0.0

    @property
    def restarts(self) -> int:
        return sum(r.restarted for r in self.rows)

    def restart_slices(self) -> list[int]:
        return [r.t for r in self.rows if r.restarted]

    def monitoring_cost(self) -> int:
        """Instrumented work units: matvec entry reads plus loss-update entry visits."""
        return sum(r.matvecs * r.nabla_entries + r.loss_entry_visits for r in self.rows)

    def restart_intervals(self) -> list[dict]:
        """Between consecutive restarts: edges changed, slices elapsed, loss change."""
        out = []
        prev_t, prev_loss, edges = 0, self.initial_loss, 0
        for r in self.rows:
            edges += r.edges
            if r.restarted:
                out.append({"t": r.t, "edges": edges, "slices": r.t - prev_t,
                            "loss_change": r.loss - prev_loss})
                prev_t, prev_loss, edges = r.t, r.loss_after, 0
        return out


@dataclass
class RunResult:
    factors: list
    record: RunRecord


class RestartFailure(RuntimeError):
    def __init__(self, t: int, cause: Exception):
        super().__init__(f"decomposition failed at slice {t}: {cause}")
        self.t = t
        self.cause = cause


class ReplayCache:
    """Memo of per-slice results keyed by ``(last restart, slice)``.

    The state at slice ``t`` is a deterministic function of the last restart
    slice for a fixed ``(A_0, stream, similarity, k, updater, tol)``, so runs
    of different policies or thresholds over the same setup can share it.
    Never share one cache between different setups.
    """

    def __init__(self):
        self.decomps: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.steps: dict[tuple[int, int], tuple] = {}


def _lambda1(f: SpectralFactors) -> float:
    if f.k == 0:
        return 0.0
    i = int(np.argmax(f.sigma))
    return float(f.signed_values()[i])


def run(
    a0: SymSparseMatrix,
    stream: SliceStream,
    sim: SimilarityFn,
    k: int,
    policy: RestartPolicy,
    updater=Hold(),
    *,
    tol: float = 1e-10,
    track_bound: bool = True,
    keep_factors: bool = True,
    cache: ReplayCache | None = None,
) -> RunResult:
    """Monitor a stream slice by slice and restart when ``policy`` fires.

    Returns the factors in force after every slice (index 0 is the initial
    decomposition) and the per-slice record. ``track_bound=False`` skips the
    bound for policies that do not read it. ``keep_factors=False`` keeps only
    the final factors.
    """
    for t, d in enumerate(stream.slices, start=1):
        if d.n != a0.n:
            raise ValueError(f"slice {t} has dimension {d.n}, expected {a0.n}")
    if not 1 <= k <= a0.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={a0.n}")
    if isinstance(policy, Timers):
        track_bound = True

    a = a0.copy()
    s = sim.apply(a)

    def decompose(t: int) -> tuple[SpectralFactors, MonitorState, float]:
        t0 = time.perf_counter()
        hit = cache.decomps.get(t) if cache is not None else None
        if hit is None:
            try:
                hit = topk_eigs(s, k, tol=tol)
            except EigenSolverError as exc:
                raise RestartFailure(t, exc) from exc
            if cache is not None:
                cache.decomps[t] = hit
        values, vectors = hit
        f = SpectralFactors.from_eigs(values, vectors)
        st = MonitorState.at_restart(s, values, t, initial_loss=initial_loss)
        return f, st, time.perf_counter() - t0

    initial_loss = None
    f, state, _ = decompose(0)
    initial_loss = state.current_loss
    state.initial_loss = initial_loss
    record = RunRecord(policy=policy.name, initial_loss=initial_loss, initial_lambda1=_lambda1(f))
    factors = [f] if keep_factors else []
    edges_since = 0

    for t, da in enumerate(stream.slices, start=1):
        t_mon = time.perf_counter()
        ds = sim.delta(a, da, s)
        a.apply(da)
        key = (state.t_prime, t)
        hit = cache.steps.get(key) if cache is not None else None
        if hit is not None and (not track_bound or not math.isnan(hit[1])):
            J, B, f_next, stats = hit
            s.apply(ds)
            state.absorb(ds)
            state.current_loss = J
            state.current_bound = B if track_bound else math.nan
            state.gram_u = state.gram_v = None
            f = f_next
        else:
            visits0 = state.entry_visits
            f_next, changed = updater.update(f, s, ds)
            loss_update_delta(state, f, s, ds)
            s.apply(ds)
            if f_next is not f:
                loss_update_rows(state, f, f_next, changed, s)
            f = f_next
            state.absorb(ds)
            if track_bound:
                lower_bound(state, k, tol)
                stats = dict(state.stats)
            else:
                state.current_bound = math.nan
                stats = {}
            stats["loss_entry_visits"] = state.entry_visits - visits0
            if cache is not None:
                cache.steps[key] = (state.current_loss, state.current_bound, f, stats)
        J, B = state.current_loss, state.current_bound
        edges_since += da.num_edges
        fire = decide(policy, state, t, edges_since)
        monitor_seconds = time.perf_counter() - t_mon

        margin = math.nan if math.isnan(B) else (math.inf if B <= 0 else (J - B) / B)
        restart_seconds = 0.0
        if fire:
            f, state, restart_seconds = decompose(t)
            edges_since = 0
        record.rows.append(SliceRow(
            t=t, restarted=fire, loss=J, bound=B, margin=margin,
            loss_after=state.current_loss, edges=da.num_edges, delta_nnz=ds.nnz,
            lambda1=_lambda1(f),
            n_support=stats.get("n_support", 0),
            nabla_entries=stats.get("entries_per_matvec", 0),
            matvecs=stats.get("matvecs", 0),
            loss_entry_visits=stats.get("loss_entry_visits", 0),
            monitor_seconds=monitor_seconds, restart_seconds=restart_seconds,
        ))
        if keep_factors:
            factors.append(f)
    if not keep_factors:
        factors = [f]
    return RunResult(factors=factors, record=record)
