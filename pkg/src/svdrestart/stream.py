"""Edge events, time slicing and synthetic dynamic-network generators.

Edge-list format (one event per line, whitespace separated)::

    u v [w] [ts]

``#`` starts a comment line. ``w`` defaults to 1 and ``ts`` to the physical
line number (1-based). Node ids are non-negative integers.

All generators draw from ``numpy.random.Philox`` keyed by the 64-bit seed, a
counter-based generator whose stream is fixed by its published algorithm, so
fixtures are reproducible across platforms and numpy versions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import DeltaMatrix, SymSparseMatrix

__all__ = [
    "EdgeEvent",
    "SliceStream",
    "SyntheticSpec",
    "EQUAL_EDGES",
    "EQUAL_TIME",
    "events_to_matrix",
    "generate",
    "generate_events",
    "load_events",
    "make_rng",
    "slice_events",
    "split_static_count",
    "split_static_evolving",
    "write_events",
]

EQUAL_EDGES = "equal_edges"
EQUAL_TIME = "equal_time"


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class EdgeEvent:
    u: int
    v: int
    w: float = 1.0
    ts: float = 0.0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


# ---------------------------------------------------------------------------
# file IO


def _number(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def load_events(path) -> list[EdgeEvent]:
    events: list[EdgeEvent] = []
    last_ts = None
    warned = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2 or len(parts) > 4:
                raise EdgeListError(f"expected 'u v [w] [ts]', got {line!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) > 2 else 1.0
                ts = _number(parts[3]) if len(parts) > 3 else lineno
            except ValueError as exc:
                raise EdgeListError(str(exc), lineno) from None
            if u < 0 or v < 0:
                raise EdgeListError("node ids must be non-negative", lineno)
            if w == 0:
                raise EdgeListError("zero weight", lineno)
            if last_ts is not None and ts < last_ts and not warned:
                warnings.warn(f"{path}: timestamps not monotone at line {lineno}; file order kept")
                warned = True
            last_ts = ts
            events.append(EdgeEvent(u, v, w, ts))
    return events


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) or float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def write_events(path, events: Iterable[EdgeEvent], header: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for e in events:
            fh.write(f"{e.u} {e.v} {_fmt(e.w)} {_fmt(e.ts)}\n")


# ---------------------------------------------------------------------------
# slicing


def num_nodes(events: Iterable[EdgeEvent]) -> int:
    return max((max(e.u, e.v) for e in events), default=-1) + 1


def events_to_matrix(events: Iterable[EdgeEvent], n: int, cls=SymSparseMatrix):
    m = cls(n)
    for e in events:
        m.add(e.u, e.v, e.w)
    return m


def split_static_count(events: Sequence[EdgeEvent], count: int, n: int):
    a0 = events_to_matrix(events[:count], n)
    return a0, list(events[count:])


def split_static_evolving(events: Sequence[EdgeEvent], static_fraction: float, n: int | None = None):
    """Earliest ``ceil(fraction * count)`` events form ``A_0``; the rest evolve.

    At least one event is always left to evolve.
    """
    if not 0 < static_fraction < 1:
        raise ValueError("static_fraction must lie in (0, 1)")
    if n is None:
        n = num_nodes(events)
    count = min(math.ceil(static_fraction * len(events)), max(len(events) - 1, 0))
    return split_static_count(events, count, n)


@dataclass
class SliceStream:
    slices: list[DeltaMatrix]
    slicing_mode: str = EQUAL_EDGES
    event_counts: list[int] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.slices)

    @property
    def n(self) -> int:
        return self.slices[0].n if self.slices else 0

    def edge_counts(self) -> list[int]:
        """Changed unordered positions per slice (after coalescing)."""
        return [d.num_edges for d in self.slices]

    def total(self) -> DeltaMatrix:
        out = DeltaMatrix(self.n)
        for d in self.slices:
            out.apply(d)
        return out


def slice_events(events: Sequence[EdgeEvent], T: int, mode: str = EQUAL_EDGES,
                 n: int | None = None, time_range: tuple[float, float] | None = None) -> SliceStream:
    """Cut ordered events into ``T`` slices; events on one position coalesce additively.

    In ``equal_time`` mode the interval defaults to the observed timestamp
    range; ``time_range`` pins it so leading or trailing empty slices survive.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if n is None:
        n = num_nodes(events)
    buckets: list[list[EdgeEvent]] = [[] for _ in range(T)]
    if mode == EQUAL_EDGES:
        size = max(math.ceil(len(events) / T), 1)
        for idx, e in enumerate(events):
            buckets[idx // size].append(e)
    elif mode == EQUAL_TIME:
        if events:
            if time_range is None:
                lo = min(e.ts for e in events)
                hi = max(e.ts for e in events)
            else:
                lo, hi = time_range
                if any(not lo <= e.ts <= hi for e in events):
                    raise ValueError(f"timestamps fall outside the range [{lo}, {hi}]")
            span = hi - lo
            for e in events:
                b = 0 if span == 0 else min(int((e.ts - lo) * T / span), T - 1)
                buckets[b].append(e)
    else:
        raise ValueError(f"unknown slicing mode {mode!r}")
    slices = [events_to_matrix(b, n, DeltaMatrix) for b in buckets]
    return SliceStream(slices, mode, [len(b) for b in buckets])


# ---------------------------------------------------------------------------
# synthetic generators


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic dynamic network.

    ``variant`` is ``random``, ``celebrity`` or ``community``. The base graph
    draws ``m_static + m_evolve`` distinct uniform pairs. ``celebrity`` adds, in
    ``trigger_slice``, edges from ``ceil(attach_fraction * n)`` uniformly drawn
    non-neighbours to one node. ``community`` splits ``ceil(node_fraction * n)``
    nodes into ``num_communities`` groups and adds each absent intra-group pair
    with probability ``intra_prob``. ``num_events`` repeats the injection at
    that many distinct slices. A ``None`` trigger slice or celebrity node is
    drawn from the seed; both only apply to the first event.
    """

    variant: str = "random"
    n: int = 100
    m_static: int = 200
    m_evolve: int = 300
    seed: int = 0
    trigger_slice: int | None = None
    celebrity_node: int | None = None
    attach_fraction: float = 0.3
    node_fraction: float = 0.3
    num_communities: int = 5
    intra_prob: float = 0.2
    num_events: int = 1

    def validate(self, T: int) -> None:
        if self.variant not in ("random", "celebrity", "community"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n < 2 or self.m_static < 0 or self.m_evolve < 0:
            raise ValueError("need n >= 2 and non-negative edge counts")
        if self.m_static + self.m_evolve > self.n * (self.n - 1) // 2:
            raise ValueError(
                f"infeasible: {self.m_static + self.m_evolve} edges on {self.n} nodes")
        for name in ("attach_fraction", "node_fraction"):
            x = getattr(self, name)
            if not 0 < x <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0 <= self.intra_prob <= 1:
            raise ValueError("intra_prob must lie in [0, 1]")
        if self.num_communities < 1:
            raise ValueError("num_communities must be positive")
        if not 1 <= self.num_events <= T:
            raise ValueError(f"num_events must lie in [1, {T}]")
        if self.trigger_slice is not None and not 1 <= self.trigger_slice <= T:
            raise ValueError(f"trigger_slice must lie in [1, {T}]")
        if self.celebrity_node is not None and not 0 <= self.celebrity_node < self.n:
            raise ValueError("celebrity_node out of range")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)


def _sample_pairs(rng: np.random.Generator, n: int, count: int, taken: set) -> list[tuple[int, int]]:
    out = []
    while len(out) < count:
        need = count - len(out)
        cand = rng.integers(0, n, size=(max(2 * need, 16), 2))
        for a, b in cand.tolist():
            if a == b:
                continue
            key = (a, b) if a < b else (b, a)
            if key in taken:
                continue
            taken.add(key)
            out.append(key)
            if len(out) == count:
                break
    return out


def generate_events(spec: SyntheticSpec, T: int) -> tuple[list[EdgeEvent], list[EdgeEvent]]:
    """Static events (ts 0) and evolving events (ts = slice index 1..T), in order."""
    spec.validate(T)
    rng = make_rng(spec.seed)
    taken: set = set()
    pairs = _sample_pairs(rng, spec.n, spec.m_static + spec.m_evolve, taken)
    static = [EdgeEvent(a, b, 1.0, 0) for a, b in pairs[: spec.m_static]]
    base = pairs[spec.m_static:]
    size = max(math.ceil(len(base) / T), 1)
    per_slice: list[list[tuple[int, int]]] = [[] for _ in range(T)]
    for idx, p in enumerate(base):
        per_slice[idx // size].append(p)

    if spec.variant != "random":
        triggers = (rng.permutation(T)[: spec.num_events] + 1).tolist()
        if spec.trigger_slice is not None:
            if spec.trigger_slice in triggers:
                triggers.remove(spec.trigger_slice)
            else:
                triggers.pop()
            triggers.insert(0, spec.trigger_slice)
        for e, trigger in enumerate(triggers):
            if spec.variant == "celebrity":
                node = spec.celebrity_node if e == 0 else None
                extra = _celebrity_burst(rng, spec, taken, node)
            else:
                extra = _community_burst(rng, spec, taken)
            per_slice[trigger - 1].extend(extra)

    evolving = [EdgeEvent(a, b, 1.0, t + 1) for t, ps in enumerate(per_slice) for a, b in ps]
    return static, evolving


def _celebrity_burst(rng, spec: SyntheticSpec, taken: set, node: int | None) -> list[tuple[int, int]]:
    c = node if node is not None else int(rng.integers(0, spec.n))
    count = math.ceil(spec.attach_fraction * spec.n)
    free = np.asarray([x for x in range(spec.n)
                       if x != c and (min(x, c), max(x, c)) not in taken], dtype=np.int64)
    if count > free.size:
        raise ValueError(f"celebrity needs {count} new neighbours, only {free.size} available")
    chosen = rng.choice(free, size=count, replace=False)
    out = []
    for x in chosen.tolist():
        key = (min(x, c), max(x, c))
        taken.add(key)
        out.append(key)
    return out


def _community_burst(rng, spec: SyntheticSpec, taken: set) -> list[tuple[int, int]]:
    size = math.ceil(spec.node_fraction * spec.n)
    members = rng.permutation(spec.n)[:size]
    groups = np.array_split(members, spec.num_communities)
    out = []
    for g in groups:
        g = np.sort(g).tolist()
        for a_idx in range(len(g)):
            for b_idx in range(a_idx + 1, len(g)):
                key = (g[a_idx], g[b_idx])
                # one draw per pair keeps the stream independent of `taken`
                hit = rng.random() < spec.intra_prob
                if hit and key not in taken:
                    taken.add(key)
                    out.append(key)
    return out


def generate(spec: SyntheticSpec, T: int) -> tuple[SymSparseMatrix, SliceStream]:
    static, evolving = generate_events(spec, T)
    a0 = events_to_matrix(static, spec.n)
    buckets: list[list[EdgeEvent]] = [[] for _ in range(T)]
    for e in evolving:
        buckets[int(e.ts) - 1].append(e)
    slices = [events_to_matrix(b, spec.n, DeltaMatrix) for b in buckets]
    return a0, SliceStream(slices, EQUAL_TIME, [len(b) for b in buckets])
