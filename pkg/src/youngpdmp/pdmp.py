"""Exact event-driven simulation of the tableau particle process.

Heights grow deterministically (velocity ``y(y+1)``, or ``y`` in Plancherel
mode) until they reach the level ``r`` and leave the support.  Every cell
also carries a Poisson process of points ``(t, x)`` in the strip
``0 < x < r`` with intensity ``q(cell)``; a point whose ordinate falls in
the window ``h_down(cell) < x < height(cell)`` makes the height drop to
``x``.

Each supported cell is stored through an *anchor*: the value and time of
its last jump.  Its current height is ``flow(anchor_y, t - anchor_t)``, so
heights never accumulate per-step rounding and replaying an event log
reproduces the final state bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .params import Parameters
from .partitions import YoungDiagram, as_diagram
from .tableau_state import HeightState, InvalidStateError

FULL = "full"
PLANCHEREL = "plancherel"
MODES = (FULL, PLANCHEREL)
JUMP = "jump"
ABSORB = "absorb"
DEFAULT_EVENT_CAP = 10**6
WORKERS_ENV = "YOUNGPDMP_WORKERS"


class ExplosionError(RuntimeError):
    """A replica exceeded its event cap before the horizon."""

    def __init__(self, message, n_events=None, clock=None):
        super().__init__(message)
        self.n_events = n_events
        self.clock = clock


class Event(NamedTuple):
    """One logged transition.

    For a jump, ``from_`` is the height just before the drop (``r`` when
    the cell enters the support).  For an absorption, ``from_`` is the
    height at the cell's last anchor, so that
    ``t == anchor_t + hitting_time(from_, r)``; ``to`` is then ``r``.
    """

    t: float
    i: int
    j: int
    kind: str
    from_: float
    to: float

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "i": self.i, "j": self.j, "kind": self.kind,
                           "from": self.from_, "to": self.to}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Event":
        d = json.loads(text)
        return cls(float(d["t"]), int(d["i"]), int(d["j"]), d["kind"], float(d["from"]), float(d["to"]))


def flow(y: float, t: float, mode: str = FULL, r: float = math.inf) -> float:
    """Deterministic height after time ``t`` starting from ``y``, capped at ``r``."""
    if y <= 0.0:
        return 0.0
    if y >= r:
        return r
    if t >= hitting_time(y, r, mode):
        return r
    if mode == FULL:
        u = y * math.exp(t)
        value = u / ((y + 1.0) - u)
    elif mode == PLANCHEREL:
        value = y * math.exp(t)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if value >= r:
        value = math.nextafter(r, 0.0)
    return value


def hitting_time(y: float, b: float, mode: str = FULL) -> float:
    """Time for the flow to carry ``y`` up to ``b`` (log form, no overflow)."""
    if not y > 0.0:
        raise ValueError(f"no finite hitting time from y={y}")
    if b == math.inf:
        return math.log1p(1.0 / y) if mode == FULL else math.inf
    if b < y:
        raise ValueError(f"target {b} below start {y}")
    if mode == FULL:
        return max(0.0, math.log(b) - math.log(y) + math.log1p(y) - math.log1p(b))
    if mode == PLANCHEREL:
        return max(0.0, math.log(b) - math.log(y))
    raise ValueError(f"unknown mode {mode!r}")


def _live_height(y: float, dt: float, mode: str, r: float) -> float:
    # a supported cell stays strictly below r until its absorption event
    value = flow(y, dt, mode, r)
    return value if value < r else math.nextafter(r, 0.0)


def parse_subdiagram(value) -> Optional[YoungDiagram]:
    """``None``, ``"single"``, ``"row:k"``, a JSON row list, or a diagram."""
    if value is None or isinstance(value, YoungDiagram):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text == "single":
            return YoungDiagram((1,))
        if text.startswith("row:"):
            return YoungDiagram((int(text[4:]),))
        return YoungDiagram(tuple(json.loads(text)))
    return as_diagram(value)


@dataclass(frozen=True)
class SimConfig:
    params: Parameters
    mode: str = FULL
    subdiagram: Optional[YoungDiagram] = None
    horizon: float = 1.0
    seed: int = 0
    event_cap: int = DEFAULT_EVENT_CAP

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "subdiagram", parse_subdiagram(self.subdiagram))
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")

    @property
    def r(self) -> float:
        return float(self.params.r)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Stream for replica ``k``: ``SeedSequence(seed, spawn_key=(k,))``.

    This is the same stream as ``SeedSequence(seed).spawn(k + 1)[k]``.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


class Engine:
    """Mutable simulation state for one replica."""

    def __init__(self, cfg: SimConfig, initial: Optional[HeightState], rng, clock: float = 0.0):
        self.cfg = cfg
        self.r = cfg.r
        self.mode = cfg.mode
        self.rng = rng
        self.clock = clock
        self.n_events = 0
        self.n_candidates = 0
        if initial is None:
            initial = HeightState.empty(self.r)
        if initial.r != self.r:
            raise InvalidStateError(f"initial state has level {initial.r}, config has {self.r}")
        initial.validate()
        sub = cfg.subdiagram
        if sub is not None and any(c not in sub for c, _ in initial.items()):
            raise InvalidStateError("initial support is not contained in the subdiagram")
        self._sub_rows = None if sub is None else sub.rows
        # per supported cell: anchor value, anchor time, absorption time
        self.ys = [list(row) for row in initial.rows]
        self.ts = [[clock] * len(row) for row in initial.rows]
        self.abs_t = [[clock + hitting_time(y, self.r, self.mode) for y in row] for row in initial.rows]
        self._refresh_active()

    # -- geometry ---------------------------------------------------------
    def _in_sub(self, i, j) -> bool:
        sub = self._sub_rows
        return sub is None or (i <= len(sub) and j <= sub[i - 1])

    def _refresh_active(self):
        cells = []
        rows = self.ys
        for i, row in enumerate(rows, start=1):
            for j in range(1, len(row) + 1):
                cells.append((i, j))
        n_rows = len(rows)
        for i in range(1, n_rows + 1):
            length = len(rows[i - 1])
            if i == 1 or len(rows[i - 2]) > length:
                cells.append((i, length + 1))
        cells.append((n_rows + 1, 1))
        cells = [c for c in cells if self._in_sub(*c)]
        if self.mode == PLANCHEREL:
            rates = [self.r] * len(cells)
        else:
            q = self.cfg.params.q
            rates = [float(q(j - i)) * self.r for i, j in cells]
        cum = []
        total = 0.0
        for rate in rates:
            total += rate
            cum.append(total)
        self.active = cells
        self.cum_rates = cum
        self.total_rate = total
        self._next_abs = self._find_next_absorption()

    def _find_next_absorption(self):
        best = (math.inf, 0, 0)
        for i, row in enumerate(self.abs_t, start=1):
            for j, t in enumerate(row, start=1):
                if t < best[0]:
                    best = (t, i, j)
        return best

    # -- heights ----------------------------------------------------------
    def height(self, i, j, t) -> float:
        rows = self.ys
        if i <= len(rows) and j <= len(rows[i - 1]):
            return _live_height(rows[i - 1][j - 1], t - self.ts[i - 1][j - 1], self.mode, self.r)
        return self.r

    def h_down(self, i, j, t) -> float:
        if i == 1:
            return 0.0 if j == 1 else self.height(1, j - 1, t)
        if j == 1:
            return self.height(i - 1, 1, t)
        return max(self.height(i - 1, j, t), self.height(i, j - 1, t))

    def state(self, t: Optional[float] = None) -> HeightState:
        t = self.clock if t is None else t
        rows = tuple(tuple(_live_height(y, t - t0, self.mode, self.r) for y, t0 in zip(ys, ts))
                     for ys, ts in zip(self.ys, self.ts))
        return HeightState(self.r, rows)

    # -- dynamics ---------------------------------------------------------
    def step(self, horizon: float):
        """Advance to the next event, rejection, or ``horizon``.

        Returns ``(event, done)``; ``event`` is ``None`` for a rejected
        Poisson point and when the horizon is reached (``done`` true).
        """
        if self.total_rate > 0.0:
            t_cand = self.clock + self.rng.standard_exponential() / self.total_rate
        else:
            t_cand = math.inf
        t_abs, ai, aj = self._next_abs
        if t_abs <= t_cand and t_abs <= horizon:
            return self._absorb(t_abs, ai, aj), False
        if t_cand >= horizon:
            self.clock = horizon
            return None, True
        self.clock = t_cand
        self.n_candidates += 1
        u = self.rng.random() * self.total_rate
        cum = self.cum_rates
        k = 0
        last = len(cum) - 1
        while k < last and cum[k] <= u:
            k += 1
        i, j = self.active[k]
        x = self.rng.random() * self.r
        h = self.height(i, j, t_cand)
        if not (self.h_down(i, j, t_cand) < x < h):
            return None, False
        return self._jump(t_cand, i, j, h, x), False

    def _count(self):
        self.n_events += 1
        if self.n_events > self.cfg.event_cap:
            raise ExplosionError(
                f"event cap {self.cfg.event_cap} exceeded at t={self.clock}",
                n_events=self.n_events, clock=self.clock)

    def _absorb(self, t, i, j) -> Event:
        self.clock = t
        y0 = self.ys[i - 1].pop()
        self.ts[i - 1].pop()
        self.abs_t[i - 1].pop()
        if not self.ys[i - 1]:
            self.ys.pop()
            self.ts.pop()
            self.abs_t.pop()
        self._refresh_active()
        self._count()
        return Event(t, i, j, ABSORB, y0, self.r)

    def _jump(self, t, i, j, h, x) -> Event:
        absorb_at = t + hitting_time(x, self.r, self.mode)
        if not (i <= len(self.ys) and j <= len(self.ys[i - 1])):
            if i > len(self.ys):
                self.ys.append([])
                self.ts.append([])
                self.abs_t.append([])
            self.ys[i - 1].append(x)
            self.ts[i - 1].append(t)
            self.abs_t[i - 1].append(absorb_at)
            self._refresh_active()
        else:
            self.ys[i - 1][j - 1] = x
            self.ts[i - 1][j - 1] = t
            self.abs_t[i - 1][j - 1] = absorb_at
            if (i, j) == self._next_abs[1:]:
                self._next_abs = self._find_next_absorption()
        self._count()
        return Event(t, i, j, JUMP, h, x)


def step(state: HeightState, clock: float, cfg: SimConfig, rng):
    """One step from ``state`` at ``clock``: ``(state', clock', event or None)``."""
    engine = Engine(cfg, state, rng, clock)
    event, _ = engine.step(cfg.horizon)
    return engine.state(), engine.clock, event


@dataclass
class Trajectory:
    final: HeightState
    events: list = field(default_factory=list)
    n_events: int = 0
    n_candidates: int = 0
    initial: Optional[HeightState] = None

    def __iter__(self):
        yield self.final
        yield self.events


def run(cfg: SimConfig, initial: Optional[HeightState] = None, replica: int = 0,
        log_events: bool = True, rng=None) -> Trajectory:
    """Simulate up to ``cfg.horizon``; deterministic in ``(cfg.seed, replica, initial)``."""
    if rng is None:
        rng = replica_rng(cfg.seed, replica)
    engine = Engine(cfg, initial, rng)
    events = []
    horizon = cfg.horizon
    done = horizon <= 0.0
    while not done:
        event, done = engine.step(horizon)
        if event is not None and log_events:
            events.append(event)
    return Trajectory(engine.state(horizon), events, engine.n_events, engine.n_candidates,
                      initial if initial is not None else HeightState.empty(cfg.r))


def replay(initial: HeightState, events: Iterable[Event], horizon: float,
           mode: str = FULL) -> HeightState:
    """Rebuild the state at ``horizon`` from an event log."""
    r = initial.r
    ys = [list(row) for row in initial.rows]
    ts = [[0.0] * len(row) for row in initial.rows]
    for ev in events:
        i, j = ev.i, ev.j
        if ev.kind == ABSORB:
            if not (i <= len(ys) and len(ys[i - 1]) == j):
                raise InvalidStateError(f"absorption of a non-corner cell {(i, j)}")
            ys[i - 1].pop()
            ts[i - 1].pop()
            if not ys[i - 1]:
                ys.pop()
                ts.pop()
        elif i <= len(ys) and j <= len(ys[i - 1]):
            ys[i - 1][j - 1] = ev.to
            ts[i - 1][j - 1] = ev.t
        else:
            if i > len(ys):
                ys.append([])
                ts.append([])
            ys[i - 1].append(ev.to)
            ts[i - 1].append(ev.t)
    rows = tuple(tuple(_live_height(y, horizon - t0, mode, r) for y, t0 in zip(yr, tr))
                 for yr, tr in zip(ys, ts))
    return HeightState(r, rows)


def shape_path(initial_shape, events: Iterable[Event], r: float):
    """Piecewise-constant shape trajectory as ``[(t, rows), ...]``."""
    rows = list(as_diagram(initial_shape).rows)
    path = [(0.0, tuple(rows))]
    for ev in events:
        if ev.kind == ABSORB:
            rows[ev.i - 1] -= 1
            if rows[ev.i - 1] == 0:
                rows.pop()
        elif ev.from_ == r:
            if ev.i > len(rows):
                rows.append(1)
            else:
                rows[ev.i - 1] += 1
        else:
            continue
        path.append((ev.t, tuple(rows)))
    return path


def occupation(initial_shape, events: Iterable[Event], r: float, t0: float, t1: float) -> dict:
    """Time spent in each shape during ``[t0, t1]``, keyed by row tuples."""
    path = shape_path(initial_shape, events, r)
    out: dict = {}
    for k, (start, rows) in enumerate(path):
        end = path[k + 1][0] if k + 1 < len(path) else math.inf
        lo, hi = max(start, t0), min(end, t1)
        if hi > lo:
            out[rows] = out.get(rows, 0.0) + (hi - lo)
    return out


# -- ensembles ---------------------------------------------------------------

@dataclass
class ReplicaResult:
    index: int
    initial: HeightState
    final: HeightState
    n_events: int
    n_candidates: int
    events: Optional[list] = None


def _run_chunk(cfg: SimConfig, indices: Sequence[int], initial, log_events: bool):
    out = []
    for k in indices:
        rng = replica_rng(cfg.seed, k)
        start = initial(rng) if callable(initial) else initial
        traj = run(cfg, start, log_events=log_events, rng=rng)
        out.append(ReplicaResult(k, traj.initial, traj.final, traj.n_events,
                                 traj.n_candidates, traj.events if log_events else None))
    return out


def worker_count(requested: Optional[int] = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_ensemble(cfg: SimConfig, replicas: int, initial=None, log_events: bool = False,
                 workers: Optional[int] = None) -> list[ReplicaResult]:
    """Run replicas ``0..replicas-1``; results are ordered by replica index.

    ``initial`` is a fixed state, ``None`` (empty), or a picklable callable
    drawing the start from the replica's own generator before the run.
    """
    n_workers = min(worker_count(workers), max(1, replicas))
    if n_workers == 1:
        return _run_chunk(cfg, range(replicas), initial, log_events)
    chunk = max(1, -(-replicas // (4 * n_workers)))
    batches = [range(a, min(a + chunk, replicas)) for a in range(0, replicas, chunk)]
    results: list[ReplicaResult] = []
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_run_chunk, cfg, b, initial, log_events) for b in batches]
        for fut in futures:
            results.extend(fut.result())
    results.sort(key=lambda res: res.index)
    return results
