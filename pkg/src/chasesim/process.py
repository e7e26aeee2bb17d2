"""Continuous-time simulation of chase-escape with conversion.

Three site states evolve on a finite graph: red spreads to adjacent white
sites at rate ``lam`` per directed (red, white) adjacency, blue overtakes
adjacent red sites at rate 1, and every red site spontaneously converts to
blue at rate ``alpha``. The module provides a fast aggregate-rate engine
(class-then-member event selection over incrementally maintained adjacency
counts, compiled with numba) and a deliberately simple per-clock reference
engine that redraws every active exponential clock after each event. Both
are exact samplers of the same process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .graphs import Graph, _from_edges

# site state codes, also the snapshot codes
WHITE = 0
RED = 1
BLUE_PRED = 2  # turned blue by a blue neighbor
BLUE_CONV = 3  # turned blue by spontaneous conversion

STATE_NAMES = {WHITE: "white", RED: "red",
               BLUE_PRED: "blue-by-predation", BLUE_CONV: "blue-by-conversion"}

# initial-configuration variants
STANDARD_ROOT = "standard-root"
BAND = "band"
CLASSICAL_BLUE_NEIGHBOR = "classical-blue-neighbor"

INIT_SPECS = (STANDARD_ROOT, BAND, CLASSICAL_BLUE_NEIGHBOR)

# run status values
FIXATED = "fixated"
ESCAPED = "escaped"
TRUNCATION_HIT = "truncation-hit"
STEP_LIMIT_HIT = "step-limit-hit"

_STATUS_BY_CODE = (FIXATED, ESCAPED, TRUNCATION_HIT, STEP_LIMIT_HIT)

RED_SPREAD = "red-spread"
BLUE_SPREAD = "blue-spread"
CONVERT = "convert"


class ParamError(ValueError):
    pass


class NonPositiveLambda(ParamError):
    pass


class NegativeAlpha(ParamError):
    pass


class NonFinite(ParamError):
    pass


class BandOnNonTorus(ValueError):
    pass


class NoActiveEvents(RuntimeError):
    pass


@dataclass(frozen=True)
class ProcessParams:
    """Rate pair (lam, alpha); the blue spreading rate is fixed at 1."""

    lam: float
    alpha: float

    def __post_init__(self):
        lam, alpha = float(self.lam), float(self.alpha)
        if not (math.isfinite(lam) and math.isfinite(alpha)):
            raise NonFinite(f"rates must be finite, got lam={lam} alpha={alpha}")
        if lam <= 0:
            raise NonPositiveLambda(f"lam must be > 0, got {lam}")
        if alpha < 0:
            raise NegativeAlpha(f"alpha must be >= 0, got {alpha}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)


def validate_params(lam, alpha) -> ProcessParams:
    return ProcessParams(lam, alpha)


@dataclass(frozen=True)
class RunLimits:
    """Optional stopping rules layered on top of fixation.

    A run stops with status ``truncation-hit`` the moment a vertex in
    ``boundary_set`` turns red (finite truncations of infinite graphs),
    with ``escaped`` when a vertex in ``target_set`` turns red, and with
    ``step-limit-hit`` after ``max_events`` events. Target beats boundary
    when a vertex is in both.
    """

    max_events: int | None = None
    boundary_set: frozenset | None = None
    target_set: frozenset | None = None


@dataclass(frozen=True)
class EventRecord:
    kind: str  # red-spread | blue-spread | convert
    source: int
    target: int | None
    time: float


@dataclass(frozen=True)
class RunOutcome:
    damage: int
    status: str
    fixation_time: float | None
    n_conversions: int
    n_predations: int
    n_red_spreads: int
    seed: object = None


class _IndexedSet:
    """Dense-int set with O(1) add/remove/uniform-sample (swap-remove)."""

    __slots__ = ("items", "pos", "size")

    def __init__(self, capacity: int):
        self.items = np.empty(capacity, dtype=np.int64)
        self.pos = np.full(capacity, -1, dtype=np.int64)
        self.size = 0

    def add(self, x: int):
        self.items[self.size] = x
        self.pos[x] = self.size
        self.size += 1

    def bulk_load(self, xs: np.ndarray):
        k = xs.shape[0]
        self.items[:k] = xs
        self.pos[xs] = np.arange(k)
        self.size = int(k)

    def remove(self, x: int):
        i = self.pos[x]
        last = self.items[self.size - 1]
        self.items[i] = last
        self.pos[last] = i
        self.pos[x] = -1
        self.size -= 1

    def pick(self, rng) -> int:
        return int(self.items[int(rng.integers(0, self.size))])

    def __len__(self):
        return self.size

    def __contains__(self, x):
        return self.pos[x] >= 0

    def sorted_items(self) -> list:
        return sorted(int(v) for v in self.items[: self.size])


class Configuration:
    """Mutable process state: per-site colors plus the three event-class
    structures (directed red->white slots, directed blue->red slots, red
    sites) maintained incrementally so every event costs O(degree)."""

    def __init__(self, graph: Graph, states: np.ndarray):
        if states.shape != (graph.n,):
            raise ValueError("states length must equal vertex count")
        self.graph = graph
        self.states = states.astype(np.int8)
        self.clock = 0.0
        self.n_conversions = 0
        self.n_predations = 0
        self.n_red_spreads = 0
        self.n_events = 0
        src, rev = graph.directed_arrays()
        self._src = src
        self._rev = rev
        n_slots = src.shape[0]
        self.red = _IndexedSet(graph.n)
        self.rw = _IndexedSet(n_slots)
        self.br = _IndexedSet(n_slots)
        # canonical order within each set: ascending ids / slot indices
        self.red.bulk_load(np.flatnonzero(self.states == RED))
        a, b = self.states[src], self.states[graph.indices]
        self.rw.bulk_load(np.flatnonzero((a == RED) & (b == WHITE)))
        self.br.bulk_load(np.flatnonzero((a >= BLUE_PRED) & (b == RED)))
        self.n_initial_red = len(self.red)

    @property
    def rw_count(self) -> int:
        return len(self.rw)

    @property
    def br_count(self) -> int:
        return len(self.br)

    @property
    def red_count(self) -> int:
        return len(self.red)

    def blue_count(self) -> int:
        return int(np.count_nonzero(self.states >= BLUE_PRED))

    def ever_red_count(self) -> int:
        return self.n_initial_red + self.n_red_spreads

    def total_rate(self, p: ProcessParams) -> float:
        return p.lam * len(self.rw) + float(len(self.br)) + p.alpha * len(self.red)

    def recount(self) -> tuple[int, int, int]:
        """Recompute (rw, br, red) counts by full scan, for consistency checks."""
        a, b = self.states[self._src], self.states[self.graph.indices]
        rw = int(np.count_nonzero((a == RED) & (b == WHITE)))
        br = int(np.count_nonzero((a >= BLUE_PRED) & (b == RED)))
        red = int(np.count_nonzero(self.states == RED))
        return rw, br, red


def _with_blue_neighbor(g: Graph) -> Graph:
    """Copy of g with one extra vertex attached to the root (used by the
    classical chase-escape initial configuration)."""
    edges = list(g.edges())
    edges.append((g.root, g.n))
    return _from_edges(g.n + 1, sorted(edges), family="custom")


def _initial_states(g: Graph, spec: str) -> tuple[Graph, np.ndarray]:
    if spec not in INIT_SPECS:
        raise ValueError(f"unknown init spec {spec!r}; expected one of {INIT_SPECS}")
    if spec == CLASSICAL_BLUE_NEIGHBOR:
        g = _with_blue_neighbor(g)
        states = np.zeros(g.n, dtype=np.int8)
        states[g.root] = RED
        states[g.n - 1] = BLUE_PRED
        return g, states
    states = np.zeros(g.n, dtype=np.int8)
    if spec == STANDARD_ROOT:
        states[g.root] = RED
        return g, states
    # band
    if g.rows is None:
        raise BandOnNonTorus("band initialization needs a row-structured graph")
    if g.rows[0] < 3:
        raise BandOnNonTorus("band initialization needs at least 3 rows")
    states[list(g.row(0))] = BLUE_PRED
    states[list(g.row(1))] = RED
    return g, states


def init_configuration(g: Graph, spec: str = STANDARD_ROOT) -> Configuration:
    """Build the initial configuration for one of the three variants.

    standard-root: root red, everything else white.
    band: bottom row blue, the row above it red, rest white (needs rows).
    classical-blue-neighbor: like standard-root plus an extra blue vertex
    attached to the root, which turns the process into classical
    chase-escape when alpha = 0.
    """
    graph, states = _initial_states(g, spec)
    return Configuration(graph, states)


def _apply_red_spread(cfg: Configuration, e: int):
    """Directed slot e = (u red -> v white); v turns red."""
    g = cfg.graph
    dst = g.indices
    v = int(dst[e])
    states, rev = cfg.states, cfg._rev
    for f in range(int(g.indptr[v]), int(g.indptr[v + 1])):
        w = dst[f]
        sw = states[w]
        if sw == WHITE:
            cfg.rw.add(f)
        elif sw == RED:
            cfg.rw.remove(int(rev[f]))
        else:
            cfg.br.add(int(rev[f]))
    states[v] = RED
    cfg.red.add(v)
    cfg.n_red_spreads += 1
    return v


def _apply_blue(cfg: Configuration, v: int, cause: int):
    """Red vertex v turns blue (cause BLUE_PRED or BLUE_CONV)."""
    g = cfg.graph
    dst = g.indices
    states, rev = cfg.states, cfg._rev
    cfg.red.remove(v)
    for f in range(int(g.indptr[v]), int(g.indptr[v + 1])):
        w = dst[f]
        sw = states[w]
        if sw == WHITE:
            cfg.rw.remove(f)
        elif sw == RED:
            cfg.br.add(f)
        else:
            cfg.br.remove(int(rev[f]))
    states[v] = cause
    if cause == BLUE_PRED:
        cfg.n_predations += 1
    else:
        cfg.n_conversions += 1


def gillespie_step(cfg: Configuration, p: ProcessParams, rng) -> EventRecord:
    """Advance the configuration by one event (aggregate-rate selection).

    Draw order per event is exponential(), random(), integers(), which the
    compiled kernel reproduces exactly; given the same generator state the
    two trajectories agree bit for bit.
    """
    r_rw = p.lam * len(cfg.rw)
    r_br = float(len(cfg.br))
    r_conv = p.alpha * len(cfg.red)
    r_tot = r_rw + r_br + r_conv
    if r_tot <= 0.0:
        raise NoActiveEvents("no active spreading or conversion clocks")
    cfg.clock += rng.exponential() / r_tot
    u = rng.random() * r_tot
    cfg.n_events += 1
    src, dst = cfg._src, cfg.graph.indices
    if u < r_rw:
        e = cfg.rw.pick(rng)
        rec = EventRecord(RED_SPREAD, int(src[e]), int(dst[e]), cfg.clock)
        _apply_red_spread(cfg, e)
    elif u < r_rw + r_br:
        e = cfg.br.pick(rng)
        rec = EventRecord(BLUE_SPREAD, int(src[e]), int(dst[e]), cfg.clock)
        _apply_blue(cfg, int(dst[e]), BLUE_PRED)
    else:
        v = cfg.red.pick(rng)
        rec = EventRecord(CONVERT, v, None, cfg.clock)
        _apply_blue(cfg, v, BLUE_CONV)
    return rec


@njit(cache=True)
def _set_add(items, pos, size, x):
    items[size] = x
    pos[x] = size
    return size + 1


@njit(cache=True)
def _set_remove(items, pos, size, x):
    i = pos[x]
    last = items[size - 1]
    items[i] = last
    pos[last] = i
    pos[x] = -1
    return size - 1


@njit(cache=True)
def _run_kernel(indptr, indices, src, rev, states, lam, alpha, max_events,
                boundary_mask, target_mask, rng):
    n = states.shape[0]
    n_slots = src.shape[0]
    red_items = np.empty(n, np.int64)
    red_pos = np.full(n, -1, np.int64)
    red_size = 0
    rw_items = np.empty(n_slots, np.int64)
    rw_pos = np.full(n_slots, -1, np.int64)
    rw_size = 0
    br_items = np.empty(n_slots, np.int64)
    br_pos = np.full(n_slots, -1, np.int64)
    br_size = 0
    initial_red = 0
    for v in range(n):
        if states[v] == 1:
            red_size = _set_add(red_items, red_pos, red_size, v)
            initial_red += 1
    for e in range(n_slots):
        a = states[src[e]]
        b = states[indices[e]]
        if a == 1 and b == 0:
            rw_size = _set_add(rw_items, rw_pos, rw_size, e)
        elif a >= 2 and b == 1:
            br_size = _set_add(br_items, br_pos, br_size, e)

    clock = 0.0
    events = 0
    n_conv = 0
    n_pred = 0
    n_spread = 0
    status = 3
    while True:
        if red_size == 0:
            status = 0
            break
        r_rw = lam * rw_size
        r_br = float(br_size)
        r_tot = r_rw + r_br + alpha * red_size
        if r_tot <= 0.0:
            status = 3  # alpha = 0 with red everywhere reachable: stuck
            break
        if events >= max_events:
            status = 3
            break
        clock += rng.exponential() / r_tot
        u = rng.random() * r_tot
        events += 1
        if u < r_rw:
            idx = rng.integers(0, rw_size)
            e = rw_items[idx]
            v = indices[e]
            for f in range(indptr[v], indptr[v + 1]):
                sw = states[indices[f]]
                if sw == 0:
                    rw_size = _set_add(rw_items, rw_pos, rw_size, f)
                elif sw == 1:
                    rw_size = _set_remove(rw_items, rw_pos, rw_size, rev[f])
                else:
                    br_size = _set_add(br_items, br_pos, br_size, rev[f])
            states[v] = 1
            red_size = _set_add(red_items, red_pos, red_size, v)
            n_spread += 1
            if target_mask[v]:
                status = 1
                break
            if boundary_mask[v]:
                status = 2
                break
        else:
            if u < r_rw + r_br:
                idx = rng.integers(0, br_size)
                e = br_items[idx]
                v = indices[e]
                cause = 2
                n_pred += 1
            else:
                idx = rng.integers(0, red_size)
                v = red_items[idx]
                cause = 3
                n_conv += 1
            red_size = _set_remove(red_items, red_pos, red_size, v)
            for f in range(indptr[v], indptr[v + 1]):
                sw = states[indices[f]]
                if sw == 0:
                    rw_size = _set_remove(rw_items, rw_pos, rw_size, f)
                elif sw == 1:
                    br_size = _set_add(br_items, br_pos, br_size, f)
                else:
                    br_size = _set_remove(br_items, br_pos, br_size, rev[f])
            states[v] = cause
    damage = initial_red + n_spread
    return status, damage, clock, n_conv, n_pred, n_spread, events


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def _masks(g: Graph, limits: RunLimits | None):
    boundary = np.zeros(g.n, dtype=np.uint8)
    target = np.zeros(g.n, dtype=np.uint8)
    if limits is not None:
        if limits.boundary_set:
            boundary[list(limits.boundary_set)] = 1
        if limits.target_set:
            target[list(limits.target_set)] = 1
    return boundary, target


def _run_aggregate(g: Graph, p: ProcessParams, spec: str,
                   limits: RunLimits | None, rng, seed_label):
    if seed_label is None and rng is not None and not isinstance(rng, np.random.Generator):
        seed_label = rng
    gen = _as_generator(rng)
    graph, states = _initial_states(g, spec)  # classical augments the graph
    boundary, target = _masks(graph, limits)
    max_events = limits.max_events if limits and limits.max_events is not None else 2**62
    src, rev = graph.directed_arrays()
    status_code, damage, clock, n_conv, n_pred, n_spread, _ = _run_kernel(
        graph.indptr, graph.indices, src, rev, states, p.lam, p.alpha,
        max_events, boundary, target, gen)
    status = _STATUS_BY_CODE[status_code]
    outcome = RunOutcome(
        damage=int(damage), status=status,
        fixation_time=float(clock) if status == FIXATED else None,
        n_conversions=int(n_conv), n_predations=int(n_pred),
        n_red_spreads=int(n_spread), seed=seed_label)
    return outcome, graph, states


def run_to_fixation(g: Graph, p: ProcessParams, spec: str = STANDARD_ROOT,
                    limits: RunLimits | None = None, rng=None,
                    seed_label=None) -> RunOutcome:
    """Run the aggregate-rate engine until fixation or a stopping rule fires.

    ``rng`` may be a numpy Generator or a seed (int / SeedSequence input);
    ``seed_label`` is recorded verbatim in the outcome. ``damage`` counts
    the sites ever colored red, which at fixation equals the number of
    sites that turned blue during the run.
    """
    outcome, _, _ = _run_aggregate(g, p, spec, limits, rng, seed_label)
    return outcome


def run_with_states(g: Graph, p: ProcessParams, spec: str = STANDARD_ROOT,
                    limits: RunLimits | None = None, rng=None,
                    seed_label=None) -> tuple:
    """run_to_fixation plus the final Configuration (for snapshots)."""
    outcome, graph, states = _run_aggregate(g, p, spec, limits, rng, seed_label)
    return outcome, Configuration(graph, states)


def run_band_experiment(torus: Graph, p: ProcessParams, rng=None,
                        max_events: int | None = None,
                        seed_label=None) -> RunOutcome:
    """Band-initialized escape run: bottom row blue, next row red, stop with
    status escaped as soon as red touches the top row."""
    if torus.rows is None:
        raise BandOnNonTorus("band experiment needs a row-structured graph")
    top = frozenset(torus.row(torus.rows[0] - 1))
    limits = RunLimits(max_events=max_events, target_set=top)
    return run_to_fixation(torus, p, BAND, limits, rng, seed_label=seed_label)


def per_clock_run(g: Graph, p: ProcessParams, spec: str = STANDARD_ROOT,
                  limits: RunLimits | None = None, rng=None,
                  seed_label=None) -> RunOutcome:
    """Reference engine: after every event, redraw a fresh exponential clock
    for each active directed adjacency and each red site, and fire the
    minimum. Memorylessness makes this distributionally identical to the
    aggregate-rate engine; it costs O(active clocks) per event and exists
    to cross-check the fast path.
    """
    gen = _as_generator(rng)
    if seed_label is None and rng is not None and not isinstance(rng, np.random.Generator):
        seed_label = rng
    cfg = init_configuration(g, spec)
    graph = cfg.graph
    boundary = frozenset(limits.boundary_set or ()) if limits else frozenset()
    target = frozenset(limits.target_set or ()) if limits else frozenset()
    max_events = limits.max_events if limits and limits.max_events is not None else 2**62
    src, dst = cfg._src, graph.indices
    status = None
    while True:
        if len(cfg.red) == 0:
            status = FIXATED
            break
        if cfg.n_events >= max_events:
            status = STEP_LIMIT_HIT
            break
        # enumerate active clocks in a fixed order so runs are seed-reproducible
        best = None
        for e in cfg.rw.sorted_items():
            cand = (gen.exponential() / p.lam, int(src[e]), int(dst[e]), 0, e)
            if best is None or cand < best:
                best = cand
        for e in cfg.br.sorted_items():
            cand = (gen.exponential(), int(src[e]), int(dst[e]), 1, e)
            if best is None or cand < best:
                best = cand
        if p.alpha > 0:
            for v in cfg.red.sorted_items():
                cand = (gen.exponential() / p.alpha, v, v, 2, v)
                if best is None or cand < best:
                    best = cand
        if best is None:
            status = STEP_LIMIT_HIT  # alpha = 0, red everywhere reachable
            break
        dt, _, _, kind, payload = best
        cfg.clock += dt
        cfg.n_events += 1
        if kind == 0:
            v = _apply_red_spread(cfg, payload)
            if v in target:
                status = ESCAPED
                break
            if v in boundary:
                status = TRUNCATION_HIT
                break
        elif kind == 1:
            _apply_blue(cfg, int(dst[payload]), BLUE_PRED)
        else:
            _apply_blue(cfg, payload, BLUE_CONV)
    return RunOutcome(
        damage=cfg.ever_red_count(), status=status,
        fixation_time=cfg.clock if status == FIXATED else None,
        n_conversions=cfg.n_conversions, n_predations=cfg.n_predations,
        n_red_spreads=cfg.n_red_spreads, seed=seed_label)


def snapshot(cfg: Configuration) -> np.ndarray:
    """Per-vertex color codes: 0 white, 1 red, 2 blue-by-predation,
    3 blue-by-conversion."""
    return cfg.states.copy()


def snapshot_csv(cfg: Configuration) -> str:
    """Row-major CSV for row-structured graphs, else one `vertex,code`
    line per vertex."""
    codes = cfg.states
    if cfg.graph.rows is not None:
        n_rows, n_cols = cfg.graph.rows
        lines = [",".join(str(int(codes[r * n_cols + c])) for c in range(n_cols))
                 for r in range(n_rows)]
    else:
        lines = [f"{v},{int(codes[v])}" for v in range(cfg.graph.n)]
    return "\n".join(lines) + "\n"
