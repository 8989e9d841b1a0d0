"""Event-level simulation of the duplication-deletion graph.

The graph is always a disjoint union of cliques, so the whole state is the
multiset of clique sizes.  A vertex chosen uniformly at random lies in
clique ``j`` with probability ``size[j] / N``; a Fenwick tree over the sizes
gives O(log m) sampling and updates.  Duplication grows the chosen clique by
one; deletion detaches the chosen vertex into a new singleton clique (a
no-op on a clique of size one, but still an event).

Version 1 applies one event per step.  Version 2 performs the version-1
event at step ``n`` with probability ``N / n`` and nothing otherwise.
Version 3 runs in continuous time with total event rate ``N``.  All three
share the same embedded jump chain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .params import ModelParams, as_params
from .rng import UniformStream

__all__ = [
    "EventKind",
    "CliqueTable",
    "SimSnapshot",
    "FixedVertexTrajectory",
    "new_graph",
    "sample_vertex",
    "duplicate",
    "delete_vertex",
    "step_v1",
    "step_v2",
    "advance_v3",
    "degree_histogram",
    "max_degree",
    "max_degree_multiplicity",
    "s_n_r",
    "snapshot",
    "Simulation",
    "simulate",
    "geometric_checkpoints",
    "simulate_fixed_vertex",
    "fixed_vertex_ensemble",
]


class EventKind(enum.Enum):
    DUPLICATION = "duplication"
    DELETION = "deletion"
    NOOP = "noop"


# ---------------------------------------------------------------------------
# Fenwick tree kernels (tree is 1-based, length capacity + 1)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fen_add(tree, i, delta):
    j = i + 1
    n = tree.shape[0] - 1
    while j <= n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def _fen_find(tree, v):
    """0-based index of the clique holding vertex ``v`` (``0 <= v < N``)."""
    n = tree.shape[0] - 1
    step = 1
    while step * 2 <= n:
        step *= 2
    pos = 0
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= v:
            pos = nxt
            v -= tree[nxt]
        step //= 2
    return pos


@njit(cache=True)
def _fen_build(sizes):
    n = sizes.shape[0]
    tree = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        j = i + 1
        tree[j] += sizes[i]
        parent = j + (j & (-j))
        if parent <= n:
            tree[parent] += tree[j]
    return tree


@njit(cache=True)
def _apply(sizes, tree, m, c, dup):
    """Apply one event to clique ``c``; returns ``(m, dN)``."""
    if dup:
        sizes[c] += 1
        _fen_add(tree, c, 1)
        return m, 1
    if sizes[c] > 1:
        sizes[c] -= 1
        _fen_add(tree, c, -1)
        sizes[m] = 1
        _fen_add(tree, m, 1)
        m += 1
    return m, 0


@njit(cache=True)
def _run_discrete(sizes, tree, m, N, theta, buf, pos, n_start, n_steps, slowed):
    """Steps ``n_start+1 .. n_start+n_steps`` of version 1 (or 2 if ``slowed``).

    Each step consumes one row ``(u, w)``: ``u`` picks the vertex (and, in
    version 2, decides whether the step acts at all) and ``w`` the event type.
    """
    ndup = 0
    ndel = 0
    for step in range(n_steps):
        u = buf[pos, 0]
        w = buf[pos, 1]
        pos += 1
        if slowed:
            n = n_start + step + 1
            if N > n:
                raise RuntimeError("version-2 invariant N <= n violated")
            # u*n is uniform on [0, n); it lands below N with probability N/n,
            # and is then uniform on [0, N)
            v = int(u * n)
            if v >= N:
                continue
        else:
            v = int(u * N)
            if v >= N:
                v = N - 1
        c = _fen_find(tree, v)
        dup = w < theta
        m, dn = _apply(sizes, tree, m, c, dup)
        N += dn
        if dup:
            ndup += 1
        else:
            ndel += 1
    return m, N, pos, ndup, ndel


@njit(cache=True)
def _run_continuous(sizes, tree, m, N, theta, buf, pos, t, t_end, max_events):
    """Version-3 events until ``t_end``, ``max_events`` or buffer exhaustion.

    Returns ``(m, N, pos, t, events, reached_end)``.  The row whose waiting
    time overshoots ``t_end`` is consumed; by memorylessness the next call
    may start afresh from ``t_end``.
    """
    events = 0
    rows = buf.shape[0]
    while events < max_events and pos < rows:
        dt = -math.log1p(-buf[pos, 0]) / N
        if t + dt > t_end:
            pos += 1
            return m, N, pos, t_end, events, True
        t += dt
        v = int(buf[pos, 1] * N)
        if v >= N:
            v = N - 1
        dup = buf[pos, 2] < theta
        pos += 1
        c = _fen_find(tree, v)
        m, dn = _apply(sizes, tree, m, c, dup)
        N += dn
        events += 1
    return m, N, pos, t, events, False


# ---------------------------------------------------------------------------
# clique table
# ---------------------------------------------------------------------------

class CliqueTable:
    """Multiset of clique sizes with a Fenwick index over the sizes.

    Clique references are integer slots; slots are never freed because no
    operation empties a clique.
    """

    def __init__(self, sizes=(1,), capacity: int | None = None):
        sizes = np.asarray(sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes < 1):
            raise ValueError("clique sizes must be a nonempty sequence of positive integers")
        cap = max(16, sizes.size * 2, capacity or 0)
        self._sizes = np.zeros(cap, dtype=np.int64)
        self._sizes[: sizes.size] = sizes
        self._tree = _fen_build(self._sizes)
        self.m = int(sizes.size)
        self.total_vertices = int(sizes.sum())

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes[: self.m]

    @property
    def capacity(self) -> int:
        return self._sizes.shape[0]

    def reserve(self, extra: int) -> None:
        """Guarantee room for ``extra`` more cliques."""
        need = self.m + int(extra)
        if need <= self.capacity:
            return
        cap = self.capacity
        while cap < need:
            cap *= 2
        grown = np.zeros(cap, dtype=np.int64)
        grown[: self.m] = self.sizes
        self._sizes = grown
        self._tree = _fen_build(grown)

    def multiset(self) -> tuple:
        return tuple(sorted(int(s) for s in self.sizes))

    def copy(self) -> "CliqueTable":
        return CliqueTable(self.sizes.copy(), capacity=self.capacity)

    def check(self) -> None:
        """Debug-mode invariant check."""
        sizes = self.sizes
        assert np.all(sizes >= 1), "clique of size < 1"
        assert int(sizes.sum()) == self.total_vertices, "N differs from the sum of sizes"
        assert np.array_equal(self._tree, _fen_build(self._sizes)), "weight index out of sync"

    def __repr__(self):
        return f"CliqueTable(N={self.total_vertices}, cliques={self.m})"


def new_graph() -> CliqueTable:
    """A single isolated vertex."""
    return CliqueTable((1,))


def sample_vertex(table: CliqueTable, rng: np.random.Generator) -> int:
    """Index of the clique containing a uniformly chosen vertex."""
    if table.total_vertices < 1:
        raise ValueError("cannot sample from an empty table")
    v = int(rng.integers(table.total_vertices))
    return int(_fen_find(table._tree, v))


def _check_ref(table, c):
    if not 0 <= c < table.m:
        raise IndexError(f"invalid clique reference {c}")


def duplicate(table: CliqueTable, c: int) -> None:
    _check_ref(table, c)
    table.m, dn = _apply(table._sizes, table._tree, table.m, c, True)
    table.total_vertices += dn


def delete_vertex(table: CliqueTable, c: int) -> None:
    """Remove the edges of one vertex of clique ``c``."""
    _check_ref(table, c)
    table.reserve(1)
    table.m, _ = _apply(table._sizes, table._tree, table.m, c, False)


def _event(table, params, rng):
    c = sample_vertex(table, rng)
    if rng.random() < params.theta:
        duplicate(table, c)
        return EventKind.DUPLICATION
    delete_vertex(table, c)
    return EventKind.DELETION


def step_v1(table: CliqueTable, params, rng: np.random.Generator) -> EventKind:
    return _event(table, as_params(params), rng)


def step_v2(table: CliqueTable, n: int, params, rng: np.random.Generator) -> EventKind:
    """Step ``n`` of version 2: acts with probability ``N / n``."""
    if table.total_vertices > n:
        raise RuntimeError(f"version-2 invariant violated: N={table.total_vertices} > n={n}")
    if rng.random() * n >= table.total_vertices:
        return EventKind.NOOP
    return _event(table, as_params(params), rng)


def advance_v3(table: CliqueTable, params, rng: np.random.Generator):
    """Waiting time (rate ``N``) and the event that follows it."""
    dt = rng.exponential(1.0 / table.total_vertices)
    return dt, _event(table, as_params(params), rng)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _size_counts(table):
    sizes, counts = np.unique(table.sizes, return_counts=True)
    return sizes.astype(np.int64), counts.astype(np.int64)


def degree_histogram(table: CliqueTable) -> dict:
    """``{degree: number of vertices}``; a size-``s`` clique holds ``s`` vertices of degree ``s-1``."""
    sizes, counts = _size_counts(table)
    return {int(s) - 1: int(s) * int(c) for s, c in zip(sizes, counts)}


def max_degree(table: CliqueTable) -> int:
    return int(table.sizes.max()) - 1


def max_degree_multiplicity(table: CliqueTable) -> int:
    """Number of vertices attaining the maximal degree."""
    sizes = table.sizes
    top = sizes.max()
    return int(top) * int(np.count_nonzero(sizes == top))


def s_n_r(table: CliqueTable, r: int) -> int:
    """``sum_i binom(d_i, r)`` over all vertices, exact."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    sizes, counts = _size_counts(table)
    return sum(int(c) * int(s) * math.comb(int(s) - 1, r) for s, c in zip(sizes, counts))


@dataclass
class SimSnapshot:
    version: int
    step_or_time: float
    N: int
    degree_histogram: dict
    max_degree: int
    scaling_estimate: float
    s_r_values: dict = field(default_factory=dict)


def _scaling_estimate(version, theta, x, N):
    if version == 1:
        return N / x if x > 0 else float("nan")
    if version == 2:
        return N * x ** -theta if x > 0 else float("nan")
    return N * math.exp(-theta * x)


def snapshot(table: CliqueTable, version: int, theta: float, step_or_time, s_r=(1, 2, 3)) -> SimSnapshot:
    return SimSnapshot(
        version=version,
        step_or_time=step_or_time,
        N=table.total_vertices,
        degree_histogram=degree_histogram(table),
        max_degree=max_degree(table),
        scaling_estimate=_scaling_estimate(version, theta, step_or_time, table.total_vertices),
        s_r_values={r: s_n_r(table, r) for r in s_r},
    )


def geometric_checkpoints(horizon: int, base: int = 2, start: int = 1) -> list[int]:
    """``start, start*base, ...`` below ``horizon``, then ``horizon`` itself."""
    out = []
    x = start
    while x < horizon:
        out.append(x)
        x *= base
    out.append(int(horizon))
    return out


# ---------------------------------------------------------------------------
# bulk runs
# ---------------------------------------------------------------------------

class Simulation:
    """A single run driven by the compiled kernels.

    Versions 1 and 2 advance in steps, version 3 in continuous time.  The
    step index needed by version 2 lives here, not in the table.
    """

    def __init__(self, version: int, params, rng: np.random.Generator,
                 table: CliqueTable | None = None, block: int = 1 << 16):
        if version not in (1, 2, 3):
            raise ValueError(f"unknown version {version!r}")
        self.version = version
        self.params = as_params(params)
        self.table = table if table is not None else new_graph()
        self.stream = UniformStream(rng, 3 if version == 3 else 2, block)
        self.steps = 0
        self.time = 0.0
        self.events = 0
        self.duplications = 0

    @property
    def clock(self):
        return self.time if self.version == 3 else self.steps

    def run_steps(self, n_steps: int) -> None:
        if self.version == 3:
            raise ValueError("version 3 advances in time; use run_until")
        n_steps = int(n_steps)
        if n_steps <= 0:
            return
        tab = self.table
        tab.reserve(n_steps)
        self.stream.ensure(n_steps)
        tab.m, tab.total_vertices, self.stream.pos, ndup, ndel = _run_discrete(
            tab._sizes, tab._tree, tab.m, tab.total_vertices, self.params.theta,
            self.stream.buf, self.stream.pos, self.steps, n_steps, self.version == 2,
        )
        self.steps += n_steps
        self.events += ndup + ndel
        self.duplications += ndup

    def run_until(self, t_end: float) -> None:
        if self.version != 3:
            raise ValueError("versions 1 and 2 advance in steps; use run_steps")
        block = self.stream.block
        tab = self.table
        while self.time < t_end:
            tab.reserve(block)
            self.stream.ensure(block)
            before = tab.total_vertices
            tab.m, tab.total_vertices, self.stream.pos, self.time, ev, done = _run_continuous(
                tab._sizes, tab._tree, tab.m, tab.total_vertices, self.params.theta,
                self.stream.buf, self.stream.pos, self.time, float(t_end), block,
            )
            self.events += ev
            self.duplications += tab.total_vertices - before
            if done:
                break

    def advance_to(self, target) -> None:
        if self.version == 3:
            self.run_until(float(target))
        else:
            self.run_steps(int(target) - self.steps)

    def snapshot(self, s_r=(1, 2, 3)) -> SimSnapshot:
        return snapshot(self.table, self.version, self.params.theta, self.clock, s_r)


def simulate(version: int, params, horizon, rng: np.random.Generator, checkpoints=None,
             s_r=(1, 2, 3)) -> list[SimSnapshot]:
    """Run one simulation and return snapshots at ``checkpoints``.

    Default checkpoints are ``1, 2, 4, ...`` steps for versions 1/2 and
    integer times for version 3, always ending at ``horizon``.
    """
    sim = Simulation(version, params, rng)
    if checkpoints is None:
        if version == 3:
            checkpoints = [float(t) for t in range(1, int(math.floor(horizon)) + 1)]
            if not checkpoints or checkpoints[-1] < horizon:
                checkpoints.append(float(horizon))
        else:
            checkpoints = geometric_checkpoints(int(horizon))
    out = []
    for x in sorted(checkpoints):
        sim.advance_to(x)
        out.append(sim.snapshot(s_r))
    return out


# ---------------------------------------------------------------------------
# degree of a fixed vertex
# ---------------------------------------------------------------------------

@dataclass
class FixedVertexTrajectory:
    times: np.ndarray
    degrees: np.ndarray
    running_max: int


def _fixed_vertex_rates(theta, d):
    """``(up, down, reset)`` rates out of degree ``d``; they sum to ``d + 1``."""
    return (d + 1) * theta, d * (1.0 - theta), 1.0 - theta


def simulate_fixed_vertex(params, t_end: float, rng: np.random.Generator) -> FixedVertexTrajectory:
    """Degree of one vertex, started isolated at time 0, up to ``t_end``.

    The first entry is ``(0.0, 0)``; every later entry is a jump time and
    the degree after it.  Self-deletion at degree 0 is a silent event and
    is not recorded.
    """
    th = as_params(params).theta
    t = 0.0
    d = 0
    times = [0.0]
    degrees = [0]
    while True:
        t += rng.exponential(1.0 / (d + 1))
        if t > t_end:
            break
        up, down, _ = _fixed_vertex_rates(th, d)
        u = rng.random() * (d + 1)
        if u < up:
            d += 1
        elif u < up + down:
            d -= 1
        else:
            if d == 0:
                continue
            d = 0
        times.append(t)
        degrees.append(d)
    degrees = np.asarray(degrees, dtype=np.int64)
    return FixedVertexTrajectory(np.asarray(times), degrees, int(degrees.max()))


def fixed_vertex_ensemble(params, obs_times, replicas: int, rng: np.random.Generator):
    """Independent fixed-vertex degree processes observed at ``obs_times``.

    Returns ``(degrees, running_max)`` where ``degrees`` has shape
    ``(replicas, len(obs_times))`` and ``running_max`` is the largest degree
    each replica reached up to the last observation time.
    """
    th = as_params(params).theta
    obs = np.sort(np.asarray(obs_times, dtype=float))
    if obs.size == 0 or obs[0] < 0:
        raise ValueError("observation times must be nonempty and nonnegative")
    t_end = obs[-1]
    t = np.zeros(replicas)
    d = np.zeros(replicas, dtype=np.int64)
    rmax = np.zeros(replicas, dtype=np.int64)
    degrees = np.zeros((replicas, obs.size), dtype=np.int64)
    nxt = np.zeros(replicas, dtype=np.int64)  # next observation index per replica
    active = np.arange(replicas)
    while active.size:
        da = d[active]
        rate = da + 1.0
        tn = t[active] + rng.exponential(1.0, active.size) / rate
        # record the current degree at every observation time passed
        for j in range(obs.size):
            hit = (nxt[active] == j) & (tn > obs[j])
            if not hit.any():
                continue
            idx = active[hit]
            degrees[idx, j] = d[idx]
            nxt[idx] += 1
        alive = tn <= t_end
        active = active[alive]
        tn = tn[alive]
        da = da[alive]
        t[active] = tn
        u = rng.random(active.size) * (da + 1.0)
        up = (da + 1.0) * th
        down = da * (1.0 - th)
        new = np.where(u < up, da + 1, np.where(u < up + down, da - 1, 0))
        d[active] = new
        rmax[active] = np.maximum(rmax[active], new)
    return degrees, rmax

