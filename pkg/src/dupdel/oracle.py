"""Brute-force references used to cross-check the simulator and the theory.

Nothing in here shares code with :mod:`dupdel.theory` or the simulation
kernels: state laws are obtained by expanding every branch of the process,
first-passage probabilities by solving the linear system directly, and the
stationary law of a fixed vertex's degree by solving truncated balance
equations.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import solve_banded

from .params import as_params

MAX_ENUMERATION_STEPS = 8


@dataclass
class StateDistribution:
    version: int
    n: int
    entries: dict  # sorted size tuple -> probability

    def total(self) -> float:
        return math.fsum(float(p) for p in self.entries.values())

    def expect(self, func) -> float:
        """``E func(multiset)`` under the distribution."""
        return math.fsum(float(p) * func(state) for state, p in self.entries.items())

    def expected_vertices(self) -> float:
        return self.expect(sum)

    def expected_s_r(self, r: int) -> float:
        return self.expect(lambda st: sum(s * math.comb(s - 1, r) for s in st))

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "version": self.version,
            "n": self.n,
            "states": [
                {"multiset": list(state), "p": float(p)}
                for state, p in sorted(self.entries.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }


def _successors(state, theta, one):
    """Branches ``(next_state, weight)`` of one version-1 event from ``state``."""
    n_vertices = sum(state)
    out = []
    # choosing any vertex of a clique of size s has total weight s/N; equal
    # sizes give identical successors, so aggregate per distinct size
    for s in sorted(set(state)):
        mult = state.count(s)
        pick = one * (s * mult) / n_vertices
        rest = list(state)
        rest.remove(s)
        out.append((tuple(sorted(rest + [s + 1])), pick * theta))
        if s == 1:
            out.append((state, pick * (one - theta)))
        else:
            out.append((tuple(sorted(rest + [s - 1, 1])), pick * (one - theta)))
    return out


def enumerate_states(version: int, theta, n: int, exact: bool = False) -> StateDistribution:
    """Exact law of the clique-size multiset after ``n`` steps.

    With ``exact=True`` the weights are :class:`fractions.Fraction`; ``theta``
    is then converted with ``Fraction(str(theta))`` so 0.3 means 3/10.
    """
    if version not in (1, 2):
        raise ValueError("enumeration is available for versions 1 and 2 only")
    if not 0 <= n <= MAX_ENUMERATION_STEPS:
        raise ValueError(f"n must be between 0 and {MAX_ENUMERATION_STEPS}")
    th = as_params(theta).theta
    if exact:
        one = Fraction(1)
        th_w = Fraction(str(theta))
    else:
        one = 1.0
        th_w = th
    dist = {(1,): one}
    for step in range(1, n + 1):
        nxt = defaultdict(lambda: 0 * one)
        for state, p in dist.items():
            if version == 2:
                act = one * sum(state) / step
                if act > 1:
                    raise RuntimeError("version-2 invariant N <= n violated")
                if act < 1:
                    nxt[state] += p * (one - act)
            else:
                act = one
            for succ, w in _successors(state, th_w, one):
                nxt[succ] += p * act * w
        dist = dict(nxt)
    return StateDistribution(version, n, dist)


def first_passage_solve(theta, r: int) -> np.ndarray:
    """``p_i(r)`` for ``i = 0..r``: probability that a vertex of degree ``i``
    reaches degree ``r`` before it is itself selected for deletion.

    Solves the tridiagonal system
    ``p_0 = theta p_1``,
    ``(i+1) p_i = (i+1) theta p_{i+1} + i (1-theta) p_{i-1}``,
    ``p_r = 1`` directly.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    th = as_params(theta).theta
    size = r + 1
    # banded storage: row 0 super-diagonal, row 1 diagonal, row 2 sub-diagonal
    ab = np.zeros((3, size))
    rhs = np.zeros(size)
    ab[1, 0] = 1.0
    ab[0, 1] = -th
    for i in range(1, r):
        ab[1, i] = i + 1.0
        ab[0, i + 1] = -(i + 1.0) * th
        ab[2, i - 1] = -i * (1.0 - th)
    ab[1, r] = 1.0
    rhs[r] = 1.0
    p = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(p)):
        raise ArithmeticError("first-passage system is singular")
    return p


def stationary_solve(theta, k_trunc: int) -> np.ndarray:
    """Stationary law of the fixed-vertex degree chain truncated at ``k_trunc``.

    Rates out of degree ``d``: up ``(d+1) theta``, down ``d (1-theta)``,
    reset to 0 at ``1 - theta``; the up-rate out of ``k_trunc`` is dropped.
    One balance equation is replaced by the normalization.
    """
    if k_trunc < 10:
        raise ValueError("k_trunc must be at least 10")
    th = as_params(theta).theta
    size = k_trunc + 1
    gen = np.zeros((size, size))
    for d in range(size):
        if d < k_trunc:
            gen[d, d + 1] += (d + 1) * th
        if d > 0:
            gen[d, d - 1] += d * (1.0 - th)
            gen[d, 0] += 1.0 - th
        gen[d, d] = -gen[d].sum()
    a = gen.T.copy()
    a[0, :] = 1.0
    b = np.zeros(size)
    b[0] = 1.0
    try:
        q = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"stationary solve failed: {exc}") from exc
    return q


@dataclass
class MonteCarloEstimate:
    estimate: float
    stderr: float
    replicas: int
    hits: int


def monte_carlo_first_passage(theta, r: int, replicas: int, rng: np.random.Generator) -> MonteCarloEstimate:
    """Fraction of isolated vertices whose degree reaches ``r`` before self-deletion.

    Runs the embedded jump chain of the fixed-vertex process: from degree
    ``d`` the next move is up w.p. ``theta``, down w.p. ``d(1-theta)/(d+1)``
    and self-deletion w.p. ``(1-theta)/(d+1)``.
    """
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    if r < 1:
        raise ValueError("r must be at least 1")
    th = as_params(theta).theta
    d = np.zeros(replicas, dtype=np.int64)
    alive = np.ones(replicas, dtype=bool)
    hit = np.zeros(replicas, dtype=bool)
    while alive.any():
        idx = np.flatnonzero(alive)
        dd = d[idx]
        u = rng.random(idx.size)
        down = dd * (1.0 - th) / (dd + 1.0)
        up = u < th
        dn = (u >= th) & (u < th + down)
        killed = ~(up | dn)
        dd = np.where(up, dd + 1, np.where(dn, dd - 1, dd))
        d[idx] = dd
        reached = dd >= r
        hit[idx[reached]] = True
        alive[idx[reached | killed]] = False
    hits = int(hit.sum())
    est = hits / replicas
    return MonteCarloEstimate(est, math.sqrt(est * (1 - est) / replicas), replicas, hits)


def dumps(obj) -> str:
    """JSON for oracle outputs (state distributions or plain arrays)."""
    if isinstance(obj, StateDistribution):
        return json.dumps(obj.to_json(), indent=2)
    if isinstance(obj, MonteCarloEstimate):
        return json.dumps({"schema_version": 1, **obj.__dict__}, indent=2)
    return json.dumps({"schema_version": 1, "values": [float(x) for x in np.asarray(obj)]}, indent=2)
