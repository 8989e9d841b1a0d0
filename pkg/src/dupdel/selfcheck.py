"""The cross-validation battery behind ``dupdel selfcheck``.

Criteria 1-6 are exact or oracle-backed; 7-10 are finite-horizon
statistical surrogates for almost-sure limit statements, run on the
documented seeds (master seed 0, replicas 0-9).  Each criterion carries a
runtime budget, and exceeding it fails the criterion.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import oracle, theory
from .experiments import ExperimentSpec, run_experiment
from .model import Simulation, geometric_checkpoints
from .rng import make_rng

THETAS = (0.3, 0.5, 0.7)
DOCUMENTED_MASTER_SEED = 0
DOCUMENTED_SEEDS = 10


@dataclass
class CriterionResult:
    number: int
    title: str
    budget: float
    checks: list = field(default_factory=list)  # (description, passed)
    elapsed: float = 0.0

    def check(self, description: str, passed: bool) -> bool:
        self.checks.append((description, bool(passed)))
        return bool(passed)

    @property
    def within_budget(self) -> bool:
        return self.elapsed < self.budget

    @property
    def passed(self) -> bool:
        return self.within_budget and all(ok for _, ok in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [d for d, ok in self.checks if not ok]
        tail = f"; failed: {'; '.join(failed)}" if failed else ""
        budget = "" if self.within_budget else " OVER BUDGET"
        return (f"[{status}] criterion {self.number}: {self.title} "
                f"({len(self.checks) - len(failed)}/{len(self.checks)} checks, "
                f"{self.elapsed:.1f}s of {self.budget:.0f}s{budget}){tail}")


def _criterion(number, title, budget):
    def wrap(func):
        def run() -> CriterionResult:
            res = CriterionResult(number, title, budget)
            start = time.perf_counter()
            func(res)
            res.elapsed = time.perf_counter() - start
            return res
        run.number = number
        run.__doc__ = func.__doc__
        run.__name__ = func.__name__
        return run
    return wrap


@_criterion(1, "normalization of c", 30)
def normalization(res: CriterionResult):
    for theta, k_max, tol in ((0.3, 200, 1e-8), (0.5, 5000, 1e-8), (0.7, 10_000, 1e-2)):
        c = theory.compute_c(theta, k_max)
        err = abs(math.fsum(c) - 1.0)
        res.check(f"theta={theta} K={k_max}: |sum c - 1| = {err:.3e} < {tol:g}", err < tol)


@_criterion(2, "recursion residuals", 10)
def residuals(res: CriterionResult):
    tol = 1e-8
    for theta in THETAS:
        c = theory.compute_c(theta, 101)
        rc = theory.c_recursion_residual(theta, c).max()
        res.check(f"theta={theta}: c relation residual {rc:.2e}", rc < tol)
        for method in ("integral", "from_c"):
            q = theory.compute_q(theta, 101, method=method)
            rq = theory.q_recursion_residual(theta, q).max()
            res.check(f"theta={theta}: q balance residual ({method}) {rq:.2e}", rq < tol)
        a = theory.compute_a(theta, 101).a
        ra = theory.a_recursion_residual(theta, a).max()
        res.check(f"theta={theta}: a recursion residual {ra:.2e}", ra < tol)


@_criterion(3, "cross-method identities", 10)
def cross_methods(res: CriterionResult):
    for theta in THETAS:
        qc = theory.compute_q(theta, 100, method="from_c")
        qi = theory.compute_q(theta, 100, method="integral")
        d = float(np.max(np.abs(qc - qi) / qi))
        res.check(f"theta={theta}: q from c vs integral {d:.2e} < 1e-8", d < 1e-8)
    for theta in (0.3, 0.7):
        a = theory.compute_a(theta, 30).a
        d = max(abs(theory.a_binomial_sum(theta, r) - a[r]) / a[r] for r in range(31))
        res.check(f"theta={theta}: a_r recursion vs binomial sum {d:.2e} < 1e-9", d < 1e-9)
    a = theory.compute_a(0.5, 100).a
    d = max(abs(theory.laguerre_eval(r, 1.0) - a[r]) / a[r] for r in range(101))
    res.check(f"theta=0.5: a_r vs L_r(-1) {d:.2e} < 1e-10", d < 1e-10)
    for theta in THETAS:
        p0 = theory.compute_a(theta, 50).p0
        d = max(abs(oracle.first_passage_solve(theta, r)[0] - p0[r]) / p0[r] for r in range(1, 51))
        res.check(f"theta={theta}: 1/a_r vs tridiagonal solve {d:.2e} < 1e-10", d < 1e-10)


@_criterion(4, "exact enumeration oracle", 30)
def enumeration(res: CriterionResult):
    for theta in THETAS:
        es = theory.es_n_r_exact(theta, 6, 3)
        worst = 0.0
        for n in range(1, 7):
            dist = oracle.enumerate_states(2, theta, n)
            for r in range(4):
                worst = max(worst, abs(dist.expected_s_r(r) - es[n, r]))
        res.check(f"theta={theta}: version-2 E S_n(r) vs enumeration {worst:.2e} <= 1e-12", worst <= 1e-12)
        ok = True
        for n in range(9):
            dist = oracle.enumerate_states(1, theta, n, exact=True)
            th = oracle.Fraction(str(theta))
            mean = sum(p * sum(state) for state, p in dist.entries.items())
            ok &= mean == 1 + th * n
        res.check(f"theta={theta}: version-1 E N_n = 1 + theta n exactly for n <= 8", ok)


@_criterion(5, "factorial-moment bounds", 60)
def bounds(res: CriterionResult):
    n_max, r_max = 10_000, 5
    n = np.arange(1, n_max + 1)
    for theta in (0.3, 0.5):
        es = theory.es_n_r_exact(theta, n_max, r_max)
        ok = all(np.all(es[1:, r] <= theory.es_n_r_bound(theta, n, r)) for r in range(r_max + 1))
        res.check(f"theta={theta}: E S_n(r) below closed-form bound, n <= 1e4, r <= 5", ok)
    es = theory.es_n_r_exact(0.7, n_max, 3)
    window = np.arange(1000, n_max + 1)
    for r in (1, 2, 3):
        slope = np.polyfit(np.log(window), np.log(es[window, r]), 1)[0]
        target = theory.es_n_r_bound(0.7, 1, r).exponent
        res.check(f"theta=0.7 r={r}: fitted exponent {slope:.4f} vs {target:.4f} (tol 0.05)",
                  abs(slope - target) < 0.05)


def ensemble_multisets(version, theta, n, replicas, master_seed=DOCUMENTED_MASTER_SEED) -> Counter:
    """Clique-size multisets of ``replicas`` independent runs after ``n`` steps."""
    counts = Counter()
    for i in range(replicas):
        sim = Simulation(version, theta, make_rng(master_seed, i), block=max(n, 1))
        sim.run_steps(n)
        counts[sim.table.multiset()] += 1
    return counts


@_criterion(6, "simulator vs exact law", 60)
def simulator_law(res: CriterionResult):
    replicas, n = 100_000, 4
    for theta in THETAS:
        dist = oracle.enumerate_states(1, theta, n)
        counts = ensemble_multisets(1, theta, n, replicas)
        unknown = set(counts) - set(dist.entries)
        worst = 0.0
        for state, p in dist.entries.items():
            se = math.sqrt(p * (1 - p) / replicas)
            worst = max(worst, abs(counts.get(state, 0) / replicas - p) / se)
        res.check(f"theta={theta}: worst state deviation {worst:.2f} SE <= 4, "
                  f"{len(unknown)} unreachable states seen", worst <= 4 and not unknown)


@_criterion(7, "degree-distribution convergence", 60)
def degree_convergence(res: CriterionResult):
    for theta in THETAS:
        spec = ExperimentSpec("degree_convergence", theta, 1_000_000, replicas=DOCUMENTED_SEEDS,
                              master_seed=DOCUMENTED_MASTER_SEED, snapshots=[1_000_000])
        out = run_experiment(spec)
        v = out.verdict("final_l1_pass_fraction")
        worst = max(x.observed for x in out.verdicts if x.metric.startswith("final_l1["))
        res.check(f"theta={theta}: {v.observed:.0%} of seeds with L1 < 0.02 (need 90%), worst {worst:.4f}",
                  v.passed)


@_criterion(8, "fixed-vertex stationarity", 120)
def stationarity(res: CriterionResult):
    spec = ExperimentSpec("fixed_vertex_marginal", 0.5, 50.0, replicas=100_000,
                          master_seed=DOCUMENTED_MASTER_SEED)
    out = run_experiment(spec)
    v = out.verdict("l1")
    res.check(f"theta=0.5 t=50: L1 vs q over k <= 30 = {v.observed:.4f} < 0.02", v.passed)
    spec = ExperimentSpec("tv_decay", 0.5, 8.0, replicas=100_000, snapshots=[2.0, 4.0, 8.0],
                          master_seed=DOCUMENTED_MASTER_SEED)
    out = run_experiment(spec)
    for v in out.verdicts:
        if v.metric.startswith("tv["):
            res.check(f"{v.metric} = {v.observed:.4f} <= {v.reference:.4f} + {v.tolerance:.4f}", v.passed)


@_criterion(9, "asymptotic trends", 30)
def asymptotic_trends(res: CriterionResult):
    ks = np.array([100.0, 1000.0])
    for theta in THETAS:
        surv = theory.compute_a(theta, 1000)
        series = {
            "c": theory.log_c(theta, ks) - theory.log_asympt_c(theta, ks),
            "tail_q": theory.log_tail_q(theta, ks) - theory.log_tail_q_asympt(theta, ks),
            "p0": -surv.log_a[ks.astype(int)] - theory.log_p0_asympt(theta, ks),
        }
        for name, log_ratio in series.items():
            dev = np.abs(np.expm1(log_ratio))
            res.check(f"theta={theta} {name}: |ratio-1| {dev[0]:.4f} (k=100) -> {dev[1]:.4f} (k=1000), < 0.2",
                      dev[1] < dev[0] and dev[1] < 0.2)


@_criterion(10, "maximal-degree brackets", 120)
def max_degree(res: CriterionResult):
    for theta in THETAS:
        spec = ExperimentSpec("max_degree_growth", theta, 1_000_000, replicas=DOCUMENTED_SEEDS,
                              master_seed=DOCUMENTED_MASTER_SEED,
                              snapshots=geometric_checkpoints(1_000_000, start=1 << 10),
                              options={"n_min": 1e4})
        out = run_experiment(spec)
        uppers = [v for v in out.verdicts if v.metric.startswith("upper[")]
        worst = max(v.observed for v in uppers)
        res.check(f"theta={theta}: max ratio over n >= 1e4 is {worst:.4f} < {uppers[0].reference:.4f}",
                  all(v.passed for v in uppers))
        low = out.verdict("lower_final_median")
        res.check(f"theta={theta}: final median ratio {low.observed:.4f} > {low.reference:.4f}", low.passed)


CRITERIA = [normalization, residuals, cross_methods, enumeration, bounds, simulator_law,
            degree_convergence, stationarity, asymptotic_trends, max_degree]


def run_selfcheck(fast: bool = False, echo=print) -> list[CriterionResult]:
    chosen = CRITERIA[:6] if fast else CRITERIA
    results = []
    for crit in chosen:
        r = crit()
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
