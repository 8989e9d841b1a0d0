"""Closed-form and numerical evaluators for the duplication-deletion model.

Covers the limiting degree proportions ``c_k``, the stationary law ``q_k``
of a fixed vertex's degree together with its tails, the first-passage
sequence ``a_r`` (and ``p0(r) = 1/a_r``), Laguerre polynomials, expected
graph sizes, exact factorial-moment expectations ``E S_n(r)`` and the
maximal-degree constants.

Quantities that leave the double range for large index (``c_k`` and
``q_k`` decay like ``gamma**-k`` below criticality, ``a_r`` grows like
``gamma**r``) are also available as logs: see :func:`log_c`,
:func:`log_q`, :func:`log_tail_q` and :attr:`SurvivalTable.log_a`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import CRITICAL, SUBCRITICAL, SUPERCRITICAL, DomainError, ModelParams, as_params
from .quadrature import DEFAULT_QUAD, QuadratureSpec, integrate_log

__all__ = [
    "TheoryTable",
    "SurvivalTable",
    "BoundForm",
    "MaxDegreeConstants",
    "log_c",
    "compute_c",
    "log_asympt_c",
    "asympt_c",
    "log_q",
    "compute_q",
    "log_tail_q",
    "tail_q",
    "log_tail_q_asympt",
    "tail_q_asympt",
    "theory_table",
    "c_recursion_residual",
    "q_recursion_residual",
    "a_recursion_residual",
    "compute_a",
    "a_binomial_sum",
    "laguerre_poly",
    "laguerre_explicit",
    "laguerre_eval",
    "laguerre_asympt",
    "log_p0_asympt",
    "p0_asympt",
    "expected_size",
    "es_n_r_exact",
    "es_n_r_bound",
    "maxdeg_bound_constants",
]


# ---------------------------------------------------------------------------
# log-integrands on [0, 1]; t and s = 1 - t are rows, k is a column
# ---------------------------------------------------------------------------

def _log_one_minus_t_over_gamma(s, g):
    # 1 - t/g = (g - 1 + s)/g, no cancellation for g > 1
    return np.log((g - 1.0) + s) - math.log(g)


def _log_one_minus_gamma_t(s, g):
    # 1 - g t = (1 - g) + g s, no cancellation for g < 1
    return np.log((1.0 - g) + g * s)


def _c_integrand(p: ModelParams):
    g = p.gamma
    if p.regime == SUBCRITICAL:
        b = p.beta
        lg = math.log(g)

        def f(t, s, k):
            return (-(k + 1) * lg + (k + 1) * np.log(t) + (-1.0 - b) * np.log(s)
                    - (1.0 - b) * _log_one_minus_t_over_gamma(s, g))
    elif p.regime == SUPERCRITICAL:
        b = p.beta
        lg = math.log(g)

        def f(t, s, k):
            return (lg + (k + 1) * np.log(t) + (b - 1.0) * np.log(s)
                    - (1.0 + b) * _log_one_minus_gamma_t(s, g))
    else:
        # (k+1) int_0^inf x^k e^-x/(1+x)^(k+2) dx with x = t/(1-t)
        def f(t, s, k):
            return np.log(k + 1) + k * np.log(t) - t / s
    return f


def _q_integrand(p: ModelParams):
    g = p.gamma
    if p.regime == SUBCRITICAL:
        b = p.beta
        lg = math.log(g)

        def f(t, s, k):
            return (-k * lg + k * np.log(t) - b * np.log(s)
                    - (1.0 - b) * _log_one_minus_t_over_gamma(s, g))
    elif p.regime == SUPERCRITICAL:
        b = p.beta
        lg = math.log(g)

        def f(t, s, k):
            return (lg + k * np.log(t) + (b - 1.0) * np.log(s)
                    - b * _log_one_minus_gamma_t(s, g))
    else:
        def f(t, s, k):
            return k * np.log(t) - t / s - np.log(s)
    return f


def _tail_integrand(p: ModelParams):
    g = p.gamma
    b = p.require_beta()
    lg = math.log(g)
    if p.regime == SUBCRITICAL:
        def f(t, s, k):
            return (-k * lg + k * np.log(t) - b * np.log(s)
                    - (2.0 - b) * _log_one_minus_t_over_gamma(s, g))
    else:
        def f(t, s, k):
            return (lg + k * np.log(t) + (b - 2.0) * np.log(s)
                    - b * _log_one_minus_gamma_t(s, g))
    return f


def _ks(k_or_kmax, start=0):
    return np.arange(start, int(k_or_kmax) + 1, dtype=float)


# ---------------------------------------------------------------------------
# c_k
# ---------------------------------------------------------------------------

def log_c(params, ks, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """``log c_k`` for each ``k`` in ``ks`` by regime-appropriate quadrature."""
    p = as_params(params)
    return integrate_log(_c_integrand(p), np.asarray(ks, dtype=float), quad)


def compute_c(params, k_max: int, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Limiting degree proportions ``c_0 .. c_kmax``.

    Each value is an independent quadrature; the three-term relation
    between neighbours is never used to generate values, only to check
    them (forward use of it picks up the growing solution).
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    return np.exp(log_c(params, _ks(k_max), quad))


def log_asympt_c(params, k) -> np.ndarray:
    """Log of the large-``k`` form of ``c_k``.

    Below criticality the constant is ``(1-beta)^(-beta) Gamma(1-beta)``,
    which is what Laplace's method gives at the endpoint ``t = 1`` of the
    integral representation.
    """
    p = as_params(params)
    k = np.asarray(k, dtype=float)
    if p.regime == SUBCRITICAL:
        b, g = p.beta, p.gamma
        return (-b * math.log(1.0 - b) + math.lgamma(1.0 - b)
                - k * math.log(g) + b * np.log(k))
    if p.regime == CRITICAL:
        return 0.5 * math.log(math.e * math.pi) + 0.25 * np.log(k) - 2.0 * np.sqrt(k)
    b, g = p.beta, p.gamma
    return math.log(g) + b * math.log(b) + math.lgamma(b + 1.0) - b * np.log(k)


def asympt_c(params, k):
    """Large-``k`` asymptotic form of ``c_k`` for the parameter's regime."""
    return np.exp(log_asympt_c(params, k))


def c_recursion_residual(params, c: np.ndarray) -> np.ndarray:
    """Relative residuals of the three-term relation for ``c``.

    Entry 0 checks ``c_0 = (1-theta)/(1+theta) (1 + c_1)``; entry ``k``
    checks the interior relation for ``1 <= k <= len(c) - 2``.
    """
    th = as_params(params).theta
    c = np.asarray(c, dtype=float)
    rhs = np.empty(c.size - 1)
    rhs[0] = (1 - th) / (1 + th) * (1 + c[1])
    k = np.arange(1, c.size - 1)
    rhs[1:] = (k + 1) / (k + 1 + th) * (th * c[k - 1] + (1 - th) * c[k + 1])
    return np.abs(c[:-1] - rhs) / np.abs(c[:-1])


# ---------------------------------------------------------------------------
# q_k and tails
# ---------------------------------------------------------------------------

def log_q(params, ks, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    p = as_params(params)
    return integrate_log(_q_integrand(p), np.asarray(ks, dtype=float), quad)


def compute_q(params, k_max: int, quad: QuadratureSpec = DEFAULT_QUAD,
              method: str = "from_c") -> np.ndarray:
    """Stationary degree law ``q_0 .. q_kmax`` of a fixed vertex.

    ``method="from_c"`` uses ``q_0 = gamma (1 - c_0)`` and
    ``q_k = c_{k-1} - gamma c_k``; ``method="integral"`` integrates the
    direct representation of each ``q_k``.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    p = as_params(params)
    if method == "integral":
        return np.exp(log_q(p, _ks(k_max), quad))
    if method != "from_c":
        raise ValueError(f"unknown method {method!r}")
    c = compute_c(p, k_max, quad)
    q = np.empty_like(c)
    q[0] = p.gamma * (1.0 - c[0])
    q[1:] = c[:-1] - p.gamma * c[1:]
    return q


def q_recursion_residual(params, q: np.ndarray) -> np.ndarray:
    """Relative residuals of the stationary balance equations for ``q``."""
    th = as_params(params).theta
    q = np.asarray(q, dtype=float)
    rhs = np.empty(q.size - 1)
    rhs[0] = (1 - th) * (1 + q[1])
    k = np.arange(1, q.size - 1)
    rhs[1:] = (k * th * q[k - 1] + (k + 1) * (1 - th) * q[k + 1]) / (k + 1)
    return np.abs(q[:-1] - rhs) / np.abs(q[:-1])


def log_tail_q(params, ks, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """``log sum_{j >= k} q_j`` for each ``k >= 1``."""
    p = as_params(params)
    ks = np.asarray(ks, dtype=float)
    if np.any(ks < 1):
        raise ValueError("tail index must be at least 1")
    if p.regime == CRITICAL:
        # the critical tail from k equals c_{k-1}
        return log_c(p, ks - 1, quad)
    return integrate_log(_tail_integrand(p), ks, quad)


def tail_q(params, k, quad: QuadratureSpec = DEFAULT_QUAD):
    out = np.exp(log_tail_q(params, np.atleast_1d(k), quad))
    return float(out[0]) if np.ndim(k) == 0 else out


def log_tail_q_asympt(params, k) -> np.ndarray:
    p = as_params(params)
    k = np.asarray(k, dtype=float)
    if p.regime == CRITICAL:
        return log_asympt_c(p, k)
    b, g = p.beta, p.gamma
    if p.regime == SUBCRITICAL:
        return ((2.0 - b) * math.log(1.0 - b) + math.lgamma(1.0 - b)
                + (b - 1.0) * np.log(k) - k * math.log(g))
    return math.log(g) + b * math.log(b) + math.lgamma(b - 1.0) + (1.0 - b) * np.log(k)


def tail_q_asympt(params, k):
    return np.exp(log_tail_q_asympt(params, k))


@dataclass
class TheoryTable:
    theta: float
    k_max: int
    c: np.ndarray
    q: np.ndarray
    method: dict = field(default_factory=dict)
    tail_q: np.ndarray | None = None


def theory_table(params, k_max: int, quad: QuadratureSpec = DEFAULT_QUAD,
                 q_method: str = "from_c", with_tail: bool = False) -> TheoryTable:
    p = as_params(params)
    c = compute_c(p, k_max, quad)
    if q_method == "from_c":
        q = np.empty_like(c)
        q[0] = p.gamma * (1.0 - c[0])
        q[1:] = c[:-1] - p.gamma * c[1:]
    else:
        q = compute_q(p, k_max, quad, method=q_method)
    method = {"c": "integral", "q": "closed_sum" if q_method == "from_c" else "integral"}
    tail = None
    if with_tail:
        tail = np.empty(k_max + 1)
        tail[0] = 1.0
        tail[1:] = np.exp(log_tail_q(p, _ks(k_max, 1), quad))
        method["tail_q"] = "recursion" if p.is_critical else "integral"
    return TheoryTable(p.theta, int(k_max), c, q, method, tail)


# ---------------------------------------------------------------------------
# first passage: a_r and p0(r)
# ---------------------------------------------------------------------------

@dataclass
class SurvivalTable:
    """First-passage table: ``p0[r] = 1 / a[r]``.

    ``a`` may overflow to ``inf`` for large ``r`` below criticality;
    ``log_a`` stays finite.
    """

    theta: float
    r_max: int
    log_a: np.ndarray

    @property
    def a(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_a)

    @property
    def p0(self) -> np.ndarray:
        return np.exp(-self.log_a)


def compute_a(theta, r_max: int) -> SurvivalTable:
    """Forward recursion ``a_{i+1} = (a_i - i/(i+1) (1-theta) a_{i-1}) / theta``.

    The values are carried with a running power-of-two scale so that
    ``log a_r`` is exact to working precision long after ``a_r`` itself
    overflows.  Forward evaluation is stable: ``a_r`` is the dominant
    solution of the recursion in every regime.
    """
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    th = as_params(theta).theta
    log_a = np.empty(r_max + 1)
    prev, cur = 1.0, 1.0 / th
    log_scale = 0.0
    log_a[0] = 0.0
    log_a[1] = math.log(cur)
    for i in range(1, r_max):
        nxt = (cur - i / (i + 1) * (1.0 - th) * prev) / th
        prev, cur = cur, nxt
        if cur > 1e100:
            m, e = math.frexp(cur)
            prev = math.ldexp(prev, -e)
            cur = m
            log_scale += e * math.log(2.0)
        log_a[i + 1] = log_scale + math.log(cur)
    return SurvivalTable(th, int(r_max), log_a)


def a_recursion_residual(theta, a: np.ndarray) -> np.ndarray:
    """Relative residual of ``a_i = theta a_{i+1} + i/(i+1) (1-theta) a_{i-1}``
    for ``1 <= i <= len(a) - 2``."""
    th = as_params(theta).theta
    a = np.asarray(a, dtype=float)
    i = np.arange(1, a.size - 1)
    rhs = th * a[i + 1] + i / (i + 1) * (1 - th) * a[i - 1]
    return np.abs(a[i] - rhs) / np.abs(a[i])


def _gen_binomials(x: float, n: int) -> list[float]:
    """``binom(x, i)`` for ``i = 0..n`` with real ``x``."""
    out = [1.0]
    for i in range(1, n + 1):
        out.append(out[-1] * (x - i + 1) / i)
    return out


def _a_binomial_super(theta: float, r: int) -> float:
    g = (1 - theta) / theta
    b = theta / (2 * theta - 1)
    left = _gen_binomials(b - 1.0, r)
    right = _gen_binomials(-b, r)
    terms = [left[i] * right[r - i] * g ** i for i in range(r + 1)]
    return (-1) ** r * math.fsum(terms)


def a_binomial_sum(theta, r: int) -> float:
    """``a_r`` from the power-series coefficients of
    ``(1 - z)**-beta * (1 - gamma z)**(beta - 1)``.

    Below criticality the value is obtained as ``gamma**r a'_r`` with
    ``a'`` the supercritical sequence at ``1 - theta``.  The alternating
    sum loses digits as ``r`` grows; it is meant for ``r <= 30``.
    """
    p = as_params(theta)
    if p.is_critical:
        raise DomainError("a_binomial_sum is undefined at theta = 1/2; use laguerre_eval")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if p.regime == SUPERCRITICAL:
        return _a_binomial_super(p.theta, r)
    return p.gamma ** r * _a_binomial_super(1.0 - p.theta, r)


# ---------------------------------------------------------------------------
# Laguerre polynomials
# ---------------------------------------------------------------------------

def laguerre_poly(r: int, x: float) -> float:
    """``L_r(x)`` by the three-term recursion."""
    if r < 0:
        raise ValueError("degree must be nonnegative")
    prev, cur = 1.0, 1.0 - x
    if r == 0:
        return prev
    for j in range(1, r):
        prev, cur = cur, ((2 * j + 1 - x) * cur - j * prev) / (j + 1)
    return cur


def laguerre_explicit(r: int, x: float) -> float:
    """``L_r(x) = sum_j binom(r, j) (-x)**j / j!``."""
    return math.fsum(math.comb(r, j) * (-x) ** j / math.factorial(j) for j in range(r + 1))


def laguerre_eval(r: int, y: float) -> float:
    """``L_r(-y)``; with ``y = 1`` this is ``a_r`` at ``theta = 1/2``."""
    return laguerre_poly(r, -y)


def laguerre_asympt(r, y: float):
    """First-order large-``r`` form of ``L_r(-y)`` for fixed ``y > 0``."""
    r = np.asarray(r, dtype=float)
    return (0.5 / math.sqrt(math.pi) * r ** -0.25 * math.exp(-y / 2) * y ** -0.25
            * np.exp(2.0 * np.sqrt(y * r)))


def log_p0_asympt(params, r):
    p = as_params(params)
    r = np.asarray(r, dtype=float)
    if p.regime == CRITICAL:
        return math.log(2.0 * math.sqrt(math.e * math.pi)) + 0.25 * np.log(r) - 2.0 * np.sqrt(r)
    b = p.beta
    if p.regime == SUBCRITICAL:
        return (-b * math.log(1.0 - b) + math.lgamma(1.0 - b) + b * np.log(r)
                - r * math.log(p.gamma))
    return (b - 1.0) * math.log(b) + math.lgamma(b) + (1.0 - b) * np.log(r)


def p0_asympt(params, r):
    """Large-``r`` asymptotic of the first-passage probability ``p0(r)``."""
    return np.exp(log_p0_asympt(params, r))


# ---------------------------------------------------------------------------
# sizes, factorial moments, maximal-degree constants
# ---------------------------------------------------------------------------

def expected_size(version: int, params, n_or_t) -> float:
    """Exact ``E N`` after ``n`` steps (versions 1, 2) or at time ``t`` (version 3)."""
    th = as_params(params).theta
    if n_or_t < 0:
        raise ValueError("n or t must be nonnegative")
    if version == 1:
        return 1.0 + th * n_or_t
    if version == 2:
        n = int(n_or_t)
        return math.exp(math.lgamma(n + 1 + th) - math.lgamma(n + 1) - math.lgamma(1 + th))
    if version == 3:
        return math.exp(th * n_or_t)
    raise ValueError(f"unknown version {version!r}")


def es_n_r_exact(theta, n_max: int, r_max: int) -> np.ndarray:
    """Exact version-2 expectations ``E S_n(r)`` as an ``(n_max+1, r_max+1)`` array.

    Row 0 is the initial single vertex.  Column 0 is ``E N_n``.
    """
    if n_max < 1 or r_max < 1:
        raise ValueError("n_max and r_max must be at least 1")
    th = as_params(theta).theta
    es = np.zeros((n_max + 1, r_max + 1))
    es[0, 0] = 1.0
    r = np.arange(1, r_max + 1)
    for n in range(1, n_max + 1):
        es[n, 0] = es[n - 1, 0] * (1.0 + th / n)
        es[n, 1:] = ((1.0 + (2 * th - 1) * (r + 1) / n) * es[n - 1, 1:]
                     + th * (r + 1) / n * es[n - 1, :-1])
    return es


@dataclass(frozen=True)
class BoundForm:
    """Growth descriptor ``n**exponent`` (times ``1 + log n`` when flagged)."""

    exponent: float
    log_correction: bool


def es_n_r_bound(params, n, r: int):
    """Upper bound on ``E S_n(r)``.

    Numeric below and at criticality; above criticality only the growth
    exponent ``max(theta, (r+1)(2 theta - 1))`` is returned, flagged when
    ``r = beta - 1`` where an extra ``log n`` factor appears.
    """
    p = as_params(params)
    if p.regime == SUBCRITICAL:
        return 2.0 * (r + 1) * (-p.beta) ** r * np.asarray(n, dtype=float) ** p.theta
    if p.regime == CRITICAL:
        return 2.0 * math.factorial(r + 1) * np.sqrt(np.asarray(n, dtype=float))
    s = (r + 1) * (2 * p.theta - 1)
    return BoundForm(max(p.theta, s), math.isclose(r, p.beta - 1.0, rel_tol=0, abs_tol=1e-12))


@dataclass(frozen=True)
class MaxDegreeConstants:
    lower: float
    upper: float
    scale: str

    def ratio(self, max_degree, n_vertices):
        """The regime's comparison statistic for ``M`` against ``N``."""
        m = np.asarray(max_degree, dtype=float)
        ln = np.log(np.asarray(n_vertices, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.scale == "log":
                return m / ln
            if self.scale == "log2":
                return m / ln ** 2
            return np.log(m) / ln


def maxdeg_bound_constants(params) -> MaxDegreeConstants:
    p = as_params(params)
    th = p.theta
    if p.regime == SUBCRITICAL:
        lg = math.log(p.gamma)
        return MaxDegreeConstants((1 - th) / lg, (1 + th) / (th * lg), "log")
    if p.regime == CRITICAL:
        return MaxDegreeConstants(1 / 16, 9 / 4, "log2")
    return MaxDegreeConstants(th / p.beta, 1 / p.beta, "power")
