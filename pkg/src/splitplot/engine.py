"""Quadratic-form statistic, its standardisations and the three level-alpha tests.

``psi_z`` compares ``W_N`` with the normal quantile, ``psi_chi`` with the
quantile of ``(chi2_1 - 1)/sqrt(2)`` and ``phi_star`` with the quantile of
``K_f = (chi2_f - f)/sqrt(2 f)`` at the estimated ``f``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .design import DataSet, ProjectionPair, as_projection, validate_design
from .estimators import TraceEstimates, estimate_traces, f_hat, gram
from .exceptions import DegenerateError, InfeasibleDesignError, SplitPlotError
from .kron import TraceSet, eta, trace_powers

# Above this many degrees of freedom K_f is replaced by its normal limit.
NORMAL_SWITCH_DF = 1e7
TEST_NAMES = ("psi_z", "psi_chi", "phi_star")


@dataclass(frozen=True)
class QFMoments:
    """Null mean and variance of ``Q_N``."""

    mean: float
    variance: float


def q_statistic(dataset: DataSet, T_W, T_S) -> float:
    """``Q_N = N * sum_{i,r} (T_W)_{ir} Xbar_i^T T_S Xbar_r``."""
    T_W = np.asarray(T_W, dtype=float)
    T_S = np.asarray(T_S, dtype=float)
    a, d = dataset.design.a, dataset.design.d
    if T_W.shape != (a, a) or T_S.shape != (d, d):
        raise SplitPlotError(
            f"projection shapes {T_W.shape}, {T_S.shape} do not match a={a}, d={d}"
        )
    means = dataset.group_means()
    q = dataset.design.N * float(np.sum(T_W * (means @ T_S @ means.T)))
    return _clamp_q(q)


def _clamp_q(q: float) -> float:
    if q < 0.0:
        if q > -1e-9:
            return 0.0
        raise RuntimeError(f"internal error: negative quadratic form {q}")
    return q


def _weights(T_W, n) -> tuple[float, float]:
    T_W = np.asarray(T_W, dtype=float)
    n = np.asarray(n, dtype=float)
    r = n.sum() / n
    mean_w = float(np.sum(r * np.diag(T_W)))
    var_w = float(np.sum(np.outer(r, r) * T_W**2))
    return mean_w, var_w


def qf_moments(traces: TraceSet, T_W, n) -> QFMoments:
    """Null moments of ``Q_N`` from ``tr(T_S Sigma)`` and ``tr((T_S Sigma)^2)``.

    ``E = t1 * sum_i (N/n_i) (T_W)_ii``,
    ``Var = 2 t2 * sum_{i,r} N^2/(n_i n_r) (T_W)_ir^2``.
    """
    mean_w, var_w = _weights(T_W, n)
    return QFMoments(traces.t1 * mean_w, 2.0 * traces.t2 * var_w)


def w_standardized(dataset: DataSet, hypothesis, sigma) -> float:
    """``W~_N`` standardised with the exact moments under a known ``Sigma``."""
    pair = as_projection(hypothesis, dataset.design.a, dataset.design.d)
    mom = qf_moments(trace_powers(pair.T_S, sigma), pair.T_W, dataset.design.n)
    if mom.variance <= 0:
        raise DegenerateError("null variance of Q_N is not positive")
    q = q_statistic(dataset, pair.T_W, pair.T_S)
    return (q - mom.mean) / math.sqrt(mom.variance)


def w_from_q(q: float, t1: float, t2: float, T_W, n) -> float:
    """Standardise ``Q_N`` with (estimated or exact) traces ``t1``, ``t2``."""
    if not t2 > 0:
        raise DegenerateError("degenerate variance estimate: A2 <= 0")
    mean_w, var_w = _weights(T_W, n)
    if var_w <= 0:
        raise DegenerateError("whole-plot factor has zero variance weight")
    return (q - t1 * mean_w) / math.sqrt(2.0 * t2 * var_w)


def w_estimated(dataset: DataSet, hypothesis, traces: TraceEstimates) -> float:
    """``W_N``: ``Q_N`` standardised with the estimates A1 and A2."""
    pair = as_projection(hypothesis, dataset.design.a, dataset.design.d)
    q = q_statistic(dataset, pair.T_W, pair.T_S)
    return w_from_q(q, traces.a1, traces.a2, pair.T_W, dataset.design.n)


# --- chi-square quantiles -------------------------------------------------


def _chi2_logpdf(x: float, f: float) -> float:
    h = 0.5 * f
    return (h - 1.0) * math.log(x) - 0.5 * x - h * math.log(2.0) - special.gammaln(h)


def chi2_quantile(p: float, f: float) -> float:
    """Quantile of ``chi2_f`` at lower-tail probability ``p``.

    Bracketed Newton iteration on the regularised incomplete gamma function,
    started from the Wilson-Hilferty approximation. The tail closer to
    ``p`` is matched (upper tail via ``gammaincc``) to keep relative accuracy.
    """
    if not 0.0 < p < 1.0:
        raise SplitPlotError(f"probability must lie in (0, 1), got {p}")
    if not f > 0:
        raise SplitPlotError(f"degrees of freedom must be positive, got {f}")
    h = 0.5 * f
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def resid(x):
        if upper:
            return target - special.gammaincc(h, 0.5 * x)
        return special.gammainc(h, 0.5 * x) - target

    z = special.ndtri(p)
    c = 2.0 / (9.0 * f)
    x = f * max(1.0 - c + z * math.sqrt(c), 1e-3) ** 3
    lo, hi = 0.0, max(x, 1.0)
    while resid(hi) < 0:
        lo, hi = hi, 2.0 * hi
    x = min(max(x, lo), hi)
    for _ in range(200):
        r = resid(x)
        if r == 0.0:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        dens = math.exp(_chi2_logpdf(x, f)) if x > 0 else math.inf
        step = r / dens if 1e-280 < dens < math.inf else math.nan
        nxt = x - step
        if not (lo < nxt < hi) or not math.isfinite(nxt):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-14 * max(1.0, x) or hi - lo <= 1e-14 * max(1.0, hi):
            return nxt
        x = nxt
    return x


def kf_quantile(f: float, alpha: float) -> float:
    """``(1 - alpha)``-quantile of ``K_f = (chi2_f - f)/sqrt(2 f)``.

    ``f = inf`` (and any ``f`` above ``1e7``) gives the normal quantile.
    """
    if not 0.0 < alpha < 1.0:
        raise SplitPlotError(f"alpha must lie in (0, 1), got {alpha}")
    if not f > 0:
        raise SplitPlotError(f"degrees of freedom must be positive, got {f}")
    if f > NORMAL_SWITCH_DF:
        return float(special.ndtri(1.0 - alpha))
    q = chi2_quantile(1.0 - alpha, f)
    return (q - f) / math.sqrt(2.0 * f)


def kf_sf(w: float, f: float) -> float:
    """``P(K_f > w)``."""
    if f > NORMAL_SWITCH_DF:
        return float(special.ndtr(-w))
    x = f + w * math.sqrt(2.0 * f)
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * f, 0.5 * x))


# --- the test -------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    """Outcome of the three tests on one dataset.

    ``p_value`` is ``P(K_f > W_N)`` at the estimated ``f``; it is a
    convenience and not part of the level-alpha decisions.
    """

    __test__ = False

    hypothesis: str
    design_n: tuple[int, ...]
    d: int
    q: float
    w: float
    traces: TraceEstimates
    eta: float
    f_hat: float
    critical: dict
    p_value: float
    decisions: dict
    alpha: float
    seed: int
    elapsed: float = field(default=0.0, compare=False)

    @property
    def tau_hat(self) -> float:
        return 0.0 if math.isinf(self.f_hat) else 1.0 / self.f_hat


def critical_values(f: float, alpha: float) -> dict:
    """Critical values of ``psi_z``, ``psi_chi`` and ``phi_star``."""
    return {
        "psi_z": float(special.ndtri(1.0 - alpha)),
        "psi_chi": kf_quantile(1.0, alpha),
        "phi_star": kf_quantile(f, alpha),
    }


def run_test(
    dataset: DataSet,
    hypothesis="interaction",
    alpha: float = 0.05,
    upsilon: float = 0.05,
    seed: int = 0,
    *,
    c1_mode: str = "subsampled",
    label: str | None = None,
) -> TestResult:
    """Test ``T mu = 0`` with the estimated standardised quadratic form.

    Computes A1, A2 and C1* from one Gram pass, ``W_N``, the estimated
    degrees of freedom ``A2^3 / C1*^2 * eta`` and the three decisions.
    """
    started = time.perf_counter()
    if not 0.0 < alpha < 1.0:
        raise SplitPlotError(f"alpha must lie in (0, 1), got {alpha}")
    design = dataset.design
    diag = validate_design(design)
    if not diag.all_feasible:
        raise InfeasibleDesignError(diag.message(), diagnostics=diag)
    pair: ProjectionPair = as_projection(hypothesis, design.a, design.d)
    if label is None:
        label = hypothesis if isinstance(hypothesis, str) else getattr(hypothesis, "kind", "custom")

    cache = gram(dataset, pair.T_S)
    traces = estimate_traces(cache, mode=c1_mode, upsilon=upsilon, seed=seed)
    q = q_statistic(dataset, pair.T_W, pair.T_S)
    w = w_from_q(q, traces.a1, traces.a2, pair.T_W, design.n)
    eta_value = eta(pair.T_W, design.n)
    f = f_hat(traces.a2, traces.c1, eta_value)
    crit = critical_values(f, alpha)
    decisions = {name: bool(w > crit[name]) for name in TEST_NAMES}
    return TestResult(
        hypothesis=label,
        design_n=design.n,
        d=design.d,
        q=q,
        w=w,
        traces=traces,
        eta=eta_value,
        f_hat=f,
        critical=crit,
        p_value=kf_sf(w, f),
        decisions=decisions,
        alpha=float(alpha),
        seed=int(seed),
        elapsed=time.perf_counter() - started,
    )
