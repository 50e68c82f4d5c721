"""Seeded Monte Carlo estimation of rejection rates and power curves.

Replication ``r`` draws its noise from stream ``(seed, DATA, r)`` and its
subsampling seed from ``(seed, TEST, r)``. The same noise is reused for
every shift ``delta`` of the alternative (common random numbers), so the
``delta = 0`` row is identical across alternative kinds. Work is split into
contiguous blocks of replications and the per-block rejection counts are
summed, so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import DataSet, Design, as_projection, validate_design
from .engine import TEST_NAMES, critical_values, q_statistic, qf_moments, w_from_q
from .estimators import estimate_traces, f_hat, gram
from .exceptions import InfeasibleDesignError, SplitPlotError
from .kron import CovarianceModel, eta, trace_powers
from .rng import TAG_DATA, TAG_TEST, derive_seed, substream

REFERENCE_SAMPLE_SIZES = (15, 15, 20, 35, 25, 20, 30, 30, 35, 20, 15, 25)
ALTERNATIVES = ("null", "trend", "one-point", "shift")
WORKERS_ENV = "SPLITPLOT_WORKERS"


def reference_sample_sizes(a: int) -> tuple[int, ...]:
    """First ``a`` entries of the unbalanced reference vector, cycled past 12."""
    if a < 1:
        raise SplitPlotError("a must be >= 1")
    k = len(REFERENCE_SAMPLE_SIZES)
    return tuple(REFERENCE_SAMPLE_SIZES[i % k] for i in range(a))


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise SplitPlotError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return 1


def ar_covariance(d: int, rho: float) -> CovarianceModel:
    """Autoregressive covariance ``Sigma_ij = rho^|i-j|``."""
    return CovarianceModel.ar(d, rho)


def alternative_mean(kind: str, delta: float, a: int, d: int) -> np.ndarray:
    """``a x d`` mean table: odd groups (1-based) zero, even groups shifted.

    ``trend``: ``delta * k/d`` at time ``k``; ``one-point``: ``delta`` at the
    first time point; ``shift``: ``delta`` everywhere; ``null``: zeros.
    """
    if kind not in ALTERNATIVES:
        raise SplitPlotError(f"unknown alternative {kind!r}")
    if delta < 0:
        raise SplitPlotError("delta must be nonnegative")
    mu = np.zeros((a, d))
    if kind == "null" or delta == 0:
        return mu
    if kind == "trend":
        pattern = delta * np.arange(1, d + 1) / d
    elif kind == "one-point":
        pattern = np.zeros(d)
        pattern[0] = delta
    else:
        pattern = np.full(d, float(delta))
    mu[1::2] = pattern
    return mu


def sample_dataset(design: Design, means, chol, rng: np.random.Generator) -> DataSet:
    """Draw ``X_ij = mu_i + L z`` with ``z`` standard normal."""
    means = np.asarray(means, dtype=float)
    z = rng.standard_normal((design.N, design.d))
    x = z @ np.asarray(chol).T
    groups = []
    start = 0
    for i, n_i in enumerate(design.n):
        groups.append(x[start:start + n_i] + means[i])
        start += n_i
    return DataSet(design, tuple(groups))


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment."""

    n: tuple[int, ...]
    d: int
    covariance: CovarianceModel
    hypothesis: str = "interaction"
    alternative: str = "null"
    deltas: tuple[float, ...] = (0.0,)
    alpha: float = 0.05
    reps: int = 2000
    upsilon: float = 0.05
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        object.__setattr__(self, "deltas", tuple(float(x) for x in self.deltas))
        if self.reps < 1:
            raise SplitPlotError("reps must be >= 1")
        if not self.deltas or any(x < 0 for x in self.deltas):
            raise SplitPlotError("delta grid must be nonempty and nonnegative")
        if self.alternative not in ALTERNATIVES:
            raise SplitPlotError(f"unknown alternative {self.alternative!r}")
        if self.alternative == "null" and any(x != 0 for x in self.deltas):
            raise SplitPlotError("the null alternative only allows delta = 0")
        if self.alternative == "shift" and self.hypothesis not in ("grand-mean", "time"):
            raise SplitPlotError(
                "the shift alternative is only defined for grand-mean or time hypotheses"
            )
        if self.covariance.d != self.d:
            raise SplitPlotError("covariance dimension does not match d")
        if not 0 < self.alpha < 1:
            raise SplitPlotError("alpha must lie in (0, 1)")

    @property
    def a(self) -> int:
        return len(self.n)

    @property
    def design(self) -> Design:
        return Design(self.n, self.d)


@dataclass(frozen=True)
class SimResult:
    """Rejection counts per ``delta`` and test."""

    config: SimConfig
    counts: np.ndarray  # shape (len(deltas), 3), order TEST_NAMES
    elapsed: float = field(default=0.0, compare=False)

    @property
    def reps(self) -> int:
        return self.config.reps

    @property
    def rates(self) -> np.ndarray:
        return self.counts / self.config.reps

    @property
    def se(self) -> np.ndarray:
        p = self.rates
        return np.sqrt(p * (1 - p) / self.config.reps)

    def rate(self, test: str, delta: float | None = None) -> float:
        k = 0 if delta is None else self.config.deltas.index(float(delta))
        return float(self.rates[k, TEST_NAMES.index(test)])

    def rows(self):
        """``(delta, test, rate, se, reps)`` tuples in grid order."""
        rates, se = self.rates, self.se
        for k, delta in enumerate(self.config.deltas):
            for j, name in enumerate(TEST_NAMES):
                yield delta, name, float(rates[k, j]), float(se[k, j]), self.reps

    def monotone_violations(self, test: str = "phi_star", slack: float = 3.0) -> list:
        """Adjacent ``delta`` pairs where power drops by more than ``slack`` SEs."""
        j = TEST_NAMES.index(test)
        rates, se = self.rates[:, j], self.se[:, j]
        bad = []
        for k in range(1, len(rates)):
            tol = slack * math.hypot(se[k], se[k - 1])
            if rates[k] < rates[k - 1] - tol:
                bad.append((self.config.deltas[k - 1], self.config.deltas[k]))
        return bad


def _run_block(config: SimConfig, start: int, stop: int) -> np.ndarray:
    design = config.design
    pair = as_projection(config.hypothesis, design.a, design.d)
    chol = config.covariance.cholesky
    eta_value = eta(pair.T_W, design.n)
    means = [alternative_mean(config.alternative, dl, design.a, design.d) for dl in config.deltas]
    counts = np.zeros((len(config.deltas), len(TEST_NAMES)), dtype=np.int64)
    for r in range(start, stop):
        noise = sample_dataset(design, np.zeros((design.a, design.d)), chol,
                               substream(config.seed, TAG_DATA, r))
        # A1, A2 and C1* only see within-group differences, so they are
        # computed once from the noise and shared across every delta.
        traces = estimate_traces(
            gram(noise, pair.T_S), upsilon=config.upsilon,
            seed=derive_seed(config.seed, TAG_TEST, r),
        )
        f = f_hat(traces.a2, traces.c1, eta_value)
        crit = critical_values(f, config.alpha)
        limits = np.array([crit[name] for name in TEST_NAMES])
        for k, mu in enumerate(means):
            data = noise if not mu.any() else DataSet(
                design, tuple(g + mu[i] for i, g in enumerate(noise.groups))
            )
            q = q_statistic(data, pair.T_W, pair.T_S)
            w = w_from_q(q, traces.a1, traces.a2, pair.T_W, design.n)
            counts[k] += w > limits
    return counts


def _blocks(reps: int, workers: int) -> list[tuple[int, int]]:
    k = max(1, min(workers * 4, reps))
    edges = np.linspace(0, reps, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def estimate_rejection_rate(config: SimConfig, workers: int | None = None) -> SimResult:
    """Rejection rates of ``psi_z``, ``psi_chi`` and ``phi_star`` per ``delta``."""
    diag = validate_design(config.design)
    if not diag.all_feasible:
        raise InfeasibleDesignError(diag.message(), diagnostics=diag)
    as_projection(config.hypothesis, config.a, config.d)
    workers = workers or config.workers or default_workers()
    started = time.perf_counter()
    blocks = _blocks(config.reps, workers)
    if workers == 1:
        parts = [_run_block(config, a, b) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [config] * len(blocks),
                                  [a for a, _ in blocks], [b for _, b in blocks]))
    counts = np.sum(parts, axis=0)
    return SimResult(config, counts, time.perf_counter() - started)


def power_curve(config: SimConfig, workers: int | None = None) -> SimResult:
    """Rejection rates along the configured ``delta`` grid.

    Check :meth:`SimResult.monotone_violations` for non-monotone stretches.
    """
    return estimate_rejection_rate(config, workers)


def simulate_w_tilde(
    n, covariance: CovarianceModel, hypothesis, reps: int, seed: int = 0,
    *, batch_elems: int = 1 << 22,
) -> np.ndarray:
    """Null draws of ``W~_N`` (exact moments, known ``Sigma``) from full datasets."""
    design = Design(tuple(n), covariance.d)
    pair = as_projection(hypothesis, design.a, design.d)
    mom = qf_moments(trace_powers(pair.T_S, covariance.matrix), pair.T_W, design.n)
    L = covariance.cholesky
    starts = np.cumsum((0,) + design.n[:-1])
    sizes = design.sizes
    batch = max(1, batch_elems // (design.N * design.d))
    out = np.empty(reps)
    for k, lo in enumerate(range(0, reps, batch)):
        hi = min(lo + batch, reps)
        rng = substream(seed, TAG_DATA, k)
        x = rng.standard_normal((hi - lo, design.N, design.d)) @ L.T
        means = np.add.reduceat(x, starts, axis=1) / sizes[None, :, None]
        proj = means @ pair.T_S
        inner = np.einsum("bid,brd->bir", proj, means)
        q = design.N * np.einsum("ir,bir->b", pair.T_W, inner)
        out[lo:hi] = (q - mom.mean) / math.sqrt(mom.variance)
    return out
