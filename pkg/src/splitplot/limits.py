"""Limit laws of the standardised quadratic form.

Under the null and normal data the standardised statistic is distributed as
``sum_s beta_s (C_s - 1)/sqrt(2)`` with ``C_s`` i.i.d. chi-square(1) and
``beta`` the normalised spectrum of ``T V_N T``. This module samples that
law (optionally truncated, with a Gaussian remainder), classifies which
limit regime a spectrum is close to, and measures how far the ``K_f``
quantiles are from the mixture quantiles.

The regime thresholds are finite-sample heuristics for reporting only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import kf_quantile
from .exceptions import SplitPlotError
from .rng import TAG_BOOTSTRAP, TAG_MIXTURE, substream

REGIMES = ("normal", "chi1", "finite-mixture", "infinite-mixture")
_NORM_TOL = 1e-10
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class RegimeReport:
    beta1: float
    r_effective: int
    tag: str
    thresh_low: float
    thresh_high: float
    mass_cut: float
    boundary: bool = False


def _betas(betas) -> np.ndarray:
    b = np.asarray(betas, dtype=float).ravel()
    if np.any(b < -_NORM_TOL):
        raise SplitPlotError("spectrum weights must be nonnegative")
    return np.sort(np.clip(b, 0.0, None))[::-1]


def effective_rank(betas, mass_cut: float = 0.99) -> int:
    """Smallest ``r`` with ``sum_{s<=r} beta_s^2 >= mass_cut``.

    Returns ``len(betas) + 1`` when the given weights never reach the cut,
    which only happens for a partial spectrum.
    """
    b = _betas(betas)
    cum = np.cumsum(b**2)
    hit = np.nonzero(cum >= mass_cut - _NORM_TOL)[0]
    return int(hit[0]) + 1 if hit.size else b.size + 1


def classify_regime(
    betas,
    thresh_low: float = 0.05,
    thresh_high: float = 0.95,
    mass_cut: float = 0.99,
    *,
    partial: bool = False,
) -> RegimeReport:
    """Tag a normalised spectrum with the limit law it is closest to.

    ``normal`` when ``beta_1 <= thresh_low``, ``chi1`` when
    ``beta_1 >= thresh_high``, otherwise a mixture. ``infinite-mixture`` is
    only reported for a ``partial`` spectrum whose weights do not reach
    ``mass_cut``. ``boundary`` flags a ``beta_1`` within 1e-9 of a threshold.
    """
    b = _betas(betas)
    if b.size == 0:
        raise SplitPlotError("empty spectrum")
    mass = float(np.sum(b**2))
    if mass > 1 + _NORM_TOL or (not partial and abs(mass - 1) > _NORM_TOL):
        raise SplitPlotError(f"spectrum is not normalised (sum of squares {mass})")
    beta1 = float(b[0])
    r = effective_rank(b, mass_cut)
    if beta1 <= thresh_low + 1e-12:
        tag = "normal"
    elif beta1 >= thresh_high - 1e-12:
        tag = "chi1"
    elif r > b.size:
        tag = "infinite-mixture"
    else:
        tag = "finite-mixture"
    boundary = min(abs(beta1 - thresh_low), abs(beta1 - thresh_high)) < 1e-9
    return RegimeReport(beta1, r, tag, thresh_low, thresh_high, mass_cut, boundary)


def sample_mixture(
    betas,
    m_samples: int,
    seed: int = 0,
    *,
    r: int | None = None,
    max_terms: int = 2000,
) -> np.ndarray:
    """Draw from ``sum_{s<=r} b_s (C_s - 1)/sqrt(2) + sqrt(1 - sum b_s^2) Z``.

    The first ``r`` weights (default: all, capped at ``max_terms``) enter as
    chi-square terms; the remaining mass goes to the Gaussian term. Chunk
    ``k`` of the output comes from stream ``(seed, k)``.
    """
    b = _betas(betas)
    mass = float(np.sum(b**2))
    if mass > 1 + _NORM_TOL:
        raise SplitPlotError(f"weights have squared mass {mass} > 1")
    if r is None:
        r = b.size
    r = int(min(r, b.size, max_terms))
    head = b[:r]
    rest = np.sqrt(max(0.0, 1.0 - float(np.sum(head**2))))
    m_samples = int(m_samples)
    out = np.empty(m_samples)
    rows = max(1, _CHUNK_ELEMS // max(r, 1))
    for k, start in enumerate(range(0, m_samples, rows)):
        stop = min(start + rows, m_samples)
        rng = substream(seed, TAG_MIXTURE, k)
        size = stop - start
        acc = np.zeros(size)
        if r:
            z = rng.standard_normal((size, r))
            acc += ((z * z - 1.0) / np.sqrt(2.0)) @ head
        if rest > 0:
            acc += rest * rng.standard_normal(size)
        out[start:stop] = acc
    return out


def _quantile_with_se(sample: np.ndarray, alpha: float, seed: int, n_boot: int):
    q = float(np.quantile(sample, 1.0 - alpha))
    rng = substream(seed, TAG_BOOTSTRAP)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        res = sample[rng.integers(0, sample.size, sample.size)]
        boots[b] = np.quantile(res, 1.0 - alpha)
    return q, float(np.std(boots, ddof=1))


def mixture_quantile(
    betas, alpha: float, m_samples: int = 200_000, seed: int = 0, *, n_boot: int = 100
) -> tuple[float, float]:
    """Monte Carlo ``(1 - alpha)``-quantile of the mixture and its bootstrap SE."""
    if not 0 < alpha < 1:
        raise SplitPlotError(f"alpha must lie in (0, 1), got {alpha}")
    sample = sample_mixture(betas, m_samples, seed)
    return _quantile_with_se(sample, alpha, seed, n_boot)


@dataclass(frozen=True)
class ApproximationRow:
    alpha: float
    mixture_quantile: float
    mixture_se: float
    kf_quantile: float

    @property
    def gap(self) -> float:
        """``K_f`` quantile minus mixture quantile."""
        return self.kf_quantile - self.mixture_quantile


def approximation_error(
    betas,
    f_p: float,
    alpha_grid=(0.01, 0.05, 0.1),
    m_samples: int = 200_000,
    seed: int = 0,
    *,
    n_boot: int = 50,
) -> list[ApproximationRow]:
    """Signed quantile gaps between ``K_{f_P}`` and the mixture limit."""
    sample = sample_mixture(betas, m_samples, seed)
    rows = []
    for k, alpha in enumerate(alpha_grid):
        q, se = _quantile_with_se(sample, alpha, seed + k, n_boot)
        rows.append(ApproximationRow(float(alpha), q, se, kf_quantile(f_p, alpha)))
    return rows
