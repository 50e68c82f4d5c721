"""Within-group U-statistic estimators of ``tr((T_S Sigma)^k)``, k = 1, 2, 3.

All kernels are inner products of projected within-group differences
``Y_{l,m} = T_S (X_l - X_m)``. Since ``T_S`` is a symmetric projection,

    Y_{l1,l2}^T Y_{k1,k2} = G[l1,k1] - G[l1,k2] - G[l2,k1] + G[l2,k2]

with the Gram matrix ``G[l,k] = X_l^T T_S X_k``. After one Gram pass per
group every kernel evaluation is O(1) and independent of ``d``.

The order-4 and order-6 sums are evaluated through the pair matrix
``B[p,q] = Y_p^T Y_q`` over unordered index pairs ``p, q``, with entries for
overlapping pairs set to zero:

* A2 sums ``B[p,q]^2`` over ordered pairs of disjoint pairs,
* C1 sums ``B[p,q] B[q,r] B[r,p]`` over pairwise disjoint pairs, i.e.
  ``tr(B^3)``. The product is unchanged by flipping the orientation of any
  pair and by permuting the three pairs, which is the 48-fold symmetry of
  the ordered 6-tuple kernel.

Groups smaller than an estimator's order are left out of both the sum and
its normaliser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .design import DataSet
from .exceptions import InfeasibleDesignError, SplitPlotError, TermCapExceeded
from .rng import TAG_SUBSAMPLE, substream

DEFAULT_TERM_CAP = 10**8
# Draws processed per block in the subsampled estimator.
_DRAW_BLOCK = 1 << 16
# Largest group whose C(n,2) x C(n,2) pair matrix is materialised.
_PAIR_MATRIX_MAX_N = 120
# Groups up to this size draw 6-tuples from random permutations.
_PERMUTE_MAX_N = 11


@dataclass(frozen=True)
class GramCache:
    """Per-group Gram matrices ``G_i = X_i T_S X_i^T``."""

    grams: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.grams)


def gram(dataset: DataSet, T_S) -> GramCache:
    """Build the Gram cache of a dataset under the sub-plot projection."""
    T_S = np.asarray(T_S, dtype=float)
    d = dataset.design.d
    if T_S.shape != (d, d):
        raise SplitPlotError(f"T_S has shape {T_S.shape}, data has d={d}")
    grams = []
    for x in dataset.groups:
        g = (x @ T_S) @ x.T
        grams.append(0.5 * (g + g.T))
    return GramCache(tuple(grams))


def _as_cache(data, T_S) -> GramCache:
    if isinstance(data, GramCache):
        return data
    if T_S is None:
        raise SplitPlotError("T_S is required when passing a dataset")
    return gram(data, T_S)


@lru_cache(maxsize=128)
def _pair_tables(n: int):
    """Incidence matrix, disjointness mask and pair index table for size ``n``.

    Row ``p`` of the incidence matrix ``E`` is ``e_i - e_j`` for the pair
    ``p = (i, j)``, ``i < j``, so ``E G E^T`` holds all pair kernels.
    """
    i, j = np.triu_indices(n, k=1)
    P = i.size
    E = np.zeros((P, n))
    E[np.arange(P), i] = 1.0
    E[np.arange(P), j] = -1.0
    disjoint = (
        (i[:, None] != i[None, :])
        & (i[:, None] != j[None, :])
        & (j[:, None] != i[None, :])
        & (j[:, None] != j[None, :])
    ).astype(float)
    pid = np.full((n, n), -1, dtype=np.intp)
    pid[i, j] = np.arange(P)
    pid[j, i] = np.arange(P)
    for arr in (E, disjoint, pid):
        arr.setflags(write=False)
    return E, disjoint, pid


def pair_matrix(G: np.ndarray) -> np.ndarray:
    """Kernels ``Y_p^T Y_q`` over unordered pairs, zero where pairs overlap."""
    n = G.shape[0]
    if n > _PAIR_MATRIX_MAX_N:
        raise SplitPlotError(f"pair matrix for n={n} is too large")
    E, disjoint, _ = _pair_tables(n)
    return (E @ G @ E.T) * disjoint


def _squared_pair_sum(G: np.ndarray, block: int = 2048) -> float:
    """Sum of squared disjoint-pair kernels of one group."""
    n = G.shape[0]
    if n <= _PAIR_MATRIX_MAX_N:
        b = pair_matrix(G)
        return float(np.sum(b * b))
    i, j = np.triu_indices(n, k=1)
    total = 0.0
    for start in range(0, i.size, block):
        bi, bj = i[start:start + block], j[start:start + block]
        rows = G[bi] - G[bj]
        b = rows[:, i] - rows[:, j]
        overlap = (
            (bi[:, None] == i[None, :]) | (bi[:, None] == j[None, :])
            | (bj[:, None] == i[None, :]) | (bj[:, None] == j[None, :])
        )
        b[overlap] = 0.0
        total += float(np.sum(b * b))
    return total


def a1(data, T_S=None) -> float:
    """Unbiased estimator of ``tr(T_S Sigma)``.

    Sum over pairs ``l < m`` of ``(X_l - X_m)^T T_S (X_l - X_m)`` divided by
    ``sum_i n_i (n_i - 1)``.
    """
    cache = _as_cache(data, T_S)
    num = 0.0
    den = 0
    for G in cache.grams:
        n = G.shape[0]
        if n < 2:
            continue
        # sum_{l<m} (G_ll + G_mm - 2 G_lm) = n tr(G) - sum(G)
        num += n * np.trace(G) - G.sum()
        den += n * (n - 1)
    if den == 0:
        raise InfeasibleDesignError("A1 requires n_i >= 2 in at least one group")
    return float(num / den)


def a2(data, T_S=None) -> float:
    """Unbiased estimator of ``tr((T_S Sigma)^2)``.

    Squared kernels over ``l1 > l2``, ``k1 > k2`` with all four indices
    distinct, divided by ``24 * sum_i C(n_i, 4)``. Nonnegative.
    """
    cache = _as_cache(data, T_S)
    num = 0.0
    den = 0
    for G in cache.grams:
        n = G.shape[0]
        if n < 4:
            continue
        num += _squared_pair_sum(G)
        den += 24 * math.comb(n, 4)
    if den == 0:
        raise InfeasibleDesignError("A2 requires n_i >= 4 in at least one group")
    return num / den


def ordered_six_tuples(n_sizes) -> int:
    """Number of ordered distinct 6-tuples summed by the exact estimator."""
    return sum(720 * math.comb(int(n), 6) for n in n_sizes)


def c1_exact(data, T_S=None, term_cap: int | None = DEFAULT_TERM_CAP) -> float:
    """Unbiased estimator of ``tr((T_S Sigma)^3)`` by full enumeration.

    Equals ``(1/8) sum Lambda_1 Lambda_2 Lambda_3`` over all ordered distinct
    6-tuples of each group, divided by ``6! * sum_j C(n_j, 6)``. ``term_cap``
    bounds the number of ordered 6-tuples; pass ``None`` to disable it.
    """
    cache = _as_cache(data, T_S)
    sizes = [n for n in cache.sizes if n >= 6]
    if not sizes:
        raise InfeasibleDesignError("C1 requires n_i >= 6 in at least one group")
    terms = ordered_six_tuples(sizes)
    if term_cap is not None and terms > term_cap:
        raise TermCapExceeded(
            f"exact C1 needs {terms} ordered 6-tuples (cap {term_cap}); "
            "use c1_subsampled instead"
        )
    num = 0.0
    for G in cache.grams:
        if G.shape[0] < 6:
            continue
        b = pair_matrix(G)
        # tr(B^3) counts each triple of disjoint pairs 3! times
        num += float(np.sum((b @ b) * b)) / 6.0
    # Each of the 15 pair matchings of a 6-set stands for 48 ordered tuples;
    # with the 1/8 prefactor: 48 / 8 / 720 = 1 / 120 per matching term.
    return num / (120.0 * sum(math.comb(n, 6) for n in sizes))


def subsample_sizes(n_sizes, upsilon: float) -> tuple[int, ...]:
    """Draw counts ``w_i = ceil(upsilon * C(n_i, 6))``; zero for ``n_i < 6``.

    ``upsilon`` is taken at its decimal value, so ``0.05 * 1623160`` is
    exactly 81158 rather than one more.
    """
    if not upsilon > 0:
        raise SplitPlotError(f"upsilon must be positive, got {upsilon}")
    ups = Fraction(repr(float(upsilon)))
    return tuple(
        math.ceil(ups * math.comb(int(n), 6)) if n >= 6 else 0 for n in n_sizes
    )


def _draw_six(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """``size`` independent uniform ordered 6-tuples of distinct indices < n.

    Returned as a ``6 x size`` array, one tuple per column. Rejection
    sampling: columns with a repeated index are redrawn, which leaves the
    accepted tuples uniform over ordered distinct tuples. Small groups take
    the first six entries of random permutations instead.
    """
    if n <= _PERMUTE_MAX_N:
        # acceptance rate is below 20% here; use the head of random permutations
        keys = rng.random((size, n))
        return np.ascontiguousarray(np.argsort(keys, axis=1)[:, :6].T.astype(np.int32))
    idx = rng.integers(0, n, size=(6, size), dtype=np.int32)
    todo = None
    while True:
        t = idx if todo is None else idx[:, todo]
        dup = t[0] == t[1]
        for c1, c2 in _COLUMN_PAIRS[1:]:
            dup |= t[c1] == t[c2]
        bad = np.flatnonzero(dup) if todo is None else todo[dup]
        if not bad.size:
            return idx
        idx[:, bad] = rng.integers(0, n, size=(6, bad.size), dtype=np.int32)
        todo = bad


_COLUMN_PAIRS = tuple((c1, c2) for c1 in range(6) for c2 in range(c1 + 1, 6))


def _kernel_products(G: np.ndarray, t: np.ndarray, tables=None) -> np.ndarray:
    """``Lambda_1 Lambda_2 Lambda_3`` for each tuple (column) of ``t``."""
    l1, l2, l3, l4, l5, l6 = t
    if tables is not None:
        b, pid = tables
        n, P = pid.shape[0], b.shape[0]
        pf, bf = pid.ravel(), b.ravel()
        p12, p34, p56 = pf[l1 * n + l2], pf[l3 * n + l4], pf[l5 * n + l6]
        # orientation signs cancel: each pair enters two of the three factors
        return bf[p12 * P + p34] * bf[p34 * P + p56] * bf[p56 * P + p12]

    def inner(a, b, c, e):
        return G[a, c] - G[a, e] - G[b, c] + G[b, e]

    return inner(l1, l2, l3, l4) * inner(l3, l4, l5, l6) * inner(l5, l6, l1, l2)


def c1_subsampled(data, T_S=None, *, upsilon: float = 0.05, seed: int = 0) -> float:
    """Subsampled estimator ``C1*`` of ``tr((T_S Sigma)^3)``.

    Group ``i`` contributes ``w_i`` independent uniform ordered 6-tuples of
    distinct subjects, drawn from stream ``(seed, group index)``. The sum of
    kernel products is divided by ``8 * sum_i w_i``.
    """
    cache = _as_cache(data, T_S)
    w = subsample_sizes(cache.sizes, upsilon)
    if sum(w) == 0:
        raise InfeasibleDesignError("C1* requires n_i >= 6 in at least one group")
    num = 0.0
    for i, (G, w_i) in enumerate(zip(cache.grams, w)):
        if w_i == 0:
            continue
        rng = substream(seed, TAG_SUBSAMPLE, i)
        n = G.shape[0]
        tables = None
        if n <= _PAIR_MATRIX_MAX_N and w_i >= n * n:
            E, _, pid = _pair_tables(n)
            tables = (E @ G @ E.T, pid)
        for start in range(0, w_i, _DRAW_BLOCK):
            t = _draw_six(rng, n, min(_DRAW_BLOCK, w_i - start))
            num += float(np.sum(_kernel_products(G, t, tables)))
    return num / (8.0 * sum(w))


_HUGE = 1e-300


def f_hat(a2_value: float, c1_value: float, eta_value: float) -> float:
    """Estimated degrees of freedom ``A2^3 / C1^2 * eta``.

    Returns ``inf`` when ``C1`` is (numerically) zero, which selects the
    normal limit.
    """
    if a2_value < 0:
        raise SplitPlotError("A2 must be nonnegative")
    if eta_value <= 0:
        raise SplitPlotError("eta must be positive")
    if abs(c1_value) < _HUGE:
        return math.inf
    f = a2_value**3 / c1_value**2 * eta_value
    return f if math.isfinite(f) else math.inf


@dataclass(frozen=True)
class TraceEstimates:
    """Trace estimates of one dataset and the groups each one used."""

    a1: float
    a2: float
    c1: float
    c1_mode: str
    groups_used: dict
    subsample_sizes: tuple[int, ...] = ()
    upsilon: float | None = None
    seed: int | None = None


def estimate_traces(
    data,
    T_S=None,
    *,
    mode: str = "subsampled",
    upsilon: float = 0.05,
    seed: int = 0,
    term_cap: int | None = DEFAULT_TERM_CAP,
) -> TraceEstimates:
    """Compute A1, A2 and C1 (exact) or C1* (subsampled) from one Gram pass."""
    cache = _as_cache(data, T_S)
    sizes = cache.sizes
    used = {
        "A1": tuple(i for i, n in enumerate(sizes) if n >= 2),
        "A2": tuple(i for i, n in enumerate(sizes) if n >= 4),
        "C1": tuple(i for i, n in enumerate(sizes) if n >= 6),
    }
    if mode == "subsampled":
        c1 = c1_subsampled(cache, upsilon=upsilon, seed=seed)
        return TraceEstimates(
            a1(cache), a2(cache), c1, mode, used,
            subsample_sizes(sizes, upsilon), float(upsilon), int(seed),
        )
    if mode == "exact":
        c1 = c1_exact(cache, term_cap=term_cap)
        return TraceEstimates(a1(cache), a2(cache), c1, mode, used)
    raise SplitPlotError(f"unknown C1 mode {mode!r}")
