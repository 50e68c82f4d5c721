"""Split-plot designs, datasets, hypotheses and effect decompositions.

Data for group ``i`` is an ``n_i x d`` array whose rows are subjects and
whose columns are time points. Mean tables are ``a x d`` arrays in
group-by-time order, so the stacked mean vector ``(mu_1, ..., mu_a)`` is the
row-major flattening and ``T_W kron T_S`` applies to it without permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DegenerateError, SplitPlotError

HYPOTHESIS_KINDS = ("group", "time", "interaction", "grand-mean", "custom")

# Minimum group size for each trace estimator.
ESTIMATOR_MIN_SIZE = {"A1": 2, "A2": 4, "C1": 6}

_PROJ_TOL = 1e-10


@dataclass(frozen=True)
class Design:
    """Group structure of a split-plot design."""

    n: tuple[int, ...]
    d: int

    def __post_init__(self):
        n = tuple(int(x) for x in self.n)
        object.__setattr__(self, "n", n)
        if len(n) < 1:
            raise SplitPlotError("design needs at least one group")
        if any(x < 1 for x in n):
            raise SplitPlotError(f"group sizes must be >= 1, got {n}")
        if int(self.d) < 1:
            raise SplitPlotError(f"dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def a(self) -> int:
        return len(self.n)

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.n, dtype=float)


@dataclass(frozen=True)
class DataSet:
    """Observations of a split-plot design, one ``n_i x d`` array per group."""

    design: Design
    groups: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=float) for g in self.groups)
        if len(groups) != self.design.a:
            raise SplitPlotError(
                f"expected {self.design.a} groups, got {len(groups)}"
            )
        for i, (g, n_i) in enumerate(zip(groups, self.design.n)):
            if g.shape != (n_i, self.design.d):
                raise SplitPlotError(
                    f"group {i} has shape {g.shape}, expected {(n_i, self.design.d)}"
                )
            if not np.all(np.isfinite(g)):
                raise SplitPlotError(f"group {i} contains non-finite values")
        object.__setattr__(self, "groups", groups)
        labels = tuple(str(x) for x in self.labels) or tuple(
            str(i + 1) for i in range(self.design.a)
        )
        if len(labels) != self.design.a:
            raise SplitPlotError("one label per group required")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_groups(cls, groups: Sequence, labels: Sequence[str] = ()) -> "DataSet":
        arrs = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
        if not arrs:
            raise SplitPlotError("no groups given")
        d = arrs[0].shape[1]
        design = Design(tuple(g.shape[0] for g in arrs), d)
        return cls(design, tuple(arrs), tuple(labels))

    def group_means(self) -> np.ndarray:
        """Return the ``a x d`` table of group mean vectors."""
        return np.vstack([g.mean(axis=0) for g in self.groups])


def _check_projection(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise SplitPlotError(f"{name} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise SplitPlotError(f"{name} has non-finite entries")
    if np.max(np.abs(mat)) == 0.0:
        raise DegenerateError(f"{name} is the zero matrix (rank-zero factor)")
    if np.max(np.abs(mat - mat.T)) > _PROJ_TOL:
        raise SplitPlotError(f"{name} is not symmetric")
    if np.max(np.abs(mat @ mat - mat)) > _PROJ_TOL:
        raise SplitPlotError(f"{name} is not idempotent")
    return mat


@dataclass(frozen=True)
class ProjectionPair:
    """Whole-plot and sub-plot projections with ``T = T_W kron T_S``."""

    T_W: np.ndarray
    T_S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "T_W", _check_projection(self.T_W, "T_W"))
        object.__setattr__(self, "T_S", _check_projection(self.T_S, "T_S"))

    @property
    def a(self) -> int:
        return self.T_W.shape[0]

    @property
    def d(self) -> int:
        return self.T_S.shape[0]

    def full(self) -> np.ndarray:
        """Dense ``ad x ad`` projection. Only meant for small checks."""
        return np.kron(self.T_W, self.T_S)


def build_projection(H) -> np.ndarray:
    """Projection ``H^T (H H^T)^- H`` onto the row space of a contrast matrix.

    The generalized inverse comes from a symmetric eigendecomposition of
    ``H H^T``; eigenvalues below ``1e-12`` times the largest are dropped, so
    rank-deficient contrasts are handled.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if not np.all(np.isfinite(H)):
        raise SplitPlotError("contrast matrix has non-finite entries")
    if np.max(np.abs(H), initial=0.0) == 0.0:
        raise DegenerateError("degenerate contrast: H is all zero")
    vals, vecs = np.linalg.eigh(H @ H.T)
    keep = vals > vals.max() * 1e-12
    ginv = (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T
    T = H.T @ ginv @ H
    return 0.5 * (T + T.T)


def _averaging(k: int) -> np.ndarray:
    return np.full((k, k), 1.0 / k)


def _centering(k: int) -> np.ndarray:
    return np.eye(k) - _averaging(k)


def canonical_hypothesis(kind: str, a: int, d: int) -> ProjectionPair:
    """Projection pair of one of the standard split-plot hypotheses.

    ``group``: no group effect, ``(P_a, J_d/d)``.
    ``time``: no time effect, ``(J_a/a, P_d)``.
    ``interaction``: no group-by-time interaction, ``(P_a, P_d)``.
    ``grand-mean``: overall mean zero, ``(J_a/a, J_d/d)``.
    """
    if a < 1 or d < 1:
        raise SplitPlotError(f"need a >= 1 and d >= 1, got a={a}, d={d}")
    if kind == "group":
        factors = (_centering(a), _averaging(d))
    elif kind == "time":
        factors = (_averaging(a), _centering(d))
    elif kind == "interaction":
        factors = (_centering(a), _centering(d))
    elif kind == "grand-mean":
        factors = (_averaging(a), _averaging(d))
    else:
        raise SplitPlotError(
            f"unknown hypothesis kind {kind!r}; expected one of "
            "group, time, interaction, grand-mean"
        )
    for mat, size, name in ((factors[0], a, "a"), (factors[1], d, "d")):
        if size == 1 and np.allclose(mat, 0.0):
            raise DegenerateError(
                f"rank-zero factor: hypothesis {kind!r} is empty for {name}=1"
            )
    return ProjectionPair(*factors)


@dataclass(frozen=True)
class HypothesisSpec:
    """A canonical hypothesis by name, or a custom Kronecker contrast.

    For ``kind="custom"`` give the whole-plot contrast ``H_W`` (``a``
    columns) and the sub-plot contrast ``H_S`` (``d`` columns).
    """

    kind: str
    H_W: np.ndarray | None = None
    H_S: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in HYPOTHESIS_KINDS:
            raise SplitPlotError(f"unknown hypothesis kind {self.kind!r}")
        if self.kind == "custom" and (self.H_W is None or self.H_S is None):
            raise SplitPlotError("custom hypothesis needs both H_W and H_S")

    def projection(self, a: int, d: int) -> ProjectionPair:
        if self.kind != "custom":
            return canonical_hypothesis(self.kind, a, d)
        H_W = np.atleast_2d(np.asarray(self.H_W, dtype=float))
        H_S = np.atleast_2d(np.asarray(self.H_S, dtype=float))
        if H_W.shape[1] != a or H_S.shape[1] != d:
            raise SplitPlotError(
                f"custom contrasts have {H_W.shape[1]} and {H_S.shape[1]} "
                f"columns, design needs {a} and {d}"
            )
        return ProjectionPair(build_projection(H_W), build_projection(H_S))

    @property
    def label(self) -> str:
        return self.kind


def as_projection(hypothesis, a: int, d: int) -> ProjectionPair:
    """Coerce a kind string, :class:`HypothesisSpec` or pair to a pair."""
    if isinstance(hypothesis, ProjectionPair):
        if hypothesis.a != a or hypothesis.d != d:
            raise SplitPlotError("projection pair does not match the design")
        return hypothesis
    if isinstance(hypothesis, str):
        hypothesis = HypothesisSpec(hypothesis)
    return hypothesis.projection(a, d)


@dataclass(frozen=True)
class EffectDecomposition:
    """Grand mean, group, time and interaction effects of a mean table."""

    grand: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.grand + self.alpha[:, None] + self.beta[None, :] + self.gamma


def decompose_effects(mu) -> EffectDecomposition:
    """Split an ``a x d`` mean table into sum-to-zero effects."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    if not np.all(np.isfinite(mu)):
        raise SplitPlotError("mean table has non-finite entries")
    grand = float(mu.mean())
    row = mu.mean(axis=1)
    col = mu.mean(axis=0)
    alpha = row - grand
    beta = col - grand
    gamma = mu - row[:, None] - col[None, :] + grand
    return EffectDecomposition(grand, alpha, beta, gamma)


@dataclass(frozen=True)
class DesignDiagnostics:
    """Which groups each trace estimator can use."""

    n: tuple[int, ...]
    eligible: dict[str, tuple[int, ...]]

    def feasible(self, estimator: str) -> bool:
        return len(self.eligible[estimator]) > 0

    @property
    def all_feasible(self) -> bool:
        return all(self.feasible(k) for k in self.eligible)

    def excluded(self, estimator: str) -> tuple[int, ...]:
        used = set(self.eligible[estimator])
        return tuple(i for i in range(len(self.n)) if i not in used)

    def message(self, required: Sequence[str] = ("A1", "A2", "C1")) -> str:
        lines = []
        for est in required:
            k = ESTIMATOR_MIN_SIZE[est]
            if not self.feasible(est):
                lines.append(
                    f"{est} is infeasible: it needs groups with at least {k} "
                    f"observations, group sizes are {list(self.n)}"
                )
            elif self.excluded(est):
                lines.append(
                    f"{est} ignores groups {list(self.excluded(est))} "
                    f"(fewer than {k} observations)"
                )
        return "\n".join(lines)


def validate_design(design: Design) -> DesignDiagnostics:
    """Report per-estimator group eligibility (A1: n_i>=2, A2: n_i>=4, C1: n_i>=6)."""
    eligible = {
        est: tuple(i for i, n_i in enumerate(design.n) if n_i >= k)
        for est, k in ESTIMATOR_MIN_SIZE.items()
    }
    return DesignDiagnostics(design.n, eligible)
