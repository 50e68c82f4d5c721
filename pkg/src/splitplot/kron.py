"""Exact Kronecker-structured linear algebra for known covariance matrices.

Everything here works on the ``a x a`` whole-plot and ``d x d`` sub-plot
factors separately; the ``ad x ad`` matrices are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DegenerateError, SplitPlotError

COVARIANCE_FORMS = ("explicit", "ar", "identity", "compound-symmetry")


def centering_matrix(k: int) -> np.ndarray:
    """Centering matrix ``P_k = I_k - J_k / k``."""
    if k < 1:
        raise SplitPlotError(f"centering matrix needs k >= 1, got {k}")
    return np.eye(k) - np.full((k, k), 1.0 / k)


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """A ``d x d`` covariance matrix given by form and parameter.

    Use the constructors :meth:`ar`, :meth:`identity`,
    :meth:`compound_symmetry` or :meth:`explicit`.
    """

    d: int
    form: str
    rho: float = 0.0
    values: np.ndarray | None = None

    @classmethod
    def ar(cls, d: int, rho: float) -> "CovarianceModel":
        if not abs(rho) < 1:
            raise SplitPlotError(f"AR(1) parameter must satisfy |rho| < 1, got {rho}")
        return cls(int(d), "ar", float(rho))

    @classmethod
    def identity(cls, d: int) -> "CovarianceModel":
        return cls(int(d), "identity")

    @classmethod
    def compound_symmetry(cls, d: int, rho: float) -> "CovarianceModel":
        if not (-1.0 / max(d - 1, 1) < rho < 1):
            raise SplitPlotError(f"compound symmetry with rho={rho} is not positive definite")
        return cls(int(d), "compound-symmetry", float(rho))

    @classmethod
    def explicit(cls, matrix) -> "CovarianceModel":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SplitPlotError("covariance matrix must be square")
        return cls(m.shape[0], "explicit", 0.0, m.copy())

    def __post_init__(self):
        if self.d < 1:
            raise SplitPlotError("covariance dimension must be >= 1")
        if self.form not in COVARIANCE_FORMS:
            raise SplitPlotError(f"unknown covariance form {self.form!r}")

    @cached_property
    def matrix(self) -> np.ndarray:
        d = self.d
        if self.form == "identity":
            m = np.eye(d)
        elif self.form == "ar":
            idx = np.arange(d)
            m = self.rho ** np.abs(idx[:, None] - idx[None, :])
        elif self.form == "compound-symmetry":
            m = np.full((d, d), self.rho)
            np.fill_diagonal(m, 1.0)
        else:
            m = self.values
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise SplitPlotError("covariance matrix is not symmetric")
        ev = np.linalg.eigvalsh(m)
        if ev[0] <= 1e-10 * ev[-1]:
            raise SplitPlotError("covariance matrix is not positive definite")
        m = m.copy()
        m.setflags(write=False)
        return m

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor ``L`` with ``L L^T = Sigma``."""
        return np.linalg.cholesky(self.matrix)

    def spec(self) -> str:
        """Short text form, e.g. ``ar:0.6``."""
        if self.form == "ar":
            return f"ar:{self.rho!r}"
        if self.form == "compound-symmetry":
            return f"cs:{self.rho!r}"
        return self.form


@dataclass(frozen=True)
class TraceSet:
    """``tr((T_S Sigma)^k)`` for k = 1, 2, 3."""

    t1: float
    t2: float
    t3: float


def trace_powers(T_S, sigma) -> TraceSet:
    """Exact trace powers of ``T_S Sigma`` up to the third."""
    T_S = np.asarray(T_S, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if T_S.shape != sigma.shape or T_S.ndim != 2 or T_S.shape[0] != T_S.shape[1]:
        raise SplitPlotError(
            f"dimension mismatch: T_S {T_S.shape}, Sigma {sigma.shape}"
        )
    m = T_S @ sigma
    m2 = m @ m
    # tr(AB) = sum(A * B^T) avoids the third product
    return TraceSet(
        float(np.trace(m)), float(np.trace(m2)), float(np.sum(m2 * m.T))
    )


def _whole_plot_factor(T_W, n) -> np.ndarray:
    T_W = np.asarray(T_W, dtype=float)
    n = np.asarray(n, dtype=float)
    if T_W.shape != (n.size, n.size):
        raise SplitPlotError(f"T_W shape {T_W.shape} does not match {n.size} groups")
    if np.any(n < 1):
        raise SplitPlotError("group sizes must be >= 1")
    return (n.sum() / n)[:, None] * T_W


def eta(T_W, n) -> float:
    """Whole-plot factor ``tr^3((D T_W)^2) / tr^2((D T_W)^3)``, ``D = diag(N/n_i)``."""
    dt = _whole_plot_factor(T_W, n)
    dt2 = dt @ dt
    s2 = np.trace(dt2)
    s3 = np.sum(dt2 * dt.T)
    if abs(s3) <= 1e-14 * max(abs(s2), 1.0) ** 1.5:
        raise DegenerateError("degenerate whole-plot factor: tr((D T_W)^3) = 0")
    return float(s2**3 / s3**2)


@dataclass(frozen=True)
class BetaSpectrum:
    """Eigenvalues of ``T V_N T`` in decreasing order and their normalization."""

    lambdas: np.ndarray
    betas: np.ndarray

    @property
    def beta1(self) -> float:
        return float(self.betas[0])


def _psd_eigvals(m: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    top = max(np.max(np.abs(ev)), 0.0)
    ev = np.where((ev < 0) & (ev >= -1e-12 * top), 0.0, ev)
    return ev


def spectrum_tvt(T_W, T_S, sigma, n) -> BetaSpectrum:
    """Spectrum of ``T V_N T`` from its two Kronecker factors.

    ``T V_N T = (T_W D T_W) kron (T_S Sigma T_S)`` with ``D = diag(N/n_i)``,
    so its eigenvalues are all pairwise products of the factor eigenvalues.
    """
    T_W = np.asarray(T_W, dtype=float)
    T_S = np.asarray(T_S, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if T_S.shape != sigma.shape:
        raise SplitPlotError(f"dimension mismatch: T_S {T_S.shape}, Sigma {sigma.shape}")
    n = np.asarray(n, dtype=float)
    dt = _whole_plot_factor(T_W, n)
    whole = _psd_eigvals(T_W @ dt)
    sub = _psd_eigvals(T_S @ sigma @ T_S)
    lambdas = np.sort(np.outer(whole, sub).ravel())[::-1]
    scale = np.sqrt(np.sum(lambdas**2))
    if scale == 0.0:
        raise DegenerateError("null hypothesis matrix annihilates covariance")
    return BetaSpectrum(lambdas, lambdas / scale)


def f_p_exact(T_W, T_S, sigma, n) -> tuple[float, float]:
    """Degrees of freedom ``f_P`` of the K_f approximation and ``tau_P = 1/f_P``.

    ``f_P = [tr^3((T_S Sigma)^2) / tr^2((T_S Sigma)^3)] * eta``.
    """
    tr = trace_powers(T_S, sigma)
    if tr.t3 == 0.0:
        raise DegenerateError("degenerate sub-plot factor: tr((T_S Sigma)^3) = 0")
    f = tr.t2**3 / tr.t3**2 * eta(T_W, n)
    return float(f), float(1.0 / f)
