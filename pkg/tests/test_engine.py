import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from splitplot import (
    CovarianceModel,
    DataSet,
    Design,
    canonical_hypothesis,
    kf_quantile,
    q_statistic,
    qf_moments,
    run_test,
    trace_powers,
    w_estimated,
    w_standardized,
)
from splitplot.engine import chi2_quantile, critical_values, kf_sf, w_from_q
from splitplot.estimators import TraceEstimates, a1, a2, gram
from splitplot.exceptions import DegenerateError, InfeasibleDesignError, SplitPlotError
from splitplot.kron import TraceSet
from splitplot.simulation import sample_dataset, simulate_w_tilde
from splitplot.rng import substream

from oracles import ar_matrix, centering, dense_moments, dense_q, kf_quantile_oracle


def _ds(*groups):
    return DataSet.from_groups([np.asarray(g, dtype=float) for g in groups])


class TestQStatistic:
    def test_zero_data(self):
        ds = _ds(np.zeros((3, 2)), np.zeros((4, 2)))
        assert q_statistic(ds, centering(2), centering(2)) == 0.0

    def test_hand_case(self):
        ds = _ds([[1.0]], [[-1.0]])
        assert q_statistic(ds, centering(2), np.eye(1)) == pytest.approx(4.0)

    @pytest.mark.parametrize("kind", ["interaction", "group", "time", "grand-mean"])
    def test_dense_kronecker(self, rng, kind):
        groups = [rng.standard_normal((n, 4)) + rng.standard_normal(4) for n in (3, 5, 2)]
        pair = canonical_hypothesis(kind, 3, 4)
        expect = dense_q(groups, pair.T_W, pair.T_S)
        assert q_statistic(_ds(*groups), pair.T_W, pair.T_S) == pytest.approx(expect, rel=1e-11, abs=1e-12)

    def test_shape_check(self):
        with pytest.raises(SplitPlotError):
            q_statistic(_ds(np.zeros((2, 2))), np.eye(2), np.eye(2))


class TestMoments:
    def test_direct_formula(self):
        mom = qf_moments(TraceSet(3.0, 3.0, 3.0), np.eye(2), [4, 4])
        assert (mom.mean, mom.variance) == (12.0, 48.0)

    def test_zero_whole_plot(self):
        mom = qf_moments(TraceSet(3.0, 3.0, 3.0), np.zeros((2, 2)), [4, 4])
        assert (mom.mean, mom.variance) == (0.0, 0.0)

    @pytest.mark.parametrize("kind", ["interaction", "time", "grand-mean"])
    def test_dense(self, kind):
        pair = canonical_hypothesis(kind, 3, 4)
        sigma, n = ar_matrix(4, 0.6), [15, 15, 20]
        mom = qf_moments(trace_powers(pair.T_S, sigma), pair.T_W, n)
        mean, var = dense_moments(pair.T_W, pair.T_S, sigma, n)
        assert mom.mean == pytest.approx(mean, rel=1e-12)
        assert mom.variance == pytest.approx(var, rel=1e-12)

    def test_monte_carlo(self):
        n, d = (15, 15), 5
        cov = CovarianceModel.ar(d, 0.6)
        pair = canonical_hypothesis("interaction", 2, d)
        w = simulate_w_tilde(n, cov, "interaction", 100_000, seed=5)
        mom = qf_moments(trace_powers(pair.T_S, cov.matrix), pair.T_W, n)
        q = w * math.sqrt(mom.variance) + mom.mean
        se_mean = q.std() / math.sqrt(q.size)
        assert abs(q.mean() - mom.mean) < 4 * se_mean
        # variance of the sample variance for a non-normal sample
        m4 = np.mean((q - q.mean()) ** 4)
        se_var = math.sqrt((m4 - q.var() ** 2) / q.size)
        assert abs(q.var() - mom.variance) < 4 * se_var


class TestStandardization:
    def test_mean_gives_zero(self):
        assert w_from_q(12.0, 3.0, 3.0, np.eye(2), [4, 4]) == 0.0

    def test_zero_a2(self):
        with pytest.raises(DegenerateError):
            w_from_q(1.0, 1.0, 0.0, np.eye(2), [4, 4])

    def test_exact_traces_reproduce_w_tilde(self, rng):
        sigma = ar_matrix(3, 0.6)
        ds = _ds(rng.standard_normal((6, 3)), rng.standard_normal((8, 3)))
        tr = trace_powers(centering(3), sigma)
        exact = TraceEstimates(tr.t1, tr.t2, tr.t3, "exact", {})
        assert w_estimated(ds, "interaction", exact) == w_standardized(ds, "interaction", sigma)

    def test_common_shift_invariance(self, rng):
        groups = [rng.standard_normal((7, 4)) for _ in range(3)]
        c = rng.standard_normal(4) * 5
        ds, moved = _ds(*groups), _ds(*(g + c for g in groups))
        tr = TraceEstimates(1.0, 2.0, 3.0, "exact", {})
        assert w_estimated(moved, "interaction", tr) == pytest.approx(
            w_estimated(ds, "interaction", tr), rel=1e-9, abs=1e-9)

    def test_rank_one_limit(self):
        cov = CovarianceModel.ar(3, 0.6)
        w = simulate_w_tilde((15, 15), cov, "grand-mean", 100_000, seed=2)
        ref = stats.chi2(1, loc=-1 / math.sqrt(2), scale=1 / math.sqrt(2))
        assert stats.kstest(w, ref.cdf).statistic < 0.02

    def test_large_spectrum_moments(self):
        cov = CovarianceModel.ar(40, 0.3)
        w = simulate_w_tilde((15, 15, 20), cov, "interaction", 40_000, seed=3)
        se = 1 / math.sqrt(w.size)
        assert abs(w.mean()) < 4 * se
        assert abs(w.var() - 1) < 4 * math.sqrt(np.mean(w**4) - 1) * se

    def test_estimated_null_mean(self):
        d, n = 50, (15, 15, 20, 35)
        design = Design(n, d)
        L = CovarianceModel.ar(d, 0.6).cholesky
        zeros = np.zeros((4, d))
        ws = []
        for r in range(1500):
            ds = sample_dataset(design, zeros, L, substream(8, r))
            cache = gram(ds, centering(d))
            tr = TraceEstimates(a1(cache), a2(cache), 0.0, "exact", {})
            ws.append(w_estimated(ds, "interaction", tr))
        ws = np.array(ws)
        assert abs(ws.mean()) < 0.05 + 3 * ws.std() / math.sqrt(ws.size)


class TestChiSquare:
    @pytest.mark.parametrize("f", [0.3, 1.0, 2.5, 10.0, 123.4, 5e4, 3e6])
    @pytest.mark.parametrize("p", [1e-6, 0.01, 0.5, 0.95, 0.999999])
    def test_against_scipy(self, f, p):
        assert chi2_quantile(p, f) == pytest.approx(stats.chi2.ppf(p, f), rel=1e-9)

    @pytest.mark.parametrize("f, p", [(1.0, 0.95), (7.0, 0.99), (0.5, 0.9)])
    def test_against_mpmath(self, f, p):
        mpmath.mp.dps = 30
        x = mpmath.findroot(
            lambda x: mpmath.gammainc(f / 2, 0, x / 2, regularized=True) - p,
            stats.chi2.ppf(p, f),
        )
        assert chi2_quantile(p, f) == pytest.approx(float(x), rel=1e-11)

    @pytest.mark.parametrize("p, f", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
    def test_domain(self, p, f):
        with pytest.raises(SplitPlotError):
            chi2_quantile(p, f)


class TestKfQuantile:
    def test_one_df(self):
        assert kf_quantile(1, 0.05) == pytest.approx(2.00921, abs=1e-5)

    def test_median_one_df(self):
        assert kf_quantile(1, 0.5) == pytest.approx(-0.38542, abs=1e-5)

    def test_infinite(self):
        assert kf_quantile(math.inf, 0.05) == pytest.approx(1.6448536, abs=1e-7)

    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
    def test_large_f_is_normal(self, alpha):
        assert abs(kf_quantile(1e8, alpha) - stats.norm.ppf(1 - alpha)) <= 1e-3

    @given(st.floats(0.05, 1e6), st.floats(0.001, 0.5))
    def test_oracle(self, f, alpha):
        assert kf_quantile(f, alpha) == pytest.approx(kf_quantile_oracle(f, alpha), rel=1e-8, abs=1e-9)

    @given(st.floats(0.5, 1e5), st.floats(0.01, 0.2))
    def test_sf_inverts_quantile(self, f, alpha):
        assert kf_sf(kf_quantile(f, alpha), f) == pytest.approx(alpha, rel=1e-7)

    def test_decreasing_in_f(self):
        qs = [kf_quantile(f, 0.05) for f in (1, 2, 5, 20, 100, 1e4)]
        assert all(x > y for x, y in zip(qs, qs[1:]))


class TestRunTest:
    def _data(self, seed=0, n=(10, 12, 9), d=6, shift=0.0):
        rng = np.random.default_rng(seed)
        groups = [rng.standard_normal((k, d)) for k in n]
        groups[1] = groups[1] + shift * np.linspace(0, 1, d)
        return _ds(*groups)

    def test_fields(self):
        res = run_test(self._data(), "interaction", seed=3)
        assert set(res.decisions) == {"psi_z", "psi_chi", "phi_star"}
        assert res.critical["psi_z"] == pytest.approx(1.6448536)
        assert res.critical["psi_chi"] == pytest.approx(2.00921, abs=1e-5)
        assert 0 <= res.p_value <= 1
        assert res.tau_hat == pytest.approx(1 / res.f_hat)

    def test_deterministic(self):
        ds = self._data()
        assert run_test(ds, "time", seed=11) == run_test(ds, "time", seed=11)

    def test_f_one_critical_values_coincide(self):
        crit = critical_values(1.0, 0.05)
        assert crit["phi_star"] == crit["psi_chi"]

    def test_rejects_strong_alternative(self):
        res = run_test(self._data(shift=6.0), "interaction")
        assert all(res.decisions.values())

    def test_infeasible(self):
        with pytest.raises(InfeasibleDesignError, match="at least 6 observations") as info:
            run_test(self._data(n=(5, 5)))
        assert info.value.diagnostics is not None

    def test_bad_alpha(self):
        with pytest.raises(SplitPlotError):
            run_test(self._data(), alpha=1.5)
