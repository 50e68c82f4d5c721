import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from splitplot import (
    DataSet,
    Design,
    HypothesisSpec,
    ProjectionPair,
    build_projection,
    canonical_hypothesis,
    decompose_effects,
    validate_design,
)
from splitplot.design import as_projection
from splitplot.exceptions import DegenerateError, SplitPlotError

from oracles import centering, pinv_projection

P2 = np.array([[0.5, -0.5], [-0.5, 0.5]])


class TestDesign:
    def test_totals(self):
        design = Design((15, 15, 20), 5)
        assert design.a == 3
        assert design.N == 50

    @pytest.mark.parametrize("n, d", [((), 3), ((3, 0), 2), ((4,), 0)])
    def test_rejects_bad_shapes(self, n, d):
        with pytest.raises(SplitPlotError):
            Design(n, d)

    def test_dataset_checks_shapes(self):
        with pytest.raises(SplitPlotError):
            DataSet(Design((2, 2), 3), (np.zeros((2, 3)), np.zeros((2, 2))))

    def test_dataset_rejects_nan(self):
        bad = np.zeros((2, 2))
        bad[1, 1] = np.nan
        with pytest.raises(SplitPlotError, match="non-finite"):
            DataSet.from_groups([np.zeros((2, 2)), bad])

    def test_from_groups_and_means(self):
        ds = DataSet.from_groups([[[1.0, 2.0], [3.0, 4.0]], [[0.0, 0.0]]], ["x", "y"])
        assert ds.design.n == (2, 1)
        assert ds.labels == ("x", "y")
        np.testing.assert_array_equal(ds.group_means(), [[2.0, 3.0], [0.0, 0.0]])


class TestBuildProjection:
    def test_two_sample_contrast(self):
        np.testing.assert_allclose(build_projection([[1.0, -1.0]]), P2, atol=1e-15)

    def test_identity(self):
        np.testing.assert_allclose(build_projection(np.eye(4)), np.eye(4), atol=1e-14)

    def test_rank_deficient_matches_pinv(self, rng):
        H = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 5))
        T = build_projection(H)
        np.testing.assert_allclose(T, pinv_projection(H), atol=1e-10)
        np.testing.assert_allclose(T @ T, T, atol=1e-10)
        assert np.linalg.matrix_rank(T, tol=1e-8) == 2

    def test_zero_contrast(self):
        with pytest.raises(DegenerateError, match="degenerate contrast"):
            build_projection(np.zeros((2, 3)))

    @given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)),
                  elements=st.floats(-10, 10, allow_subnormal=False)))
    def test_projection_invariants(self, H):
        if np.abs(H).max() < 1e-3:
            return
        T = build_projection(H)
        np.testing.assert_allclose(T, T.T, atol=1e-10)
        np.testing.assert_allclose(T @ T, T, atol=1e-8)
        # H lies in the range of T
        np.testing.assert_allclose(H @ T, H, atol=1e-8 * max(1.0, np.abs(H).max()))


class TestCanonicalHypothesis:
    def test_grand_mean(self):
        pair = canonical_hypothesis("grand-mean", 2, 2)
        np.testing.assert_allclose(pair.T_W, np.full((2, 2), 0.5))
        np.testing.assert_allclose(pair.T_S, np.full((2, 2), 0.5))

    def test_interaction(self):
        pair = canonical_hypothesis("interaction", 2, 2)
        np.testing.assert_allclose(pair.T_W, P2)
        np.testing.assert_allclose(pair.T_S, P2)

    def test_time_ranks(self):
        pair = canonical_hypothesis("time", 3, 4)
        np.testing.assert_allclose(pair.T_W, np.full((3, 3), 1 / 3))
        np.testing.assert_allclose(pair.T_S, centering(4))
        assert np.linalg.matrix_rank(pair.T_W) == 1
        assert np.linalg.matrix_rank(pair.T_S) == 3

    @pytest.mark.parametrize("a, d", [(1, 4), (3, 1)])
    def test_interaction_rank_zero(self, a, d):
        with pytest.raises(DegenerateError, match="rank-zero factor"):
            canonical_hypothesis("interaction", a, d)

    def test_unknown_kind(self):
        with pytest.raises(SplitPlotError):
            canonical_hypothesis("bogus", 2, 2)

    def test_custom_spec(self):
        spec = HypothesisSpec("custom", H_W=[[1, -1, 0]], H_S=np.eye(2))
        pair = spec.projection(3, 2)
        assert np.linalg.matrix_rank(pair.T_W) == 1
        with pytest.raises(SplitPlotError):
            spec.projection(4, 2)

    def test_as_projection_checks_shape(self):
        pair = canonical_hypothesis("interaction", 3, 3)
        assert as_projection(pair, 3, 3) is pair
        with pytest.raises(SplitPlotError):
            as_projection(pair, 2, 3)

    def test_pair_rejects_non_projection(self):
        with pytest.raises(SplitPlotError):
            ProjectionPair(np.array([[2.0]]), np.eye(2))
        with pytest.raises(DegenerateError):
            ProjectionPair(np.zeros((2, 2)), np.eye(2))


class TestDecomposeEffects:
    def test_zero(self):
        eff = decompose_effects(np.zeros((3, 4)))
        assert eff.grand == 0
        assert not eff.alpha.any() and not eff.beta.any() and not eff.gamma.any()

    def test_constant(self):
        eff = decompose_effects(np.full((2, 3), 7.5))
        assert eff.grand == 7.5
        np.testing.assert_allclose(eff.gamma, 0, atol=1e-15)

    def test_identity_table(self):
        eff = decompose_effects([[1.0, 0.0], [0.0, 1.0]])
        assert eff.grand == 0.5
        np.testing.assert_allclose(eff.alpha, [0, 0])
        np.testing.assert_allclose(eff.beta, [0, 0])
        np.testing.assert_allclose(eff.gamma, [[0.5, -0.5], [-0.5, 0.5]])

    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                  elements=st.floats(-1e3, 1e3)))
    def test_sum_to_zero_and_reconstruct(self, mu):
        eff = decompose_effects(mu)
        scale = max(1.0, np.abs(mu).max())
        assert abs(eff.alpha.sum()) <= 1e-12 * scale * mu.shape[0]
        assert abs(eff.beta.sum()) <= 1e-12 * scale * mu.shape[1]
        np.testing.assert_allclose(eff.gamma.sum(axis=0), 0, atol=1e-11 * scale)
        np.testing.assert_allclose(eff.gamma.sum(axis=1), 0, atol=1e-11 * scale)
        np.testing.assert_allclose(eff.reconstruct(), mu, rtol=1e-12, atol=1e-12 * scale)


class TestValidateDesign:
    def test_all_feasible(self):
        assert validate_design(Design((6, 6), 2)).all_feasible

    def test_small_groups(self):
        diag = validate_design(Design((3, 3), 2))
        assert diag.feasible("A1")
        assert not diag.feasible("A2") and not diag.feasible("C1")
        assert "groups with at least 6 observations" in diag.message()

    def test_reference_prefix(self):
        diag = validate_design(Design((15, 15, 20, 35), 10))
        assert diag.all_feasible
        assert diag.eligible["C1"] == (0, 1, 2, 3)

    def test_exclusions_listed(self):
        diag = validate_design(Design((8, 5, 3), 2))
        assert diag.excluded("C1") == (1, 2)
        assert diag.excluded("A2") == (2,)
        assert "ignores groups" in diag.message()
