import numpy as np
import pytest

from connclf.eros import (
    EigenSummary,
    ErosWeights,
    eigen_summary,
    eros_similarity,
    eros_weights,
    knn_same_class,
)


def summary_from(rng, n_time=12, n_rois=5, r=2):
    return eigen_summary(rng.standard_normal((n_time, n_rois)), r)


def direct_similarity(a, b, w):
    """Independent evaluation: sum_i w_i * |<a_i, b_i>|."""
    total = 0.0
    for i in range(a.rank):
        total += w.w[i] * abs(float(a.eigenvectors[:, i] @ b.eigenvectors[:, i]))
    return total


class TestEigenSummary:
    def test_duplicated_column_is_rank_one(self, rng):
        u = rng.standard_normal(10)
        s = eigen_summary(np.column_stack([u, u]), r=2)
        assert s.eigenvalues[1] == 0.0  # clamped exactly
        np.testing.assert_allclose(
            np.abs(s.eigenvectors[:, 0]), 1.0 / np.sqrt(2.0), atol=1e-9
        )

    def test_diagonal_covariance(self):
        # column sums of squares 8 and 2 over T-1=2 give variances 4 and 1,
        # and the columns are exactly orthogonal after centering
        col0 = np.array([-2.0, 0.0, 2.0])
        col1 = np.array([1.0, -2.0, 1.0]) / np.sqrt(3.0)
        s = eigen_summary(np.column_stack([col0, col1]), r=2)
        np.testing.assert_allclose(s.eigenvalues, [4.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(np.abs(s.eigenvectors), np.eye(2), atol=1e-12)

    def test_sample_covariance_uses_t_minus_one(self):
        # two timepoints, squared deviations sum to 2 -> variance 2/(2-1)
        s = eigen_summary(np.array([[0.0, 0.0], [2.0, 0.0]]) , r=1)
        assert s.eigenvalues[0] == pytest.approx(2.0, abs=1e-12)

    def test_full_rank_reconstructs_covariance(self, rng):
        data = rng.standard_normal((20, 5))
        s = eigen_summary(data, r=5)
        cov = np.cov(data, rowvar=False)
        recon = (s.eigenvectors * s.eigenvalues) @ s.eigenvectors.T
        np.testing.assert_allclose(recon, cov, atol=1e-9)

    def test_eigenvalues_descending(self, rng):
        for _ in range(10):
            s = summary_from(rng, n_rois=6, r=6)
            assert np.all(np.diff(s.eigenvalues) <= 0)

    def test_rank_bounds(self, rng):
        data = rng.standard_normal((6, 3))
        with pytest.raises(ValueError):
            eigen_summary(data, r=0)
        with pytest.raises(ValueError):
            eigen_summary(data, r=4)

    def test_single_timepoint_rejected(self):
        with pytest.raises(ValueError):
            eigen_summary(np.ones((1, 3)), r=1)

    def test_validation_catches_bad_inputs(self):
        eye = np.eye(2)
        with pytest.raises(ValueError, match="descending"):
            EigenSummary(np.array([1.0, 2.0]), eye)
        with pytest.raises(ValueError, match="non-negative"):
            EigenSummary(np.array([1.0, -0.5]), eye)
        with pytest.raises(ValueError, match="unit-norm"):
            EigenSummary(np.array([2.0, 1.0]), 2.0 * eye)
        skew = np.array([[1.0, 0.8], [0.0, 0.6]])
        with pytest.raises(ValueError, match="orthogonal"):
            EigenSummary(np.array([2.0, 1.0]), skew)


class TestErosWeights:
    def test_single_subject_worked_example(self):
        s = EigenSummary(np.array([3.0, 1.0]), np.eye(2))
        w = eros_weights([s])
        np.testing.assert_allclose(w.w, [0.75, 0.25], atol=1e-12)

    def test_two_subject_worked_example(self):
        s1 = EigenSummary(np.array([1.0, 1.0]), np.eye(2))
        s2 = EigenSummary(np.array([3.0, 1.0]), np.eye(2))
        w = eros_weights([s1, s2])
        np.testing.assert_allclose(w.w, [0.625, 0.375], atol=1e-12)

    def test_zero_spectrum_contributes_uniform(self):
        zero = EigenSummary(np.array([0.0, 0.0]), np.eye(2))
        other = EigenSummary(np.array([3.0, 1.0]), np.eye(2))
        with pytest.warns(RuntimeWarning, match="uniform"):
            w = eros_weights([zero, other])
        np.testing.assert_allclose(w.w, [0.625, 0.375], atol=1e-12)

    def test_matches_direct_aggregation(self, rng):
        summaries = [summary_from(rng) for _ in range(7)]
        w = eros_weights(summaries)
        rows = np.stack(
            [s.eigenvalues / s.eigenvalues.sum() for s in summaries]
        )
        expected = rows.mean(axis=0)
        expected = expected / expected.sum()
        np.testing.assert_allclose(w.w, expected, atol=1e-12)
        assert w.w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_item_order_invariance(self, rng):
        summaries = [summary_from(rng) for _ in range(6)]
        w_fwd = eros_weights(summaries)
        w_rev = eros_weights(summaries[::-1])
        np.testing.assert_allclose(w_fwd.w, w_rev.w, atol=1e-12)

    def test_mixed_ranks_rejected(self, rng):
        with pytest.raises(ValueError, match="rank"):
            eros_weights([summary_from(rng, r=2), summary_from(rng, r=3)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            eros_weights([])

    def test_weight_type_validation(self):
        with pytest.raises(ValueError, match="non-negative"):
            ErosWeights(np.array([1.5, -0.5]))
        with pytest.raises(ValueError, match="sum to 1"):
            ErosWeights(np.array([0.7, 0.7]))


class TestErosSimilarity:
    def test_self_similarity_is_one(self, rng):
        s = summary_from(rng)
        w = eros_weights([s])
        assert eros_similarity(s, s, w) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self, rng):
        w = None
        for _ in range(30):
            a, b = summary_from(rng), summary_from(rng)
            w = eros_weights([a, b])
            assert abs(
                eros_similarity(a, b, w) - eros_similarity(b, a, w)
            ) <= 1e-12

    def test_range(self, rng):
        for _ in range(30):
            a, b = summary_from(rng), summary_from(rng)
            w = eros_weights([a, b])
            sim = eros_similarity(a, b, w)
            assert 0.0 <= sim <= 1.0 + 1e-12

    def test_sign_flip_invariance_exact(self, rng):
        a, b = summary_from(rng), summary_from(rng)
        w = eros_weights([a, b])
        flipped = EigenSummary(b.eigenvalues, b.eigenvectors * np.array([-1.0, 1.0]))
        assert eros_similarity(a, b, w) == eros_similarity(a, flipped, w)

    def test_orthogonal_summaries_score_zero(self):
        eye = np.eye(4)
        a = EigenSummary(np.array([2.0, 1.0]), eye[:, :2])
        b = EigenSummary(np.array([2.0, 1.0]), eye[:, 2:])
        w = eros_weights([a, b])
        assert eros_similarity(a, b, w) == 0.0

    def test_matches_direct_formula(self, rng):
        for _ in range(50):
            a, b = summary_from(rng), summary_from(rng)
            w = eros_weights([a, b])
            assert eros_similarity(a, b, w) == pytest.approx(
                direct_similarity(a, b, w), abs=1e-12
            )

    def test_rank_mismatch_rejected(self, rng):
        a = summary_from(rng, r=2)
        b = summary_from(rng, r=3)
        w = eros_weights([a])
        with pytest.raises(ValueError, match="rank"):
            eros_similarity(a, b, w)

    def test_roi_mismatch_rejected(self, rng):
        a = summary_from(rng, n_rois=4)
        b = summary_from(rng, n_rois=5)
        w = eros_weights([a])
        with pytest.raises(ValueError, match="ROI"):
            eros_similarity(a, b, w)


class TestKnnSameClass:
    def test_identical_subjects_tie_break_by_index(self, rng):
        data = rng.standard_normal((8, 3))
        summaries = [eigen_summary(data, 2) for _ in range(4)]
        labels = [1, 1, 1, 1]
        w = eros_weights(summaries)
        assert knn_same_class(2, summaries, labels, 2, w) == [0, 1]

    def test_matches_exhaustive_ranking(self, rng):
        summaries = [summary_from(rng) for _ in range(10)]
        labels = np.array([0, 1] * 5)
        w = eros_weights(summaries)
        got = knn_same_class(4, summaries, labels, 3, w)
        candidates = [i for i in range(10) if i != 4 and labels[i] == labels[4]]
        ranked = sorted(
            candidates,
            key=lambda i: (-eros_similarity(summaries[4], summaries[i], w), i),
        )
        assert got == ranked[:3]

    def test_other_class_never_returned(self, rng):
        summaries = [summary_from(rng) for _ in range(8)]
        labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        w = eros_weights(summaries)
        for k in (1, 2, 3):
            got = knn_same_class(5, summaries, labels, k, w)
            assert all(labels[i] == 1 for i in got)
            assert 5 not in got

    def test_k_clamped_with_warning(self, rng):
        summaries = [summary_from(rng) for _ in range(3)]
        labels = [1, 1, 1]
        w = eros_weights(summaries)
        with pytest.warns(RuntimeWarning, match="clamped"):
            got = knn_same_class(0, summaries, labels, 5, w)
        assert sorted(got) == [1, 2]

    def test_no_candidates_rejected(self, rng):
        summaries = [summary_from(rng) for _ in range(3)]
        labels = [1, 0, 0]
        w = eros_weights(summaries)
        with pytest.raises(ValueError, match="no same-class"):
            knn_same_class(0, summaries, labels, 1, w)

    def test_bad_k_rejected(self, rng):
        summaries = [summary_from(rng) for _ in range(3)]
        w = eros_weights(summaries)
        with pytest.raises(ValueError, match="k must be"):
            knn_same_class(0, summaries, [1, 1, 1], 0, w)
