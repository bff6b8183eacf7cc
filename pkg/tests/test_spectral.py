"""Pivoted Cholesky, eigensolvers, projections, and representative sets."""

import numpy as np
import pytest

from wkernel.core import LogLikMatrix, WeightVector, posterior_var, third_cumulant
from wkernel.errors import InvalidInput, NotPSD
from wkernel.kernels import WMatrix, build_w
from wkernel.spectral import (
    dual_eigen,
    full_eigen,
    incomplete_cholesky,
    project_loglik,
    project_perturbation,
    representative_set,
    subsample_draws,
)


def wmat(values):
    return WMatrix(values=np.asarray(values, dtype=float), kind="raw", source_M=0)


def random_psd(rng, n, rank=None):
    rank = rank or n
    b = rng.standard_normal((n, rank))
    return wmat(b @ b.T)


class TestIncompleteCholesky:
    def test_rank_one_stops_after_one_column(self):
        v = np.array([1.0, -2.0, 0.5])
        chol = incomplete_cholesky(wmat(np.outer(v, v)), rel_tol=1e-10)
        assert chol.a_M == 1
        assert chol.residual_trace <= 1e-12 * chol.trace_w

    def test_hand_pivot_on_diagonal(self):
        chol = incomplete_cholesky(wmat(np.diag([3.0, 1.0])), rel_tol=1e-12, max_rank=2)
        assert chol.pivots[0] == 0
        np.testing.assert_allclose(chol.L[:, 0], [np.sqrt(3.0), 0.0])

    def test_planted_rank_recovered(self):
        rng = np.random.default_rng(42)
        w = random_psd(rng, 10, rank=3)
        chol = incomplete_cholesky(w, rel_tol=1e-10, max_rank=10)
        assert chol.a_M == 3

    def test_reconstruction_and_monotone_residual(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(4, 16))
            w = random_psd(rng, n)
            chol = incomplete_cholesky(w, rel_tol=1e-10, max_rank=n)
            # monitored residual equals actual reconstruction residual
            recon = chol.reconstruct()
            assert np.trace(w.values - recon) == pytest.approx(
                chol.residual_trace, abs=1e-10 * max(chol.trace_w, 1.0)
            )
            hist = chol.residual_trace_history
            assert np.all(np.diff(hist) <= 1e-12 * chol.trace_w)

    def test_residual_not_below_optimal_truncation(self):
        # greedy pivoting can never beat the eigenvalue tail
        rng = np.random.default_rng(6)
        w = random_psd(rng, 12)
        chol = incomplete_cholesky(w, rel_tol=1e-12, max_rank=12)
        evals = np.linalg.eigvalsh(w.values)[::-1]
        for j, res in enumerate(chol.residual_trace_history, start=1):
            assert res >= evals[j:].sum() - 1e-9

    def test_tie_break_lowest_index(self):
        w = wmat(np.diag([2.0, 2.0, 1.0]))
        chol = incomplete_cholesky(w, rel_tol=1e-12, max_rank=3)
        assert chol.pivots[0] == 0
        assert chol.pivots[1] == 1

    def test_not_psd_raises(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(NotPSD):
            incomplete_cholesky(wmat(bad), rel_tol=1e-12, max_rank=2)

    def test_zero_matrix_gives_empty_factor(self):
        chol = incomplete_cholesky(wmat(np.zeros((4, 4))))
        assert chol.a_M == 0

    def test_bad_tolerance(self):
        with pytest.raises(InvalidInput):
            incomplete_cholesky(wmat(np.eye(2)), rel_tol=0.0)


class TestDualEigen:
    def test_identity_factor(self):
        chol = incomplete_cholesky(wmat(np.eye(4)), rel_tol=1e-12, max_rank=4)
        basis = dual_eigen(chol)
        np.testing.assert_allclose(basis.eigenvalues, 1.0)
        # fully degenerate spectrum: the basis is the axes up to ordering
        perm = np.abs(basis.vectors)
        np.testing.assert_allclose(perm @ perm.T, np.eye(4), atol=1e-12)
        assert np.all(np.isin(np.round(perm), [0.0, 1.0]))

    def test_matches_full_eigen(self):
        rng = np.random.default_rng(30)
        for _ in range(10):
            n = int(rng.integers(5, 30))
            w = random_psd(rng, n)
            basis_d = dual_eigen(incomplete_cholesky(w, rel_tol=1e-14, max_rank=n))
            basis_f = full_eigen(w)
            k = basis_d.rank_retained
            np.testing.assert_allclose(
                basis_d.eigenvalues, basis_f.eigenvalues[:k], atol=1e-8
            )
            assert np.all(basis_f.eigenvalues[k:] <= 1e-8 * basis_f.eigenvalues[0])

    def test_exact_rank_count(self):
        rng = np.random.default_rng(31)
        w = random_psd(rng, 10, rank=3)
        basis = dual_eigen(incomplete_cholesky(w, rel_tol=1e-10, max_rank=10))
        assert basis.rank_retained == 3

    def test_vectors_are_eigenvectors(self):
        rng = np.random.default_rng(32)
        w = random_psd(rng, 8)
        basis = dual_eigen(incomplete_cholesky(w, rel_tol=1e-14, max_rank=8))
        lam1 = basis.eigenvalues[0]
        for a in range(basis.rank_retained):
            resid = w.values @ basis.vectors[:, a] - basis.eigenvalues[a] * basis.vectors[:, a]
            assert np.max(np.abs(resid)) <= 1e-6 * lam1
        gram = basis.vectors.T @ basis.vectors
        np.testing.assert_allclose(gram, np.eye(basis.rank_retained), atol=1e-8)


class TestFullEigen:
    def test_diagonal(self):
        basis = full_eigen(wmat(np.diag([5.0, 2.0, 0.0])))
        np.testing.assert_allclose(basis.eigenvalues, [5.0, 2.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(basis.vectors[:, 0]), [1, 0, 0], atol=1e-14)

    def test_hand_two_by_two(self):
        basis = full_eigen(wmat([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(basis.eigenvalues, [3.0, 1.0], atol=1e-12)
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(basis.vectors[:, 0], [s, s], atol=1e-12)
        np.testing.assert_allclose(np.abs(basis.vectors[:, 1]), [s, s], atol=1e-12)

    def test_sign_convention(self):
        rng = np.random.default_rng(8)
        w = random_psd(rng, 6)
        basis = full_eigen(w)
        for a in range(basis.rank_retained):
            col = basis.vectors[:, a]
            assert col[np.argmax(np.abs(col))] > 0

    def test_cap_enforced(self):
        with pytest.raises(InvalidInput):
            full_eigen(wmat(np.eye(5)), cap=4)

    def test_zero_matrix_empty_basis(self):
        basis = full_eigen(wmat(np.zeros((3, 3))))
        assert basis.rank_retained == 0


class TestProjectLogLik:
    def _setup(self, seed=3, m=40, n=8):
        rng = np.random.default_rng(seed)
        ll = LogLikMatrix(rng.standard_normal((m, n)) * rng.uniform(0.5, 2.0, size=n))
        basis = full_eigen(build_w(ll))
        return ll, basis

    def test_complete_basis_identity(self):
        ll, basis = self._setup()
        proj = project_loglik(ll, basis, basis.rank_retained)
        np.testing.assert_allclose(proj.projected_loglik, ll.values, atol=1e-9)

    def test_rank_zero(self):
        ll, basis = self._setup()
        proj = project_loglik(ll, basis, 0)
        np.testing.assert_allclose(proj.projected_loglik, 0.0)
        for i in range(ll.n_obs):
            resid = ll.values[:, i] - proj.projected_loglik[:, i]
            assert posterior_var(resid) == pytest.approx(
                posterior_var(ll.values[:, i]), rel=1e-12
            )

    def test_projection_covariance_is_diagonal(self):
        ll, basis = self._setup()
        proj = project_loglik(ll, basis)
        lam1 = basis.eigenvalues[0]
        centered = proj.projections - proj.projections.mean(axis=0)
        cov = centered.T @ centered / ll.n_draws
        np.testing.assert_allclose(
            cov, np.diag(basis.eigenvalues), atol=1e-6 * max(lam1, 1.0)
        )

    def test_residual_variance_bound(self):
        rng = np.random.default_rng(77)
        for _ in range(15):
            m = int(rng.integers(5, 30))
            n = int(rng.integers(2, 10))
            ll = LogLikMatrix(rng.standard_normal((m, n)) * 2.0)
            basis = full_eigen(build_w(ll))
            for a_m in range(basis.rank_retained + 1):
                proj = project_loglik(ll, basis, a_m)
                tail = basis.eigenvalues[a_m:].sum()
                for i in range(n):
                    resid = ll.values[:, i] - proj.projected_loglik[:, i]
                    assert posterior_var(resid) <= tail + 1e-9 * basis.eigenvalues[0]

    def test_covariance_error_bound(self):
        rng = np.random.default_rng(78)
        ll = LogLikMatrix(rng.standard_normal((25, 6)))
        basis = full_eigen(build_w(ll))
        a = rng.standard_normal(25)
        for a_m in (0, 2, 4, 6):
            proj = project_loglik(ll, basis, a_m)
            tail = basis.eigenvalues[a_m:].sum()
            bound = np.sqrt(posterior_var(a) * tail) + 1e-9
            for i in range(6):
                from wkernel.core import posterior_cov

                gap = posterior_cov(a, ll.values[:, i]) - posterior_cov(
                    a, proj.projected_loglik[:, i]
                )
                assert abs(gap) <= bound

    def test_third_cumulant_error_bound(self):
        rng = np.random.default_rng(79)
        ll = LogLikMatrix(rng.standard_normal((30, 5)))
        basis = full_eigen(build_w(ll))
        a = np.tanh(rng.standard_normal(30))  # bounded statistic
        sup_a = np.max(np.abs(a - a.mean()))
        for a_m in (1, 3):
            proj = project_loglik(ll, basis, a_m)
            tail = np.sqrt(basis.eigenvalues[a_m:].sum())
            for i in range(5):
                for j in range(5):
                    gap = third_cumulant(
                        a, ll.values[:, i], ll.values[:, j]
                    ) - third_cumulant(
                        a, proj.projected_loglik[:, i], proj.projected_loglik[:, j]
                    )
                    bound = (
                        sup_a
                        * (
                            np.sqrt(posterior_var(ll.values[:, i]))
                            + np.sqrt(posterior_var(ll.values[:, j]))
                        )
                        * tail
                        + 1e-9
                    )
                    assert abs(gap) <= bound

    def test_rank_out_of_range(self):
        ll, basis = self._setup()
        with pytest.raises(InvalidInput):
            project_loglik(ll, basis, basis.rank_retained + 1)


class TestProjectPerturbation:
    def test_zero(self):
        rng = np.random.default_rng(50)
        basis = full_eigen(random_psd(rng, 5))
        np.testing.assert_allclose(project_perturbation(np.zeros(5), basis), 0.0)

    def test_first_eigenvector_maps_to_unit(self):
        rng = np.random.default_rng(51)
        basis = full_eigen(random_psd(rng, 5))
        coords = project_perturbation(basis.vectors[:, 0], basis)
        expect = np.zeros(basis.rank_retained)
        expect[0] = 1.0
        np.testing.assert_allclose(coords, expect, atol=1e-10)

    def test_isometry_at_full_rank(self):
        rng = np.random.default_rng(52)
        basis = full_eigen(random_psd(rng, 7))
        eta = rng.standard_normal(7)
        coords = project_perturbation(eta, basis, 7)
        assert np.linalg.norm(coords) == pytest.approx(np.linalg.norm(eta), rel=1e-12)

    def test_accepts_weight_vector(self):
        rng = np.random.default_rng(53)
        basis = full_eigen(random_psd(rng, 4))
        w = WeightVector(np.array([2.0, 1.0, 1.0, 0.0]))
        np.testing.assert_allclose(
            project_perturbation(w, basis), project_perturbation(w.eta, basis)
        )


class TestRepresentativeSet:
    def test_rank_one_single_pivot(self):
        v = np.array([0.5, -3.0, 1.0])
        w = wmat(np.outer(v, v))
        chol = incomplete_cholesky(w, rel_tol=1e-10)
        basis = dual_eigen(chol)
        rset = representative_set(chol, basis)
        assert list(rset.indices) == [1]  # largest diagonal

    def test_reconstruction_matches_direct_projection(self):
        rng = np.random.default_rng(60)
        for _ in range(10):
            n = int(rng.integers(4, 12))
            w = random_psd(rng, n)
            chol = incomplete_cholesky(w, rel_tol=1e-12, max_rank=n)
            basis = dual_eigen(chol)
            rset = representative_set(chol, basis)
            eta = rng.standard_normal(n)
            direct = project_perturbation(eta, basis)
            via_pivots = rset.principal_projection(eta)
            np.testing.assert_allclose(via_pivots, direct, atol=1e-8)

    def test_requires_dual_basis(self):
        rng = np.random.default_rng(61)
        w = random_psd(rng, 5)
        chol = incomplete_cholesky(w, rel_tol=1e-12, max_rank=5)
        with pytest.raises(InvalidInput):
            representative_set(chol, full_eigen(w))

    def test_no_more_near_duplicates_than_diagonal_selection(
        self, regression_est_sigma_bundle
    ):
        # pivoting should not duplicate near-identical covariate points more
        # than plain largest-diagonal selection does
        bundle = regression_est_sigma_bundle
        w = build_w(bundle.loglik)
        chol = incomplete_cholesky(w, rel_tol=1e-10, max_rank=w.n)
        k = 5
        z = bundle.covariates
        pivot_pts = z[chol.pivots[:k]]
        diag_sel = np.argsort(-np.diagonal(w.values))[:k]
        diag_pts = z[diag_sel]

        def close_pairs(pts):
            count = 0
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    if abs(pts[i] - pts[j]) < 0.05:
                        count += 1
            return count

        assert close_pairs(pivot_pts) <= close_pairs(diag_pts)


class TestSubsampleDraws:
    def test_full_subsample_is_identity(self):
        rng = np.random.default_rng(70)
        ll = LogLikMatrix(rng.standard_normal((8, 3)))
        out = subsample_draws(ll, 8, seed=1)
        np.testing.assert_array_equal(out.values, ll.values)

    def test_single_draw_rejected(self):
        ll = LogLikMatrix(np.zeros((5, 2)))
        with pytest.raises(InvalidInput):
            subsample_draws(ll, 1, seed=1)

    def test_seed_determinism(self):
        rng = np.random.default_rng(71)
        ll = LogLikMatrix(rng.standard_normal((30, 4)))
        a = subsample_draws(ll, 10, seed=99)
        b = subsample_draws(ll, 10, seed=99)
        np.testing.assert_array_equal(a.values, b.values)
        c = subsample_draws(ll, 10, seed=100)
        assert not np.array_equal(a.values, c.values)

    def test_rows_keep_original_order(self):
        values = np.arange(40.0).reshape(20, 2)
        ll = LogLikMatrix(values)
        out = subsample_draws(ll, 6, seed=3)
        assert np.all(np.diff(out.values[:, 0]) > 0)
