import numpy as np
import pytest

from sceneval.fad import (
    DimensionMismatch,
    EigenFailure,
    FadResult,
    GaussianStats,
    NotSymmetric,
    TooFewSamples,
    fad_score,
    fit_gaussian,
    frechet_distance,
    sqrtm_psd,
)
from sceneval.features import EmbeddingSet


def random_spd(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim))
    return scale * (a @ a.T / dim + 0.1 * np.eye(dim))


def random_stats(rng, dim):
    return GaussianStats(
        mean=rng.standard_normal(dim),
        covariance=random_spd(rng, dim),
        sample_count=100,
    )


def oracle_frechet(mu_r, cov_r, mu_g, cov_g, dps=60):
    """Independent high-precision evaluation of the distance.

    Eigendecomposes the (non-symmetric) covariance product directly with
    mpmath instead of going through the symmetric reformulation under test.
    """
    from mpmath import mp, mpf, sqrt

    with mp.workdps(dps):
        product = mp.matrix(
            [
                [
                    sum(mpf(float(cov_r[i, k])) * mpf(float(cov_g[k, j])) for k in range(len(mu_r)))
                    for j in range(len(mu_r))
                ]
                for i in range(len(mu_r))
            ]
        )
        eigenvalues, _ = mp.eig(product)
        trace_sqrt = mpf(0)
        for lam in eigenvalues:
            re = mp.re(lam)
            assert abs(mp.im(lam)) < 1e-20 * max(1, abs(re))
            trace_sqrt += sqrt(re) if re > 0 else mpf(0)
        mean_term = sum((mpf(float(a)) - mpf(float(b))) ** 2 for a, b in zip(mu_r, mu_g))
        trace_term = (
            sum(mpf(float(cov_r[i, i])) for i in range(len(mu_r)))
            + sum(mpf(float(cov_g[i, i])) for i in range(len(mu_r)))
            - 2 * trace_sqrt
        )
        return float(mean_term + trace_term)


class TestFitGaussian:
    def test_two_point_example(self):
        stats = fit_gaussian(EmbeddingSet(vectors=np.array([[1, 2], [3, 4]], dtype=np.float32)))
        assert stats.mean == pytest.approx([2.0, 3.0])
        assert stats.covariance == pytest.approx(np.array([[2.0, 2.0], [2.0, 2.0]]))
        assert stats.sample_count == 2

    def test_identical_vectors_zero_covariance(self):
        vectors = np.tile(np.array([1.5, -2.0, 0.25], dtype=np.float32), (7, 1))
        stats = fit_gaussian(EmbeddingSet(vectors=vectors))
        assert np.allclose(stats.covariance, 0.0)

    def test_single_vector_rejected(self):
        with pytest.raises(TooFewSamples):
            fit_gaussian(EmbeddingSet(vectors=np.zeros((1, 4), dtype=np.float32)))

    def test_covariance_is_symmetric(self):
        rng = np.random.default_rng(0)
        stats = fit_gaussian(EmbeddingSet(vectors=rng.standard_normal((50, 8)).astype(np.float32)))
        assert np.array_equal(stats.covariance, stats.covariance.T)


class TestSqrtmPsd:
    def test_identity_fixed_point(self):
        assert sqrtm_psd(np.eye(5)) == pytest.approx(np.eye(5))

    def test_diagonal_closed_form(self):
        assert sqrtm_psd(np.diag([4.0, 9.0])) == pytest.approx(np.diag([2.0, 3.0]))

    def test_multiply_back_on_random_spd(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            dim = int(rng.integers(2, 129))
            a = random_spd(rng, dim, scale=float(rng.uniform(0.1, 50)))
            s = sqrtm_psd(a)
            assert np.array_equal(s, s.T)
            rel = np.linalg.norm(s @ s - a) / np.linalg.norm(a)
            assert rel <= 1e-8

    def test_rank_deficient_clips_to_zero(self):
        v = np.array([[1.0, 2.0, 3.0]])
        a = v.T @ v  # rank one
        s = sqrtm_psd(a)
        assert np.linalg.norm(s @ s - a) / np.linalg.norm(a) <= 1e-8

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            sqrtm_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestFrechetDistance:
    def stats_1d(self, mu, var):
        return GaussianStats(mean=np.array([mu]), covariance=np.array([[var]]), sample_count=10)

    def test_1d_mean_shift(self):
        result = frechet_distance(self.stats_1d(0.0, 1.0), self.stats_1d(1.0, 1.0))
        assert result.value == pytest.approx(1.0, abs=1e-9)
        assert result.mean_term == pytest.approx(1.0, abs=1e-12)
        assert result.trace_term == pytest.approx(0.0, abs=1e-9)

    def test_1d_variance_gap(self):
        result = frechet_distance(self.stats_1d(0.0, 4.0), self.stats_1d(0.0, 1.0))
        assert result.value == pytest.approx(1.0, abs=1e-9)

    def test_1d_closed_form_random(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            mu_r, mu_g = rng.normal(size=2)
            sd_r, sd_g = rng.uniform(0.1, 3.0, size=2)
            expected = (mu_r - mu_g) ** 2 + (sd_r - sd_g) ** 2
            result = frechet_distance(
                self.stats_1d(mu_r, sd_r**2), self.stats_1d(mu_g, sd_g**2)
            )
            assert result.value == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_oracle_equivalence_random_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            dim = int(rng.integers(1, 9))
            r, g = random_stats(rng, dim), random_stats(rng, dim)
            ours = frechet_distance(r, g).value
            expected = oracle_frechet(r.mean, r.covariance, g.mean, g.covariance)
            assert ours == pytest.approx(expected, rel=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            dim = int(rng.integers(2, 17))
            r, g = random_stats(rng, dim), random_stats(rng, dim)
            ab = frechet_distance(r, g).value
            ba = frechet_distance(g, r).value
            assert ab == pytest.approx(ba, rel=1e-9)

    def test_translation_shifts_mean_term_only(self):
        rng = np.random.default_rng(5)
        dim = 6
        r = random_stats(rng, dim)
        g = random_stats(rng, dim)
        base = frechet_distance(r, g)
        shift = rng.standard_normal(dim)
        g2 = GaussianStats(mean=g.mean + shift, covariance=g.covariance, sample_count=g.sample_count)
        moved = frechet_distance(r, g2)
        expected_mean = float((r.mean - g.mean - shift) @ (r.mean - g.mean - shift))
        assert moved.mean_term == pytest.approx(expected_mean, rel=1e-12)
        assert moved.trace_term == pytest.approx(base.trace_term, rel=1e-9)

    def test_value_decomposition_invariant(self):
        rng = np.random.default_rng(6)
        r, g = random_stats(rng, 5), random_stats(rng, 5)
        result = frechet_distance(r, g)
        assert result.value == result.mean_term + result.trace_term
        assert result.value >= 0

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(7)
        with pytest.raises(DimensionMismatch):
            frechet_distance(random_stats(rng, 3), random_stats(rng, 4))


class TestFadScore:
    def random_set(self, rng, dim, n):
        return EmbeddingSet(vectors=rng.standard_normal((n, dim)).astype(np.float32))

    def test_identity(self):
        rng = np.random.default_rng(8)
        for dim, n in [(2, 8), (16, 64), (64, 8), (64, 256)]:
            x = self.random_set(rng, dim, n)
            assert fad_score(x, x).value <= 1e-6

    def test_symmetric_in_sets(self):
        rng = np.random.default_rng(9)
        r = self.random_set(rng, 12, 40)
        g = self.random_set(rng, 12, 40)
        assert fad_score(r, g).value == pytest.approx(fad_score(g, r).value, rel=1e-9)

    def test_nonnegative_rank_deficient(self):
        # fewer samples than dimensions: clipping must keep the value finite and >= 0
        rng = np.random.default_rng(10)
        r = self.random_set(rng, 64, 8)
        g = self.random_set(rng, 64, 8)
        result = fad_score(r, g)
        assert result.value >= 0
        assert np.isfinite(result.value)

    def test_json_fields(self):
        rng = np.random.default_rng(11)
        result = fad_score(self.random_set(rng, 4, 10), self.random_set(rng, 4, 10))
        d = result.as_dict()
        assert set(d) == {"value", "mean_term", "trace_term", "negative_eigenvalue_mass"}
