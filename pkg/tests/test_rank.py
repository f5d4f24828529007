import numpy as np
import pytest
import scipy.stats

from resadapt.errors import ValidationError
from resadapt.stats import eta_squared, kruskal_wallis, pearson


class TestKruskalWallis:
    def test_hand_computed_no_ties(self):
        # ranks 1,2 | 3,4: H = 12/(4*5) * (3^2/2 + 7^2/2) - 3*5 = 2.4
        result = kruskal_wallis([[1, 2], [3, 4]])
        assert result.h == pytest.approx(2.4, abs=1e-12)
        assert result.df == 1
        assert result.k == 2 and result.n == 4

    def test_symmetric_groups_zero(self):
        assert kruskal_wallis([[1, 3], [3, 1]]).h == pytest.approx(0.0, abs=1e-12)

    def test_matches_scipy_with_ties(self):
        rng = np.random.default_rng(101)
        for _ in range(50):
            k = rng.integers(2, 5)
            groups = [rng.integers(0, 6, size=rng.integers(3, 12)).astype(float)
                      for _ in range(k)]
            pooled = np.concatenate(groups)
            if np.all(pooled == pooled[0]):
                continue
            mine = kruskal_wallis(groups)
            h_ref, p_ref = scipy.stats.kruskal(*groups)
            assert mine.h == pytest.approx(h_ref, rel=1e-12)
            assert mine.p == pytest.approx(p_ref, rel=1e-9)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(55)
        for _ in range(25):
            groups = [rng.normal(size=rng.integers(3, 10)) for _ in range(3)]
            h0 = kruskal_wallis(groups).h
            for f in (np.exp, lambda v: v**3, lambda v: 5 * v + 2):
                assert kruskal_wallis([f(g) for g in groups]).h == \
                    pytest.approx(h0, rel=1e-9)

    def test_all_identical_rejected(self):
        with pytest.raises(ValidationError, match="identical"):
            kruskal_wallis([[2, 2], [2, 2, 2]])

    def test_single_group_rejected(self):
        with pytest.raises(ValidationError, match="2 groups"):
            kruskal_wallis([[1, 2, 3]])

    def test_empty_group_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            kruskal_wallis([[1, 2], []])

    def test_eta_attached(self):
        result = kruskal_wallis([[1, 2, 5], [3, 4, 9]])
        assert result.eta_squared == pytest.approx(
            eta_squared(result.h, result.k, result.n))


class TestEtaSquared:
    @pytest.mark.parametrize("h,k,n,expected", [
        (14.139, 4, 264, 0.0428),
        (19.817, 3, 276, 0.0653),
        (65.328, 12, 264, 0.2156),
        (79.045, 12, 276, 0.2577),
    ])
    def test_paper_checkpoints(self, h, k, n, expected):
        assert eta_squared(h, k, n) == pytest.approx(expected, abs=5e-5)

    def test_zero_numerator(self):
        for n in (10, 100, 1000):
            assert eta_squared(3.0, 4, n) == 0.0

    def test_pure_arithmetic(self):
        assert eta_squared(7.0, 3, 8) == pytest.approx((7.0 - 2.0) / 5.0)

    def test_n_must_exceed_k(self):
        with pytest.raises(ValidationError):
            eta_squared(5.0, 4, 4)


class TestPearson:
    def test_perfect_positive(self):
        x = list(range(1, 11))
        assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)

    def test_perfect_negative(self):
        x = list(range(1, 11))
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)

    def test_affine_property(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            x = rng.normal(size=12)
            a = rng.choice([-3.5, -1.0, 0.25, 2.0])
            b = rng.normal()
            assert pearson(x, a * x + b) == pytest.approx(np.sign(a), abs=1e-12)

    def test_matches_numpy(self):
        rng = np.random.default_rng(78)
        x, y = rng.normal(size=30), rng.normal(size=30)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)

    def test_constant_series_rejected(self):
        with pytest.raises(ValidationError, match="constant"):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            pearson([1, 2], [1, 2, 3])
