import math

import numpy as np
import pytest
from scipy import stats

from fieldrank.errors import UsageError
from fieldrank.significance import (
    DEGENERATE_VARIANCE,
    paired_t_test,
    regularized_incomplete_beta,
    student_t_two_sided_p,
    tukey_hsd,
)

# frozen canonical fixture (n=10); reference values from scipy.stats.ttest_rel
FIXTURE_A = [
    0.6900575464, 0.66950225, 0.6180595311, 0.6378704955, 0.6436231471,
    0.6112718305, 0.6577042506, 0.6317731048, 0.6233452868, 0.6494332464,
]
FIXTURE_B = [
    0.6741597043, 0.6359129098, 0.5929757221, 0.627599621, 0.6193521795,
    0.6026455293, 0.6655437711, 0.6133063575, 0.5925168181, 0.6232676388,
]
FIXTURE_T = 4.732256303641854
FIXTURE_P = 0.0010705010806899861


class TestIncompleteBeta:
    def test_bounds(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_against_scipy_grid(self):
        from scipy.special import betainc

        for a in (0.5, 1.0, 2.5, 5.0, 10.0):
            for b in (0.5, 1.0, 3.0, 9.0):
                for x in (0.01, 0.2, 0.5, 0.8, 0.99):
                    assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                        betainc(a, b, x), abs=1e-12
                    )

    def test_t_cdf_against_scipy(self):
        for df in (1, 2, 5, 9, 30):
            for t in (0.0, 0.5, 1.3, 2.8, 7.0):
                assert student_t_two_sided_p(t, df) == pytest.approx(
                    2.0 * stats.t.sf(abs(t), df), abs=1e-12
                )


class TestPairedT:
    def test_symmetric_differences_give_zero_t(self):
        # exactly representable symmetric differences sum to zero in float
        a = [0.25, -0.25, 0.5, -0.5]
        r = paired_t_test(np.array(a) + 0.5, np.full(4, 0.5))
        assert r.t == 0.0
        assert r.p == 1.0
        # the classic example values carry float dust but are still p ~ 1
        dusty = paired_t_test(np.array([0.1, -0.1, 0.2, -0.2]), np.zeros(4))
        assert dusty.p == pytest.approx(1.0, abs=1e-12)

    def test_identical_nonzero_differences_degenerate(self):
        r = paired_t_test([1.1, 1.1, 1.1], [1.0, 1.0, 1.0])
        assert r.p == 0.0
        assert math.isinf(r.t)
        assert DEGENERATE_VARIANCE in r.flags

    def test_all_zero_differences(self):
        r = paired_t_test([0.5, 0.5], [0.5, 0.5])
        assert r.t == 0.0 and r.p == 1.0
        assert DEGENERATE_VARIANCE in r.flags

    def test_canonical_fixture_matches_reference(self):
        r = paired_t_test(FIXTURE_A, FIXTURE_B)
        assert r.t == pytest.approx(FIXTURE_T, abs=1e-9)
        assert r.p == pytest.approx(FIXTURE_P, abs=1e-6)
        assert r.df == 9

    def test_random_fixtures_match_scipy(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2, 15))
            a = rng.normal(0.6, 0.05, size=n)
            b = a + rng.normal(0.0, 0.03, size=n)
            mine = paired_t_test(a, b)
            ref_t, ref_p = stats.ttest_rel(a, b)
            assert mine.t == pytest.approx(float(ref_t), rel=1e-9)
            assert mine.p == pytest.approx(float(ref_p), abs=1e-6)

    def test_antisymmetry_and_shift_invariance(self):
        rng = np.random.default_rng(8)
        a, b = rng.normal(size=10), rng.normal(size=10)
        r_ab, r_ba = paired_t_test(a, b), paired_t_test(b, a)
        assert r_ab.t == pytest.approx(-r_ba.t, rel=1e-12)
        assert r_ab.p == pytest.approx(r_ba.p, rel=1e-12)
        shifted = paired_t_test(a + 3.0, b + 3.0)
        assert shifted.t == pytest.approx(r_ab.t, rel=1e-9)
        assert shifted.p == pytest.approx(r_ab.p, rel=1e-9)

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            r = paired_t_test(rng.normal(size=n), rng.normal(size=n))
            assert 0.0 <= r.p <= 1.0

    def test_too_short_rejected(self):
        with pytest.raises(UsageError):
            paired_t_test([1.0], [2.0])


SEP_G1 = [0.60, 0.61, 0.59, 0.60, 0.62, 0.61, 0.60, 0.59, 0.61, 0.60]
SEP_G2 = [0.70, 0.71, 0.69, 0.70, 0.72, 0.71, 0.70, 0.69, 0.71, 0.70]
SEP_G3 = [0.80, 0.81, 0.79, 0.80, 0.82, 0.81, 0.80, 0.79, 0.81, 0.80]


class TestTukey:
    def test_identical_groups_p_one(self):
        g = [0.5, 0.6, 0.55, 0.52]
        for r in tukey_hsd([g, g, g], draws=20_000, seed=0):
            assert r.p == 1.0

    def test_constant_equal_groups_degenerate_p_one(self):
        g = [0.5, 0.5, 0.5]
        for r in tukey_hsd([g, g], draws=1000, seed=0):
            assert r.p == 1.0
            assert DEGENERATE_VARIANCE in r.flags

    def test_constant_different_groups_degenerate_p_zero(self):
        for r in tukey_hsd([[0.5] * 3, [0.7] * 3], draws=1000, seed=0):
            assert r.p == 0.0
            assert DEGENERATE_VARIANCE in r.flags

    def test_large_separation_fixture(self):
        # frozen oracle: 1e6-draw Monte Carlo (and scipy.stats.studentized_range)
        # put every pair at p = 0 for this fixture
        results = tukey_hsd([SEP_G1, SEP_G2, SEP_G3], draws=200_000, seed=1)
        assert len(results) == 3
        for r in results:
            assert r.p < 0.001

    def test_moderate_q_matches_studentized_range(self):
        rng = np.random.default_rng(10)
        groups = [rng.normal(0.6 + 0.01 * i, 0.02, size=10) for i in range(3)]
        results = tukey_hsd(groups, draws=200_000, seed=3)
        df = 3 * 9
        for r in results:
            ref = float(stats.studentized_range.sf(r.q, 3, df))
            assert r.p == pytest.approx(ref, abs=0.005)

    def test_two_groups_reduce_to_pooled_t(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            a = rng.normal(0.6, 0.03, size=10)
            b = rng.normal(0.62, 0.03, size=10)
            (r,) = tukey_hsd([a, b], draws=200_000, seed=5)
            _, p_ref = stats.ttest_ind(a, b, equal_var=True)
            assert r.p == pytest.approx(float(p_ref), abs=0.005)

    def test_seed_stability(self):
        groups = [SEP_G1, [v - 0.09 for v in SEP_G2], [v - 0.19 for v in SEP_G3]]
        a = tukey_hsd(groups, draws=200_000, seed=0)
        b = tukey_hsd(groups, draws=200_000, seed=99)
        for ra, rb in zip(a, b):
            assert abs(ra.p - rb.p) <= 0.005

    def test_reports_every_unordered_pair(self):
        rng = np.random.default_rng(12)
        groups = [rng.normal(size=5) for _ in range(4)]
        results = tukey_hsd(groups, draws=10_000, seed=0)
        assert [(r.i, r.j) for r in results] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

    def test_unequal_sizes_rejected(self):
        with pytest.raises(UsageError):
            tukey_hsd([[1.0, 2.0], [1.0, 2.0, 3.0]])

    def test_single_group_rejected(self):
        with pytest.raises(UsageError):
            tukey_hsd([[1.0, 2.0]])

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(13)
        groups = [rng.normal(size=6) for _ in range(3)]
        for r in tukey_hsd(groups, draws=5_000, seed=2):
            assert 0.0 <= r.p <= 1.0
