import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from d2dcache.model import ConstraintViolationError, FileLibrary, Placement, Scenario
from d2dcache.objective import (
    file_utility,
    offloading_ratio,
    poisson_pmf,
    poisson_tail,
    segment_pmf,
    sum_cdf,
)

from oracles import (
    brute_force_ratio,
    eligible_pairs,
    random_feasible_counts,
    random_instance,
    single_user_scenario,
    two_user_scenario,
)


class TestSegmentPmf:
    def test_zero_rate_is_point_mass_at_zero(self):
        pmf = segment_pmf(0.0, 5.0, 1, 2)
        assert np.allclose(pmf.mass, [1.0, 0.0, 0.0])

    def test_unit_mean_budget_one(self):
        pmf = segment_pmf(1.0, 1.0, 1, 2)
        e = math.exp(-1)
        assert np.allclose(pmf.mass, [e, e, 1 - 2 * e], atol=1e-15)

    def test_budget_two_skips_undeliverable_counts(self):
        pmf = segment_pmf(0.5, 2.0, 2, 3)
        e = math.exp(-1)
        assert np.allclose(pmf.mass, [e, 0.0, e, 1 - 2 * e], atol=1e-15)

    def test_infinite_rate_saturates(self):
        pmf = segment_pmf(math.inf, 3.0, 2, 4)
        assert pmf.mass[4] == 1.0
        assert pmf.mass[:4].sum() == 0.0

    def test_zero_cache_is_point_mass_regardless_of_rate(self):
        for rate in (0.0, 1.0, math.inf):
            assert np.allclose(segment_pmf(rate, 1.0, 1, 0).mass, [1.0])

    def test_matches_scipy_poisson(self):
        # independent oracle for interior and tail mass
        rate, deadline, b, x = 0.7, 3.0, 2, 5
        pmf = segment_pmf(rate, deadline, b, x)
        mean = rate * deadline
        for z in range(x):
            expected = stats.poisson.pmf(z // b, mean) if z % b == 0 else 0.0
            assert pmf.mass[z] == pytest.approx(expected, abs=1e-12)
        assert pmf.mass[x] == pytest.approx(stats.poisson.sf(math.ceil(x / b) - 1, mean), abs=1e-12)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            segment_pmf(-0.1, 1.0, 1, 1)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=0.0, max_value=50.0, allow_nan=False),
        st.integers(min_value=1, max_value=4),
        st.integers(min_value=0, max_value=12),
    )
    def test_mass_is_a_distribution(self, mean, b, x):
        pmf = segment_pmf(mean, 1.0, b, x)
        assert abs(pmf.mass.sum() - 1.0) <= 1e-10
        assert np.all(pmf.mass >= 0.0)
        for z in range(1, x):
            if z % b != 0:
                assert pmf.mass[z] == 0.0


class TestPoissonPrimitives:
    def test_log_space_survives_large_arguments(self):
        p = poisson_pmf(100, 50.0)
        assert math.isfinite(p) and p >= 0.0
        t = poisson_tail(50.0, 100)
        assert math.isfinite(t) and 0.0 <= t <= 1.0

    def test_pmf_matches_scipy(self):
        for k, mean in [(0, 0.3), (3, 1.7), (40, 25.0)]:
            assert poisson_pmf(k, mean) == pytest.approx(stats.poisson.pmf(k, mean), rel=1e-12)


class TestSumCdf:
    def test_empty_sum_is_zero(self):
        table = sum_cdf([], 3)
        assert np.array_equal(table.rows, np.ones((1, 4)))

    def test_two_bernoulli_like(self):
        pmf = segment_pmf(1.0, 1.0, 1, 1)
        table = sum_cdf([pmf, pmf], 1)
        q = 1 - math.exp(-1)
        # enumerate the four outcomes of (V1, V2)
        expected = (1 - q) ** 2 + 2 * q * (1 - q)
        assert table.rows[2, 1] == pytest.approx(expected, abs=1e-12)

    def test_total_mass_when_kprime_covers_support(self):
        pmfs = [segment_pmf(0.4, 2.0, 1, 2), segment_pmf(1.1, 1.0, 2, 3)]
        table = sum_cdf(pmfs, 5)
        assert table.rows[-1, 5] == pytest.approx(1.0, abs=1e-10)

    def test_rejects_negative_kprime(self):
        with pytest.raises(ValueError):
            sum_cdf([], -1)

    def test_rows_monotone(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            pmfs = [
                segment_pmf(float(rng.uniform(0, 3)), 1.0, int(rng.integers(1, 4)), int(rng.integers(0, 5)))
                for _ in range(int(rng.integers(0, 5)))
            ]
            table = sum_cdf(pmfs, int(rng.integers(0, 7)))
            assert np.all(np.diff(table.rows, axis=0) <= 1e-12)  # more variables, smaller cdf
            assert np.all(np.diff(table.rows, axis=1) >= -1e-12)  # larger threshold, larger cdf
            assert np.all(table.rows >= 0) and np.all(table.rows <= 1)


class TestFileUtility:
    def test_all_zero_column_is_zero(self):
        scenario = two_user_scenario(0.3, [1.0], [2], capacity=2)
        assert file_utility(scenario, 0, np.zeros(2, int)) == 0.0

    def test_single_user_half_threshold(self):
        scenario = single_user_scenario([1.0], [2], capacity=2)
        assert file_utility(scenario, 0, np.array([1])) == pytest.approx(0.5, abs=1e-12)

    def test_two_user_spot_value(self):
        scenario = two_user_scenario(1.0, [1.0], [1], capacity=1, deadline=1.0)
        expected = 0.5 * ((1 - math.exp(-1)) + 1.0)
        assert file_utility(scenario, 0, np.array([0, 1])) == pytest.approx(expected, abs=1e-12)

    def test_rejects_column_over_threshold(self):
        scenario = two_user_scenario(1.0, [1.0], [1], capacity=1)
        with pytest.raises(ValueError):
            file_utility(scenario, 0, np.array([0, 2]))


class TestOffloadingRatio:
    def test_empty_placement(self):
        scenario = two_user_scenario(0.5, [0.6, 0.4], [1, 2], capacity=2)
        assert offloading_ratio(scenario, Placement(counts=np.zeros((2, 2), int))) == 0.0

    def test_self_cache_saturation(self):
        scenario = two_user_scenario(0.5, [0.6, 0.4], [1, 2], capacity=3)
        counts = np.tile([1, 2], (2, 1))
        assert offloading_ratio(scenario, Placement(counts=counts)) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_placement_raises_with_violations(self):
        scenario = two_user_scenario(0.5, [1.0], [1], capacity=1)
        with pytest.raises(ConstraintViolationError) as err:
            offloading_ratio(scenario, Placement(counts=np.array([[2], [0]])))
        kinds = {v.kind for v in err.value.violations}
        assert kinds == {"capacity", "threshold"}

    def test_degenerate_two_cover_family(self):
        # rates in {0, huge}: delivery becomes an indicator of a reachable copy
        rng = np.random.default_rng(9)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            adjacency = rng.integers(0, 2, size=(n, n))
            adjacency = np.triu(adjacency, 1)
            adjacency = adjacency + adjacency.T
            rates = np.where(adjacency > 0, 1e3, 0.0).astype(float)
            np.fill_diagonal(rates, math.inf)
            p = rng.uniform(0.2, 1.0, 2)
            library = FileLibrary(popularity=p / p.sum(), threshold=[1, 1])
            scenario = Scenario(
                contact_rate=rates,
                budget=np.ones((n, n), int),
                deadline=1.0,
                capacity=1,
                library=library,
            )
            counts = np.zeros((n, 2), dtype=int)
            for j in range(n):
                choice = int(rng.integers(0, 3))
                if choice < 2:
                    counts[j, choice] = 1
            value = offloading_ratio(scenario, Placement(counts=counts))
            reach = adjacency.astype(bool) | np.eye(n, dtype=bool)
            indicator = sum(
                float(library.popularity[f])
                for i in range(n)
                for f in range(2)
                if np.any(reach[i] & (counts[:, f] > 0))
            ) / n
            assert value == pytest.approx(indicator, abs=1e-9)

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            scenario = random_instance(rng, rate_scale_range=(0.5, 40.0))
            counts = random_feasible_counts(rng, scenario)
            placement = Placement(counts=counts)
            assert offloading_ratio(scenario, placement) == pytest.approx(
                brute_force_ratio(scenario, placement), abs=1e-9
            )

    def test_monotone_under_single_increments(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            scenario = random_instance(rng)
            counts = random_feasible_counts(rng, scenario)
            base = offloading_ratio(scenario, Placement(counts=counts))
            pairs = eligible_pairs(scenario, counts)
            if not pairs:
                continue
            j, f = pairs[int(rng.integers(len(pairs)))]
            bumped = counts.copy()
            bumped[j, f] += 1
            assert offloading_ratio(scenario, Placement(counts=bumped)) >= base - 1e-12
