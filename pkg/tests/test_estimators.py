import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kappa_lab.distributions import ParetoParams, kappa_pareto, sample
from kappa_lab.errors import DomainError, ResolutionError
from kappa_lab.estimators import (
    EstimatorKind,
    FitMethod,
    KappaEstimate,
    TailFit,
    default_hill_k,
    empirical_threshold,
    hill_estimator,
    kappa_h_second_derivative,
    kappa_hat_h,
    kappa_hat_q,
    min_alpha_kappa,
    pareto_mle,
    plugin_kappa,
    plugin_kappa_from_sample,
    stochastic_alpha_kappa,
    top_k_count,
)

ONE_TO_TEN = np.arange(1.0, 11.0)


def pareto_grid(alpha, n):
    """Deterministic quantile grid x_i = (i/n)**(-1/alpha)."""
    i = np.arange(1, n + 1)
    return (i / n) ** (-1.0 / alpha)


def brute_force_share(x, q):
    k = math.floor(q * len(x) + 1e-9)
    s = np.sort(x)
    return s[len(x) - k:].sum() / x.sum()


positive_arrays = arrays(
    np.float64,
    st.integers(10, 200),
    elements=st.floats(1e-3, 1e6, allow_nan=False, allow_infinity=False),
)


class TestTopK:
    @pytest.mark.parametrize(
        "n,q,k", [(1000, 0.01, 10), (10, 0.2, 2), (100, 0.29, 29), (100, 0.07, 7), (3, 0.5, 1)]
    )
    def test_floor(self, n, q, k):
        assert top_k_count(n, q) == k

    def test_below_resolution(self):
        with pytest.raises(ResolutionError, match="below resolution"):
            top_k_count(10, 0.05)


class TestEmpiricalThreshold:
    def test_hand_enumeration(self):
        assert empirical_threshold(ONE_TO_TEN, 0.2) == 8.0

    def test_ties(self):
        assert empirical_threshold([5.0, 5.0, 5.0, 5.0], 0.25) == 5.0

    def test_resolution(self):
        with pytest.raises(ResolutionError):
            empirical_threshold(ONE_TO_TEN, 0.05)

    @settings(max_examples=200, deadline=None)
    @given(positive_arrays, st.floats(0.05, 0.9))
    def test_inf_definition(self, x, q):
        # smallest observed h with #{x > h} <= q*n
        if math.floor(q * x.size + 1e-9) < 1:
            return
        h = empirical_threshold(x, q)
        ok = [v for v in np.unique(x) if np.sum(x > v) <= q * x.size * (1 + 1e-12)]
        assert h == min(ok)


class TestKappaHatQ:
    def test_hand_enumeration(self):
        est = kappa_hat_q(ONE_TO_TEN, 0.2)
        assert est.value == pytest.approx(19 / 55, rel=1e-15)
        assert est.threshold == 8.0
        assert est.kind is EstimatorKind.NAIVE_Q
        assert est.n == 10

    def test_uniform_shares(self):
        assert kappa_hat_q(np.full(10, 3.7), 0.2).value == pytest.approx(0.2, rel=1e-15)

    def test_outlier(self):
        est = kappa_hat_q([1.0, 1.0, 1.0, 1.0, 1e6], 0.2)
        assert est.value == pytest.approx(1e6 / (1e6 + 4), rel=1e-15)

    def test_matches_sort_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(10_000):
            n = int(rng.integers(20, 400))
            q = float(rng.choice([0.01, 0.05, 0.1, 0.2, 0.5]))
            if math.floor(q * n + 1e-9) < 1:
                continue
            x = rng.pareto(1.2, n) + 1.0
            assert kappa_hat_q(x, q).value == brute_force_share(x, q)

    @settings(max_examples=200, deadline=None)
    @given(positive_arrays, st.floats(0.05, 0.9))
    def test_consistent_with_frozen_threshold(self, x, q):
        if math.floor(q * x.size + 1e-9) < 1 or np.unique(x).size != x.size:
            return
        h = empirical_threshold(x, q)
        assert kappa_hat_q(x, q).value == pytest.approx(kappa_hat_h(x, h).value, rel=1e-12)

    def test_consistent_on_grid(self):
        x = pareto_grid(1.3, 5000)
        h = empirical_threshold(x, 0.01)
        assert kappa_hat_q(x, 0.01).value == pytest.approx(kappa_hat_h(x, h).value, rel=1e-12)

    @pytest.mark.parametrize("c", [2.0**-7, 0.5, 4.0, 2.0**20])
    def test_scale_invariance_exact_for_powers_of_two(self, c):
        s = sample(ParetoParams(1.1, 1.0), 1000, 3)
        assert kappa_hat_q(s.scaled(c), 0.01).value == kappa_hat_q(s, 0.01).value

    @given(st.floats(1e-6, 1e6))
    def test_scale_invariance(self, c):
        s = sample(ParetoParams(1.5, 1.0), 500, 8)
        assert kappa_hat_q(s.scaled(c), 0.02).value == pytest.approx(kappa_hat_q(s, 0.02).value, rel=1e-12)


class TestKappaHatH:
    def test_hand_enumeration(self):
        assert kappa_hat_h(ONE_TO_TEN, 8.0).value == pytest.approx(19 / 55, rel=1e-15)

    def test_everything_in_tail(self):
        assert kappa_hat_h(ONE_TO_TEN, 0.5).value == 1.0

    def test_empty_tail(self):
        est = kappa_hat_h(ONE_TO_TEN, 11.0)
        assert est.value == 0.0
        assert est.kind is EstimatorKind.FROZEN_H
        assert est.q is None


def appended_share(x, h, y):
    return kappa_hat_h(np.append(x, y), h).value


class TestConcavityInNewObservation:
    """Second differences of y -> share(sample + [y]) at a frozen threshold."""

    @pytest.fixture
    def base(self):
        x = sample(ParetoParams(1.1, 1.0), 200, 77).values
        return x, float(np.quantile(x, 0.95))

    def test_concave_above(self, base):
        x, h = base
        for y in np.geomspace(1.05 * h, 1000 * h, 25):
            d = 1e-3 * y
            second = appended_share(x, h, y + d) - 2 * appended_share(x, h, y) + appended_share(x, h, y - d)
            assert second <= 1e-12

    def test_convex_below(self, base):
        x, h = base
        for y in np.linspace(0.05 * h, 0.95 * h, 25):
            d = 1e-3 * y
            second = appended_share(x, h, y + d) - 2 * appended_share(x, h, y) + appended_share(x, h, y - d)
            assert second >= -1e-12

    @pytest.mark.parametrize("side", [0.5, 3.0, 40.0])
    def test_analytic_second_derivative(self, base, side):
        x, h = base
        y = side * h
        # truncation error is about (step / (S + y))**2 relative
        step = 5e-4 * (x.sum() + y)
        assert abs(y - h) > step and y > step
        fd = (appended_share(x, h, y + step) - 2 * appended_share(x, h, y) + appended_share(x, h, y - step)) / step**2
        assert fd == pytest.approx(kappa_h_second_derivative(x, h, y), rel=1e-6)

    def test_sign(self, base):
        x, h = base
        assert kappa_h_second_derivative(x, h, 2 * h) < 0
        assert kappa_h_second_derivative(x, h, 0.5 * h) > 0


class TestHill:
    def test_grid_recovers_alpha(self):
        fit = hill_estimator(pareto_grid(1.5, 10**4), 10**3)
        assert fit.alpha_hat == pytest.approx(1.5, abs=0.1)
        assert fit.k_used == 1000
        assert fit.method is FitMethod.HILL

    def test_scale_invariant(self):
        x = sample(ParetoParams(1.3, 1.0), 5000, 1).values
        a = hill_estimator(x, 200).alpha_hat
        assert hill_estimator(x * 8.0, 200).alpha_hat == pytest.approx(a, rel=1e-12)
        assert hill_estimator(x * 3.7, 200).alpha_hat == pytest.approx(a, rel=1e-12)

    def test_k_equal_n(self):
        with pytest.raises(DomainError):
            hill_estimator(pareto_grid(1.5, 100), 100)

    def test_default_k(self):
        assert default_hill_k(10**4) == 464
        assert default_hill_k(10**6) == 10**4
        assert hill_estimator(pareto_grid(1.5, 10**4)).k_used == 464

    def test_lambda_on_grid(self):
        fit = hill_estimator(pareto_grid(1.5, 10**4), 10**3)
        assert fit.lambda_hat == pytest.approx(1.0, abs=0.05)


class TestParetoMle:
    def test_log_mean_one(self):
        fit = pareto_mle(np.full(20, 2.0 * math.e), 2.0)
        assert fit.alpha_hat == pytest.approx(1.0, rel=1e-14)
        assert fit.lambda_hat == 2.0

    def test_grid(self):
        assert pareto_mle(pareto_grid(1.1, 10**4), 1.0).alpha_hat == pytest.approx(1.1, abs=0.05)

    def test_value_below_x_min(self):
        with pytest.raises(DomainError):
            pareto_mle([0.5, 2.0, 3.0], 1.0)


class TestPlugin:
    def test_grid_fit(self):
        fit = pareto_mle(pareto_grid(1.1, 10**4), 1.0)
        est = plugin_kappa(fit, 11.0, 0.01)
        assert est.value == pytest.approx(kappa_pareto(1.1, 0.01), abs=0.02)
        assert est.kind is EstimatorKind.PLUG_IN
        assert not est.clamped

    def test_infinite_mean_fit(self):
        fit = TailFit(0.95, 1.0, 100, FitMethod.HILL, 1000)
        with pytest.raises(DomainError, match="infinite-mean"):
            plugin_kappa(fit, 10.0, 0.01)

    def test_perfect_fit(self):
        a = 1.7
        fit = TailFit(a, 1.0, 999, FitMethod.PARETO_MLE, 1000)
        assert plugin_kappa(fit, a / (a - 1), 0.01).value == pytest.approx(kappa_pareto(a, 0.01), abs=1e-10)

    def test_clamps_overshoot(self):
        fit = TailFit(1.5, 1.0, 10, FitMethod.HILL, 100)
        est = plugin_kappa(fit, 0.1, 0.01)
        assert est.value == 1.0
        assert est.clamped

    def test_from_sample_defaults(self):
        s = sample(ParetoParams(1.5, 1.0), 20_000, 4)
        est = plugin_kappa_from_sample(s, 0.01)
        assert est.n == 20_000
        assert est.value == pytest.approx(kappa_pareto(1.5, 0.01), abs=0.1)


class TestModelBased:
    def test_stochastic_alpha(self):
        est = stochastic_alpha_kappa([1.2, 1.8], [0.5, 0.5], 0.01)
        assert est.value == pytest.approx(0.5 * (0.46415888336127786 + 0.12915496650148836), rel=1e-14)
        assert est.value == pytest.approx(0.29666, abs=1e-5)
        assert est.value >= kappa_pareto(1.5, 0.01)
        assert est.kind is EstimatorKind.STOCHASTIC_ALPHA

    def test_stochastic_single(self):
        assert stochastic_alpha_kappa([1.4], [1.0], 0.05).value == kappa_pareto(1.4, 0.05)

    def test_stochastic_rejects_bad_weights(self):
        with pytest.raises(DomainError):
            stochastic_alpha_kappa([1.2, 1.8], [0.7, 0.7], 0.01)

    def test_min_alpha(self):
        est = min_alpha_kappa([1.2, 1.5, 1.8], 0.01)
        assert est.value == pytest.approx(0.46415888336127786, rel=1e-14)
        assert est.kind is EstimatorKind.MIN_ALPHA

    def test_min_alpha_singleton(self):
        assert min_alpha_kappa([2.5], 0.01).value == kappa_pareto(2.5, 0.01)

    def test_min_alpha_empty(self):
        with pytest.raises(DomainError):
            min_alpha_kappa([], 0.01)

    @given(
        st.lists(st.floats(1.01, 4.0), min_size=1, max_size=6),
        st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6),
        st.floats(1e-4, 0.5),
    )
    def test_min_dominates_stochastic(self, alist, raw, q):
        w = np.array(raw[: len(alist)])
        w = list(w / w.sum())
        w[-1] = 1.0 - math.fsum(w[:-1])
        if w[-1] < 0:
            return
        assert min_alpha_kappa(alist, q).value >= stochastic_alpha_kappa(alist, w, q).value - 1e-15


class TestTypes:
    def test_estimate_range(self):
        with pytest.raises(DomainError):
            KappaEstimate(1.2, 1.0, 0.01, 100, EstimatorKind.NAIVE_Q)

    def test_fit_k_range(self):
        with pytest.raises(DomainError):
            TailFit(1.5, 1.0, 0, FitMethod.HILL, 10)
