"""
Tests for tail averaging, extrapolation, bias reports, W2 distances, moments and slope fits.
"""

import itertools
import math

import numpy as np
import pytest

from src.models.errors import InvalidArgumentError, UnsupportedSizeError
from src.models.operators import NoiseSpec, scaled_abs_1d
from src.models.reports import RR, TA, BiasEntry, BiasReport, W2Estimate
from src.models.rng import RngStream
from src.models.trajectory import Trajectory
from src.utils.dynamics import QDynamic, SADynamic
from src.utils.estimators import (
    bias_sweep,
    build_bias_report,
    empirical_w2_1d,
    empirical_w2_assignment,
    estimate_bias,
    fit_loglog_slope,
    mean_and_stderr,
    moment_estimate,
    rr_extrapolate,
    tail_average,
)
from src.utils.qlearning import QMode


def ramp(n=5):
    return Trajectory(0.1, np.arange(n, dtype=float).reshape(n, 1), 1, n - 1)


class TestTailAverage:
    def test_default_window(self):
        np.testing.assert_allclose(tail_average(ramp(), 2), [3.0])

    def test_explicit_end(self):
        np.testing.assert_allclose(tail_average(ramp(), 2, 4), [2.5])

    @pytest.mark.parametrize("k0, k", [(5, None), (3, 3), (-1, None), (0, 6)])
    def test_invalid_window(self, k0, k):
        with pytest.raises(InvalidArgumentError):
            tail_average(ramp(), k0, k)


class TestRichardsonRomberg:
    def test_square_root_weights(self):
        assert rr_extrapolate(1.0, 2.0, 0.5) == pytest.approx(-math.sqrt(2.0))

    def test_cancels_linear_bias(self):
        limit, slope, alpha = np.array([0.3, -1.2]), np.array([2.0, 5.0]), 0.05
        combined = rr_extrapolate(limit + slope * alpha, limit + slope * 2 * alpha, beta=1.0)
        np.testing.assert_allclose(combined, limit, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            rr_extrapolate([1.0, 2.0], [1.0], 0.5)

    def test_beta_positive(self):
        with pytest.raises(InvalidArgumentError):
            rr_extrapolate(1.0, 1.0, 0.0)


def test_mean_and_stderr():
    mean, stderr = mean_and_stderr(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(mean, [2.0])
    np.testing.assert_allclose(stderr, [1.0 / math.sqrt(3.0)])
    with pytest.raises(InvalidArgumentError):
        mean_and_stderr(np.array([[1.0]]))


class TestEstimateBias:
    def test_noiseless_start_at_fixed_point(self):
        op = scaled_abs_1d(0.3)
        dynamic = SADynamic(op, NoiseSpec("gaussian", 0.0), theta0=op.fixed_point)
        entry = estimate_bias(dynamic, 0.2, 4, 500, RngStream(0), apply_rr=0.5)
        assert entry.estimators == [TA, RR]
        assert entry.magnitude(TA, "ell2") <= 1e-9
        assert entry.magnitude(RR, "ell2") <= 1e-9

    def test_threads_do_not_change_results(self, scaled_abs, unit_noise):
        dynamic = SADynamic(scaled_abs, unit_noise)
        single = estimate_bias(dynamic, 0.2, 8, 1000, RngStream(1), threads=1, block_size=2)
        pooled = estimate_bias(dynamic, 0.2, 8, 1000, RngStream(1), threads=4, block_size=2)
        np.testing.assert_array_equal(single.bias[TA], pooled.bias[TA])
        np.testing.assert_array_equal(single.stderr[TA], pooled.stderr[TA])

    def test_linear_dynamic_is_unbiased(self, ar1, unit_noise):
        entry = estimate_bias(SADynamic(ar1, unit_noise), 0.1, 64, 4000, RngStream(2))
        assert abs(entry.bias[TA][0]) <= 4 * entry.stderr[TA][0]

    def test_scaled_abs_bias_is_negative(self, scaled_abs, unit_noise):
        entry = estimate_bias(SADynamic(scaled_abs, unit_noise), 0.4, 32, 20_000, RngStream(3))
        assert entry.bias[TA][0] < -3 * entry.stderr[TA][0]

    def test_q_dynamic_on_deterministic_chain(self, chain_mdp):
        dynamic = QDynamic(chain_mdp, QMode.synchronous())
        entry = estimate_bias(dynamic, 0.5, 2, 400, RngStream(0))
        assert entry.magnitude(TA, "ellinf") <= 1e-9

    def test_needs_two_replicas(self, ar1, unit_noise):
        with pytest.raises(InvalidArgumentError):
            estimate_bias(SADynamic(ar1, unit_noise), 0.1, 1, 100, RngStream(0))

    def test_burn_in_range(self, ar1, unit_noise):
        with pytest.raises(InvalidArgumentError):
            estimate_bias(SADynamic(ar1, unit_noise), 0.1, 4, 100, RngStream(0), k0_fraction=1.0)

    def test_sweep_uses_one_stream_per_stepsize(self, scaled_abs, unit_noise):
        dynamic = SADynamic(scaled_abs, unit_noise)
        report = bias_sweep(dynamic, [0.1, 0.2], 4, 300, RngStream(5))
        direct = estimate_bias(dynamic, 0.2, 4, 300, RngStream(5).split(1))
        np.testing.assert_array_equal(report.entries[1].bias[TA], direct.bias[TA])
        assert report.slopes[TA]["slope"] is None


def exact_entries(alphas, power=0.5):
    return [BiasEntry(a, {TA: [3.0 * a ** power, 0.0]}, {TA: [0.01, 0.0]}, 10, 100) for a in alphas]


class TestBiasReport:
    def test_slope_recovered(self):
        report = build_bias_report(exact_entries([0.05, 0.1, 0.2, 0.4]), "ell2")
        assert report.slopes[TA]["slope"] == pytest.approx(0.5)
        assert report.slopes[TA]["stderr"] == pytest.approx(0.0, abs=1e-9)

    def test_zero_magnitude_has_no_slope(self):
        entries = exact_entries([0.1, 0.2, 0.4])
        entries[0] = BiasEntry(0.1, {TA: [0.0, 0.0]}, {TA: [0.0, 0.0]}, 10, 100)
        assert build_bias_report(entries, "ell2").slopes[TA]["slope"] is None

    def test_frame(self):
        frame = build_bias_report(exact_entries([0.1, 0.2, 0.4]), "ell2").to_frame()
        assert list(frame.columns) == ["alpha", "estimator", "component", "bias", "stderr"]
        assert len(frame) == 6
        assert list(frame["component"][:2]) == [0, 1]

    def test_summary(self):
        report = build_bias_report(exact_entries([0.1, 0.2, 0.4]), "ell2", extra={"mdp_type": "TypeB"})
        summary = report.to_summary()
        assert summary["stepsizes"] == [0.1, 0.2, 0.4]
        assert summary["replicas"] == 10 and summary["steps"] == 100
        assert summary["mdp_type"] == "TypeB"
        assert summary["estimators"][TA]["magnitude_c"][0] == pytest.approx(3.0 * math.sqrt(0.1))

    def test_magnitude_norms(self):
        entry = BiasEntry(0.1, {TA: [3.0, -4.0]}, {TA: [0.0, 0.0]}, 2, 10)
        assert entry.magnitude(TA, "ell2") == pytest.approx(5.0)
        assert entry.magnitude(TA, "ellinf") == pytest.approx(4.0)
        assert entry.magnitude(TA, "ell1") == pytest.approx(7.0)

    def test_empty_report(self):
        with pytest.raises(InvalidArgumentError):
            BiasReport([], "ell2")


class TestW2:
    def test_equal_counts(self):
        estimate = empirical_w2_1d([0.0, 1.0], [2.0, 1.0])
        assert estimate.value == pytest.approx(1.0)
        assert estimate.method == "quantile_1d"

    def test_unequal_counts(self):
        estimate = empirical_w2_1d([0.0, 1.0], [0.0, 0.5, 1.0])
        assert estimate.value == pytest.approx(math.sqrt(1.0 / 12.0))
        assert (estimate.n_x, estimate.n_y) == (2, 3)

    def test_metric_axioms(self):
        draws = RngStream(4).normals(300).reshape(3, 100)
        x, y, z = draws[0], draws[1] + 0.5, 2.0 * draws[2]
        assert empirical_w2_1d(x, x).value == 0.0
        assert empirical_w2_1d(x, y).value == pytest.approx(empirical_w2_1d(y, x).value)
        assert empirical_w2_1d(x, z).value <= empirical_w2_1d(x, y).value + empirical_w2_1d(y, z).value + 1e-12

    def test_unequal_counts_triangle(self):
        draws = RngStream(5).normals(90)
        x, y, z = draws[:20], draws[20:50] + 1.0, draws[50:]
        assert empirical_w2_1d(x, z).value <= empirical_w2_1d(x, y).value + empirical_w2_1d(y, z).value + 1e-12

    def test_rejects_bad_samples(self):
        with pytest.raises(InvalidArgumentError):
            empirical_w2_1d([], [1.0])
        with pytest.raises(InvalidArgumentError):
            empirical_w2_1d([np.nan], [1.0])

    @pytest.mark.parametrize("norm_tag", ["ell2", "ellinf"])
    def test_assignment_matches_brute_force(self, norm_tag):
        draws = RngStream(6).normals(20).reshape(2, 5, 2)
        xs, ys = draws[0], draws[1]
        if norm_tag == "ell2":
            cost = ((xs[:, None, :] - ys[None, :, :]) ** 2).sum(axis=-1)
        else:
            cost = np.abs(xs[:, None, :] - ys[None, :, :]).max(axis=-1) ** 2
        best = min(cost[np.arange(5), list(p)].mean() for p in itertools.permutations(range(5)))
        estimate = empirical_w2_assignment(xs, ys, norm_tag)
        assert estimate.value == pytest.approx(math.sqrt(best))
        assert estimate.method == "assignment"

    def test_assignment_agrees_with_sorting_in_one_dimension(self):
        draws = RngStream(7).normals(80)
        assert empirical_w2_assignment(draws[:40], draws[40:]).value == pytest.approx(
            empirical_w2_1d(draws[:40], draws[40:]).value)

    def test_assignment_cap(self):
        points = np.zeros((300, 1))
        with pytest.raises(UnsupportedSizeError):
            empirical_w2_assignment(points, points)
        assert empirical_w2_assignment(points, points, cap=300).value == 0.0

    def test_assignment_shapes(self):
        with pytest.raises(InvalidArgumentError):
            empirical_w2_assignment(np.zeros((3, 2)), np.zeros((4, 2)))
        with pytest.raises(InvalidArgumentError):
            empirical_w2_assignment(np.zeros((3, 2)), np.zeros((3, 2)), "ell1")

    def test_estimate_rejects_negative(self):
        with pytest.raises(InvalidArgumentError):
            W2Estimate(-1.0, "assignment", 2, 2)


class TestMoments:
    def test_arithmetic(self):
        traj = Trajectory(0.1, np.array([[1.0], [-2.0], [3.0]]), 1, 2)
        assert moment_estimate(traj, [0.0], "ell2", 2) == pytest.approx(14.0 / 3.0)
        assert moment_estimate(traj, [0.0], "ell2", 2, k0=1) == pytest.approx(6.5)
        assert moment_estimate(traj, [1.0], "ellinf", 4) == pytest.approx((0 + 81 + 16) / 3.0)

    def test_order_checked(self):
        with pytest.raises(InvalidArgumentError):
            moment_estimate(ramp(), [0.0], "ell2", 3)


class TestSlopeFit:
    alphas = [0.1, 0.2, 0.4, 0.8]

    def test_exact_power_law(self):
        slope, stderr = fit_loglog_slope(self.alphas, [3.0 * a ** 0.5 for a in self.alphas])
        assert slope == pytest.approx(0.5)
        assert stderr == pytest.approx(0.0, abs=1e-9)

    def test_weighted(self):
        slope, _ = fit_loglog_slope(self.alphas, [2.0 * a for a in self.alphas], weights=[1.0, 2.0, 3.0, 4.0])
        assert slope == pytest.approx(1.0, abs=1e-6)

    def test_needs_three_points(self):
        with pytest.raises(InvalidArgumentError):
            fit_loglog_slope([0.1, 0.2], [1.0, 2.0])

    def test_positive_values(self):
        with pytest.raises(InvalidArgumentError):
            fit_loglog_slope([0.1, 0.2, 0.4], [1.0, 0.0, 2.0])
