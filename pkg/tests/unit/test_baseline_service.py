import unittest

import numpy as np
import pandas as pd

from core.pipeline import (DegenerateSigmaError, DuplicateForecastError,
                           EmptyInputError, InsampleTooShortError,
                           LengthMismatchError)
from models.results import BaselineProfile
from models.series import Frequency, SeriesCollection, TimeSeries
from services.baseline_service import (BASELINE_MODEL_NAME,
                                       baseline_forecast_rows, build_profile,
                                       build_profiles, check_baseline_name,
                                       flag_anomalies,
                                       hardness_scores,
                                       nearest_rank_percentile,
                                       prediction_half_widths,
                                       seasonal_naive_forecast,
                                       seasonal_naive_interval,
                                       seasonal_naive_residual_sigma, z_score)


def profile_with_smape(uid, value):
    empty = np.zeros(4)
    return BaselineProfile(unique_id=uid, forecast=empty, lower=empty, upper=empty, sigma=1.0,
                           level=0.99, smape=value, is_anomaly=np.zeros(4, dtype=bool))


def quarterly_series(uid, values, start="2000-01-01"):
    return TimeSeries(unique_id=uid, timestamps=pd.date_range(start, periods=len(values), freq="QS"),
                      values=values, frequency=Frequency.QUARTERLY)


class TestSeasonalNaive(unittest.TestCase):
    """Test cases for the seasonal naive forecast and interval."""

    def test_forecast_repeats_last_season(self):
        """Test that step h repeats the value one season back."""
        forecast = seasonal_naive_forecast([1, 2, 3, 4, 5, 6, 7, 8], 4, 6)
        np.testing.assert_array_equal(forecast, [5, 6, 7, 8, 5, 6])

    def test_z_score(self):
        """Test the two-sided 99% normal quantile."""
        self.assertAlmostEqual(z_score(0.99), 2.5758293035489, places=10)
        self.assertAlmostEqual(z_score(0.95), 1.959963984540054, places=10)

    def test_half_widths_grow_per_season(self):
        """Test that widths widen by sqrt(k+1) once the horizon passes a season."""
        widths = prediction_half_widths(1.0, 4, 8, 0.99)
        z = z_score(0.99)
        np.testing.assert_allclose(widths[:4], z)
        np.testing.assert_allclose(widths[4:], z * np.sqrt(2))

    def test_periodic_insample_gives_zero_width(self):
        """Test that a perfectly periodic series yields lower == upper == forecast."""
        insample = [1.0, 5.0, 3.0, 2.0] * 3
        lower, upper = seasonal_naive_interval(insample, 4, 4)
        np.testing.assert_array_equal(lower, upper)
        np.testing.assert_array_equal(lower, [1.0, 5.0, 3.0, 2.0])
        with self.assertRaises(DegenerateSigmaError):
            seasonal_naive_interval(insample, 4, 4, strict=True)

    def test_sigma_uses_seasonal_differences(self):
        """Test sigma against a direct sample standard deviation."""
        insample = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0])
        residuals = insample[4:] - insample[:-4]
        self.assertAlmostEqual(seasonal_naive_residual_sigma(insample, 4), np.std(residuals, ddof=1))

    def test_insample_too_short(self):
        """Test that fewer than 2m observations is InsampleTooShort."""
        with self.assertRaises(InsampleTooShortError):
            seasonal_naive_interval([1, 2, 3, 4, 5, 6, 7], 4, 4)


class TestAnomalies(unittest.TestCase):
    """Test cases for anomaly flags."""

    def test_strict_boundaries(self):
        """Test that a value on the bound is not anomalous."""
        flags = flag_anomalies([1.0, 2.0, 3.0, -1.0], [1.0, 0.0, 0.0, 0.0], [2.0, 2.0, 2.5, 1.0])
        self.assertEqual(flags.tolist(), [False, False, True, True])

    def test_length_mismatch(self):
        """Test that mismatched arrays raise LengthMismatch."""
        with self.assertRaises(LengthMismatchError):
            flag_anomalies([1.0, 2.0], [0.0], [3.0])

    def test_flags_monotone_in_level(self):
        """Test that a wider interval never flags an observation a narrower one misses."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            insample = np.tile(rng.uniform(5, 15, 4), 4) + rng.normal(0, 1.0, 16)
            test = seasonal_naive_forecast(insample, 4, 8) + rng.normal(0, 3.0, 8)
            flags = []
            for level in (0.80, 0.90, 0.95, 0.99, 0.999):
                lower, upper = seasonal_naive_interval(insample, 4, 8, level)
                flags.append(flag_anomalies(test, lower, upper))
            for wider, narrower in zip(flags[1:], flags):
                self.assertFalse((wider & ~narrower).any())

    def test_flags_unchanged_by_rescaling(self):
        """Test that multiplying the series by a positive constant keeps the flags."""
        rng = np.random.default_rng(12)
        for c in (0.01, 3.7, 1000.0):
            insample = np.tile([10.0, 14.0, 8.0, 12.0], 5) + rng.normal(0, 0.5, 20)
            test = seasonal_naive_forecast(insample, 4, 8) + rng.normal(0, 2.0, 8)
            lower, upper = seasonal_naive_interval(insample, 4, 8)
            scaled_lower, scaled_upper = seasonal_naive_interval(c * insample, 4, 8)
            np.testing.assert_array_equal(flag_anomalies(test, lower, upper),
                                          flag_anomalies(c * test, scaled_lower, scaled_upper))

    def test_recovers_injected_spikes(self):
        """Test that +-10 sigma spikes are flagged at exactly their positions."""
        rng = np.random.default_rng(5)
        pattern = np.array([10.0, 14.0, 8.0, 12.0])
        insample = np.tile(pattern, 6) + rng.normal(0, 0.5, 24)
        sigma = seasonal_naive_residual_sigma(insample, 4)
        forecast = seasonal_naive_forecast(insample, 4, 8)

        test = forecast + 0.5 * sigma * np.sin(np.arange(8))
        spikes = {2: 10.0, 6: -10.0}
        for position, size in spikes.items():
            test[position] += size * sigma

        train = quarterly_series("s", insample)
        holdout = TimeSeries(unique_id="s", timestamps=pd.date_range("2006-01-01", periods=8, freq="QS"),
                             values=test, frequency=Frequency.QUARTERLY)
        profile = build_profile(train, holdout, level=0.99)
        self.assertEqual(np.flatnonzero(profile.is_anomaly).tolist(), sorted(spikes))


class TestHardness(unittest.TestCase):
    """Test cases for hardness scores."""

    def test_nearest_rank(self):
        """Test the nearest-rank percentile on distinct values."""
        self.assertEqual(nearest_rank_percentile(list(range(1, 11)), 0.9), 9.0)
        self.assertEqual(nearest_rank_percentile(list(range(1, 21)), 0.9), 18.0)
        self.assertEqual(nearest_rank_percentile([4.0], 0.9), 4.0)

    def test_top_decile_is_hard(self):
        """Test that exactly the scores above the P90 rank are hard."""
        rng = np.random.default_rng(1)
        scores = rng.permutation(np.arange(1.0, 21.0))
        profiles = {f"s{i}": profile_with_smape(f"s{i}", float(v)) for i, v in enumerate(scores)}
        result = hardness_scores(profiles)
        hard = sorted(result[uid]["score"] for uid in result if result[uid]["is_hard"])
        self.assertEqual(hard, [19.0, 20.0])

    def test_random_distinct_scores_brute_force(self):
        """Test hardness against a direct nearest-rank count on random distinct score sets."""
        rng = np.random.default_rng(21)
        for _ in range(300):
            n = int(rng.integers(1, 80))
            scores = rng.permutation(rng.choice(np.arange(1, 10_000), size=n, replace=False)).astype(float)
            profiles = {f"s{i}": profile_with_smape(f"s{i}", float(v)) for i, v in enumerate(scores)}
            result = hardness_scores(profiles)
            rank = -(-9 * n // 10)
            threshold = np.sort(scores)[rank - 1]
            expected = {f"s{i}" for i, v in enumerate(scores) if v > threshold}
            hard = {uid for uid, v in result.items() if v["is_hard"]}
            self.assertEqual(hard, expected)
            self.assertEqual(len(hard), n - rank)
            self.assertLessEqual(len(hard), -(-n // 10))

    def test_equal_scores_are_not_hard(self):
        """Test that a constant score set has no hard series (strict comparison)."""
        profiles = {f"s{i}": profile_with_smape(f"s{i}", 5.0) for i in range(10)}
        result = hardness_scores(profiles)
        self.assertFalse(any(v["is_hard"] for v in result.values()))

    def test_no_defined_scores(self):
        """Test that no defined baseline SMAPE is EmptyInput."""
        with self.assertRaises(EmptyInputError):
            hardness_scores({"a": profile_with_smape("a", None)})


class TestBuildProfiles(unittest.TestCase):
    """Test cases for collection-level profiles."""

    def test_profiles_and_forecast_rows(self):
        """Test profiles keep series order and produce SeasonalNaive rows."""
        values = np.tile([1.0, 2.0, 3.0, 4.0], 3) + np.linspace(0, 1, 12)
        series = {uid: quarterly_series(uid, values + offset) for uid, offset in (("b", 0.0), ("a", 3.0))}
        collection = SeriesCollection(series=series)
        train = collection.map(lambda ts: ts.slice(None, -4))
        test = collection.map(lambda ts: ts.slice(-4, None))

        profiles = build_profiles(train, test)
        self.assertEqual(list(profiles), ["b", "a"])
        self.assertEqual(profiles["a"].horizon, 4)

        rows = baseline_forecast_rows(profiles, test)
        self.assertEqual(len(rows), 8)
        self.assertEqual(set(rows["model"]), {BASELINE_MODEL_NAME})
        np.testing.assert_array_equal(rows["y_hat"].to_numpy()[:4], profiles["b"].forecast)

    def test_degenerate_sigma_strict_and_lenient(self):
        """Test that a periodic series warns by default and fails in strict mode."""
        periodic = quarterly_series("p", np.tile([1.0, 5.0, 3.0, 2.0], 4))
        collection = SeriesCollection(series={"p": periodic})
        train = collection.map(lambda ts: ts.slice(None, -4))
        test = collection.map(lambda ts: ts.slice(-4, None))

        with self.assertLogs("radar_eval.baseline_service", level="WARNING"):
            profiles = build_profiles(train, test)
        self.assertTrue(profiles["p"].degenerate)
        np.testing.assert_array_equal(profiles["p"].lower, profiles["p"].upper)
        with self.assertRaises(DegenerateSigmaError):
            build_profiles(train, test, strict=True)

    def test_baseline_name_clash(self):
        """Test that a user model already called SeasonalNaive is rejected."""
        values = np.tile([1.0, 2.0, 3.0, 4.0], 3) + np.linspace(0, 1, 12)
        collection = SeriesCollection(series={"a": quarterly_series("a", values)})
        train = collection.map(lambda ts: ts.slice(None, -4))
        test = collection.map(lambda ts: ts.slice(-4, None))
        profiles = build_profiles(train, test)

        check_baseline_name(["ModelA", "ModelB"])
        with self.assertRaises(DuplicateForecastError):
            check_baseline_name(["ModelA", BASELINE_MODEL_NAME])
        with self.assertRaises(DuplicateForecastError):
            baseline_forecast_rows(profiles, test, [BASELINE_MODEL_NAME])


if __name__ == '__main__':
    unittest.main()
