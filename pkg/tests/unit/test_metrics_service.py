import random
import unittest

import numpy as np
import pandas as pd

from core.pipeline import (EmptyInputError, InsampleTooShortError,
                           LengthMismatchError, ZeroDenominatorError)
from models.results import Metric
from models.series import EvalFrame, Frequency, TimeSeries
from services.metrics_service import (build_loss_table, mase, mase_scale,
                                      smape, smape_points)


def brute_smape(actuals, forecasts):
    total = 0.0
    for y, f in zip(actuals, forecasts):
        denominator = (abs(y) + abs(f)) / 2.0
        total += 0.0 if denominator == 0 else 100.0 * abs(f - y) / denominator
    return total / len(actuals)


def brute_mase(actuals, forecasts, insample, m):
    mae = sum(abs(y - f) for y, f in zip(actuals, forecasts)) / len(actuals)
    naive = [abs(insample[i] - insample[i - m]) for i in range(m, len(insample))]
    return mae / (sum(naive) / len(naive))


def make_eval_frame(losses_by_model, horizon=4, m=4, train_values=None):
    """Build an EvalFrame with quarterly series s0..sN from explicit forecasts."""
    rows = []
    train = {}
    first = next(iter(losses_by_model.values()))
    for uid in first:
        ts = TimeSeries(unique_id=uid,
                        timestamps=pd.date_range("2000-01-01", periods=12, freq="QS"),
                        values=train_values.get(uid) if train_values else np.arange(1.0, 13.0),
                        frequency=Frequency.QUARTERLY)
        train[uid] = ts
    for model, per_series in losses_by_model.items():
        for uid, (actual, forecast) in per_series.items():
            for h in range(horizon):
                rows.append({"unique_id": uid, "ds": pd.Timestamp("2003-01-01") + pd.DateOffset(months=3 * h),
                             "horizon": h + 1, "actual": actual[h], "model": model, "forecast": forecast[h]})
    frame = pd.DataFrame(rows)
    return EvalFrame(frame=frame, train=train)


class TestSmape(unittest.TestCase):
    """Test cases for SMAPE."""

    def test_examples(self):
        """Test the documented SMAPE values."""
        self.assertAlmostEqual(smape([100], [110]), 9.523809523809524, places=12)
        self.assertEqual(smape([0, 0], [0, 0]), 0.0)
        self.assertEqual(smape([1], [-1]), 200.0)
        self.assertEqual(smape([5, 5, 5], [5, 5, 5]), 0.0)

    def test_zero_over_zero_point_is_zero(self):
        """Test that a point where both values are zero contributes zero."""
        points = smape_points([0.0, 10.0], [0.0, 20.0])
        self.assertEqual(points[0], 0.0)
        self.assertAlmostEqual(points[1], 100.0 * 10 / 15)

    def test_length_mismatch(self):
        """Test that mismatched lengths raise LengthMismatch."""
        with self.assertRaises(LengthMismatchError):
            smape([1, 2], [1])
        with self.assertRaises(EmptyInputError):
            smape([], [])

    def test_random_oracle(self):
        """Test SMAPE against a brute-force loop on 1000 random cases."""
        rng = random.Random(7)
        for _ in range(1000):
            n = rng.randint(1, 24)
            actuals = [rng.choice([0.0, rng.uniform(-50, 50)]) for _ in range(n)]
            forecasts = [rng.choice([0.0, rng.uniform(-50, 50)]) for _ in range(n)]
            value = smape(actuals, forecasts)
            self.assertAlmostEqual(value, brute_smape(actuals, forecasts), delta=1e-10)
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 200.0)

    def test_symmetry(self):
        """Test that SMAPE is symmetric in its arguments."""
        rng = np.random.default_rng(3)
        y = rng.uniform(1, 10, 12)
        f = rng.uniform(1, 10, 12)
        self.assertAlmostEqual(smape(y, f), smape(f, y), places=12)

    def test_negation_and_scale_invariance(self):
        """Test that negating both inputs or scaling both by c > 0 leaves SMAPE unchanged."""
        rng = random.Random(19)
        for _ in range(500):
            n = rng.randint(1, 24)
            actuals = np.array([rng.choice([0.0, rng.uniform(-50, 50)]) for _ in range(n)])
            forecasts = np.array([rng.choice([0.0, rng.uniform(-50, 50)]) for _ in range(n)])
            value = smape(actuals, forecasts)
            self.assertAlmostEqual(smape(-actuals, -forecasts), value, delta=1e-10)
            c = rng.choice([1e-3, 0.5, 7.0, 1e4])
            self.assertAlmostEqual(smape(c * actuals, c * forecasts), value, delta=1e-10)


class TestMase(unittest.TestCase):
    """Test cases for MASE."""

    def test_example(self):
        """Test the documented MASE value."""
        self.assertEqual(mase([10, 10], [11, 9], [1, 2, 3, 4], 1), 1.0)
        self.assertEqual(mase([4, 4], [5, 3], [1, 3, 2, 5], 1), 0.5)
        self.assertEqual(mase([4, 4], [4, 4], [1, 3, 2, 5], 1), 0.0)

    def test_constant_insample(self):
        """Test that a seasonally constant in-sample series is undefined."""
        with self.assertRaises(ZeroDenominatorError):
            mase([10], [11], [5, 5, 5], 1)

    def test_insample_too_short(self):
        """Test that the in-sample must be longer than m."""
        with self.assertRaises(InsampleTooShortError):
            mase_scale([1, 2, 3, 4], 4)

    def test_random_oracle(self):
        """Test MASE against a brute-force loop on 1000 random cases."""
        rng = random.Random(11)
        checked = 0
        for _ in range(1000):
            m = rng.choice([1, 4, 12])
            insample = [rng.uniform(0, 100) for _ in range(rng.randint(m + 1, m + 30))]
            n = rng.randint(1, 24)
            actuals = [rng.uniform(0, 100) for _ in range(n)]
            forecasts = [rng.uniform(0, 100) for _ in range(n)]
            self.assertAlmostEqual(mase(actuals, forecasts, insample, m),
                                   brute_mase(actuals, forecasts, insample, m), delta=1e-10)
            checked += 1
        self.assertEqual(checked, 1000)

    def test_insample_naive_scores_one(self):
        """Test that the lag-m naive forecast scored over the scaling window gives exactly 1."""
        rng = random.Random(31)
        for _ in range(300):
            m = rng.choice([1, 2, 4, 12])
            insample = np.array([rng.uniform(-100, 100) for _ in range(rng.randint(m + 1, m + 30))])
            value = mase(insample[m:], insample[:-m], insample, m)
            self.assertAlmostEqual(value, 1.0, delta=1e-12)


class TestBuildLossTable(unittest.TestCase):
    """Test cases for loss table construction."""

    def setUp(self):
        """Set up two models on two series."""
        self.frame = make_eval_frame({
            "A": {"s1": ([10, 10, 10, 10], [11, 9, 10, 10]), "s2": ([5, 5, 5, 5], [5, 5, 5, 6])},
            "B": {"s1": ([10, 10, 10, 10], [12, 8, 10, 10]), "s2": ([5, 5, 5, 5], [5, 5, 5, 5])},
        })

    def test_smape_table(self):
        """Test series and point losses for SMAPE."""
        table = build_loss_table(self.frame, Metric.SMAPE)
        self.assertEqual(len(table.series_losses), 4)
        self.assertEqual(len(table.point_losses), 16)
        self.assertEqual(table.models, ["A", "B"])
        a = table.series_losses_for("A")
        self.assertAlmostEqual(a["s1"], brute_smape([10] * 4, [11, 9, 10, 10]))
        self.assertEqual(table.series_losses_for("B")["s2"], 0.0)
        self.assertEqual(table.exclusions, ())

    def test_point_losses_average_to_series_loss(self):
        """Test that per-point losses average to the series loss."""
        table = build_loss_table(self.frame, Metric.SMAPE)
        points = table.point_losses.groupby(["model", "unique_id"])["loss"].mean()
        for row in table.series_losses.itertuples():
            self.assertAlmostEqual(points[(row.model, row.unique_id)], row.loss, places=12)

    def test_mase_exclusion(self):
        """Test that a series with an undefined MASE is excluded for all models."""
        frame = make_eval_frame({
            "A": {"s1": ([10, 10, 10, 10], [11, 9, 10, 10]), "s2": ([5, 5, 5, 5], [5, 5, 5, 6])},
            "B": {"s1": ([10, 10, 10, 10], [12, 8, 10, 10]), "s2": ([5, 5, 5, 5], [5, 5, 5, 5])},
        }, train_values={"s1": np.arange(1.0, 13.0), "s2": np.full(12, 3.0)})
        with self.assertLogs("radar_eval.metrics_service", level="WARNING"):
            table = build_loss_table(frame, Metric.MASE)
        self.assertEqual(sorted(table.series_losses["unique_id"].unique()), ["s1"])
        self.assertEqual(len(table.exclusions), 1)
        self.assertEqual(table.exclusions[0]["unique_id"], "s2")
        # s1 in-sample 1..12 with m=4 has scale 4
        self.assertAlmostEqual(table.series_losses_for("A")["s1"], 0.5 / 4)

    def test_scaled_table(self):
        """Test that scaling multiplies every loss."""
        table = build_loss_table(self.frame, Metric.SMAPE)
        scaled = table.scaled(3.7)
        np.testing.assert_allclose(scaled.series_losses["loss"], table.series_losses["loss"] * 3.7)


if __name__ == '__main__':
    unittest.main()
