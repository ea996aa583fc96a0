#!/usr/bin/env python3
"""Independent computation of the persistence-forecast MAE on each fixture.

Replicates the pipeline arithmetic (quantile scale fit, digit rounding at
precision 2, persistence forecast, MAE) from scratch so the numbers frozen
into the acceptance tests come from a second implementation, not from the
code under test.
"""

import csv
import json
import math
import os
from datetime import date

ROOT = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")

PRECISION = 2
QUANTILE = 0.95
CUTOFF = date(2023, 6, 30)
MAX_LOOKBACK = 500


def fit_scale(reference):
    mags = sorted(abs(v) for v in reference)
    idx = min(max(int(math.ceil(QUANTILE * len(mags))), 1), len(mags)) - 1
    return max(mags[idx], 1e-9)


def round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def codec_round_trip(value, beta):
    scaled = value / beta * (10.0 ** PRECISION)
    q = round_half_away(scaled)
    return q / (10.0 ** PRECISION) * beta


def mae(truth, forecast):
    return sum(abs(y - f) for y, f in zip(truth, forecast)) / len(truth)


def persistence_mae(reference, target):
    beta = fit_scale(reference)
    fc = codec_round_trip(reference[-1], beta)
    return mae(target, [fc] * len(target))


def load_csv(path, target_col, date_col):
    out = []
    with open(path) as f:
        for row in csv.DictReader(f):
            out.append((date.fromisoformat(row[date_col]), float(row[target_col])))
    return out


def concurrent(path, target_col, horizons):
    rows = load_csv(path, target_col, "Date")
    start = next(i for i, (d, _) in enumerate(rows) if d > CUTOFF)
    values = [v for _, v in rows]
    lookback = min(4 * max(horizons), MAX_LOOKBACK, start)
    reference = values[start - lookback : start]
    result = {}
    for h in horizons:
        target = values[start : start + h]
        assert len(target) == h, f"{path}: not enough rows for H={h}"
        result[str(h)] = persistence_mae(reference, target)
    return result


def bundle_series(name):
    with open(os.path.join(ROOT, "benchmark", name)) as f:
        return [float(line) for line in f if line.strip()]


def benchmark(name):
    values = bundle_series(name)
    n = len(values)
    test_len = int(math.ceil(0.2 * n))
    reference = values[: n - test_len]
    target = values[n - test_len :]
    return {str(test_len): persistence_mae(reference, target)}


def main():
    expected = {
        "ili": concurrent(os.path.join(ROOT, "ili.csv"), "ILITotal", [4, 12, 20, 24]),
        "stock": concurrent(os.path.join(ROOT, "stock.csv"), "Open", [24, 48, 96, 120]),
        "weather": concurrent(
            os.path.join(ROOT, "weather.csv"), "TempAvg", [24, 48, 96, 120]
        ),
        "air-fixture": benchmark("air_monthly.txt"),
        "milk-fixture": benchmark("milk_monthly.txt"),
    }
    print(json.dumps(expected, indent=2))


if __name__ == "__main__":
    main()
