#!/usr/bin/env python3
"""Regenerate the small checked-in dataset fixtures under data/fixtures/.

The fixtures are deterministic synthetic extracts shaped like the real
sources (same columns, frequencies, and date ranges) so the test suite can
run fully offline. Full datasets can be placed in $TSFH_DATA_DIR by hand;
see scripts/fetch_data.sh for pointers.
"""

import csv
import math
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")


def weekdays(start, end):
    from datetime import date, timedelta

    d = date.fromisoformat(start)
    stop = date.fromisoformat(end)
    while d <= stop:
        if d.weekday() < 5:
            yield d
        d += timedelta(days=1)


def days(start, end):
    from datetime import date, timedelta

    d = date.fromisoformat(start)
    stop = date.fromisoformat(end)
    while d <= stop:
        yield d
        d += timedelta(days=1)


def mondays(start, end):
    for d in days(start, end):
        if d.weekday() == 0:
            yield d


def write_stock():
    rng = random.Random(42)
    rows = []
    price = 95.0
    for d in weekdays("2022-01-03", "2024-01-31"):
        drift = 0.0004 * price
        shock = rng.gauss(0.0, 1.2)
        price = max(20.0, price + drift + shock)
        o = round(price, 2)
        h = round(o + abs(rng.gauss(0.6, 0.4)), 2)
        lo = round(o - abs(rng.gauss(0.6, 0.4)), 2)
        c = round(rng.uniform(lo, h), 2)
        vol = int(rng.uniform(8e5, 3e6))
        rows.append([d.isoformat(), o, h, lo, c, c, vol])
    with open(os.path.join(ROOT, "stock.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"])
        w.writerows(rows)


def write_weather():
    rng = random.Random(7)
    rows = []
    for i, d in enumerate(days("2021-01-01", "2023-12-31")):
        seasonal = -5.0 + 18.0 * math.sin(2 * math.pi * (i - 100) / 365.25)
        temp = round(seasonal + rng.gauss(0.0, 3.0), 1)
        tmin = round(temp - abs(rng.gauss(4.0, 1.5)), 1)
        tmax = round(temp + abs(rng.gauss(4.0, 1.5)), 1)
        precip = round(max(0.0, rng.gauss(1.0, 2.0)), 1)
        humidity = round(min(100.0, max(20.0, rng.gauss(65.0, 12.0))), 0)
        wind = round(abs(rng.gauss(12.0, 5.0)), 1)
        pressure = round(rng.gauss(1013.0, 7.0), 1)
        snow = round(max(0.0, rng.gauss(-2.0, 3.0)) if temp < 0 else 0.0, 1)
        cloud = round(min(100.0, max(0.0, rng.gauss(55.0, 25.0))), 0)
        rows.append(
            [d.isoformat(), temp, tmin, tmax, precip, humidity, wind, pressure, snow, cloud]
        )
    with open(os.path.join(ROOT, "weather.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            [
                "Date",
                "TempAvg",
                "TempMin",
                "TempMax",
                "Precipitation",
                "Humidity",
                "WindSpeed",
                "Pressure",
                "Snowfall",
                "CloudCover",
            ]
        )
        w.writerows(rows)


def write_ili():
    rng = random.Random(13)
    rows = []
    for i, d in enumerate(mondays("2021-01-04", "2024-03-25")):
        # Winter-peaked seasonal wave in weekly patient counts.
        seasonal = 1.0 + 0.85 * math.cos(2 * math.pi * i / 52.18)
        level = 12000.0 * seasonal + rng.gauss(0.0, 900.0)
        rows.append([d.isoformat(), max(200, int(level))])
    with open(os.path.join(ROOT, "ili.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["Date", "ILITotal"])
        w.writerows(rows)


def write_benchmark_bundle():
    bundle = os.path.join(ROOT, "benchmark")
    os.makedirs(bundle, exist_ok=True)
    rng = random.Random(3)

    # 144-point monthly series with trend and annual seasonality.
    air = []
    for i in range(144):
        trend = 110.0 + 2.2 * i
        seasonal = 1.0 + 0.22 * math.sin(2 * math.pi * (i % 12) / 12.0)
        air.append(round(trend * seasonal + rng.gauss(0.0, 6.0), 1))
    with open(os.path.join(bundle, "air_monthly.txt"), "w") as f:
        f.write("\n".join(str(v) for v in air) + "\n")

    # 168-point monthly series, seasonal around a slow trend.
    milk = []
    for i in range(168):
        trend = 700.0 + 0.9 * i
        seasonal = 60.0 * math.sin(2 * math.pi * (i % 12) / 12.0)
        milk.append(round(trend + seasonal + rng.gauss(0.0, 8.0), 1))
    with open(os.path.join(bundle, "milk_monthly.txt"), "w") as f:
        f.write("\n".join(str(v) for v in milk) + "\n")

    # Exactly 12-periodic series: a seasonal-naive forecast reproduces the
    # held-out suffix with zero error.
    cycle = [10.0, 12.0, 15.0, 19.0, 24.0, 30.0, 31.0, 28.0, 22.0, 17.0, 13.0, 11.0]
    periodic = cycle * 4
    with open(os.path.join(bundle, "periodic_monthly.txt"), "w") as f:
        f.write("\n".join(str(v) for v in periodic) + "\n")

    manifest = (
        '[\n'
        '  {"name": "air-fixture", "file": "air_monthly.txt", "frequency": "month"},\n'
        '  {"name": "milk-fixture", "file": "milk_monthly.txt", "frequency": "month"},\n'
        '  {"name": "periodic-fixture", "file": "periodic_monthly.txt", "frequency": "month"}\n'
        ']\n'
    )
    with open(os.path.join(bundle, "manifest.json"), "w") as f:
        f.write(manifest)


def main():
    os.makedirs(ROOT, exist_ok=True)
    write_stock()
    write_weather()
    write_ili()
    write_benchmark_bundle()
    print("fixtures written to", os.path.abspath(ROOT))


if __name__ == "__main__":
    main()
