#!/usr/bin/env python3
"""Regenerates data/fixture: six synthetic regions drawn from two growth regimes."""

import csv
import datetime as dt
import math
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixture"

# (a, b, c, gamma) per 100k, c per 60 days
REGIMES = {
    "low": ((300.0, 20.0, 10.0, 1.4), (15.0, 30.0, 9.0, 1.2)),
    "high": ((1500.0, 30.0, 12.0, 1.2), (110.0, 45.0, 11.0, 1.0)),
}

REGIONS = [
    ("Aldmoor", "low", 2_400_000, 52, 6),
    ("Brennet", "high", 8_100_000, 58, 4),
    ("Caskara", "low", 5_300_000, 47, 8),
    ("Dunholt", "high", 1_900_000, 50, 5),
    ("Eskwater", "low", 12_700_000, 55, 3),
    ("Fallowmere", "high", 3_600_000, 44, 7),
]


def curve(t, a, b, c, gamma):
    return a * (1.0 + b * math.exp(-c * t)) ** (-gamma)


def main():
    rng = np.random.default_rng(20200415)
    OUT.mkdir(parents=True, exist_ok=True)
    start = dt.date(2020, 3, 1)
    with open(OUT / "series.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["region", "date", "cases", "deaths"])
        for name, regime, pop, days, lead in REGIONS:
            cases_p, deaths_p = REGIMES[regime]
            cum = [0, 0]
            for d in range(lead + days):
                t = (d - lead) / 60.0
                rates = []
                for p, sd in ((cases_p, 0.004), (deaths_p, 0.006)):
                    mu = curve(t, *p) if t >= 0 else curve(0.0, *p) * 0.5 ** (lead - d)
                    rates.append(max(mu * (1.0 + sd * rng.standard_normal()), 0.0))
                for i in range(2):
                    cum[i] = max(cum[i], round(rates[i] * pop / 1e5))
                w.writerow([name, (start + dt.timedelta(days=d)).isoformat(), cum[0], cum[1]])
    with open(OUT / "population.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["region", "population"])
        for name, _, pop, _, _ in sorted(REGIONS):
            w.writerow([name, pop])


if __name__ == "__main__":
    main()
