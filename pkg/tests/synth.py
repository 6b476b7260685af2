"""Synthetic CCKP/FAOSTAT-format snapshot generator for tests.

Produces the four input CSVs with realistic shapes: climate series from
1901, pesticides from 1990, yields from 1961, so the merged panel lands on
1990-2016 purely through the join. The yield signal couples crop item with
climate multiplicatively (each crop has its own rain/temperature optimum),
which linear models with item dummies cannot represent; tree ensembles can.
A "linear" variant writes an additive signal instead.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

COUNTRIES = (
    ("Afghanistan", "AFG"),
    ("Albania", "ALB"),
    ("Argentina", "ARG"),
    ("Australia", "AUS"),
    ("Brazil", "BRA"),
    ("Canada", "CAN"),
    ("India", "IND"),
    ("Japan", "JPN"),
    ("Kenya", "KEN"),
    ("Mexico", "MEX"),
)

ITEMS = (
    "Cassava",
    "Maize",
    "Plantains and others",
    "Potatoes",
    "Rice, paddy",
    "Sorghum",
    "Soybeans",
    "Sweet potatoes",
    "Wheat",
    "Yams",
)

# per-item (base yield hg/ha, optimal temp C, optimal rain mm)
ITEM_PARAMS = {
    "Cassava": (62000.0, 26.0, 1400.0),
    "Maize": (58000.0, 16.0, 800.0),
    "Plantains and others": (66000.0, 27.0, 1800.0),
    "Potatoes": (72000.0, 10.0, 1000.0),
    "Rice, paddy": (56000.0, 24.0, 1600.0),
    "Sorghum": (48000.0, 22.0, 600.0),
    "Soybeans": (52000.0, 20.0, 900.0),
    "Sweet potatoes": (68000.0, 21.0, 1100.0),
    "Wheat": (50000.0, 12.0, 500.0),
    "Yams": (64000.0, 25.0, 1500.0),
}


def _rain(ci: int, year: int) -> float:
    base = 350.0 + 160.0 * ci
    wave = 0.22 * math.sin(0.61 * year + 1.3 * ci) + 0.1 * math.sin(0.13 * year)
    return base * (1.0 + wave)


def _temp(ci: int, year: int) -> float:
    base = 6.0 + 2.1 * ci
    return base + 0.015 * (year - 1950) + 0.8 * math.sin(0.37 * year + 0.5 * ci)


def _pesticides(ci: int, year: int) -> float:
    base = 4000.0 + 2600.0 * ci
    return base * (1.0 + 0.035 * (year - 1990)) * (1.0 + 0.05 * math.sin(0.9 * year + ci))


def _yield_value(
    item: str, ci: int, rain: float, temp: float, pest: float, noise: float, signal: str
) -> float:
    base, opt_temp, opt_rain = ITEM_PARAMS[item]
    if signal == "linear":
        value = base + 30.0 * rain + 900.0 * temp + 0.4 * pest
    else:
        ii = list(ITEM_PARAMS).index(item)
        climate = math.exp(
            -(((temp - opt_temp) / 5.5) ** 2) - (((rain - opt_rain) / 550.0) ** 2)
        )
        # item-by-country idiosyncrasy: reachable through the pesticide level
        # (a country proxy) only via deep feature interactions
        quirk = 1.0 + 0.15 * math.sin(2.7 * ci + 1.9 * ii)
        value = base * (0.30 + 1.4 * climate) * (0.75 + 0.25 * math.tanh(pest / 30000.0)) * quirk
    return max(value * (1.0 + noise), 100.0)


def write_snapshot(
    dirpath: str | Path,
    seed: int = 0,
    countries=COUNTRIES,
    items=ITEMS,
    climate_years: tuple[int, int] = (1901, 2016),
    pesticide_years: tuple[int, int] = (1990, 2018),
    yield_years: tuple[int, int] = (1961, 2019),
    signal: str = "interactive",
    noise_scale: float = 0.10,
) -> dict[str, Path]:
    """Write rain/temp/pesticides/yield CSVs; returns their paths."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {
        "rain": dirpath / "rain.csv",
        "temp": dirpath / "temp.csv",
        "pesticides": dirpath / "pesticides.csv",
        "yield": dirpath / "yield.csv",
    }

    with paths["rain"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Year", "Country", "ISO3", "Rainfall - (MM)"])
        for year in range(climate_years[0], climate_years[1] + 1):
            for ci, (name, iso3) in enumerate(countries):
                w.writerow([year, name, iso3, f"{_rain(ci, year):.5f}"])

    with paths["temp"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Year", "Country", "ISO3", "Temperature - (Celsius)"])
        for year in range(climate_years[0], climate_years[1] + 1):
            for ci, (name, iso3) in enumerate(countries):
                w.writerow([year, name, iso3, f"{_temp(ci, year):.6f}"])

    with paths["pesticides"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Area", "Item", "Year", "Unit", "Value"])
        for name, _ in countries:
            ci = [c[0] for c in countries].index(name)
            for year in range(pesticide_years[0], pesticide_years[1] + 1):
                w.writerow(
                    [name, "Pesticides (total)", year, "tonnes", f"{_pesticides(ci, year):.2f}"]
                )

    with paths["yield"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["Area", "Item", "Year", "Unit", "Value"])
        for ci, (name, _) in enumerate(countries):
            for item in items:
                for year in range(yield_years[0], yield_years[1] + 1):
                    value = _yield_value(
                        item,
                        ci,
                        _rain(ci, year),
                        _temp(ci, year),
                        _pesticides(ci, max(year, pesticide_years[0])),
                        float(rng.normal(scale=noise_scale)),
                        signal,
                    )
                    w.writerow([name, item, year, "hg/ha", f"{value:.1f}"])

    return paths


def small_snapshot(dirpath: str | Path, **kwargs) -> dict[str, Path]:
    """Compact variant for fast CLI tests: 4 countries, 2 items, 12 years."""
    defaults = dict(
        countries=COUNTRIES[:4],
        items=ITEMS[:2],
        climate_years=(1995, 2010),
        pesticide_years=(1999, 2012),
        yield_years=(1995, 2010),
    )
    defaults.update(kwargs)
    return write_snapshot(dirpath, **defaults)
