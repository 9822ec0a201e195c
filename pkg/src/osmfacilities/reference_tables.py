"""Published country-level figures for the ten-country West African study set.

``PROPORTIONS`` holds percentages per country (schools, clinics,
unresolved, other) from structured keys only. ``DENSITIES`` holds data
points per 100,000 people: the total, then the four classes from
structured keys, then the four classes after text enrichment. The
``*_MEDIANS`` dicts are the median rows as printed.
"""

from __future__ import annotations

from osmfacilities.stats import median

COUNTRIES = ("Benin", "Burkina Faso", "Cote d'Ivoire", "Guinea", "Mali", "Mauritania", "Niger",
             "Senegal", "Chad", "Togo")

SCOPE_NOTE = ("Per-country absolute counts in these tables come from multi-gigabyte 2021 "
              "country extracts and an unnamed population source. They are not reproducible "
              "from the bundled inputs; only the median arithmetic over the printed rows is "
              "checked here.")

PROPORTION_COLUMNS = ("schools", "clinics", "unresolved", "other")

PROPORTIONS = {
    "Benin": (0.19, 0.004, 91.681, 8.126),
    "Burkina Faso": (0.272, 0.026, 76.071, 23.631),
    "Cote d'Ivoire": (0.048, 0.054, 83.902, 15.996),
    "Guinea": (0.069, 0.008, 66.288, 33.635),
    "Mali": (0.02, 0.003, 88.89, 11.087),
    "Mauritania": (0.022, 0.005, 65.193, 34.78),
    "Niger": (0.013, 0.01, 85.451, 14.527),
    "Senegal": (0.059, 0.01, 53.245, 46.686),
    "Chad": (0.071, 0.013, 83.736, 16.179),
    "Togo": (0.039, 0.011, 93.234, 6.715),
}

PROPORTION_MEDIANS = {"schools": 0.058, "clinics": 0.01, "unresolved": 85.275, "other": 17.096}

DENSITY_COLUMNS = ("total",
                   "original_schools", "original_clinics", "original_unresolved", "original_other",
                   "enriched_schools", "enriched_clinics", "enriched_unresolved", "enriched_other")

DENSITIES = {
    "Benin": (7455.39, 14.13, 0.28, 7306.140, 134.84, 35.18, 8.32, 6822.56, 589.33),
    "Burkina Faso": (4603.63, 12.54, 1.20, 4512.940, 76.95, 33.22, 5.73, 3492.33, 1072.35),
    "Cote d'Ivoire": (6134.35, 2.96, 3.34, 5823.000, 305.05, 22.16, 18.36, 5133.84, 959.99),
    "Guinea": (7262.19, 4.98, 0.59, 5346.690, 1909.93, 15.00, 5.88, 4805.03, 2436.28),
    "Mali": (22898.67, 4.62, 0.61, 22173.040, 720.40, 113.94, 14.03, 20340.82, 2429.88),
    "Mauritania": (888.61, 0.19, 0.04, 790.400, 97.98, 3.74, 1.35, 568.91, 314.61),
    "Niger": (20140.68, 2.58, 1.95, 19766.320, 369.83, 44.42, 16.91, 17197.11, 2882.24),
    "Senegal": (4247.86, 2.52, 0.44, 2713.210, 1531.69, 17.39, 8.12, 2240.28, 1982.07),
    "Chad": (70005.87, 5.00, 0.93, 6824.410, 63175.53, 8.03, 4.49, 5856.08, 64137.27),
    "Togo": (10978.69, 4.33, 1.24, 10832.980, 140.14, 20.68, 9.26, 10219.84, 728.91),
}

DENSITY_MEDIANS = dict(zip(DENSITY_COLUMNS, (7358.79, 4.475, 0.77, 6323.705, 337.44,
                                             21.42, 8.22, 5494.96, 1527.21)))


def column(table: dict, columns: tuple[str, ...], name: str) -> list[float]:
    i = columns.index(name)
    return [table[c][i] for c in COUNTRIES]


def recomputed_medians(table: dict, columns: tuple[str, ...]) -> dict[str, float]:
    return {name: median(column(table, columns, name)) for name in columns}


def proportion_median_discrepancies(tolerance: float = 0.0005) -> dict[str, dict[str, float]]:
    """Columns whose printed median differs from the median of the printed rows."""
    ours = recomputed_medians(PROPORTIONS, PROPORTION_COLUMNS)
    return {name: {"published": PROPORTION_MEDIANS[name], "recomputed": round(ours[name], 6)}
            for name in PROPORTION_COLUMNS
            if abs(ours[name] - PROPORTION_MEDIANS[name]) > tolerance}
