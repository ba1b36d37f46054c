"""Log-log rate fitting for convergence sweeps."""

from dataclasses import dataclass

import numpy as np

FIRST_ORDER = (-1.35, -0.65)
SECOND_ORDER = (-2.5, -1.5)

#: residuals below this are treated as exact zeros, leaving no rate to fit
EXACT_FLOOR = 1e-13


def fit_loglog_slope(sizes, residuals, floor=EXACT_FLOOR):
    """Least-squares slope of log(residual) against log(n).

    Returns nan when any residual is at or below ``floor``.
    """
    sizes = np.asarray(sizes, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if sizes.size < 3:
        raise ValueError(f"slope fit needs at least 3 sizes, got {sizes.size}")
    if np.any(residuals <= floor):
        return float("nan")
    slope, _ = np.polyfit(np.log(sizes), np.log(residuals), 1)
    return float(slope)


@dataclass
class ConvergenceTable:
    experiment: str
    sizes: list
    residuals: list
    window: tuple = FIRST_ORDER

    @property
    def slope(self):
        return fit_loglog_slope(self.sizes, self.residuals)

    @property
    def passed(self):
        s = self.slope
        return bool(self.window[0] <= s <= self.window[1])

    def rows(self):
        return [(self.experiment, int(n), float(r)) for n, r in zip(self.sizes, self.residuals)]

    def summary(self):
        s = self.slope
        return {
            "experiment": self.experiment,
            "fitted_slope": None if np.isnan(s) else s,
            "slope_window": list(self.window),
            "pass": self.passed,
        }
