"""Log-log regression used wherever a power-law exponent is measured."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int

    @property
    def prefactor(self) -> float:
        return float(np.exp(self.intercept))

    def predict(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.slope


def loglog_fit(x, y) -> PowerLawFit:
    """Least-squares fit of log|y| = intercept + slope * log x."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        raise ValueError("need at least two positive points for a log-log fit")
    res = stats.linregress(np.log(x[ok]), np.log(y[ok]))
    stderr = float(res.stderr) if ok.sum() > 2 else float("nan")
    return PowerLawFit(float(res.slope), float(res.intercept), stderr, int(ok.sum()))
