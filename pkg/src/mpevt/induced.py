"""First-return (induced) dynamics on renewal cells.

F_Y = f^{r_Y} on a renewal cell Y (default the base cell [1/2, 1)). The
induced point process counts exceedances along the F_Y orbit and rescales
by v^Y = 1/mu_Y(U_n) = v_n mu(Y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, seeding
from .mpmap import Interval, MapParams, preimage_ladder
from .process import PointProcessRealization, Window, required_length
from .tables import write_rows

DEFAULT_Y = Interval(0.5, 1.0)
RETURN_CAP = 10**8


class ReturnCapExceeded(RuntimeError):
    pass


class NotInsideY(ValueError):
    pass


@dataclass(frozen=True)
class InducedSystem:
    params: MapParams
    Y: Interval
    muY_mass: float
    return_cap: int = RETURN_CAP


def _renewal_cell_index(params, Y, M=2000, tol=1e-13):
    part = preimage_ladder(params, M)
    r = part.r
    for m in range(part.M):
        if abs(Y.hi - r[m]) <= tol and abs(Y.lo - r[m + 1]) <= tol:
            return m
    return -1


def induced_system(params: MapParams, mu, Y: Interval | None = None, return_cap: int = RETURN_CAP) -> InducedSystem:
    """Induced system on the renewal cell `Y` with mu(Y) read from `mu`."""
    Y = DEFAULT_Y if Y is None else Y
    if _renewal_cell_index(params, Y) < 0:
        raise ValueError(f"{Y} is not a cell of the renewal partition")
    mass = float(mu.mass(Y.lo, Y.hi))
    if not mass > 0:
        raise ValueError("mu(Y) must be positive")
    return InducedSystem(params, Y, mass, int(return_cap))


def first_return(params: MapParams, Y: Interval, x: float, cap: int = RETURN_CAP):
    """(f^r(x), r) for the smallest r >= 1 with f^r(x) in Y."""
    if x not in Y:
        raise NotInsideY(f"x = {x!r} is not in {Y}")
    img, r = _kernels.first_return(float(x), params.alpha, Y.lo, Y.hi, int(cap))
    if r < 0:
        raise ReturnCapExceeded(f"no return to {Y} within {cap} steps from x = {x!r}")
    return float(img), int(r)


@dataclass(frozen=True)
class InducedSeries:
    zeta: float
    points: np.ndarray = field(repr=False)
    returns: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return -np.abs(self.points - self.zeta)

    @property
    def original_times(self) -> np.ndarray:
        """Original-time index of each induced point."""
        return np.concatenate([[0], np.cumsum(self.returns[:-1])])


def induced_series(sys: InducedSystem, y0: float, n_visits: int, zeta: float) -> InducedSeries:
    """y_k = F_Y^k(y0) for k < n_visits together with r_Y(y_k)."""
    pts = np.empty(n_visits)
    rets = np.empty(n_visits, dtype=np.int64)
    y = float(y0)
    for k in range(n_visits):
        pts[k] = y
        y, rets[k] = first_return(sys.params, sys.Y, y, sys.return_cap)
    return InducedSeries(float(zeta), pts, rets)


@dataclass(frozen=True)
class InducedRealization(PointProcessRealization):
    original_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64), repr=False)


def induced_scale(sys: InducedSystem, entry) -> float:
    """v^Y = 1/mu_Y(U_n) = v_n mu(Y)."""
    return entry.v * sys.muY_mass


def check_inside(sys: InducedSystem, entry):
    U = entry.U
    if not (U.lo >= sys.Y.lo and U.hi <= sys.Y.hi):
        raise NotInsideY(f"U_n = [{U.lo:.6g}, {U.hi:.6g}) is not inside Y = [{sys.Y.lo}, {sys.Y.hi}); increase n")


def induced_repp(sys: InducedSystem, entry, zeta: float, J: Window, y0: float,
                 replica_id: int = 0) -> InducedRealization:
    """Induced rare-event point process started from y0 in Y.

    Parameters
    ----------
    sys : InducedSystem
    entry : ThresholdEntry
        Level and Kac factor of the original process; the induced factor is
        ``entry.v * sys.muY_mass``.
    zeta : float
        Centre of the balls, inside Y.
    J : Window
    y0 : float
        Start point in Y (draw it from mu_Y for stationary realisations).
    """
    if not (sys.Y.lo < zeta < sys.Y.hi):
        raise NotInsideY(f"zeta = {zeta} is not in the interior of {sys.Y}")
    check_inside(sys, entry)
    vY = induced_scale(sys, entry)
    if J.empty:
        return InducedRealization(entry.n, vY, np.empty(0, dtype=np.int64), J, replica_id,
                                  np.empty(0, dtype=np.int64))
    steps = required_length(vY, J)
    kidx, oidx, _, _ = _kernels.induced_run(float(y0), sys.params.alpha, sys.Y.lo, sys.Y.hi, zeta, entry.eps,
                                            steps, False)
    keep = np.zeros(len(kidx), dtype=bool)
    for a, b in J.parts:
        keep |= (kidx >= vY * a) & (kidx < vY * b)
    return InducedRealization(entry.n, vY, kidx[keep], J, replica_id, oidx[keep])


def induced_ensemble(sys: InducedSystem, entry, zeta: float, J: Window, base_seed: int, replicas,
                     burn_in: int = seeding.DEFAULT_BURN_IN):
    """One mu_Y-distributed realisation per replica index."""
    starts, _ = seeding.conditional_starts(sys.params, base_seed, replicas, sys.Y, seeding.STREAM_INDUCED, burn_in)
    return [induced_repp(sys, entry, zeta, J, float(y), int(r)) for y, r in zip(starts, np.atleast_1d(replicas))]


# ---------------------------------------------------------------- return-time law


def return_time_pmf_ladder(params: MapParams, mu, M: int = 10) -> np.ndarray:
    """mu_Y{r_Y = m} for m = 1..M on Y = [1/2, 1), from the preimage ladder.

    r_Y = m + 1 exactly on the pullback ((r_{m+1} + 1)/2, (r_m + 1)/2) of
    the renewal cell [r_{m+1}, r_m).
    """
    r = preimage_ladder(params, M).r
    muY = float(mu.mass(0.5, 1.0))
    out = np.empty(M)
    for m in range(M):
        lo, hi = 0.5 * (r[m + 1] + 1.0), 0.5 * (r[m] + 1.0)
        out[m] = float(mu.mass(lo, hi)) / muY
    return out


def return_time_pmf_orbit(returns, M: int = 10) -> np.ndarray:
    returns = np.asarray(returns)
    return np.array([np.mean(returns == m) for m in range(1, M + 1)])


def full_branch_check(params: MapParams, M: int = 50, tol: float = 1e-9) -> bool:
    """Branch domains of F_Y on Y = [1/2, 1) tile Y and each maps onto Y."""
    r = preimage_ladder(params, M).r
    lo = 0.5 * (r[1:] + 1.0)
    hi = 0.5 * (r[:-1] + 1.0)
    if abs(hi[0] - 1.0) > tol or np.any(np.abs(lo[:-1] - hi[1:]) > tol):
        return False
    for m in range(M):
        w = hi[m] - lo[m]
        imgs = []
        for frac in (1e-6, 0.5, 1.0 - 1e-6):
            img, ret = _kernels.first_return(float(lo[m] + frac * w), params.alpha, 0.5, 1.0, m + 2)
            if ret != m + 1:
                return False
            imgs.append(img)
        if not (imgs[0] < 0.5 + 0.01 and imgs[2] > 0.99 and imgs[0] < imgs[1] < imgs[2]):
            return False
    return True


# ---------------------------------------------------------------- comparison


@dataclass(frozen=True)
class ComparisonReport:
    windows: tuple
    k_max: int
    gaps: np.ndarray = field(repr=False)  # shape (len(windows), k_max)
    tail_original: np.ndarray = field(repr=False)
    tail_induced: np.ndarray = field(repr=False)

    @property
    def sup_distance(self) -> float:
        return float(self.gaps.max()) if self.gaps.size else 0.0


def tail_probabilities(counts, k_max: int = 5) -> np.ndarray:
    counts = np.asarray(counts)
    if len(counts) == 0:
        return np.zeros(k_max)
    return np.array([np.mean(counts >= k) for k in range(1, k_max + 1)])


def compare_induced_original(realizations_Y, realizations_orig, J_grid, k_max: int = 5) -> ComparisonReport:
    """|P(N_n(J) >= k) - P(N_n^Y(J) >= k)| for J in `J_grid` and k <= k_max."""
    if len(realizations_Y) != len(realizations_orig):
        raise ValueError("ensembles must have matched replica counts")
    if not 1 <= k_max <= 5:
        raise ValueError("k_max must lie in 1..5")
    J_grid = tuple(J_grid)
    gaps = np.zeros((len(J_grid), k_max))
    to = np.zeros_like(gaps)
    ti = np.zeros_like(gaps)
    for w, J in enumerate(J_grid):
        co = [r.count(J) for r in realizations_orig]
        cy = [r.count(J) for r in realizations_Y]
        to[w] = tail_probabilities(co, k_max)
        ti[w] = tail_probabilities(cy, k_max)
        gaps[w] = np.abs(to[w] - ti[w])
    return ComparisonReport(J_grid, k_max, gaps, to, ti)


INDUCED_COLUMNS = ("replica_id", "n", "v_n", "event_index", "rescaled_time", "original_index")


def write_induced(realizations, path, fmt: str = "csv"):
    rows = []
    for r in realizations:
        for j, o in zip(r.event_indices, r.original_indices):
            rows.append((r.replica_id, r.n, r.v, int(j), j / r.v, int(o)))
    return write_rows(path, INDUCED_COLUMNS, rows, fmt)


def kac_product(returns, muY: float):
    """(mean r_Y * mu(Y), standard error of that product)."""
    returns = np.asarray(returns, dtype=float)
    m = returns.mean()
    se = returns.std(ddof=1) / math.sqrt(len(returns))
    return float(m * muY), float(se * muY)
