"""Observation series, exceedances, clusters and rare-event point processes.

The observable is always phi(x) = -|x - zeta|, so X_j > u with u = -eps
means the orbit is inside the open ball of radius eps around zeta.

Time windows follow one lattice convention throughout: event index j is
counted in the rescaled window [a, b) when v a <= j < v b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, seeding
from .mpmap import Interval, MapParams
from .tables import write_rows

HITTING_CAP = 10**9


class SeriesTooShort(ValueError):
    def __init__(self, have, need):
        super().__init__(f"series has {have} observations, window needs {need}")
        self.have = have
        self.need = need


# ---------------------------------------------------------------- series


@dataclass(frozen=True)
class ObservationSeries:
    zeta: float
    values: np.ndarray = field(repr=False)
    observable: str = "NegDist"

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MaxRecord:
    n: int
    M_n: float


def observe(params: MapParams, x0: float, n: int, zeta: float) -> ObservationSeries:
    """X_i = -|f^i(x0) - zeta| for i < n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = _kernels.orbit(float(x0), params.alpha, int(n))
    return ObservationSeries(float(zeta), -np.abs(xs - zeta))


def _values(series):
    return series.values if isinstance(series, ObservationSeries) else np.asarray(series, dtype=float)


def prefix_max(series) -> np.ndarray:
    return np.maximum.accumulate(_values(series))


def running_max(series) -> list[MaxRecord]:
    """M_n = max(X_0, ..., X_{n-1}) for n = 1..len(series)."""
    return [MaxRecord(i + 1, float(m)) for i, m in enumerate(prefix_max(series))]


def exceedances(series, u: float) -> np.ndarray:
    """Increasing indices j with X_j > u."""
    return np.flatnonzero(_values(series) > u)


# ---------------------------------------------------------------- windows


@dataclass(frozen=True)
class Window:
    """Finite union of half-open intervals [a, b) on the rescaled time axis."""

    parts: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        parts = sorted((float(a), float(b)) for a, b in self.parts if b > a)
        for a, b in parts:
            if a < 0:
                raise ValueError("windows live on [0, inf)")
        merged = []
        for a, b in parts:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "parts", tuple(merged))

    @classmethod
    def interval(cls, a, b):
        return cls(((a, b),))

    @property
    def empty(self) -> bool:
        return not self.parts

    @property
    def sup(self) -> float:
        return self.parts[-1][1] if self.parts else 0.0

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.parts)

    def union(self, other: "Window") -> "Window":
        return Window(self.parts + other.parts)

    def count_indices(self, idx, v: float) -> int:
        idx = np.asarray(idx)
        total = 0
        for a, b in self.parts:
            total += int(np.count_nonzero((idx >= v * a) & (idx < v * b)))
        return total


def required_length(v: float, J: Window) -> int:
    """Observations needed so every lattice point of v J is covered."""
    return int(math.ceil(v * J.sup))


# ---------------------------------------------------------------- REPP


@dataclass(frozen=True)
class PointProcessRealization:
    n: int
    v: float
    event_indices: np.ndarray = field(repr=False)
    window: Window = Window()
    replica_id: int = 0

    @property
    def rescaled_times(self) -> np.ndarray:
        return self.event_indices / self.v

    def count(self, J: Window | None = None) -> int:
        """N_n(J) = #{j in v J, X_j > u_n}; J defaults to the full window."""
        J = self.window if J is None else J
        return J.count_indices(self.event_indices, self.v)


def repp(series, entry, J: Window, replica_id: int = 0) -> PointProcessRealization:
    """Rare-event point process of `series` at the level of a schedule entry.

    Parameters
    ----------
    series : ObservationSeries or array_like
    entry : ThresholdEntry
        Supplies n, u_n and v_n.
    J : Window
        Rescaled window; the series must cover v_n sup(J).
    """
    vals = _values(series)
    need = required_length(entry.v, J)
    if len(vals) < need:
        raise SeriesTooShort(len(vals), need)
    idx = exceedances(vals, entry.u)
    keep = np.zeros(len(idx), dtype=bool)
    for a, b in J.parts:
        keep |= (idx >= entry.v * a) & (idx < entry.v * b)
    return PointProcessRealization(entry.n, entry.v, idx[keep], J, replica_id)


def realization_from_indices(entry, idx, J: Window, replica_id: int = 0) -> PointProcessRealization:
    idx = np.asarray(idx, dtype=np.int64)
    keep = np.zeros(len(idx), dtype=bool)
    for a, b in J.parts:
        keep |= (idx >= entry.v * a) & (idx < entry.v * b)
    return PointProcessRealization(entry.n, entry.v, idx[keep], J, replica_id)


# ---------------------------------------------------------------- clusters


@dataclass(frozen=True)
class ClusterRecord:
    q: int
    clusters: list = field(repr=False)
    cluster_end_indices: np.ndarray = field(repr=False)
    n_exceedances: int = 0
    truncated: bool = False

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=np.int64)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def n_complete(self) -> int:
        """Clusters whose end event is determined by the series."""
        return self.n_clusters - int(self.truncated)


def decluster_indices(idx, q: int, length: int | None = None) -> ClusterRecord:
    """Runs declustering of sorted exceedance indices with run gap <= q.

    Each run's A^(q) event is its last exceedance. When `length` is given
    and the last exceedance lies within q of the end, that run is flagged
    truncated and its end is left out of ``cluster_end_indices``.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) == 0:
        return ClusterRecord(q, [], np.empty(0, dtype=np.int64), 0, False)
    breaks = np.flatnonzero(np.diff(idx) > q) + 1
    clusters = np.split(idx, breaks)
    ends = np.array([c[-1] for c in clusters], dtype=np.int64)
    truncated = length is not None and q > 0 and ends[-1] + q >= length
    if truncated:
        ends = ends[:-1]
    return ClusterRecord(q, clusters, ends, len(idx), bool(truncated))


def decluster(series, u: float, q: int) -> ClusterRecord:
    vals = _values(series)
    return decluster_indices(exceedances(vals, u), q, len(vals))


def cluster_sizes_in(idx, q: int, lo: int, hi: int) -> np.ndarray:
    """Sizes of runs (gap <= q) whose first exceedance lies in [lo, hi)."""
    idx = np.asarray(idx, dtype=np.int64)
    rec = decluster_indices(idx, q)
    starts = np.array([c[0] for c in rec.clusters], dtype=np.int64)
    if len(starts) == 0:
        return np.empty(0, dtype=np.int64)
    sel = (starts >= lo) & (starts < hi)
    return rec.sizes[sel]


# ---------------------------------------------------------------- hitting times


@dataclass(frozen=True)
class HittingTimeSample:
    """First hitting (or return) times r >= 1 to `target`, one per start.

    Entries equal to -1 hit the cap and are counted in ``n_capped``.
    """

    target: Interval
    r: np.ndarray = field(repr=False)
    conditioned: bool = False
    n_capped: int = 0

    def valid(self) -> np.ndarray:
        return self.r[self.r > 0]


def hitting_times(params: MapParams, mu, target: Interval, n_samples: int, conditioned: bool = False,
                  seed: int = 0, spacing: int | None = None, cap: int = HITTING_CAP,
                  burn_in: int = seeding.DEFAULT_BURN_IN) -> HittingTimeSample:
    """Hitting times along one burnt-in stationary orbit.

    Unconditioned starts are taken every `spacing` steps (default: about
    one mean return time, capped at 10^4); conditioned starts are the
    successive visits of the orbit to `target`.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = float(mu.mass(target.lo, target.hi)) if mu is not None else 1.0
    if not m > 0:
        raise ValueError(f"target {target} has zero mass")
    if spacing is None:
        spacing = int(min(10**4, max(1, round(1.0 / m))))
    x0, _ = seeding.stationary_starts(params, seed, [0], seeding.STREAM_HITTING, burn_in)
    r, n_capped = _kernels.hitting_times_from_orbit(float(x0[0]), params.alpha, target.lo, target.hi,
                                                    int(n_samples), int(spacing), bool(conditioned), int(cap))
    return HittingTimeSample(target, r, bool(conditioned), int(n_capped))


# ---------------------------------------------------------------- ensembles


def ball_ensemble(params: MapParams, zeta: float, eps: float, length: int, base_seed: int, replicas,
                  stream: int = seeding.STREAM_ORIGINAL, burn_in: int = seeding.DEFAULT_BURN_IN,
                  min_events: int = 0, max_steps: int | None = None):
    """Exceedance indices of one stationary replica per index in `replicas`.

    Each replica runs `length` steps; with ``min_events > 0`` it keeps
    running (up to `max_steps`) until that many exceedances were seen, which
    lets callers read unbiased gaps past the window edge.
    """
    starts, restarts = seeding.stationary_starts(params, base_seed, replicas, stream, burn_in)
    out = []
    for x in starts:
        if min_events:
            idx, _ = _kernels.ball_exceedances_extended(float(x), params.alpha, zeta, eps, int(length),
                                                       int(min_events), int(max_steps or 100 * length))
        else:
            idx, _ = _kernels.ball_exceedances(float(x), params.alpha, zeta, eps, int(length))
        out.append(idx)
    return out, restarts


def window_counts(indices, v: float, J: Window) -> np.ndarray:
    return np.array([J.count_indices(i, v) for i in indices], dtype=np.int64)


def pooled_first_gaps(indices, v: float) -> np.ndarray:
    """Rescaled gap between the first two exceedances of each replica."""
    g = [(i[1] - i[0]) / v for i in indices if len(i) >= 2]
    return np.asarray(g, dtype=float)


def maxima_below(indices, length: int) -> np.ndarray:
    """1 where a replica had no exceedance before `length`, i.e. M_n <= u_n."""
    return np.array([0 if (len(i) and i[0] < length) else 1 for i in indices], dtype=np.int64)


REALIZATION_COLUMNS = ("replica_id", "n", "v_n", "event_index", "rescaled_time")


def realization_rows(realizations):
    rows = []
    for r in realizations:
        for j in r.event_indices:
            rows.append((r.replica_id, r.n, r.v, int(j), j / r.v))
    return rows


def write_realizations(realizations, path, fmt: str = "csv"):
    return write_rows(path, REALIZATION_COLUMNS, realization_rows(realizations), fmt)
