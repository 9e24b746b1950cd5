"""Invariant measure estimates and threshold schedules.

Two independent backends estimate mu_alpha:

* ``ulam``: stationary vector of the Ulam discretisation of the transfer
  operator on a mesh graded geometrically toward 0;
* ``empirical``: visit frequencies of one long seeded orbit.

Both answer the same queries (``cdf``, ``mass``, ``density_at``), which is
what the threshold solvers use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels, seeding
from .fitting import PowerLawFit, loglog_fit
from .mpmap import Interval, MapParams
from .tables import read_rows, write_rows

DEFAULT_CELLS = 4096
DEFAULT_GRADING = 1.02
DEFAULT_X_MIN = 1e-12


class MeshError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3g})")
        self.residual = residual


class ThresholdError(ValueError):
    pass


class ResolutionError(ValueError):
    """Target set is smaller than the mesh can resolve."""


# ---------------------------------------------------------------- meshes


def graded_mesh(n_cells: int, grading: float = DEFAULT_GRADING, x_min: float = DEFAULT_X_MIN) -> np.ndarray:
    """Breakpoints 0 = x_0 < ... < x_N = 1 with N = n_cells.

    With ``grading == 1`` the mesh is uniform. Otherwise cells grow by the
    factor `grading` from ``[0, x_min)`` up to a switch point x_s, beyond
    which they have the constant width x_s (grading - 1). 1/2 is always a
    breakpoint of a graded mesh. If `n_cells` is too small to reach down to
    `x_min`, the geometric part starts higher.
    """
    n_cells = int(n_cells)
    if n_cells < 1:
        raise MeshError("need at least one cell")
    if grading < 1:
        raise MeshError("grading must be >= 1")
    if grading == 1 or n_cells < 8:
        return np.linspace(0.0, 1.0, n_cells + 1)
    lg = math.log(grading)

    def total(xs):
        return math.log(xs / x_min) / lg + (1.0 - xs) / (xs * (grading - 1.0))

    if total(0.5) > n_cells - 1:
        # not enough cells: stop the geometric ladder short of x_min
        n_uni = max(2, int(round(0.5 / (0.5 * (grading - 1.0)))))
        n_uni = min(n_uni, n_cells // 2)
        n_geo = n_cells - 1 - n_uni
        xs = 0.5
    else:
        lo, hi = x_min * (1 + 1e-9), 0.5
        for _ in range(200):  # total() is decreasing on (0, 1/2]
            mid = math.sqrt(lo * hi)
            if total(mid) > n_cells - 1:
                lo = mid
            else:
                hi = mid
        xs = hi
        n_uni = int(round((1.0 - xs) / (xs * (grading - 1.0))))
        n_geo = n_cells - 1 - n_uni
    geo = xs * grading ** (-np.arange(n_geo, -1, -1, dtype=float))
    width = (1.0 - xs) / n_uni
    n_left = max(0, int(round((0.5 - xs) / width)))
    n_right = n_uni - n_left
    if n_left == 0:
        left = np.array([xs])
        n_right = n_uni
    else:
        left = np.linspace(xs, 0.5, n_left + 1)
    right = np.linspace(0.5, 1.0, n_right + 1)
    pts = np.concatenate([[0.0], geo, left[1:] if n_left else [], right[1:] if n_left else right])
    pts = np.unique(pts)
    if xs < 0.5 and 0.5 not in pts:  # pragma: no cover - defensive
        pts = np.unique(np.append(pts, 0.5))
    return pts


def _check_mesh(mesh):
    mesh = np.asarray(mesh, dtype=float)
    if mesh.ndim != 1 or len(mesh) < 2 or mesh[0] != 0.0 or mesh[-1] != 1.0:
        raise MeshError("mesh must run from 0 to 1")
    if np.any(np.diff(mesh) <= 0):
        raise MeshError("mesh breakpoints must be strictly increasing (no repeats)")
    return mesh


# ---------------------------------------------------------------- Ulam


@dataclass(frozen=True)
class UlamOperator:
    params: MapParams
    mesh: np.ndarray = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)
    stationary: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.mesh) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.mesh)

    def residual(self) -> float:
        return float(np.max(np.abs(self.matrix.T @ self.stationary - self.stationary)))


def _branch_pieces(mesh, pre, lo, hi):
    """Pieces of [lo, hi] cut by source cells and by target preimages."""
    src = mesh[(mesh > lo) & (mesh < hi)]
    pts = np.unique(np.concatenate([[lo, hi], src, pre]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    i = np.searchsorted(mesh, mid, side="right") - 1
    j = np.searchsorted(pre, mid, side="right") - 1
    return i, j, b - a


def ulam_matrix(params: MapParams, mesh) -> sp.csr_matrix:
    """Row-stochastic P with P[i, j] = Leb(cell_i & f^-1 cell_j) / Leb(cell_i)."""
    mesh = _check_mesh(mesh)
    n = len(mesh) - 1
    pre_l = _kernels.left_inverse_array(mesh, params.alpha)
    pre_l[0], pre_l[-1] = 0.0, 0.5
    pre_r = 0.5 * (mesh + 1.0)
    rows, cols, vals = [], [], []
    for pre, lo, hi in ((pre_l, 0.0, 0.5), (pre_r, 0.5, 1.0)):
        i, j, length = _branch_pieces(mesh, pre, lo, hi)
        keep = length > 0
        rows.append(i[keep])
        cols.append(np.clip(j[keep], 0, n - 1))
        vals.append(length[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals) / np.diff(mesh)[rows]
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    return P


def _power_sweeps(P_T, pi, tol, max_sweeps):
    diff = np.inf
    for sweep in range(max_sweeps):
        nxt = P_T @ pi
        nxt /= nxt.sum()
        diff = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if diff < tol:
            return pi, sweep + 1, diff
    raise ConvergenceError(f"power iteration did not converge in {max_sweeps} sweeps", diff)


def _direct_stationary(P):
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    # pin the last cell to 1 and solve the remaining balance equations;
    # a dense normalisation row would wreck the sparsity of the LU factors
    A = (sp.identity(n, format="csr") - P.T).tocsc()
    rhs = np.asarray(A[:-1, -1].todense()).ravel() * -1.0
    sub = A[:-1, :-1]
    head = spla.spsolve(sub, rhs)
    pi = np.append(head, 1.0)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def build_ulam(params: MapParams, n_cells: int = DEFAULT_CELLS, grading: float = DEFAULT_GRADING,
               x_min: float = DEFAULT_X_MIN, mesh=None) -> UlamOperator:
    """Ulam discretisation of the transfer operator and its stationary vector.

    The stationary vector comes from a sparse direct solve, polished by power
    sweeps until successive iterates differ by < 1e-12 in sup norm.

    Parameters
    ----------
    params : MapParams
    n_cells : int
        Number of cells (ignored when `mesh` is given).
    grading : float
        Geometric growth factor of cell widths away from 0; 1 gives a uniform
        mesh.
    x_min : float
        Right end of the first cell for graded meshes.
    mesh : array_like, optional
        Explicit breakpoints.
    """
    if mesh is None:
        mesh = graded_mesh(n_cells, grading, x_min)
    mesh = _check_mesh(mesh)
    P = ulam_matrix(params, mesh)
    pi = _direct_stationary(P)
    pi, _, _ = _power_sweeps(P.T.tocsr(), pi, 1e-12, 10**6)
    return UlamOperator(params, mesh, P, pi)


def power_iteration(op: UlamOperator, tol: float = 1e-12, max_sweeps: int = 10**6, start=None):
    """Plain power iteration from the uniform (Lebesgue) start.

    Returns (stationary, sweeps, final_diff); raises ConvergenceError.
    """
    w = op.widths if start is None else np.asarray(start, dtype=float)
    w = w / w.sum()
    return _power_sweeps(op.matrix.T.tocsr(), w, tol, max_sweeps)


# ---------------------------------------------------------------- measures


def _piecewise_cdf(edges, cum, masses, alpha, s):
    i = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, masses.shape[-1] - 1)
    frac = (s - edges[i]) / (edges[i + 1] - edges[i])
    first = i == 0
    if np.any(first):
        frac = np.where(first, np.clip(frac, 0.0, 1.0) ** (1.0 - alpha), frac)
    out = cum[..., i] + masses[..., i] * frac
    return np.where(s >= 1.0, 1.0, out)


@dataclass
class InvariantMeasure:
    """Piecewise description of mu_alpha on a partition of [0, 1].

    ``masses[i]`` is the mass of ``[edges[i], edges[i+1])``. The first
    cell follows the s^(1 - alpha) profile internally and other cells are
    uniform. The empirical backend also keeps per-batch visit counts of
    consecutive orbit segments, used for batch-means standard errors.
    """

    backend: str
    params: MapParams
    edges: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    C0: float = float("nan")
    c_mass: float = float("nan")
    c0_reliable: bool = False
    batch_counts: np.ndarray | None = field(default=None, repr=False)
    restarts: int = 0

    def __post_init__(self):
        self._cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        self._bcum = self._bmass = None
        if self.batch_counts is not None:
            per = self.batch_counts.sum(axis=1, keepdims=True)
            self._bmass = self.batch_counts / per
            self._bcum = np.concatenate([np.zeros((len(per), 1)), np.cumsum(self._bmass, axis=1)], axis=1)

    @property
    def n_samples(self) -> int:
        return 0 if self.batch_counts is None else int(self.batch_counts.sum())

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.widths

    def density_at(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.masses) - 1)
        out = self.density[i]
        return float(out) if out.ndim == 0 else out

    def cdf(self, s):
        """mu([0, s))."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        out = _piecewise_cdf(self.edges, self._cum, self.masses, self.params.alpha, s)
        return float(out) if np.ndim(out) == 0 else out

    def mass(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def mass_se(self, lo, hi):
        """Batch-means standard error of mass(lo, hi); 0 for Ulam."""
        if self._bmass is None:
            return 0.0 * np.asarray(hi, dtype=float)
        a = self.params.alpha
        f = lambda v: _piecewise_cdf(self.edges, self._bcum, self._bmass, a,
                                     np.clip(np.atleast_1d(np.asarray(v, dtype=float)), 0.0, 1.0))
        m = f(hi) - f(lo)  # batches x points
        se = m.std(axis=0, ddof=1) / math.sqrt(m.shape[0])
        return float(se[0]) if np.ndim(hi) == 0 and np.ndim(lo) == 0 else se


def measure_interval(mu: InvariantMeasure, iv: Interval) -> float:
    """mu([iv.lo, iv.hi))."""
    return float(mu.mass(iv.lo, iv.hi))


def _near_zero_fit(edges, masses, alpha, ok):
    """C0 and c from the lowest decade of usable cells (excluding [0, x_1))."""
    idx = np.flatnonzero(ok)
    idx = idx[idx > 0]
    if len(idx) == 0:
        return float("nan"), float("nan"), False
    start = edges[idx[0]]
    sel = idx[edges[idx + 1] <= 10.0 * start]
    if len(sel) < 3:
        return float("nan"), float("nan"), False
    mid = 0.5 * (edges[sel] + edges[sel + 1])
    h = masses[sel] / (edges[sel + 1] - edges[sel])
    g = h * mid**alpha
    # increments above the first cell, whose own mass is a discretisation artefact
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    base = edges[sel[0]]
    c = (cum[sel + 1] - cum[sel[0]]) / (edges[sel + 1] ** (1.0 - alpha) - base ** (1.0 - alpha))
    c = c[edges[sel + 1] >= 2.0 * base]
    spread = (g.max() - g.min()) / g.mean()
    return float(g.mean()), float(c.mean()), bool(spread < 0.10)


def stationary_density(op: UlamOperator, method: str = "direct") -> InvariantMeasure:
    """Wrap an Ulam stationary vector as an :class:`InvariantMeasure`.

    ``method="power"`` recomputes the stationary vector by power iteration
    from Lebesgue (successive sup distance < 1e-12, at most 1e6 sweeps)
    instead of reusing the direct solve.
    """
    if method == "power":
        pi, _, _ = power_iteration(op)
    elif method == "direct":
        pi = op.stationary
    else:
        raise ValueError(f"unknown method {method!r}")
    alpha = op.params.alpha
    C0, c, ok = _near_zero_fit(op.mesh, pi, alpha, np.ones(len(pi), dtype=bool))
    return InvariantMeasure("ulam", op.params, op.mesh, pi.copy(), C0, c, ok)


EMPIRICAL_CELLS = 1 << 16
EMPIRICAL_GRADING = 1.01
EMPIRICAL_BATCHES = 20


def empirical_measure(params: MapParams, n_samples: int = 10**7, burn_in: int = seeding.DEFAULT_BURN_IN,
                      seed: int = 0, edges=None, min_count: int = 100,
                      n_batches: int = EMPIRICAL_BATCHES) -> InvariantMeasure:
    """Visit frequencies of one long orbit started from a seeded uniform draw.

    The orbit is histogrammed on the fly (nothing is stored per sample) in
    `n_batches` consecutive segments. The default mesh is graded with
    ratio 1.01 near 0 and roughly 1.5e-4 wide cells above.
    """
    if n_samples < 10**5:
        raise ValueError("n_samples must be >= 1e5")
    if edges is None:
        edges = graded_mesh(EMPIRICAL_CELLS, EMPIRICAL_GRADING, DEFAULT_X_MIN)
    edges = _check_mesh(edges)
    per = int(n_samples) // int(n_batches)
    gen = seeding.replica_generator(seed, 0, seeding.STREAM_EMPIRICAL)
    restarts = 0
    while True:
        x0, hit0 = _kernels.iterate(gen.random(), params.alpha, int(burn_in))
        if not hit0:
            counts, _, hit = _kernels.orbit_histogram(x0, params.alpha, per, edges, int(n_batches))
            if not hit:
                break
        restarts += 1
        if restarts > 16:
            raise RuntimeError("orbit keeps hitting 0")
    total = counts.sum(axis=0)
    masses = total / total.sum()
    bm = counts / per
    rel = bm.std(axis=0, ddof=1) / np.sqrt(n_batches) / np.maximum(masses, 1e-300)
    ok = (total >= min_count) & (rel <= 0.05)
    C0, c, reliable = _near_zero_fit(edges, masses, params.alpha, ok)
    return InvariantMeasure("empirical", params, edges, masses, C0, c, reliable, batch_counts=counts,
                            restarts=restarts)


def fit_mass_exponent(mu: InvariantMeasure, s_lo: float = 1e-4, s_hi: float = 1e-2, n_points: int = 21) -> PowerLawFit:
    """Log-log regression of mu([0, s)) against s on a log grid."""
    s = np.logspace(np.log10(s_lo), np.log10(s_hi), n_points)
    return loglog_fit(s, mu.cdf(s))


def fit_mass_constant(mu: InvariantMeasure, s_lo: float = 1e-4, s_hi: float = 1e-2, n_points: int = 21) -> float:
    """c minimising the squared log error of mu([0, s)) ~ c s^(1 - alpha)."""
    s = np.logspace(np.log10(s_lo), np.log10(s_hi), n_points)
    m = mu.cdf(s)
    return float(np.exp(np.mean(np.log(m) - (1.0 - mu.params.alpha) * np.log(s))))


def _log_bins(x_lo, x_hi, per_decade):
    k = max(2, int(round(per_decade * math.log10(x_hi / x_lo))))
    return np.logspace(math.log10(x_lo), math.log10(x_hi), k + 1)


def flatness(mu: InvariantMeasure, x_lo: float, x_hi: float, bins_per_decade: int = 10) -> float:
    """(max - min) / mean of h(x) x^alpha on log bins covering [x_lo, x_hi].

    Each bin contributes mass / width times the alpha-th power of its
    geometric midpoint; for an exact power law this is the same in every bin.
    """
    e = _log_bins(x_lo, x_hi, bins_per_decade)
    if e[0] < mu.edges[1] * (1 - 1e-12):
        raise ResolutionError(f"[{x_lo}, {x_hi}] reaches into the first cell")
    m = mu.mass(e[:-1], e[1:])
    g = m / np.diff(e) * np.sqrt(e[:-1] * e[1:]) ** mu.params.alpha
    return float((g.max() - g.min()) / g.mean())


def last_resolved_decade(mu: InvariantMeasure, rel_se: float = 0.01, bins_per_decade: int = 10,
                         step: float = 0.1) -> tuple[float, float]:
    """Lowest decade [x, 10x] above the first cell that the backend resolves.

    Ulam: starts at the end of the first cell. Empirical: the lowest x on a
    grid of `step` decades such that every log bin of the decade has a
    batch-means relative standard error <= `rel_se`.
    """
    start = float(mu.edges[1])
    if mu.backend != "empirical":
        return start, 10.0 * start
    k = math.ceil(math.log10(start) / step - 1e-9)
    while (k + 1 / step) * step <= 0.0 + 1e-12:
        x = 10.0 ** (k * step)
        e = _log_bins(x, 10.0 * x, bins_per_decade)
        m = mu.mass(e[:-1], e[1:])
        se = mu.mass_se(e[:-1], e[1:])
        if np.all(m > 0) and np.all(se <= rel_se * m):
            return x, 10.0 * x
        k += 1
    raise ResolutionError("no resolved decade")


# ---------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class ThresholdEntry:
    n: int
    u: float
    U: Interval
    A: Interval | None
    a: float
    b: float
    mass_U: float
    mass_A: float
    v: float
    resolved: bool = True

    @property
    def eps(self) -> float:
        """Ball radius: X > u iff |x - zeta| < eps."""
        return -self.u


@dataclass(frozen=True)
class ThresholdSchedule:
    mode: str  # "classical" | "adjusted-zero"
    tau: float
    zeta: float
    q: int
    entries: tuple[ThresholdEntry, ...]

    def entry(self, n: int) -> ThresholdEntry:
        for e in self.entries:
            if e.n == n:
                return e
        raise KeyError(n)

    @property
    def ns(self) -> list[int]:
        return [e.n for e in self.entries]

    COLUMNS = ("n", "u_n", "a_n", "b_n", "mass_Un", "mass_An", "v_n")

    def rows(self):
        return [(e.n, e.u, e.a, e.b, e.mass_U, e.mass_A, e.v) for e in self.entries]


def _bisect_log(fun, lo, hi, target, iters=400):
    """Solve fun(x) = target for increasing fun on [lo, hi] in log scale."""
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (llo + lhi)
        if fun(math.exp(mid)) < target:
            llo = mid
        else:
            lhi = mid
        if lhi - llo < 1e-15:
            break
    return math.exp(lhi)


def classical_thresholds(mu: InvariantMeasure, zeta: float, tau: float, ns) -> ThresholdSchedule:
    """Levels u_n = -eps_n with n mu(B_eps_n(zeta)) = tau.

    For zeta = 0 the entries also carry a_n (f(a_n) = b_n = eps_n) and the
    cluster-end region A_n = [a_n, b_n) for q = 1.
    """
    if not tau > 0:
        raise ThresholdError("tau must be positive")
    if not 0.0 <= zeta <= 1.0:
        raise ThresholdError("zeta must lie in [0, 1]")
    eps_max = max(zeta, 1.0 - zeta)

    def ball(eps):
        return float(mu.mass(max(0.0, zeta - eps), min(1.0, zeta + eps)))

    entries = []
    for n in ns:
        n = int(n)
        target = tau / n
        total = ball(eps_max)
        if target > total * (1 + 1e-12):
            raise ThresholdError(f"tau/n = {target:.4g} exceeds the mass {total:.4g} available around zeta")
        if target >= total:
            eps = eps_max
        else:
            eps = _bisect_log(ball, 1e-300, eps_max, target)
        m = ball(eps)
        resolved = abs(n * m - tau) <= 0.01 * tau
        U = Interval(max(0.0, zeta - eps), min(1.0, zeta + eps))
        if zeta == 0.0:
            b = U.hi
            a = float(_kernels.left_inverse(b, mu.params.alpha))
            A = Interval(a, b) if a < b else None
            mA = float(mu.mass(a, b))
        else:
            a = b = float("nan")
            A = None
            mA = float("nan")
        entries.append(ThresholdEntry(n, -eps, U, A, a, b, m, mA, 1.0 / m, resolved))
    q = 1 if zeta == 0.0 else 0
    return ThresholdSchedule("classical", float(tau), float(zeta), q, tuple(entries))


def adjusted_thresholds_zero(mu: InvariantMeasure, params: MapParams | None = None, tau: float = 1.0, ns=(),
                             q: int = 1) -> ThresholdSchedule:
    """Thresholds at zeta = 0 keeping n mu(Q_n) = tau, Q_n = [a_n, f(a_n)).

    Here U_n = [0, b_n) with b_n = f(a_n), so n mu(U_n) grows without bound.
    """
    params = params or mu.params
    if not tau > 0:
        raise ThresholdError("tau must be positive")
    if q != 1:
        raise ThresholdError("adjusted thresholds are defined for q = 1")
    alpha, k = params.alpha, params.k

    def f(a):
        return a * (1.0 + k * a**alpha)

    def qmass(a):
        return float(mu.mass(a, min(1.0, f(a))))

    a_top = 0.5 * (1 - 1e-12)
    entries = []
    for n in ns:
        n = int(n)
        target = tau / n
        if target > qmass(a_top):
            raise ThresholdError(f"tau/n = {target:.4g} exceeds the largest attainable mass of [a, f(a))")
        a = _bisect_log(qmass, 1e-300, a_top, target)
        b = f(a)
        mQ = qmass(a)
        mU = float(mu.cdf(b))
        resolved = abs(n * mQ - tau) <= 0.01 * tau
        entries.append(ThresholdEntry(n, -b, Interval(0.0, b), Interval(a, b), a, b, mU, mQ, 1.0 / mU, resolved))
    return ThresholdSchedule("adjusted-zero", float(tau), 0.0, 1, tuple(entries))


# ---------------------------------------------------------------- transfer operator


def transfer_push_bound(op: UlamOperator, sched: ThresholdSchedule, n: int, j_max: int,
                        min_cells: int = 2) -> np.ndarray:
    """sup over Q_n of the discretised P^j(1_{Q_n} h) / h for j = 1..j_max.

    Cells count as part of Q_n when their midpoint lies in it.
    """
    if sched.mode != "adjusted-zero":
        raise ValueError("transfer_push_bound needs an adjusted-zero schedule")
    e = sched.entry(n)
    Q = e.A
    mesh = op.mesh
    mid = 0.5 * (mesh[1:] + mesh[:-1])
    cells = np.flatnonzero((mid >= Q.lo) & (mid < Q.hi))
    if len(cells) < min_cells:
        raise ResolutionError(f"Q_n = [{Q.lo:.3g}, {Q.hi:.3g}) covers {len(cells)} cells; refine the mesh")
    lo = np.maximum(mesh[:-1], Q.lo)
    hi = np.minimum(mesh[1:], Q.hi)
    overlap = np.clip(hi - lo, 0.0, None) / op.widths
    pi = op.stationary
    w = pi * overlap
    P_T = op.matrix.T.tocsr()
    out = np.empty(int(j_max))
    denom = pi[cells]
    for j in range(int(j_max)):
        w = P_T @ w
        out[j] = float(np.max(w[cells] / denom))
    return out


def first_return_index(values, rel_floor: float = 1e-6) -> int:
    """1-based j of the first genuine return in a push-bound sequence.

    Mass smeared into boundary cells at j = 1 is skipped: the return is the
    first j after the sequence has dropped below ``rel_floor * max`` at
    which it rises above that floor again. Returns -1 if there is none.
    """
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return -1
    floor = rel_floor * v.max()
    below = np.flatnonzero(v <= floor)
    if len(below) == 0:
        return -1
    after = np.flatnonzero(v[below[0]:] > floor)
    if len(after) == 0:
        return -1
    return int(below[0] + after[0] + 1)


# ---------------------------------------------------------------- serialisation


def write_ulam(op: UlamOperator, path, fmt: str = "csv"):
    """One row per cell: cell, lo, hi, stationary, density."""
    w = op.widths
    rows = [(i, op.mesh[i], op.mesh[i + 1], op.stationary[i], op.stationary[i] / w[i]) for i in range(op.n_cells)]
    return write_rows(path, ("cell", "lo", "hi", "stationary", "density"), rows, fmt)


def write_ulam_matrix(op: UlamOperator, path, fmt: str = "csv"):
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]
    return write_rows(path, ("row", "col", "value"), rows, fmt)


def read_ulam(params: MapParams, cells_path, matrix_path) -> UlamOperator:
    _, cells = read_rows(cells_path)
    _, trip = read_rows(matrix_path)
    mesh = np.array([c[1] for c in cells] + [cells[-1][2]], dtype=float)
    pi = np.array([c[3] for c in cells], dtype=float)
    n = len(pi)
    r = np.array([t[0] for t in trip], dtype=np.int64)
    c = np.array([t[1] for t in trip], dtype=np.int64)
    v = np.array([t[2] for t in trip], dtype=float)
    return UlamOperator(params, mesh, sp.csr_matrix((v, (r, c)), shape=(n, n)), pi)


def write_schedule(sched: ThresholdSchedule, path, fmt: str = "csv"):
    return write_rows(path, ThresholdSchedule.COLUMNS, sched.rows(), fmt)


def read_schedule_rows(path) -> list[dict]:
    cols, rows = read_rows(path)
    return [dict(zip(cols, r)) for r in rows]
