"""Estimators and goodness-of-fit checks for rare-event statistics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import _kernels, seeding
from .fitting import PowerLawFit, loglog_fit
from .mpmap import MapParams

Z95 = 1.959963984540054


# ---------------------------------------------------------------- extremal index


@dataclass(frozen=True)
class EIEstimate:
    q: int
    obrien: float
    runs: float
    inverse_mean_cluster: float
    obrien_ci: float
    runs_ci: float
    inverse_mean_cluster_ci: float
    n_exceedances: int
    n_clusters: int
    n_a_events: int


def _ratio_ci(num, den):
    """Half-width of a 95% CI for sum(num)/sum(den) over iid replicas."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    k = len(num)
    if k < 2 or den.sum() == 0:
        return float("nan")
    R = num.sum() / den.sum()
    resid = num - R * den
    se = math.sqrt(np.sum(resid**2) / (k * (k - 1))) / den.mean()
    return float(Z95 * se)


def ei_estimate(records, q: int | None = None) -> EIEstimate:
    """Extremal-index estimates pooled over per-replica cluster records.

    * O'Brien: number of A^(q) events over number of exceedances,
      counting only A events the series determines;
    * runs: number of clusters over number of exceedances;
    * inverse mean cluster size: 1 / (exceedances per cluster).

    Parameters
    ----------
    records : sequence of ClusterRecord
        One per replica, all declustered with the same q.
    q : int, optional
        Checked against the records when given.

    Returns
    -------
    EIEstimate
        Confidence half-widths use the delta method for ratio estimators
        with replicas as independent units.
    """
    records = list(records)
    if q is None:
        q = records[0].q if records else 0
    if any(r.q != q for r in records):
        raise ValueError("all records must share the same q")
    exc = np.array([r.n_exceedances for r in records], dtype=np.int64)
    clu = np.array([r.n_clusters for r in records], dtype=np.int64)
    a_ev = np.array([len(r.cluster_end_indices) for r in records], dtype=np.int64)
    # exceedances whose A-event status is determined (drop the truncated tail run)
    exc_det = np.array([r.n_exceedances - (len(r.clusters[-1]) if r.truncated else 0) for r in records],
                       dtype=np.int64)
    E, C, A, Ed = int(exc.sum()), int(clu.sum()), int(a_ev.sum()), int(exc_det.sum())
    if E == 0:
        nan = float("nan")
        return EIEstimate(q, nan, nan, nan, nan, nan, nan, 0, 0, 0)
    obrien = A / Ed if Ed else float("nan")
    runs = C / E
    inv = 1.0 / (E / C)
    ci_r = _ratio_ci(clu, exc)
    return EIEstimate(q, obrien, runs, inv, _ratio_ci(a_ev, exc_det), ci_r, ci_r, E, C, A)


# ---------------------------------------------------------------- goodness of fit


@dataclass(frozen=True)
class GOFReport:
    law: str
    statistic: float
    threshold: float
    passed: bool
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.statistic < self.threshold))


def tv_distance(counts, pmf, tail_from: int) -> float:
    """TV between the empirical pmf of integer `counts` and `pmf` on
    {0, ..., tail_from - 1} plus a tail bucket {>= tail_from}.

    ``pmf`` holds the model probabilities of 0..tail_from-1; the tail
    bucket gets the remaining mass.
    """
    counts = np.asarray(counts, dtype=np.int64)
    pmf = np.asarray(pmf, dtype=float)
    emp = np.bincount(np.minimum(counts, tail_from), minlength=tail_from + 1)[: tail_from + 1] / len(counts)
    model = np.append(pmf, max(0.0, 1.0 - pmf.sum()))
    return float(0.5 * np.abs(emp - model).sum())


def _poisson_support(mean, floor=1e-6):
    """Smallest K covering every k with Poisson(mean) mass >= floor."""
    k = int(math.floor(mean))
    while sps.poisson.pmf(k + 1, mean) >= floor:
        k += 1
    return k + 1


def poisson_gof(counts, T: float, threshold: float = 0.05) -> GOFReport:
    """TV distance of window counts from Poisson(T).

    The comparison runs over the Poisson support where the pmf is at least
    1e-6, with all larger values pooled in one tail bucket.
    """
    counts = np.asarray(counts)
    K = _poisson_support(T)
    pmf = sps.poisson.pmf(np.arange(K), T)
    stat = tv_distance(counts, pmf, K)
    return GOFReport("Poisson", stat, threshold, False, len(counts), {"T": float(T)})


def geometric_pmf(theta: float, kmax: int) -> np.ndarray:
    """pi_k = theta (1 - theta)^(k - 1) for k = 1..kmax."""
    k = np.arange(1, kmax + 1)
    return theta * (1.0 - theta) ** (k - 1)


def kappa_max(theta: float, n_clusters: int) -> int:
    """Smallest kappa whose expected cluster count under Geometric(theta) is < 5."""
    if theta >= 1.0:
        return 1
    k = 1
    while n_clusters * theta * (1.0 - theta) ** (k - 1) >= 5.0:
        k += 1
    return k


def geometric_gof(sizes, theta: float, threshold: float = 0.05, kmax: int | None = None) -> GOFReport:
    """TV of cluster sizes from Geometric(theta) on {1..kmax - 1} plus {>= kmax}."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if kmax is None:
        kmax = max(2, kappa_max(theta, len(sizes)))
    model = geometric_pmf(theta, kmax - 1)
    stat = tv_distance(sizes - 1, model, kmax - 1)
    return GOFReport("Geometric", stat, threshold, False, len(sizes), {"theta": float(theta), "kappa_max": int(kmax)})


@dataclass(frozen=True)
class CompoundGOF:
    counts: GOFReport
    sizes: GOFReport

    @property
    def passed(self) -> bool:
        return self.counts.passed and self.sizes.passed


def compound_poisson_gof(cluster_counts, sizes, theta: float, T: float, threshold: float = 0.05) -> CompoundGOF:
    """Cluster counts vs Poisson(theta T) and cluster sizes vs Geometric(theta)."""
    c = poisson_gof(cluster_counts, theta * T, threshold)
    c = GOFReport("CompoundPoissonGeometric", c.statistic, threshold, False, c.n, {"theta": float(theta), "T": float(T)})
    if theta >= 1.0:
        sizes = np.asarray(sizes)
        stat = float(np.mean(sizes != 1)) if len(sizes) else 0.0
        s = GOFReport("Geometric", stat, threshold, False, len(sizes), {"theta": 1.0, "kappa_max": 1})
    else:
        s = geometric_gof(sizes, theta, threshold)
    return CompoundGOF(c, s)


def exponential_gof(samples, threshold: float = 0.05) -> GOFReport:
    """Kolmogorov-Smirnov distance to Exp(1)."""
    samples = np.asarray(samples, dtype=float)
    res = sps.kstest(samples, "expon")
    return GOFReport("Exponential", float(res.statistic), threshold, False, len(samples),
                     {"pvalue": float(res.pvalue)})


# ---------------------------------------------------------------- EVL curve


@dataclass(frozen=True)
class EVLCurve:
    ns: tuple
    prob: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    replicas: np.ndarray

    def at(self, n):
        return float(self.prob[list(self.ns).index(n)])


def evl_curve(maxima_below: dict, min_replicas: int = 200) -> EVLCurve:
    """P(M_n <= u_n) per n with exact binomial 95% intervals.

    Parameters
    ----------
    maxima_below : dict
        n -> array of 0/1 flags, one per replica, 1 when M_n <= u_n.
    """
    ns = tuple(sorted(maxima_below))
    p, lo, hi, reps = [], [], [], []
    for n in ns:
        flags = np.asarray(maxima_below[n], dtype=np.int64)
        if len(flags) < min_replicas:
            raise ValueError(f"n = {n}: {len(flags)} replicas, need >= {min_replicas}")
        k = int(flags.sum())
        ci = sps.binomtest(k, len(flags)).proportion_ci(0.95)
        p.append(k / len(flags))
        lo.append(ci.low)
        hi.append(ci.high)
        reps.append(len(flags))
    return EVLCurve(ns, np.array(p), np.array(lo), np.array(hi), np.array(reps))


# ---------------------------------------------------------------- HTS / RTS


def integrate_survival(cdf, t_max: float, step: float = 1e-3):
    """t -> int_0^t (1 - cdf(s)) ds on a uniform grid (trapezoid rule)."""
    t = np.arange(0.0, t_max + 0.5 * step, step)
    surv = 1.0 - np.asarray(cdf(t), dtype=float)
    out = np.concatenate([[0.0], np.cumsum(0.5 * (surv[1:] + surv[:-1]) * np.diff(t))])
    return t, out


def ecdf(samples):
    s = np.sort(np.asarray(samples, dtype=float))
    return lambda t: np.searchsorted(s, t, side="right") / len(s)


def integrated_rts(samples, t):
    """int_0^t (1 - G~(s)) ds for the empirical cdf G~, exactly: mean(min(t_i, t))."""
    s = np.sort(np.asarray(samples, dtype=float))
    t = np.asarray(t, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(s)])
    k = np.searchsorted(s, t, side="right")
    return (csum[k] + t * (len(s) - k)) / len(s)


@dataclass(frozen=True)
class DualityReport:
    t: np.ndarray = field(repr=False)
    hts: np.ndarray = field(repr=False)
    rts: np.ndarray = field(repr=False)
    integrated: np.ndarray = field(repr=False)
    sup_gap: float = 0.0
    gap_to_exponential: float = 0.0
    rts_gap_to_exponential: float = 0.0

    @property
    def integrated_mass(self) -> float:
        """Value of the integrated RTS curve at the end of the grid."""
        return float(self.integrated[-1])


def hts_rts(unconditioned, conditioned, mass: float, t_max: float = 5.0, n_grid: int = 5001) -> DualityReport:
    """Compare the empirical HTS cdf with the integral of the RTS survival.

    Times are normalised by `mass` (the target's measure) before building
    the cdfs; gaps are sup norms over a uniform grid on [0, t_max].
    """
    u = np.asarray(unconditioned, dtype=float) * mass
    c = np.asarray(conditioned, dtype=float) * mass
    t = np.linspace(0.0, t_max, n_grid)
    G = ecdf(u)(t) if len(u) else np.zeros_like(t)
    Gt = ecdf(c)(t)
    I = integrated_rts(c, t)
    expo = 1.0 - np.exp(-t)
    sup_gap = float(np.max(np.abs(G - I))) if len(u) else float("nan")
    g_exp = float(np.max(np.abs(G - expo))) if len(u) else float("nan")
    return DualityReport(t, G, Gt, I, sup_gap, g_exp, float(np.max(np.abs(Gt - expo))))


# ---------------------------------------------------------------- dependence


class OrbitTooShort(RuntimeError):
    pass


def default_k(n):
    return max(1, int(math.floor(math.sqrt(n))))


def default_t(n, alpha):
    return max(1, int(math.floor(n ** (1.0 - alpha))))


def kn_tn_compatible(alpha: float) -> bool:
    """k_n t_n = o(n) with k_n = n^(1/2) and t_n = n^(1 - alpha) iff alpha > 1/2."""
    return alpha > 0.5


@dataclass(frozen=True)
class DependenceDiagnostics:
    q: int
    ns: tuple
    k_n: tuple
    t_n: tuple
    delta_prime: np.ndarray
    q0_lower: np.ndarray
    first_return_tau_n: np.ndarray
    visits_A: np.ndarray
    orbit_length: int
    kn_tn_o_n: bool

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.delta_prime) < 0))

    def scaled(self, tau: float = 1.0) -> np.ndarray:
        """Delta'_n k_n / tau^2; bounded when Delta'_n = O(tau^2 / k_n)."""
        return self.delta_prime * np.asarray(self.k_n) / tau**2


def dprime_diagnostics(params: MapParams, sched_A, ns, sched_U=None, k_rule=default_k, q: int = 1,
                       orbit_length: int = 10**8, seed: int = 0, max_rel_error: float = 0.1,
                       burn_in: int = seeding.DEFAULT_BURN_IN) -> DependenceDiagnostics:
    """Delta'_n and the q = 0 lower bound from one long stationary orbit.

    Parameters
    ----------
    params : MapParams
    sched_A : ThresholdSchedule
        Supplies A_n (cluster-end region) for Delta'_n.
    ns : sequence of int
    sched_U : ThresholdSchedule, optional
        Supplies U_n for n mu(U_n & f^-1 U_n); defaults to `sched_A`.
    k_rule : callable
        n -> k_n.
    orbit_length : int
        Steps of the orbit used for all frequencies.
    max_rel_error : float
        Raise OrbitTooShort when 1/sqrt(visits to A_n) exceeds this.
    """
    if q != 1:
        raise ValueError("only q = 1 cluster-end regions are supported")
    sched_U = sched_A if sched_U is None else sched_U
    ns = tuple(int(n) for n in ns)
    los, his, lags = [], [], []
    for n in ns:
        e = sched_A.entry(n)
        if e.A is None:
            raise ValueError(f"n = {n}: schedule has no A_n region")
        los.append(e.A.lo)
        his.append(e.A.hi)
        lags.append(max(1, n // k_rule(n)))
    for n in ns:
        e = sched_U.entry(n)
        los.append(e.U.lo)
        his.append(e.U.hi)
        lags.append(1)
    x0, _ = seeding.stationary_starts(params, seed, [0], seeding.STREAM_ORBIT, burn_in)
    visits, pairs, lag1, mingap, _ = _kernels.multi_visit_counts(
        float(x0[0]), params.alpha, np.array(los), np.array(his), int(orbit_length), np.array(lags, dtype=np.int64))
    m = len(ns)
    vA = visits[:m]
    if np.any(vA == 0) or np.any(1.0 / np.sqrt(np.maximum(vA, 1)) > max_rel_error):
        raise OrbitTooShort(f"visits to A_n {vA.tolist()} give relative error above {max_rel_error}")
    nsa = np.array(ns, dtype=float)
    dprime = nsa * pairs[:m] / orbit_length
    q0 = nsa * lag1[m:] / orbit_length
    tau = mingap[:m].astype(np.int64)
    k_n = tuple(k_rule(n) for n in ns)
    t_n = tuple(default_t(n, params.alpha) for n in ns)
    compat = kn_tn_compatible(params.alpha)
    if not compat:
        warnings.warn(f"k_n t_n = o(n) fails for alpha = {params.alpha} with the default k_n, t_n", stacklevel=2)
    return DependenceDiagnostics(q, ns, k_n, t_n, dprime, q0, tau, vA, int(orbit_length), compat)


# ---------------------------------------------------------------- correlations


@dataclass(frozen=True)
class CorrelationDecayFit:
    lags: np.ndarray
    correlation: np.ndarray
    stderr: np.ndarray
    usable: np.ndarray
    exponent: float
    exponent_stderr: float
    target: float
    conclusive: bool
    fit: PowerLawFit | None = None


def _batch_correlations(cross, npairs, sphi, spsi, bl):
    mphi = sphi / bl
    mpsi = spsi / bl
    cb = cross / np.maximum(npairs, 1) - (mphi * mpsi)[:, None]
    corr = cb.mean(axis=0)
    se = cb.std(axis=0, ddof=1) / math.sqrt(cb.shape[0])
    return corr, se


def series_correlations(phi, psi, lags, n_batches: int = 50):
    """Batch-means estimates of cov(phi_i, psi_{i+l}) for two aligned series."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    lags = np.asarray(lags, dtype=np.int64)
    L = int(lags.max())
    n = len(phi) - L
    bl = n // n_batches
    cross = np.zeros((n_batches, len(lags)))
    npairs = np.full((n_batches, len(lags)), float(bl))
    sphi = np.zeros(n_batches)
    spsi = np.zeros(n_batches)
    for b in range(n_batches):
        s = slice(b * bl, (b + 1) * bl)
        sphi[b] = phi[s].sum()
        spsi[b] = psi[s].sum()
        for j, l in enumerate(lags):
            cross[b, j] = np.dot(phi[s], psi[b * bl + l:(b + 1) * bl + l])
    return _batch_correlations(cross, npairs, sphi, spsi, bl)


def fit_decay(lags, corr, se, target: float, lag_min: int = 10, min_points: int = 3,
              min_span: float = 10.0) -> CorrelationDecayFit:
    """Power-law fit of |corr| over lags >= lag_min where |corr| > 3 SE.

    The fit is conclusive only with at least `min_points` usable lags
    spanning a factor `min_span`.
    """
    lags = np.asarray(lags)
    usable = (np.abs(corr) > 3.0 * se) & (lags >= lag_min)
    # stop at the first lag that reaches the noise floor
    first_bad = np.flatnonzero(~usable & (lags >= lag_min))
    if len(first_bad):
        usable &= lags < lags[first_bad[0]]
    ul = lags[usable]
    ok = len(ul) >= min_points and ul.max() / ul.min() >= min_span
    if not ok:
        return CorrelationDecayFit(lags, corr, se, usable, float("nan"), float("nan"), target, False)
    fit = loglog_fit(ul, corr[usable])
    return CorrelationDecayFit(lags, corr, se, usable, -fit.slope, fit.stderr, target, True, fit)


def correlation_decay(params: MapParams, lags=None, orbit_length: int = 10**8, n_batches: int = 50,
                      seed: int = 0, lag_min: int = 10) -> CorrelationDecayFit:
    """Decay of cov(x_i, 1[x_{i+l} < 1/2]) along one stationary orbit.

    Parameters
    ----------
    params : MapParams
    lags : array_like, optional
        Default: 40 log-spaced lags in [1, 1000].
    orbit_length : int
    n_batches : int
        Batches for the standard errors.
    """
    if lags is None:
        lags = np.unique(np.round(np.logspace(0, 3, 40)).astype(np.int64))
    lags = np.asarray(lags, dtype=np.int64)
    x0, _ = seeding.stationary_starts(params, seed, [0], seeding.STREAM_ORBIT, seeding.DEFAULT_BURN_IN)
    cross, npairs, sphi, spsi, bl = _kernels.lagged_cross_moments(float(x0[0]), params.alpha, int(orbit_length),
                                                                  lags, int(n_batches))
    corr, se = _batch_correlations(cross, npairs, sphi, spsi, bl)
    return fit_decay(lags, corr, se, 1.0 / params.alpha - 1.0, lag_min)


# ---------------------------------------------------------------- serialisation


def to_key_value(obj, prefix: str = "") -> str:
    """key: value lines for the scalar fields of a report dataclass."""
    lines = []
    for k, v in vars(obj).items():
        if isinstance(v, np.ndarray):
            if v.size > 16:
                continue
            v = " ".join(repr(float(t)) if np.issubdtype(v.dtype, np.floating) else str(t) for t in v.ravel())
        elif hasattr(v, "__dataclass_fields__"):
            lines.append(to_key_value(v, prefix + k + ".").rstrip("\n"))
            continue
        elif isinstance(v, float):
            v = repr(v)
        elif isinstance(v, (tuple, list)):
            v = " ".join(str(t) for t in v)
        elif isinstance(v, dict):
            v = " ".join(f"{a}={b!r}" for a, b in v.items())
        lines.append(f"{prefix}{k}: {v}")
    return "\n".join(lines) + "\n"


FLAT_COLUMNS = ("experiment", "n", "statistic", "value", "ci")


def compound_poisson_pmf(theta: float, T: float, kmax: int) -> np.ndarray:
    """P(N = k), k = 0..kmax, for clusters arriving at rate theta over length T
    with Geometric(theta) sizes (Panjer recursion)."""
    lam = theta * T
    f = np.zeros(kmax + 1)
    f[1:] = geometric_pmf(theta, kmax) if theta < 1.0 else np.eye(1, kmax, 0).ravel()
    g = np.zeros(kmax + 1)
    g[0] = math.exp(-lam)
    for k in range(1, kmax + 1):
        j = np.arange(1, k + 1)
        g[k] = lam / k * np.sum(j * f[j] * g[k - j])
    return g


def limit_tail_probabilities(theta: float, T: float, k_max: int = 5) -> np.ndarray:
    """P(N(J) >= k) for k = 1..k_max under the (compound) Poisson limit, |J| = T."""
    pmf = compound_poisson_pmf(theta, T, k_max)
    return np.array([1.0 - pmf[:k].sum() for k in range(1, k_max + 1)])
