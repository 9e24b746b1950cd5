"""Canned experiments, one function per experiment kind.

Each function takes an ExperimentConfig and a replica mapper and returns
(metrics, artifacts). Metrics carry the module that produced them;
artifacts are named tables written by the runner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import poisson

from .. import _kernels, induced, measure, process, seeding, stats
from ..fitting import loglog_fit
from ..mpmap import BranchWord, Interval, MapParams, periodic_point, preimage_ladder


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    module: str
    ci: float = float("nan")
    target: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    n: int | None = None
    tau: float | None = None


def _m(name, value, module, **kw):
    return Metric(name, float(value), module, **kw)


def _within(name, value, target, tol, module, **kw):
    return Metric(name, float(value), module, target=float(target), tolerance=float(tol),
                  passed=bool(abs(value - target) <= tol), **kw)


def _below(name, value, limit, module, **kw):
    return Metric(name, float(value), module, target=float(limit), passed=bool(value < limit), **kw)


def _at_least(name, value, limit, module, **kw):
    return Metric(name, float(value), module, target=float(limit), passed=bool(value >= limit), **kw)


def _flag(name, ok, module, **kw):
    return Metric(name, 1.0 if ok else 0.0, module, target=1.0, passed=bool(ok), **kw)


# ---------------------------------------------------------------- shared pieces


@lru_cache(maxsize=16)
def ulam_measure(alpha, n_cells=4096, grading=1.02):
    op = measure.build_ulam(MapParams(alpha), n_cells, grading)
    return op, measure.stationary_density(op)


@lru_cache(maxsize=4)
def empirical(alpha, samples, seed):
    return measure.empirical_measure(MapParams(alpha), samples, seed=seed)


def config_measure(cfg):
    if cfg.backend == "empirical":
        return empirical(cfg.alpha, max(cfg.samples, 10**5), cfg.seed)
    return ulam_measure(cfg.alpha, cfg.n_cells, cfg.grading)[1]


def target_point(cfg, params):
    """(zeta, period or None, theta target)."""
    if cfg.word is not None:
        rec = periodic_point(params, BranchWord(cfg.word))
        return rec.zeta, rec.period, rec.theta
    if cfg.zeta == 1.0:
        rec = periodic_point(params, BranchWord("R"))
        return 1.0, 1, rec.theta
    if cfg.zeta == 0.0:
        return 0.0, None, 0.0
    return float(cfg.zeta), None, 1.0


def cluster_gap(cfg, period, zeta):
    if cfg.q >= 0:
        return cfg.q
    if period is not None:
        return period
    return 1


# replica tasks: top-level so process pools can pickle them


def ball_task(args, replicas):
    alpha, zeta, eps, length, seed, min_events, max_steps = args
    idx, _ = process.ball_ensemble(MapParams(alpha), zeta, eps, length, seed, replicas,
                                   seeding.STREAM_ORIGINAL, min_events=min_events, max_steps=max_steps)
    return idx


def induced_task(args, replicas):
    alpha, muY, zeta, eps, n_steps, seed = args
    params = MapParams(alpha)
    starts, _ = seeding.conditional_starts(params, seed, replicas, induced.DEFAULT_Y, seeding.STREAM_INDUCED)
    out = []
    for y in starts:
        kidx, oidx, _, _ = _kernels.induced_run(float(y), alpha, 0.5, 1.0, zeta, eps, int(n_steps), False)
        out.append((kidx, oidx))
    return out


def schedule_rows(sched):
    return sched.COLUMNS, sched.rows()


# ---------------------------------------------------------------- dichotomy


def dichotomy_poisson(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    zeta, period, theta = target_point(cfg, params)
    tau, T = cfg.tau[0], cfg.window
    sched = measure.classical_thresholds(mu, zeta, tau, cfg.n)
    metrics, arts = [], {"schedule": schedule_rows(sched)}
    J = process.Window.interval(0.0, T)
    for e in sched.entries:
        length = process.required_length(e.v, J)
        idx = pmap(ball_task, (cfg.alpha, zeta, e.eps, length, cfg.seed, 2, 200 * length), cfg.replica_ids())
        counts = process.window_counts(idx, e.v, J)
        gof = stats.poisson_gof(counts, T, cfg.tol("tv_tol"))
        gaps = process.pooled_first_gaps(idx, e.v)
        ks = stats.exponential_gof(gaps, cfg.tol("ks_tol"))
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        metrics += [
            _below("tv_poisson", gof.statistic, gof.threshold, "stats", n=e.n),
            _below("ks_exponential_gaps", ks.statistic, ks.threshold, "stats", n=e.n),
            Metric("mean_count", float(counts.mean()), "process", ci=float(3 * se), target=T, tolerance=float(3 * se),
                   passed=bool(abs(counts.mean() - T) <= 3 * se), n=e.n),
        ]
        K = max(int(counts.max()) + 1, 8)
        emp = np.bincount(counts, minlength=K)[:K] / len(counts)
        arts[f"counts_n{e.n}"] = (("k", "empirical", "poisson"), [(k, emp[k], poisson.pmf(k, T)) for k in range(K)])
    return metrics, arts


def dichotomy_compound(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    zeta, period, theta = target_point(cfg, params)
    q = cluster_gap(cfg, period, zeta)
    tau, T = cfg.tau[0], cfg.window
    sched = measure.classical_thresholds(mu, zeta, tau, cfg.n)
    metrics = [_m("theta_target", theta, "mp-map")]
    arts = {"schedule": schedule_rows(sched)}
    tol = cfg.tol("ei_tol")
    for e in sched.entries:
        wlen = process.required_length(e.v, process.Window.interval(0.0, T))
        length = wlen + 100 * q + 100
        idx = pmap(ball_task, (cfg.alpha, zeta, e.eps, length, cfg.seed, 0, length), cfg.replica_ids())
        recs = [process.decluster_indices(i, q, length) for i in idx]
        ei = stats.ei_estimate(recs, q)
        sizes = np.concatenate([process.cluster_sizes_in(i, q, 0, wlen) for i in idx])
        ccounts = np.array([len(process.cluster_sizes_in(i, q, 0, wlen)) for i in idx])
        gof = stats.compound_poisson_gof(ccounts, sizes, theta, T, cfg.tol("tv_tol"))
        counts = process.window_counts(idx, e.v, process.Window.interval(0.0, T))
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        msize = sizes.mean() if len(sizes) else float("nan")
        metrics += [
            _within("ei_obrien", ei.obrien, theta, tol, "stats", ci=ei.obrien_ci, n=e.n),
            _within("ei_runs", ei.runs, theta, tol, "stats", ci=ei.runs_ci, n=e.n),
            _within("ei_inverse_mean_cluster", ei.inverse_mean_cluster, theta, tol, "stats",
                    ci=ei.inverse_mean_cluster_ci, n=e.n),
            _below("tv_cluster_sizes_geometric", gof.sizes.statistic, gof.sizes.threshold, "stats", n=e.n),
            _below("tv_cluster_counts_poisson", gof.counts.statistic, gof.counts.threshold, "stats", n=e.n),
            Metric("mean_count", float(counts.mean()), "process", ci=float(3 * se), target=T,
                   tolerance=float(3 * se), passed=bool(abs(counts.mean() - T) <= 3 * se), n=e.n),
            _m("theta_times_mean_size", ei.runs * msize, "stats", n=e.n),
        ]
        kmax = int(sizes.max()) if len(sizes) else 1
        emp = np.bincount(sizes, minlength=kmax + 1)[1:] / max(1, len(sizes))
        arts[f"cluster_sizes_n{e.n}"] = (("size", "empirical", "geometric"),
                                         [(k, emp[k - 1], theta * (1 - theta) ** (k - 1)) for k in range(1, kmax + 1)])
    return metrics, arts


# ---------------------------------------------------------------- zero


def _zero_runs(cfg, pmap, sched, tau):
    """(evl flags per n, EI per n) for ensembles of length n at zeta = 0."""
    flags, eis = {}, {}
    for e in sched.entries:
        idx = pmap(ball_task, (cfg.alpha, 0.0, e.eps, e.n, cfg.seed, 0, e.n), cfg.replica_ids())
        flags[e.n] = process.maxima_below(idx, e.n)
        eis[e.n] = stats.ei_estimate([process.decluster_indices(i, 1, e.n) for i in idx], 1)
    return flags, eis


def zero_classical(cfg, pmap):
    mu = config_measure(cfg)
    metrics, arts = [], {}
    curves = {}
    for tau in cfg.tau:
        sched = measure.classical_thresholds(mu, 0.0, tau, cfg.n)
        arts[f"schedule_tau{tau:g}"] = schedule_rows(sched)
        flags, eis = _zero_runs(cfg, pmap, sched, tau)
        curve = stats.evl_curve(flags)
        curves[tau] = curve
        th = np.array([eis[n].obrien for n in curve.ns])
        for n, p, lo, hi in zip(curve.ns, curve.prob, curve.ci_low, curve.ci_high):
            metrics.append(Metric("evl", float(p), "stats", ci=float(0.5 * (hi - lo)), n=n, tau=tau))
            metrics.append(Metric("ei_obrien", float(eis[n].obrien), "stats", ci=float(eis[n].obrien_ci), n=n, tau=tau))
            metrics.append(_m("theta_n_measure", sched.entry(n).mass_A / sched.entry(n).mass_U, "measure", n=n, tau=tau))
        nf = curve.ns[-1]
        metrics += [
            _flag("evl_increasing", bool(np.all(np.diff(curve.prob) > 0)), "stats", tau=tau),
            _at_least("evl_final", curve.prob[-1], cfg.tol("evl_min"), "stats", n=nf, tau=tau),
            _flag("ei_decreasing", bool(np.all(np.diff(th) < 0)), "stats", tau=tau),
            _below("ei_final", th[-1], cfg.tol("ei_max"), "stats", n=nf, tau=tau),
        ]
        arts[f"evl_tau{tau:g}"] = (("n", "p_hat", "ci_low", "ci_high"),
                                   list(zip(curve.ns, curve.prob, curve.ci_low, curve.ci_high)))
    if len(cfg.tau) > 1:
        taus = sorted(cfg.tau)
        ok = all(np.all(np.diff([curves[t].prob[i] for t in taus]) <= 0) for i in range(len(cfg.n)))
        metrics.append(_flag("evl_monotone_in_tau", ok, "stats"))
    return metrics, arts


def zero_adjusted(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    metrics, arts = [], {}
    for tau in cfg.tau:
        sched = measure.adjusted_thresholds_zero(mu, params, tau, cfg.n)
        arts[f"schedule_tau{tau:g}"] = schedule_rows(sched)
        flags, eis = _zero_runs(cfg, pmap, sched, tau)
        curve = stats.evl_curve(flags)
        ref = math.exp(-tau)
        for n, p, lo, hi in zip(curve.ns, curve.prob, curve.ci_low, curve.ci_high):
            metrics.append(Metric("evl", float(p), "stats", ci=float(0.5 * (hi - lo)), n=n, tau=tau))
            metrics.append(Metric("ei_obrien", float(eis[n].obrien), "stats", ci=float(eis[n].obrien_ci), n=n, tau=tau))
            metrics.append(_m("n_mass_U", n * sched.entry(n).mass_U, "measure", n=n, tau=tau))
        metrics.append(_within("evl_final", curve.prob[-1], ref, cfg.tol("evl_tol"), "stats", n=curve.ns[-1], tau=tau))
        arts[f"evl_tau{tau:g}"] = (("n", "p_hat", "ci_low", "ci_high", "exp_minus_tau"),
                                   [(n, p, lo, hi, ref) for n, p, lo, hi in
                                    zip(curve.ns, curve.prob, curve.ci_low, curve.ci_high)])
    return metrics, arts


# ---------------------------------------------------------------- induced


DEFAULT_J_GRID = (
    ((0.0, 0.5),),
    ((0.0, 1.0),),
    ((0.0, 2.0),),
    ((1.0, 3.0),),
    ((0.0, 1.0), (2.0, 3.0)),
)


def induced_compare(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    zeta, period, theta = target_point(cfg, params)
    sysY = induced.induced_system(params, mu)
    sched = measure.classical_thresholds(mu, zeta, cfg.tau[0], cfg.n)
    grid = tuple(process.Window(p) for p in DEFAULT_J_GRID)
    full = grid[0]
    for w in grid[1:]:
        full = full.union(w)
    metrics = [_m("mu_Y", sysY.muY_mass, "measure"), _m("theta_target", theta, "mp-map")]
    arts = {"schedule": schedule_rows(sched)}
    for e in sched.entries:
        induced.check_inside(sysY, e)
        length = process.required_length(e.v, full)
        idx = pmap(ball_task, (cfg.alpha, zeta, e.eps, length, cfg.seed, 0, length), cfg.replica_ids())
        orig = [process.realization_from_indices(e, i, full, r) for i, r in zip(idx, cfg.replica_ids())]
        vY = induced.induced_scale(sysY, e)
        steps = process.required_length(vY, full)
        ind = pmap(induced_task, (cfg.alpha, sysY.muY_mass, zeta, e.eps, steps, cfg.seed), cfg.replica_ids())
        real_Y = []
        for (kidx, oidx), r in zip(ind, cfg.replica_ids()):
            keep = np.zeros(len(kidx), dtype=bool)
            for a, b in full.parts:
                keep |= (kidx >= vY * a) & (kidx < vY * b)
            real_Y.append(induced.InducedRealization(e.n, vY, kidx[keep], full, r, oidx[keep]))
        rep = induced.compare_induced_original(real_Y, orig, grid)
        metrics.append(_below("sup_tail_gap", rep.sup_distance, cfg.tol("gap_tol"), "induced", n=e.n))
        lim_o, lim_y = 0.0, 0.0
        rows = []
        for w, J in enumerate(grid):
            lim = stats.limit_tail_probabilities(theta, J.length, rep.k_max)
            lim_o = max(lim_o, float(np.max(np.abs(rep.tail_original[w] - lim))))
            lim_y = max(lim_y, float(np.max(np.abs(rep.tail_induced[w] - lim))))
            for k in range(rep.k_max):
                rows.append((str(J.parts), k + 1, rep.tail_original[w, k], rep.tail_induced[w, k], lim[k]))
        metrics += [
            _below("sup_gap_original_vs_limit", lim_o, cfg.tol("gap_tol"), "induced", n=e.n),
            _below("sup_gap_induced_vs_limit", lim_y, cfg.tol("gap_tol"), "induced", n=e.n),
        ]
        cY = [r.count(process.Window.interval(0.0, cfg.window)) for r in real_Y]
        if period is None:
            metrics.append(_below("tv_induced_poisson", stats.poisson_gof(cY, cfg.window).statistic,
                                  cfg.tol("tv_tol"), "stats", n=e.n))
        arts[f"tails_n{e.n}"] = (("window", "k", "original", "induced", "limit"), rows)
    return metrics, arts


# ---------------------------------------------------------------- measure


def measure_asymptotics(cfg, pmap):
    params = MapParams(cfg.alpha)
    a = cfg.alpha
    _, mu_u = ulam_measure(a, cfg.n_cells, cfg.grading)
    mu_e = empirical(a, max(cfg.samples, 10**7), cfg.seed)
    st = cfg.tol("slope_tol")
    metrics = []
    for tag, mu in (("ulam", mu_u), ("empirical", mu_e)):
        fit = measure.fit_mass_exponent(mu)
        metrics.append(_within(f"mass_slope_{tag}", fit.slope, 1.0 - a, st, "measure", ci=fit.stderr))
        lo, hi = measure.last_resolved_decade(mu)
        metrics.append(_below(f"flatness_{tag}", measure.flatness(mu, lo, hi), cfg.tol("flat_tol"), "measure"))
        metrics.append(_m(f"C0_{tag}", mu.C0, "measure"))
        metrics.append(_m(f"c_mass_{tag}", measure.fit_mass_constant(mu), "measure"))
    # backend agreement on intervals of mass >= 0.01
    edges = np.linspace(0.0, 1.0, 21)
    ivs = [(edges[i], edges[i + 1]) for i in range(20)] + [(0.0, s) for s in (0.01, 0.05, 0.1, 0.5)]
    rel = [abs(mu_e.mass(lo, hi) / mu_u.mass(lo, hi) - 1.0) for lo, hi in ivs if mu_u.mass(lo, hi) >= 0.01]
    metrics.append(_below("backend_max_rel_diff", max(rel), 0.01, "measure"))
    # ladder spacing exponent
    sp = preimage_ladder(params, 200).spacings()
    m = np.arange(1, 201)
    sel = (m >= 50) & (m <= 200)
    fit = loglog_fit(m[sel], sp[sel])
    metrics.append(_within("ladder_spacing_slope", fit.slope, -(1.0 / a + 1.0), 0.1, "mp-map", ci=fit.stderr))
    # threshold scalings
    ns = list(cfg.n) or [10**3, 10**4, 10**5]
    cl = measure.classical_thresholds(mu_u, 0.0, cfg.tau[0], ns)
    ad = measure.adjusted_thresholds_zero(mu_u, params, cfg.tau[0], ns)
    fc = loglog_fit(ns, [e.eps for e in cl.entries])
    fa = loglog_fit(ns, [e.a for e in ad.entries])
    metrics.append(_within("classical_radius_slope", fc.slope, -1.0 / (1.0 - a), st, "measure", ci=fc.stderr))
    metrics.append(_within("adjusted_a_slope", fa.slope, -1.0, st, "measure", ci=fa.stderr))
    nmu = [e.n * e.mass_U for e in ad.entries]
    metrics.append(_flag("adjusted_n_mass_U_growing", bool(np.all(np.diff(nmu) > 0)), "measure"))
    # threshold consistency against the other backend at the smallest n
    n0 = ns[0]
    e0 = measure.classical_thresholds(mu_u, 0.75, cfg.tau[0], [n0]).entries[0]
    metrics.append(_within("classical_tau_other_backend", n0 * mu_e.mass(e0.U.lo, e0.U.hi) / cfg.tau[0], 1.0, 0.05,
                           "measure", n=n0))
    a0 = ad.entry(n0)
    metrics.append(_within("adjusted_tau_other_backend", n0 * mu_e.mass(a0.a, a0.b) / cfg.tau[0], 1.0, 0.05,
                           "measure", n=n0))
    # Kac identity on Y = [1/2, 1)
    Y = Interval(0.5, 1.0)
    hs = process.hitting_times(params, mu_u, Y, min(cfg.samples, 10**6), conditioned=True, seed=cfg.seed)
    kac, kse = induced.kac_product(hs.valid(), mu_u.mass(0.5, 1.0))
    metrics.append(_within("kac_mean_return_times_muY", kac, 1.0, cfg.tol("kac_tol"), "process", ci=3 * kse))
    s = np.logspace(-4, -2, 21)
    arts = {
        "mass_curve": (("s", "ulam", "empirical"), [(x, mu_u.cdf(x), mu_e.cdf(x)) for x in s]),
        "schedule_classical": schedule_rows(cl),
        "schedule_adjusted": schedule_rows(ad),
    }
    return metrics, arts


# ---------------------------------------------------------------- dprime


def dprime(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    tau = cfg.tau[0]
    ad = measure.adjusted_thresholds_zero(mu, params, tau, cfg.n)
    cl = measure.classical_thresholds(mu, 0.0, tau, cfg.n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = stats.dprime_diagnostics(params, ad, cfg.n, sched_U=cl, orbit_length=cfg.orbit_length, seed=cfg.seed)
    # informational: the default k_n, t_n only satisfy k_n t_n = o(n) for alpha > 1/2
    metrics = [Metric("kn_tn_o_n", float(d.kn_tn_o_n), "stats")]
    for n, dp, q0, t1, k in zip(d.ns, d.delta_prime, d.q0_lower, d.first_return_tau_n, d.k_n):
        metrics += [
            _m("delta_prime", dp, "stats", n=n),
            _at_least("q0_lower", q0, 0.5 * tau, "stats", n=n),
            _m("first_return_tau_n", t1, "stats", n=n),
            _below("delta_prime_times_kn", dp * k / tau**2, cfg.tol("dprime_const"), "stats", n=n),
            _flag("delta_prime_below_q0", dp < q0, "stats", n=n),
        ]
    metrics.append(_flag("delta_prime_decreasing", d.decreasing, "stats"))
    fit = stats.correlation_decay(params, orbit_length=max(10**6, cfg.orbit_length // 5), seed=cfg.seed)
    metrics.append(Metric("correlation_exponent", fit.exponent, "stats", ci=fit.exponent_stderr, target=fit.target))
    metrics.append(Metric("correlation_fit_conclusive", float(fit.conclusive), "stats"))
    arts = {"dprime": (("n", "k_n", "t_n", "delta_prime", "q0_lower", "first_return_tau_n", "visits_A"),
                       list(zip(d.ns, d.k_n, d.t_n, d.delta_prime, d.q0_lower, d.first_return_tau_n, d.visits_A))),
            "correlations": (("lag", "correlation", "stderr", "usable"),
                             list(zip(fit.lags, fit.correlation, fit.stderr, fit.usable)))}
    return metrics, arts


# ---------------------------------------------------------------- ulam-bound


def push_bound_values(op, mu, ns, tau, j_max=0):
    sched = measure.adjusted_thresholds_zero(mu, op.params, tau, ns)
    vals, firsts = [], []
    for n in ns:
        seq = measure.transfer_push_bound(op, sched, n, j_max or n)
        j = measure.first_return_index(seq)
        if j < 0:
            raise measure.ResolutionError(f"n = {n}: no return of Q_n within j_max")
        vals.append(float(seq[j - 1:].max()))
        firsts.append(j)
    return np.array(vals), firsts


def ulam_bound(cfg, pmap):
    ns = list(cfg.n)
    op, mu = ulam_measure(cfg.alpha, cfg.n_cells, cfg.grading)
    vals, firsts = push_bound_values(op, mu, ns, cfg.tau[0], cfg.j_max)
    op2, mu2 = ulam_measure(cfg.alpha, 2 * cfg.n_cells, 1.0 + 0.5 * (cfg.grading - 1.0))
    vals2, _ = push_bound_values(op2, mu2, ns, cfg.tau[0], cfg.j_max)
    fit = loglog_fit(ns, vals)
    change = float(np.max(np.abs(vals2 / vals - 1.0)))
    metrics = [
        _within("push_bound_slope", fit.slope, -1.0, 0.15, "measure", ci=fit.stderr),
        _below("mesh_doubling_rel_change", change, cfg.tol("mesh_tol"), "measure"),
    ]
    for n, v, j in zip(ns, vals, firsts):
        metrics.append(_m("push_bound", v, "measure", n=n))
        metrics.append(_m("first_return_j", j, "measure", n=n))
    arts = {"push_bound": (("n", "sup_bound", "sup_bound_doubled", "first_return_j"),
                           list(zip(ns, vals, vals2, firsts)))}
    return metrics, arts


# ---------------------------------------------------------------- duality


def duality(cfg, pmap):
    params = MapParams(cfg.alpha)
    mu = config_measure(cfg)
    gen = seeding.replica_generator(cfg.seed, 0, seeding.STREAM_HITTING + 1)
    N = cfg.samples
    syn = stats.hts_rts(gen.exponential(size=N), gen.exponential(size=N), 1.0)
    metrics = [_below("synthetic_gap", syn.sup_gap, cfg.tol("synthetic_tol"), "stats")]
    arts = {}
    zeta = cfg.zeta if cfg.zeta is not None else 0.5**0.5
    if cfg.n:
        e = measure.classical_thresholds(mu, zeta, cfg.tau[0], cfg.n[:1]).entries[0]
        m = float(mu.mass(e.U.lo, e.U.hi))
        hu = process.hitting_times(params, mu, e.U, N, False, cfg.seed)
        hc = process.hitting_times(params, mu, e.U, N, True, cfg.seed)
        rep = stats.hts_rts(hu.valid(), hc.valid(), m)
        metrics += [
            _below("typical_hts_vs_exponential", rep.gap_to_exponential, cfg.tol("gap_tol"), "stats", n=e.n),
            _below("typical_duality_gap", rep.sup_gap, cfg.tol("gap_tol"), "stats", n=e.n),
        ]
        tt = rep.t[::100]
        arts["typical"] = (("t", "hts", "rts", "integrated_rts"),
                           list(zip(tt, rep.hts[::100], rep.rts[::100], rep.integrated[::100])))
    rows = []
    masses = []
    for b in sorted(cfg.b, reverse=True):
        U = Interval(0.0, b)
        m = float(mu.mass(0.0, b))
        hc = process.hitting_times(params, mu, U, N, True, cfg.seed)
        rep = stats.hts_rts([], hc.valid(), m)
        g01 = float(np.mean(hc.valid() * m <= 0.1))
        masses.append(rep.integrated_mass)
        rows.append((b, m, g01, rep.integrated_mass))
        metrics.append(_m("zero_rts_at_0.1", g01, "stats"))
        metrics.append(_m("zero_integrated_mass", rep.integrated_mass, "stats"))
    if rows:
        metrics.append(_below("zero_integrated_mass_final", masses[-1], cfg.tol("gap_tol"), "stats"))
        metrics.append(_flag("zero_integrated_mass_decreasing", bool(np.all(np.diff(masses) < 0)), "stats"))
        arts["zero"] = (("b", "mass_U", "rts_at_0.1", "integrated_mass_5"), rows)
    return metrics, arts


EXPERIMENTS = {
    "dichotomy-poisson": dichotomy_poisson,
    "dichotomy-compound": dichotomy_compound,
    "zero-classical": zero_classical,
    "zero-adjusted": zero_adjusted,
    "induced-compare": induced_compare,
    "measure-asymptotics": measure_asymptotics,
    "dprime": dprime,
    "ulam-bound": ulam_bound,
    "duality": duality,
}
