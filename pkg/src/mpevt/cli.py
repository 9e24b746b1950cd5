"""Command line entry point.

    mpevt <command> --config FILE [--experiment NAME] [--seed N] [--workers K]
                    [--out DIR] [--format csv|json-lines]

Every flag can also come from the environment: MPEVT_CONFIG, MPEVT_SEED,
MPEVT_WORKERS, MPEVT_OUT and MPEVT_FORMAT. Flags win over the environment.

Exit codes: 0 all checks passed, 1 a tolerance check failed, 2 invalid
configuration, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import measure, process, seeding, stats
from .harness import ConfigError, load_config, load_records, report, run
from .harness.experiments import cluster_gap, config_measure, target_point, ulam_measure
from .mpmap import MapParams
from .tables import FORMATS, extension, write_rows

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
ENV_PREFIX = "MPEVT_"

KIND_FILTER = {
    "simulate": None,
    "dichotomy": ("dichotomy-poisson", "dichotomy-compound"),
    "zero-point": ("zero-classical", "zero-adjusted"),
    "induced-compare": ("induced-compare",),
}


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("config"), help="experiment config file (INI)")
    common.add_argument("--experiment", action="append", default=None, help="restrict to this section; repeatable")
    common.add_argument("--seed", type=int, default=_env("seed"), help="override the base seed (u64)")
    common.add_argument("--workers", type=int, default=_env("workers"), help="worker processes for replicas")
    common.add_argument("--out", default=_env("out", "mpevt-out"), help="output directory")
    common.add_argument("--format", choices=FORMATS, default=_env("format", "csv"))
    p = argparse.ArgumentParser(prog="mpevt", description="Rare-event statistics experiments for MP maps.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run every experiment in the config",
        "thresholds": "write threshold schedules",
        "ei": "estimate extremal indices",
        "repp": "export rare-event point process realisations",
        "dichotomy": "run dichotomy-poisson / dichotomy-compound experiments",
        "zero-point": "run zero-classical / zero-adjusted experiments",
        "induced-compare": "run induced-compare experiments",
        "ulam": "write Ulam operators and run ulam-bound experiments",
        "report": "summarise the records found in --out",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    return p


def _configs(args):
    if not args.config:
        raise ConfigError(["no config given (use --config or MPEVT_CONFIG)"])
    cfgs = load_config(args.config)
    if args.experiment:
        names = {c.name for c in cfgs}
        missing = [e for e in args.experiment if e not in names]
        if missing:
            raise ConfigError([f"no section named {m!r}" for m in missing])
        cfgs = [c for c in cfgs if c.name in args.experiment]
    over = {}
    if args.seed is not None:
        over["seed"] = int(args.seed)
    if args.workers is not None:
        over["workers"] = int(args.workers)
    return [c.with_overrides(**over) for c in cfgs]


def _print_record(rec):
    status = "PASS" if rec.passed else "FAIL"
    print(f"{status} {rec.experiment} ({rec.kind}) digest={rec.digest} runtime={rec.runtime:.1f}s")
    for m in rec.failures():
        print(f"    failed: {m.module}.{m.name} n={m.n} value={m.value:.6g} target={m.target}")


def cmd_run(args, kinds):
    cfgs = [c for c in _configs(args) if kinds is None or c.kind in kinds]
    ok = True
    records = []
    for c in cfgs:
        rec = run(c, out=args.out, fmt=args.format)
        records.append(rec)
        _print_record(rec)
        ok &= rec.passed
    report(records, args.format, Path(args.out) / "report")
    return EXIT_OK if ok else EXIT_FAIL


def _schedule(cfg, mu, tau):
    if cfg.kind == "zero-adjusted":
        return measure.adjusted_thresholds_zero(mu, MapParams(cfg.alpha), tau, cfg.n)
    zeta, _, _ = target_point(cfg, MapParams(cfg.alpha)) if (cfg.zeta is not None or cfg.word) else (0.0, 0, 0)
    return measure.classical_thresholds(mu, zeta, tau, cfg.n)


def cmd_thresholds(args):
    ext = extension(args.format)
    for c in _configs(args):
        if not c.n:
            continue
        mu = config_measure(c)
        for tau in c.tau:
            s = _schedule(c, mu, tau)
            path = measure.write_schedule(s, Path(args.out) / c.name / f"thresholds_tau{tau:g}{ext}", args.format)
            print(path)
    return EXIT_OK


def _ensemble(c, e, length):
    zeta = 0.0 if c.kind.startswith("zero") else target_point(c, MapParams(c.alpha))[0]
    starts = c.replica_ids()
    idx, _ = process.ball_ensemble(MapParams(c.alpha), zeta, e.eps, length, c.seed, starts, seeding.STREAM_ORIGINAL)
    return idx


def _targeted(cfgs):
    return [c for c in cfgs if c.n and c.replicas and (c.zeta is not None or c.word or c.kind.startswith("zero"))]


def cmd_ei(args):
    ext = extension(args.format)
    for c in _targeted(_configs(args)):
        mu = config_measure(c)
        zeta, period, theta = (0.0, None, 0.0) if c.kind.startswith("zero") else target_point(c, MapParams(c.alpha))
        q = cluster_gap(c, period, zeta)
        rows = []
        for tau in c.tau:
            s = _schedule(c, mu, tau)
            for e in s.entries:
                length = e.n if c.kind.startswith("zero") else process.required_length(e.v, process.Window.interval(0, c.window))
                recs = [process.decluster_indices(i, q, length) for i in _ensemble(c, e, length)]
                est = stats.ei_estimate(recs, q)
                rows.append((e.n, tau, q, est.obrien, est.obrien_ci, est.runs, est.runs_ci,
                             est.inverse_mean_cluster, est.n_exceedances, est.n_clusters))
                print(f"{c.name} n={e.n} tau={tau:g} q={q} obrien={est.obrien:.4f} runs={est.runs:.4f}")
        write_rows(Path(args.out) / c.name / f"ei{ext}",
                   ("n", "tau", "q", "obrien", "obrien_ci", "runs", "runs_ci", "inverse_mean_cluster",
                    "exceedances", "clusters"), rows, args.format)
    return EXIT_OK


def cmd_repp(args):
    ext = extension(args.format)
    for c in _targeted(_configs(args)):
        mu = config_measure(c)
        J = process.Window.interval(0.0, c.window)
        reals = []
        s = _schedule(c, mu, c.tau[0])
        for e in s.entries:
            idx = _ensemble(c, e, process.required_length(e.v, J))
            reals += [process.realization_from_indices(e, i, J, r) for i, r in zip(idx, c.replica_ids())]
        path = process.write_realizations(reals, Path(args.out) / c.name / f"repp{ext}", args.format)
        print(path)
    return EXIT_OK


def cmd_ulam(args):
    ext = extension(args.format)
    cfgs = _configs(args)
    ok = True
    records = []
    for c in cfgs:
        op, _ = ulam_measure(c.alpha, c.n_cells, c.grading)
        d = Path(args.out) / c.name
        print(measure.write_ulam(op, d / f"ulam_cells{ext}", args.format))
        print(measure.write_ulam_matrix(op, d / f"ulam_matrix{ext}", args.format))
        if c.kind == "ulam-bound":
            rec = run(c, out=args.out, fmt=args.format)
            records.append(rec)
            _print_record(rec)
            ok &= rec.passed
    if records:
        report(records, args.format, Path(args.out) / "report")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(args):
    recs = load_records(args.out)
    for p in report(recs, args.format, Path(args.out) / "report"):
        print(p)
    return EXIT_OK if all(r.passed for r in recs) else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        if args.command in KIND_FILTER:
            return cmd_run(args, KIND_FILTER[args.command])
        return {"thresholds": cmd_thresholds, "ei": cmd_ei, "repp": cmd_repp, "ulam": cmd_ulam,
                "report": cmd_report}[args.command](args)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # surfaced with context, mapped to the runtime exit code
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
