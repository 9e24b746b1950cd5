"""Run experiments and write their outputs.

Output layout under ``out``::

    <experiment>/metrics.csv     experiment, n, statistic, value, ci
    <experiment>/<series>.csv    raw tables (schedules, pmfs, curves)
    <experiment>/record.txt      key: value summary
    records.jsonl                one ResultRecord per run, appended

Everything except ``records.jsonl`` is a pure function of (config, seed):
runtimes and worker counts live only in the appended record log.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..tables import extension, render, write_rows
from .config import ExperimentConfig
from .experiments import EXPERIMENTS, Metric

SCHEMA = "mpevt.result/1"
CHUNK = 50


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    kind: str
    digest: str
    seed: int
    metrics: tuple = field(repr=False)
    passed: bool = True
    runtime: float = 0.0
    schema: str = SCHEMA
    artifacts: tuple = ()

    def failures(self):
        return [m for m in self.metrics if m.passed is False]

    def to_json(self) -> str:
        d = asdict(self)
        d["metrics"] = [_clean(asdict(m)) for m in self.metrics]
        return json.dumps(_clean(d), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["metrics"] = tuple(Metric(**{k: (float("nan") if v is None and k == "ci" else v) for k, v in m.items()})
                             for m in d["metrics"])
        d["artifacts"] = tuple(d.get("artifacts", ()))
        return cls(**d)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


class ReplicaMapper:
    """Apply a replica task over chunks of replica ids, serially or in a pool.

    Results come back in replica order, so the merge is independent of how
    many workers ran and in which order chunks finished.
    """

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self._pool = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def __call__(self, fn, args, replica_ids):
        ids = list(replica_ids)
        chunks = [ids[i:i + CHUNK] for i in range(0, len(ids), CHUNK)]
        if self._pool is None:
            parts = [fn(args, c) for c in chunks]
        else:
            parts = list(self._pool.map(fn, [args] * len(chunks), chunks))
        out = []
        for p in parts:
            out.extend(p)
        return out

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def statistic_name(m: Metric) -> str:
    return m.name if m.tau is None else f"{m.name}[tau={m.tau:g}]"


def metric_rows(name, metrics):
    return [(name, "" if m.n is None else m.n, statistic_name(m), m.value, m.ci) for m in metrics]


def record_text(rec: ResultRecord) -> str:
    lines = [f"schema: {rec.schema}", f"experiment: {rec.experiment}", f"kind: {rec.kind}",
             f"digest: {rec.digest}", f"seed: {rec.seed}", f"passed: {str(rec.passed).lower()}"]
    for m in rec.metrics:
        key = statistic_name(m) + ("" if m.n is None else f"@n={m.n}")
        verdict = "" if m.passed is None else (" pass" if m.passed else " FAIL")
        tgt = "" if m.target is None else f" target={m.target!r}"
        lines.append(f"{m.module}.{key}: {m.value!r}{tgt}{verdict}")
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, workers: int | None = None, out=None, fmt: str = "csv") -> ResultRecord:
    """Run one validated experiment.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int, optional
        Process count for replica work; defaults to ``cfg.workers``.
    out : path, optional
        Directory for tabular outputs; nothing is written when omitted.
    fmt : {"csv", "json-lines"}

    Returns
    -------
    ResultRecord
        ``passed`` is true when no metric with a verdict failed.
    """
    t0 = time.perf_counter()
    fn = EXPERIMENTS[cfg.kind]
    with ReplicaMapper(workers or cfg.workers) as pmap:
        metrics, arts = fn(cfg, pmap)
    passed = all(m.passed is not False for m in metrics)
    written = []
    rec = ResultRecord(cfg.name, cfg.kind, cfg.digest(), cfg.seed, tuple(metrics), passed, 0.0)
    if out is not None:
        d = Path(out) / cfg.name
        ext = extension(fmt)
        written.append(str(write_rows(d / f"metrics{ext}", ("experiment", "n", "statistic", "value", "ci"),
                                      metric_rows(cfg.name, metrics), fmt)))
        for key in sorted(arts):
            cols, rows = arts[key]
            written.append(str(write_rows(d / f"{key}{ext}", cols, rows, fmt)))
        (d / "record.txt").write_text(record_text(rec), encoding="utf-8", newline="\n")
        written.append(str(d / "record.txt"))
    rec = ResultRecord(cfg.name, cfg.kind, cfg.digest(), cfg.seed, tuple(metrics), passed,
                       time.perf_counter() - t0, SCHEMA, tuple(written))
    if out is not None:
        with open(Path(out) / "records.jsonl", "a", encoding="utf-8", newline="\n") as fh:
            fh.write(rec.to_json() + "\n")
    return rec


def load_records(path) -> list[ResultRecord]:
    path = Path(path)
    if path.is_dir():
        path = path / "records.jsonl"
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(ResultRecord.from_dict(json.loads(line)))
    return out


SUMMARY_COLUMNS = ("experiment", "kind", "module", "statistic", "n", "value", "ci", "target", "passed")


def report(records, fmt: str = "csv", out=None):
    """Summary table plus plot-ready (n, value) series.

    With `out` the tables are written there and their paths returned;
    otherwise a dict name -> rendered text is returned.
    """
    records = list(records)
    tables = {}
    rows = []
    for r in records:
        for m in r.metrics:
            rows.append((r.experiment, r.kind, m.module, statistic_name(m), "" if m.n is None else m.n, m.value,
                         m.ci, "" if m.target is None else m.target, "" if m.passed is None else m.passed))
    tables["summary"] = (SUMMARY_COLUMNS, rows)
    for r in records:
        evl = [m for m in r.metrics if m.name == "evl"]
        taus = sorted({m.tau for m in evl})
        for tau in taus:
            pts = [(m.n, m.value) for m in evl if m.tau == tau]
            if r.kind == "zero-adjusted":
                tables[f"{r.experiment}_evl_tau{tau:g}"] = (("n", "p_hat", "exp_minus_tau"),
                                                           [(n, p, math.exp(-tau)) for n, p in pts])
            else:
                tables[f"{r.experiment}_evl_tau{tau:g}"] = (("n", "p_hat"), pts)
    if out is None:
        return {k: render(c, rws, fmt) for k, (c, rws) in tables.items()}
    paths = []
    for k, (c, rws) in tables.items():
        paths.append(write_rows(Path(out) / f"{k}{extension(fmt)}", c, rws, fmt))
    return paths
