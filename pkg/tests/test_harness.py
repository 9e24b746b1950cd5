import json

import pytest

from mpevt.harness import ConfigError, load_records, parse_config, report, run
from mpevt.harness.config import KEYS, KINDS, MIN_REPLICAS, ExperimentConfig, validate
from mpevt.harness.experiments import EXPERIMENTS, cluster_gap, target_point
from mpevt.harness.runner import SCHEMA, ReplicaMapper, ResultRecord
from mpevt.mpmap import MapParams, periodic_point

BASE = """
[defaults]
seed = 11

[compound]
kind = dichotomy-compound
alpha = 0.5
word = RL
n = 2000
replicas = 200

[ulam]
kind = ulam-bound
alpha = 0.5
n = 100, 10^2.5, 1000
n_cells = 4096
grading = 1.01
"""


def one(text, name):
    return next(c for c in parse_config(text) if c.name == name)


def test_every_kind_has_an_experiment():
    assert set(EXPERIMENTS) == set(KINDS)


def test_parse_values():
    c = one(BASE, "ulam")
    assert c.kind == "ulam-bound" and c.seed == 11
    assert c.n == (100, 316, 1000)
    assert c.n_cells == 4096 and c.grading == 1.01
    assert c.tol("slope_tol") == KEYS["slope_tol"][1]
    cc = one(BASE, "compound")
    assert cc.word == "RL" and cc.replicas == 200


def test_scientific_counts_and_tolerances():
    c = one("[m]\nkind = measure-asymptotics\nalpha = 0.5\nsamples = 1e7\norbit_length = 1e8\nslope_tol = 0.1\n", "m")
    assert c.samples == 10**7 and c.orbit_length == 10**8
    assert c.tol("slope_tol") == 0.1


def test_rejects_zero_adjusted_outside_window():
    text = "[z]\nkind = zero-adjusted\nalpha = 0.3\nn = 1000\nreplicas = 200\n"
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert any("sqrt(5) - 2" in p for p in e.value.problems)
    parse_config(text.replace("0.3", "0.2"))


def test_collects_all_problems():
    text = ("[a]\nkind = dichotomy-poisson\nalpha = 1.5\nn = 100\nreplicas = 10\n"
            "[b]\nkind = nope\nalpha = 0.5\nn = 100\n")
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    msgs = e.value.problems
    assert any("[a] alpha" in m for m in msgs)
    assert any(f">= {MIN_REPLICAS}" in m for m in msgs)
    assert any("[a] dichotomy-poisson needs zeta or word" in m for m in msgs)
    assert any("[b] kind" in m for m in msgs)


@pytest.mark.parametrize("body,frag", [
    ("kind = dprime\nalpha = 0.2\nn = 100\nbogus = 1\n", "unknown key"),
    ("kind = dprime\nalpha = 0.2\nn = abc\n", "cannot parse"),
    ("alpha = 0.2\nn = 100\n", "missing key 'kind'"),
    ("kind = dprime\nalpha = 0.2\n", "n grid is empty"),
    ("kind = dichotomy-compound\nalpha = 0.5\nword = LL\nn = 100\nreplicas = 200\n", "collapses onto 0"),
    ("kind = dichotomy-compound\nalpha = 0.5\nword = RL\nzeta = 0.3\nn = 100\nreplicas = 200\n", "either zeta or word"),
    ("kind = dprime\nalpha = 0.2\nn = 100\ntau = 0\n", "tau must be positive"),
    ("kind = duality\nalpha = 0.5\nb = 0.7\n", "b must lie"),
    ("kind = dprime\nalpha = 0.2\nn = 100\nbackend = magic\n", "backend"),
])
def test_single_rule_violations(body, frag):
    with pytest.raises(ConfigError) as e:
        parse_config("[x]\n" + body)
    assert any(frag in p for p in e.value.problems), e.value.problems


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("kind = dprime\n")


def test_digest_ignores_workers_only():
    c = one(BASE, "ulam")
    assert c.digest() == c.with_overrides(workers=4).digest()
    assert c.digest() != c.with_overrides(seed=12).digest()
    assert len(c.digest()) == 16
    with pytest.raises(ConfigError):
        c.with_overrides(workers=0)


def test_replica_ids():
    c = validate(ExperimentConfig("x", "dichotomy-poisson", 0.5, zeta=0.7, n=(100,), replicas=200, replica_offset=5))
    assert list(c.replica_ids())[:2] == [5, 6] and len(c.replica_ids()) == 200


def test_target_point_and_gap():
    c = one(BASE, "compound")
    p = MapParams(0.5)
    zeta, period, theta = target_point(c, p)
    rec = periodic_point(p, "RL")
    assert (zeta, period) == (rec.zeta, 2)
    assert theta == pytest.approx(rec.theta)
    assert cluster_gap(c, period, zeta) == 2


def _square(args, ids):
    return [args * i for i in ids]


def test_replica_mapper_order():
    with ReplicaMapper(1) as m1, ReplicaMapper(2) as m2:
        ids = range(137)
        assert m1(_square, 3, ids) == m2(_square, 3, ids) == [3 * i for i in ids]


def test_run_outputs_and_records(tmp_path):
    c = one(BASE, "ulam")
    rec = run(c, out=tmp_path)
    assert rec.schema == SCHEMA and rec.passed
    d = tmp_path / "ulam"
    assert (d / "metrics.csv").read_text().splitlines()[0] == "experiment,n,statistic,value,ci"
    assert "runtime" not in (d / "record.txt").read_text()
    back = load_records(tmp_path)
    assert len(back) == 1 and back[0].digest == rec.digest
    assert [m.name for m in back[0].metrics] == [m.name for m in rec.metrics]
    line = json.loads((tmp_path / "records.jsonl").read_text())
    assert line["runtime"] > 0


def test_report_empty_and_json(tmp_path):
    assert load_records(tmp_path) == []
    out = report([], "csv")
    assert out["summary"].splitlines() == ["experiment,kind,module,statistic,n,value,ci,target,passed"]
    paths = report([], "json-lines", tmp_path / "r")
    assert paths[0].name == "summary.jsonl"


def test_report_series_for_zero_adjusted():
    from mpevt.harness.experiments import Metric
    m = [Metric("evl", 0.6, "stats", n=1000, tau=0.5), Metric("evl", 0.61, "stats", n=10000, tau=0.5)]
    rec = ResultRecord("z", "zero-adjusted", "d", 1, tuple(m))
    out = report([rec])
    assert out["z_evl_tau0.5"].splitlines()[0] == "n,p_hat,exp_minus_tau"


@pytest.mark.slow
def test_deterministic_replay_across_workers(tmp_path):
    c = one(BASE, "compound")
    run(c, workers=1, out=tmp_path / "w1")
    run(c, workers=2, out=tmp_path / "w2")
    files = sorted(p.relative_to(tmp_path / "w1") for p in (tmp_path / "w1" / "compound").iterdir())
    assert files
    for f in files:
        assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w2" / f).read_bytes(), f
