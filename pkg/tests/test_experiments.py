import os
import subprocess
import sys

import pytest

from charlotte.experiments import EXPERIMENTS, params_for, parse_value, run_experiment
from charlotte.experiments.nakamoto import fit
from charlotte.metrics import Metrics, parse, percentile

# Small enough for the unit suite; the acceptance suite uses the full sizes.
SMALL = {
    "nakamoto-scaling": {"bits": "8..9", "miners": "1,2", "blocks": "4"},
    "agreement-latency": {"blocks": "12", "warmup": "4"},
    "agreement-bandwidth": {"f": "1", "blocks": "6", "warmup": "2", "block_bytes": "20000"},
    "hetcons-parallel": {"chains": "1,2", "blocks": "8", "warmup": "2"},
    "hetcons-multichain": {"chains": "2", "blocks": "6", "warmup": "2"},
    "hetcons-contention": {"clients": "2", "slots": "12", "window": "2,10"},
    "hetcons-mixed": {"chains": "2", "clients": "2", "blocks": "6"},
    "timestamp-accrual": {"ferns": "4", "requests": "200"},
}


def test_small_covers_every_experiment():
    assert set(SMALL) == set(EXPERIMENTS)


def test_parse_value():
    assert parse_value("3..5", [1]) == [3, 4, 5]
    assert parse_value("1,4", [1]) == [1, 4]
    assert parse_value("off", True) is False
    assert parse_value("2.5", 1.0) == 2.5
    with pytest.raises(ValueError):
        parse_value("maybe", True)


def test_params_reject_unknowns():
    with pytest.raises(KeyError):
        params_for("nope")
    with pytest.raises(KeyError):
        params_for("agreement-latency", {"colour": "1"})


def test_metrics_roundtrip():
    m = Metrics("x", seed=1)
    m.add("r", a=1, b=0.5, c=[1, 2], d=True)
    head, recs = parse(m.render())
    assert head == {"schema": "charlotte-metrics/1", "experiment": "x", "seed": "1"}
    assert recs == [("r", {"a": "1", "b": "0.500000", "c": "1,2", "d": "true"})]


def test_percentile():
    assert percentile([1, 2, 3, 4], 50) == 2.5
    assert percentile([5], 99) == 5


def test_fit_recovers_line():
    a, c, r2 = fit([(x, 3 + 2 * x) for x in range(10)])
    assert a == pytest.approx(3) and c == pytest.approx(2) and r2 == pytest.approx(1)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_runs_and_headers(name):
    m = run_experiment(name, SMALL[name], seed=3)
    head, recs = parse(m.render())
    assert list(head)[:4] == ["schema", "experiment", "seed", "backend"]
    assert head["experiment"] == name and head["backend"] == "sim"
    assert recs


def test_agreement_small_latency_floor():
    m = run_experiment("agreement-latency", SMALL["agreement-latency"], seed=1)
    meds = {r["wilbur"]: float(r["p50_ms"]) for k, r in parse(m.render())[1] if k == "summary"}
    assert 200 <= meds["false"] <= 260 and 400 <= meds["true"] <= 480


def _run_cli(name, seed, hashseed, out):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    args = [sys.executable, "-m", "charlotte.cli", "experiment", name, "--seed", str(seed), "--out", out]
    for k, v in SMALL[name].items():
        args += ["-p", "%s=%s" % (k, v)]
    subprocess.run(args, check=True, env=env, timeout=600)
    with open(out, "rb") as fh:
        return fh.read()


@pytest.mark.parametrize("name", ["agreement-latency", "hetcons-contention", "timestamp-accrual"])
def test_deterministic_across_processes(name, tmp_path):
    a = _run_cli(name, 5, 1, str(tmp_path / "a"))
    b = _run_cli(name, 5, 2, str(tmp_path / "b"))
    assert a == b


def test_seed_changes_output():
    a = run_experiment("agreement-latency", SMALL["agreement-latency"], seed=1).render()
    b = run_experiment("agreement-latency", SMALL["agreement-latency"], seed=2).render()
    assert a != b


def test_tcp_backend_smoke():
    m = run_experiment("agreement-latency", {"blocks": "4", "warmup": "1", "wilbur": "without",
                                             "jitter": "false"}, backend="tcp")
    recs = [r for k, r in parse(m.render())[1] if k == "summary"]
    assert recs and int(recs[0]["n"]) == 3
