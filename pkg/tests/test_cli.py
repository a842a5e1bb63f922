import os
import socket
import subprocess
import sys
import time

import pytest

from charlotte.cli import ConfigError, build_service, main, read_config
from charlotte.core import SigningKey, load_key_file
from charlotte.metrics import parse

CLI = [sys.executable, "-m", "charlotte.cli"]


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    p = s.getsockname()[1]
    s.close()
    return p


def test_keygen_and_reload(tmp_path, capsys):
    out = tmp_path / "k"
    assert main(["keygen", "--out", str(out), "--seed", "7"]) == 0
    pub = capsys.readouterr().out.strip()
    assert load_key_file(str(out)).id.public_key.hex() == pub
    assert pub == SigningKey.derive("7", "key").id.public_key.hex()


def test_bad_key_file(tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.write_text("nothex\n")
    assert main(["serve", "wilbur", "--key", str(bad)]) != 0
    assert "key file" in capsys.readouterr().err


def test_fern_needs_kind(tmp_path, capsys):
    k = tmp_path / "k"
    main(["keygen", "--out", str(k), "--seed", "1"])
    assert main(["serve", "fern", "--key", str(k)]) == 2


def test_unknown_experiment_is_usage_error(capsys):
    assert main(["experiment", "nope"]) == 2
    assert "unknown experiment" in capsys.readouterr().err
    assert main(["experiment", "agreement-latency", "-p", "colour=red"]) == 2


def test_experiment_writes_metrics(tmp_path):
    out = tmp_path / "m.txt"
    assert main(["experiment", "hetcons-contention", "--seed", "2", "--out", str(out),
                 "-p", "clients=2", "-p", "slots=10", "-p", "window=2,8"]) == 0
    head, recs = parse(out.read_text())
    assert head["experiment"] == "hetcons-contention" and head["param_slots"] == "10"
    assert [k for k, _ in recs] == ["contention"]


def test_config_parsing(tmp_path):
    p = tmp_path / "c.txt"
    ids = [SigningKey.derive(0, "h%d" % i).id.public_key.hex() for i in range(4)]
    p.write_text("participants = %s\n# comment\nchain.main = 1: %s\nledger = %s\n" % (
        ",".join("%s@127.0.0.1:%d" % (h, 9000 + i) for i, h in enumerate(ids)),
        " ".join(ids), tmp_path / "ledger"))
    cfg = read_config(str(p))
    svc, blocks = build_service("fern", "hetcons", SigningKey.derive(0, "h0"), cfg)
    assert len(svc.directory) == 4 and len(blocks) == 2
    with pytest.raises(ConfigError):
        build_service("fern", "agreement", SigningKey.derive(0, "x"), {"parent_count": "two"})
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "missing"))


@pytest.mark.parametrize("kind", ["agreement", "timestamp", "nakamoto", "git", "hetcons"])
def test_every_kind_builds(kind):
    svc, _ = build_service("fern", kind, SigningKey.derive(0, "k"), {})
    assert svc is not None


def _spawn(args):
    p = subprocess.Popen(CLI + args, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = p.stdout.readline()
    assert "listening on" in line, p.stderr.read()
    return p


def test_serve_and_client_over_tcp(tmp_path):
    wk, tk = tmp_path / "w", tmp_path / "t"
    main(["keygen", "--out", str(wk), "--seed", "1", "--label", "w"])
    main(["keygen", "--out", str(tk), "--seed", "1", "--label", "t"])
    wp, tp = free_port(), free_port()
    procs = [_spawn(["serve", "wilbur", "--listen", "127.0.0.1:%d" % wp, "--key", str(wk)]),
             _spawn(["serve", "fern", "--kind", "timestamp", "--listen", "127.0.0.1:%d" % tp,
                     "--key", str(tk)])]
    try:
        f = tmp_path / "doc"
        f.write_bytes(b"hello")
        r = subprocess.run(CLI + ["client", "store", str(f), "--to", "127.0.0.1:%d" % wp],
                           capture_output=True, text=True, timeout=60)
        assert r.returncode == 0 and "stored-by" in r.stdout
        r = subprocess.run(CLI + ["client", "stamp", str(f), "--to", "127.0.0.1:%d" % tp],
                           capture_output=True, text=True, timeout=60)
        assert r.returncode == 0 and "stamped-by" in r.stdout
    finally:
        for p in procs:
            p.terminate()
        for p in procs:
            assert p.wait(timeout=10) == 0
            p.stdout.close()
            p.stderr.close()


def test_bind_failure(tmp_path):
    k = tmp_path / "k"
    main(["keygen", "--out", str(k), "--seed", "1"])
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    s.listen()
    try:
        r = subprocess.run(CLI + ["serve", "wilbur", "--key", str(k), "--listen",
                                  "127.0.0.1:%d" % s.getsockname()[1]],
                           capture_output=True, text=True, timeout=30)
    finally:
        s.close()
    assert r.returncode != 0 and "cannot listen" in r.stderr
