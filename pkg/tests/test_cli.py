from __future__ import annotations

import subprocess
import sys

import pytest

from scms import tlv
from scms.bench import load_report
from scms.cli import bench_main, ee_main, node_main
from scms.spdu import fixture_hex


def _last_line(capsys) -> str:
    return capsys.readouterr().out.strip().splitlines()[-1]


@pytest.fixture
def server(tmp_path):
    root = tmp_path / "pki"
    assert node_main(["bootstrap", "--root", str(root), "--seed", "7"]) == 0
    proc = subprocess.Popen(
        [sys.executable, "-c", "import sys; from scms.cli import node_main; sys.exit(node_main(sys.argv[1:]))",
         "serve", "--root", str(root), "--listen", "127.0.0.1:0", "--max-seconds", "60"],
        stdout=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline()
    assert line.startswith("serving"), line
    yield root, line.split()[-1]
    proc.terminate()
    proc.wait(10)


def test_full_cli_flow(server, tmp_path, capsys):
    root, addr = server
    dev = str(tmp_path / "obu")
    assert ee_main(["init", "--profile", "obu", "--root", dev, "--trust", str(root / "trust")]) == 0
    ee_id, key = _last_line(capsys).split()
    # the running server reads the registration from disk
    assert node_main(["register", "--root", str(root), "--ee-id", ee_id, "--canonical-key", key]) == 0
    for step in ("enroll", "authorize", "download"):
        assert ee_main([step, "--profile", "obu", "--root", dev, "--server", addr]) == 0
    assert "20 authorization certificates" in _last_line(capsys)

    assert ee_main(["sign", "--root", dev, "--payload-hex", fixture_hex("bsm"), "--class", "bsm"]) == 0
    spdu_hex = _last_line(capsys)
    assert tlv.decode(bytes.fromhex(spdu_hex)).tbs.payload.hex().startswith(fixture_hex("bsm"))

    rx = str(tmp_path / "rsu")
    assert ee_main(["init", "--profile", "rsu", "--root", rx, "--trust", str(root / "trust")]) == 0
    assert ee_main(["sign", "--root", dev, "--payload-hex", "0102", "--class", "bsm", "--digest", "--ac-index", "0"]) == 0
    digest_hex = _last_line(capsys)
    assert ee_main(["verify", "--root", rx, "--spdu-hex", digest_hex]) == 2  # UnknownSigner
    assert "UnknownSigner" in capsys.readouterr().err
    assert ee_main(["verify", "--root", rx, "--spdu-hex", spdu_hex]) == 0
    assert _last_line(capsys).startswith("valid")
    # the full certificate was cached on disk, so the digest form now resolves
    assert ee_main(["verify", "--root", rx, "--spdu-hex", digest_hex]) == 0
    assert ee_main(["sign", "--root", dev, "--payload-hex", "01", "--class", "spat"]) == 2


def test_unregistered_device_reports_error(server, tmp_path, capsys):
    root, addr = server
    dev = str(tmp_path / "x")
    ee_main(["init", "--profile", "rsu", "--root", dev, "--trust", str(root / "trust")])
    assert ee_main(["enroll", "--root", dev, "--server", addr]) == 2
    assert "UnknownDevice" in capsys.readouterr().err


def test_bench_cli(tmp_path, capsys):
    out = tmp_path / "report.tlv"
    rc = bench_main(["run", "--iterations", "1", "--seed", "2", "--profiles", "rsu", "--out", str(out), "--text"])
    assert rc == 0
    assert "Decode and verify Zip" in capsys.readouterr().out
    rep = load_report(out.read_bytes())
    assert rep.iterations == 1 and rep.seed == 2
    assert bench_main(["show", str(out)]) == 0
