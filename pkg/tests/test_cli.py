import json
import time

import pytest

from intforce.cli import EXIT_CAPACITY, EXIT_IO, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def eye_channel(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("1 0\n0 1\n")
    return str(p)


def test_rate_identity(capsys, eye_channel):
    code, out, _ = run(capsys, "rate", "--nt", "2", "--nr", "2", "--blocks", "1", "--snr-db", "0",
                       "--method", "am-if", "--channel-file", eye_channel)
    assert code == EXIT_OK
    assert out.strip().endswith("rate 0.5")


def test_rate_deterministic(capsys):
    args = ["rate", "--method", "prop4", "--seed", "3", "--trial", "5", "--snr-db", "17"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_unknown_method(capsys):
    code, _, err = run(capsys, "rate", "--method", "bogus")
    assert code == EXIT_USAGE and "unknown method" in err


def test_bad_usage_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["outage", "--trials", "abc"])
    assert exc.value.code == 2


def test_channel_file_shape_mismatch(capsys, eye_channel):
    code, _, _ = run(capsys, "rate", "--blocks", "2", "--channel-file", eye_channel)
    assert code == EXIT_USAGE


def test_outage_smoke_stdout(capsys):
    t = time.perf_counter()
    code, out, _ = run(capsys, "outage", "--methods", "prop1,prop2", "--snr-min", "10", "--snr-max", "12",
                       "--snr-step", "1", "--trials", "10", "--threads", "1")
    assert time.perf_counter() - t < 1.0
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "snr_db,method,trials,rho,outage_rate_bits_per_dim"
    assert len(lines) == 7


def test_outage_manifest_replay(capsys, tmp_path):
    out1 = tmp_path / "a.csv"
    code, _, _ = run(capsys, "outage", "--methods", "prop2,prop4", "--snr-min", "15", "--snr-max", "20",
                     "--snr-step", "5", "--trials", "50", "--rho", "0.1", "--seed", "9", "--threads", "1",
                     "--out", str(out1))
    assert code == EXIT_OK
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["command"] == "outage" and manifest["seed"] == 9
    out2 = tmp_path / "b.csv"
    code, _, _ = run(capsys, "outage", "--config", str(tmp_path / "a.csv.manifest.json"), "--threads", "2",
                     "--out", str(out2))
    assert code == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()


def test_outage_capacity_reported(capsys):
    code, _, err = run(capsys, "outage", "--nt", "3", "--nr", "3", "--methods", "exh-gm-sif", "--snr-min", "10",
                       "--snr-max", "10", "--trials", "3", "--threads", "1")
    assert code == EXIT_CAPACITY and "skipped" in err


def test_outage_needs_grid(capsys):
    code, _, _ = run(capsys, "outage", "--trials", "3")
    assert code == EXIT_USAGE


def test_outage_bad_out_path(capsys):
    code, _, _ = run(capsys, "outage", "--methods", "prop1", "--snr-min", "10", "--snr-max", "10", "--trials", "3",
                     "--threads", "1", "--out", "/nonexistent-dir/x.csv")
    assert code == EXIT_IO


def test_fer_smoke(capsys, tmp_path):
    out = tmp_path / "fer.csv"
    code, _, _ = run(capsys, "fer", "--n", "32", "--methods", "am-if,prop2", "--snr-db-list", "60,-20",
                     "--max-frames", "20", "--max-errors", "5", "--threads", "1", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "snr_db,method,frames,frame_errors,fer"
    assert lines[1] == "60,am-if,20,0,0"
    assert lines[3].startswith("-20,am-if,") and lines[3].endswith(",5," + lines[3].split(",")[-1])


def test_reduce(capsys, tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("1 0\n0 1\n")
    code, out, _ = run(capsys, "reduce", "--gram-file", str(g), "--algo", "lll")
    assert code == EXIT_OK and out.startswith("U\n1 0\n0 1\n")
    g.write_text("2 1.9\n1.9 2\n")
    lag = run(capsys, "reduce", "--gram-file", str(g), "--algo", "lagrange")[1]
    exh = run(capsys, "reduce", "--gram-file", str(g), "--algo", "exhaustive")[1]
    assert lag.splitlines()[3] == exh.splitlines()[3]
    g.write_text("1 2\n2 1\n")
    assert run(capsys, "reduce", "--gram-file", str(g))[0] == EXIT_USAGE
    assert run(capsys, "reduce", "--gram-file", str(tmp_path / "missing.txt"))[0] == EXIT_IO
