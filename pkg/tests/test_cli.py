import csv
import io
import subprocess
import sys

import pytest

from opportunet.cli import main, read_messages

from oracles import ceil_tick, hop_latency

TRACE = "time,a,b,kind\n10,0,1,up\n20,0,1,down\n40,1,2,up\n50,1,2,down\n"
MESSAGES = "time,source,destination,size\n0,0,2,524288\n"


def _report(text):
    return dict(csv.reader(io.StringIO(text)))


@pytest.fixture
def short_cfg(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text("sim.duration = 300\ntraffic.cooldown = 0\n")
    return path


def test_validate_default_config(capsys):
    assert main(["validate"]) == 0
    assert "50 bicycles" in capsys.readouterr().out


def test_validate_dump_round_trips(tmp_path, capsys):
    assert main(["validate", "--dump"]) == 0
    dumped = capsys.readouterr().out.split("\n", 1)[1]
    path = tmp_path / "dumped.cfg"
    path.write_text(dumped)
    assert main(["validate", "-c", str(path)]) == 0


def test_validate_rejects_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("sim.tick = 0.1\nprophet.pInit = 1.5\n")
    assert main(["validate", "-c", str(path)]) == 2
    err = capsys.readouterr().err
    assert "prophet.pInit" in err and "line 2" in err


def test_missing_config_file(capsys):
    assert main(["validate", "-c", "/nonexistent/x.cfg"]) == 1
    assert "error" in capsys.readouterr().err


def test_run_writes_layout(tmp_path, short_cfg, capsys):
    out = tmp_path / "out"
    assert main(["run", "-c", str(short_cfg), "-o", str(out), "--contacts"]) == 0
    d = out / "run_epidemic_1048576_1"
    assert (d / "events.csv").read_text().startswith("time,event,msg_id,from,to,size,hops\n")
    assert _report((d / "report.csv").read_text())["router"] == "epidemic"
    assert (d / "contacts.csv").read_text().startswith("time,a,b,kind\n")


def test_sweep_runs_grid(tmp_path, short_cfg, capsys):
    out = tmp_path / "sweep"
    argv = ["sweep", "-c", str(short_cfg), "--sizes", "262144,524288", "--seeds", "1,2", "--routers", "epidemic", "-o", str(out)]
    assert main(argv) == 0
    runs = sorted(p.name for p in out.iterdir() if p.name.startswith("run_"))
    assert runs == [
        "run_epidemic_262144_1",
        "run_epidemic_262144_2",
        "run_epidemic_524288_1",
        "run_epidemic_524288_2",
    ]
    for metric in ("delivery_probability", "avg_latency", "overhead_ratio"):
        rows = list(csv.reader(open(out / f"aggregate_{metric}.csv")))
        assert len(rows) == 3
    assert (out / "scatter_epidemic.csv").exists()


def test_sweep_rejects_unknown_router(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--routers", "flood", "-o", str(tmp_path)])
    assert info.value.code == 2


def test_replay_line_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    trace.write_text(TRACE)
    msgs = tmp_path / "msgs.csv"
    msgs.write_text(MESSAGES)
    cfg = tmp_path / "replay.cfg"
    cfg.write_text("sim.duration = 100\nlink.bufferSize = 1e12\n")
    assert main(["replay", "-t", str(trace), "-c", str(cfg), "-m", str(msgs), "-o", str(tmp_path / "r")]) == 0
    rep = _report(capsys.readouterr().out)
    assert rep["delivered"] == "1" and rep["relayed"] == "2"
    analytic = hop_latency([10.0, 40.0], 524288, 0.0)
    assert abs(float(rep["avg_latency"]) - analytic) <= 0.1
    assert float(rep["avg_latency"]) == pytest.approx(ceil_tick(analytic, 0.1))
    assert (tmp_path / "r" / "run_epidemic_1048576_1" / "events.csv").exists()


def test_replay_with_generated_traffic(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    trace.write_text(TRACE)
    cfg = tmp_path / "replay.cfg"
    cfg.write_text("sim.duration = 100\ntraffic.cooldown = 0\n")
    assert main(["replay", "-t", str(trace), "-c", str(cfg)]) == 0
    assert int(_report(capsys.readouterr().out)["created"]) >= 2


def test_replay_rejects_non_alternating_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    trace.write_text("time,a,b,kind\n10,0,1,up\n12,0,1,up\n")
    assert main(["replay", "-t", str(trace)]) == 1  # rejected at load: does not alternate
    assert "alternate" in capsys.readouterr().err


def test_read_messages():
    msgs = read_messages("time,source,destination,size,id\n1.5,0,2,100,hello\n2,1,0,5\n")
    assert [(m.id, m.source, m.destination, m.size, m.created_at) for m in msgs] == [
        ("hello", 0, 2, 100, 1.5),
        ("M2", 1, 0, 5, 2.0),
    ]
    with pytest.raises(ValueError, match="line 2"):
        read_messages("time,source,destination,size\n1,0\n")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "opportunet", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run(
        [sys.executable, "-m", "opportunet", "validate", "-c", "/dev/null/x"], capture_output=True, text=True
    )
    assert proc.returncode != 0 and proc.stderr


def test_invariant_violation_exit_code(tmp_path, monkeypatch, capsys):
    from opportunet import cli
    from opportunet.engine import InvariantViolation

    def broken(*args, **kwargs):
        raise InvariantViolation("buffer over capacity")

    monkeypatch.setattr(cli, "run", broken)
    assert main(["run", "-o", str(tmp_path)]) == 3
    assert "buffer over capacity" in capsys.readouterr().err
