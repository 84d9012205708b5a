import json

import pytest

from bufsim.cli import main

BASE = {"link": {"bdp": 1000, "buffer": 100}, "n_flows": 1, "algorithm": "reno", "duration": 1000}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def test_simulate_writes_trace_and_summary(tmp_path, capsys):
    cfg = write(tmp_path, BASE)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "trace.csv").read_text().splitlines()
    assert rows[0] == "slot,W,Q,mu,loss,n_decreasing"
    assert len(rows) == 1001
    summary = json.loads((tmp_path / "o" / "trace.summary.json").read_text())
    assert summary["version"] and summary["config"]["n_flows"] == 1


def test_simulate_byte_identical(tmp_path):
    cfg = write(tmp_path, dict(BASE, n_flows=8, sync="sqrt_extra", record_flows=True, seed=5))
    for out in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / out),
                     "--format", "csv,json,svg"]) == 0
    for name in ("trace.csv", "trace.summary.json", "trace.window.svg", "trace.queue.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, dict(BASE, n_flows=8, sync="sqrt_extra"))
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "99"])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_unknown_algorithm_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, dict(BASE, algorithm="vegas"))
    assert main(["simulate", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "algorithm" in err and "line" in err


def test_invalid_json_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"link": {"bdp": 1000,\n "buffer": }}')
    assert main(["simulate", "--config", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_flag_is_config_error():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--format", "pdf"])
    assert exc.value.code == 2


def test_sweep_sorted_table(tmp_path, capsys):
    cfg = write(tmp_path, dict(BASE, sync="sqrt_extra", duration=300,
                               sweep={"parameter": "n_flows", "values": [16, 4]}))
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--jobs", "2"]) == 0
    rows = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[1].split(",")[2] == "4" and rows[2].split(",")[2] == "16"


def test_sweep_jobs_do_not_change_output(tmp_path):
    cfg = write(tmp_path, dict(BASE, sync="sqrt_extra", duration=300,
                               sweep={"parameter": "buffer", "values": [0, 50, 500]}))
    main(["sweep", "--config", cfg, "--out", str(tmp_path / "a"), "--jobs", "1"])
    main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--jobs", "3"])
    assert (tmp_path / "a" / "sweep.json").read_bytes() == (tmp_path / "b" / "sweep.json").read_bytes()


def test_sweep_empty_values(tmp_path):
    cfg = write(tmp_path, dict(BASE, sweep={"parameter": "n_flows", "values": []}))
    assert main(["sweep", "--config", cfg]) == 2


def test_sweep_unknown_parameter(tmp_path):
    cfg = write(tmp_path, dict(BASE, sweep={"parameter": "colour", "values": [1]}))
    assert main(["sweep", "--config", cfg]) == 2


def test_bounds_outputs(capsys):
    assert main(["bounds", "sqrt-n", "--delta-hi", "2", "--bdp", "1000", "--n", "100"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(200)
    assert main(["bounds", "single", "--algo", "cubic", "--gamma", "1", "--bdp", "1000"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(3000 / 7, abs=1)


def test_bounds_domain_error(capsys):
    assert main(["bounds", "bbr", "--delta", "0", "--delta-hi", "2", "--bdp", "1000",
                 "--n", "10"]) == 2
    assert "delta" in capsys.readouterr().err


def test_bounds_missing_input(capsys):
    assert main(["bounds", "sqrt-n", "--bdp", "1000"]) == 2


def test_verify_fully_synchronized(tmp_path, capsys):
    cfg = write(tmp_path, dict(BASE, n_flows=64, link={"bdp": 1000, "buffer": 250}, sync="fully_synchronized",
                               verify={"suite": ["thm2"], "band": [0.5, 2], "seeds": 2}))
    assert main(["verify", "--config", cfg]) == 3
    assert "premises never held" in capsys.readouterr().out


def test_verify_custom_suite(tmp_path, capsys):
    cfg = write(tmp_path, {"verify": {"suite": ["thm5", "lemma6"], "trials": 2000}})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert [r["theorem"] for r in report["reports"]] == ["thm5", "lemma6"]


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    import bufsim.cli as cli

    def boom(*a, **k):
        raise cli.SimulationError(3, "aggregate window is not finite")

    monkeypatch.setattr(cli, "run", boom)
    cfg = write(tmp_path, BASE)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 4
