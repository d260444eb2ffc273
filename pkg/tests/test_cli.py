import json
import xml.dom.minidom

import numpy as np
import pytest

from gpx import cli
from gpx.svg import plot_crossings


def _run(args, capsys):
    code = cli.run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def _payload(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "metadata"}


def test_criterion_verdicts(capsys):
    code, out, _ = _run(["criterion", "--p", "-1"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["verdict"] == "zero"
    cli.validate_report(rep)
    code, out, _ = _run(["criterion", "--p", "0.5", "--c", "0.5"], capsys)
    res = json.loads(out)["result"]
    assert res["verdict"] == "one" and res["integral"]["verdict"] == "divergent"
    code, out, _ = _run(["criterion", "--p", "1", "--n", "2"], capsys)
    assert code == 0 and json.loads(out)["result"]["integral"] is None


def test_exit_codes(tmp_path, capsys):
    assert _run(["nonsense"], capsys)[0] == 2
    assert _run(["tail", "--bogus", "1"], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"u": "x"}')
    assert _run(["tail", "--config", str(bad)], capsys)[0] == 2
    bad.write_text("{not json")
    assert _run(["tail", "--config", str(bad)], capsys)[0] == 2
    bad.write_text('{"unknown_key": 1}')
    assert _run(["tail", "--config", str(bad)], capsys)[0] == 2
    assert _run(["tail", "--out", str(tmp_path / "no" / "x.json")], capsys)[0] == 2
    assert _run(["tail", "--alpha", "3"], capsys)[0] == 2
    assert _run(["plot"], capsys)[0] == 2


def test_computation_failure_exit_code(tmp_path, capsys):
    table = tmp_path / "r.csv"
    table.write_text("t,r\n0,1\n0.1,-0.99\n1000,-0.99\n")
    code, _, err = _run(["simulate", "--family", "table", "--table", str(table), "--c", "1",
                         "--alpha", "1", "--mesh", "0.1"], capsys)
    assert code == 1 and "EmbeddingError" in err


def test_flags_override_config_and_env_seed(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"u": 1.5, "reps": 1000, "theta": 0.5, "seed": 3}))
    code, out, _ = _run(["tail", "--config", str(cfg), "--u", "1.0"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["config"]["u"] == 1.0 and rep["config"]["seed"] == 3
    monkeypatch.setenv("GPX_SEED", "17")
    code, out, _ = _run(["tail", "--u", "1.0", "--reps", "1000", "--theta", "0.5"], capsys)
    assert json.loads(out)["config"]["seed"] == 17
    code, out, _ = _run(["tail", "--u", "1.0", "--reps", "1000", "--theta", "0.5", "--seed", "2"], capsys)
    assert json.loads(out)["config"]["seed"] == 2


def test_deterministic_payloads(tmp_path, capsys):
    outs = []
    for i in range(2):
        data = tmp_path / f"p{i}.csv"
        rep = tmp_path / f"r{i}.json"
        args = ["simulate", "--n", "2", "--mesh", "0.05", "--seed", "4", "--data", str(data),
                "--out", str(rep), "--threads", str(1 + 3 * i)]
        assert _run(args, capsys)[0] == 0
        report = json.loads(rep.read_text())
        report["config"].pop("data")
        report["result"].pop("data")
        report["config"].pop("out")
        report["config"].pop("threads")
        outs.append((data.read_bytes(), json.dumps(_payload(report), sort_keys=True)))
    assert outs[0] == outs[1]


def test_binary_simulation(tmp_path, capsys):
    data = tmp_path / "p.gpx"
    code, out, _ = _run(["simulate", "--format", "binary", "--data", str(data), "--mesh", "0.25"], capsys)
    assert code == 0 and data.read_bytes()[:4] == b"GPX1"


def test_tail_pickands_lil_berman_roundtrip(tmp_path, capsys):
    runs = {
        "tail": ["--u", "1.5", "--reps", "1000", "--theta", "0.5"],
        "pickands": ["--T", "2", "--reps", "50", "--theta", "0.05",
                     "--ladder-csv", str(tmp_path / "l.csv")],
        "lil": ["--horizon", "1000", "--runs", "2", "--theta", "0.5",
                "--crossings-csv", str(tmp_path / "c.csv")],
        "berman": ["--count", "5", "--calibrate", "3", "--d-max", "3", "--csv", str(tmp_path / "b.csv")],
    }
    for cmd, extra in runs.items():
        out = tmp_path / f"{cmd}.json"
        code, _, err = _run([cmd, *extra, "--out", str(out)], capsys)
        assert code == 0, err
        rep = json.loads(out.read_text())
        cli.validate_report(rep)
        assert rep["schema_version"] == cli.SCHEMA_VERSION and "timestamp" in rep["metadata"]
    assert (tmp_path / "l.csv").read_text().startswith("alpha,k,T,theta,value,ci,replicates")
    assert (tmp_path / "b.csv").read_text().startswith("instance_id,d,n,r,lhs_diff,bound,ratio")
    assert (tmp_path / "c.csv").read_text().startswith("t,x_value,f_p,crossed")
    svg = tmp_path / "c.svg"
    code, out, _ = _run(["plot", "--input", str(tmp_path / "c.csv"), "--out", str(svg)], capsys)
    assert code == 0
    xml.dom.minidom.parse(str(svg))


def test_lil_csv_is_run_zero(tmp_path, capsys):
    # the crossing series written by the CLI is the first run of the experiment
    out = tmp_path / "l.json"
    csv = tmp_path / "c.csv"
    _run(["lil", "--horizon", "1000", "--runs", "1", "--theta", "0.5", "--seed", "9",
          "--crossings-csv", str(csv), "--out", str(out)], capsys)
    rep = json.loads(out.read_text())["result"]
    rows = np.loadtxt(csv, delimiter=",", skiprows=1)
    starts = rows[:, 3].astype(bool) & ~np.concatenate([[False], rows[:-1, 3].astype(bool)])
    assert starts.sum() == rep["crossings"]["mean"]


def test_berman_instances_file(tmp_path, capsys):
    f = tmp_path / "i.json"
    f.write_text(json.dumps([{"n": 1, "r": 1, "sigma0": [[1, 0], [0, 1]],
                              "sigma1": [[1, 0.5], [0.5, 1]], "u": [1, 1]}]))
    code, out, _ = _run(["berman", "--instances", str(f), "--calibrate", "1"], capsys)
    res = json.loads(out)["result"]
    assert code == 0 and res["reports"][0]["bound"] == pytest.approx(0.268824, abs=1e-6)


def test_empty_plot_is_valid_svg(tmp_path, capsys):
    csv = tmp_path / "e.csv"
    csv.write_text("t,x_value,f_p,crossed\n3,0.1,4,0\n4,0.2,4.1,0\n")
    svg = tmp_path / "e.svg"
    assert _run(["plot", "--input", str(csv), "--out", str(svg), "--title", "a < b"], capsys)[0] == 0
    doc = xml.dom.minidom.parse(str(svg))
    assert doc.getElementsByTagName("circle") == []
    assert len(doc.getElementsByTagName("polyline")) == 2
    empty = plot_crossings([], [], [], [])
    assert xml.dom.minidom.parseString(empty).documentElement.tagName == "svg"


def test_plot_markers_and_thinning():
    t = np.linspace(3, 1000, 20_000)
    x = np.sin(t)
    f = np.full_like(t, 0.99)
    text = plot_crossings(t, x, f, x >= f)
    doc = xml.dom.minidom.parseString(text)
    assert len(doc.getElementsByTagName("circle")) == int((x >= f).sum())
    pts = doc.getElementsByTagName("polyline")[0].getAttribute("points").split()
    assert len(pts) <= 4000


def test_help_documents_columns(capsys):
    for cmd, cols in (("berman", "instance_id,d,n,r,lhs_diff,bound,ratio"),
                      ("lil", "t,x_value,f_p,crossed"), ("pickands", "alpha,k,T,theta,value,ci,replicates")):
        assert cli.run([cmd, "--help"]) == 0
        assert cols in capsys.readouterr().out
