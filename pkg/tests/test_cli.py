import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from slecone import io
from slecone.cli import main


def run_json(tmp_path, name, *argv):
    out = tmp_path / name
    assert main([*argv, "--out", str(out)]) == 0
    return json.loads(out.read_text()), out


@pytest.mark.parametrize("rho,phase", [(-2.2, "light_cone"), (-4.0, "not_defined"), (-2.0, "boundary_tracing")])
def test_classify_examples(tmp_path, rho, phase):
    doc, _ = run_json(tmp_path, "c.json", "classify", "--kappa", "3", "--rho", str(rho))
    assert doc["phase"] == phase
    if rho == -2.2:
        assert doc["delta"] == pytest.approx(1 + 2 * (-0.2) / 3, rel=1e-12)
    if rho == -2.0:
        assert doc["dimension"] == 1


def test_classify_stdout(capsys):
    assert main(["classify", "--kappa", "2", "--rho", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["phase"] == "boundary_avoiding"


def test_invalid_parameters_exit_2(tmp_path, capsys):
    assert main(["classify", "--kappa", "-1", "--rho", "0"]) == 2
    assert main(["simulate", "--kappa", "3", "--steps", "0"]) == 2
    assert main(["simulate", "--kappa", "3", "--rho", "-4", "--steps", "10"]) == 2
    assert main(["lightcone", "--kappa", "3", "--theta1", "0.0"]) == 2
    assert main(["simulate", "--kappa", "3", "--seed", "-1"]) == 2
    capsys.readouterr()


def test_numerical_failure_exit_3(monkeypatch):
    from slecone import cli
    from slecone.loewner import LoewnerError

    def boom(*a, **k):
        raise LoewnerError("non-finite value", 17)

    monkeypatch.setattr(cli, "sample_sle_trace", boom)
    assert main(["simulate", "--kappa", "3", "--steps", "10"]) == 3


def test_simulate_output(tmp_path):
    doc, out = run_json(tmp_path, "t.json", "simulate", "--kappa", "3", "--rho", "-2.2", "--steps", "500",
                        "--dt", "1e-3", "--seed", "7")
    assert doc["points"][0] == [0, 0]
    assert {"kappa", "rho", "dt", "seed", "capacity_times", "points"} <= set(doc)
    assert len(doc["points"]) == len(doc["capacity_times"]) == 501
    assert io.manifest_path(str(out)).endswith(".manifest.json")


def test_simulate_twice_is_byte_identical(tmp_path):
    argv = ["simulate", "--kappa", "2", "--steps", "300", "--dt", "1e-3", "--seed", "11"]
    _, a = run_json(tmp_path, "a.json", *argv)
    _, b = run_json(tmp_path, "b.json", *argv)
    assert a.read_bytes() == b.read_bytes()


def test_round_trip(tmp_path):
    _, out = run_json(tmp_path, "t.json", "simulate", "--kappa", "3", "--steps", "200", "--dt", "1e-3")
    tr = io.load_traces(str(out))[0]
    again = tmp_path / "again.json"
    io.atomic_write(str(again), io.dumps(io.trace_doc(tr, dt=1e-3, seed=0)))
    back = io.load_traces(str(again))[0]
    np.testing.assert_array_equal(back.points, tr.points)
    np.testing.assert_array_equal(back.capacity_times, tr.capacity_times)


@pytest.mark.parametrize("doc,pointer", [
    ({"schema": "slecone.trace/1", "capacity_times": [0, 1], "points": [[0, 0], "x"]}, "/points/1"),
    ({"schema": "slecone.trace/1", "points": [[0, 0]]}, "/capacity_times"),
    ({"schema": "nope"}, "/schema"),
])
def test_malformed_input_exit_4_with_pointer(tmp_path, capsys, doc, pointer):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["dim", "--input", str(bad)]) == 4
    assert pointer in capsys.readouterr().err


def test_missing_file_exit_4(tmp_path, capsys):
    assert main(["render", "--input", str(tmp_path / "none.json")]) == 4
    capsys.readouterr()


def test_lightcone_equal_angles(tmp_path):
    doc, _ = run_json(tmp_path, "l.json", "lightcone", "--kappa", "2", "--theta1", "0.4", "--theta2", "0.4",
                      "--steps", "200", "--dt", "1e-3", "--n-switches", "2")
    assert len(doc["segments"]) == 1


def test_compare_self(tmp_path):
    _, ens = run_json(tmp_path, "e.json", "simulate", "--kappa", "3", "--steps", "300", "--dt", "1e-3",
                      "--ensemble", "6")
    doc, _ = run_json(tmp_path, "r.json", "compare", str(ens), str(ens))
    assert all(v == 0 for v in doc["statistics"].values())
    assert doc["verdict"] == "pass"


def test_render_empty_trace(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"schema": "slecone.trace/1", "capacity_times": [], "points": []}))
    out = tmp_path / "e.svg"
    assert main(["render", "--input", str(empty), "--out", str(out)]) == 0
    root = ET.fromstring(out.read_text())
    assert root.tag.endswith("svg") and root.get("version") == "1.1"


def test_render_lightcone_marks_pockets(tmp_path):
    _, lc = run_json(tmp_path, "l.json", "lightcone", "--kappa", "3", "--rho", "-2.5", "--route", "direct",
                     "--steps", "5000", "--dt", "2e-4", "--seed", "1")
    out = tmp_path / "l.svg"
    assert main(["render", "--input", str(lc), "--out", str(out)]) == 0
    root = ET.fromstring(out.read_text())
    assert any(el.tag.endswith("polyline") for el in root.iter())


def test_dim_csv(tmp_path):
    _, tr = run_json(tmp_path, "t.json", "simulate", "--kappa", "2", "--steps", "2000", "--dt", "1e-3")
    csv = tmp_path / "d.csv"
    doc, _ = run_json(tmp_path, "d.json", "dim", "--input", str(tr), "--csv", str(csv))
    rows = csv.read_text().strip().splitlines()
    assert len(rows) == 1 + len(doc["scales_used"])


@pytest.mark.slow
def test_simulate_then_dim_sle2(tmp_path):
    vals = []
    for seed in range(3):
        _, tr = run_json(tmp_path, f"t{seed}.json", "simulate", "--kappa", "2", "--steps", "100000",
                         "--dt", "1e-5", "--seed", str(seed))
        doc, _ = run_json(tmp_path, f"d{seed}.json", "dim", "--input", str(tr))
        vals.append(doc["value"])
    assert np.median(vals) == pytest.approx(1.25, abs=0.1)


@pytest.mark.parametrize("argv", [
    ["classify", "--kappa", "3", "--rho", "-2.2"],
    ["simulate", "--kappa", "3", "--rho", "-2.5", "--steps", "400", "--dt", "1e-3", "--seed", "5"],
    ["lightcone", "--kappa", "3", "--rho", "-2.5", "--steps", "300", "--dt", "1e-3", "--n-switches", "1"],
])
def test_rerun_reproduces_bytes(tmp_path, argv):
    _, out = run_json(tmp_path, "o.json", *argv)
    again = tmp_path / "again.json"
    assert main(["rerun", io.manifest_path(str(out)), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_rerun_rejects_bad_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"schema": "slecone.manifest/1", "command": "explode", "parameters": {}, "seed": 0,
                             "toolkit_version": "0", "timestamp": ""}))
    assert main(["rerun", str(m), "--out", str(tmp_path / "x")]) == 4
    assert "/command" in capsys.readouterr().err
