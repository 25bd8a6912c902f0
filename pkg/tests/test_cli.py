import json

from turbulent.cli import dumps, main

def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err

def test_moduli_report(capsys):
    code, out, _ = run(capsys, "moduli", "report", "--d", "8")
    assert code == 0
    doc = json.loads(out)
    assert doc["obstructed"] is True and doc["margin"] == 1
    assert list(doc) == ["d", "dim_moduli", "dim_quadruples_bound", "obstructed", "margin"]

def test_moduli_rank(capsys):
    code, out, _ = run(capsys, "moduli", "rank", "--d", "8", "--seed", "4")
    assert code == 0 and json.loads(out)["rank"] == 1

def test_foliation_degree(capsys):
    code, out, _ = run(capsys, "foliation", "degree", "--d", "2", "--seed", "1", "--z", "0.1,0.1")
    assert code == 0
    assert json.loads(out) == {"degree": 2}

def test_build_then_verify_round_trip(capsys, tmp_path):
    path = tmp_path / "pair.json"
    code, out, _ = run(capsys, "form", "build", "--d", "3", "--seed", "2", "--out", str(path))
    assert code == 0
    assert json.loads(path.read_text()) == json.loads(out)
    code, out, _ = run(capsys, "form", "verify", str(path))
    assert code == 0 and json.loads(out)["valid"] is True

def test_verify_reports_abel_violation(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"tau": [0, 1], "x": [[0.1, 0], [0.7, 0]], "y": [[0.3, 0], [0.51, 0]]}))
    code, out, _ = run(capsys, "form", "verify", str(path))
    assert code == 2
    doc = json.loads(out)
    assert doc["abel"] is False and abs(doc["abel_defect"] - 0.01) < 1e-12

def test_input_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "form", "verify", str(bad))[0] == 1
    assert run(capsys, "form", "verify", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "form", "verify")[0] == 1
    assert run(capsys, "nonsense")[0] == 1
    code, _, err = run(capsys, "foliation", "leaves", "--d", "2", "--beta", "0")
    assert code == 1 and "beta_coeff must be nonzero" in err

def test_scenario_needs_exactly_one_source(capsys, tmp_path):
    path = tmp_path / "both.json"
    path.write_text(json.dumps({"tau": [0, 1], "d": 2, "x": [[0.1, 0], [0.7, 0]], "y": [[0.3, 0], [0.5, 0]]}))
    assert run(capsys, "form", "count", str(path))[0] == 1
    sampled = tmp_path / "sampled.json"
    sampled.write_text(json.dumps({"tau": [0, 1], "d": 2, "seed": 5}))
    assert run(capsys, "form", "count", str(sampled), "--d", "2")[0] == 1
    code, out, _ = run(capsys, "form", "count", str(sampled))
    assert code == 0 and json.loads(out)["zeros"] == 2

def test_residues_sum(capsys):
    code, out, _ = run(capsys, "form", "residues", "--d", "5", "--seed", "3")
    assert code == 0 and json.loads(out)["sum_abs"] < 1e-8

def test_elliptic_check(capsys):
    code, out, _ = run(capsys, "elliptic", "check", "--tau", "0,1", "--tau", "0.3,1.1", "--n", "20")
    assert code == 0 and json.loads(out)["pass"] is True

def test_default_tol_environment(capsys, tmp_path, monkeypatch):
    path = tmp_path / "near.json"
    path.write_text(json.dumps({"tau": [0, 1], "x": [[0.1, 0], [0.7, 0]], "y": [[0.3, 0], [0.5 + 1e-7, 0]]}))
    assert run(capsys, "form", "verify", str(path))[0] == 2
    monkeypatch.setenv("TURBULENT_DEFAULT_TOL", "1e-6")
    code, out, _ = run(capsys, "form", "verify", str(path))
    doc = json.loads(out)
    assert code == 0 and doc["tol"] == 1e-6 and doc["abel"] is True
    monkeypatch.setenv("TURBULENT_DEFAULT_TOL", "abc")
    assert run(capsys, "form", "verify", str(path))[0] == 1

def test_field_and_leaves(capsys):
    code, out, _ = run(capsys, "foliation", "field", "--d", "2", "--c", "0.123,0.456", "--x", "0.3,0.3")
    doc = json.loads(out)
    assert code == 0 and doc["tangency"] == "transverse" and doc["kernel_residual"] < 1e-12
    code, out, _ = run(capsys, "foliation", "leaves", "--d", "2", "--seed", "7")
    assert code == 0 and len(json.loads(out)["compact_leaves"]) == 2

def test_trace_csv_and_summary(capsys, tmp_path):
    code, out, _ = run(capsys, "foliation", "trace", "--d", "2", "--c", "0.123,0.456", "--x", "0.3,0.3", "--horizon", "0.5")
    assert code == 0 and out.splitlines()[0] == "t,c_a,c_b,x_a,x_b,chart,drift"
    dest = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "foliation", "trace", "--d", "2", "--c", "0.123,0.456", "--x", "0.3,0.3",
                       "--horizon", "0.5", "--near", "1.0", "--out", str(dest))
    doc = json.loads(out)
    assert code == 0 and doc["drift"] < 1e-6 and doc["approaches_all_compact_leaves"] is True
    assert dest.read_text().startswith("t,c_a,c_b")

def test_bundle_commands(capsys, tmp_path):
    path = tmp_path / "bundle.json"
    path.write_text(json.dumps({"tau": [0, 1], "connection": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]], "section": {"name": "wp"}}))
    code, out, _ = run(capsys, "bundle", "transport", str(path), "--path", "0,0;0.7,-0.4", "--w0", "0.5,0.5")
    w = json.loads(out)["w"]
    assert code == 0 and abs(complex(*w) - (-0.2 + 0.9j)) < 1e-9
    code, out, _ = run(capsys, "bundle", "sff", str(path), "--z", "0.5,0")
    doc = json.loads(out)
    assert code == 0 and doc["vanishing_count"] == 4
    code, out, _ = run(capsys, "bundle", "develop", str(path), "--path", "0.1,0.1;0.3,0.45")
    assert code == 0 and len(json.loads(out)["gamma"]) == 2

def test_output_is_deterministic(capsys):
    first = run(capsys, "form", "residues", "--d", "3", "--seed", "1")[1]
    second = run(capsys, "form", "residues", "--d", "3", "--seed", "1")[1]
    assert first == second

def test_dumps_format():
    assert dumps({"a": 0.1, "b": 1 + 2j, "c": float("inf"), "d": [1, True]}) == '{"a": 0.10000000000000001, "b": [1, 2], "c": "inf", "d": [1, true]}'
