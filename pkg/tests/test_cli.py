import json

import pytest

from steerkit import cli


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def files(tmp_path, capsys):
    def make(name, *argv):
        path = str(tmp_path / name)
        assert cli.dispatch([*argv, "-o", path]) == 0
        capsys.readouterr()
        return path

    return make


def test_verify_thm2(capsys):
    code, doc = run(capsys, "verify-thm2")
    assert code == 0 and doc["verdict"] == "pass"
    assert doc["manifest"]["command"] == "verify-thm2"


def test_verify_thm2_failure_exit_code(capsys):
    code, doc = run(capsys, "verify-thm2", "--tol-check", "-1")
    assert code == 1 and doc["verdict"] != "pass"


def test_jm_thm2_pair_infeasible(files, capsys):
    meas = files("m.json", "make-meas", "--kind", "pauli", "--eta", str(2 ** -0.25))
    code, doc = run(capsys, "jm", "--meas", meas)
    assert code == 0 and doc["verdict"] == "infeasible"
    assert doc["sdp"]["certificate_value"] < 0
    assert len(doc["manifest"]["inputs"]) == 1


def test_steer_then_lhs(files, capsys):
    state = files("s.json", "make-state", "--kind", "max-entangled", "--d", "2")
    meas = files("m.json", "make-meas", "--eta", "0.5")
    ass = files("a.json", "steer", "--state", state, "--meas", meas)
    code, doc = run(capsys, "lhs", "--assemblage", ass)
    assert code == 0 and doc["verdict"] == "feasible"
    assert "lhs_model" in doc


def test_gms_commands(files, capsys):
    state = files("s.json", "make-state", "--kind", "ghz", "--n", "3")
    meas = files("m.json", "make-meas")
    one = files("a1.json", "steer", "--state", state, "--meas", meas)
    code, doc = run(capsys, "gms1", "--assemblage", one)
    assert code == 0 and doc["verdict"] == "certified-GMS" and doc["certificate_gap"] > 0
    two = files("a2.json", "steer", "--state", state, "--meas", meas, "--meas", meas)
    code, doc = run(capsys, "gms2", "--assemblage", two, "--corr", "outer")
    assert code == 0 and doc["verdict"] == "certified-GMS"
    # the inner formulation cannot decide here
    code, doc = run(capsys, "gms2", "--assemblage", two)
    assert code == 3 and doc["verdict"] == "inconclusive"


def test_gms1_merge(files, capsys):
    state = files("s.json", "make-state", "--kind", "ghz", "--n", "4")
    meas = files("m.json", "make-meas", "--eta", "0.5")
    ass = files("a.json", "steer", "--state", state, "--meas", meas)
    code, doc = run(capsys, "gms1", "--assemblage", ass)
    assert code == 2
    code, doc = run(capsys, "gms1", "--assemblage", ass, "--merge", "1,2")
    assert code == 0 and doc["verdict"] == "member"


def test_genjm_and_robustness(files, capsys):
    meas = files("m.json", "make-meas", "--eta", str(2 ** -0.25))
    code, doc = run(capsys, "genjm", "--meas-a", meas, "--meas-b", meas)
    assert code == 0 and doc["verdict"] == "feasible"
    sharp = files("x.json", "make-meas")
    code, doc = run(capsys, "robustness", "--target", "jm", "--meas", sharp, "--bisect-tol", "1e-3")
    assert code == 0 and abs(doc["eta_star"] - 2 ** -0.5) <= 1e-3


def test_extract_parent(files, capsys):
    state = files("s.json", "make-state", "--kind", "ghz")
    meas = files("m.json", "make-meas", "--kind", "random-qubit-pair", "--eta", "0.6", "--seed", "4")
    code, doc = run(capsys, "extract-parent", "--state", state, "--meas", meas)
    assert code == 0 and doc["verdict"] == "feasible"
    assert doc["reconstruction_error"] <= 1e-6


def test_batch_input(tmp_path, files, capsys):
    metas = [json.loads(open(files(f"m{i}.json", "make-meas", "--eta", str(eta))).read()) for i, eta in enumerate((0.5, 1.0))]
    batch = write(tmp_path, "batch.json", metas)
    for jobs in ("1", "2"):
        code, doc = run(capsys, "jm", "--meas", batch, "--jobs", jobs)
        assert code == 0
        assert [r["verdict"] for r in doc["results"]] == ["feasible", "infeasible"]


def test_invalid_input(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", {"dims": [2]})
    code, doc = run(capsys, "jm", "--meas", bad)
    assert code == 2 and doc["verdict"] == "error"
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json")
    assert run(capsys, "jm", "--meas", str(garbage))[0] == 2
    assert run(capsys, "jm", "--meas", str(tmp_path / "missing.json"))[0] == 2


def test_not_a_povm(tmp_path, capsys):
    doc = {"dims": [2], "elements": [[[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]], [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]]]}
    assert run(capsys, "jm", "--meas", write(tmp_path, "m.json", doc))[0] == 2


def test_usage_errors(capsys):
    assert cli.dispatch(["no-such-command"]) == 64
    assert cli.dispatch(["jm", "--tol", "abc"]) == 64
    assert cli.dispatch([]) == 64
    capsys.readouterr()


def test_unknown_solver(capsys):
    code, doc = run(capsys, "verify-thm2", "--solver", "nope")
    assert code == 2


def test_cvxpy_solver(files, capsys):
    meas = files("m.json", "make-meas", "--eta", "0.9")
    code, doc = run(capsys, "jm", "--meas", meas, "--solver", "cvxpy")
    assert code == 0 and doc["verdict"] == "infeasible"
    assert doc["manifest"]["solver"]["adapter"] == "cvxpy"


def test_steer_pipe_into_lhs(files, capsys, monkeypatch):
    import io as stdio

    state = files("s.json", "make-state", "--kind", "ghz", "--n", "3")
    meas = files("m.json", "make-meas", "--kind", "trivial", "--outcomes", "2", "--settings", "2")
    code, ass = run(capsys, "steer", "--state", state, "--meas", meas)
    assert code == 0
    monkeypatch.setattr("sys.stdin", stdio.TextIOWrapper(stdio.BytesIO(json.dumps(ass).encode())))
    code, doc = run(capsys, "lhs")
    assert code == 0 and doc["verdict"] == "feasible"


def test_verdicts_deterministic(files, capsys):
    state = files("s.json", "make-state", "--kind", "w")
    meas = files("m.json", "make-meas", "--kind", "random-qubit-pair", "--eta", "0.9", "--seed", "1")
    ass = files("a.json", "steer", "--state", state, "--meas", meas)
    docs = []
    for _ in range(2):
        code, doc = run(capsys, "gms1", "--assemblage", ass)
        doc["manifest"].pop("wall_time")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_unsupported_outer_scenario(files, capsys):
    state = files("s.json", "make-state", "--kind", "ghz")
    m3 = files("m3.json", "make-meas", "--axes", "XYZ")
    ass = files("a.json", "steer", "--state", state, "--meas", m3, "--meas", m3)
    code, doc = run(capsys, "gms2", "--assemblage", ass, "--corr", "outer")
    assert code == 2 and "2-setting" in doc["error"]
