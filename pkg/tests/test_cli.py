import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from jacobound import ActivationKind, Layer, Network, save_network
from jacobound.cli import main, parse_grid
from jacobound.fixtures import fixture_path, trained_fixture
from jacobound.random_nets import random_network

MODEL = str(fixture_path("fixture_model.json"))
INPUTS = str(fixture_path("fixture_inputs.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def center(tmp_path):
    _, inputs = trained_fixture()
    path = tmp_path / "center.json"
    path.write_text(json.dumps(inputs[2][0].tolist()))
    return str(path)


def test_lipschitz_grid_all_methods(capsys, center):
    rep = run_json(capsys, "lipschitz", "--model", MODEL, "--center", center, "--radius-grid", "0.001,1,10,log", "--samples", "200")
    assert rep["schema_version"] == 1 and rep["p"] == "inf"
    rows = rep["rows"]
    assert [r["radius"] for r in rows] == pytest.approx(np.geomspace(1e-3, 1, 10).tolist())
    rj = [r["recurjac-b"] for r in rows]
    assert all(b >= a for a, b in zip(rj, rj[1:]))
    for r in rows:
        assert r["sampled"] <= r["recurjac-b"] + 1e-9 <= r["fastlip"] + 1e-9 and r["fastlip"] <= r["naive"]
    assert len({r["naive"] for r in rows}) == 1


def test_lipschitz_csv(capsys, center):
    code, out, _ = run(capsys, "lipschitz", "--model", MODEL, "--center", center, "--radius", "0.05", "--method", "fastlip,naive", "--format", "csv")
    assert code == 0
    table = list(csv.DictReader(io.StringIO(out)))
    assert list(table[0]) == ["input", "radius", "fastlip", "naive"] and len(table) == 1
    assert float(table[0]["fastlip"]) <= float(table[0]["naive"])


def test_output_is_deterministic(capsys, tmp_path):
    argv = ["certify", "--model", MODEL, "--inputs", INPUTS, "--seed", "5", "--intervals", "5"]
    first = run(capsys, *argv, "--out", str(tmp_path / "a.json"))
    second = run(capsys, *argv, "--out", str(tmp_path / "b.json"), "--threads", "3")
    assert first[0] == second[0] == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_certify_report(capsys):
    rep = run_json(capsys, "certify", "--model", MODEL, "--inputs", INPUTS, "--intervals", "5")
    assert len(rep["rows"]) == 30 and set(rep["mean"]) == {"runner-up", "random", "least-likely"}
    for mode, mean in rep["mean"].items():
        radii = [r["radius"] for r in rep["rows"] if r["mode"] == mode]
        assert mean == pytest.approx(np.mean(radii)) and all(r > 0 for r in radii)
    runner = {r["input"]: r["radius"] for r in rep["rows"] if r["mode"] == "runner-up"}
    least = {r["input"]: r["radius"] for r in rep["rows"] if r["mode"] == "least-likely"}
    assert all(runner[i] <= least[i] + 0.05 for i in runner)


def labelled(tmp_path, items):
    path = tmp_path / "inputs.json"
    path.write_text(json.dumps([{"x": list(x), "label": lab} for x, lab in items]))
    return str(path)


def two_class(tmp_path, margin):
    ident = ActivationKind("leaky_relu", 1.0)
    net = Network([Layer([[1.0]], [0.0], ident), Layer([[2.0], [0.0]], [margin, 0.0])])
    path = tmp_path / "two.json"
    save_network(net, path)
    return str(path)


def test_two_class_runner_up_equals_untargeted(capsys, tmp_path):
    model = two_class(tmp_path, 1.0)
    inputs = labelled(tmp_path, [([0.0], 0)])
    rep = run_json(capsys, "certify", "--model", model, "--inputs", inputs)
    by_mode = {r["mode"]: r for r in rep["rows"]}
    assert {r["target"] for r in rep["rows"]} == {1}
    assert by_mode["runner-up"]["radius"] == by_mode["random"]["radius"] == by_mode["least-likely"]["radius"]
    assert by_mode["runner-up"]["radius"] == pytest.approx(0.5, abs=1e-6)


def test_boundary_input_certifies_zero(capsys, tmp_path):
    rep = run_json(capsys, "certify", "--model", two_class(tmp_path, 0.0), "--inputs", labelled(tmp_path, [([0.0], 0)]))
    assert all(r["radius"] == 0.0 and r["margin"] == 0.0 for r in rep["rows"])


def test_misclassified_inputs(capsys, tmp_path):
    model = two_class(tmp_path, 1.0)
    inputs = labelled(tmp_path, [([0.0], 1), ([0.0], 0)])
    rep = run_json(capsys, "certify", "--model", model, "--inputs", inputs, "--target-modes", "runner-up")
    assert rep["rows"][0]["skipped"] == "misclassified" and rep["rows"][0]["radius"] is None
    assert rep["mean"]["runner-up"] == pytest.approx(0.5, abs=1e-6)
    code, _, err = run(capsys, "certify", "--model", model, "--inputs", inputs, "--strict")
    assert code == 4 and "refused" in err


def test_landscape(capsys, tmp_path):
    net = Network([Layer([[1.0], [1.0]], [0.0, 0.0], ActivationKind("leaky_relu", 0.3)), Layer([[1.0, 1.0]], [0.0])])
    save_network(net, tmp_path / "leaky.json")
    (tmp_path / "c.json").write_text("[0.5]")
    rep = run_json(capsys, "landscape", "--model", str(tmp_path / "leaky.json"), "--center", str(tmp_path / "c.json"))
    assert rep["rows"][0]["radius"] == "inf" and rep["mean"] == "inf"
    rep = run_json(capsys, "landscape", "--model", MODEL, "--inputs", INPUTS, "--index", "0", "--output-index", "2")
    row = rep["rows"][0]
    assert row["output"] == 2 and 0 < row["radius"] < 1 and row["sign"] in ("positive", "negative")


def test_jacobian_linear_and_levels(capsys, tmp_path, rng):
    ident = ActivationKind("leaky_relu", 1.0)
    W1, W2 = rng.standard_normal((3, 2)), rng.standard_normal((2, 3))
    save_network(Network([Layer(W1, np.zeros(3), ident), Layer(W2, np.zeros(2))]), tmp_path / "lin.json")
    (tmp_path / "c.json").write_text("[0.1, 0.2]")
    rep = run_json(capsys, "jacobian", "--model", str(tmp_path / "lin.json"), "--center", str(tmp_path / "c.json"), "--radius", "1", "--all-levels")
    top = rep["levels"][0]
    assert top["level"] == 1
    assert np.array(top["lower"]) == pytest.approx(W2 @ W1) and np.array(top["upper"]) == pytest.approx(W2 @ W1)
    assert [lv["level"] for lv in rep["levels"]] == [1, 2]
    assert np.array(rep["M"]) == pytest.approx(np.abs(W2 @ W1))
    assert len(rep["rows"]) == 2 * 2 + 2 * 3


def test_jacobian_matches_enumeration_at_depth_two(capsys, tmp_path):
    net = random_network([3, 6, 2], seed=4)
    save_network(net, tmp_path / "net.json")
    (tmp_path / "c.json").write_text("[0.1, -0.2, 0.3]")
    argv = ["--model", str(tmp_path / "net.json"), "--center", str(tmp_path / "c.json"), "--radius", "0.3"]
    jac = run_json(capsys, "jacobian", *argv)
    orc = run_json(capsys, "oracle", *argv, "--samples", "50")
    assert orc["rows"][0]["unstable"] >= 1
    assert np.array(jac["levels"][0]["lower"]) == pytest.approx(np.array(orc["rows"][0]["lower"]), abs=1e-9)
    assert np.array(jac["levels"][0]["upper"]) == pytest.approx(np.array(orc["rows"][0]["upper"]), abs=1e-9)


def test_oracle_over_cap(capsys):
    rep = run_json(capsys, "oracle", "--model", MODEL, "--inputs", INPUTS, "--index", "1", "--radius", "5", "--cap", "2", "--samples", "20")
    assert rep["rows"][0]["unstable"] is None and "cap" in rep["rows"][0]["note"]


@pytest.mark.parametrize(
    "argv",
    [
        ["lipschitz", "--model", MODEL, "--inputs", INPUTS, "--radius", "0.1", "--method", "crown"],
        ["lipschitz", "--model", MODEL, "--inputs", INPUTS],
        ["lipschitz", "--model", MODEL, "--inputs", INPUTS, "--radius", "-1"],
        ["lipschitz", "--model", MODEL, "--inputs", INPUTS, "--radius-grid", "1,0,3"],
        ["lipschitz", "--model", MODEL, "--inputs", INPUTS, "--radius", "0.1", "--index", "99"],
        ["lipschitz", "--model", MODEL, "--radius", "0.1"],
        ["lipschitz", "--model", MODEL, "--inputs", "/nonexistent.json", "--radius", "0.1"],
        ["certify", "--model", MODEL, "--inputs", INPUTS, "--target-modes", "worst"],
        ["jacobian", "--model", MODEL, "--inputs", INPUTS, "--radius", "0.1"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "config error" in err


def test_bad_flag_value_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["lipschitz", "--model", MODEL, "--p", "3"])
    assert exc.value.code == 2


def test_model_errors_exit_3(capsys, tmp_path):
    code, _, err = run(capsys, "lipschitz", "--model", str(tmp_path / "missing.json"), "--inputs", INPUTS, "--radius", "0.1")
    assert code == 3 and "model error" in err
    (tmp_path / "bad.json").write_text('{"layers": []}')
    assert run(capsys, "lipschitz", "--model", str(tmp_path / "bad.json"), "--inputs", INPUTS, "--radius", "0.1")[0] == 3


def test_wrong_input_dimension(capsys, tmp_path):
    (tmp_path / "c.json").write_text("[1, 2]")
    code, _, err = run(capsys, "lipschitz", "--model", MODEL, "--center", str(tmp_path / "c.json"), "--radius", "0.1")
    assert code == 2 and "dimension" in err


def test_parse_grid():
    assert parse_grid("0,1,3") == [0.0, 0.5, 1.0]
    assert parse_grid("1,100,3,log") == pytest.approx([1, 10, 100])
    assert parse_grid("0.2,0.2,1") == [0.2]


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "jacobound.cli", "lipschitz", "--model", MODEL, "--inputs", INPUTS, "--index", "0", "--radius", "0", "--method", "naive", "--format", "csv"],
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.splitlines()[0] == "input,radius,naive"
