import json
import math

import numpy as np
import pytest

from hqem.cli import main
from hqem.io import TABLE2_CSV, TABLE3_JSON, bundled_path, load_observations
from hqem.model import ModelParams

PARAMS = str(bundled_path(TABLE3_JSON))
DATA = str(bundled_path(TABLE2_CSV))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def zero_params(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(ModelParams.zero().to_dict()))
    return str(path)


def test_predict_table3(capsys):
    code, out, _ = run(capsys, "predict", "--params", PARAMS)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "word_class,cue,probe,probability"
    assert lines[65] == "word_class,cue,UF"
    assert len(lines) == 1 + 64 + 1 + 16
    wc, cue, probe, value = lines[1].split(",")
    assert (wc, cue, probe) == ("HFC", "L1", "L1")
    assert float(value) == pytest.approx(0.45, abs=0.01)
    assert len(value.split(".")[1]) == 6


def test_predict_zero(capsys, zero_params):
    _, out, _ = run(capsys, "predict", "--params", zero_params)
    rows = [line.split(",") for line in out.splitlines()[1:65]]
    for _, _, probe, value in rows:
        assert value == ("0.500000" if probe == "L123" else "0.250000")


def test_predict_missing_kappa(capsys, tmp_path):
    d = ModelParams.zero().to_dict()
    del d["kappa"]
    path = tmp_path / "p.json"
    path.write_text(json.dumps(d))
    code, out, err = run(capsys, "predict", "--params", str(path))
    assert code == 2 and "kappa" in err and out == ""


def test_predict_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "predict", "--params", str(tmp_path / "nope.json"))
    assert code == 2 and "not found" in err


def test_predict_out_file_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "predict", "--params", PARAMS, "--out", str(a))[0] == 0
    assert run(capsys, "predict", "--params", PARAMS, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".")] == []


def test_error_leaves_no_output_file(capsys, tmp_path):
    out = tmp_path / "o.csv"
    code, _, _ = run(capsys, "trace", "--params", PARAMS, "--class", "XXX", "--cue", "L1",
                     "--out", str(out))
    assert code == 2 and not out.exists()


def test_predict_roundtrip_as_observations(capsys, tmp_path):
    from hqem.fit import refine, rmse
    from hqem.io import load_params
    from hqem.model import predict_table
    _, out, _ = run(capsys, "predict", "--params", PARAMS)
    lines = out.splitlines()[:65]
    lines[0] = "word_class,cue,probe,proportion"
    obs = load_observations("\n".join(lines).encode())
    p = load_params(PARAMS)
    assert rmse(predict_table(p), obs) < 1e-6
    assert refine(obs, p, max_evaluations=200).rmse < 1e-6


def test_trace(capsys):
    code, out, _ = run(capsys, "trace", "--params", PARAMS, "--class", "HFC", "--cue", "L1",
                       "--steps", "100")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,p_L1,p_L2,p_L3,p_L123"
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    assert rows.shape == (200, 5)
    assert np.all(np.diff(rows[:, 0]) > 0)
    np.testing.assert_allclose(rows[0], [0, 0.25, 0.25, 0.25, 0.5], atol=1e-6)
    np.testing.assert_allclose(rows[-1, 1:], [0.45, 0.36, 0.36, 0.53], atol=0.01)
    assert rows[-1, 0] == pytest.approx(math.pi, abs=1e-6)


@pytest.mark.parametrize("argv", [("--class", "HFC", "--cue", "L7"), ("--class", "HFX", "--cue", "L1"),
                                  ("--class", "HFC", "--cue", "L1", "--steps", "1")])
def test_trace_errors(capsys, argv):
    assert run(capsys, "trace", "--params", PARAMS, *argv)[0] == 2


def test_uf_report(capsys):
    code, out, _ = run(capsys, "uf", "--params", PARAMS)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 17
    assert lines[0] == "word_class,cue,UF,verbatim_balance,gist_balance"
    for line in lines[1:]:
        uf, v, g = map(float, line.split(",")[2:])
        assert uf == pytest.approx(1 + v + g, abs=2e-6)
    assert float(lines[1].split(",")[2]) == pytest.approx(2.18, abs=0.02)


def test_demo_order(capsys, zero_params):
    code, out, _ = run(capsys, "demo-order", "--params", PARAMS, "--class", "HFC", "--cue", "L1",
                       "--first", "L1", "--second", "L2")
    assert code == 0
    assert abs(float(out.splitlines()[-1].split(",")[1])) > 1e-6
    _, out, _ = run(capsys, "demo-order", "--params", zero_params, "--class", "HFC", "--cue", "L1",
                    "--first", "L1", "--second", "L2")
    assert abs(float(out.splitlines()[-1].split(",")[1])) < 1e-12


@pytest.mark.parametrize("first,second", [("L1", "L1"), ("L123", "L1")])
def test_demo_order_errors(capsys, first, second):
    code, _, _ = run(capsys, "demo-order", "--params", PARAMS, "--class", "HFC", "--cue", "L1",
                     "--first", first, "--second", second)
    assert code == 2


def test_fit_bad_data(capsys, tmp_path):
    lines = open(DATA).read().splitlines()
    path = tmp_path / "short.csv"
    path.write_text("\n".join(lines[:-1]))
    code, _, err = run(capsys, "fit", "--data", str(path))
    assert code == 2 and "missing cell" in err


def test_fit_on_grid_synthetic(capsys, tmp_path):
    from hqem.io import format_observations
    from hqem.model import predict_table
    truth = ModelParams.from_vector([-1, 0, 1, 0, 1, -1, 0, 1, 0.5, math.pi / 2, math.pi / 2])
    path = tmp_path / "syn.csv"
    path.write_text(format_observations(predict_table(truth).probabilities))
    code, out, err = run(capsys, "fit", "--data", str(path), "--levels", "1", "--no-refine")
    assert code == 0
    result = json.loads(out)
    assert result["rmse"] < 1e-6  # limited by 6-decimal data
    assert result["evaluations"] == 3 ** 8
    assert "rmse" in err


def test_fit_from_start(capsys, tmp_path):
    out = tmp_path / "fit.json"
    code, _, err = run(capsys, "fit", "--data", DATA, "--start", PARAMS, "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["rmse"] <= 0.0553
