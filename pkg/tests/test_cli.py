import csv
import io
import json

import jsonschema
import pytest

from bmlearn.cli import main
from bmlearn.generators import generate
from bmlearn.io import save_class
from bmlearn.schemas import BY_COMMAND, CSV_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, command, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    data = json.loads(out)
    jsonschema.validate(data, BY_COMMAND[command])
    return data


def test_sqdim_parity(capsys):
    data = run_json(capsys, "sqdim", "sqdim", "--class", "parity:3")
    assert data["dim"] == 8 and len(data["witness"]) == 8


def test_sqdim_greedy_and_mu(capsys):
    data = run_json(capsys, "sqdim", "sqdim", "--class", "threshold:8", "--mode", "greedy")
    assert data["dim"] >= 1
    data = run_json(capsys, "sqdim", "sqdim", "--class", "threshold:8", "--mu", "2", "--restarts", "2")
    assert data["dim"] >= 1


def test_ball(capsys):
    data = run_json(capsys, "ball", "ball", "--class", "threshold:6", "--mu", "3", "--restarts", "2")
    assert data["mu"] == 3.0


def test_boost(capsys):
    data = run_json(capsys, "boost", "--seed", "1", "boost", "--class", "threshold:16", "--eps", "0.1",
                    "--trials", "2")
    assert len(data["trials"]) == 2


def test_sqboost_exact_and_sampling(capsys):
    data = run_json(capsys, "sqboost", "sqboost", "--class", "threshold:8", "--eps", "0.1", "--d", "2")
    assert data["trials"][0]["final_loss"] <= 0.1
    data = run_json(capsys, "sqboost", "sqboost", "--class", "threshold:8", "--eps", "0.1", "--d", "2",
                    "--oracle", "sampling", "--fail-prob", "0.01")
    assert len(data["trials"]) == 1


@pytest.mark.parametrize("kind", ["pac", "sq"])
def test_reduce_transfer(capsys, kind):
    data = run_json(capsys, "reduce", "reduce", kind, "--class", "threshold:8", "--Q", "perturb:4:0",
                    "--eps", "0.25", "--target", "3")
    assert data["success"]


def test_reduce_properify(capsys):
    data = run_json(capsys, "reduce", "reduce", "properify", "--class", "threshold:8", "--eps", "0.1",
                    "--flips", "0")
    # the first member passing the agreement test may be a neighbour of the target
    assert data["success"] and data["loss"] <= 3 * 0.1


def test_reduce_identify(capsys, tmp_path):
    cls, _ = generate("parity:3")
    h = cls[5].tolist()
    h[0] = -h[0]
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"concepts": cls.matrix.tolist(), "hypothesis": h}))
    data = run_json(capsys, "reduce", "reduce", "identify", "--witness", str(path))
    assert data["index"] == 5 and data["output_hypothesis"] == cls[5].tolist()


def test_reduce_identify_bad_witness_is_usage_error(capsys, tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"concepts": [[1, 1, -1, -1], [1, -1, 1, -1]], "hypothesis": [1, 1, 1, 1]}))
    code, _, err = run(capsys, "reduce", "identify", "--witness", str(path))
    assert code == 2 and "error" in err


@pytest.mark.parametrize("learner", ["index_advance", "enumeration", "store_all"])
def test_stream(capsys, tmp_path, learner):
    trace = tmp_path / "t.jsonl"
    data = run_json(capsys, "stream", "stream", "--class", "threshold:8", "--learner", learner,
                    "--m", "300", "--trace", str(trace))
    assert data["learner"].startswith(learner)
    assert data["bits_max_observed"] <= data["bits_declared"]
    for line in trace.read_text().splitlines():
        json.loads(line)


def test_class_file_input(capsys, tmp_path):
    cls, P = generate("threshold:5")
    path = tmp_path / "c.txt"
    save_class(path, cls, P)
    data = run_json(capsys, "sqdim", "sqdim", "--class", str(path))
    assert data["dim"] >= 1


@pytest.mark.parametrize("argv", [
    ["sqdim", "--class", "threshold:8"],
    ["stream", "--class", "threshold:8", "--m", "50"],
    ["reduce", "properify", "--class", "threshold:8", "--eps", "0.1"],
    ["boost", "--class", "threshold:8", "--eps", "0.1"],
])
def test_csv_columns_are_stable(capsys, tmp_path, argv):
    out = tmp_path / "o.csv"
    code = main(["--format", "csv", "--out", str(out)] + argv)
    capsys.readouterr()
    assert code in (0, 1)
    header = next(csv.reader(io.StringIO(out.read_text())))
    assert header == CSV_COLUMNS[argv[0]]


@pytest.mark.parametrize("argv", [
    [],
    ["sqdim"],
    ["sqdim", "--class", "nosuchfile.txt"],
    ["sqdim", "--class", "parity:99"],
    ["boost", "--class", "threshold:4"],
    ["stream", "--class", "threshold:4", "--target", "99"],
    ["sqdim", "--class", "threshold:4", "--dist", "missing.json"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_bench_smoke(capsys):
    code, out, err = run(capsys, "bench", "--suite", "smoke")
    data = json.loads(out)
    jsonschema.validate(data, BY_COMMAND["bench"])
    assert code == 0 and data["passed"]
    assert err.count("PASS") == len(data["criteria"])
