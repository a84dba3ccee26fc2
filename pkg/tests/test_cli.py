import json

import numpy as np
import pytest

from cfcert.cli import main
from cfcert.models import load_model


@pytest.fixture
def example_model_file(tmp_path):
    doc = {
        "model_type": "logistic",
        "input_dim": 2,
        "num_classes": 2,
        "layers": [{"weights": [[-1.0, 1.0]], "bias": None}],
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    return path


def _inputs_file(tmp_path, rows, name="inputs.json", targets=None):
    doc = {"inputs": rows}
    if targets is not None:
        doc["targets"] = targets
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_train_writes_model_and_manifest(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(
        [
            "train",
            "--synth",
            "moons:200",
            "--arch",
            "4",
            "--epochs",
            "60",
            "--seed",
            "3",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["train_accuracy"] > 0.8
    assert (out / "model.json").exists() and (out / "manifest.json").exists()
    load_model(out / "model.json")


def test_train_missing_dataset_fails(tmp_path, capsys):
    rc = main(["train", "--dataset", "nope.csv", "--schema", "nope.json", "--seed", "1", "--out", str(tmp_path / "x")])
    assert rc != 0
    assert "error" in capsys.readouterr().err


def test_train_same_seed_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["train", "--synth", "moons:150", "--epochs", "40", "--seed", "9", "--out", str(out)])
        outs.append((out / "model.json").read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_verify_worked_example_exit_codes(tmp_path, example_model_file, capsys):
    good = _inputs_file(tmp_path, [[0.7, 0.86]], "good.json")
    bad = _inputs_file(tmp_path, [[0.7, 0.7]], "bad.json")
    rc = main(["verify", "--model", str(example_model_file), "--delta", "0.1", "--ces", str(good)])
    lines = capsys.readouterr().out.strip().splitlines()
    assert rc == 0 and json.loads(lines[0])["robust"] is True
    rc = main(["verify", "--model", str(example_model_file), "--delta", "0.1", "--ces", str(bad)])
    assert rc == 1
    assert json.loads(capsys.readouterr().out.strip())["robust"] is False


def test_verify_delta_zero_valid_ce_robust(tmp_path, example_model_file, capsys):
    ces = _inputs_file(tmp_path, [[0.2, 0.9]])
    rc = main(["verify", "--model", str(example_model_file), "--delta", "0.0", "--ces", str(ces)])
    capsys.readouterr()
    assert rc == 0


def test_verify_soundness_flag(tmp_path, example_model_file, capsys):
    ces = _inputs_file(tmp_path, [[0.7, 0.86]], "c.json")
    orig = _inputs_file(tmp_path, [[0.7, 0.5]], "x.json")
    rc = main(
        [
            "verify",
            "--model",
            str(example_model_file),
            "--delta",
            "0.1",
            "--ces",
            str(ces),
            "--check-soundness",
            "--input",
            str(orig),
        ]
    )
    out = json.loads(capsys.readouterr().out.strip())
    assert rc == 0 and out["strictly_robust"] is True


def test_explain_rnce_delta_zero_matches_nnce(tmp_path, example_model_file, capsys):
    inputs = _inputs_file(tmp_path, [[0.7, 0.5], [0.9, 0.2]])
    common = ["--model", str(example_model_file), "--synth", "moons:200", "--inputs", str(inputs), "--seed", "0"]
    rc = main(["explain", "--method", "nnce", *common])
    nnce_out = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
    assert rc == 0
    rc = main(["explain", "--method", "rnce", "--delta", "0.0", *common])
    rnce_out = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
    assert rc == 0
    for a, b in zip(nnce_out, rnce_out):
        assert a["x_prime"] == b["x_prime"]


def test_explain_mce_r_passes_verify(tmp_path, example_model_file, capsys):
    inputs = _inputs_file(tmp_path, [[0.7, 0.5]])
    out_path = tmp_path / "records.jsonl"
    rc = main(
        [
            "explain",
            "--method",
            "mce-r",
            "--model",
            str(example_model_file),
            "--inputs",
            str(inputs),
            "--delta",
            "0.05",
            "--seed",
            "0",
            "--out",
            str(out_path),
        ]
    )
    assert rc == 0
    record = json.loads(out_path.read_text().strip())
    assert record["robust"] is True
    ces = _inputs_file(tmp_path, [record["x_prime"]], "from_explain.json")
    rc = main(["verify", "--model", str(example_model_file), "--delta", "0.05", "--ces", str(ces)])
    capsys.readouterr()
    assert rc == 0


def test_explain_unknown_method_usage_error(tmp_path, example_model_file):
    inputs = _inputs_file(tmp_path, [[0.7, 0.5]])
    with pytest.raises(SystemExit) as exc:
        main(
            [
                "explain",
                "--method",
                "wizard",
                "--model",
                str(example_model_file),
                "--inputs",
                str(inputs),
            ]
        )
    assert exc.value.code == 2


def test_estimate_delta_incremental_cli(tmp_path, capsys):
    rc = main(
        [
            "estimate-delta",
            "--strategy",
            "incremental",
            "--synth",
            "moons:200",
            "--epochs",
            "40",
            "--replicas",
            "2",
            "--seed",
            "4",
        ]
    )
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["strategy"] == "incremental" and report["delta_inc"] > 0


def test_benchmark_smoke_and_outputs(tmp_path, capsys):
    out = tmp_path / "bench"
    rc = main(
        [
            "benchmark",
            "--synth",
            "moons:200",
            "--methods",
            "nnce,rnce-ff",
            "--deltas",
            "0.02",
            "--epochs",
            "50",
            "--n-test",
            "5",
            "--n-seeds",
            "2",
            "--seed",
            "5",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    for name in ("report.csv", "report.json", "timing.csv", "manifest.json"):
        assert (out / name).exists()
    header = (out / "report.csv").read_text().splitlines()[0]
    for col in ("method", "vr_mean", "l1_mean", "lof_mean", "v_delta_0.02_mean"):
        assert col in header
