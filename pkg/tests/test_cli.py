import json
import os

import pytest
from click.testing import CliRunner

from gsda.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny dataset + trained model shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    data_dir = str(root / "data")
    run_dir = str(root / "run")
    r = runner.invoke(main, [
        "--seed", "0", "--out-dir", data_dir, "gen-data",
        "--per-class", "6", "--n-points", "48",
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "--seed", "0", "--out-dir", run_dir, "train",
        "--data", os.path.join(data_dir, "manifest.json"),
        "--epochs", "50", "--lr", "3e-3",
        "--widths", "24,32", "--head-widths", "24",
    ])
    assert r.exit_code == 0, r.output
    return {
        "runner": runner,
        "root": root,
        "manifest": os.path.join(data_dir, "manifest.json"),
        "model": os.path.join(run_dir, "model.gsm"),
        "cloud": os.path.join(data_dir, "clouds", "sphere_000.xyz"),
    }


def test_gen_data_wrote_manifest_and_clouds(workspace):
    with open(workspace["manifest"]) as fh:
        manifest = json.load(fh)
    assert len(manifest["entries"]) == 48
    base = os.path.dirname(workspace["manifest"])
    for entry in manifest["entries"][:5]:
        assert os.path.exists(os.path.join(base, entry["path"]))


def test_train_artifacts(workspace):
    run_dir = os.path.dirname(workspace["model"])
    assert os.path.exists(workspace["model"])
    assert os.path.exists(os.path.join(run_dir, "train_history.csv"))
    with open(os.path.join(run_dir, "train_history.svg")) as fh:
        svg = fh.read()
    assert svg.startswith("<svg") and "polyline" in svg


def test_classify_outputs_label(workspace):
    r = workspace["runner"].invoke(main, [
        "classify", "--model", workspace["model"], workspace["cloud"],
    ])
    assert r.exit_code == 0, r.output
    assert "class" in r.output


def test_classify_with_defense(workspace):
    r = workspace["runner"].invoke(main, [
        "classify", "--model", workspace["model"],
        "--defense", "srs", "--srs-drop", "8", workspace["cloud"],
    ])
    assert r.exit_code == 0, r.output
    assert "40 points used" in r.output


def test_spectrum_files(workspace, tmp_path):
    out = str(tmp_path / "spec")
    r = workspace["runner"].invoke(main, [
        "--out-dir", out, "spectrum", "--shape", "torus",
        "--n-points", "96", "--remove-band", "high",
    ])
    assert r.exit_code == 0, r.output
    assert os.path.exists(os.path.join(out, "torus_spectrum.csv"))
    assert os.path.exists(os.path.join(out, "torus_spectrum.svg"))
    assert os.path.exists(os.path.join(out, "torus_recon.xyz"))
    lines = open(os.path.join(out, "torus_spectrum.csv")).read().splitlines()
    assert lines[0].split(",")[0] == "index"
    assert len(lines) == 97


def test_spectrum_input_xor_shape(workspace):
    r = workspace["runner"].invoke(main, ["spectrum"])
    assert r.exit_code == 2
    r = workspace["runner"].invoke(main, [
        "spectrum", "--shape", "cube", "--input", workspace["cloud"],
    ])
    assert r.exit_code == 2


def test_attack_report_and_defend_eval(workspace, tmp_path):
    out = str(tmp_path / "atk")
    r = workspace["runner"].invoke(main, [
        "--seed", "0", "--jobs", "1", "--out-dir", out, "--format", "csv",
        "attack", "--model", workspace["model"], "--data", workspace["manifest"],
        "--count", "2", "--iterations", "40", "--bs-steps", "2",
    ])
    assert r.exit_code == 0, r.output
    report_path = os.path.join(out, "attack_report.json")
    with open(report_path) as fh:
        report = json.load(fh)
    assert report["kind"] == "attack"
    assert len(report["rows"]) == 2
    assert os.path.exists(os.path.join(out, "attack_report.csv"))
    assert os.path.exists(os.path.join(out, "loss_trace.svg"))
    for row in report["rows"]:
        assert os.path.exists(os.path.join(out, row["adv_path"]))

    defend_out = str(tmp_path / "def")
    r = workspace["runner"].invoke(main, [
        "--out-dir", defend_out, "defend-eval",
        "--report", report_path, "--model", workspace["model"],
        "--defense", "sor", "--sor-drop-ratio", "0.05,0.1",
    ])
    assert r.exit_code == 0, r.output
    with open(os.path.join(defend_out, "defend_report.json")) as fh:
        defend = json.load(fh)
    assert len(defend["rows"]) == 2
    for row in defend["rows"]:
        assert 0.0 <= row["attack_success_rate"] <= 1.0
        assert row["undefended_success_rate"] >= 0.0

    xfer_out = str(tmp_path / "xfer")
    r = workspace["runner"].invoke(main, [
        "--out-dir", xfer_out, "transfer",
        "--run", report_path, "--models", workspace["model"],
    ])
    assert r.exit_code == 0, r.output
    with open(os.path.join(xfer_out, "transfer_report.json")) as fh:
        xfer = json.load(fh)
    assert len(xfer["rows"]) == 1


def test_attack_band_mask_argument(workspace, tmp_path):
    out = str(tmp_path / "atk_mask")
    r = workspace["runner"].invoke(main, [
        "--jobs", "1", "--out-dir", out,
        "attack", "--model", workspace["model"], "--data", workspace["manifest"],
        "--count", "1", "--iterations", "20", "--bs-steps", "2",
        "--band-mask", "nonsense",
    ])
    assert r.exit_code == 2
    r = workspace["runner"].invoke(main, [
        "--jobs", "1", "--out-dir", out,
        "attack", "--model", workspace["model"], "--data", workspace["manifest"],
        "--count", "1", "--iterations", "20", "--bs-steps", "2",
        "--band-mask", "0:12",
    ])
    assert r.exit_code == 0, r.output


def test_exit_code_2_on_bad_input(workspace, tmp_path):
    bad = tmp_path / "bad.xyz"
    bad.write_text("1 2 oops\n")
    r = workspace["runner"].invoke(main, [
        "classify", "--model", workspace["model"], str(bad),
    ])
    assert r.exit_code == 2
    assert "error" in r.output


def test_exit_code_3_on_corrupt_model(workspace, tmp_path):
    # truncated weight payload parses the header but fails mid-read;
    # a corrupt artifact is a parse failure -> exit 2
    with open(workspace["model"], "rb") as fh:
        blob = fh.read()
    bad = tmp_path / "bad.gsm"
    bad.write_bytes(blob[:-9])
    r = workspace["runner"].invoke(main, [
        "classify", "--model", str(bad), workspace["cloud"],
    ])
    assert r.exit_code == 2
