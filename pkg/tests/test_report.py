import json

import numpy as np
import pytest

from gsda.errors import ValidationError
from gsda.report import EvalReport, attack_aggregates, attack_row, build_report


def _rows():
    return [
        {"instance_id": "a", "success": True, "d_c": 0.1, "d_norm": 1.0,
         "d_h": 0.2, "e_delta": 1.0, "wall_time_ms": 12.0},
        {"instance_id": "b", "success": False, "d_c": 0.5, "d_norm": 2.0,
         "d_h": 0.9, "e_delta": 2.0, "wall_time_ms": 40.0},
        {"instance_id": "c", "success": True, "d_c": 0.3, "d_norm": 3.0,
         "d_h": 0.4, "e_delta": 3.0, "wall_time_ms": 7.0},
    ]


def test_aggregates_over_successes_only():
    agg = attack_aggregates(_rows())
    assert agg["instances"] == 3
    assert agg["successes"] == 2
    assert agg["success_rate"] == pytest.approx(2.0 / 3.0)
    assert agg["mean_d_c"] == pytest.approx(0.2)
    assert agg["mean_d_norm"] == pytest.approx(2.0)


def test_aggregates_no_successes():
    rows = [dict(r, success=False) for r in _rows()]
    agg = attack_aggregates(rows)
    assert agg["success_rate"] == 0.0
    assert agg["mean_d_c"] is None


def test_payload_hash_ignores_timing():
    r1 = build_report(kind="attack", config={"x": 1}, rows=_rows(), aggregates={})
    slow = [dict(r, wall_time_ms=r["wall_time_ms"] * 100) for r in _rows()]
    r2 = build_report(kind="attack", config={"x": 1}, rows=slow, aggregates={})
    assert r1.payload_sha256 == r2.payload_sha256
    r3 = build_report(kind="attack", config={"x": 2}, rows=_rows(), aggregates={})
    assert r1.payload_sha256 != r3.payload_sha256


def test_json_roundtrip_and_tamper_detection(tmp_path):
    report = build_report(kind="attack", config={"k": 10}, rows=_rows(),
                          aggregates=attack_aggregates(_rows()))
    path = str(tmp_path / "r.json")
    report.to_json_file(path)
    back = EvalReport.from_json_file(path)
    assert back.payload_sha256 == report.payload_sha256
    assert back.rows == report.rows

    with open(path) as fh:
        blob = json.load(fh)
    blob["rows"][0]["d_c"] = 0.0
    with open(path, "w") as fh:
        json.dump(blob, fh)
    with pytest.raises(ValidationError):
        EvalReport.from_json_file(path)


def test_payload_bytes_are_canonical():
    report = build_report(kind="attack", config={"b": 2, "a": 1}, rows=[], aggregates={})
    payload = report.payload_bytes()
    # canonical form: sorted keys, no whitespace, no timing fields
    assert b'"a":1' in payload and b'"b":2' in payload
    assert b" " not in payload
    assert b"wall" not in payload


def test_csv_export(tmp_path):
    report = build_report(kind="attack", config={}, rows=_rows(),
                          aggregates=attack_aggregates(_rows()))
    path = str(tmp_path / "r.csv")
    report.to_csv_file(path)
    lines = open(path).read().strip().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("instance_id")


def test_attack_row_flattens_result():
    from gsda.attack import AttackResult
    from gsda.cloud import PointCloud
    from gsda.metrics import DistortionReport

    res = AttackResult(
        adversarial=PointCloud(np.zeros((4, 3))),
        delta=np.zeros((4, 3)),
        success=True,
        predicted_label=2,
        true_label=1,
        target_label=None,
        distortion=DistortionReport(d_norm=1.0, d_c=0.1, d_h=0.2, e_delta=1.0),
        beta_used=5.0,
        iterations_run=100,
        loss_trace=np.zeros((100, 2)),
    )
    row = attack_row("inst0", res, adv_path="adv/x.xyz", wall_time_ms=3.0)
    assert row["instance_id"] == "inst0"
    assert row["success"] is True
    assert row["predicted_label"] == 2
    assert row["target_label"] is None
    assert row["d_c"] == 0.1
    assert row["adv_path"] == "adv/x.xyz"
