"""Evaluation reports: per-instance rows, recomputable aggregates, and a
determinism hash.

The hashed payload is a canonical JSON encoding of everything except
timing (timestamps and wall-time fields), so two runs with identical
seeds produce byte-identical payloads even though they never take the
same wall time.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

# row keys whose values are timing noise, excluded from the hash
_TIMING_KEYS = ("wall_time_ms",)


def attack_row(instance_id: str, result, wall_time_ms: float, adv_path: str | None = None) -> dict:
    """Flatten one AttackResult into a report row."""
    d = result.distortion
    return {
        "instance_id": instance_id,
        "true_label": result.true_label,
        "target_label": result.target_label,
        "predicted_label": result.predicted_label,
        "success": bool(result.success),
        "d_norm": d.d_norm,
        "d_c": d.d_c,
        "d_h": d.d_h,
        "e_delta": d.e_delta,
        "beta_used": result.beta_used,
        "iterations_run": result.iterations_run,
        "adv_path": adv_path,
        "wall_time_ms": wall_time_ms,
    }


def attack_aggregates(rows: list) -> dict:
    """Success rate over all rows; distortion means over successful rows."""
    total = len(rows)
    succ = [r for r in rows if r["success"]]
    agg = {
        "instances": total,
        "successes": len(succ),
        "success_rate": (len(succ) / total) if total else 0.0,
    }
    for key in ("d_norm", "d_c", "d_h", "e_delta"):
        agg["mean_" + key] = (
            sum(r[key] for r in succ) / len(succ) if succ else None
        )
    return agg


@dataclass
class EvalReport:
    kind: str
    config: dict
    rows: list
    aggregates: dict
    payload_sha256: str = ""
    created_unix: float = field(default_factory=time.time)
    wall_seconds: float = 0.0

    def __post_init__(self):
        if not self.payload_sha256:
            self.payload_sha256 = hashlib.sha256(self.payload_bytes()).hexdigest()

    def payload_bytes(self) -> bytes:
        """Canonical timing-free encoding; the determinism contract is on
        these bytes."""
        rows = [
            {k: v for k, v in row.items() if k not in _TIMING_KEYS}
            for row in self.rows
        ]
        payload = {
            "kind": self.kind,
            "config": self.config,
            "rows": rows,
            "aggregates": self.aggregates,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def to_json_file(self, path: str) -> None:
        doc = {
            "kind": self.kind,
            "config": self.config,
            "rows": self.rows,
            "aggregates": self.aggregates,
            "payload_sha256": self.payload_sha256,
            "timing": {
                "created_unix": self.created_unix,
                "wall_seconds": self.wall_seconds,
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv_file(self, path: str) -> None:
        if not self.rows:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write("")
            return
        keys = list(self.rows[0].keys())
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    @staticmethod
    def from_json_file(path: str) -> "EvalReport":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError("%s: %s" % (path, exc)) from exc
        try:
            report = EvalReport(
                kind=doc["kind"],
                config=doc["config"],
                rows=doc["rows"],
                aggregates=doc["aggregates"],
                payload_sha256="",
                created_unix=doc.get("timing", {}).get("created_unix", 0.0),
                wall_seconds=doc.get("timing", {}).get("wall_seconds", 0.0),
            )
        except KeyError as exc:
            raise ParseError("%s: missing report field %s" % (path, exc)) from exc
        stored = doc.get("payload_sha256")
        if stored and stored != report.payload_sha256:
            raise ValidationError(
                "%s: payload hash mismatch (report edited?)" % path
            )
        return report


def build_report(kind: str, config: dict, rows: list, aggregates: dict | None = None, wall_seconds: float = 0.0) -> EvalReport:
    if aggregates is None:
        aggregates = attack_aggregates(rows)
    return EvalReport(
        kind=kind,
        config=config,
        rows=rows,
        aggregates=aggregates,
        wall_seconds=wall_seconds,
    )
