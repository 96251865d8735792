"""Experiment plumbing shared by the CLI and the test suite: dataset
manifests, suite selection, target assignment, and parallel attack
execution with report rows.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .attack import AttackConfig, gsda_attack_batch, xyz_baseline_attack_batch
from .cloud import PointCloud
from .errors import ParseError, ValidationError
from .io import load_point_cloud, save_point_cloud
from .model import ClassifierModel, forward_batch
from .report import attack_aggregates, attack_row, build_report
from .shapes import LabeledDataset


def write_manifest(dataset: LabeledDataset, out_dir: str) -> str:
    """Save every cloud as XYZ under clouds/ plus a manifest.json index.
    Returns the manifest path."""
    clouds_dir = os.path.join(out_dir, "clouds")
    os.makedirs(clouds_dir, exist_ok=True)
    entries = []
    for split, clouds in (("train", dataset.train), ("test", dataset.test)):
        for cloud in clouds:
            rel = os.path.join("clouds", "%s.xyz" % cloud.name)
            save_point_cloud(cloud, os.path.join(out_dir, rel))
            entries.append(
                {
                    "name": cloud.name,
                    "path": rel,
                    "label": cloud.label,
                    "split": split,
                }
            )
    manifest = {
        "classes": dataset.class_names,
        "n_points": dataset.n_points,
        "seed": dataset.seed,
        "entries": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path: str) -> LabeledDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError("%s: %s" % (path, exc)) from exc
    base = os.path.dirname(os.path.abspath(path))
    train, test = [], []
    try:
        for entry in manifest["entries"]:
            cloud = load_point_cloud(os.path.join(base, entry["path"]))
            cloud.label = int(entry["label"])
            cloud.name = entry["name"]
            (train if entry["split"] == "train" else test).append(cloud)
        return LabeledDataset(
            train=train,
            test=test,
            class_names=list(manifest["classes"]),
            n_points=int(manifest["n_points"]),
            seed=int(manifest["seed"]),
        )
    except KeyError as exc:
        raise ParseError("%s: missing manifest field %s" % (path, exc)) from exc


def predict_labels(model: ClassifierModel, clouds: list) -> np.ndarray:
    """Batched prediction over same-or-mixed-size clouds."""
    preds = np.empty(len(clouds), dtype=np.int64)
    by_n: dict = {}
    for i, c in enumerate(clouds):
        by_n.setdefault(c.n, []).append(i)
    for idx in by_n.values():
        pts = np.stack([clouds[i].points for i in idx])
        batch_pred = forward_batch(model, pts).argmax(axis=1)
        for j, i in enumerate(idx):
            preds[i] = batch_pred[j]
    return preds


def select_correctly_classified(model: ClassifierModel, clouds: list, count: int) -> list:
    """``count`` correctly classified clouds, balanced over classes.

    Picks round-robin across class labels (input order within a class) so
    the attack suite mirrors the per-category evaluation protocol instead
    of over-representing whichever class happens to come first.
    """
    preds = predict_labels(model, clouds)
    by_class: dict = {}
    for c, p in zip(clouds, preds):
        if p == c.label:
            by_class.setdefault(int(c.label), []).append(c)
    chosen = []
    depth = 0
    while len(chosen) < count:
        grabbed = False
        for label in sorted(by_class):
            members = by_class[label]
            if depth < len(members):
                chosen.append(members[depth])
                grabbed = True
                if len(chosen) == count:
                    break
        if not grabbed:
            raise ValidationError(
                "only %d of the requested %d correctly classified clouds available"
                % (len(chosen), count)
            )
        depth += 1
    return chosen


def round_robin_targets(labels, num_classes: int, seed: int = 0) -> list:
    """Deterministic wrong-label assignment cycling over the other
    classes; the seed shifts the cycle's starting offset."""
    targets = []
    for i, y in enumerate(labels):
        offset = 1 + (i + int(seed)) % (num_classes - 1)
        targets.append((int(y) + offset) % num_classes)
    return targets


def _attack_chunk(args):
    model, clouds, cfg, targets, baseline = args
    t0 = time.perf_counter()
    runner = xyz_baseline_attack_batch if baseline else gsda_attack_batch
    results = runner(model, clouds, cfg, targets)
    wall_ms = (time.perf_counter() - t0) * 1000.0 / max(len(clouds), 1)
    return results, [wall_ms] * len(clouds)


def run_attack_suite(
    model: ClassifierModel,
    clouds: list,
    cfg: AttackConfig,
    targets=None,
    baseline: bool = False,
    jobs: int = 1,
):
    """Attack every cloud; returns (results, per-instance wall ms).

    jobs > 1 splits the suite into contiguous chunks across processes;
    row order always matches the input order.
    """
    jobs = max(1, int(jobs))
    if not clouds:
        return [], []
    if jobs == 1 or len(clouds) < 2 * jobs:
        return _attack_chunk((model, clouds, cfg, targets, baseline))
    bounds = np.linspace(0, len(clouds), jobs + 1, dtype=int)
    chunks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a == b:
            continue
        chunk_targets = None if targets is None else list(targets[a:b])
        chunks.append((model, list(clouds[a:b]), cfg, chunk_targets, baseline))
    results, walls = [], []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for chunk_results, chunk_walls in pool.map(_attack_chunk, chunks):
            results.extend(chunk_results)
            walls.extend(chunk_walls)
    return results, walls


def attack_suite_report(
    model: ClassifierModel,
    clouds: list,
    cfg: AttackConfig,
    targets=None,
    baseline: bool = False,
    jobs: int = 1,
    adv_dir: str | None = None,
    extra_config: dict | None = None,
):
    """Run a suite and package it as an EvalReport (plus the results).

    When adv_dir is set, adversarial clouds are saved there as XYZ and
    rows carry paths relative to adv_dir's parent.
    """
    t0 = time.perf_counter()
    results, walls = run_attack_suite(
        model, clouds, cfg, targets=targets, baseline=baseline, jobs=jobs
    )
    rows = []
    for cloud, result, wall in zip(clouds, results, walls):
        adv_path = None
        if adv_dir is not None:
            os.makedirs(adv_dir, exist_ok=True)
            adv_path = os.path.join(
                os.path.basename(adv_dir), "%s_adv.xyz" % cloud.name
            )
            save_point_cloud(
                result.adversarial,
                os.path.join(os.path.dirname(adv_dir) or ".", adv_path),
            )
        rows.append(attack_row(cloud.name, result, wall, adv_path))
    config = {
        "attack": cfg.to_dict(),
        "domain": "xyz" if baseline else "spectral",
        "instances": [c.name for c in clouds],
    }
    if extra_config:
        config.update(extra_config)
    report = build_report(
        kind="attack",
        config=config,
        rows=rows,
        aggregates=attack_aggregates(rows),
        wall_seconds=time.perf_counter() - t0,
    )
    return report, results
