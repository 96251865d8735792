"""Command-line harness: dataset generation, training, classification,
spectral analysis, attacks, defense evaluation, and transferability.

Exit codes: 0 success, 2 validation/input error, 3 runtime or numeric
failure.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
import time

import click
import numpy as np

from . import kernels
from .attack import AttackConfig
from .cloud import PointCloud
from .defense import SorConfig, sor_defense, srs_defense
from .errors import GsdaError, ValidationError
from .experiment import (
    attack_suite_report,
    load_manifest,
    predict_labels,
    round_robin_targets,
    select_correctly_classified,
    write_manifest,
)
from .io import load_point_cloud, save_point_cloud
from .model import (
    ModelConfig,
    TrainConfig,
    forward,
    init_model,
    load_model,
    save_model,
    train,
)
from .report import EvalReport, build_report
from .shapes import CLASS_NAMES, AugmentConfig, ShapeSpec, gen_dataset, synth_shape
from .spectral import (
    BandBounds,
    band_energy,
    band_filter,
    gft,
    igft,
    spectral_basis,
    write_spectrum_csv,
)
from .svgplot import line_chart


def _fail_on_errors(f):
    """Map package errors onto the documented exit codes."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as exc:
            click.echo("error: %s" % exc, err=True)
            sys.exit(2)
        except (GsdaError, np.linalg.LinAlgError, OSError) as exc:
            click.echo("error: %s" % exc, err=True)
            sys.exit(3)

    return wrapper


@click.group()
@click.option("--seed", default=0, show_default=True, help="Global random seed.")
@click.option(
    "--jobs",
    default=0,
    show_default="available cores",
    help="Parallel attack workers; 0 means one per available core.",
)
@click.option(
    "--out-dir",
    default=".",
    show_default=True,
    type=click.Path(file_okay=False),
    help="Directory for generated artifacts.",
)
@click.option(
    "--format",
    "fmt",
    default="json",
    show_default=True,
    type=click.Choice(["json", "csv"]),
    help="Report format; csv additionally keeps the canonical JSON.",
)
@click.pass_context
def main(ctx, seed, jobs, out_dir, fmt):
    """Graph-spectral-domain attacks on point-cloud classifiers."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["jobs"] = jobs if jobs > 0 else (os.cpu_count() or 1)
    ctx.obj["out_dir"] = out_dir
    ctx.obj["format"] = fmt
    os.makedirs(out_dir, exist_ok=True)


def _write_report(report: EvalReport, ctx_obj: dict, stem: str) -> str:
    json_path = os.path.join(ctx_obj["out_dir"], stem + ".json")
    report.to_json_file(json_path)
    if ctx_obj["format"] == "csv":
        report.to_csv_file(os.path.join(ctx_obj["out_dir"], stem + ".csv"))
    return json_path


@main.command("gen-data")
@click.option("--classes", default=",".join(CLASS_NAMES), show_default=True)
@click.option("--per-class", default=50, show_default=True)
@click.option("--n-points", default=256, show_default=True)
@click.option("--jitter", default=0.005, show_default=True)
@click.option("--split", default=0.8, show_default=True)
@click.option("--augment/--no-augment", default=True, show_default=True)
@click.option("--scale-range", default="0.8,1.25", show_default=True)
@click.pass_context
@_fail_on_errors
def cmd_gen_data(ctx, classes, per_class, n_points, jitter, split, augment, scale_range):
    """Generate the synthetic labeled dataset plus a manifest."""
    lo, hi = (float(v) for v in scale_range.split(","))
    aug = AugmentConfig(scale_range=(lo, hi)) if augment else None
    dataset = gen_dataset(
        classes=[c.strip() for c in classes.split(",") if c.strip()],
        per_class=per_class,
        n_points=n_points,
        seed=ctx.obj["seed"],
        jitter_sigma=jitter,
        augment=aug,
        split=split,
    )
    path = write_manifest(dataset, ctx.obj["out_dir"])
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    click.echo(
        "wrote %d train / %d test clouds; manifest %s (sha256 %s)"
        % (len(dataset.train), len(dataset.test), path, digest[:16])
    )


@main.command("train")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", default=30, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--weight-decay", default=1e-4, show_default=True)
@click.option("--widths", default="64,128,256", show_default=True, help="Per-point MLP widths.")
@click.option("--head-widths", default="64", show_default=True, help="Head widths before the class layer.")
@click.option("--model-out", default="model.gsm", show_default=True)
@click.pass_context
@_fail_on_errors
def cmd_train(ctx, data, epochs, batch_size, lr, weight_decay, widths, head_widths, model_out):
    """Train the built-in classifier on a generated dataset."""
    dataset = load_manifest(data)
    num_classes = len(dataset.class_names)
    point_widths = tuple(int(w) for w in widths.split(","))
    head = tuple(int(w) for w in head_widths.split(",") if w.strip()) + (num_classes,)
    model = init_model(
        ModelConfig(
            num_classes=num_classes,
            point_mlp_widths=point_widths,
            head_widths=head,
            seed=ctx.obj["seed"],
        )
    )
    t0 = time.perf_counter()
    model, history = train(
        model,
        dataset,
        TrainConfig(
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=lr,
            weight_decay=weight_decay,
            seed=ctx.obj["seed"],
        ),
    )
    wall = time.perf_counter() - t0
    out_path = os.path.join(ctx.obj["out_dir"], model_out)
    save_model(model, out_path)
    hist_path = os.path.join(ctx.obj["out_dir"], "train_history.csv")
    with open(hist_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,train_acc,test_acc\n")
        for row in history:
            fh.write(
                "%d,%.8g,%.6g,%.6g\n"
                % (
                    row["epoch"],
                    row["train_loss"],
                    row["train_acc"],
                    row.get("test_acc", float("nan")),
                )
            )
    epochs_x = [row["epoch"] for row in history]
    line_chart(
        os.path.join(ctx.obj["out_dir"], "train_history.svg"),
        [
            ("train loss", epochs_x, [row["train_loss"] for row in history]),
            ("test acc", epochs_x, [row.get("test_acc", 0.0) for row in history]),
        ],
        title="training",
        x_label="epoch",
    )
    final = history[-1] if history else {}
    click.echo(
        "trained %d epochs in %.1fs; test acc %.4f; model %s"
        % (epochs, wall, final.get("test_acc", float("nan")), out_path)
    )


def _apply_defense(cloud: PointCloud, defense: str, sor_k, sor_alpha, sor_ratio, srs_drop, seed):
    if defense == "none":
        return cloud
    if defense == "sor":
        return sor_defense(
            cloud,
            SorConfig(k_neighbors=sor_k, alpha=sor_alpha, drop_ratio=sor_ratio),
        )
    if defense == "srs":
        return srs_defense(cloud, srs_drop, seed=seed)
    raise ValidationError("unknown defense %r" % defense)


@main.command("classify")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--defense", default="none", show_default=True, type=click.Choice(["none", "sor", "srs"]))
@click.option("--sor-k", default=2, show_default=True)
@click.option("--sor-alpha", default=1.1, show_default=True)
@click.option("--sor-drop-ratio", default=None, type=float)
@click.option("--srs-drop", default=0, show_default=True)
@click.argument("clouds", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@_fail_on_errors
def cmd_classify(ctx, model_path, defense, sor_k, sor_alpha, sor_drop_ratio, srs_drop, clouds):
    """Classify cloud files, optionally after a defense."""
    model = load_model(model_path)
    for path in clouds:
        cloud = load_point_cloud(path)
        defended = _apply_defense(
            cloud, defense, sor_k, sor_alpha, sor_drop_ratio, srs_drop, ctx.obj["seed"]
        )
        logits, probs = forward(model, defended)
        pred = int(logits.argmax())
        click.echo(
            "%s: class %d (p=%.4f, %d points used)"
            % (path, pred, probs[pred], defended.n)
        )


@main.command("spectrum")
@click.option("--input", "input_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--shape", default=None, type=click.Choice(CLASS_NAMES))
@click.option("--n-points", default=1024, show_default=True)
@click.option("--jitter", default=0.0, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--band-bounds", default="auto", show_default=True, help="'auto' (energy quantiles 0.9/0.97) or 'LO,HI' indices.")
@click.option("--remove-band", default="none", show_default=True, help="Comma list of {low,mid,high} to zero out.")
@click.option("--perturb-band", default=None, type=click.Choice(["low", "mid", "high"]))
@click.option("--delta", default=0.2, show_default=True, help="Constant added by --perturb-band.")
@click.option("--plot/--no-plot", default=True, show_default=True)
@click.pass_context
@_fail_on_errors
def cmd_spectrum(ctx, input_path, shape, n_points, jitter, k, band_bounds, remove_band, perturb_band, delta, plot):
    """Spectral analysis of one cloud: CSV spectrum, band energies,
    optional band-edited reconstructions, SVG plot."""
    if (input_path is None) == (shape is None):
        raise ValidationError("give exactly one of --input or --shape")
    if input_path:
        cloud = load_point_cloud(input_path)
        stem = os.path.splitext(os.path.basename(input_path))[0]
    else:
        cloud = synth_shape(
            ShapeSpec(
                class_name=shape,
                n_points=n_points,
                seed=ctx.obj["seed"],
                jitter_sigma=jitter,
            )
        )
        stem = shape
    basis = spectral_basis(cloud, k)
    coeffs = gft(basis, cloud.points)
    out_dir = ctx.obj["out_dir"]
    csv_path = os.path.join(out_dir, "%s_spectrum.csv" % stem)
    write_spectrum_csv(csv_path, basis.lambdas, coeffs)

    if band_bounds == "auto":
        bounds = BandBounds.from_energy_quantiles(coeffs)
    else:
        lo, hi = (int(v) for v in band_bounds.split(","))
        bounds = BandBounds(i_low=lo, i_high=hi)
    bands = {
        "low": (0, bounds.i_low),
        "mid": (bounds.i_low, bounds.i_high),
        "high": (bounds.i_high, cloud.n),
    }
    e_low, e_mid, e_high = band_energy(coeffs, bounds)
    click.echo(
        "bands: low=[0,%d) mid=[%d,%d) high=[%d,%d); energy %.4f / %.4f / %.4f"
        % (bounds.i_low, bounds.i_low, bounds.i_high, bounds.i_high, cloud.n, e_low, e_mid, e_high)
    )

    removed = [b.strip() for b in remove_band.split(",") if b.strip() and b.strip() != "none"]
    edited = coeffs
    for name in removed:
        if name not in bands:
            raise ValidationError("unknown band %r" % name)
        edited = band_filter(edited, bands[name], mode="zero")
    if perturb_band:
        edited = band_filter(edited, bands[perturb_band], mode="add_constant", delta=delta)
    if removed or perturb_band:
        recon = igft(basis, edited)
        recon_path = os.path.join(out_dir, "%s_recon.xyz" % stem)
        save_point_cloud(PointCloud(recon, name=stem + "_recon"), recon_path)
        click.echo("reconstruction -> %s" % recon_path)
    if plot:
        energy = (coeffs * coeffs).sum(axis=1)
        svg_path = os.path.join(out_dir, "%s_spectrum.svg" % stem)
        line_chart(
            svg_path,
            [("energy", list(range(cloud.n)), energy.tolist())],
            title="%s spectrum (K=%d)" % (stem, k),
            x_label="frequency index",
            y_label="energy",
            log_y=True,
        )
        click.echo("plot -> %s" % svg_path)
    click.echo("spectrum -> %s" % csv_path)


def _parse_band_mask(text: str | None, n: int):
    if text in (None, "", "none"):
        return None
    named = {
        "low": (0, n // 8),
        "mid": (n // 8, n // 2),
        "high": (n // 2, n),
    }
    if text in named:
        return named[text]
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(
            "band mask must be low|mid|high or LO:HI, got %r" % text
        ) from None
    return (lo, hi)


@main.command("attack")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--count", default=100, show_default=True, help="Correctly classified test clouds to attack.")
@click.option("--targeted/--untargeted", default=False, show_default=True)
@click.option("--baseline", default="none", show_default=True, type=click.Choice(["none", "xyz"]))
@click.option("--iterations", default=500, show_default=True)
@click.option("--lr", default=0.01, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--beta-init", default=10.0, show_default=True)
@click.option("--bs-steps", default=10, show_default=True)
@click.option("--w-chamfer", default=5.0, show_default=True)
@click.option("--w-hausdorff", default=0.5, show_default=True)
@click.option("--eps-max", default=3.0, show_default=True)
@click.option("--eps-xyz", default=0.05, show_default=True)
@click.option("--band-mask", default="none", show_default=True, help="low|mid|high or LO:HI frequency-index range.")
@click.option("--save-adv/--no-save-adv", default=True, show_default=True)
@click.pass_context
@_fail_on_errors
def cmd_attack(ctx, model_path, data, count, targeted, baseline, iterations, lr, k, beta_init, bs_steps, w_chamfer, w_hausdorff, eps_max, eps_xyz, band_mask, save_adv):
    """Attack a trained model over the test split; writes an EvalReport
    and adversarial clouds."""
    model = load_model(model_path)
    dataset = load_manifest(data)
    suite = select_correctly_classified(model, dataset.test, count)
    cfg = AttackConfig(
        iterations=iterations,
        lr=lr,
        k=k,
        beta_init=beta_init,
        binary_search_steps=bs_steps,
        w_chamfer=w_chamfer,
        w_hausdorff=w_hausdorff,
        eps_max=eps_max,
        eps_xyz=eps_xyz,
        mode="targeted" if targeted else "untargeted",
        band_mask=_parse_band_mask(band_mask, dataset.n_points),
    )
    targets = None
    if targeted:
        targets = round_robin_targets(
            [c.label for c in suite], len(dataset.class_names), seed=ctx.obj["seed"]
        )
    adv_dir = os.path.join(ctx.obj["out_dir"], "adv") if save_adv else None
    report, results = attack_suite_report(
        model,
        suite,
        cfg,
        targets=targets,
        baseline=(baseline == "xyz"),
        jobs=ctx.obj["jobs"],
        adv_dir=adv_dir,
        extra_config={
            "model_path": os.path.abspath(model_path),
            "data_path": os.path.abspath(data),
            "seed": ctx.obj["seed"],
            "kernel_backend": kernels.BACKEND,
        },
    )
    path = _write_report(report, ctx.obj, "attack_report")
    trace = results[0].loss_trace
    xs = list(range(trace.shape[0]))
    line_chart(
        os.path.join(ctx.obj["out_dir"], "loss_trace.svg"),
        [
            ("L_class", xs, trace[:, 0].tolist()),
            ("L_reg", xs, trace[:, 1].tolist()),
        ],
        title="attack loss trace (%s)" % suite[0].name,
        x_label="iteration",
    )
    agg = report.aggregates
    click.echo(
        "%s: success %d/%d (%.1f%%), mean d_c %s, report %s"
        % (
            "xyz-baseline" if baseline == "xyz" else "gsda",
            agg["successes"],
            agg["instances"],
            100.0 * agg["success_rate"],
            "%.3g" % agg["mean_d_c"] if agg["mean_d_c"] is not None else "n/a",
            path,
        )
    )


@main.command("defend-eval")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--defense", default="sor", show_default=True, type=click.Choice(["none", "sor", "srs"]))
@click.option("--sor-k", default=2, show_default=True)
@click.option("--sor-alpha", default=1.1, show_default=True)
@click.option("--sor-drop-ratio", default=None, help="Ratio or comma list (sweep); empty uses the threshold rule.")
@click.option("--srs-drop", default="64", show_default=True, help="Drop count or comma list (sweep).")
@click.pass_context
@_fail_on_errors
def cmd_defend_eval(ctx, report_path, model_path, defense, sor_k, sor_alpha, sor_drop_ratio, srs_drop):
    """Re-classify saved adversarial clouds behind a defense; one report
    row per sweep value."""
    source = EvalReport.from_json_file(report_path)
    model = load_model(model_path)
    base_dir = os.path.dirname(os.path.abspath(report_path))
    loaded = []
    for row in source.rows:
        if row.get("adv_path") is None:
            raise ValidationError(
                "source report has no saved adversarial clouds (rerun attack with --save-adv)"
            )
        cloud = load_point_cloud(os.path.join(base_dir, row["adv_path"]))
        loaded.append((row, cloud))
    undefended_rate = source.aggregates.get("success_rate", 0.0)

    if defense == "sor" and sor_drop_ratio is not None:
        sweep = [("sor", float(v)) for v in str(sor_drop_ratio).split(",")]
    elif defense == "sor":
        sweep = [("sor", None)]
    elif defense == "srs":
        sweep = [("srs", int(v)) for v in str(srs_drop).split(",")]
    else:
        sweep = [("none", None)]

    rows = []
    for kind, param in sweep:
        successes = 0
        correct = 0
        for src_row, cloud in loaded:
            defended = _apply_defense(
                cloud, kind, sor_k, sor_alpha, param if kind == "sor" else None,
                param if kind == "srs" else 0, ctx.obj["seed"],
            )
            pred = predict_labels(model, [defended])[0]
            if src_row["target_label"] is not None:
                success = pred == src_row["target_label"]
            else:
                success = pred != src_row["true_label"]
            successes += int(success)
            correct += int(pred == src_row["true_label"])
        total = len(loaded)
        rate = successes / total if total else 0.0
        rows.append(
            {
                "defense": kind,
                "param": param,
                "instances": total,
                "attack_successes": successes,
                "attack_success_rate": rate,
                "accuracy": correct / total if total else 0.0,
                "undefended_success_rate": undefended_rate,
                "retained_fraction": (rate / undefended_rate) if undefended_rate else None,
            }
        )
    report = build_report(
        kind="defend-eval",
        config={
            "source_report": os.path.abspath(report_path),
            "source_payload_sha256": source.payload_sha256,
            "model_path": os.path.abspath(model_path),
            "defense": defense,
            "sor_k": sor_k,
            "sor_alpha": sor_alpha,
            "seed": ctx.obj["seed"],
        },
        rows=rows,
        aggregates={"rows": len(rows)},
    )
    path = _write_report(report, ctx.obj, "defend_report")
    for row in rows:
        click.echo(
            "%s(%s): attack success %.1f%%, accuracy %.1f%%, retained %s"
            % (
                row["defense"],
                row["param"],
                100.0 * row["attack_success_rate"],
                100.0 * row["accuracy"],
                "%.3f" % row["retained_fraction"] if row["retained_fraction"] is not None else "n/a",
            )
        )
    click.echo("report %s" % path)


@main.command("transfer")
@click.option("--run", "runs", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False), help="Attack report JSON; one row per run.")
@click.option("--models", "model_paths", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False), help="Target model; one column per model.")
@click.pass_context
@_fail_on_errors
def cmd_transfer(ctx, runs, model_paths):
    """Misclassification-rate matrix: adversarial clouds from each run,
    evaluated against each target model."""
    names = [os.path.basename(p) for p in model_paths]
    if len(set(names)) != len(names):
        names = list(model_paths)
    targets = [(name, load_model(p)) for name, p in zip(names, model_paths)]
    rows = []
    for run_path in runs:
        source = EvalReport.from_json_file(run_path)
        base_dir = os.path.dirname(os.path.abspath(run_path))
        clouds, true_labels = [], []
        for row in source.rows:
            if row.get("adv_path") is None:
                raise ValidationError("%s: no saved adversarial clouds" % run_path)
            clouds.append(load_point_cloud(os.path.join(base_dir, row["adv_path"])))
            true_labels.append(row["true_label"])
        true_arr = np.array(true_labels)
        entry = {"run": os.path.basename(os.path.dirname(os.path.abspath(run_path))) or run_path}
        for name, model in targets:
            preds = predict_labels(model, clouds)
            entry["miss_rate__" + name] = float((preds != true_arr).mean())
        rows.append(entry)
    report = build_report(
        kind="transfer",
        config={
            "runs": [os.path.abspath(r) for r in runs],
            "models": [os.path.abspath(m) for m in model_paths],
        },
        rows=rows,
        aggregates={"rows": len(rows)},
    )
    path = _write_report(report, ctx.obj, "transfer_report")
    header = ["run"] + [name for name, _ in targets]
    click.echo("\t".join(header))
    for row in rows:
        cells = [str(row["run"])] + [
            "%.3f" % row["miss_rate__" + name] for name, _ in targets
        ]
        click.echo("\t".join(cells))
    click.echo("report %s" % path)


if __name__ == "__main__":
    main()
