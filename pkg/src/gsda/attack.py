"""Spectral-domain adversarial attack and its data-domain baseline.

The attack optimizes a perturbation of the clean cloud's GFT
coefficients: each iteration reconstructs P' = U(x_hat + delta), pulls
the adversarial-loss gradient back through the basis (dL/d_delta =
U^T dL/dP'), takes one Adam step, and clamps every entry to the
per-frequency ratio bound |delta[i,k]| <= eps_max * |x_hat[i,k]|.  An
outer binary search tunes the regularization weight beta, and the best
successful iterate (lowest Chamfer distortion) over all rounds wins.

Everything is deterministic: delta starts at zero and no randomness
enters the loop.  Batches exist purely for throughput; an attack on a
batch of one is the reference semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cloud import PointCloud, as_points
from .errors import BandRangeError, ConfigError, ValidationError
from .metrics import DistortionReport, chamfer, hausdorff
from .model import ClassifierModel, GradWorkspace, _softmax
from .spectral import SpectralBasis, gft, igft, spectral_basis


@dataclass
class AttackConfig:
    iterations: int = 500
    lr: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    k: int = 10
    beta_init: float = 10.0
    binary_search_steps: int = 10
    w_chamfer: float = 5.0
    w_hausdorff: float = 0.5
    eps_max: float = 3.0
    mode: str = "untargeted"
    band_mask: tuple | None = None
    eps_xyz: float = 0.05  # data-domain baseline clamp

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.beta_init <= 0:
            raise ConfigError("beta_init must be > 0")
        if self.binary_search_steps < 1:
            raise ConfigError("binary_search_steps must be >= 1")
        if self.w_chamfer < 0 or self.w_hausdorff < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.eps_max < 0:
            raise ConfigError("eps_max must be >= 0")
        if self.eps_xyz < 0:
            raise ConfigError("eps_xyz must be >= 0")
        if self.mode not in ("targeted", "untargeted"):
            raise ConfigError("mode must be 'targeted' or 'untargeted'")
        if self.band_mask is not None:
            lo, hi = self.band_mask
            if not 0 <= lo <= hi:
                raise BandRangeError("band_mask must satisfy 0 <= lo <= hi")
            self.band_mask = (int(lo), int(hi))

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "lr": self.lr,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "k": self.k,
            "beta_init": self.beta_init,
            "binary_search_steps": self.binary_search_steps,
            "w_chamfer": self.w_chamfer,
            "w_hausdorff": self.w_hausdorff,
            "eps_max": self.eps_max,
            "mode": self.mode,
            "band_mask": list(self.band_mask) if self.band_mask else None,
            "eps_xyz": self.eps_xyz,
        }


@dataclass
class AttackResult:
    adversarial: PointCloud
    delta: np.ndarray  # spectral perturbation in the clean cloud's basis
    success: bool
    predicted_label: int
    true_label: int
    target_label: int | None
    distortion: DistortionReport
    beta_used: float
    iterations_run: int
    loss_trace: np.ndarray = field(repr=False)  # (iterations_run, 2): L_class, L_reg


def project_delta(
    delta: np.ndarray,
    x_hat: np.ndarray,
    eps_max: float,
    band_mask: tuple | None = None,
) -> np.ndarray:
    """Entrywise clamp onto the per-frequency ratio box; rows outside
    ``band_mask`` (if given) are zeroed.  Returns a new array."""
    delta = np.asarray(delta, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if delta.shape != x_hat.shape:
        raise ValidationError(
            "delta shape %r != x_hat shape %r" % (delta.shape, x_hat.shape)
        )
    if eps_max < 0:
        raise ConfigError("eps_max must be >= 0")
    bound = eps_max * np.abs(x_hat)
    out = np.clip(delta, -bound, bound)
    if band_mask is not None:
        lo, hi = band_mask
        if not 0 <= lo <= hi <= delta.shape[0]:
            raise BandRangeError(
                "band_mask (%d, %d) out of range for n=%d"
                % (lo, hi, delta.shape[0])
            )
        out[:lo] = 0.0
        out[hi:] = 0.0
    return out


def adversarial_loss(
    model: ClassifierModel,
    adv,
    clean,
    label: int,
    mode: str = "untargeted",
    beta: float = 10.0,
    w_chamfer: float = 5.0,
    w_hausdorff: float = 0.5,
):
    """Composite loss L_class + beta*(w_c*chamfer + w_h*hausdorff) and its
    gradient with respect to the adversarial coordinates.

    ``label`` is the target class in targeted mode, the true class in
    untargeted mode.
    """
    if mode not in ("targeted", "untargeted"):
        raise ValidationError("mode must be 'targeted' or 'untargeted'")
    adv_pts = as_points(adv)
    ws = GradWorkspace(model, 1, adv_pts.shape[0])
    _, l_class, g_class = ws.class_loss_grad(
        adv_pts[None], np.array([int(label)]), targeted=(mode == "targeted")
    )
    d_c, g_c = chamfer(adv, clean, with_grad=True)
    d_h, g_h = hausdorff(adv, clean, with_grad=True)
    total = float(l_class[0]) + beta * (w_chamfer * d_c + w_hausdorff * d_h)
    grad = g_class[0] + beta * (w_chamfer * g_c + w_hausdorff * g_h)
    return total, grad


class _AdamState:
    """Vanilla Adam on one array, with bias correction."""

    def __init__(self, shape, lr, beta1, beta2, eps):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def reset(self):
        self.m[...] = 0.0
        self.v[...] = 0.0
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * np.square(grad)
        corr1 = 1.0 - self.beta1**self.t
        corr2 = 1.0 - self.beta2**self.t
        param -= self.lr * (self.m / corr1) / (np.sqrt(self.v / corr2) + self.eps)


def _beta_search_update(beta, lo, hi, succeeded):
    """One binary-search move per cloud (vectorized over the batch)."""
    new_lo = np.where(succeeded, beta, lo)
    new_hi = np.where(succeeded, hi, beta)
    grown = np.where(np.isinf(hi), beta * 10.0, 0.5 * (new_lo + new_hi))
    shrunk = np.where(lo == 0.0, beta / 10.0, 0.5 * (new_lo + new_hi))
    new_beta = np.where(succeeded, grown, shrunk)
    return new_beta, new_lo, new_hi


def _run_attack_batch(
    model: ClassifierModel,
    clouds: list,
    cfg: AttackConfig,
    targets,
    spectral: bool,
    progress=None,
) -> list:
    """Shared engine for the spectral attack and the xyz baseline on a
    same-size batch.  ``targets`` is required iff cfg.mode is targeted."""
    B = len(clouds)
    n = clouds[0].n
    p0 = np.stack([c.points for c in clouds])
    labels = np.empty(B, dtype=np.int64)
    for i, c in enumerate(clouds):
        if c.n != n:
            raise ValidationError("batch clouds must share the same size")
        if c.label is None:
            raise ValidationError("attack needs labeled clean clouds")
        labels[i] = c.label
    targeted = cfg.mode == "targeted"
    if targeted:
        if targets is None:
            raise ValidationError("targeted mode needs target labels")
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != (B,):
            raise ValidationError("need one target per cloud")
        if np.any(targets == labels):
            raise ValidationError("target label equals true label")
        loss_labels = targets
    else:
        loss_labels = labels

    bases = [spectral_basis(c, cfg.k) for c in clouds]
    basis_u = np.stack([b.vectors for b in bases])  # (B, n, n)
    x_hat = basis_u.transpose(0, 2, 1) @ p0
    if spectral:
        bound = cfg.eps_max * np.abs(x_hat)
        mask_lo, mask_hi = cfg.band_mask if cfg.band_mask else (0, n)
        if mask_hi > n:
            raise BandRangeError("band_mask exceeds n=%d" % n)
    else:
        bound = np.full_like(p0, cfg.eps_xyz)
        mask_lo, mask_hi = 0, n

    delta = np.zeros((B, n, 3))
    adv = np.empty_like(p0)
    grad_delta = np.empty_like(delta)
    adam = _AdamState(delta.shape, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    ws = GradWorkspace(model, B, n)
    rows = np.arange(B)

    total_iters = cfg.binary_search_steps * cfg.iterations
    trace = np.empty((total_iters, B, 2))
    beta = np.full(B, float(cfg.beta_init))
    beta_lo = np.zeros(B)
    beta_hi = np.full(B, np.inf)
    best_dc = np.full(B, np.inf)
    best_delta = np.zeros_like(delta)
    best_beta = np.zeros(B)
    best_pred = np.zeros(B, dtype=np.int64)
    ever_succeeded = np.zeros(B, dtype=bool)
    last_delta = np.zeros_like(delta)
    last_pred = np.zeros(B, dtype=np.int64)

    step = 0
    final_beta = beta.copy()
    for rnd in range(cfg.binary_search_steps):
        delta[...] = 0.0
        adam.reset()
        round_succeeded = np.zeros(B, dtype=bool)
        final_round = rnd == cfg.binary_search_steps - 1
        if final_round:
            final_beta = beta.copy()
        for it in range(cfg.iterations):
            if spectral:
                np.add(x_hat, delta, out=grad_delta)  # reuse as coeff scratch
                np.matmul(basis_u, grad_delta, out=adv)
            else:
                np.add(p0, delta, out=adv)
            logits, l_class, g = ws.class_loss_grad(adv, loss_labels, targeted)
            pred = logits.argmax(axis=1)
            succ = (pred == targets) if targeted else (pred != labels)
            d2, nn_idx = kernels.nearest_sqdist_batch(adv, p0)
            d_c = d2.mean(axis=1)
            worst = d2.argmax(axis=1)
            d_h = d2[rows, worst]
            trace[step, :, 0] = l_class
            trace[step, :, 1] = cfg.w_chamfer * d_c + cfg.w_hausdorff * d_h
            improved = succ & (d_c < best_dc)
            if improved.any():
                upd = np.where(improved)[0]
                best_dc[upd] = d_c[upd]
                best_delta[upd] = delta[upd]
                best_beta[upd] = beta[upd]
                best_pred[upd] = pred[upd]
                ever_succeeded[upd] = True
            round_succeeded |= succ
            if final_round and it == cfg.iterations - 1:
                last_delta[...] = delta
                last_pred[...] = pred
            # composite gradient w.r.t. the adversarial coordinates
            nn = np.take_along_axis(p0, nn_idx[:, :, None], axis=1)
            scale_c = (beta * cfg.w_chamfer * (2.0 / n))[:, None, None]
            g += scale_c * (adv - nn)
            hw = beta * cfg.w_hausdorff * 2.0
            g[rows, worst] += hw[:, None] * (
                adv[rows, worst] - p0[rows, nn_idx[rows, worst]]
            )
            if spectral:
                np.matmul(basis_u.transpose(0, 2, 1), g, out=grad_delta)
            else:
                grad_delta[...] = g
            adam.step(delta, grad_delta)
            np.clip(delta, -bound, bound, out=delta)
            if mask_lo > 0:
                delta[:, :mask_lo] = 0.0
            if mask_hi < n:
                delta[:, mask_hi:] = 0.0
            step += 1
            if progress is not None and (step % 100 == 0 or step == total_iters):
                progress(step, total_iters, int(ever_succeeded.sum()))
        beta, beta_lo, beta_hi = _beta_search_update(
            beta, beta_lo, beta_hi, round_succeeded
        )

    results = []
    for b in range(B):
        if ever_succeeded[b]:
            d_b = best_delta[b]
            pred_b = int(best_pred[b])
            beta_b = float(best_beta[b])
        else:
            d_b = last_delta[b]
            pred_b = int(last_pred[b])
            # beta has moved past the final round; report the one used there
            beta_b = float(final_beta[b])
        results.append(
            _assemble_result(
                clouds[b],
                bases[b],
                x_hat[b],
                d_b,
                pred_b,
                beta_b,
                ever_succeeded[b],
                targets[b] if targeted else None,
                total_iters,
                trace[:, b, :].copy(),
                spectral,
                p0[b],
            )
        )
    return results


def _assemble_result(
    clean: PointCloud,
    basis: SpectralBasis,
    x_hat: np.ndarray,
    delta: np.ndarray,
    pred: int,
    beta_used: float,
    success: bool,
    target,
    iterations_run: int,
    loss_trace: np.ndarray,
    spectral: bool,
    p0: np.ndarray,
) -> AttackResult:
    if spectral:
        adv_pts = igft(basis, x_hat + delta)
        spec_delta = delta
    else:
        adv_pts = p0 + delta
        spec_delta = gft(basis, adv_pts) - x_hat
    adv_cloud = PointCloud(
        points=adv_pts,
        label=clean.label,
        name=(clean.name or "cloud") + "_adv",
    )
    diff = adv_pts - p0
    report = DistortionReport(
        d_norm=float(np.sqrt((diff * diff).sum())),
        d_c=chamfer(adv_pts, p0),
        d_h=hausdorff(adv_pts, p0),
        e_delta=float(np.sqrt((spec_delta * spec_delta).sum())),
    )
    return AttackResult(
        adversarial=adv_cloud,
        delta=spec_delta,
        success=bool(success),
        predicted_label=int(pred),
        true_label=int(clean.label),
        target_label=None if target is None else int(target),
        distortion=report,
        beta_used=beta_used,
        iterations_run=iterations_run,
        loss_trace=loss_trace,
    )


# batches above this size are split to keep the working set in cache-
# friendly territory (the basis alone is B*n*n floats)
_MAX_BATCH = 64


def _attack_many(model, clouds, cfg, targets, spectral, progress):
    clouds = list(clouds)
    if not clouds:
        return []
    if targets is not None and len(targets) != len(clouds):
        raise ValidationError("need one target per cloud")
    order = sorted(range(len(clouds)), key=lambda i: clouds[i].n)
    results: list = [None] * len(clouds)
    start = 0
    while start < len(order):
        n = clouds[order[start]].n
        stop = start
        while (
            stop < len(order)
            and clouds[order[stop]].n == n
            and stop - start < _MAX_BATCH
        ):
            stop += 1
        chunk = order[start:stop]
        chunk_targets = None if targets is None else [targets[i] for i in chunk]
        chunk_results = _run_attack_batch(
            model,
            [clouds[i] for i in chunk],
            cfg,
            chunk_targets,
            spectral,
            progress,
        )
        for i, res in zip(chunk, chunk_results):
            results[i] = res
        start = stop
    return results


def gsda_attack_batch(model, clouds, config: AttackConfig, targets=None, progress=None):
    """Spectral attack on many clouds; order of results matches input.
    Clouds of equal size are batched together internally."""
    return _attack_many(model, clouds, config, targets, True, progress)


def gsda_attack(model, clean: PointCloud, config: AttackConfig, target=None) -> AttackResult:
    """Spectral-domain attack on a single clean cloud.

    ``target`` is the desired label in targeted mode and ignored
    otherwise; the true label comes from clean.label.
    """
    targets = None if target is None else [int(target)]
    if config.mode == "targeted" and targets is None:
        raise ValidationError("targeted mode needs a target label")
    return _attack_many(model, [clean], config, targets, True, None)[0]


def xyz_baseline_attack_batch(model, clouds, config: AttackConfig, targets=None, progress=None):
    """Data-domain baseline on many clouds (same loop, coordinate offsets
    clamped to |offset| <= eps_xyz)."""
    return _attack_many(model, clouds, config, targets, False, progress)


def xyz_baseline_attack(model, clean: PointCloud, config: AttackConfig, target=None) -> AttackResult:
    """Data-domain baseline attack on a single cloud; the result's delta
    is the induced spectral change, so every spectral metric stays
    comparable with the spectral attack."""
    targets = None if target is None else [int(target)]
    if config.mode == "targeted" and targets is None:
        raise ValidationError("targeted mode needs a target label")
    return _attack_many(model, [clean], config, targets, False, None)[0]
