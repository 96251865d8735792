import numpy as np
import pytest

from oracles import central_diff, grad_agreement

from gsda.attack import (
    AttackConfig,
    adversarial_loss,
    gsda_attack,
    gsda_attack_batch,
    project_delta,
    xyz_baseline_attack,
)
from gsda.cloud import PointCloud
from gsda.errors import ValidationError
from gsda.model import ModelConfig, TrainConfig, init_model, predict, train
from gsda.shapes import gen_dataset
from gsda.spectral import gft, spectral_basis


def _fast_cfg(**kw):
    base = dict(iterations=80, binary_search_steps=4, k=6)
    base.update(kw)
    return AttackConfig(**base)


@pytest.fixture(scope="module")
def victim():
    ds = gen_dataset(per_class=8, n_points=48, seed=2, jitter_sigma=0.06)
    model = init_model(
        ModelConfig(num_classes=8, point_mlp_widths=(24, 32), head_widths=(24, 8), seed=1)
    )
    model, _ = train(
        model, ds, TrainConfig(epochs=40, batch_size=16, learning_rate=3e-3, seed=1)
    )
    clean = [c for c in ds.test if predict(model, c) == c.label]
    assert len(clean) >= 4, "victim fixture failed to train"
    return model, clean


def test_config_validation():
    with pytest.raises(ValidationError):
        AttackConfig(iterations=0)
    with pytest.raises(ValidationError):
        AttackConfig(eps_max=-1.0)
    with pytest.raises(ValidationError):
        AttackConfig(mode="sideways")
    with pytest.raises(ValidationError):
        AttackConfig(band_mask=(5, 2))


def test_project_delta_clips_per_coefficient():
    rng = np.random.default_rng(0)
    x_hat = rng.normal(size=(10, 3))
    delta = rng.normal(size=(10, 3)) * 10.0
    out = project_delta(delta, x_hat, eps_max=2.0)
    bound = 2.0 * np.abs(x_hat)
    assert (np.abs(out) <= bound + 1e-15).all()
    # small deltas pass through untouched
    small = 0.1 * np.abs(x_hat) * np.sign(rng.normal(size=(10, 3)))
    assert np.array_equal(project_delta(small, x_hat, eps_max=2.0), small)


def test_project_delta_band_mask():
    rng = np.random.default_rng(1)
    x_hat = rng.normal(size=(12, 3))
    delta = rng.normal(size=(12, 3))
    out = project_delta(delta, x_hat, eps_max=5.0, band_mask=(3, 7))
    assert np.array_equal(out[:3], np.zeros((3, 3)))
    assert np.array_equal(out[7:], np.zeros((5, 3)))
    assert np.abs(out[3:7]).sum() > 0


def test_composite_loss_gradient_matches_fd(victim):
    model, clouds = victim
    clean = clouds[0]
    rng = np.random.default_rng(2)
    adv = clean.points + 0.01 * rng.normal(size=clean.points.shape)
    val, grad = adversarial_loss(model, adv, clean, clean.label, beta=2.0)

    def f(x):
        v, _ = adversarial_loss(model, x, clean, clean.label, beta=2.0)
        return v

    fd = central_diff(f, adv.copy(), h=1e-5)
    assert grad_agreement(grad, fd, floor=1e-5) < 1e-3


def test_untargeted_attack_succeeds(victim):
    model, clouds = victim
    res = gsda_attack(model, clouds[0], _fast_cfg())
    assert res.success
    assert res.predicted_label != clouds[0].label
    assert res.true_label == clouds[0].label
    assert res.target_label is None
    assert predict(model, res.adversarial) == res.predicted_label
    assert res.distortion.d_norm > 0


def test_attack_respects_spectral_bound(victim):
    model, clouds = victim
    cfg = _fast_cfg(eps_max=1.5)
    res = gsda_attack(model, clouds[0], cfg)
    basis = spectral_basis(clouds[0], cfg.k)
    x_hat = gft(basis, clouds[0].points)
    assert (np.abs(res.delta) <= 1.5 * np.abs(x_hat) + 1e-9).all()


def test_attack_band_mask_confines_perturbation(victim):
    model, clouds = victim
    n = clouds[0].n
    cfg = _fast_cfg(band_mask=(0, n // 4))
    res = gsda_attack(model, clouds[0], cfg)
    assert np.abs(res.delta[n // 4:]).max() == 0.0


def test_targeted_attack_result_fields(victim):
    model, clouds = victim
    cloud = clouds[1]
    target = (cloud.label + 1) % 8
    res = gsda_attack(model, cloud, _fast_cfg(mode="targeted"), target=target)
    assert res.target_label == target
    if res.success:
        assert res.predicted_label == target


def test_targeted_requires_distinct_target(victim):
    model, clouds = victim
    with pytest.raises(ValidationError):
        gsda_attack(model, clouds[0], _fast_cfg(mode="targeted"), target=clouds[0].label)
    with pytest.raises(ValidationError):
        gsda_attack(model, clouds[0], _fast_cfg(mode="targeted"))


def test_batch_matches_single(victim):
    model, clouds = victim
    cfg = _fast_cfg(iterations=40, binary_search_steps=2)
    batch = gsda_attack_batch(model, clouds[:3], cfg)
    for cloud, res in zip(clouds[:3], batch):
        solo = gsda_attack(model, cloud, cfg)
        assert res.success == solo.success
        assert res.predicted_label == solo.predicted_label
        assert np.allclose(res.adversarial.points, solo.adversarial.points, atol=1e-10)
        assert res.beta_used == pytest.approx(solo.beta_used)


def test_attack_is_deterministic(victim):
    model, clouds = victim
    cfg = _fast_cfg(iterations=30, binary_search_steps=2)
    r1 = gsda_attack(model, clouds[2], cfg)
    r2 = gsda_attack(model, clouds[2], cfg)
    assert np.array_equal(r1.adversarial.points, r2.adversarial.points)
    assert np.array_equal(r1.loss_trace, r2.loss_trace)


def test_xyz_baseline_respects_box_and_identity(victim):
    model, clouds = victim
    cfg = _fast_cfg(eps_xyz=0.08)
    res = xyz_baseline_attack(model, clouds[0], cfg)
    shift = res.adversarial.points - clouds[0].points
    assert (np.abs(shift) <= 0.08 + 1e-12).all()
    # result delta is the spectral image of the shift, so the energy
    # identity holds by construction
    assert res.distortion.d_norm == pytest.approx(res.distortion.e_delta, rel=1e-10)


def test_loss_trace_shape(victim):
    model, clouds = victim
    cfg = _fast_cfg(iterations=25, binary_search_steps=2)
    res = gsda_attack(model, clouds[0], cfg)
    # one row per evaluated iterate, across every binary-search round
    assert res.loss_trace.shape == (res.iterations_run, 2)
    assert res.iterations_run == 25 * 2
    assert np.isfinite(res.loss_trace).all()
