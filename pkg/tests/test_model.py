import numpy as np
import pytest

from oracles import central_diff, grad_agreement, relu_kink_margin

from gsda.cloud import PointCloud
from gsda.errors import ParseError, ValidationError, VersionMismatchError
from gsda.model import (
    ModelConfig,
    TrainConfig,
    evaluate,
    forward,
    forward_batch,
    grad_input,
    init_model,
    load_model,
    predict,
    save_model,
    train,
)
from gsda.shapes import gen_dataset


def _tiny_model(num_classes=4, seed=0):
    return init_model(
        ModelConfig(
            num_classes=num_classes,
            point_mlp_widths=(8, 12),
            head_widths=(6, num_classes),
            seed=seed,
        )
    )


def test_config_validation():
    with pytest.raises(ValidationError):
        ModelConfig(num_classes=1)
    with pytest.raises(ValidationError):
        ModelConfig(num_classes=4, head_widths=(16, 5))
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0)


def test_init_deterministic():
    a = _tiny_model(seed=3)
    b = _tiny_model(seed=3)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa, pb)
    c = _tiny_model(seed=4)
    assert any(
        not np.array_equal(pa, pc)
        for pa, pc in zip(a.parameters(), c.parameters())
    )


def test_forward_batch_is_per_cloud_independent():
    model = _tiny_model()
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(5, 20, 3))
    batch = forward_batch(model, pts)
    for i in range(5):
        single = forward_batch(model, pts[i][None])[0]
        assert np.allclose(batch[i], single, atol=1e-12)


def test_forward_is_permutation_invariant():
    model = _tiny_model()
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(30, 3))
    logits1, _ = forward(model, pts)
    logits2, _ = forward(model, pts[rng.permutation(30)])
    assert np.allclose(logits1, logits2, atol=1e-12)


def test_probs_normalized():
    model = _tiny_model()
    _, probs = forward(model, np.random.default_rng(3).normal(size=(10, 3)))
    assert probs.sum() == pytest.approx(1.0)
    assert (probs > 0).all()


@pytest.mark.parametrize("mode", ["untargeted", "targeted"])
def test_input_gradient_matches_fd(mode):
    rng = np.random.default_rng(10)
    model = _tiny_model(seed=5)
    trial = 0
    checked = 0
    # reject instances whose forward pass sits within ~10x the FD probe
    # of a ReLU or max-pool tie; the two-sided stencil is meaningless
    # across such a kink
    while checked < 3 and trial < 100:
        trial += 1
        pts = rng.normal(size=(12, 3))
        if relu_kink_margin(model, pts) < 1e-4:
            continue
        cloud = PointCloud(pts)
        loss, grad = grad_input(model, cloud, 1, mode=mode)

        def f(x):
            val, _ = grad_input(model, PointCloud(x), 1, mode=mode)
            return val

        fd = central_diff(f, pts.copy(), h=1e-5)
        assert grad_agreement(grad, fd) < 1e-4
        checked += 1
    assert checked == 3


def test_train_improves_and_is_deterministic():
    ds = gen_dataset(
        classes=["sphere", "cube", "cylinder", "cone"],
        per_class=8, n_points=48, seed=1, jitter_sigma=0.04,
    )
    cfg = TrainConfig(epochs=60, batch_size=16, learning_rate=3e-3, seed=0)
    m1 = init_model(ModelConfig(num_classes=4, point_mlp_widths=(16, 24), head_widths=(16, 4), seed=0))
    m2 = init_model(ModelConfig(num_classes=4, point_mlp_widths=(16, 24), head_widths=(16, 4), seed=0))
    m1, hist1 = train(m1, ds, cfg)
    m2, hist2 = train(m2, ds, cfg)
    for pa, pb in zip(m1.parameters(), m2.parameters()):
        assert np.array_equal(pa, pb)
    assert hist1[-1]["train_loss"] == hist2[-1]["train_loss"]
    assert hist1[-1]["train_loss"] < hist1[0]["train_loss"]
    # history accuracy is the during-epoch batch average; the post-hoc
    # evaluation should be at least as good once training has settled
    assert hist1[-1]["train_acc"] > 0.5
    assert evaluate(m1, ds.train) > 0.5


def test_save_load_roundtrip(tmp_path):
    model = _tiny_model(seed=7)
    path = str(tmp_path / "m.gsm")
    save_model(model, path)
    back = load_model(path)
    assert back.config.to_dict() == model.config.to_dict()
    for pa, pb in zip(model.parameters(), back.parameters()):
        assert np.array_equal(pa, pb)
    pts = np.random.default_rng(0).normal(size=(9, 3))
    assert predict(model, pts) == predict(back, pts)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.gsm"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(VersionMismatchError):
        load_model(str(path))


def test_load_rejects_truncation(tmp_path):
    model = _tiny_model()
    path = str(tmp_path / "m.gsm")
    save_model(model, path)
    with open(path, "rb") as fh:
        blob = fh.read()
    trunc = tmp_path / "trunc.gsm"
    trunc.write_bytes(blob[: len(blob) - 16])
    with pytest.raises(ParseError):
        load_model(str(trunc))
