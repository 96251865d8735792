"""Mini point-cloud classifier: shared per-point MLP, global max-pool,
fully connected head.  Forward, training, and analytic input gradients
are hand-rolled on numpy so the attack can pull exact gradients without
a deep-learning framework.

Gradient conventions: ReLU passes gradient only where the activation is
strictly positive; max-pool routes gradient to the lowest-index argmax
point per feature.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cloud import PointCloud, as_points
from .errors import (
    ConfigError,
    EmptyCloudError,
    ParseError,
    ValidationError,
    VersionMismatchError,
)

_MAGIC = b"GSDM"
_VERSION = 1
_LOG_FLOOR = 1e-12  # probability floor: keeps log-losses finite


@dataclass
class ModelConfig:
    num_classes: int
    point_mlp_widths: tuple = (64, 128, 256)
    head_widths: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        self.num_classes = int(self.num_classes)
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        self.point_mlp_widths = tuple(int(w) for w in self.point_mlp_widths)
        if self.head_widths is None:
            self.head_widths = (64, self.num_classes)
        self.head_widths = tuple(int(w) for w in self.head_widths)
        if not self.point_mlp_widths or not self.head_widths:
            raise ConfigError("width lists must be non-empty")
        for w in self.point_mlp_widths + self.head_widths:
            if w < 1:
                raise ConfigError("layer widths must be >= 1, got %d" % w)
        if self.head_widths[-1] != self.num_classes:
            raise ConfigError(
                "final head width %d must equal num_classes %d"
                % (self.head_widths[-1], self.num_classes)
            )

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "point_mlp_widths": list(self.point_mlp_widths),
            "head_widths": list(self.head_widths),
            "seed": self.seed,
        }


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")


@dataclass
class ClassifierModel:
    """Weights per layer: ``point_layers`` then ``head_layers``, each a
    [W (fan_in, fan_out), b (fan_out,)] pair."""

    config: ModelConfig
    point_layers: list = field(default_factory=list)
    head_layers: list = field(default_factory=list)

    def parameters(self):
        """All weight arrays in a fixed, stable order."""
        for w, b in self.point_layers + self.head_layers:
            yield w
            yield b

    @property
    def num_classes(self) -> int:
        return self.config.num_classes


def init_model(config: ModelConfig) -> ClassifierModel:
    """Scaled-uniform fan-in initialization, deterministic given seed."""
    rng = np.random.default_rng(config.seed)

    def layer(fan_in, fan_out):
        s = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-s, s, size=(fan_in, fan_out))
        b = rng.uniform(-s, s, size=fan_out)
        return [w, b]

    point_layers, head_layers = [], []
    fan_in = 3
    for w_out in config.point_mlp_widths:
        point_layers.append(layer(fan_in, w_out))
        fan_in = w_out
    for w_out in config.head_widths:
        head_layers.append(layer(fan_in, w_out))
        fan_in = w_out
    return ClassifierModel(
        config=config, point_layers=point_layers, head_layers=head_layers
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_stack(model: ClassifierModel, pts: np.ndarray):
    """Forward pass keeping every activation; pts is (B, n, 3)."""
    B, n, _ = pts.shape
    h = pts.reshape(B * n, 3)
    point_acts = []
    for w, b in model.point_layers:
        h = h @ w + b
        np.maximum(h, 0.0, out=h)
        point_acts.append(h)
    pooled, am = kernels.maxpool_forward(h.reshape(B, n, -1))
    head_acts = []
    z = pooled
    for i, (w, b) in enumerate(model.head_layers):
        z = z @ w + b
        if i < len(model.head_layers) - 1:
            np.maximum(z, 0.0, out=z)
        head_acts.append(z)
    return point_acts, pooled, am, head_acts


def forward_batch(model: ClassifierModel, pts: np.ndarray) -> np.ndarray:
    """Logits for a (B, n, 3) stack of same-size clouds."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[2] != 3:
        raise ValidationError("expected (B, n, 3) points, got %r" % (pts.shape,))
    return _forward_stack(model, pts)[3][-1]


def forward(model: ClassifierModel, cloud) -> tuple[np.ndarray, np.ndarray]:
    """Logits and softmax probabilities for one cloud."""
    pts = as_points(cloud)
    logits = forward_batch(model, pts[None])[0]
    return logits, _softmax(logits)


def predict(model: ClassifierModel, cloud) -> int:
    logits, _ = forward(model, cloud)
    return int(logits.argmax())


def evaluate(model: ClassifierModel, clouds) -> float:
    """Accuracy over labeled clouds (clouds may differ in size)."""
    if not clouds:
        raise EmptyCloudError("no clouds to evaluate")
    by_n = {}
    for i, c in enumerate(clouds):
        by_n.setdefault(c.n, []).append(i)
    hits = 0
    for idx in by_n.values():
        pts = np.stack([clouds[i].points for i in idx])
        pred = forward_batch(model, pts).argmax(axis=1)
        hits += sum(int(pred[j]) == clouds[i].label for j, i in enumerate(idx))
    return hits / len(clouds)


class GradWorkspace:
    """Preallocated buffers for repeated fixed-shape input-gradient calls.

    The attack loop calls ``class_loss_grad`` thousands of times with the
    same (B, n); reusing buffers keeps the hot path allocation-free apart
    from what the kernels return.
    """

    def __init__(self, model: ClassifierModel, batch: int, n: int):
        self.model = model
        self.batch = batch
        self.n = n
        rows = batch * n
        self.h = [np.empty((rows, w)) for w in model.config.point_mlp_widths]
        self.dh = [np.empty_like(a) for a in self.h[:-1]]
        self.z = [np.empty((batch, w)) for w in model.config.head_widths]
        self.dz = [np.empty_like(a) for a in self.z[:-1]]
        self.dpts = np.empty((rows, 3))
        self.dlogits = np.empty((batch, model.num_classes))
        # transposed last point-layer weights, contiguous for the kernel
        self.wt_last = np.ascontiguousarray(model.point_layers[-1][0].T)

    def class_loss_grad(self, pts: np.ndarray, labels: np.ndarray, targeted: bool):
        """Per-cloud class loss and its gradient w.r.t. the coordinates.

        Targeted: loss = -log p[label] (label is the attack target).
        Untargeted: loss = +log p[label] (label is the true class).
        Returns (logits (B,c), loss (B,), grad (B,n,3)); loss values are
        floored so a vanishing probability cannot produce an infinity,
        the gradient is the exact softmax expression either way.
        """
        model, B, n = self.model, self.batch, self.n
        h = pts.reshape(B * n, 3)
        for i, (w, b) in enumerate(model.point_layers):
            np.matmul(h, w, out=self.h[i])
            self.h[i] += b
            np.maximum(self.h[i], 0.0, out=self.h[i])
            h = self.h[i]
        pooled, am = kernels.maxpool_forward(h.reshape(B, n, -1))
        z = pooled
        n_head = len(model.head_layers)
        for i, (w, b) in enumerate(model.head_layers):
            np.matmul(z, w, out=self.z[i])
            self.z[i] += b
            if i < n_head - 1:
                np.maximum(self.z[i], 0.0, out=self.z[i])
            z = self.z[i]
        logits = self.z[-1]
        probs = _softmax(logits)
        rows = np.arange(B)
        p_label = probs[rows, labels]
        logp = np.log(np.maximum(p_label, _LOG_FLOOR))
        onehot_minus_p = -probs
        onehot_minus_p[rows, labels] += 1.0
        if targeted:
            loss = -logp
            np.negative(onehot_minus_p, out=self.dlogits)
        else:
            loss = logp
            self.dlogits[...] = onehot_minus_p
        # head backward
        d = self.dlogits
        for i in range(n_head - 1, 0, -1):
            w = model.head_layers[i][0]
            np.matmul(d, w.T, out=self.dz[i - 1])
            np.multiply(self.dz[i - 1], self.z[i - 1] > 0.0, out=self.dz[i - 1])
            d = self.dz[i - 1]
        dpool = d @ model.head_layers[0][0].T
        # pool + last point layer backward, fused scatter-matmul
        np.multiply(dpool, pooled > 0.0, out=dpool)
        dprev = kernels.pool_backward_matmul(dpool, am, self.wt_last, n)
        n_point = len(model.point_layers)
        if n_point == 1:
            dp = dprev.reshape(B * n, 3)
        else:
            d2 = dprev.reshape(B * n, -1)
            np.multiply(d2, self.h[n_point - 2] > 0.0, out=self.dh[n_point - 2])
            for i in range(n_point - 2, 0, -1):
                w = model.point_layers[i][0]
                np.matmul(self.dh[i], w.T, out=self.dh[i - 1])
                np.multiply(self.dh[i - 1], self.h[i - 1] > 0.0, out=self.dh[i - 1])
            np.matmul(self.dh[0], model.point_layers[0][0].T, out=self.dpts)
            dp = self.dpts
        return logits.copy(), loss, dp.reshape(B, n, 3).copy()


def grad_input(model: ClassifierModel, cloud, label: int, mode: str = "untargeted"):
    """Class loss and its n-by-3 input gradient for one cloud.

    In targeted mode ``label`` is the attack target y'; in untargeted
    mode it is the true class y.
    """
    if mode not in ("targeted", "untargeted"):
        raise ValidationError("mode must be 'targeted' or 'untargeted'")
    pts = as_points(cloud)
    label = int(label)
    if not 0 <= label < model.num_classes:
        raise ValidationError(
            "label %d out of range for %d classes" % (label, model.num_classes)
        )
    ws = GradWorkspace(model, 1, pts.shape[0])
    _, loss, grad = ws.class_loss_grad(
        pts[None], np.array([label]), targeted=(mode == "targeted")
    )
    return float(loss[0]), grad[0]


def _train_backward(model, pts, labels):
    """Mean cross-entropy over the batch, plus gradients for every
    parameter (same fixed order as model.parameters())."""
    B, n, _ = pts.shape
    point_acts, pooled, am, head_acts = _forward_stack(model, pts)
    probs = _softmax(head_acts[-1])
    rows = np.arange(B)
    loss = float(
        -np.log(np.maximum(probs[rows, labels], _LOG_FLOOR)).mean()
    )
    d = probs.copy()
    d[rows, labels] -= 1.0
    d /= B
    grads = {}
    n_head = len(model.head_layers)
    for i in range(n_head - 1, -1, -1):
        inp = head_acts[i - 1] if i > 0 else pooled
        grads[("head", i)] = (inp.T @ d, d.sum(axis=0))
        d = d @ model.head_layers[i][0].T
        if i > 0:
            d *= head_acts[i - 1] > 0.0
    # through the pool: scatter pooled gradient back to argmax points
    d *= pooled > 0.0
    F = d.shape[1]
    dh = np.zeros((B, n, F))
    np.put_along_axis(dh, am[:, None, :], d[:, None, :], axis=1)
    d = dh.reshape(B * n, F)
    n_point = len(model.point_layers)
    for i in range(n_point - 1, -1, -1):
        inp = point_acts[i - 1] if i > 0 else pts.reshape(B * n, 3)
        grads[("point", i)] = (inp.T @ d, d.sum(axis=0))
        if i > 0:
            d = d @ model.point_layers[i][0].T
            d *= point_acts[i - 1] > 0.0
    acc = float((probs.argmax(axis=1) == labels).mean())
    flat = []
    for i in range(n_point):
        flat.extend(grads[("point", i)])
    for i in range(n_head):
        flat.extend(grads[("head", i)])
    return loss, acc, flat


def train(model: ClassifierModel, dataset, config: TrainConfig):
    """Mini-batch Adam on cross-entropy; deterministic given config.seed.

    Returns (model, history) where history has one row per epoch with
    train loss/accuracy and test accuracy.
    """
    train_clouds = list(dataset.train)
    if not train_clouds:
        raise EmptyCloudError("training set is empty")
    for c in train_clouds:
        if c.label is None or not 0 <= c.label < model.num_classes:
            raise ValidationError("training cloud with missing/out-of-range label")
    x = np.stack([c.points for c in train_clouds])
    y = np.array([c.label for c in train_clouds], dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    params = list(model.parameters())
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_clouds))
        losses, accs = [], []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, acc, grads = _train_backward(model, x[batch], y[batch])
            if config.weight_decay:
                # L2 on weight matrices only, not biases
                for i in range(0, len(grads), 2):
                    grads[i] = grads[i] + config.weight_decay * params[i]
            t += 1
            corr1 = 1.0 - beta1**t
            corr2 = 1.0 - beta2**t
            for p, g, m, v in zip(params, grads, m_state, v_state):
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * (g * g)
                p -= config.learning_rate * (m / corr1) / (
                    np.sqrt(v / corr2) + eps
                )
            losses.append(loss)
            accs.append(acc)
        row = {
            "epoch": epoch + 1,
            "train_loss": float(np.mean(losses)),
            "train_acc": float(np.mean(accs)),
        }
        if dataset.test:
            row["test_acc"] = evaluate(model, dataset.test)
        history.append(row)
    return model, history


def save_model(model: ClassifierModel, path: str) -> None:
    """Versioned binary: magic, version, length-prefixed JSON config,
    then every parameter as little-endian float64 in parameter order."""
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        for p in model.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path: str) -> ClassifierModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:4] != _MAGIC:
        raise VersionMismatchError("%s: not a model file (bad magic)" % path)
    (version,) = struct.unpack("<H", blob[4:6])
    if version != _VERSION:
        raise VersionMismatchError(
            "%s: unsupported model version %d" % (path, version)
        )
    (cfg_len,) = struct.unpack("<I", blob[6:10])
    if len(blob) < 10 + cfg_len:
        raise ParseError("%s: truncated config block" % path)
    try:
        cfg_dict = json.loads(blob[10 : 10 + cfg_len].decode("utf-8"))
        config = ModelConfig(
            num_classes=cfg_dict["num_classes"],
            point_mlp_widths=tuple(cfg_dict["point_mlp_widths"]),
            head_widths=tuple(cfg_dict["head_widths"]),
            seed=cfg_dict.get("seed", 0),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError("%s: bad config block (%s)" % (path, exc)) from exc
    model = init_model(config)
    payload = blob[10 + cfg_len :]
    expect = sum(p.size for p in model.parameters()) * 8
    if len(payload) != expect:
        raise ParseError(
            "%s: weight payload is %d bytes, expected %d"
            % (path, len(payload), expect)
        )
    offset = 0
    for p in model.parameters():
        nbytes = p.size * 8
        vals = np.frombuffer(payload, dtype="<f8", count=p.size, offset=offset)
        p[...] = vals.reshape(p.shape)
        offset += nbytes
    if not all(np.all(np.isfinite(p)) for p in model.parameters()):
        raise ParseError("%s: non-finite weights" % path)
    return model
