"""Tied-weight autoencoder with a sigmoid classification head.

Encoder: h = tanh(W_enc x + b_enc). Decoder: x' = W_enc^T h + b_dec - the
decoder weight is never stored, it is the encoder transpose by construction.
Head: p = sigmoid(W_slp h + b_slp), predicted label 1 iff p >= 0.5.

Training is seeded mini-batch gradient descent with momentum in two phases:
a joint phase on reconstruction + classification loss over all parameters,
then a fine-tune phase on the classification loss updating only the head
while the autoencoder stays frozen. All gradients are closed-form; no
autodiff framework is involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .connectivity import FeatureMask

CHECKPOINT_FORMAT_VERSION = 1

Mode = Literal["joint", "finetune"]


def sigmoid(z):
    """Numerically stable logistic function for scalars or arrays."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out if out.ndim else float(out)


def _bce_from_logit(z, y):
    # max(z,0) - z*y + log1p(exp(-|z|)) avoids overflow for large |z|
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


@dataclass
class ModelParams:
    """Trainable parameters. The decoder weight is ``W_enc.T``, never stored."""

    W_enc: np.ndarray  # (d_h, d_in)
    b_enc: np.ndarray  # (d_h,)
    b_dec: np.ndarray  # (d_in,)
    W_slp: np.ndarray  # (1, d_h)
    b_slp: float

    def __post_init__(self) -> None:
        self.W_enc = np.ascontiguousarray(self.W_enc, dtype=np.float64)
        self.b_enc = np.ascontiguousarray(self.b_enc, dtype=np.float64)
        self.b_dec = np.ascontiguousarray(self.b_dec, dtype=np.float64)
        self.W_slp = np.ascontiguousarray(self.W_slp, dtype=np.float64)
        self.b_slp = float(self.b_slp)
        d_h, d_in = self.W_enc.shape
        if self.b_enc.shape != (d_h,):
            raise ValueError(f"b_enc shape {self.b_enc.shape}, expected ({d_h},)")
        if self.b_dec.shape != (d_in,):
            raise ValueError(f"b_dec shape {self.b_dec.shape}, expected ({d_in},)")
        if self.W_slp.shape != (1, d_h):
            raise ValueError(f"W_slp shape {self.W_slp.shape}, expected (1, {d_h})")

    @property
    def d_in(self) -> int:
        return self.W_enc.shape[1]

    @property
    def d_h(self) -> int:
        return self.W_enc.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.W_enc.copy(),
            self.b_enc.copy(),
            self.b_dec.copy(),
            self.W_slp.copy(),
            self.b_slp,
        )


@dataclass(frozen=True)
class TrainConfig:
    joint_epochs: int = 25
    finetune_epochs: int = 5
    batch_size: int = 8
    learning_rate: float = 1e-4
    bottleneck_dim: int | None = None  # None resolves to d_in // 2
    momentum: float = 0.9
    loss_weights: tuple[float, float] = (1.0, 1.0)  # (reconstruction, classification)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.joint_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.bottleneck_dim is not None and self.bottleneck_dim < 1:
            raise ValueError(
                f"bottleneck_dim must be >= 1, got {self.bottleneck_dim}"
            )
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if len(self.loss_weights) != 2 or any(w < 0 for w in self.loss_weights):
            raise ValueError("loss_weights must be two non-negative numbers")


@dataclass
class Gradients:
    W_enc: np.ndarray
    b_enc: np.ndarray
    b_dec: np.ndarray
    W_slp: np.ndarray
    b_slp: float


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    joint_loss_per_epoch: np.ndarray  # mean total loss per joint epoch
    finetune_loss_per_epoch: np.ndarray  # mean classification loss per epoch


def init_params(d_in: int, d_h: int, rng: np.random.Generator) -> ModelParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases. Draw order: W_enc, W_slp."""
    if d_in < 1 or d_h < 1:
        raise ValueError(f"need d_in >= 1 and d_h >= 1, got {d_in}, {d_h}")
    lim_enc = 1.0 / math.sqrt(d_in)
    lim_slp = 1.0 / math.sqrt(d_h)
    W_enc = rng.uniform(-lim_enc, lim_enc, size=(d_h, d_in))
    W_slp = rng.uniform(-lim_slp, lim_slp, size=(1, d_h))
    return ModelParams(W_enc, np.zeros(d_h), np.zeros(d_in), W_slp, 0.0)


def decode(W_dec: np.ndarray, h: np.ndarray, b_dec: np.ndarray) -> np.ndarray:
    """Apply a (d_in, d_h) decoder weight to hidden activations.

    The layout canonicalisation keeps the underlying matmul call identical
    whether the caller passes the tied transposed view (no copy is made) or
    a materialised decoder matrix, so both routes agree bitwise.
    """
    weight = np.ascontiguousarray(W_dec.T)  # (d_h, d_in)
    hidden = np.atleast_2d(np.asarray(h, dtype=np.float64))
    out = hidden @ weight + b_dec
    return out[0] if np.asarray(h).ndim == 1 else out


def _forward_batch(params: ModelParams, X: np.ndarray):
    H = np.tanh(X @ params.W_enc.T + params.b_enc)
    X_recon = decode(params.W_enc.T, H, params.b_dec)
    logits = H @ params.W_slp[0] + params.b_slp
    return H, X_recon, logits


def forward(params: ModelParams, x) -> tuple[np.ndarray, np.ndarray, float]:
    """Hidden code, reconstruction, and class-1 probability for one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.d_in:
        raise ValueError(f"input shape {x.shape}, expected ({params.d_in},)")
    H, X_recon, logits = _forward_batch(params, x[None, :])
    return H[0], X_recon[0], float(sigmoid(logits[0]))


def loss(
    params: ModelParams,
    x,
    y: float,
    loss_weights: tuple[float, float] = (1.0, 1.0),
) -> tuple[float, float, float]:
    """(total, reconstruction, classification) loss for one sample.

    Reconstruction is mean squared error over input coordinates;
    classification is binary cross-entropy computed from the logit.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.d_in:
        raise ValueError(f"input shape {x.shape}, expected ({params.d_in},)")
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    H, X_recon, logits = _forward_batch(params, x[None, :])
    mse = float(np.mean((X_recon[0] - x) ** 2))
    bce = float(_bce_from_logit(logits[0], float(y)))
    w_rec, w_cls = loss_weights
    return w_rec * mse + w_cls * bce, mse, bce


def _batch_grads(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    mode: Mode,
    loss_weights: tuple[float, float],
):
    """Batch-mean gradients plus the (total, mse, bce) batch-mean losses."""
    n = X.shape[0]
    w_rec, w_cls = loss_weights
    H, X_recon, logits = _forward_batch(params, X)
    probs = sigmoid(logits)
    resid = X_recon - X
    mse = float(np.mean(np.mean(resid * resid, axis=1)))
    bce = float(np.mean(_bce_from_logit(logits, y)))
    total = w_rec * mse + w_cls * bce

    dz_cls = w_cls * (probs - y) / n  # (n,)
    g_W_slp = (dz_cls @ H)[None, :]
    g_b_slp = float(dz_cls.sum())

    if mode == "finetune":
        zeros_like = np.zeros_like
        grads = Gradients(
            zeros_like(params.W_enc),
            zeros_like(params.b_enc),
            zeros_like(params.b_dec),
            g_W_slp,
            g_b_slp,
        )
        return grads, total, mse, bce

    d_in = params.d_in
    delta_rec = (2.0 * w_rec / (d_in * n)) * resid  # (n, d_in)
    g_b_dec = delta_rec.sum(axis=0)
    g_W_dec_path = H.T @ delta_rec  # (d_h, d_in)
    dH = delta_rec @ params.W_enc.T + np.outer(dz_cls, params.W_slp[0])
    dZ = dH * (1.0 - H * H)
    g_W_enc_path = dZ.T @ X
    grads = Gradients(
        g_W_enc_path + g_W_dec_path,  # tied weight: encoder + decoder paths
        dZ.sum(axis=0),
        g_b_dec,
        g_W_slp,
        g_b_slp,
    )
    return grads, total, mse, bce


def gradients(
    params: ModelParams,
    X,
    y,
    mode: Mode = "joint",
    loss_weights: tuple[float, float] = (1.0, 1.0),
) -> Gradients:
    """Closed-form batch-mean gradients.

    In joint mode the objective is w_rec * mse + w_cls * bce over all
    parameters (the tied weight accumulates encoder- and decoder-path
    terms). In fine-tune mode only the head is trainable: autoencoder
    gradients are identically zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if X.shape[1] != params.d_in:
        raise ValueError(f"input has {X.shape[1]} features, expected {params.d_in}")
    if mode not in ("joint", "finetune"):
        raise ValueError(f"unknown mode {mode!r}")
    grads, _, _, _ = _batch_grads(params, X, y, mode, loss_weights)
    return grads


def train(
    features,
    labels,
    config: TrainConfig,
    step_callback: Callable[[str, int, int, ModelParams], None] | None = None,
) -> TrainResult:
    """Two-phase seeded training run.

    Weight initialisation and per-epoch shuffles come from one generator
    seeded with ``config.seed``, so identical inputs give bit-identical
    parameters. Momentum velocities reset at the phase boundary, and the
    fine-tune phase never touches autoencoder parameters. A non-finite
    batch loss aborts with the epoch, step, and learning rate named.

    ``step_callback(phase, epoch, step, params)`` runs after every
    parameter update.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    present = set(np.unique(y).tolist())
    if not present <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(present)}")
    if present != {0, 1}:
        raise ValueError("training set must contain both classes")
    n_samples, d_in = X.shape
    d_h = config.bottleneck_dim if config.bottleneck_dim is not None else d_in // 2
    if d_h < 1:
        raise ValueError(f"resolved bottleneck is {d_h}; need d_in >= 2 or explicit bottleneck_dim")

    rng = np.random.default_rng(config.seed)
    params = init_params(d_in, d_h, rng)
    yf = y.astype(np.float64)
    lr = config.learning_rate
    mu = config.momentum
    step = 0

    def run_phase(mode: Mode, n_epochs: int, trainable: tuple[str, ...]):
        nonlocal step
        velocity = {name: 0.0 for name in trainable}
        epoch_losses = []
        for epoch in range(n_epochs):
            order = rng.permutation(n_samples)
            batch_losses = []
            for start in range(0, n_samples, config.batch_size):
                idx = order[start : start + config.batch_size]
                grads, total, mse, bce = _batch_grads(
                    params, X[idx], yf[idx], mode, config.loss_weights
                )
                if not math.isfinite(total):
                    raise FloatingPointError(
                        f"non-finite loss {total!r} at {mode} epoch {epoch} "
                        f"step {step} (learning_rate={lr}); reduce the "
                        f"learning rate or rescale inputs"
                    )
                for name in trainable:
                    v = mu * velocity[name] - lr * getattr(grads, name)
                    velocity[name] = v
                    if name == "b_slp":
                        params.b_slp += v
                    else:
                        buf = getattr(params, name)
                        buf += v
                batch_losses.append(total if mode == "joint" else bce)
                step += 1
                if step_callback is not None:
                    step_callback(mode, epoch, step, params)
            epoch_losses.append(float(np.mean(batch_losses)))
        return epoch_losses

    joint_losses = run_phase(
        "joint", config.joint_epochs,
        ("W_enc", "b_enc", "b_dec", "W_slp", "b_slp"),
    )
    finetune_losses = run_phase(
        "finetune", config.finetune_epochs, ("W_slp", "b_slp")
    )
    return TrainResult(
        params, np.asarray(joint_losses), np.asarray(finetune_losses)
    )


def predict(params: ModelParams, x):
    """Label(s) and probability(ies); label 1 iff probability >= 0.5."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = np.atleast_2d(arr)
    if X.ndim != 2 or X.shape[1] != params.d_in:
        raise ValueError(f"input has shape {arr.shape}, model expects d_in={params.d_in}")
    _, _, logits = _forward_batch(params, X)
    probs = sigmoid(logits)
    labels = (probs >= 0.5).astype(np.int64)
    if single:
        return int(labels[0]), float(probs[0])
    return labels, probs


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    mask: FeatureMask,
    config_echo: dict | None = None,
) -> None:
    """JSON checkpoint: parameters (full precision), mask, config echo."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "d_in": params.d_in,
        "d_h": params.d_h,
        "W_enc": params.W_enc.ravel().tolist(),
        "b_enc": params.b_enc.tolist(),
        "b_dec": params.b_dec.tolist(),
        "W_slp": params.W_slp.ravel().tolist(),
        "b_slp": params.b_slp,
        "mask": mask.to_dict(),
        "config": config_echo or {},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, FeatureMask, dict]:
    """Inverse of save_checkpoint, with format and shape validation."""
    path = Path(path)
    doc = json.loads(path.read_text())
    if "format_version" not in doc:
        raise ValueError(f"{path}: missing format_version")
    if doc["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format_version {doc['format_version']!r}"
        )
    try:
        d_in = int(doc["d_in"])
        d_h = int(doc["d_h"])
        W_enc = np.asarray(doc["W_enc"], dtype=np.float64)
        b_enc = np.asarray(doc["b_enc"], dtype=np.float64)
        b_dec = np.asarray(doc["b_dec"], dtype=np.float64)
        W_slp = np.asarray(doc["W_slp"], dtype=np.float64)
        b_slp = float(doc["b_slp"])
        mask = FeatureMask.from_dict(doc["mask"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing checkpoint key {exc}") from None
    if W_enc.size != d_h * d_in:
        raise ValueError(
            f"{path}: W_enc has {W_enc.size} entries, expected {d_h}*{d_in}"
        )
    if W_slp.size != d_h:
        raise ValueError(f"{path}: W_slp has {W_slp.size} entries, expected {d_h}")
    params = ModelParams(
        W_enc.reshape(d_h, d_in), b_enc, b_dec, W_slp.reshape(1, d_h), b_slp
    )
    if len(mask) != d_in:
        raise ValueError(
            f"{path}: mask selects {len(mask)} features but d_in is {d_in}"
        )
    return params, mask, doc.get("config", {})
