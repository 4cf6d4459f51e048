"""MC-dropout feed-forward regression surrogate in plain numpy.

ReLU hidden layers with inverted dropout after each activation, a linear
output unit, mean-squared-error loss on z-scored targets, and Adam updates.
At prediction time every stochastic pass draws one dropout mask per hidden
layer and applies it to the whole pool, so a pass is one coherent weight
sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import CandidatePool, InvalidInputError, ObservationSet

__all__ = [
    "NetworkArchitecture",
    "MinorHyperparams",
    "DropoutSurrogate",
    "PredictionEnsemble",
    "InsufficientDataError",
    "DivergenceError",
    "TrainingConfig",
    "init_params",
    "forward",
    "loss_and_grads",
    "train_bnn",
    "fit_arrays",
    "mc_predict",
    "mean_prediction",
    "save_surrogate",
    "load_surrogate",
]

CHECKPOINT_VERSION = 1
ACTIVATION = "relu"


class InsufficientDataError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True, order=True)
class NetworkArchitecture:
    layers: int = 1
    width: int = 256
    activation: str = ACTIVATION

    def __post_init__(self):
        if self.layers < 1 or self.width < 1:
            raise InvalidInputError("architecture needs layers >= 1 and width >= 1")
        if self.activation != ACTIVATION:
            raise InvalidInputError(f"unsupported activation {self.activation!r}")


@dataclass(frozen=True)
class MinorHyperparams:
    learning_rate: float = 1e-3
    dropout_rate: float = 0.05

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer settings shared by every training run."""

    epochs: int = 1000
    patience: int = 50
    min_improvement: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    full_batch_limit: int = 1024
    batch_size: int = 64


@dataclass
class DropoutSurrogate:
    architecture: NetworkArchitecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if np.any(self.x_scale <= 0) or self.y_scale <= 0:
            raise InvalidInputError("standardization scales must be positive")
        dims = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise InvalidInputError(f"layer {k} shapes are inconsistent")

    def standardize_x(self, x):
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_scale

    def standardize_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def destandardize_y(self, z):
        return np.asarray(z, dtype=float) * self.y_scale + self.y_mean

    def predict_deterministic(self, x) -> np.ndarray:
        """Forward pass with dropout disabled (every unit kept, no rescaling)."""
        out, _ = forward(self.weights, self.biases, self.standardize_x(x))
        return self.destandardize_y(out)


@dataclass(frozen=True)
class PredictionEnsemble:
    passes: np.ndarray
    mean: np.ndarray

    @classmethod
    def from_passes(cls, passes) -> "PredictionEnsemble":
        passes = np.atleast_2d(np.asarray(passes, dtype=float))
        if passes.shape[0] < 1:
            raise InvalidInputError("ensemble needs at least one pass")
        return cls(passes, passes.mean(axis=0))

    @property
    def M(self) -> int:
        return self.passes.shape[0]

    @property
    def n(self) -> int:
        return self.passes.shape[1]


def init_params(d: int, arch: NetworkArchitecture, rng: np.random.Generator):
    """He-normal weights, zero biases."""
    sizes = [d] + [arch.width] * arch.layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, x, masks=None):
    """Network output for standardized inputs ``x``.

    ``masks`` holds one array per hidden layer that multiplies that layer's
    activations (already scaled for inverted dropout); each may be
    ``(N, width)`` for per-sample masks or ``(width,)`` to share one mask.
    Returns ``(output, cache)`` with output of shape ``(N,)``.
    """
    a = x
    cache = [x]
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        if k == last:
            return z[:, 0], cache
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[k]
        cache.append((z, a))
    raise AssertionError("unreachable")


def loss_and_grads(weights, biases, x, y, masks=None):
    """Mean squared error and its gradients w.r.t. every weight and bias."""
    out, cache = forward(weights, biases, x, masks)
    n = x.shape[0]
    resid = out - y
    loss = float(np.mean(resid**2))
    delta = (2.0 / n) * resid[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for k in range(len(weights) - 1, -1, -1):
        a_prev = cache[0] if k == 0 else cache[k][1]
        gw[k] = a_prev.T @ delta
        gb[k] = delta.sum(axis=0)
        if k == 0:
            break
        z_prev, _ = cache[k]
        da = delta @ weights[k].T
        if masks is not None:
            da = da * masks[k - 1]
        delta = da * (z_prev > 0)
    return loss, gw, gb


def _dropout_masks(rng, rate, shape_rows, width, layers):
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    size = (width,) if shape_rows is None else (shape_rows, width)
    return [(rng.random(size) < keep) / keep for _ in range(layers)]


def _scale(v):
    s = np.std(v, axis=0)
    return np.where(s > 0, s, 1.0)


def fit_arrays(
    x,
    y,
    arch: NetworkArchitecture,
    minor: MinorHyperparams,
    seed: int,
    epochs: int | None = None,
    config: TrainingConfig = TrainingConfig(),
) -> DropoutSurrogate:
    """Train a fresh surrogate on raw arrays ``x`` (N, d) and ``y`` (N,)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {x.shape[0]}")
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError("x and y lengths differ")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("training data must be finite")
    epochs = config.epochs if epochs is None else epochs
    x_mean, x_scale = x.mean(axis=0), _scale(x)
    y_mean, y_scale = float(y.mean()), float(_scale(y))
    xs = (x - x_mean) / x_scale
    ys = (y - y_mean) / y_scale

    init_rng, mask_rng, order_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )
    weights, biases = init_params(x.shape[1], arch, init_rng)
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    lr, rate = minor.learning_rate, minor.dropout_rate
    b1, b2, eps = config.beta1, config.beta2, config.eps
    n = xs.shape[0]
    full = n <= config.full_batch_limit
    history: list[float] = []
    best = math.inf
    best_epoch = 0
    step = 0
    nw = len(weights)
    for epoch in range(epochs):
        if full:
            batches = [slice(None)]
        else:
            perm = order_rng.permutation(n)
            batches = [perm[i : i + config.batch_size] for i in range(0, n, config.batch_size)]
        total = 0.0
        for sel in batches:
            xb, yb = xs[sel], ys[sel]
            masks = _dropout_masks(mask_rng, rate, xb.shape[0], arch.width, arch.layers)
            loss, gw, gb = loss_and_grads(weights, biases, xb, yb, masks)
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            total += loss * xb.shape[0]
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for i, g in enumerate(gw + gb):
                m1[i] = b1 * m1[i] + (1 - b1) * g
                m2[i] = b2 * m2[i] + (1 - b2) * g * g
                upd = lr * (m1[i] / c1) / (np.sqrt(m2[i] / c2) + eps)
                if i < nw:
                    weights[i] -= upd
                else:
                    biases[i - nw] -= upd
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DivergenceError(epoch, epoch_loss)
        history.append(epoch_loss)
        if epoch_loss < best - config.min_improvement:
            best = epoch_loss
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    for w, b in zip(weights, biases):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DivergenceError(len(history) - 1, math.nan)
    return DropoutSurrogate(
        arch, weights, biases, rate, x_mean, x_scale, y_mean, y_scale, history
    )


def train_bnn(
    data: ObservationSet,
    pool: CandidatePool,
    arch: NetworkArchitecture,
    minor: MinorHyperparams,
    epochs: int | None = None,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
) -> DropoutSurrogate:
    """Train on the observed pool points; see :func:`fit_arrays`."""
    if len(data) < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {len(data)}")
    x, y = data.arrays(pool)
    return fit_arrays(x, y, arch, minor, seed, epochs, config)


def mc_predict(model: DropoutSurrogate, pool, M: int = 50, seed: int = 0) -> PredictionEnsemble:
    """``M`` stochastic forward passes over every pool point.

    ``pool`` may be a :class:`CandidatePool` or a raw ``(n, d)`` array.
    """
    if M < 1:
        raise InvalidInputError("M must be >= 1")
    pts = pool.points if isinstance(pool, CandidatePool) else np.atleast_2d(pool)
    xs = model.standardize_x(pts)
    rng = np.random.default_rng(seed)
    rate = model.dropout_rate
    keep = 1.0 - rate
    w, b = model.weights, model.biases
    width, layers = model.architecture.width, model.architecture.layers
    # first hidden activation does not depend on the mask
    a0 = np.maximum(xs @ w[0] + b[0], 0.0)
    if rate == 0.0:
        out, _ = forward(w[1:], b[1:], a0)
        passes = np.broadcast_to(out, (M, out.shape[0])).copy()
    else:
        masks = (rng.random((M, layers, width)) < keep) / keep
        if layers == 1:
            # all passes in one product: column j uses mask j on the output weights
            passes = (a0 @ (w[1][:, 0][:, None] * masks[:, 0, :].T)).T + b[1][0]
        else:
            passes = np.empty((M, xs.shape[0]))
            for j in range(M):
                a = a0 * masks[j, 0]
                for k in range(1, layers):
                    a = np.maximum(a @ w[k] + b[k], 0.0) * masks[j, k]
                passes[j] = (a @ w[-1] + b[-1])[:, 0]
    passes = model.destandardize_y(passes)
    return PredictionEnsemble(passes, passes.mean(axis=0))


def mean_prediction(ensemble: PredictionEnsemble) -> np.ndarray:
    return np.asarray(ensemble.passes).mean(axis=0)


def save_surrogate(model: DropoutSurrogate, path) -> None:
    header = {
        "format": "hdlse-surrogate",
        "version": CHECKPOINT_VERSION,
        "layers": model.architecture.layers,
        "width": model.architecture.width,
        "activation": model.architecture.activation,
        "dropout_rate": model.dropout_rate,
        "y_mean": model.y_mean,
        "y_scale": model.y_scale,
    }
    arrays = {"x_mean": model.x_mean, "x_scale": model.x_scale}
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{k}"] = w
        arrays[f"b{k}"] = b
    with Path(path).open("wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)


def load_surrogate(path) -> DropoutSurrogate:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("format") != "hdlse-surrogate":
            raise InvalidInputError(f"{path} is not a surrogate checkpoint")
        if header["version"] > CHECKPOINT_VERSION:
            raise InvalidInputError(f"checkpoint version {header['version']} is newer than supported")
        arch = NetworkArchitecture(header["layers"], header["width"], header["activation"])
        nl = arch.layers + 1
        weights = [z[f"w{k}"] for k in range(nl)]
        biases = [z[f"b{k}"] for k in range(nl)]
        return DropoutSurrogate(
            arch,
            weights,
            biases,
            header["dropout_rate"],
            z["x_mean"],
            z["x_scale"],
            header["y_mean"],
            header["y_scale"],
        )
