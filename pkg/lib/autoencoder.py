"""
Tied-weight autoencoders and greedily trained stacks of them.

The decoder of every layer is the transpose of its encoder; no API stores
or returns a separate decoder matrix.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from lib.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LAMBDA,
    DEFAULT_LR,
    DEFAULT_PRETRAIN_EPOCHS,
    DEFAULT_SEED,
)
from lib.errors import ConfigError, DataError, ShapeMismatchError, TrainingDivergedError
from lib.nn_core import (
    ActivationKind,
    LossKind,
    Params,
    activate,
    activation_grad,
    affine,
    as_matrix,
    frobenius_sq,
    glorot_uniform,
    loss,
    loss_grad,
    make_rng,
    sgd_step,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = DEFAULT_LR
    epochs: int = DEFAULT_PRETRAIN_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    lam: float = DEFAULT_LAMBDA
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        problems = []
        if not self.lr > 0:
            problems.append(f"lr must be positive, got {self.lr}")
        if int(self.epochs) < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lam < 0:
            problems.append(f"lambda must be nonnegative, got {self.lam}")
        if int(self.seed) < 0:
            problems.append(f"seed must be a nonnegative 64-bit integer, got {self.seed}")
        if problems:
            raise ConfigError(problems)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TiedAutoencoder:
    W: np.ndarray  # hidden x input
    b: np.ndarray
    b_prime: np.ndarray
    activation: ActivationKind = ActivationKind.SIGMOID
    lam: float = DEFAULT_LAMBDA
    loss_kind: LossKind = LossKind.SQUARED_ERROR

    def __post_init__(self) -> None:
        W = np.asarray(self.W, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        b_prime = np.asarray(self.b_prime, dtype=np.float64).reshape(-1)
        if W.ndim != 2:
            raise ShapeMismatchError("autoencoder weight", W.shape, ("hidden", "input"))
        if b.shape[0] != W.shape[0]:
            raise ShapeMismatchError("encoder bias", b.shape, (W.shape[0],))
        if b_prime.shape[0] != W.shape[1]:
            raise ShapeMismatchError("decoder bias", b_prime.shape, (W.shape[1],))
        if self.lam < 0:
            raise ConfigError(f"weight decay must be nonnegative, got {self.lam}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "b_prime", b_prime)
        object.__setattr__(self, "activation", ActivationKind(self.activation))
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[0]

    def params(self) -> Params:
        return {"W": self.W, "b": self.b, "b_prime": self.b_prime}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "TiedAutoencoder":
        return replace(self, W=params["W"], b=params["b"], b_prime=params["b_prime"])


@dataclass(frozen=True, eq=False)
class StackedEncoder:
    layers: tuple[TiedAutoencoder, ...]
    trained: bool = False
    history: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if not layers:
            raise ConfigError("a stacked encoder needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].input_dim != layers[i - 1].hidden_dim:
                raise ShapeMismatchError(
                    f"layer {i + 1} input", (layers[i].input_dim,), (layers[i - 1].hidden_dim,)
                )
        object.__setattr__(self, "layers", layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].input_dim] + [layer.hidden_dim for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def top_dim(self) -> int:
        return self.layers[-1].hidden_dim

    def params(self) -> Params:
        out: Params = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params().items():
                out[f"{i}.{name}"] = value
        return out

    def with_params(self, params: Mapping[str, np.ndarray]) -> "StackedEncoder":
        layers = tuple(
            layer.with_params({name: params[f"{i}.{name}"] for name in ("W", "b", "b_prime")})
            for i, layer in enumerate(self.layers)
        )
        return replace(self, layers=layers)


def init_autoencoder(
    input_dim: int,
    hidden_dim: int,
    seed: int,
    activation: ActivationKind = ActivationKind.SIGMOID,
    lam: float = DEFAULT_LAMBDA,
    loss_kind: LossKind = LossKind.SQUARED_ERROR,
) -> TiedAutoencoder:
    """Glorot-uniform weights, zero biases."""
    if hidden_dim > input_dim:
        warnings.warn(
            f"hidden dim {hidden_dim} exceeds input dim {input_dim}: expansion, not compression",
            UserWarning,
            stacklevel=2,
        )
    rng = make_rng(seed)
    return TiedAutoencoder(
        W=glorot_uniform(rng, hidden_dim, input_dim),
        b=np.zeros(hidden_dim),
        b_prime=np.zeros(input_dim),
        activation=activation,
        lam=lam,
        loss_kind=loss_kind,
    )


def _check_input(x: np.ndarray, expected_rows: int, what: str) -> np.ndarray:
    x = as_matrix(x, what)
    if x.shape[0] != expected_rows:
        raise ShapeMismatchError(what, x.shape, (expected_rows, x.shape[1]))
    return x


# Stack passes shared with the multimodal model

def stack_encode_trace(se: StackedEncoder, x: np.ndarray) -> list[np.ndarray]:
    """Activations ``[x, z_1, ..., z_N]`` of the encoder path."""
    acts = [x]
    for layer in se.layers:
        acts.append(activate(layer.activation, affine(layer.W, acts[-1], layer.b)))
    return acts


def stack_decode_trace(se: StackedEncoder, top: np.ndarray) -> list[np.ndarray]:
    """Activations ``[top, ..., reconstruction]`` unwinding the tied decoders."""
    acts = [top]
    for layer in reversed(se.layers):
        acts.append(activate(layer.activation, affine(layer.W.T, acts[-1], layer.b_prime)))
    return acts


def zero_grads(se: StackedEncoder) -> Params:
    return {name: np.zeros_like(value) for name, value in se.params().items()}


def encoder_backward(se: StackedEncoder, acts: Sequence[np.ndarray], d_top: np.ndarray, grads: Params) -> np.ndarray:
    """Accumulate encoder-role gradients into `grads`; return dL/dx."""
    d = d_top
    for i in reversed(range(len(se.layers))):
        layer = se.layers[i]
        delta = d * activation_grad(layer.activation, acts[i + 1])
        grads[f"{i}.W"] += delta @ acts[i].T
        grads[f"{i}.b"] += delta.sum(axis=1)
        d = layer.W.T @ delta
    return d


def decoder_backward(se: StackedEncoder, acts: Sequence[np.ndarray], d_out: np.ndarray, grads: Params) -> np.ndarray:
    """Accumulate decoder-role (transposed) gradients into `grads`; return dL/dtop."""
    d = d_out
    depth = len(se.layers)
    for k in reversed(range(depth)):
        i = depth - 1 - k
        layer = se.layers[i]
        delta = d * activation_grad(layer.activation, acts[k + 1])
        grads[f"{i}.W"] += acts[k] @ delta.T
        grads[f"{i}.b_prime"] += delta.sum(axis=1)
        d = layer.W @ delta
    return d


def stack_decay(se: StackedEncoder) -> float:
    return sum(layer.lam * frobenius_sq(layer.W) for layer in se.layers)


def add_decay_grads(se: StackedEncoder, grads: Params) -> None:
    for i, layer in enumerate(se.layers):
        grads[f"{i}.W"] += 2.0 * layer.lam * layer.W


# Single autoencoder

def ae_forward(ae: TiedAutoencoder, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = _check_input(x, ae.input_dim, "autoencoder input")
    h = activate(ae.activation, affine(ae.W, x, ae.b))
    r = activate(ae.activation, affine(ae.W.T, h, ae.b_prime))
    return h, r


def ae_objective(ae: TiedAutoencoder, x: np.ndarray) -> float:
    """Reconstruction loss plus ``lam * ||W||_F^2``."""
    _, r = ae_forward(ae, x)
    return loss(ae.loss_kind, np.asarray(x, dtype=np.float64), r) + ae.lam * frobenius_sq(ae.W)


def _ae_value_and_grad(ae: TiedAutoencoder, x: np.ndarray) -> tuple[float, Params]:
    x = _check_input(x, ae.input_dim, "autoencoder input")
    se = StackedEncoder((ae,))
    acts = stack_encode_trace(se, x)
    dec = stack_decode_trace(se, acts[-1])
    r = dec[-1]
    value = loss(ae.loss_kind, x, r) + ae.lam * frobenius_sq(ae.W)
    grads = zero_grads(se)
    d_top = decoder_backward(se, dec, loss_grad(ae.loss_kind, x, r), grads)
    encoder_backward(se, acts, d_top, grads)
    add_decay_grads(se, grads)
    return value, {"W": grads["0.W"], "b": grads["0.b"], "b_prime": grads["0.b_prime"]}


def ae_gradient(ae: TiedAutoencoder, x: np.ndarray) -> Params:
    """Analytic gradient of `ae_objective`; W collects encoder and decoder roles."""
    return _ae_value_and_grad(ae, x)[1]


def _all_finite(params: Mapping[str, np.ndarray]) -> bool:
    return all(np.all(np.isfinite(value)) for value in params.values())


def train_autoencoder(
    ae: TiedAutoencoder, x_train: np.ndarray, cfg: TrainConfig
) -> tuple[TiedAutoencoder, list[float]]:
    """Mini-batch gradient descent; returns the trained copy and per-epoch mean objective."""
    x = _check_input(x_train, ae.input_dim, "training data")
    n = x.shape[1]
    if n == 0:
        raise DataError("training data has no samples")
    ae = replace(ae, lam=cfg.lam)
    rng = make_rng(cfg.seed)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_values = []
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            xb = x[:, order[start:start + cfg.batch_size]]
            value, grads = _ae_value_and_grad(ae, xb)
            if not np.isfinite(value) or not _all_finite(grads):
                raise TrainingDivergedError(epoch, batch_idx, value)
            params = sgd_step(ae.params(), grads, cfg.lr)
            if not _all_finite(params):
                raise TrainingDivergedError(epoch, batch_idx, float("nan"))
            ae = ae.with_params(params)
            batch_values.append(value)
            logger.debug("epoch %d batch %d objective %.6g", epoch, batch_idx, value)
        history.append(float(np.mean(batch_values)))
        logger.info("epoch %d/%d objective %.6g", epoch + 1, cfg.epochs, history[-1])
    return ae, history


# Stacks

def greedy_pretrain(
    dims: Sequence[int],
    x_train: np.ndarray,
    cfg: TrainConfig,
    activation: ActivationKind = ActivationKind.SIGMOID,
    loss_kind: LossKind = LossKind.SQUARED_ERROR,
) -> StackedEncoder:
    """Train layer 1 on the data, layer 2 on layer 1's codes, and so on.

    Layer i (0-based) is initialised and shuffled with seed ``cfg.seed + i``,
    so a single-layer stack matches `train_autoencoder` with the same seed.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ConfigError(f"need at least an input and one hidden dim, got {dims}")
    inputs = _check_input(x_train, dims[0], "training data")
    layers: list[TiedAutoencoder] = []
    histories: list[tuple[float, ...]] = []
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        layer_cfg = replace(cfg, seed=cfg.seed + i)
        ae = init_autoencoder(d_in, d_out, layer_cfg.seed, activation, cfg.lam, loss_kind)
        logger.info("pretraining layer %d: %d -> %d", i + 1, d_in, d_out)
        try:
            ae, history = train_autoencoder(ae, inputs, layer_cfg)
        except TrainingDivergedError as err:
            raise err.tagged(f"layer {i + 1}") from err
        layers.append(ae)
        histories.append(tuple(history))
        inputs, _ = ae_forward(ae, inputs)
    return StackedEncoder(tuple(layers), trained=True, history=tuple(histories))


def stack_forward(se: StackedEncoder, x: np.ndarray) -> np.ndarray:
    """Top-layer representation ``z_N``."""
    x = _check_input(x, se.input_dim, "stack input")
    return stack_encode_trace(se, x)[-1]


def stack_reconstruct(se: StackedEncoder, x: np.ndarray) -> np.ndarray:
    x = _check_input(x, se.input_dim, "stack input")
    return stack_decode_trace(se, stack_encode_trace(se, x)[-1])[-1]
