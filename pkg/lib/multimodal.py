"""
Two-pathway multimodal autoencoder.

Each modality has its own stacked encoder; a joint layer sums the sigmoid
projections of both pathway tops into one shared code ``z``.  Decoding
mirrors the joint layer with the transposed joint weights and then unwinds
each pathway's tied decoders.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from lib.autoencoder import (
    StackedEncoder,
    TrainConfig,
    add_decay_grads,
    decoder_backward,
    encoder_backward,
    greedy_pretrain,
    init_autoencoder,
    stack_decay,
    stack_decode_trace,
    stack_encode_trace,
    zero_grads,
)
from lib.config import CLASS_LABELS, DEFAULT_LAMBDA, EEG, EMG, MODALITIES
from lib.errors import (
    DataError,
    DomainError,
    NotFittedError,
    ShapeMismatchError,
    TrainingDivergedError,
    UntrainedModelError,
)
from lib.nn_core import (
    ActivationKind,
    LossKind,
    Params,
    activate,
    activation_grad,
    affine,
    as_matrix,
    derive_seed,
    frobenius_sq,
    glorot_uniform,
    label_cross_entropy,
    loss,
    loss_grad,
    make_rng,
    one_hot,
    sgd_step,
    softmax,
)

logger = logging.getLogger(__name__)

_SIGMOID = ActivationKind.SIGMOID
_SE = LossKind.SQUARED_ERROR


@dataclass(frozen=True, eq=False)
class SoftmaxHead:
    W_s: np.ndarray  # classes x joint
    b_s: np.ndarray
    labels: tuple[str, ...] = CLASS_LABELS

    def __post_init__(self) -> None:
        W_s = np.asarray(self.W_s, dtype=np.float64)
        b_s = np.asarray(self.b_s, dtype=np.float64).reshape(-1)
        labels = tuple(str(label) for label in self.labels)
        if len(labels) < 2:
            raise DomainError(f"a softmax head needs at least 2 classes, got {len(labels)}")
        if W_s.shape[0] != len(labels) or b_s.shape[0] != len(labels):
            raise ShapeMismatchError("softmax head", W_s.shape, (len(labels), "joint"))
        object.__setattr__(self, "W_s", W_s)
        object.__setattr__(self, "b_s", b_s)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def params(self) -> Params:
        return {"W_s": self.W_s, "b_s": self.b_s}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "SoftmaxHead":
        return replace(self, W_s=params["W_s"], b_s=params["b_s"])


def init_head(joint_dim: int, seed: int, labels: Sequence[str] = CLASS_LABELS) -> SoftmaxHead:
    rng = make_rng(seed)
    return SoftmaxHead(glorot_uniform(rng, len(labels), joint_dim), np.zeros(len(labels)), tuple(labels))


@dataclass(frozen=True, eq=False)
class MultimodalBatch:
    eeg: np.ndarray
    emg: np.ndarray
    presence: np.ndarray  # samples x 2 flags (eeg_present, emg_present)

    def __post_init__(self) -> None:
        eeg = as_matrix(self.eeg, "eeg batch")
        emg = as_matrix(self.emg, "emg batch")
        presence = np.asarray(self.presence, dtype=bool).reshape(-1, 2)
        if eeg.shape[1] != emg.shape[1]:
            raise ShapeMismatchError("sample counts", (eeg.shape[1],), (emg.shape[1],))
        if presence.shape[0] != eeg.shape[1]:
            raise ShapeMismatchError("presence flags", presence.shape, (eeg.shape[1], 2))
        if np.any(eeg[:, ~presence[:, 0]]) or np.any(emg[:, ~presence[:, 1]]):
            raise DataError("absent modality columns must be exactly zero")
        object.__setattr__(self, "eeg", eeg)
        object.__setattr__(self, "emg", emg)
        object.__setattr__(self, "presence", presence)

    @classmethod
    def paired(cls, eeg: np.ndarray, emg: np.ndarray) -> "MultimodalBatch":
        """Batch with both modalities present for every sample."""
        n = np.shape(eeg)[1] if np.ndim(eeg) == 2 else 1
        return cls(eeg, emg, np.ones((n, 2), dtype=bool))

    @property
    def n_samples(self) -> int:
        return self.eeg.shape[1]

    def take(self, idx: np.ndarray) -> "MultimodalBatch":
        return MultimodalBatch(self.eeg[:, idx], self.emg[:, idx], self.presence[idx])

    def modality(self, name: str) -> np.ndarray:
        return self.eeg if name == EEG else self.emg

    def only(self, name: str) -> "MultimodalBatch":
        """Copy keeping one modality and zeroing the other."""
        keep_eeg = name == EEG
        eeg = self.eeg if keep_eeg else np.zeros_like(self.eeg)
        emg = self.emg if not keep_eeg else np.zeros_like(self.emg)
        presence = np.column_stack([self.presence[:, 0] & keep_eeg, self.presence[:, 1] & (not keep_eeg)])
        return MultimodalBatch(eeg, emg, presence)


@dataclass(frozen=True, eq=False)
class MultimodalModel:
    eeg_stack: StackedEncoder
    emg_stack: StackedEncoder
    joint_W_e: np.ndarray  # joint x eeg top
    joint_b_e: np.ndarray
    joint_c_e: np.ndarray  # decode bias for the eeg top
    joint_W_m: np.ndarray  # joint x emg top
    joint_b_m: np.ndarray
    joint_c_m: np.ndarray
    head: Optional[SoftmaxHead] = None
    lam: float = DEFAULT_LAMBDA
    trained: bool = False
    history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        for suffix, stack in (("e", self.eeg_stack), ("m", self.emg_stack)):
            W = np.asarray(getattr(self, f"joint_W_{suffix}"), dtype=np.float64)
            b = np.asarray(getattr(self, f"joint_b_{suffix}"), dtype=np.float64).reshape(-1)
            c = np.asarray(getattr(self, f"joint_c_{suffix}"), dtype=np.float64).reshape(-1)
            if W.ndim != 2 or W.shape[1] != stack.top_dim:
                raise ShapeMismatchError(f"joint_W_{suffix}", W.shape, ("joint", stack.top_dim))
            if b.shape[0] != W.shape[0] or c.shape[0] != stack.top_dim:
                raise ShapeMismatchError(f"joint biases ({suffix})", (b.shape[0], c.shape[0]), (W.shape[0], stack.top_dim))
            object.__setattr__(self, f"joint_W_{suffix}", W)
            object.__setattr__(self, f"joint_b_{suffix}", b)
            object.__setattr__(self, f"joint_c_{suffix}", c)
        if self.joint_W_e.shape[0] != self.joint_W_m.shape[0]:
            raise ShapeMismatchError("joint dims", self.joint_W_e.shape, self.joint_W_m.shape)
        if self.head is not None and self.head.W_s.shape[1] != self.joint_W_e.shape[0]:
            raise ShapeMismatchError("softmax head input", self.head.W_s.shape, ("classes", self.joint_W_e.shape[0]))

    @property
    def joint_dim(self) -> int:
        return self.joint_W_e.shape[0]

    @property
    def source_dims(self) -> tuple[int, int]:
        return self.eeg_stack.input_dim, self.emg_stack.input_dim

    def stack(self, name: str) -> StackedEncoder:
        return self.eeg_stack if name == EEG else self.emg_stack

    def params(self) -> Params:
        """All parameters in canonical (serialization) order."""
        out: Params = {}
        for name in MODALITIES:
            for key, value in self.stack(name).params().items():
                out[f"{name}.{key}"] = value
        for suffix in ("e", "m"):
            for part in ("W", "b", "c"):
                out[f"joint.{part}_{suffix}"] = getattr(self, f"joint_{part}_{suffix}")
        if self.head is not None:
            for key, value in self.head.params().items():
                out[f"head.{key}"] = value
        return out

    def with_params(self, params: Mapping[str, np.ndarray]) -> "MultimodalModel":
        stacks = {}
        for name in MODALITIES:
            prefix = f"{name}."
            stacks[name] = self.stack(name).with_params(
                {key[len(prefix):]: value for key, value in params.items() if key.startswith(prefix)}
            )
        joint = {
            f"joint_{part}_{suffix}": params[f"joint.{part}_{suffix}"]
            for suffix in ("e", "m")
            for part in ("W", "b", "c")
        }
        head = self.head
        if head is not None:
            head = head.with_params({"W_s": params["head.W_s"], "b_s": params["head.b_s"]})
        return replace(self, eeg_stack=stacks[EEG], emg_stack=stacks[EMG], head=head, **joint)


def init_multimodal(
    eeg_stack: StackedEncoder,
    emg_stack: StackedEncoder,
    joint_dim: int,
    seed: int,
    lam: float = DEFAULT_LAMBDA,
) -> MultimodalModel:
    """Attach a Glorot-initialised joint layer to two (pretrained) pathways."""
    if joint_dim > min(eeg_stack.top_dim, emg_stack.top_dim):
        warnings.warn(
            f"joint dim {joint_dim} exceeds a pathway top dim "
            f"({eeg_stack.top_dim}, {emg_stack.top_dim}): expansion, not compression",
            UserWarning,
            stacklevel=2,
        )
    rng_e = make_rng(derive_seed(seed, "joint.eeg"))
    rng_m = make_rng(derive_seed(seed, "joint.emg"))
    return MultimodalModel(
        eeg_stack=eeg_stack,
        emg_stack=emg_stack,
        joint_W_e=glorot_uniform(rng_e, joint_dim, eeg_stack.top_dim),
        joint_b_e=np.zeros(joint_dim),
        joint_c_e=np.zeros(eeg_stack.top_dim),
        joint_W_m=glorot_uniform(rng_m, joint_dim, emg_stack.top_dim),
        joint_b_m=np.zeros(joint_dim),
        joint_c_m=np.zeros(emg_stack.top_dim),
        lam=lam,
    )


def random_multimodal(
    eeg_dims: Sequence[int],
    emg_dims: Sequence[int],
    joint_dim: int,
    seed: int,
    n_classes: int = 0,
    lam: float = DEFAULT_LAMBDA,
) -> MultimodalModel:
    """Untrained model with randomly initialised pathways (tests, gradcheck)."""
    def _stack(dims: Sequence[int], label: str) -> StackedEncoder:
        layers = []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            ae = init_autoencoder(d_in, d_out, derive_seed(seed, f"{label}.{i}"), lam=lam)
            rng = make_rng(derive_seed(seed, f"{label}.{i}.bias"))
            layers.append(replace(ae, b=rng.normal(0, 0.1, d_out), b_prime=rng.normal(0, 0.1, d_in)))
        return StackedEncoder(tuple(layers))

    model = init_multimodal(_stack(eeg_dims, EEG), _stack(emg_dims, EMG), joint_dim, seed, lam)
    if n_classes:
        labels = tuple(f"class{k}" for k in range(n_classes))
        model = replace(model, head=init_head(joint_dim, derive_seed(seed, "head"), labels))
    return model


def _check_batch(model: MultimodalModel, batch: MultimodalBatch) -> None:
    if batch.eeg.shape[0] != model.eeg_stack.input_dim:
        raise ShapeMismatchError("eeg input", batch.eeg.shape, (model.eeg_stack.input_dim, batch.n_samples))
    if batch.emg.shape[0] != model.emg_stack.input_dim:
        raise ShapeMismatchError("emg input", batch.emg.shape, (model.emg_stack.input_dim, batch.n_samples))


def _joint_weights(model: MultimodalModel, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    suffix = "e" if name == EEG else "m"
    return (
        getattr(model, f"joint_W_{suffix}"),
        getattr(model, f"joint_b_{suffix}"),
        getattr(model, f"joint_c_{suffix}"),
    )


def _encode(model: MultimodalModel, batch: MultimodalBatch) -> tuple[dict, dict, np.ndarray]:
    enc_acts, joint_parts = {}, {}
    for name in MODALITIES:
        enc_acts[name] = stack_encode_trace(model.stack(name), batch.modality(name))
        W, b, _ = _joint_weights(model, name)
        joint_parts[name] = activate(_SIGMOID, affine(W, enc_acts[name][-1], b))
    return enc_acts, joint_parts, joint_parts[EEG] + joint_parts[EMG]


def _decode(model: MultimodalModel, z: np.ndarray) -> dict[str, list[np.ndarray]]:
    dec_acts = {}
    for name in MODALITIES:
        W, _, c = _joint_weights(model, name)
        top = activate(_SIGMOID, affine(W.T, z, c))
        dec_acts[name] = stack_decode_trace(model.stack(name), top)
    return dec_acts


def joint_forward(model: MultimodalModel, batch: MultimodalBatch) -> np.ndarray:
    """Shared code ``z``; every entry lies in (0, 2)."""
    _check_batch(model, batch)
    return _encode(model, batch)[2]


def multimodal_decode(model: MultimodalModel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = as_matrix(z, "joint code")
    if z.shape[0] != model.joint_dim:
        raise ShapeMismatchError("joint code", z.shape, (model.joint_dim, z.shape[1]))
    dec_acts = _decode(model, z)
    return dec_acts[EEG][-1], dec_acts[EMG][-1]


def augment_modality_dropout(batch: MultimodalBatch) -> tuple[MultimodalBatch, MultimodalBatch]:
    """Inputs ``[both | eeg only | emg only]`` with the clean batch tiled as targets."""
    if not np.all(batch.presence):
        raise DataError("modality dropout needs both modalities present in every sample")
    inputs = MultimodalBatch(
        np.hstack([batch.eeg, batch.eeg, np.zeros_like(batch.eeg)]),
        np.hstack([batch.emg, np.zeros_like(batch.emg), batch.emg]),
        np.vstack([batch.presence, batch.only(EEG).presence, batch.only(EMG).presence]),
    )
    targets = MultimodalBatch.paired(np.tile(batch.eeg, 3), np.tile(batch.emg, 3))
    return inputs, targets


def _value_and_grad(
    model: MultimodalModel,
    inputs: MultimodalBatch,
    targets: MultimodalBatch,
    labels: Optional[np.ndarray] = None,
) -> tuple[float, Params]:
    enc_acts, joint_parts, z = _encode(model, inputs)
    dec_acts = _decode(model, z)

    value = 0.0
    for name in MODALITIES:
        value += loss(_SE, targets.modality(name), dec_acts[name][-1])
        value += model.lam * (
            sum(frobenius_sq(layer.W) for layer in model.stack(name).layers)
            + frobenius_sq(_joint_weights(model, name)[0])
        )

    stack_grads = {name: zero_grads(model.stack(name)) for name in MODALITIES}
    joint_grads: Params = {}
    dz = np.zeros_like(z)
    for name in MODALITIES:
        stack = model.stack(name)
        W, _, _ = _joint_weights(model, name)
        recon = dec_acts[name][-1]
        d_top = decoder_backward(stack, dec_acts[name], loss_grad(_SE, targets.modality(name), recon), stack_grads[name])
        delta = d_top * activation_grad(_SIGMOID, dec_acts[name][0])
        suffix = "e" if name == EEG else "m"
        joint_grads[f"joint.W_{suffix}"] = z @ delta.T
        joint_grads[f"joint.c_{suffix}"] = delta.sum(axis=1)
        dz += W @ delta

    head_grads: Params = {}
    if labels is not None:
        head = model.head
        probs = softmax(affine(head.W_s, z, head.b_s))
        value += label_cross_entropy(probs, labels)
        d_logits = (probs - one_hot(labels, head.n_classes)) / z.shape[1]
        head_grads = {"head.W_s": d_logits @ z.T, "head.b_s": d_logits.sum(axis=1)}
        dz += head.W_s.T @ d_logits

    for name in MODALITIES:
        stack = model.stack(name)
        W, _, _ = _joint_weights(model, name)
        suffix = "e" if name == EEG else "m"
        delta = dz * activation_grad(_SIGMOID, joint_parts[name])
        joint_grads[f"joint.W_{suffix}"] += delta @ enc_acts[name][-1].T + 2.0 * model.lam * W
        joint_grads[f"joint.b_{suffix}"] = delta.sum(axis=1)
        encoder_backward(stack, enc_acts[name], W.T @ delta, stack_grads[name])
        for i, layer in enumerate(stack.layers):
            stack_grads[name][f"{i}.W"] += 2.0 * model.lam * layer.W

    grads: Params = {}
    for name in MODALITIES:
        for key, value_ in stack_grads[name].items():
            grads[f"{name}.{key}"] = value_
    grads.update(joint_grads)
    if model.head is not None:
        grads["head.W_s"] = head_grads.get("head.W_s", np.zeros_like(model.head.W_s))
        grads["head.b_s"] = head_grads.get("head.b_s", np.zeros_like(model.head.b_s))
    return float(value), grads


def _check_labels(labels: np.ndarray, n_samples: int, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n_samples,):
        raise ShapeMismatchError("labels", labels.shape, (n_samples,))
    if labels.size and (np.any(labels != np.round(labels)) or labels.min() < 0 or labels.max() >= n_classes):
        raise DomainError(f"labels must be integers in 0..{n_classes - 1}")
    return labels.astype(np.int64)


def multimodal_objective(
    model: MultimodalModel,
    inputs: MultimodalBatch,
    targets: MultimodalBatch,
    labels: Optional[np.ndarray] = None,
) -> float:
    """Summed reconstruction loss of both modalities, weight decay, and (with
    labels) the softmax cross-entropy of the joint code."""
    _check_batch(model, inputs)
    _check_batch(model, targets)
    if labels is not None:
        if model.head is None:
            raise NotFittedError("labels given but the model has no softmax head")
        labels = _check_labels(labels, inputs.n_samples, model.head.n_classes)
    return _value_and_grad(model, inputs, targets, labels)[0]


def multimodal_gradient(
    model: MultimodalModel,
    inputs: MultimodalBatch,
    targets: MultimodalBatch,
    labels: Optional[np.ndarray] = None,
) -> Params:
    _check_batch(model, inputs)
    _check_batch(model, targets)
    if labels is not None:
        if model.head is None:
            raise NotFittedError("labels given but the model has no softmax head")
        labels = _check_labels(labels, inputs.n_samples, model.head.n_classes)
    return _value_and_grad(model, inputs, targets, labels)[1]


def _descend(
    model,
    n: int,
    cfg: TrainConfig,
    value_and_grad: Callable[[object, np.ndarray], tuple[float, Params]],
    trainable: Callable[[str], bool],
    stage: str,
):
    """Seeded mini-batch descent over `n` samples on any params()/with_params() model."""
    rng = make_rng(cfg.seed)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_values = []
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            value, grads = value_and_grad(model, idx)
            current = model.params()
            names = [name for name in current if trainable(name)]
            if not np.isfinite(value) or not all(np.all(np.isfinite(grads[name])) for name in names):
                raise TrainingDivergedError(epoch, batch_idx, value, stage)
            updated = sgd_step({name: current[name] for name in names}, {name: grads[name] for name in names}, cfg.lr)
            if not all(np.all(np.isfinite(p)) for p in updated.values()):
                raise TrainingDivergedError(epoch, batch_idx, float("nan"), stage)
            model = model.with_params({**current, **updated})
            batch_values.append(value)
            logger.debug("%s epoch %d batch %d objective %.6g", stage, epoch, batch_idx, value)
        history.append(float(np.mean(batch_values)))
        logger.info("%s epoch %d/%d objective %.6g", stage, epoch + 1, cfg.epochs, history[-1])
    return model, history


def train_multimodal(
    model: MultimodalModel,
    batch: MultimodalBatch,
    cfg: TrainConfig,
    update_pathways: bool = False,
    allow_untrained: bool = False,
) -> tuple[MultimodalModel, list[float]]:
    """Train on the modality-dropout augmented batch against clean targets.

    With ``update_pathways=False`` the pretrained stacks stay frozen and only
    the joint layer learns; otherwise every parameter except the head moves.
    """
    _check_batch(model, batch)
    if not allow_untrained and not (model.eeg_stack.trained and model.emg_stack.trained):
        raise UntrainedModelError("pathways must be greedily pretrained first (or pass allow_untrained=True)")
    if batch.n_samples == 0:
        raise DataError("training batch has no samples")
    inputs, targets = augment_modality_dropout(batch)
    model = replace(model, lam=cfg.lam)

    def trainable(name: str) -> bool:
        if name.startswith("head."):
            return False
        return update_pathways or name.startswith("joint.")

    def value_and_grad(m: MultimodalModel, idx: np.ndarray) -> tuple[float, Params]:
        return _value_and_grad(m, inputs.take(idx), targets.take(idx))

    model, history = _descend(model, inputs.n_samples, cfg, value_and_grad, trainable, "multimodal")
    return replace(model, trained=True, history=tuple(history)), history


def fine_tune(
    model: MultimodalModel,
    batch: MultimodalBatch,
    labels: np.ndarray,
    cfg: TrainConfig,
    class_names: Sequence[str] = CLASS_LABELS,
) -> tuple[MultimodalModel, list[float]]:
    """Minimise reconstruction plus softmax cross-entropy, updating every layer."""
    _check_batch(model, batch)
    if batch.n_samples == 0:
        raise DataError("fine-tuning batch has no samples")
    if model.head is None:
        model = replace(model, head=init_head(model.joint_dim, derive_seed(cfg.seed, "head"), class_names))
    labels = _check_labels(labels, batch.n_samples, model.head.n_classes)
    model = replace(model, lam=cfg.lam)

    def value_and_grad(m: MultimodalModel, idx: np.ndarray) -> tuple[float, Params]:
        sub = batch.take(idx)
        return _value_and_grad(m, sub, sub, labels[idx])

    model, history = _descend(model, batch.n_samples, cfg, value_and_grad, lambda name: True, "fine-tune")
    return replace(model, trained=True, history=model.history + tuple(history)), history


def classify(model: MultimodalModel, batch: MultimodalBatch) -> tuple[np.ndarray, np.ndarray]:
    """Predicted labels (ties go to the lower index) and class probabilities."""
    if model.head is None:
        raise NotFittedError("model has no softmax head; run fine_tune first")
    z = joint_forward(model, batch)
    probs = softmax(affine(model.head.W_s, z, model.head.b_s))
    return np.argmax(probs, axis=0), probs


# Unimodal SAE + softmax baseline

@dataclass(frozen=True, eq=False)
class UnimodalClassifier:
    modality: str
    stack: StackedEncoder
    head: SoftmaxHead
    lam: float = DEFAULT_LAMBDA

    def params(self) -> Params:
        out = {f"stack.{key}": value for key, value in self.stack.params().items()}
        out.update({f"head.{key}": value for key, value in self.head.params().items()})
        return out

    def with_params(self, params: Mapping[str, np.ndarray]) -> "UnimodalClassifier":
        stack = self.stack.with_params({key[6:]: value for key, value in params.items() if key.startswith("stack.")})
        head = self.head.with_params({"W_s": params["head.W_s"], "b_s": params["head.b_s"]})
        return replace(self, stack=stack, head=head)


def _unimodal_value_and_grad(clf: UnimodalClassifier, x: np.ndarray, labels: np.ndarray) -> tuple[float, Params]:
    stack, head = clf.stack, clf.head
    acts = stack_encode_trace(stack, x)
    dec = stack_decode_trace(stack, acts[-1])
    top = acts[-1]
    probs = softmax(affine(head.W_s, top, head.b_s))
    value = loss(_SE, x, dec[-1]) + stack_decay(stack) + label_cross_entropy(probs, labels)

    grads = zero_grads(stack)
    d_top = decoder_backward(stack, dec, loss_grad(_SE, x, dec[-1]), grads)
    d_logits = (probs - one_hot(labels, head.n_classes)) / x.shape[1]
    d_top = d_top + head.W_s.T @ d_logits
    encoder_backward(stack, acts, d_top, grads)
    add_decay_grads(stack, grads)
    out = {f"stack.{key}": value_ for key, value_ in grads.items()}
    out["head.W_s"] = d_logits @ top.T
    out["head.b_s"] = d_logits.sum(axis=1)
    return float(value), out


def train_unimodal_classifier(
    x: np.ndarray,
    labels: np.ndarray,
    dims: Sequence[int],
    pretrain_cfg: TrainConfig,
    tune_cfg: TrainConfig,
    modality: str = EEG,
    class_names: Sequence[str] = CLASS_LABELS,
) -> tuple[UnimodalClassifier, list[float]]:
    """Greedy SAE pretraining then joint reconstruction + softmax fine-tuning."""
    x = as_matrix(x, f"{modality} data")
    stack = greedy_pretrain(dims, x, pretrain_cfg)
    head = init_head(stack.top_dim, derive_seed(tune_cfg.seed, "head"), class_names)
    labels = _check_labels(labels, x.shape[1], head.n_classes)
    stack = replace(stack, layers=tuple(replace(layer, lam=tune_cfg.lam) for layer in stack.layers))
    clf = UnimodalClassifier(modality, stack, head, tune_cfg.lam)

    def value_and_grad(c: UnimodalClassifier, idx: np.ndarray) -> tuple[float, Params]:
        return _unimodal_value_and_grad(c, x[:, idx], labels[idx])

    return _descend(clf, x.shape[1], tune_cfg, value_and_grad, lambda name: True, f"unimodal-{modality}")


def unimodal_gradient(clf: UnimodalClassifier, x: np.ndarray, labels: np.ndarray) -> tuple[float, Params]:
    labels = _check_labels(labels, np.shape(x)[1], clf.head.n_classes)
    return _unimodal_value_and_grad(clf, as_matrix(x), labels)


def classify_unimodal(clf: UnimodalClassifier, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    top = stack_encode_trace(clf.stack, as_matrix(x))[-1]
    probs = softmax(affine(clf.head.W_s, top, clf.head.b_s))
    return np.argmax(probs, axis=0), probs
