"""
Dense numeric substrate: affine maps, activations, losses, softmax,
gradient steps, a finite-difference gradient oracle and seeded generators.

Samples are stored one per column, so an encoder layer reads literally as
``f(W @ x + b)``.  Everything is float64 and pure.
"""
from __future__ import annotations

import hashlib
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from lib.config import BIT_GENERATOR, FD_STEP
from lib.errors import DomainError, ShapeMismatchError

Params = dict[str, np.ndarray]

# Largest float64 strictly below 1 and smallest positive normal
_BELOW_ONE = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


class ActivationKind(str, Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    IDENTITY = "identity"


class LossKind(str, Enum):
    SQUARED_ERROR = "squared_error"
    CROSS_ENTROPY = "cross_entropy"


def as_matrix(values: object, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject NaN/Inf."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D", arr.shape, ("rows", "cols"))
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def _bias(b: object, rows: int) -> np.ndarray:
    vec = np.asarray(b, dtype=np.float64).reshape(-1)
    if vec.shape[0] != rows:
        raise ShapeMismatchError("bias length", vec.shape, (rows,))
    return vec.reshape(-1, 1)


def affine(W: np.ndarray, x: np.ndarray, b: object) -> np.ndarray:
    """Pre-activation ``W @ x + b`` with b broadcast over the sample columns."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or x.ndim != 2 or W.shape[1] != x.shape[0]:
        raise ShapeMismatchError("affine W @ x", W.shape, x.shape)
    return W @ x + _bias(b, W.shape[0])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep saturated outputs strictly inside (0, 1)
    return np.clip(out, _TINY, _BELOW_ONE)


def activate(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    kind = ActivationKind(kind)
    if kind is ActivationKind.SIGMOID:
        return _sigmoid(z)
    if kind is ActivationKind.TANH:
        return np.clip(np.tanh(z), -_BELOW_ONE, _BELOW_ONE)
    return z.copy()


def activation_grad(kind: ActivationKind, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation expressed through its output ``a``."""
    kind = ActivationKind(kind)
    if kind is ActivationKind.SIGMOID:
        return a * (1.0 - a)
    if kind is ActivationKind.TANH:
        return 1.0 - a * a
    return np.ones_like(a)


def _check_same_shape(x: np.ndarray, r: np.ndarray) -> None:
    if x.shape != r.shape:
        raise ShapeMismatchError("loss inputs", x.shape, r.shape)


def _check_cross_entropy_domain(x: np.ndarray, r: np.ndarray) -> None:
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise DomainError("cross-entropy needs reconstructions strictly inside (0, 1)")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("cross-entropy needs targets inside [0, 1]")


def loss(kind: LossKind, x: np.ndarray, r: np.ndarray) -> float:
    """Mean over sample columns of the per-sample reconstruction loss."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_same_shape(x, r)
    n = x.shape[1] if x.ndim == 2 else 1
    if LossKind(kind) is LossKind.SQUARED_ERROR:
        return float(np.sum((x - r) ** 2) / n)
    _check_cross_entropy_domain(x, r)
    return float(-np.sum(x * np.log(r) + (1.0 - x) * np.log1p(-r)) / n)


def loss_grad(kind: LossKind, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Gradient of `loss` with respect to the reconstruction ``r``."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_same_shape(x, r)
    n = x.shape[1] if x.ndim == 2 else 1
    if LossKind(kind) is LossKind.SQUARED_ERROR:
        return 2.0 * (r - x) / n
    _check_cross_entropy_domain(x, r)
    return (-x / r + (1.0 - x) / (1.0 - r)) / n


def softmax(logits: np.ndarray) -> np.ndarray:
    """Column-wise softmax with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def label_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under column probabilities.

    Labels outside ``0..n_classes-1`` and probabilities outside [0, 1] are
    errors.  A picked probability that underflowed to 0 in the softmax is
    read as the smallest positive float, so the loss stays finite (at most
    about 708 per sample).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if probs.ndim != 2 or probs.shape[1] != labels.shape[0]:
        raise DomainError(f"class probabilities {probs.shape} need one column per label ({labels.shape[0]})")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[0]):
        raise DomainError(f"labels must lie in 0..{probs.shape[0] - 1}, got {labels.min()}..{labels.max()}")
    if not np.all(np.isfinite(probs)) or probs.min(initial=0.0) < 0.0 or probs.max(initial=0.0) > 1.0:
        raise DomainError("class probabilities must be finite and lie in [0, 1]")
    picked = probs[labels, np.arange(labels.shape[0])]
    return float(-np.mean(np.log(np.maximum(picked, _TINY))))


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((n_classes, labels.shape[0]))
    out[labels, np.arange(labels.shape[0])] = 1.0
    return out


def frobenius_sq(W: np.ndarray) -> float:
    return float(np.sum(np.asarray(W) ** 2))


def sgd_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], lr: float) -> Params:
    """One plain gradient-descent step; returns new arrays, inputs untouched."""
    if not lr > 0:
        raise DomainError(f"learning rate must be positive, got {lr}")
    if set(params) != set(grads):
        raise ShapeMismatchError("parameter names", sorted(params), sorted(grads))
    updated: Params = {}
    for name, p in params.items():
        g = grads[name]
        if np.shape(p) != np.shape(g):
            raise ShapeMismatchError(f"gradient for {name}", np.shape(p), np.shape(g))
        updated[name] = p - lr * g
    return updated


def finite_difference_grad(
    f: Callable[[Params], float],
    params: Mapping[str, np.ndarray],
    h: float = FD_STEP,
) -> Params:
    """Central differences ``(f(p+h) - f(p-h)) / 2h`` for every coordinate."""
    if not h > 0:
        raise DomainError(f"finite-difference step must be positive, got {h}")
    work = {name: np.array(p, dtype=np.float64, copy=True) for name, p in params.items()}
    grads: Params = {}
    for name, p in work.items():
        g = np.zeros_like(p)
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = f(work)
            flat_p[i] = orig - h
            down = f(work)
            flat_p[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise DomainError(f"non-finite objective while probing {name}[{i}]")
            flat_g[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def relative_error(analytic: Mapping[str, np.ndarray], numeric: Mapping[str, np.ndarray]) -> float:
    """Largest per-array error ``max|a - n| / max(max|a|, max|n|)``."""
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(n), initial=0.0)), 1e-12)
        worst = max(worst, float(np.max(np.abs(a - n), initial=0.0)) / scale)
    return worst


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator on the named bit generator recorded in artifact headers."""
    bit_generator = getattr(np.random, BIT_GENERATOR)
    return np.random.Generator(bit_generator(int(seed)))


def derive_seed(root: int, label: str) -> int:
    """Child seed for a labeled component; independent of other labels."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    seq = np.random.SeedSequence([int(root) & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))
