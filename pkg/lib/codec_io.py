"""
Compression codec facade and the artifact file formats.

Both artifact kinds share one layout: a magic line, a JSON manifest, an
end-of-manifest line, then the arrays as raw little-endian float64 blobs in
the order the manifest declares.  The manifest carries the payload size and
its SHA-256 so truncation and corruption are told apart.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from lib.autoencoder import StackedEncoder, TiedAutoencoder
from lib.config import BIT_GENERATOR, CODES_MAGIC, FORMAT_VERSION, MANIFEST_END, MODALITIES, MODEL_MAGIC
from lib.errors import (
    ChecksumError,
    DataError,
    FingerprintMismatchError,
    FormatError,
    TruncatedError,
    UntrainedModelError,
    VersionError,
)
from lib.multimodal import MultimodalBatch, MultimodalModel, SoftmaxHead, joint_forward, multimodal_decode
from lib.nn_core import as_matrix

logger = logging.getLogger(__name__)

_DTYPE = np.dtype("<f8")


@dataclass(frozen=True, eq=False)
class CodeBlock:
    z: np.ndarray  # joint x samples
    model_fingerprint: str
    source_dims: tuple[int, int]
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @property
    def joint_dim(self) -> int:
        return self.z.shape[0]

    @property
    def n_samples(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True, eq=False)
class ModelArtifact:
    format_version: int
    model: MultimodalModel
    config: dict
    fingerprint: str


# Canonical model bytes

def architecture(model: MultimodalModel) -> dict:
    pathways = {}
    for name in MODALITIES:
        stack = model.stack(name)
        pathways[name] = {
            "dims": stack.dims,
            "trained": stack.trained,
            "layers": [
                {"activation": layer.activation.value, "loss_kind": layer.loss_kind.value, "lam": layer.lam}
                for layer in stack.layers
            ],
        }
    return {
        "bit_generator": BIT_GENERATOR,
        "joint_dim": model.joint_dim,
        "lam": model.lam,
        "trained": model.trained,
        "pathways": pathways,
        "head": None if model.head is None else {"labels": list(model.head.labels)},
    }


def _canonical(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _payload(arrays: dict[str, np.ndarray]) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for a in arrays.values())


def fingerprint(model: MultimodalModel) -> str:
    """128-bit BLAKE2b of the canonical architecture and parameter bytes."""
    digest = hashlib.blake2b(digest_size=16)
    digest.update(_canonical(architecture(model)))
    digest.update(_payload(model.params()))
    return digest.hexdigest()


# Container read/write

def _write_container(path: Path, magic: str, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    payload = _payload(arrays)
    manifest = {
        **manifest,
        "format_version": FORMAT_VERSION,
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays.items()],
        "payload_bytes": len(payload),
        "checksum": "sha256:" + hashlib.sha256(payload).hexdigest(),
    }
    header = f"{magic}\n{json.dumps(manifest, sort_keys=True, indent=2)}\n{MANIFEST_END}\n".encode("utf-8")
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def _read_container(path: Path, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc})") from exc
    first, sep, rest = raw.partition(b"\n")
    if first.decode("utf-8", errors="replace") != magic:
        raise FormatError(f"{path}: not a {magic} file")
    marker = f"\n{MANIFEST_END}\n".encode("utf-8")
    cut = rest.find(marker)
    if not sep or cut < 0:
        raise TruncatedError(f"{path}: manifest end marker missing")
    try:
        manifest = json.loads(rest[:cut].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed manifest ({exc})") from exc
    if not isinstance(manifest, dict):
        raise FormatError(f"{path}: manifest is a JSON {type(manifest).__name__}, not an object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    payload = rest[cut + len(marker):]
    expected = int(manifest.get("payload_bytes", -1))
    if len(payload) < expected:
        raise TruncatedError(f"{path}: payload has {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes after the payload")
    if "sha256:" + hashlib.sha256(payload).hexdigest() != manifest.get("checksum"):
        raise ChecksumError(f"{path}: payload checksum mismatch")

    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in manifest.get("arrays", []):
        shape = tuple(int(d) for d in entry["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
        if offset + size > len(payload):
            raise FormatError(f"{path}: array {entry['name']} overruns the payload")
        arrays[entry["name"]] = np.frombuffer(payload[offset:offset + size], dtype=_DTYPE).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(payload):
        raise FormatError(f"{path}: declared arrays cover {offset} of {len(payload)} payload bytes")
    return manifest, arrays


# Models

def save_model(model: MultimodalModel, path: Path, config: Optional[dict] = None) -> str:
    """Write the model with a config echo; returns its fingerprint."""
    fp = fingerprint(model)
    manifest = {
        "kind": "model",
        "architecture": architecture(model),
        "config": config or {},
        "fingerprint": fp,
    }
    _write_container(Path(path), MODEL_MAGIC, manifest, model.params())
    logger.info("saved model %s to %s", fp, path)
    return fp


def _model_from(arch: dict, arrays: dict[str, np.ndarray]) -> MultimodalModel:
    stacks = {}
    for name in MODALITIES:
        spec = arch["pathways"][name]
        layers = tuple(
            TiedAutoencoder(
                W=arrays[f"{name}.{i}.W"],
                b=arrays[f"{name}.{i}.b"],
                b_prime=arrays[f"{name}.{i}.b_prime"],
                activation=layer["activation"],
                lam=layer["lam"],
                loss_kind=layer["loss_kind"],
            )
            for i, layer in enumerate(spec["layers"])
        )
        stacks[name] = StackedEncoder(layers, trained=spec["trained"])
    head = None
    if arch.get("head") is not None:
        head = SoftmaxHead(arrays["head.W_s"], arrays["head.b_s"], tuple(arch["head"]["labels"]))
    return MultimodalModel(
        eeg_stack=stacks["eeg"],
        emg_stack=stacks["emg"],
        joint_W_e=arrays["joint.W_e"],
        joint_b_e=arrays["joint.b_e"],
        joint_c_e=arrays["joint.c_e"],
        joint_W_m=arrays["joint.W_m"],
        joint_b_m=arrays["joint.b_m"],
        joint_c_m=arrays["joint.c_m"],
        head=head,
        lam=arch["lam"],
        trained=arch["trained"],
    )


def load_model(path: Path) -> ModelArtifact:
    manifest, arrays = _read_container(Path(path), MODEL_MAGIC)
    try:
        model = _model_from(manifest["architecture"], arrays)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: manifest and arrays do not describe a model ({exc})") from exc
    fp = fingerprint(model)
    if manifest.get("fingerprint") != fp:
        raise ChecksumError(f"{path}: stored fingerprint {manifest.get('fingerprint')} does not match {fp}")
    return ModelArtifact(manifest["format_version"], model, manifest.get("config", {}), fp)


# Code blocks

def save_codes(code: CodeBlock, path: Path) -> None:
    manifest = {
        "kind": "codes",
        "joint_dim": code.joint_dim,
        "n_samples": code.n_samples,
        "source_dims": list(code.source_dims),
        "model_fingerprint": code.model_fingerprint,
        "created_at": code.created_at,
    }
    _write_container(Path(path), CODES_MAGIC, manifest, {"z": code.z})


def load_codes(path: Path) -> CodeBlock:
    manifest, arrays = _read_container(Path(path), CODES_MAGIC)
    if "z" not in arrays or arrays["z"].ndim != 2:
        raise FormatError(f"{path}: code file has no 2-D z array")
    z = arrays["z"]
    if z.shape != (manifest.get("joint_dim"), manifest.get("n_samples")):
        raise FormatError(
            f"{path}: z shape {z.shape} disagrees with header "
            f"({manifest.get('joint_dim')} x {manifest.get('n_samples')})"
        )
    try:
        fp = str(manifest["model_fingerprint"])
        source_dims = tuple(int(d) for d in manifest["source_dims"])
        created_at = str(manifest["created_at"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: code manifest field missing or malformed ({exc!r})") from exc
    return CodeBlock(z, fp, source_dims, created_at)


# Codec

def encode(model: MultimodalModel, batch: MultimodalBatch) -> CodeBlock:
    if not model.trained:
        raise UntrainedModelError("refusing to encode with an untrained model")
    if batch.n_samples == 0:
        raise DataError("cannot encode an empty batch")
    z = joint_forward(model, batch)
    return CodeBlock(z, fingerprint(model), model.source_dims)


def decode(model: MultimodalModel, code: CodeBlock) -> tuple[np.ndarray, np.ndarray]:
    fp = fingerprint(model)
    if code.model_fingerprint != fp:
        raise FingerprintMismatchError(f"codes were produced by model {code.model_fingerprint}, not {fp}")
    recon_eeg, recon_emg = multimodal_decode(model, as_matrix(code.z, "codes"))
    return recon_eeg, recon_emg
