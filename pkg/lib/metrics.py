"""
Evaluation measures, curve assembly and report tables.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from lib.config import DEFAULT_SEED, EEG, EMG, MODALITIES
from lib.errors import DomainError, ShapeMismatchError, TrainingDivergedError
from lib.nn_core import derive_seed

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["method", "modality", "cr", "prd"]
PRD_COLUMNS = ["partition", "modality", "sample", "prd"]


def compression_ratio(m: int, n: int) -> float:
    """Dimensional compression ratio ``(1 - m/n) * 100``."""
    if n <= 0:
        raise DomainError(f"original length must be positive, got {n}")
    if m < 0 or m > n:
        raise DomainError(f"compressed length {m} must lie in 0..{n}")
    return (1.0 - m / n) * 100.0


def _pair(x: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape != r.shape:
        raise ShapeMismatchError("prd inputs", x.shape, r.shape)
    return x, r


def distortion_prd(x: np.ndarray, r: np.ndarray) -> float:
    """Percentage root-mean-square difference over the whole batch."""
    x, r = _pair(x, r)
    ref = np.linalg.norm(x)
    if ref == 0:
        raise DomainError("PRD reference has zero norm")
    return float(np.linalg.norm(r - x) / ref * 100.0)


def prd_per_sample(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """PRD of every sample column."""
    x, r = _pair(x, r)
    if x.ndim == 1:
        x, r = x.reshape(-1, 1), r.reshape(-1, 1)
    ref = np.linalg.norm(x, axis=0)
    if np.any(ref == 0):
        raise DomainError(f"{int(np.sum(ref == 0))} sample(s) have a zero-norm PRD reference")
    return np.linalg.norm(r - x, axis=0) / ref * 100.0


def accuracy(predicted: Sequence[int], truth: Sequence[int]) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ShapeMismatchError("accuracy inputs", predicted.shape, truth.shape)
    if truth.size == 0:
        raise DomainError("accuracy of an empty prediction set")
    return float(np.mean(predicted == truth) * 100.0)


def canonical_correlations(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Canonical correlations (descending) between two column-sample matrices.

    Both views are centred, orthonormalised by QR and the singular values of
    the cross product of the bases are the correlations.  With no more
    samples than the combined dimension the bases overlap trivially and
    every correlation reads 1, so that case is refused.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError("cca sample counts", x.shape, y.shape)
    if x.shape[1] <= x.shape[0] + y.shape[0]:
        raise DomainError(
            f"canonical correlations need more than {x.shape[0] + y.shape[0]} samples, got {x.shape[1]}"
        )
    xs = (x - x.mean(axis=1, keepdims=True)).T
    ys = (y - y.mean(axis=1, keepdims=True)).T
    qx, _ = np.linalg.qr(xs)
    qy, _ = np.linalg.qr(ys)
    corr = np.linalg.svd(qx.T @ qy, compute_uv=False)
    return np.clip(corr, 0.0, 1.0)


@dataclass(frozen=True)
class EvalReport:
    method: str
    cr_percent: float
    prd_eeg: float
    prd_emg: float
    accuracy: Optional[float] = None
    partition: float = 0.5
    config: dict = field(default_factory=dict)
    cr_eeg: Optional[float] = None
    cr_emg: Optional[float] = None

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 <= self.cr_percent <= 100.0:
            problems.append(f"cr_percent {self.cr_percent} outside [0, 100]")
        for name in ("prd_eeg", "prd_emg"):
            if not getattr(self, name) >= 0.0:
                problems.append(f"{name} must be non-negative")
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 100.0:
            problems.append(f"accuracy {self.accuracy} outside [0, 100]")
        if problems:
            raise DomainError("; ".join(problems))

    def prd(self, modality: str) -> float:
        return self.prd_eeg if modality == EEG else self.prd_emg

    def cr(self, modality: str) -> float:
        """Per-modality CR when the method measures one, else the shared CR."""
        value = self.cr_eeg if modality == EEG else self.cr_emg
        return self.cr_percent if value is None else value

    def as_row(self) -> dict:
        row = asdict(self)
        row["config"] = json.dumps(self.config, sort_keys=True)
        return row


@dataclass(frozen=True)
class CurvePoint:
    cr: float
    prd: float


@dataclass(frozen=True)
class Curve:
    method: str
    modality: str
    points: tuple[CurvePoint, ...]

    def __post_init__(self) -> None:
        crs = [p.cr for p in self.points]
        if any(b <= a for a, b in zip(crs, crs[1:])):
            raise DomainError(f"{self.method}/{self.modality} curve CR values must be strictly increasing: {crs}")

    @property
    def crs(self) -> np.ndarray:
        return np.array([p.cr for p in self.points])

    @property
    def prds(self) -> np.ndarray:
        return np.array([p.prd for p in self.points])


def curves_from_reports(method: str, reports: Sequence[EvalReport]) -> dict[str, Curve]:
    """One curve per modality; reports measuring the same CR share a point at their mean PRD."""
    curves = {}
    for modality in MODALITIES:
        frame = pd.DataFrame(
            [(r.cr(modality), r.prd(modality)) for r in reports], columns=["cr", "prd"], dtype=np.float64
        )
        merged = frame.groupby("cr", sort=True)["prd"].agg(["mean", "size"])
        for cr, size in merged.loc[merged["size"] > 1, "size"].items():
            logger.warning("%s/%s: %d points measured CR %.6g, merged to their mean PRD", method, modality, size, cr)
        points = tuple(CurvePoint(float(cr), float(prd)) for cr, prd in merged["mean"].items())
        curves[modality] = Curve(method, modality, points)
    return curves


def _row_label(row: dict) -> str:
    if "pathway_dim" in row and "joint_dim" in row:
        return f"{row['pathway_dim']}-{row['joint_dim']}"
    return json.dumps(row, sort_keys=True)


def build_curve(
    method: str,
    configs: Sequence[dict],
    train,
    test,
    pretrain_cfg,
    joint_cfg,
    base_seed: int = DEFAULT_SEED,
    dwt_mode: str = "table",
    partition: float = 0.5,
) -> tuple[dict[str, Curve], list[EvalReport]]:
    """Train/evaluate one point per architecture row and assemble the curves.

    ``method`` is ``"multimodal"`` or ``"dwt"``.  Row ``i`` uses seed
    ``base_seed + i``.  For the DWT method ``dwt_mode="table"`` uses the
    row's thresholds and ``"calibrate"`` fits thresholds on the training
    segments to reach the row's nominal CR.
    """
    from lib.autoencoder import greedy_pretrain
    from lib.dwt_baseline import WaveletConfig, calibrate_threshold, dwt_codec_eval
    from lib.multimodal import MultimodalBatch, init_multimodal, joint_forward, multimodal_decode, train_multimodal

    if method not in ("multimodal", "dwt"):
        raise DomainError(f"unknown curve method {method!r}")
    segment_dim = train.eeg.shape[0]
    if method == "multimodal":
        crs = [compression_ratio(row["joint_dim"], segment_dim) for row in configs]
        if len(set(crs)) != len(crs):
            raise DomainError(f"architecture rows must have distinct CRs, got {crs}")

    reports = []
    for index, row in enumerate(configs):
        seed = base_seed + index
        label = _row_label(row)
        logger.info("%s point %d/%d (%s), seed %d", method, index + 1, len(configs), label, seed)
        if method == "multimodal":
            pre = replace(pretrain_cfg, seed=seed)
            dims = [segment_dim, row["pathway_dim"]]
            try:
                eeg_stack = greedy_pretrain(dims, train.eeg, pre)
                emg_stack = greedy_pretrain(dims, train.emg, replace(pre, seed=derive_seed(seed, EMG)))
                model = init_multimodal(eeg_stack, emg_stack, row["joint_dim"], seed, joint_cfg.lam)
                model, _ = train_multimodal(model, MultimodalBatch.paired(train.eeg, train.emg), replace(joint_cfg, seed=seed))
            except TrainingDivergedError as exc:
                raise exc.tagged(f"config {label}") from exc
            z = joint_forward(model, MultimodalBatch.paired(test.eeg, test.emg))
            recon_eeg, recon_emg = multimodal_decode(model, z)
            reports.append(EvalReport(
                method=method,
                cr_percent=compression_ratio(row["joint_dim"], segment_dim),
                prd_eeg=distortion_prd(test.eeg, recon_eeg),
                prd_emg=distortion_prd(test.emg, recon_emg),
                partition=partition,
                config={"row": dict(row), "pretrain": pre.as_dict(), "joint": replace(joint_cfg, seed=seed).as_dict()},
            ))
        else:
            if dwt_mode == "calibrate":
                cfg_eeg = WaveletConfig(threshold=calibrate_threshold(train.eeg, row["cr"], WaveletConfig()))
                cfg_emg = WaveletConfig(threshold=calibrate_threshold(train.emg, row["cr"], WaveletConfig()))
            else:
                cfg_eeg = WaveletConfig(threshold=row["dwt_eeg"])
                cfg_emg = WaveletConfig(threshold=row["dwt_emg"])
            report = dwt_codec_eval(test.eeg, test.emg, cfg_eeg, cfg_emg)
            reports.append(replace(report, partition=partition, config={**report.config, "row": dict(row)}))
    return curves_from_reports(method, reports), reports


def curves_to_frame(curves: Sequence[Curve]) -> pd.DataFrame:
    rows = [
        {"method": c.method, "modality": c.modality, "cr": p.cr, "prd": p.prd}
        for c in curves
        for p in c.points
    ]
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def save_curves(curves: Sequence[Curve], path: Path) -> None:
    curves_to_frame(curves).to_csv(path, index=False)


def load_curves(path: Path) -> list[Curve]:
    df = pd.read_csv(path, float_precision="round_trip")
    missing = set(CURVE_COLUMNS) - set(df.columns)
    if missing:
        raise DomainError(f"{path}: missing curve columns {sorted(missing)}")
    curves = []
    for (method, modality), group in df.groupby(["method", "modality"], sort=False):
        points = tuple(CurvePoint(float(cr), float(prd)) for cr, prd in zip(group["cr"], group["prd"]))
        curves.append(Curve(str(method), str(modality), points))
    return curves


def reports_to_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in reports])


def save_reports(reports: Sequence[EvalReport], path: Path) -> None:
    reports_to_frame(reports).to_csv(path, index=False)


def load_reports(path: Path) -> list[EvalReport]:
    df = pd.read_csv(path, float_precision="round_trip")
    reports = []
    for record in df.to_dict(orient="records"):
        for key in ("accuracy", "cr_eeg", "cr_emg"):
            if pd.isna(record.get(key)):
                record[key] = None
        record["config"] = json.loads(record["config"])
        reports.append(EvalReport(**record))
    return reports


def prd_distribution_frame(partition: float, per_sample: dict[str, np.ndarray]) -> pd.DataFrame:
    """Long table of per-sample PRD values for one partition."""
    frames = [
        pd.DataFrame({
            "partition": partition,
            "modality": modality,
            "sample": np.arange(len(values)),
            "prd": np.asarray(values, dtype=np.float64),
        })
        for modality, values in per_sample.items()
    ]
    return pd.concat(frames, ignore_index=True)[PRD_COLUMNS]


def summarize_distribution(df: pd.DataFrame) -> pd.DataFrame:
    """Median and quartiles per partition and modality."""
    grouped = df.groupby(["partition", "modality"])["prd"]
    return grouped.describe()[["count", "25%", "50%", "75%", "min", "max"]].reset_index()

