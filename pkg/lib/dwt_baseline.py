"""
Hard-threshold Daubechies wavelet codec used as the comparison baseline.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pywt

from lib.config import DEFAULT_WAVELET_LEVELS, DEFAULT_WAVELET_ORDER
from lib.errors import ConfigError, DomainError
from lib.metrics import EvalReport, distortion_prd
from lib.nn_core import as_matrix

logger = logging.getLogger(__name__)

_MODE = "periodization"


@dataclass(frozen=True)
class WaveletConfig:
    order: int = DEFAULT_WAVELET_ORDER
    levels: int = DEFAULT_WAVELET_LEVELS
    threshold: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        if f"db{self.order}" not in pywt.wavelist(family="db"):
            problems.append(f"no Daubechies wavelet of order {self.order}")
        if self.levels < 1:
            problems.append(f"levels must be >= 1, got {self.levels}")
        if not self.threshold >= 0:
            problems.append(f"threshold must be non-negative, got {self.threshold}")
        if problems:
            raise ConfigError(problems)

    @property
    def wavelet(self) -> str:
        return f"db{self.order}"

    @property
    def filter_length(self) -> int:
        return pywt.Wavelet(self.wavelet).dec_len

    def as_dict(self) -> dict:
        return {**asdict(self), "wavelet": self.wavelet, "mode": _MODE}


@dataclass(frozen=True, eq=False)
class SparseCoeffs:
    """Retained coefficients per level (approximation first) and their positions."""
    indices: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]
    level_lengths: tuple[int, ...]
    original_length: int

    def __post_init__(self) -> None:
        if not (len(self.indices) == len(self.values) == len(self.level_lengths)):
            raise DomainError("sparse coefficient levels are inconsistent")
        for idx, vals, length in zip(self.indices, self.values, self.level_lengths):
            if idx.shape != vals.shape or idx.size > length or (idx.size and idx.max() >= length):
                raise DomainError("retained indices do not fit their level")

    @property
    def retained(self) -> int:
        return int(sum(idx.size for idx in self.indices))

    @property
    def total(self) -> int:
        return int(sum(self.level_lengths))

    def dense(self) -> list[np.ndarray]:
        out = []
        for idx, vals, length in zip(self.indices, self.values, self.level_lengths):
            level = np.zeros(length)
            level[idx] = vals
            out.append(level)
        return out


def _padded_length(length: int, levels: int) -> int:
    block = 2 ** levels
    return -(-length // block) * block


def dwt_forward(signal: np.ndarray, cfg: WaveletConfig) -> list[np.ndarray]:
    """Multi-level periodized analysis ``[cA_n, cD_n, ..., cD_1]``.

    The signal is zero-padded to a multiple of ``2**levels``.
    """
    signal = np.asarray(signal, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(signal)):
        raise DomainError("signal contains non-finite samples")
    if signal.size < cfg.filter_length:
        raise DomainError(f"signal of length {signal.size} is shorter than the {cfg.wavelet} filter ({cfg.filter_length})")
    padded = np.zeros(_padded_length(signal.size, cfg.levels))
    padded[:signal.size] = signal
    return pywt.wavedec(padded, cfg.wavelet, mode=_MODE, level=cfg.levels)


def dwt_inverse(coeffs: list[np.ndarray], cfg: WaveletConfig, length: Optional[int] = None) -> np.ndarray:
    """Synthesis inverse of `dwt_forward`, cropped to `length` when given."""
    if len(coeffs) != cfg.levels + 1:
        raise DomainError(f"expected {cfg.levels + 1} coefficient arrays, got {len(coeffs)}")
    try:
        signal = pywt.waverec([np.asarray(c, dtype=np.float64) for c in coeffs], cfg.wavelet, mode=_MODE)
    except ValueError as exc:
        raise DomainError(f"malformed coefficient levels: {exc}") from exc
    return signal if length is None else signal[:length]


def threshold_compress(signal: np.ndarray, cfg: WaveletConfig) -> tuple[SparseCoeffs, float]:
    """Hard-threshold the transform; CR counts retained coefficients only."""
    signal = np.asarray(signal, dtype=np.float64).reshape(-1)
    coeffs = dwt_forward(signal, cfg)
    indices, values = [], []
    for c in coeffs:
        kept = pywt.threshold(c, cfg.threshold, mode="hard") if cfg.threshold > 0 else c
        idx = np.flatnonzero(kept)
        indices.append(idx)
        values.append(kept[idx])
    sparse = SparseCoeffs(tuple(indices), tuple(values), tuple(c.size for c in coeffs), signal.size)
    cr = (1.0 - sparse.retained / sparse.total) * 100.0
    return sparse, cr


def reconstruct(sparse: SparseCoeffs, cfg: WaveletConfig) -> np.ndarray:
    return dwt_inverse(sparse.dense(), cfg, sparse.original_length)


def calibrate_threshold(signals: np.ndarray, target_cr: float, cfg: WaveletConfig) -> float:
    """Threshold that discards ``target_cr`` percent of the coefficients of
    the given column signals (a quantile of the coefficient magnitudes)."""
    if not 0 <= target_cr <= 100:
        raise DomainError(f"target CR must lie in [0, 100], got {target_cr}")
    signals = as_matrix(signals, "calibration signals")
    mags = np.sort(np.concatenate([
        np.abs(c) for column in signals.T for c in dwt_forward(column, cfg)
    ]))
    k = int(np.ceil(target_cr / 100.0 * mags.size))
    if k == 0:
        return 0.0
    if k >= mags.size:
        return float(np.nextafter(mags[-1], np.inf))
    return float(mags[k])


def compress_batch(signals: np.ndarray, cfg: WaveletConfig) -> tuple[np.ndarray, np.ndarray]:
    """Reconstructions and per-signal CRs for column signals."""
    signals = as_matrix(signals, "signals")
    recon = np.empty_like(signals)
    crs = np.empty(signals.shape[1])
    for j, column in enumerate(signals.T):
        sparse, crs[j] = threshold_compress(column, cfg)
        recon[:, j] = reconstruct(sparse, cfg)
    return recon, crs


def dwt_codec_eval(
    eeg: np.ndarray,
    emg: np.ndarray,
    cfg_eeg: WaveletConfig,
    cfg_emg: Optional[WaveletConfig] = None,
) -> EvalReport:
    """Threshold-compress every column signal of both modalities and report
    batch PRD and mean CR per modality."""
    cfg_emg = cfg_eeg if cfg_emg is None else cfg_emg
    eeg = as_matrix(eeg, "eeg signals")
    emg = as_matrix(emg, "emg signals")
    if eeg.shape[1] == 0 or emg.shape[1] == 0:
        raise DomainError("DWT evaluation needs a nonempty batch")
    recon_eeg, cr_eeg = compress_batch(eeg, cfg_eeg)
    recon_emg, cr_emg = compress_batch(emg, cfg_emg)
    logger.info("dwt thresholds eeg %.4g emg %.4g -> CR %.2f%% / %.2f%%",
                cfg_eeg.threshold, cfg_emg.threshold, cr_eeg.mean(), cr_emg.mean())
    return EvalReport(
        method="dwt",
        cr_percent=float((cr_eeg.mean() + cr_emg.mean()) / 2.0),
        prd_eeg=distortion_prd(eeg, recon_eeg),
        prd_emg=distortion_prd(emg, recon_emg),
        config={"eeg": cfg_eeg.as_dict(), "emg": cfg_emg.as_dict()},
        cr_eeg=float(cr_eeg.mean()),
        cr_emg=float(cr_emg.mean()),
    )
