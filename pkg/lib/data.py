"""
Data loading and preparation utilities.

Reads the DEAP preprocessed container layout (one pickled
``{"data": videos x channels x samples, "labels": videos x 4}`` per
participant, ``sNN.dat``), cuts trials into normalized segments, and
generates synthetic correlated EEG/EMG data for desk-scale runs.
"""
from __future__ import annotations

import logging
import pickle
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from lib.config import (
    DEAP_CHANNELS,
    DEAP_FILE_PATTERN,
    DEAP_PARTICIPANTS,
    DEAP_SAMPLE_RATE,
    DEAP_TRIAL_SAMPLES,
    DEAP_VIDEOS,
    EEG,
    EEG_CHANNELS,
    EMG,
    EMG_CHANNELS,
    MODALITIES,
    RATING_MAX,
    RATING_MIN,
    RATING_NAMES,
    RATING_THRESHOLD,
    SEGMENT_DIM,
    TRIM_SAMPLES,
)
from lib.errors import ConfigError, DataError, DomainError
from lib.nn_core import derive_seed, make_rng

logger = logging.getLogger(__name__)

AFFINE_COLUMNS = ("mean", "std", "lo", "hi")
DEFAULT_CRITERIA = ("dominance", "arousal")
_DEAP_FILE_RE = re.compile(r"^s(\d{2})\.dat$")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    participant: int
    video: int
    channels: np.ndarray  # channels x samples
    ratings: np.ndarray  # valence, arousal, dominance, liking

    def __post_init__(self) -> None:
        channels = np.asarray(self.channels, dtype=np.float64)
        ratings = np.asarray(self.ratings, dtype=np.float64).reshape(-1)
        where = f"participant {self.participant}, video {self.video}"
        if channels.ndim != 2 or channels.shape[1] != DEAP_TRIAL_SAMPLES:
            raise DataError(f"{where}: expected channels x {DEAP_TRIAL_SAMPLES} samples, got {channels.shape}")
        if ratings.shape != (len(RATING_NAMES),):
            raise DataError(f"{where}: expected {len(RATING_NAMES)} ratings, got {ratings.shape}")
        if np.any(ratings < RATING_MIN) or np.any(ratings > RATING_MAX) or not np.all(np.isfinite(ratings)):
            raise DataError(f"{where}: ratings {ratings.tolist()} outside [{RATING_MIN:g}, {RATING_MAX:g}]")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "ratings", ratings)

    def rating(self, name: str) -> float:
        return float(self.ratings[RATING_NAMES.index(name)])


@dataclass(frozen=True, eq=False)
class SegmentedDataset:
    """Normalized segments, one per column, with aligned labels and provenance."""
    eeg: np.ndarray
    emg: np.ndarray
    labels: dict[str, np.ndarray] = field(default_factory=dict)
    index: Optional[pd.DataFrame] = None
    affine: dict[str, np.ndarray] = field(default_factory=dict)  # modality -> n x (mean, std, lo, hi)
    skipped: int = 0

    def __post_init__(self) -> None:
        eeg = np.asarray(self.eeg, dtype=np.float64)
        emg = np.asarray(self.emg, dtype=np.float64)
        if eeg.ndim != 2 or emg.ndim != 2 or eeg.shape[1] != emg.shape[1]:
            raise DataError(f"eeg {eeg.shape} and emg {emg.shape} segment counts differ")
        n = eeg.shape[1]
        for name, arr in ((EEG, eeg), (EMG, emg)):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0 or not np.all(np.isfinite(arr))):
                raise DataError(f"{name} values must lie in [0, 1]")
        labels = {}
        for criterion, values in self.labels.items():
            values = np.asarray(values).astype(np.int64).reshape(-1)
            if values.shape[0] != n:
                raise DataError(f"{criterion} labels: {values.shape[0]} for {n} segments")
            if np.any((values != 0) & (values != 1)):
                raise DataError(f"{criterion} labels must be binary")
            labels[criterion] = values
        affine = {}
        for name, params in self.affine.items():
            params = np.asarray(params, dtype=np.float64)
            if params.shape != (n, len(AFFINE_COLUMNS)):
                raise DataError(f"{name} affine parameters: shape {params.shape}, expected {(n, len(AFFINE_COLUMNS))}")
            affine[name] = params
        index = self.index
        if index is None:
            index = pd.DataFrame({"sample": np.arange(n)})
        elif len(index) != n:
            raise DataError(f"segment index has {len(index)} rows for {n} segments")
        object.__setattr__(self, "eeg", eeg)
        object.__setattr__(self, "emg", emg)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "affine", affine)
        object.__setattr__(self, "index", index.reset_index(drop=True))

    @property
    def n_samples(self) -> int:
        return self.eeg.shape[1]

    @property
    def segment_dim(self) -> int:
        return self.eeg.shape[0]

    def modality(self, name: str) -> np.ndarray:
        return self.eeg if name == EEG else self.emg

    def label(self, criterion: str) -> np.ndarray:
        if criterion not in self.labels:
            raise DataError(f"dataset has no {criterion!r} labels (available: {sorted(self.labels)})")
        return self.labels[criterion]

    def take(self, idx: np.ndarray) -> "SegmentedDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return SegmentedDataset(
            eeg=self.eeg[:, idx],
            emg=self.emg[:, idx],
            labels={k: v[idx] for k, v in self.labels.items()},
            index=self.index.iloc[idx],
            affine={k: v[idx] for k, v in self.affine.items()},
        )


# DEAP container I/O

def _participant_file(directory: Path, participant: int) -> Path:
    return Path(directory) / DEAP_FILE_PATTERN.format(participant=participant)


def discover_participants(directory: Path) -> list[int]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"DEAP directory {directory} does not exist")
    found = []
    for path in directory.iterdir():
        m = _DEAP_FILE_RE.match(path.name)
        if m:
            found.append(int(m.group(1)))
    return sorted(found)


def load_deap(directory: Path, participants: Optional[Sequence[int]] = None) -> list[TrialRecord]:
    """Parse every trial of the requested participants (default: all files found).

    The containers are pickles; only load directories you trust.
    """
    directory = Path(directory)
    if participants is None:
        participants = discover_participants(directory)
        if not participants:
            raise DataError(f"no participant files ({DEAP_FILE_PATTERN.format(participant=1)}, ...) in {directory}")
    records: list[TrialRecord] = []
    for participant in participants:
        path = _participant_file(directory, participant)
        if not path.exists():
            raise DataError(f"participant {participant}: missing file {path}")
        try:
            with open(path, "rb") as f:
                content = pickle.load(f, encoding="latin1")
        except Exception as exc:
            raise DataError(f"participant {participant}: truncated or unreadable container {path.name} ({exc})") from exc
        if not isinstance(content, dict) or "data" not in content or "labels" not in content:
            raise DataError(f"participant {participant}: container lacks 'data'/'labels'")
        data = np.asarray(content["data"], dtype=np.float64)
        ratings = np.asarray(content["labels"], dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != DEAP_TRIAL_SAMPLES:
            raise DataError(f"participant {participant}: data shape {data.shape}, expected videos x channels x {DEAP_TRIAL_SAMPLES}")
        if ratings.shape != (data.shape[0], len(RATING_NAMES)):
            raise DataError(f"participant {participant}: labels shape {ratings.shape}, expected {(data.shape[0], len(RATING_NAMES))}")
        for video in range(data.shape[0]):
            records.append(TrialRecord(participant, video + 1, data[video], ratings[video]))
        logger.info("participant %d: %d trials", participant, data.shape[0])
    return records


def save_deap(records: Sequence[TrialRecord], directory: Path) -> list[Path]:
    """Write records back in the per-participant container layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for participant in sorted({r.participant for r in records}):
        trials = sorted((r for r in records if r.participant == participant), key=lambda r: r.video)
        content = {
            "data": np.stack([r.channels for r in trials]),
            "labels": np.stack([r.ratings for r in trials]),
        }
        path = _participant_file(directory, participant)
        with open(path, "wb") as f:
            pickle.dump(content, f, protocol=pickle.HIGHEST_PROTOCOL)
        written.append(path)
    return written


def trial_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """One row per trial with its ratings."""
    rows = [
        {"participant": r.participant, "video": r.video, **dict(zip(RATING_NAMES, r.ratings.tolist()))}
        for r in records
    ]
    return pd.DataFrame(rows, columns=["participant", "video", *RATING_NAMES])


def synth_trials(
    n_participants: int = 2,
    n_videos: int = 2,
    seed: int = 0,
    noise: float = 0.5,
    n_channels: int = DEAP_CHANNELS,
) -> list[TrialRecord]:
    """DEAP-shaped trials whose channel amplitudes and ratings share a
    per-trial latent vector (one latent per rating)."""
    problems = []
    if not 1 <= n_participants <= DEAP_PARTICIPANTS:
        problems.append(f"participants must lie in 1..{DEAP_PARTICIPANTS}, got {n_participants}")
    if not 1 <= n_videos <= DEAP_VIDEOS:
        problems.append(f"videos must lie in 1..{DEAP_VIDEOS}, got {n_videos}")
    if problems:
        raise ConfigError(problems)
    rng = make_rng(derive_seed(seed, "synth_trials"))
    t = np.arange(DEAP_TRIAL_SAMPLES) / DEAP_SAMPLE_RATE
    latent_dim = len(RATING_NAMES)
    mixing = rng.normal(0.0, 1.0, size=(n_channels, latent_dim)) / np.sqrt(latent_dim)
    freqs = rng.uniform(1.0, 30.0, size=n_channels)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_channels)
    carrier = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])
    records = []
    for participant in range(1, n_participants + 1):
        for video in range(1, n_videos + 1):
            s = rng.normal(0.0, 1.0, size=latent_dim)
            amplitude = 1.0 + np.tanh(mixing @ s)
            channels = amplitude[:, None] * carrier + noise * rng.normal(0.0, 1.0, size=carrier.shape)
            ratings = np.clip(RATING_THRESHOLD + 2.0 * s, RATING_MIN, RATING_MAX)
            records.append(TrialRecord(participant, video, channels, ratings))
    return records


# Preparation

def _normalize_segment(segment: np.ndarray) -> tuple[np.ndarray, tuple[float, float, float, float]]:
    mean = float(segment.mean())
    std = float(segment.std())
    whitened = (segment - mean) / std
    lo, hi = float(whitened.min()), float(whitened.max())
    return np.clip((whitened - lo) / (hi - lo), 0.0, 1.0), (mean, std, lo, hi)


def threshold_labels(ratings: np.ndarray, criterion: Optional[str] = None) -> np.ndarray:
    """Binary labels: 1 if rating > 5, else 0 (5 itself is class 0).

    With a criterion, `ratings` is a trials x 4 matrix and that column is used.
    """
    ratings = np.asarray(ratings, dtype=np.float64)
    if criterion is not None:
        if criterion not in RATING_NAMES:
            raise DomainError(f"unknown rating criterion {criterion!r}")
        ratings = ratings.reshape(-1, len(RATING_NAMES))[:, RATING_NAMES.index(criterion)]
    if np.any(ratings < RATING_MIN) or np.any(ratings > RATING_MAX) or not np.all(np.isfinite(ratings)):
        raise DomainError(f"ratings must lie in [{RATING_MIN:g}, {RATING_MAX:g}]")
    return (ratings > RATING_THRESHOLD).astype(np.int64)


def segment_normalize(
    records: Sequence[TrialRecord],
    eeg_channels: Sequence[int] = EEG_CHANNELS,
    emg_channels: Sequence[int] = EMG_CHANNELS,
    segment_dim: int = SEGMENT_DIM,
    trim: int = TRIM_SAMPLES,
    criteria: Sequence[str] = DEFAULT_CRITERIA,
) -> SegmentedDataset:
    """Cut each selected channel into consecutive segments, whiten each
    segment, then map it affinely onto [0, 1].

    EEG channel k is paired with EMG channel k.  `trim` samples are dropped
    from the start of every trial.  Pairs where either segment has zero
    variance are skipped and counted.
    """
    problems = []
    if len(eeg_channels) != len(emg_channels) or not eeg_channels:
        problems.append(f"need equally many EEG and EMG channels, got {list(eeg_channels)} / {list(emg_channels)}")
    if segment_dim < 1:
        problems.append(f"segment_dim must be positive, got {segment_dim}")
    elif not 0 <= trim < DEAP_TRIAL_SAMPLES or (DEAP_TRIAL_SAMPLES - trim) % segment_dim:
        problems.append(f"segment_dim {segment_dim} does not divide the {DEAP_TRIAL_SAMPLES - trim} usable samples (trim {trim})")
    for criterion in criteria:
        if criterion not in RATING_NAMES:
            problems.append(f"unknown label criterion {criterion!r}")
    if problems:
        raise ConfigError(problems)

    per_trial = (DEAP_TRIAL_SAMPLES - trim) // segment_dim
    eeg_cols, emg_cols, rows = [], [], []
    affine = {EEG: [], EMG: []}
    labels = {criterion: [] for criterion in criteria}
    skipped = 0
    for record in records:
        n_channels = record.channels.shape[0]
        for channel in (*eeg_channels, *emg_channels):
            if not 0 <= channel < n_channels:
                raise DataError(f"participant {record.participant}, video {record.video}: no channel {channel}")
        trial_labels = {c: int(threshold_labels(record.ratings, c)[0]) for c in criteria}
        usable = record.channels[:, trim:]
        for pair, (ce, cm) in enumerate(zip(eeg_channels, emg_channels)):
            for seg in range(per_trial):
                window = slice(seg * segment_dim, (seg + 1) * segment_dim)
                eeg_seg, emg_seg = usable[ce, window], usable[cm, window]
                if eeg_seg.std() == 0 or emg_seg.std() == 0:
                    skipped += 1
                    continue
                x_e, a_e = _normalize_segment(eeg_seg)
                x_m, a_m = _normalize_segment(emg_seg)
                eeg_cols.append(x_e)
                emg_cols.append(x_m)
                affine[EEG].append(a_e)
                affine[EMG].append(a_m)
                for criterion, value in trial_labels.items():
                    labels[criterion].append(value)
                rows.append((record.participant, record.video, pair, seg))
    if skipped:
        logger.warning("skipped %d zero-variance segment pair(s)", skipped)
        warnings.warn(f"skipped {skipped} zero-variance segment pair(s)", UserWarning, stacklevel=2)

    def _matrix(cols: list) -> np.ndarray:
        return np.column_stack(cols) if cols else np.zeros((segment_dim, 0))

    return SegmentedDataset(
        eeg=_matrix(eeg_cols),
        emg=_matrix(emg_cols),
        labels={k: np.asarray(v, dtype=np.int64) for k, v in labels.items()},
        index=pd.DataFrame(rows, columns=["participant", "video", "pair", "segment"]),
        affine={k: np.asarray(v, dtype=np.float64).reshape(-1, len(AFFINE_COLUMNS)) for k, v in affine.items()},
        skipped=skipped,
    )


def denormalize(dataset: SegmentedDataset, modality: str, raw: bool = False, values: Optional[np.ndarray] = None) -> np.ndarray:
    """Undo the [0, 1] mapping (and with ``raw=True`` the whitening) using the
    stored per-segment parameters; `values` defaults to the dataset's own."""
    if modality not in dataset.affine:
        raise DataError(f"dataset carries no {modality} normalization parameters")
    x = dataset.modality(modality) if values is None else np.asarray(values, dtype=np.float64)
    if x.shape != dataset.modality(modality).shape:
        raise DataError(f"values shape {x.shape} does not match the {modality} segments {dataset.modality(modality).shape}")
    mean, std, lo, hi = dataset.affine[modality].T
    whitened = x * (hi - lo) + lo
    return whitened * std + mean if raw else whitened


def train_test_split(dataset: SegmentedDataset, train_fraction: float, seed: int) -> tuple[SegmentedDataset, SegmentedDataset]:
    """Seeded shuffle, then the first ``round(fraction * n)`` samples train.

    Each side keeps at least one sample.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DomainError(f"train fraction must lie strictly between 0 and 1, got {train_fraction}")
    if dataset.n_samples < 2:
        raise DataError(f"cannot split {dataset.n_samples} sample(s) into train and test partitions")
    order = make_rng(seed).permutation(dataset.n_samples)
    n_train = min(max(int(round(train_fraction * dataset.n_samples)), 1), dataset.n_samples - 1)
    return dataset.take(order[:n_train]), dataset.take(order[n_train:])


# Synthetic correlated data

@dataclass(frozen=True)
class SynthSpec:
    latent_dim: int = 4
    noise: float = 0.1
    n_samples: int = 2000
    seed: int = 0
    segment_dim: int = SEGMENT_DIM

    def __post_init__(self) -> None:
        problems = []
        if self.latent_dim < 2:
            problems.append(f"latent_dim must be >= 2 (two label criteria), got {self.latent_dim}")
        if self.latent_dim >= self.segment_dim:
            problems.append(f"latent_dim {self.latent_dim} must be below segment_dim {self.segment_dim}")
        if not self.noise >= 0:
            problems.append(f"noise must be non-negative, got {self.noise}")
        if self.n_samples < 1:
            problems.append(f"n_samples must be positive, got {self.n_samples}")
        if problems:
            raise ConfigError(problems)


def _smooth_mixing(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, rows)[:, None]
    freqs = rng.uniform(0.5, 4.0, size=cols)
    phases = rng.uniform(0.0, 2 * np.pi, size=cols)
    return np.sin(2 * np.pi * freqs * t + phases) * np.sqrt(2.0 / cols)


def _global_minmax(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    lo, hi = float(x.min()), float(x.max())
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0), lo, hi


def synth_multimodal(spec: SynthSpec) -> SegmentedDataset:
    """Two distinct smooth nonlinear mixtures of the same Gaussian latents
    plus independent noise; labels threshold latents 0 and 1 at zero."""
    latents = make_rng(derive_seed(spec.seed, "latents")).normal(size=(spec.latent_dim, spec.n_samples))
    mix_e = _smooth_mixing(make_rng(derive_seed(spec.seed, "mix.eeg")), spec.segment_dim, spec.latent_dim)
    mix_m = _smooth_mixing(make_rng(derive_seed(spec.seed, "mix.emg")), spec.segment_dim, spec.latent_dim)
    noise_e = make_rng(derive_seed(spec.seed, "noise.eeg")).normal(size=(spec.segment_dim, spec.n_samples))
    noise_m = make_rng(derive_seed(spec.seed, "noise.emg")).normal(size=(spec.segment_dim, spec.n_samples))

    pre_m = mix_m @ latents
    eeg = np.tanh(mix_e @ latents) + spec.noise * noise_e
    emg = pre_m / (1.0 + np.abs(pre_m)) + spec.noise * noise_m

    affine = {}
    scaled = {}
    for name, values in ((EEG, eeg), (EMG, emg)):
        scaled[name], lo, hi = _global_minmax(values)
        affine[name] = np.tile([0.0, 1.0, lo, hi], (spec.n_samples, 1))
    return SegmentedDataset(
        eeg=scaled[EEG],
        emg=scaled[EMG],
        labels={
            "dominance": (latents[0] > 0).astype(np.int64),
            "arousal": (latents[1] > 0).astype(np.int64),
        },
        affine=affine,
    )


# Segment containers

def save_segments(dataset: SegmentedDataset, path: Path) -> Path:
    arrays = {EEG: dataset.eeg, EMG: dataset.emg, "skipped": np.asarray(dataset.skipped)}
    for criterion, values in dataset.labels.items():
        arrays[f"label.{criterion}"] = values
    for name, params in dataset.affine.items():
        arrays[f"affine.{name}"] = params
    for column in dataset.index.columns:
        arrays[f"index.{column}"] = dataset.index[column].to_numpy()
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    return path


def load_segments(path: Path) -> SegmentedDataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"segment container {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as npz:
            arrays = {key: npz[key] for key in npz.files}
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: unreadable segment container ({exc})") from exc
    if EEG not in arrays or EMG not in arrays:
        raise DataError(f"{path}: container lacks {EEG}/{EMG} arrays")
    index_cols = {k[len("index."):]: v for k, v in arrays.items() if k.startswith("index.")}
    return SegmentedDataset(
        eeg=arrays[EEG],
        emg=arrays[EMG],
        labels={k[len("label."):]: v for k, v in arrays.items() if k.startswith("label.")},
        index=pd.DataFrame(index_cols) if index_cols else None,
        affine={k[len("affine."):]: v for k, v in arrays.items() if k.startswith("affine.") and k[len("affine."):] in MODALITIES},
        skipped=int(arrays.get("skipped", 0)),
    )
