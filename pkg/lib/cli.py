"""
Command layer: run configuration, the cmd_* entry points and the argument parser.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from lib.autoencoder import (
    StackedEncoder,
    TrainConfig,
    ae_gradient,
    ae_objective,
    greedy_pretrain,
    init_autoencoder,
)
from lib.codec_io import decode, encode, load_codes, load_model, save_codes, save_model
from lib.config import (
    ACCURACY_FILE,
    ARCHITECTURE_ROWS,
    CLASSIFY_PARTITION,
    CURVES_FILE,
    DEFAULT_FINE_TUNE_EPOCHS,
    DEFAULT_MULTIMODAL_EPOCHS,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
    EEG,
    EEG_CHANNELS,
    EMG,
    EMG_CHANNELS,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_DIVERGED,
    EXIT_FAILURE,
    EXIT_FORMAT,
    EXIT_OK,
    FD_STEP,
    GRADCHECK_CASES,
    GRADCHECK_TOLERANCE,
    LOCK_FILE,
    MODALITIES,
    MODEL_SUFFIX,
    PARTITION_FILE,
    PARTITIONS,
    REPORTS_FILE,
    RUN_CONFIG_FILE,
    SEGMENT_DIM,
    TRAIN_LOG_FILE,
    TRIM_SAMPLES,
)
from lib.data import (
    DEFAULT_CRITERIA,
    SegmentedDataset,
    SynthSpec,
    denormalize,
    load_deap,
    load_segments,
    save_deap,
    save_segments,
    segment_normalize,
    synth_multimodal,
    synth_trials,
    train_test_split,
    trial_frame,
)
from lib.errors import ConfigError, DataError, DomainError, FormatError, MMAEError, TrainingDivergedError
from lib.metrics import (
    PRD_COLUMNS,
    accuracy,
    build_curve,
    canonical_correlations,
    compression_ratio,
    distortion_prd,
    prd_distribution_frame,
    prd_per_sample,
    save_curves,
    save_reports,
    summarize_distribution,
)
from lib.multimodal import (
    MultimodalBatch,
    MultimodalModel,
    UnimodalClassifier,
    augment_modality_dropout,
    classify,
    classify_unimodal,
    fine_tune,
    init_head,
    init_multimodal,
    joint_forward,
    multimodal_decode,
    multimodal_gradient,
    multimodal_objective,
    random_multimodal,
    train_multimodal,
    train_unimodal_classifier,
    unimodal_gradient,
)
from lib.nn_core import ActivationKind, LossKind, Params, derive_seed, finite_difference_grad, make_rng, relative_error

logger = logging.getLogger(__name__)

BANNER = "=" * 50


# Run configuration

@dataclass(frozen=True)
class DataSection:
    source: str = "synth"  # synth | deap | segments
    deap_dir: Optional[Path] = None
    segments: Optional[Path] = None
    participants: tuple[int, ...] = ()
    eeg_channels: tuple[int, ...] = EEG_CHANNELS
    emg_channels: tuple[int, ...] = EMG_CHANNELS
    segment_dim: int = SEGMENT_DIM
    trim: int = TRIM_SAMPLES
    criteria: tuple[str, ...] = DEFAULT_CRITERIA

    def __post_init__(self) -> None:
        problems = []
        if self.source not in ("synth", "deap", "segments"):
            problems.append(f"source must be synth, deap or segments, got {self.source!r}")
        if self.source == "deap" and (self.deap_dir is None or not Path(self.deap_dir).is_dir()):
            problems.append(f"deap_dir {self.deap_dir} is not a directory")
        if self.source == "segments" and (self.segments is None or not Path(self.segments).is_file()):
            problems.append(f"segments file {self.segments} does not exist")
        if len(self.eeg_channels) != len(self.emg_channels):
            problems.append("eeg_channels and emg_channels must have the same length")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ModelSection:
    pathway_dims: tuple[int, ...] = (440,)
    joint_dim: int = 179
    update_pathways: bool = False
    fine_tune: bool = False
    fine_tune_criterion: str = "dominance"

    def __post_init__(self) -> None:
        problems = []
        if not self.pathway_dims or any(int(d) < 1 for d in self.pathway_dims):
            problems.append(f"pathway_dims must be positive, got {list(self.pathway_dims)}")
        if self.joint_dim < 1:
            problems.append(f"joint_dim must be positive, got {self.joint_dim}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class EvalSection:
    rows: tuple[dict, ...] = tuple(ARCHITECTURE_ROWS)
    dwt_mode: str = "calibrate"  # calibrate | table
    partitions: tuple[float, ...] = tuple(PARTITIONS)
    original_scale: bool = False

    def __post_init__(self) -> None:
        problems = []
        if self.dwt_mode not in ("calibrate", "table"):
            problems.append(f"dwt_mode must be calibrate or table, got {self.dwt_mode!r}")
        for i, row in enumerate(self.rows):
            missing = {"pathway_dim", "joint_dim", "dwt_eeg", "dwt_emg", "cr"} - set(row)
            if missing:
                problems.append(f"row {i} lacks {sorted(missing)}")
        for p in self.partitions:
            if not 0 < p < 1:
                problems.append(f"partition {p} outside (0, 1)")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ClassifySection:
    criteria: tuple[str, ...] = DEFAULT_CRITERIA
    partition: float = CLASSIFY_PARTITION
    unimodal: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.partition < 1:
            raise ConfigError(f"partition {self.partition} outside (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: Path = DEFAULT_OUTPUT_DIR
    partition: float = 0.5
    data: DataSection = field(default_factory=DataSection)
    synth: SynthSpec = field(default_factory=SynthSpec)
    model: ModelSection = field(default_factory=ModelSection)
    pretrain: TrainConfig = field(default_factory=TrainConfig)
    multimodal: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=DEFAULT_MULTIMODAL_EPOCHS))
    fine_tune: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=DEFAULT_FINE_TUNE_EPOCHS))
    evaluation: EvalSection = field(default_factory=EvalSection)
    classify: ClassifySection = field(default_factory=ClassifySection)

    def as_dict(self) -> dict:
        return _plain(asdict(self))


_SECTIONS = {
    "data": DataSection,
    "synth": SynthSpec,
    "model": ModelSection,
    "pretrain": TrainConfig,
    "multimodal": TrainConfig,
    "fine_tune": TrainConfig,
    "evaluation": EvalSection,
    "classify": ClassifySection,
}
_SECTION_DEFAULTS = {
    "multimodal": {"epochs": DEFAULT_MULTIMODAL_EPOCHS},
    "fine_tune": {"epochs": DEFAULT_FINE_TUNE_EPOCHS},
}
_PATH_KEYS = {"deap_dir", "segments", "output_dir"}


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if is_dataclass(value):
        return _plain(asdict(value))
    return value


def _coerce(key: str, value, default):
    if key in _PATH_KEYS:
        return Path(value) if value not in (None, "") else None
    if isinstance(default, tuple) or isinstance(value, list):
        return tuple(value)
    return value


def _build_section(name: str, raw: dict, problems: list[str]):
    cls = _SECTIONS[name]
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        problems.append(f"[{name}] unknown keys {unknown}")
    defaults = cls(**_SECTION_DEFAULTS.get(name, {}))
    kwargs = dict(_SECTION_DEFAULTS.get(name, {}))
    for key, value in raw.items():
        if key in known:
            kwargs[key] = _coerce(key, value, getattr(defaults, key))
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        problems.extend(f"[{name}] {p}" for p in exc.problems)
    except (TypeError, ValueError) as exc:
        problems.append(f"[{name}] {exc}")
    return defaults


def run_config_from_dict(raw: dict) -> RunConfig:
    """Validate a parsed config tree, reporting every problem at once."""
    problems: list[str] = []
    top_level = {"seed", "output_dir", "partition"}
    unknown = sorted(set(raw) - top_level - set(_SECTIONS))
    if unknown:
        problems.append(f"unknown top-level keys {unknown}")
    if "seed" not in raw:
        problems.append("seed is mandatory")
    seed = raw.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or seed < 0:
        problems.append(f"seed must be a nonnegative integer, got {seed!r}")
        seed = DEFAULT_SEED
    partition = raw.get("partition", 0.5)
    if not isinstance(partition, (int, float)) or not 0 < partition < 1:
        problems.append(f"partition {partition!r} outside (0, 1)")
    sections = {}
    for name in _SECTIONS:
        section = raw.get(name, {})
        if not isinstance(section, dict):
            problems.append(f"[{name}] must be a table")
            section = {}
        sections[name] = _build_section(name, section, problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(
        seed=seed,
        output_dir=Path(raw.get("output_dir", DEFAULT_OUTPUT_DIR)),
        partition=float(partition),
        **sections,
    )


def _parse_literal(text: str):
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``section.key=value`` overrides; values are TOML literals."""
    problems = []
    for item in overrides:
        path, sep, text = item.partition("=")
        if not sep or not path:
            problems.append(f"override {item!r} is not key=value")
            continue
        node = raw
        *parents, leaf = path.strip().split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                problems.append(f"override {item!r}: {part} is not a table")
                break
        else:
            node[leaf] = _parse_literal(text.strip())
    if problems:
        raise ConfigError(problems)
    return raw


def load_run_config(path: Optional[Path], overrides: Sequence[str] = ()) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")
    return run_config_from_dict(apply_overrides(raw, overrides))


@contextlib.contextmanager
def run_lock(run_dir: Path) -> Iterator[Path]:
    """Exclusive ownership of a run directory for the duration of a command."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"run directory {run_dir} is locked ({lock} exists)")
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield run_dir
    finally:
        lock.unlink(missing_ok=True)


def _write_run_config(cfg: RunConfig, run_dir: Path) -> None:
    with open(run_dir / RUN_CONFIG_FILE, "w") as f:
        json.dump(cfg.as_dict(), f, indent=2, sort_keys=True)


# Shared pipeline pieces

def load_dataset(cfg: RunConfig) -> SegmentedDataset:
    data = cfg.data
    if data.source == "synth":
        return synth_multimodal(replace(cfg.synth, seed=derive_seed(cfg.seed, "synth")))
    if data.source == "segments":
        return load_segments(data.segments)
    records = load_deap(data.deap_dir, list(data.participants) or None)
    return segment_normalize(records, data.eeg_channels, data.emg_channels, data.segment_dim, data.trim, data.criteria)


def _seeded(train_cfg: TrainConfig, root: int, label: str) -> TrainConfig:
    return replace(train_cfg, seed=derive_seed(root, label))


def fit_multimodal(
    cfg: RunConfig,
    train: SegmentedDataset,
    labels: Optional[np.ndarray] = None,
) -> tuple[MultimodalModel, pd.DataFrame]:
    """Greedy pathway pretraining, joint training and optional fine-tuning."""
    dims = [train.segment_dim, *cfg.model.pathway_dims]
    rows = []
    stacks = {}
    for name in MODALITIES:
        try:
            stack = greedy_pretrain(dims, train.modality(name), _seeded(cfg.pretrain, cfg.seed, f"pretrain.{name}"))
        except TrainingDivergedError as exc:
            raise exc.tagged(f"{name} pathway") from exc
        for layer, history in enumerate(stack.history):
            rows.extend({"stage": f"pretrain.{name}.{layer}", "epoch": e, "objective": v} for e, v in enumerate(history))
        stacks[name] = stack

    model = init_multimodal(stacks[EEG], stacks[EMG], cfg.model.joint_dim, derive_seed(cfg.seed, "joint"), cfg.multimodal.lam)
    batch = MultimodalBatch.paired(train.eeg, train.emg)
    model, history = train_multimodal(
        model, batch, _seeded(cfg.multimodal, cfg.seed, "multimodal"), update_pathways=cfg.model.update_pathways
    )
    rows.extend({"stage": "multimodal", "epoch": e, "objective": v} for e, v in enumerate(history))
    if labels is not None:
        model, history = fine_tune(model, batch, labels, _seeded(cfg.fine_tune, cfg.seed, "fine_tune"))
        rows.extend({"stage": "fine_tune", "epoch": e, "objective": v} for e, v in enumerate(history))
    return model, pd.DataFrame(rows, columns=["stage", "epoch", "objective"])


def _split(cfg: RunConfig, dataset: SegmentedDataset, fraction: float) -> tuple[SegmentedDataset, SegmentedDataset]:
    return train_test_split(dataset, fraction, derive_seed(cfg.seed, f"split.{fraction}"))


# Commands

def cmd_train(cfg: RunConfig) -> Path:
    print("🎯 Training multimodal autoencoder")
    print(BANNER)
    with run_lock(cfg.output_dir) as run_dir:
        dataset = load_dataset(cfg)
        train, _ = _split(cfg, dataset, cfg.partition)
        print(f"📊 Segments: {dataset.n_samples:,} ({train.n_samples:,} for training), dim {dataset.segment_dim}")
        labels = train.label(cfg.model.fine_tune_criterion) if cfg.model.fine_tune else None
        model, log = fit_multimodal(cfg, train, labels)

        artifact = run_dir / f"model{MODEL_SUFFIX}"
        fp = save_model(model, artifact, cfg.as_dict())
        log.to_csv(run_dir / TRAIN_LOG_FILE, index=False)
        _write_run_config(cfg, run_dir)

    print(f"✅ CR {compression_ratio(model.joint_dim, model.eeg_stack.input_dim):.2f}% "
          f"(joint {model.joint_dim} of {model.eeg_stack.input_dim})")
    print(f"💾 Model: {artifact} (fingerprint {fp})")
    print(f"💾 Training log: {run_dir / TRAIN_LOG_FILE} ({len(log)} epochs)")
    return artifact


def cmd_compress(model_path: Path, data_path: Path, out_path: Path):
    artifact = load_model(model_path)
    dataset = load_segments(data_path)
    code = encode(artifact.model, MultimodalBatch.paired(dataset.eeg, dataset.emg))
    save_codes(code, out_path)
    cr = compression_ratio(code.joint_dim, artifact.model.eeg_stack.input_dim)
    print(f"📦 Encoded {code.n_samples:,} segments to {code.joint_dim} values each")
    print(f"✅ CR {cr:.2f}%")
    print(f"💾 Codes: {out_path}")
    return code


def cmd_decompress(
    model_path: Path,
    codes_path: Path,
    out_path: Path,
    reference: Optional[Path] = None,
) -> dict[str, float]:
    artifact = load_model(model_path)
    code = load_codes(codes_path)
    recon_eeg, recon_emg = decode(artifact.model, code)
    save_segments(SegmentedDataset(recon_eeg, recon_emg), out_path)
    print(f"📦 Decoded {code.n_samples:,} segments")
    prds: dict[str, float] = {}
    if reference is not None:
        ref = load_segments(reference)
        prds = {EEG: distortion_prd(ref.eeg, recon_eeg), EMG: distortion_prd(ref.emg, recon_emg)}
        print(f"📊 PRD EEG {prds[EEG]:.2f}%  EMG {prds[EMG]:.2f}%")
    print(f"💾 Reconstruction: {out_path}")
    return prds


def _per_sample_prds(model: MultimodalModel, test: SegmentedDataset, original_scale: bool) -> dict[str, np.ndarray]:
    recon = multimodal_decode(model, joint_forward(model, MultimodalBatch.paired(test.eeg, test.emg)))
    out = {}
    for name, r in zip(MODALITIES, recon):
        if original_scale:
            out[name] = prd_per_sample(denormalize(test, name), denormalize(test, name, values=r))
        else:
            out[name] = prd_per_sample(test.modality(name), r)
    return out


def cmd_eval(cfg: RunConfig) -> dict[str, Path]:
    print("🎯 Distortion / compression evaluation")
    print(BANNER)
    rows = list(cfg.evaluation.rows)
    with run_lock(cfg.output_dir) as run_dir:
        dataset = load_dataset(cfg)
        train, test = _split(cfg, dataset, cfg.partition)
        base_seed = derive_seed(cfg.seed, "curve")
        curves, reports = [], []
        for method in ("multimodal", "dwt"):
            print(f"📊 {method}: {len(rows)} configurations")
            by_modality, method_reports = build_curve(
                method, rows, train, test, cfg.pretrain, cfg.multimodal, base_seed,
                dwt_mode=cfg.evaluation.dwt_mode, partition=cfg.partition,
            )
            curves.extend(by_modality.values())
            reports.extend(method_reports)
        save_curves(curves, run_dir / CURVES_FILE)
        save_reports(reports, run_dir / REPORTS_FILE)

        frames = []
        for fraction in cfg.evaluation.partitions:
            part_train, part_test = _split(cfg, dataset, fraction)
            model, _ = fit_multimodal(cfg, part_train)
            frames.append(prd_distribution_frame(fraction, _per_sample_prds(model, part_test, cfg.evaluation.original_scale)))
            print(f"📊 partition {fraction:.2f}: {part_test.n_samples:,} test segments")
        distribution = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=PRD_COLUMNS)
        distribution.to_csv(run_dir / PARTITION_FILE, index=False)
        _write_run_config(cfg, run_dir)

    for curve in curves:
        print(f"  {curve.method:<10} {curve.modality}: " +
              ", ".join(f"{p.cr:.0f}%→{p.prd:.1f}" for p in curve.points))
    if frames:
        print(summarize_distribution(distribution).to_string(index=False))
    outputs = {"curves": run_dir / CURVES_FILE, "reports": run_dir / REPORTS_FILE, "partitions": run_dir / PARTITION_FILE}
    for path in outputs.values():
        print(f"💾 {path}")
    return outputs


def cmd_classify(cfg: RunConfig) -> pd.DataFrame:
    """Multimodal vs unimodal accuracy per label criterion on one split.

    Unimodal baselines get the same pretraining and as many supervised epochs
    as the multimodal model's joint training plus fine-tuning.
    """
    print("🎯 Classification")
    print(BANNER)
    rows = []
    with run_lock(cfg.output_dir) as run_dir:
        dataset = load_dataset(cfg)
        train, test = _split(cfg, dataset, cfg.classify.partition)
        test_batch = MultimodalBatch.paired(test.eeg, test.emg)
        for criterion in cfg.classify.criteria:
            y_train, y_test = train.label(criterion), test.label(criterion)
            model, _ = fit_multimodal(cfg, train, y_train)
            predicted, _ = classify(model, test_batch)
            rows.append({"criterion": criterion, "method": "multimodal", "accuracy": accuracy(predicted, y_test)})
            if cfg.classify.unimodal:
                tune = replace(cfg.fine_tune, epochs=cfg.multimodal.epochs + cfg.fine_tune.epochs)
                dims = [train.segment_dim, *cfg.model.pathway_dims]
                for name in MODALITIES:
                    clf, _ = train_unimodal_classifier(
                        train.modality(name), y_train, dims,
                        _seeded(cfg.pretrain, cfg.seed, f"pretrain.{name}"),
                        _seeded(tune, cfg.seed, f"unimodal.{name}"),
                        modality=name,
                    )
                    predicted, _ = classify_unimodal(clf, test.modality(name))
                    rows.append({"criterion": criterion, "method": f"unimodal-{name}", "accuracy": accuracy(predicted, y_test)})
        table = pd.DataFrame(rows, columns=["criterion", "method", "accuracy"])
        table.to_csv(run_dir / ACCURACY_FILE, index=False)
        _write_run_config(cfg, run_dir)

    for row in rows:
        print(f"  📊 {row['criterion']:<10} {row['method']:<14} {row['accuracy']:.1f}%")
    print(f"💾 {run_dir / ACCURACY_FILE}")
    return table


# Gradient check suite

def _random_unimodal(seed: int, dims: Sequence[int], n_classes: int, lam: float) -> UnimodalClassifier:
    layers = tuple(
        init_autoencoder(d_in, d_out, derive_seed(seed, f"layer.{i}"), lam=lam)
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:]))
    )
    labels = tuple(f"class{k}" for k in range(n_classes))
    return UnimodalClassifier(EEG, StackedEncoder(layers), init_head(dims[-1], derive_seed(seed, "head"), labels), lam)


def gradcheck_cases(n_cases: int = GRADCHECK_CASES) -> list[tuple[str, Callable[[Params], float], Params, Params]]:
    """Seeded miniature objectives as (name, objective, params, analytic grads)."""
    kinds = [
        (ActivationKind.SIGMOID, LossKind.SQUARED_ERROR),
        (ActivationKind.SIGMOID, LossKind.CROSS_ENTROPY),
        (ActivationKind.TANH, LossKind.SQUARED_ERROR),
        (ActivationKind.IDENTITY, LossKind.SQUARED_ERROR),
    ]
    cases = []
    for i in range(n_cases):
        rng = make_rng(derive_seed(DEFAULT_SEED, f"gradcheck.{i}"))
        family = i % 4
        if family == 0:
            activation, loss_kind = kinds[(i // 4) % len(kinds)]
            ae = init_autoencoder(5, 3, derive_seed(i, "ae"), activation, lam=0.01, loss_kind=loss_kind)
            ae = replace(ae, b=rng.normal(0, 0.1, 3), b_prime=rng.normal(0, 0.1, 5))
            x = rng.uniform(0.05, 0.95, size=(5, 4))
            cases.append((
                f"ae-{activation.value}-{loss_kind.value}",
                lambda p, ae=ae, x=x: ae_objective(ae.with_params(p), x),
                ae.params(),
                ae_gradient(ae, x),
            ))
        elif family == 1:
            clf = _random_unimodal(derive_seed(i, "stacked"), [6, 4, 3], 2 + i % 2, 0.01)
            x = rng.uniform(0.0, 1.0, size=(6, 5))
            y = rng.integers(0, clf.head.n_classes, size=5)
            cases.append((
                "stacked-softmax",
                lambda p, clf=clf, x=x, y=y: unimodal_gradient(clf.with_params(p), x, y)[0],
                clf.params(),
                unimodal_gradient(clf, x, y)[1],
            ))
        else:
            with_head = family == 3
            model = random_multimodal([5, 4], [6, 3], 3, derive_seed(i, "mm"), n_classes=2 if with_head else 0, lam=0.01)
            batch = MultimodalBatch.paired(rng.uniform(0, 1, (5, 4)), rng.uniform(0, 1, (6, 4)))
            if with_head:
                inputs = targets = batch
                y = rng.integers(0, 2, size=batch.n_samples)
            else:
                inputs, targets = augment_modality_dropout(batch)
                y = None
            cases.append((
                "fine-tune" if with_head else "multimodal",
                lambda p, m=model, a=inputs, t=targets, y=y: multimodal_objective(m.with_params(p), a, t, y),
                model.params(),
                multimodal_gradient(model, inputs, targets, y),
            ))
    return cases


def cmd_gradcheck(
    n_cases: int = GRADCHECK_CASES,
    tolerance: float = GRADCHECK_TOLERANCE,
    perturb: Optional[Callable[[Params], Params]] = None,
) -> tuple[bool, pd.DataFrame]:
    """Compare analytic gradients with central differences; `perturb` lets a
    caller corrupt the analytic gradients to prove the harness can fail."""
    print("🎯 Gradient check")
    print(BANNER)
    rows = []
    for index, (name, objective, params, analytic) in enumerate(gradcheck_cases(n_cases)):
        if perturb is not None:
            analytic = perturb(analytic)
        numeric = finite_difference_grad(objective, params, FD_STEP)
        err = relative_error(analytic, numeric)
        rows.append({"case": index, "objective": name, "max_rel_error": err, "passed": err <= tolerance})
        print(f"  {'✅' if err <= tolerance else '❌'} {index:>2} {name:<30} {err:.2e}")
    table = pd.DataFrame(rows, columns=["case", "objective", "max_rel_error", "passed"])
    passed = bool(table["passed"].all())
    print(f"{'✅' if passed else '❌'} max relative error {table['max_rel_error'].max():.2e} (tolerance {tolerance:g})")
    return passed, table


def scale_perturbation(scale: float) -> Callable[[Params], Params]:
    return lambda grads: {k: g * (1.0 + scale) for k, g in grads.items()}


def cmd_synth(
    out_path: Path,
    spec: SynthSpec,
    deap_dir: Optional[Path] = None,
    participants: int = 2,
    videos: int = 2,
) -> SegmentedDataset:
    dataset = synth_multimodal(spec)
    save_segments(dataset, out_path)
    print(f"📊 {dataset.n_samples:,} segments of dim {dataset.segment_dim}, noise {spec.noise:g}")
    try:
        cca = canonical_correlations(dataset.eeg, dataset.emg)
        print(f"📊 first canonical correlation EEG/EMG: {cca[0]:.3f}")
    except DomainError as exc:
        logger.warning("canonical correlation skipped: %s", exc)
    for criterion, values in dataset.labels.items():
        print(f"  {criterion}: {values.mean() * 100:.1f}% high")
    print(f"💾 Segments: {out_path}")
    if deap_dir is not None:
        records = synth_trials(participants, videos, spec.seed, max(spec.noise, 0.0))
        written = save_deap(records, deap_dir)
        print(f"💾 DEAP-layout export: {len(written)} participant file(s), {len(trial_frame(records))} trials in {deap_dir}")
    return dataset


# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmae", description="Multimodal EEG/EMG autoencoder codec")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("train", "pretrain, train and save a model"),
        ("eval", "distortion vs CR curves and partition sweep"),
        ("classify", "multimodal and unimodal accuracy"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, nargs="?", help="TOML run config")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config leaf, e.g. model.joint_dim=179")

    p = sub.add_parser("compress", help="encode a segment container")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("decompress", help="decode a code file")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--codes", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--reference", type=Path, help="original segments, to print PRD")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--cases", type=int, default=GRADCHECK_CASES)
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    p.add_argument("--perturb", type=float, default=0.0, help="scale analytic gradients by (1 + PERTURB)")

    p = sub.add_parser("synth", help="emit a synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-samples", type=int, default=SynthSpec.n_samples)
    p.add_argument("--noise", type=float, default=SynthSpec.noise)
    p.add_argument("--latent-dim", type=int, default=SynthSpec.latent_dim)
    p.add_argument("--segment-dim", type=int, default=SynthSpec.segment_dim)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--deap-dir", type=Path, help="also export DEAP-layout trials here")
    p.add_argument("--participants", type=int, default=2)
    p.add_argument("--videos", type=int, default=2)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def run(args: argparse.Namespace) -> int:
    if args.command == "train":
        cmd_train(load_run_config(args.config, args.overrides))
    elif args.command == "eval":
        cmd_eval(load_run_config(args.config, args.overrides))
    elif args.command == "classify":
        cmd_classify(load_run_config(args.config, args.overrides))
    elif args.command == "compress":
        cmd_compress(args.model, args.data, args.out)
    elif args.command == "decompress":
        cmd_decompress(args.model, args.codes, args.out, args.reference)
    elif args.command == "gradcheck":
        perturb = scale_perturbation(args.perturb) if args.perturb else None
        passed, _ = cmd_gradcheck(args.cases, args.tolerance, perturb)
        return EXIT_OK if passed else EXIT_FAILURE
    elif args.command == "synth":
        spec = SynthSpec(args.latent_dim, args.noise, args.n_samples, args.seed, args.segment_dim)
        cmd_synth(args.out, spec, args.deap_dir, args.participants, args.videos)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        return run(args)
    except ConfigError as exc:
        print("❌ Configuration problems:")
        for problem in exc.problems:
            print(f"   - {problem}")
        return EXIT_CONFIG
    except DataError as exc:
        print(f"❌ Data error: {exc}")
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"❌ Training diverged: {exc}")
        return EXIT_DIVERGED
    except FormatError as exc:
        print(f"❌ {type(exc).__name__}: {exc}")
        return EXIT_FORMAT
    except MMAEError as exc:
        print(f"❌ {type(exc).__name__}: {exc}")
        return EXIT_FAILURE
