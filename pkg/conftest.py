"""
Shared fixtures: seeded tiny datasets, models and run configs.
"""
from dataclasses import replace

import numpy as np
import pytest

from lib.autoencoder import TrainConfig, greedy_pretrain
from lib.data import SegmentedDataset, SynthSpec, synth_multimodal
from lib.multimodal import MultimodalBatch, init_multimodal, train_multimodal
from lib.nn_core import make_rng


@pytest.fixture(scope="session")
def tiny_dataset():
    return synth_multimodal(SynthSpec(latent_dim=3, noise=0.05, n_samples=200, seed=1, segment_dim=16))


@pytest.fixture
def fast_cfg():
    return TrainConfig(lr=0.1, epochs=5, batch_size=20, lam=1e-4, seed=0)


@pytest.fixture(scope="session")
def trained_model(tiny_dataset):
    cfg = TrainConfig(lr=0.1, epochs=5, batch_size=20, lam=1e-4, seed=0)
    eeg = greedy_pretrain([16, 12], tiny_dataset.eeg, cfg)
    emg = greedy_pretrain([16, 12], tiny_dataset.emg, replace(cfg, seed=7))
    model = init_multimodal(eeg, emg, 8, seed=3, lam=cfg.lam)
    model, _ = train_multimodal(model, MultimodalBatch.paired(tiny_dataset.eeg, tiny_dataset.emg), cfg)
    return model


@pytest.fixture(scope="session")
def cross_modal():
    """A model trained long enough on correlated data to fill in a missing modality."""
    dataset = synth_multimodal(SynthSpec(latent_dim=3, noise=0.05, n_samples=600, seed=2, segment_dim=32))
    pre = TrainConfig(lr=0.1, epochs=20, batch_size=20, lam=1e-5, seed=0)
    eeg = greedy_pretrain([32, 16], dataset.eeg, pre)
    emg = greedy_pretrain([32, 16], dataset.emg, replace(pre, seed=5))
    model = init_multimodal(eeg, emg, 8, seed=1, lam=pre.lam)
    model, _ = train_multimodal(
        model, MultimodalBatch.paired(dataset.eeg, dataset.emg), replace(pre, epochs=30, batch_size=30)
    )
    return dataset, model


def tiny_run_dict(output_dir, **sections):
    """A run config tree small enough to train in a second or two."""
    raw = {
        "seed": 0,
        "output_dir": str(output_dir),
        "partition": 0.5,
        "data": {"source": "synth"},
        "synth": {"latent_dim": 3, "noise": 0.05, "n_samples": 120, "segment_dim": 256},
        "model": {"pathway_dims": [16], "joint_dim": 8},
        "pretrain": {"lr": 0.1, "epochs": 3, "batch_size": 20},
        "multimodal": {"lr": 0.1, "epochs": 3, "batch_size": 20},
        "fine_tune": {"lr": 0.1, "epochs": 3, "batch_size": 20},
        "evaluation": {
            "partitions": [0.5, 0.75],
            "rows": [
                {"pathway_dim": 16, "joint_dim": 8, "dwt_eeg": 0.29, "dwt_emg": 0.51, "cr": 96.875},
                {"pathway_dim": 16, "joint_dim": 4, "dwt_eeg": 0.83, "dwt_emg": 0.74, "cr": 98.4375},
            ],
        },
        "classify": {"criteria": ["dominance"], "partition": 0.75},
    }
    for name, values in sections.items():
        if isinstance(values, dict):
            raw.setdefault(name, {}).update(values)
        else:
            raw[name] = values
    return raw


@pytest.fixture
def run_dict(tmp_path):
    return lambda **sections: tiny_run_dict(sections.pop("output_dir", tmp_path / "run"), **sections)


@pytest.fixture(scope="session")
def separable_segments():
    """Two well-separated clusters per modality; the dominance label names the cluster."""
    rng = make_rng(6)
    labels = np.arange(200) % 2
    centre = 0.25 + 0.5 * labels
    eeg = np.clip(centre + rng.normal(0.0, 0.05, (32, 200)), 0.0, 1.0)
    emg = np.clip(1.0 - centre + rng.normal(0.0, 0.05, (32, 200)), 0.0, 1.0)
    return SegmentedDataset(eeg, emg, labels={"dominance": labels, "arousal": 1 - labels})
