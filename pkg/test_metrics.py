from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from lib.autoencoder import TrainConfig
from lib.config import EEG, EMG
from lib.data import SynthSpec, synth_multimodal, train_test_split
from lib.errors import DomainError, ShapeMismatchError
from lib.metrics import (
    Curve,
    CurvePoint,
    EvalReport,
    accuracy,
    build_curve,
    canonical_correlations,
    compression_ratio,
    curves_from_reports,
    distortion_prd,
    load_curves,
    load_reports,
    prd_distribution_frame,
    prd_per_sample,
    save_curves,
    save_reports,
    summarize_distribution,
)


def test_compression_ratio():
    assert compression_ratio(179, 896) == pytest.approx(80.022321, abs=1e-6)
    assert compression_ratio(0, 10) == 100.0
    assert compression_ratio(10, 10) == 0.0
    with pytest.raises(DomainError):
        compression_ratio(11, 10)
    with pytest.raises(DomainError):
        compression_ratio(1, 0)


def test_prd_values():
    x = np.array([[3.0], [4.0]])
    assert distortion_prd(x, x) == 0.0
    assert distortion_prd(x, np.zeros((2, 1))) == pytest.approx(100.0)
    assert distortion_prd(x, np.array([[3.0], [3.0]])) == pytest.approx(20.0)
    assert distortion_prd(x, np.array([[3.0], [0.0]])) == pytest.approx(80.0, abs=1e-12)


def test_prd_guards():
    with pytest.raises(DomainError):
        distortion_prd(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ShapeMismatchError):
        distortion_prd(np.ones((2, 2)), np.ones((2, 3)))


def test_prd_per_sample():
    x = np.array([[3.0, 1.0], [4.0, 0.0]])
    r = np.array([[3.0, 0.5], [3.0, 0.0]])
    np.testing.assert_allclose(prd_per_sample(x, r), [20.0, 50.0])
    with pytest.raises(DomainError):
        prd_per_sample(np.zeros((2, 1)), np.zeros((2, 1)))


def test_accuracy_is_a_percentage():
    assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 75.0
    with pytest.raises(DomainError):
        accuracy([], [])
    with pytest.raises(ShapeMismatchError):
        accuracy([0, 1], [0])


def test_canonical_correlations_detect_shared_latents():
    shared = synth_multimodal(SynthSpec(latent_dim=4, noise=0.1, n_samples=4000, seed=0, segment_dim=8))
    assert canonical_correlations(shared.eeg, shared.emg)[0] > 0.5
    drowned = synth_multimodal(SynthSpec(latent_dim=4, noise=100.0, n_samples=4000, seed=0, segment_dim=8))
    assert canonical_correlations(drowned.eeg, drowned.emg)[0] < 0.2


def test_canonical_correlations_need_more_samples_than_dimensions():
    few = synth_multimodal(SynthSpec(latent_dim=3, noise=0.1, n_samples=30, seed=0, segment_dim=16))
    with pytest.raises(DomainError, match="more than 32 samples"):
        canonical_correlations(few.eeg, few.emg)


def test_report_validation_and_per_modality_cr():
    with pytest.raises(DomainError):
        EvalReport("multimodal", 120.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        EvalReport("multimodal", 50.0, -1.0, 1.0, accuracy=101.0)
    report = EvalReport("dwt", 60.0, 5.0, 7.0, cr_eeg=50.0, cr_emg=70.0)
    assert report.cr(EEG) == 50.0 and report.prd(EMG) == 7.0
    assert EvalReport("multimodal", 60.0, 5.0, 7.0).cr(EMG) == 60.0


def test_curve_requires_increasing_cr():
    with pytest.raises(DomainError):
        Curve("dwt", EEG, (CurvePoint(50.0, 1.0), CurvePoint(50.0, 2.0)))
    curves = curves_from_reports("dwt", [
        EvalReport("dwt", 80.0, 9.0, 8.0, cr_eeg=75.0, cr_emg=85.0),
        EvalReport("dwt", 40.0, 2.0, 3.0, cr_eeg=35.0, cr_emg=45.0),
    ])
    assert list(curves[EEG].crs) == [35.0, 75.0]
    assert list(curves[EMG].prds) == [3.0, 8.0]


def test_points_sharing_a_cr_are_merged(caplog):
    curves = curves_from_reports("dwt", [
        EvalReport("dwt", 80.0, 4.0, 8.0, cr_eeg=75.0, cr_emg=85.0),
        EvalReport("dwt", 80.0, 6.0, 9.0, cr_eeg=75.0, cr_emg=90.0),
    ])
    assert list(curves[EEG].crs) == [75.0]
    assert list(curves[EEG].prds) == [5.0]
    assert list(curves[EMG].crs) == [85.0, 90.0]
    assert "merged" in caplog.text


def test_curves_and_reports_persist(tmp_path):
    reports = [
        EvalReport("dwt", 40.0, 2.0, 3.0, cr_eeg=35.0, cr_emg=45.0, config={"row": {"cr": 40}}),
        EvalReport("multimodal", 80.0, 9.0, 8.0, accuracy=66.5, partition=0.75),
    ]
    save_reports(reports, tmp_path / "reports.csv")
    assert load_reports(tmp_path / "reports.csv") == reports

    curves = list(curves_from_reports("dwt", reports[:1]).values())
    save_curves(curves, tmp_path / "curves.csv")
    assert load_curves(tmp_path / "curves.csv") == curves


def test_distribution_tables():
    df = pd.concat([
        prd_distribution_frame(0.5, {EEG: np.array([1.0, 2.0, 3.0]), EMG: np.array([4.0, 5.0, 6.0])}),
        prd_distribution_frame(0.9, {EEG: np.array([1.0, 1.0, 1.0]), EMG: np.array([2.0, 2.0, 2.0])}),
    ])
    assert list(df.columns) == ["partition", "modality", "sample", "prd"]
    summary = summarize_distribution(df)
    assert len(summary) == 4
    row = summary[(summary["partition"] == 0.5) & (summary["modality"] == EMG)].iloc[0]
    assert row["50%"] == 5.0 and row["count"] == 3


@pytest.fixture(scope="module")
def split():
    data = synth_multimodal(SynthSpec(latent_dim=3, noise=0.05, n_samples=150, seed=2, segment_dim=256))
    return train_test_split(data, 0.5, seed=0)


def test_multimodal_curve(split):
    train, test = split
    cfg = TrainConfig(lr=0.1, epochs=2, batch_size=25, seed=0)
    rows = [{"pathway_dim": 32, "joint_dim": 16}, {"pathway_dim": 32, "joint_dim": 8}]
    curves, reports = build_curve("multimodal", rows, train, test, cfg, cfg, base_seed=5)
    assert [r.cr_percent for r in reports] == [93.75, 96.875]
    assert reports[1].config["joint"]["seed"] == 6
    assert list(curves[EEG].crs) == [93.75, 96.875]
    again, _ = build_curve("multimodal", rows[:1], train, test, cfg, cfg, base_seed=5)
    assert again[EMG].prds[0] == curves[EMG].prds[0]


def test_curve_rows_need_distinct_cr(split):
    train, test = split
    cfg = TrainConfig(epochs=1)
    rows = [{"pathway_dim": 32, "joint_dim": 8}, {"pathway_dim": 24, "joint_dim": 8}]
    with pytest.raises(DomainError):
        build_curve("multimodal", rows, train, test, cfg, cfg)


@pytest.mark.parametrize("dwt_mode", ["table", "calibrate"])
def test_dwt_curve(split, dwt_mode):
    train, test = split
    rows = [
        {"cr": 50, "dwt_eeg": 0.05, "dwt_emg": 0.05},
        {"cr": 90, "dwt_eeg": 0.4, "dwt_emg": 0.4},
    ]
    curves, reports = build_curve("dwt", rows, train, test, None, None, dwt_mode=dwt_mode, partition=0.6)
    assert all(r.partition == 0.6 for r in reports)
    assert curves[EEG].prds[0] <= curves[EEG].prds[1]
    if dwt_mode == "calibrate":
        assert reports[1].cr_eeg == pytest.approx(90.0, abs=5.0)


def test_unknown_curve_method(split):
    with pytest.raises(DomainError):
        build_curve("pca", [], *split, None, None)


def test_report_rows_are_flat():
    row = replace(EvalReport("dwt", 10.0, 1.0, 1.0), config={"b": 1, "a": 2}).as_row()
    assert row["config"] == '{"a": 2, "b": 1}'


@pytest.mark.slow
def test_full_architecture_table_gives_nine_ordered_points():
    from lib.config import ARCHITECTURE_ROWS

    data = synth_multimodal(SynthSpec(latent_dim=8, noise=0.1, n_samples=200, seed=0, segment_dim=896))
    train, test = train_test_split(data, 0.5, seed=0)
    cfg = TrainConfig(lr=0.05, epochs=1, batch_size=50, seed=0)
    curves, reports = build_curve("multimodal", ARCHITECTURE_ROWS, train, test, cfg, cfg)
    assert len(reports) == 9
    assert np.all(np.diff(curves[EEG].crs) > 0)
    assert curves[EEG].crs[0] == pytest.approx(10.04, abs=0.01)
