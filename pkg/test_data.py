import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lib.config import DEAP_TRIAL_SAMPLES, EEG, EMG
from lib.data import (
    SegmentedDataset,
    SynthSpec,
    TrialRecord,
    denormalize,
    discover_participants,
    load_deap,
    load_segments,
    save_deap,
    save_segments,
    segment_normalize,
    synth_multimodal,
    synth_trials,
    threshold_labels,
    train_test_split,
    trial_frame,
)
from lib.errors import ConfigError, DataError, DomainError


@pytest.fixture(scope="module")
def trials():
    return synth_trials(n_participants=2, n_videos=2, seed=0)


def test_threshold_labels():
    assert_array_equal(threshold_labels(np.array([1.0, 5.0, 5.01, 9.0])), [0, 0, 1, 1])
    ratings = np.array([[6.0, 4.0, 7.0, 2.0], [3.0, 8.0, 5.0, 9.0]])
    assert_array_equal(threshold_labels(ratings, "dominance"), [1, 0])
    with pytest.raises(DomainError):
        threshold_labels(np.array([0.5]))
    with pytest.raises(DomainError):
        threshold_labels(ratings, "boredom")


def test_trial_record_validation():
    with pytest.raises(DataError):
        TrialRecord(1, 1, np.zeros((2, 100)), np.full(4, 5.0))
    with pytest.raises(DataError):
        TrialRecord(1, 1, np.zeros((2, DEAP_TRIAL_SAMPLES)), np.array([5.0, 5.0, 5.0, 12.0]))


def test_deap_round_trip(trials, tmp_path):
    written = save_deap(trials, tmp_path)
    assert [p.name for p in written] == ["s01.dat", "s02.dat"]
    assert discover_participants(tmp_path) == [1, 2]
    loaded = load_deap(tmp_path)
    assert len(loaded) == 4
    assert_array_equal(loaded[3].channels, trials[3].channels)
    assert loaded[3].rating("arousal") == trials[3].rating("arousal")
    frame = trial_frame(loaded)
    assert list(frame["participant"]) == [1, 1, 2, 2]


def test_deap_loader_reports_bad_participants(trials, tmp_path):
    save_deap(trials[:2], tmp_path)
    with pytest.raises(DataError, match="participant 2"):
        load_deap(tmp_path, participants=[1, 2])
    (tmp_path / "s01.dat").write_bytes(b"\x80\x04garbage")
    with pytest.raises(DataError, match="participant 1"):
        load_deap(tmp_path, participants=[1])
    with pytest.raises(DataError):
        discover_participants(tmp_path / "nowhere")


def test_segmentation_shapes_and_labels(trials):
    dataset = segment_normalize(trials, segment_dim=896, criteria=("dominance", "arousal"))
    assert dataset.segment_dim == 896
    assert dataset.n_samples == 4 * 2 * 9
    assert dataset.eeg.min() >= 0.0 and dataset.eeg.max() <= 1.0
    assert dataset.skipped == 0
    first = dataset.index.iloc[0]
    assert (first["participant"], first["video"], first["pair"], first["segment"]) == (1, 1, 0, 0)
    expected = int(trials[0].rating("dominance") > 5.0)
    assert np.all(dataset.label("dominance")[:18] == expected)
    with pytest.raises(DataError):
        dataset.label("liking")


def test_denormalize_recovers_the_raw_segment(trials):
    dataset = segment_normalize(trials[:1], segment_dim=896)
    raw = denormalize(dataset, EMG, raw=True)
    assert_allclose(raw[:, 0], trials[0].channels[34, :896], atol=1e-9)
    assert_allclose(raw[:, 10], trials[0].channels[35, 896:1792], atol=1e-9)


def test_trim_and_bad_segment_lengths(trials):
    trimmed = segment_normalize(trials[:1], segment_dim=1000, trim=64)
    assert trimmed.n_samples == 2 * 8
    with pytest.raises(ConfigError) as info:
        segment_normalize(trials[:1], eeg_channels=(0,), emg_channels=(34, 35), segment_dim=1000, criteria=("mood",))
    assert len(info.value.problems) == 3


def test_zero_variance_pairs_are_skipped(trials):
    channels = trials[0].channels.copy()
    channels[0] = 1.0
    flat = TrialRecord(1, 1, channels, trials[0].ratings)
    with pytest.warns(UserWarning, match="skipped 9"):
        dataset = segment_normalize([flat], segment_dim=896)
    assert dataset.skipped == 9
    assert dataset.n_samples == 9
    assert set(dataset.index["pair"]) == {1}


def test_missing_channel(trials):
    with pytest.raises(DataError):
        segment_normalize(trials[:1], eeg_channels=(0,), emg_channels=(99,), segment_dim=896)


def test_split_is_seeded_and_disjoint(tiny_dataset):
    train, test = train_test_split(tiny_dataset, 0.75, seed=3)
    assert train.n_samples == 150 and test.n_samples == 50
    again, _ = train_test_split(tiny_dataset, 0.75, seed=3)
    assert_array_equal(train.eeg, again.eeg)
    assert not set(train.index["sample"]) & set(test.index["sample"])
    with pytest.raises(DomainError):
        train_test_split(tiny_dataset, 1.0, seed=0)


@pytest.mark.parametrize("fraction,sizes", [(0.9, (2, 1)), (0.1, (1, 2)), (0.5, (2, 1))])
def test_split_keeps_a_sample_on_each_side(tiny_dataset, fraction, sizes):
    train, test = train_test_split(tiny_dataset.take(np.arange(3)), fraction, seed=0)
    assert (train.n_samples, test.n_samples) == sizes


def test_split_needs_two_samples(tiny_dataset):
    with pytest.raises(DataError, match="cannot split"):
        train_test_split(tiny_dataset.take(np.arange(1)), 0.5, seed=0)


def test_rating_of_five_segments_as_low(trials):
    low = TrialRecord(1, 1, trials[0].channels, np.full(4, 5.0))
    high = TrialRecord(1, 2, trials[1].channels, np.full(4, 5.5))
    dataset = segment_normalize([low, high], segment_dim=896)
    assert_array_equal(dataset.label("dominance"), [0] * 18 + [1] * 18)


def test_synth_trials_stay_within_the_deap_layout():
    with pytest.raises(ConfigError) as info:
        synth_trials(n_participants=0, n_videos=41)
    assert len(info.value.problems) == 2


def test_synth_is_deterministic_and_normalized():
    spec = SynthSpec(latent_dim=3, n_samples=50, segment_dim=16, seed=9)
    a, b = synth_multimodal(spec), synth_multimodal(spec)
    assert_array_equal(a.emg, b.emg)
    assert a.eeg.min() == 0.0 and a.eeg.max() == 1.0
    assert set(np.unique(a.label("arousal"))) <= {0, 1}
    assert_allclose(denormalize(a, EEG)[:, 0], a.eeg[:, 0] * (a.affine[EEG][0, 3] - a.affine[EEG][0, 2]) + a.affine[EEG][0, 2])


def test_synth_spec_problems():
    with pytest.raises(ConfigError) as info:
        SynthSpec(latent_dim=1, noise=-1.0, n_samples=0, segment_dim=4)
    assert len(info.value.problems) == 3


def test_segments_container_round_trip(trials, tmp_path):
    dataset = segment_normalize(trials[:1], segment_dim=896)
    path = save_segments(dataset, tmp_path / "segments.npz")
    loaded = load_segments(path)
    assert_array_equal(loaded.eeg, dataset.eeg)
    assert_array_equal(loaded.label("arousal"), dataset.label("arousal"))
    assert_array_equal(loaded.affine[EMG], dataset.affine[EMG])
    assert list(loaded.index["video"]) == list(dataset.index["video"])
    with pytest.raises(DataError):
        load_segments(tmp_path / "absent.npz")


def test_dataset_rejects_out_of_range_values():
    with pytest.raises(DataError):
        SegmentedDataset(np.full((2, 2), 1.5), np.zeros((2, 2)))
    with pytest.raises(DataError):
        SegmentedDataset(np.zeros((2, 2)), np.zeros((2, 2)), labels={"arousal": np.array([0, 2])})
