import numpy as np
import pytest
from numpy.testing import assert_allclose

from lib.dwt_baseline import (
    WaveletConfig,
    calibrate_threshold,
    compress_batch,
    dwt_codec_eval,
    dwt_forward,
    dwt_inverse,
    reconstruct,
    threshold_compress,
)
from lib.errors import ConfigError, DomainError
from lib.metrics import distortion_prd
from lib.nn_core import make_rng


@pytest.mark.parametrize("length", [256, 300, 896])
def test_transform_is_perfectly_invertible(length):
    signal = make_rng(length).normal(size=length)
    cfg = WaveletConfig()
    coeffs = dwt_forward(signal, cfg)
    assert len(coeffs) == cfg.levels + 1
    assert_allclose(dwt_inverse(coeffs, cfg, length), signal, atol=1e-10)


def test_zero_threshold_is_lossless():
    signal = make_rng(0).normal(size=256)
    sparse, cr = threshold_compress(signal, WaveletConfig(threshold=0.0))
    assert cr == 0.0
    assert_allclose(reconstruct(sparse, WaveletConfig()), signal, atol=1e-10)


def test_cr_and_prd_grow_with_threshold():
    signal = np.sin(np.linspace(0, 20, 512)) + 0.2 * make_rng(1).normal(size=512)
    results = []
    for threshold in (0.05, 0.2, 0.8):
        cfg = WaveletConfig(threshold=threshold)
        sparse, cr = threshold_compress(signal, cfg)
        results.append((cr, distortion_prd(signal, reconstruct(sparse, cfg))))
    crs, prds = zip(*results)
    assert list(crs) == sorted(crs) and crs[0] < crs[-1]
    assert list(prds) == sorted(prds)


def test_everything_discarded():
    signal = make_rng(2).normal(size=128)
    cfg = WaveletConfig(threshold=1e9)
    sparse, cr = threshold_compress(signal, cfg)
    assert cr == 100.0 and sparse.retained == 0
    assert distortion_prd(signal, reconstruct(sparse, cfg)) == pytest.approx(100.0)


def test_config_problems_are_collected():
    with pytest.raises(ConfigError) as info:
        WaveletConfig(order=99, levels=0, threshold=-1.0)
    assert len(info.value.problems) == 3
    assert WaveletConfig(order=4).filter_length == 8


def test_short_signal_is_rejected():
    with pytest.raises(DomainError):
        dwt_forward(np.ones(5), WaveletConfig())


def test_inverse_checks_level_count():
    cfg = WaveletConfig()
    coeffs = dwt_forward(np.ones(256), cfg)
    with pytest.raises(DomainError):
        dwt_inverse(coeffs[:-1], cfg)


@pytest.mark.parametrize("target", [0.0, 50.0, 90.0, 100.0])
def test_calibrated_threshold_reaches_target_cr(target):
    signals = make_rng(3).normal(size=(256, 20))
    cfg = WaveletConfig()
    threshold = calibrate_threshold(signals, target, cfg)
    _, crs = compress_batch(signals, WaveletConfig(threshold=threshold))
    assert abs(crs.mean() - target) < 1.0


def test_calibration_target_range():
    with pytest.raises(DomainError):
        calibrate_threshold(np.ones((256, 2)), 101.0, WaveletConfig())


def test_codec_eval_reports_both_modalities():
    rng = make_rng(4)
    eeg = rng.uniform(0, 1, size=(256, 6))
    emg = rng.uniform(0, 1, size=(256, 6))
    report = dwt_codec_eval(eeg, emg, WaveletConfig(threshold=0.1), WaveletConfig(threshold=0.3))
    assert report.method == "dwt"
    assert report.cr_eeg < report.cr_emg
    assert report.cr_percent == pytest.approx((report.cr_eeg + report.cr_emg) / 2)
    assert report.prd_eeg >= 0 and report.prd_emg >= 0
    assert report.config["emg"]["threshold"] == 0.3
    assert report.config["eeg"]["mode"] == "periodization"


def test_codec_eval_needs_samples():
    with pytest.raises(DomainError):
        dwt_codec_eval(np.zeros((256, 0)), np.zeros((256, 0)), WaveletConfig())


@pytest.mark.parametrize("length", [300, 896])
def test_transform_preserves_energy(length):
    signal = make_rng(length + 1).normal(size=length)
    coeffs = dwt_forward(signal, WaveletConfig())
    energy = sum(float(np.sum(c ** 2)) for c in coeffs)
    assert energy == pytest.approx(float(np.sum(signal ** 2)), rel=1e-9)


def test_constant_signal_has_no_detail():
    coeffs = dwt_forward(np.full(256, 0.7), WaveletConfig())
    for detail in coeffs[1:]:
        assert_allclose(detail, 0.0, atol=1e-10)


def test_inverse_is_linear():
    cfg = WaveletConfig()
    rng = make_rng(12)
    shapes = [c.shape for c in dwt_forward(np.zeros(512), cfg)]
    a = [rng.normal(size=s) for s in shapes]
    b = [rng.normal(size=s) for s in shapes]
    assert_allclose(dwt_inverse([x + y for x, y in zip(a, b)], cfg), dwt_inverse(a, cfg) + dwt_inverse(b, cfg), atol=1e-10)
    assert_allclose(dwt_inverse([np.zeros(s) for s in shapes], cfg), 0.0, atol=0)
