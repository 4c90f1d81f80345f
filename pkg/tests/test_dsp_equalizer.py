import numpy as np
import pytest

from cvqkdsim.core import ParameterError
from cvqkdsim.dsp import (EqualizerWeights, TrainingDivergence, equalize,
                          lms_backend, lms_train, streams_from_symbols)
from cvqkdsim.dsp import _lms_py

try:
    from cvqkdsim.dsp import _lms as _lms_ext
except ImportError:
    _lms_ext = None


def _mixed_scenario(n=12_000, seed=0, theta=0.4, imbalance=0.8):
    """Static polarization rotation + quadrature gain imbalance."""
    rng = np.random.default_rng(seed)
    h = (rng.normal(0, 1, n) + 1j * rng.normal(0, 1, n))
    v = (rng.normal(0, 1, n) + 1j * rng.normal(0, 1, n))
    rx_h = np.cos(theta) * h + np.sin(theta) * v
    rx_v = -np.sin(theta) * h + np.cos(theta) * v
    rx_h = imbalance * rx_h.real + 1j * rx_h.imag
    streams = streams_from_symbols(rx_h, rx_v)
    targets = np.stack([h.real, h.imag])
    return streams, targets


def _ls_solution(streams, targets, n_taps):
    """Direct least-squares oracle over the same windows as lms_train."""
    n_train = targets.shape[1]
    windows = np.lib.stride_tricks.sliding_window_view(
        streams[:, : n_train + n_taps - 1], n_taps, axis=1)
    design = windows.transpose(1, 0, 2).reshape(n_train, 4 * n_taps)
    taps = np.zeros((2, 4, n_taps))
    mse = []
    for o in (0, 1):
        w, *_ = np.linalg.lstsq(design, targets[o], rcond=None)
        taps[o] = w.reshape(4, n_taps)
        mse.append(np.mean((design @ w - targets[o]) ** 2))
    return EqualizerWeights(taps, mu=0.0), float(np.mean(mse))


class TestStaticScenarios:
    def test_identity_passthrough_noiseless(self):
        rng = np.random.default_rng(1)
        sym = rng.normal(0, 1, 4000) + 1j * rng.normal(0, 1, 4000)
        streams = streams_from_symbols(sym, np.zeros_like(sym))
        w = EqualizerWeights.identity(n_taps=11)
        out = equalize(w, streams)
        delay = w.delay
        ref = np.stack([sym.real, sym.imag])[:, delay: delay + out.shape[1]]
        assert np.mean((out - ref) ** 2) < 1e-3

    def test_lms_within_1db_of_least_squares(self):
        streams, targets = _mixed_scenario()
        n_taps = 11
        n_train = targets.shape[1] - n_taps + 1
        tgt = targets[:, (n_taps - 1) // 2:(n_taps - 1) // 2 + n_train]
        w = lms_train(streams, tgt, n_taps=n_taps, mu=0.2)
        w = lms_train(streams, tgt, n_taps=n_taps, mu=0.02, weights=w)
        out = equalize(w, streams[:, :n_train + n_taps - 1])
        lms_mse = float(np.mean((out - tgt) ** 2))
        _, ls_mse = _ls_solution(streams, tgt, n_taps)
        assert 10 * np.log10(lms_mse / ls_mse) < 1.0

    def test_recovers_rotation_and_imbalance(self):
        streams, targets = _mixed_scenario(theta=0.9, imbalance=0.6)
        n_taps = 5
        n_train = targets.shape[1] - n_taps + 1
        tgt = targets[:, (n_taps - 1) // 2:(n_taps - 1) // 2 + n_train]
        w = lms_train(streams, tgt, n_taps=n_taps, mu=0.3)
        w = lms_train(streams, tgt, n_taps=n_taps, mu=0.03, weights=w)
        assert w.final_mse < 0.01  # noiseless: near-perfect inversion

    def test_phase_ramp_tracking_gain(self):
        # slow phase ramp across the block: an equalizer trained on the
        # rotated data beats the static identity by >= 10 dB
        rng = np.random.default_rng(2)
        n = 12_000
        sym = rng.normal(0, 1, n) + 1j * rng.normal(0, 1, n)
        ramp = np.exp(1j * np.linspace(0, 0.2, n))
        rx = sym * ramp
        streams = streams_from_symbols(rx, np.zeros_like(rx))
        targets = np.stack([sym.real, sym.imag])
        n_taps = 5
        n_train = targets.shape[1] - n_taps + 1
        tgt = targets[:, (n_taps - 1) // 2:(n_taps - 1) // 2 + n_train]
        w = lms_train(streams, tgt, n_taps=n_taps, mu=0.1)
        ident = EqualizerWeights.identity(n_taps)
        out_w = equalize(w, streams[:, :n_train + n_taps - 1])
        out_i = equalize(ident, streams[:, :n_train + n_taps - 1])
        mse_w = np.mean((out_w - tgt)[:, -2000:] ** 2)
        mse_i = np.mean((out_i - tgt)[:, -2000:] ** 2)
        assert 10 * np.log10(mse_i / mse_w) >= 10.0


class TestTrainingGuards:
    def test_divergence_detected(self):
        rng = np.random.default_rng(3)
        n = 4000
        s = rng.normal(0, 1, (4, n))
        # exponentially growing targets force a rising error tail
        tgt = rng.normal(0, 1, (2, n - 10)) * np.exp(
            np.linspace(0, 6, n - 10))
        with pytest.raises(TrainingDivergence) as exc:
            lms_train(s, tgt, n_taps=11, mu=1e-4)
        assert exc.value.mse_curve is not None

    def test_parameter_validation(self):
        s = np.zeros((4, 1000))
        t = np.zeros((2, 500))
        with pytest.raises(ParameterError):
            lms_train(s, t, n_taps=10, mu=0.1)   # even taps
        with pytest.raises(ParameterError):
            lms_train(s, t, n_taps=11, mu=2.5)   # mu out of range
        with pytest.raises(ParameterError):
            lms_train(s, t[:, :50], n_taps=11, mu=0.1)  # too short
        with pytest.raises(ParameterError):
            lms_train(s[:3], t, n_taps=11, mu=0.1)  # wrong stream count
        with pytest.raises(ParameterError):
            EqualizerWeights(np.full((2, 4, 5), np.nan), mu=0.1)


class TestBackends:
    def test_backend_reported(self):
        assert lms_backend() in ("cython", "python")

    @pytest.mark.skipif(_lms_ext is None, reason="compiled kernel not built")
    def test_cython_matches_python_fallback(self):
        rng = np.random.default_rng(4)
        s = rng.normal(0, 1, (4, 3000))
        t = rng.normal(0, 1, (2, 2990))
        taps_a = np.zeros((2, 4, 11))
        taps_b = np.zeros((2, 4, 11))
        err_a = _lms_ext.nlms_train(s, t, taps_a, 0.1, 1e-12)
        err_b = _lms_py.nlms_train(s, t, taps_b, 0.1, 1e-12)
        assert np.allclose(taps_a, taps_b, atol=1e-10)
        assert np.allclose(err_a, err_b, atol=1e-10)
        out_a = np.asarray(_lms_ext.fir_apply(s, taps_a))
        out_b = np.asarray(_lms_py.fir_apply(s, taps_b))
        assert np.allclose(out_a, out_b, atol=1e-10)
