"""Data-aided real-valued 4-in / 2-out FIR equalizer with LMS training.

The four inputs are the X and P quadratures of both demodulated
polarization branches; the two outputs are the recovered X and P of the
quantum signal.  Each output is a sum of four length-``n_taps`` real FIR
filters; a normalized-LMS pass over the known training prefix adapts the
eight tap vectors.

The per-symbol adaptive loop runs in a compiled extension when
available; a NumPy fallback is selected at import time otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ParameterError

try:
    from . import _lms as _kernel
except ImportError:  # compiled extension not built
    from . import _lms_py as _kernel


def lms_backend() -> str:
    """Name of the active kernel implementation ('cython' or 'python')."""
    return _kernel.BACKEND


class TrainingDivergence(RuntimeError):
    """LMS error grew over the tail of the training pass."""

    def __init__(self, msg, mse_curve=None):
        super().__init__(msg)
        self.mse_curve = mse_curve


@dataclass
class EqualizerWeights:
    """Eight real tap vectors (2 outputs x 4 inputs x n_taps) plus the
    training configuration that produced them."""

    taps: np.ndarray
    mu: float
    n_trained: int = 0
    final_mse: float = float("nan")

    def __post_init__(self):
        t = np.ascontiguousarray(self.taps, dtype=np.float64)
        if t.shape[0] != 2 or t.shape[1] != 4 or t.ndim != 3:
            raise ParameterError("taps must have shape (2, 4, n_taps)")
        if t.shape[2] % 2 == 0:
            raise ParameterError("n_taps must be odd (center-tap alignment)")
        if not np.all(np.isfinite(t)):
            raise ParameterError("taps must be finite")
        self.taps = t

    @property
    def n_taps(self) -> int:
        return self.taps.shape[2]

    @property
    def delay(self) -> int:
        return (self.n_taps - 1) // 2

    @classmethod
    def identity(cls, n_taps: int = 21, mu: float = 1e-3) -> "EqualizerWeights":
        if n_taps % 2 == 0 or n_taps < 1:
            raise ParameterError("n_taps must be odd and >= 1")
        taps = np.zeros((2, 4, n_taps))
        taps[0, 0, (n_taps - 1) // 2] = 1.0
        taps[1, 1, (n_taps - 1) // 2] = 1.0
        return cls(taps, mu)


def _as_streams(streams) -> np.ndarray:
    s = np.ascontiguousarray(streams, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != 4:
        raise ParameterError("streams must have shape (4, n)")
    return s


def streams_from_symbols(h_symbols: np.ndarray, v_symbols: np.ndarray) -> np.ndarray:
    """Stack (S_hx, S_hp, S_vx, S_vp) from the two complex symbol streams."""
    return np.ascontiguousarray(
        np.stack([h_symbols.real, h_symbols.imag,
                  v_symbols.real, v_symbols.imag]), dtype=np.float64)


def lms_train(streams, targets, n_taps: int = 21, mu: float = 1e-3,
              weights: EqualizerWeights | None = None,
              eps: float = 1e-12) -> EqualizerWeights:
    """One normalized-LMS training pass.

    ``targets`` is (2, n_train) with targets[:, k] aligned to the center
    of the window streams[:, k : k + n_taps].  Raises
    :class:`TrainingDivergence` if the smoothed error grows over the
    last 10% of the pass.
    """
    s = _as_streams(streams)
    t = np.ascontiguousarray(targets, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != 2:
        raise ParameterError("targets must have shape (2, n_train)")
    n_train = t.shape[1]
    if weights is None:
        weights = EqualizerWeights.identity(n_taps, mu)
    if n_train < 10 * weights.n_taps:
        raise ParameterError("training length must be >= 10 * n_taps")
    if s.shape[1] < n_train + weights.n_taps - 1:
        raise ParameterError("streams too short for the training length")
    if not 0 < mu < 2:
        raise ParameterError("mu must be in (0, 2) for normalized LMS")

    err_sq = _kernel.nlms_train(s[:, :n_train + weights.n_taps - 1], t,
                                weights.taps, float(mu), float(eps))
    tail = max(1, n_train // 10)
    head_mse = float(np.mean(err_sq[:tail]))
    tail_mse = float(np.mean(err_sq[-tail:]))
    mid_mse = float(np.mean(err_sq[-3 * tail:-tail])) if n_train >= 4 * tail else head_mse
    # genuine NLMS divergence grows geometrically, so only a large rise
    # counts; the error floor itself can wobble by tens of percent
    if tail_mse > 3.0 * max(head_mse, mid_mse):
        raise TrainingDivergence(
            f"training MSE rising: head {head_mse:.4g}, mid {mid_mse:.4g}, "
            f"tail {tail_mse:.4g}", mse_curve=err_sq)
    weights.n_trained += n_train
    weights.final_mse = tail_mse
    return weights


def equalize(weights: EqualizerWeights, streams) -> np.ndarray:
    """Static filtering with trained weights.

    Returns (2, n - n_taps + 1); output k corresponds to input center
    k + (n_taps - 1) // 2.
    """
    s = _as_streams(streams)
    if s.shape[1] < weights.n_taps:
        raise ParameterError("input shorter than the filter")
    out = _kernel.fir_apply(s, weights.taps)
    return np.asarray(out)
