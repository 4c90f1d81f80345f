"""Pure-Python (NumPy) LMS kernel, fallback for the compiled extension."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def nlms_train(streams: np.ndarray, targets: np.ndarray, weights: np.ndarray,
               mu: float, eps: float) -> np.ndarray:
    """One normalized-LMS pass over the training region, in place.

    streams: (4, n) input symbol quadratures; targets: (2, n_train)
    desired outputs, aligned so targets[:, k] corresponds to the window
    streams[:, k:k+n_taps]; weights: (2, 4, n_taps), updated in place.
    Returns the per-symbol squared-error curve, summed over outputs.
    """
    n_out, n_in, n_taps = weights.shape
    n_train = targets.shape[1]
    err_sq = np.empty(n_train)
    for k in range(n_train):
        win = streams[:, k:k + n_taps]
        power = float(np.sum(win * win)) + eps
        y = np.einsum("oit,it->o", weights, win)
        e = targets[:, k] - y
        weights += (mu / power) * e[:, None, None] * win[None, :, :]
        err_sq[k] = float(np.sum(e * e))
    return err_sq


def fir_apply(streams: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Apply the weight bank as a static filter: output length n - n_taps + 1."""
    n_taps = weights.shape[2]
    win = np.lib.stride_tricks.sliding_window_view(streams, n_taps, axis=1)
    # win: (4, n - n_taps + 1, n_taps)
    return np.einsum("oit,ikt->ok", weights, win)
