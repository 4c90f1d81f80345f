"""Shot-noise calibration and channel parameter estimation.

Works on paired Alice/Bob quadrature blocks.  Bob's quadratures are the
demodulated symbol-rate samples normalized to shot-noise units with a
scale measured on vacuum/electronic records through the *same*
demodulation chain, which cancels every deterministic gain of the
receiver and DSP.

Estimator algebra (heterodyne measurement model, trusted detector):

    x_B = sqrt(eta * T / 2) * x_A + n,   Var(n) = 1 + v_el + eta*T*xi/2

with Alice quadratures in SNU, Var(x_A) = V_A per quadrature (``x_A =
sqrt(2) Re(a)`` for the complex symbols ``a`` of total variance V_A).
Pooling both quadratures:

    g_hat  = <x_A x_B> / <x_A^2>
    T_hat  = 2 g_hat^2 / eta
    xi_hat = 2 (Var(x_B - g_hat x_A) - Var_vac) / (eta * T_hat)

``Var_vac`` defaults to the model value ``1 + v_el`` and may be replaced
by the vacuum variance measured through the chain.  ``eta`` and ``v_el``
are calibrated constants of the trusted receiver, never estimated from
channel blocks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import ParameterError, SymbolFrame, Waveform
from .dsp import DemodPlan, demodulate

MIN_BLOCK = 10_000


class EstimationError(RuntimeError):
    """Calibration or channel estimation failed."""


@dataclass(frozen=True)
class CalibrationResult:
    """Receiver scale calibration from vacuum and electronic records.

    ``snu_scale`` converts demodulated quadrature variance to SNU;
    ``v_el_hat`` is the electronic noise in SNU.
    """

    snu_scale: float
    v_el_hat: float
    var_vacuum: float = float("nan")
    var_electronic: float = float("nan")

    def __post_init__(self):
        if not self.snu_scale > 0:
            raise EstimationError(
                f"calibration failure: non-positive snu_scale {self.snu_scale!r}")


@dataclass(frozen=True)
class NoiseEstimate:
    """Per-block channel estimate: transmittance and excess noise (SNU)."""

    T_hat: float
    xi_hat: float
    block_size: int
    block_id: int = 0
    g_hat: float = float("nan")
    quad_asymmetry: float = float("nan")

    def __post_init__(self):
        if not 0 < self.T_hat <= 1:
            raise EstimationError(f"T_hat must be in (0, 1], got {self.T_hat!r}")
        if self.block_size < 1:
            raise ParameterError("block_size must be >= 1")


def _quad_variance(record: Waveform, plan: DemodPlan, guard: int) -> float:
    """Pooled per-quadrature variance of a record's demodulated symbols."""
    bb, _ = demodulate(record, plan)
    sps = plan.sps(record.sample_rate)
    y = bb.samples[::sps].astype(np.complex128)
    if len(y) <= 2 * guard + 1:
        raise ParameterError("record too short for calibration")
    y = y[guard:len(y) - guard]
    return float(0.5 * (y.real.var() + y.imag.var()))


def calibrate_snu(vacuum: Waveform, electronic: Waveform,
                  plan: DemodPlan, guard: int = 64) -> CalibrationResult:
    """Two-point calibration of the shot-noise unit.

    Both records must have been captured (or simulated) through the same
    receiver chain as the data.  ``guard`` symbols are dropped at each
    end to avoid filter transients.
    """
    if vacuum.sample_rate != electronic.sample_rate:
        raise ParameterError("vacuum and electronic records must share a rate")
    var_vac = _quad_variance(vacuum, plan, guard)
    var_el = _quad_variance(electronic, plan, guard)
    scale = var_vac - var_el
    if scale <= 0:
        raise EstimationError(
            f"calibration failure: vacuum variance {var_vac:.4g} does not "
            f"exceed electronic variance {var_el:.4g}")
    return CalibrationResult(snu_scale=scale, v_el_hat=var_el / scale,
                             var_vacuum=var_vac, var_electronic=var_el)


def alice_quadratures(frame: SymbolFrame) -> tuple[np.ndarray, np.ndarray]:
    """Alice's SNU quadratures: sqrt(2) * (X, P) so Var(X)+... = 2 V_A/2."""
    return np.sqrt(2.0) * frame.x, np.sqrt(2.0) * frame.p


def estimate_channel(alice: SymbolFrame, bob_x: np.ndarray, bob_p: np.ndarray,
                     eta: float, v_el: float, *, var_vacuum: float | None = None,
                     block_id: int = 0,
                     min_block: int = MIN_BLOCK) -> NoiseEstimate:
    """Estimate (T, xi) from one aligned block.

    ``bob_x`` / ``bob_p`` are Bob's SNU-normalized quadratures, paired
    one-to-one with ``alice.symbols``.  ``var_vacuum`` overrides the
    model vacuum variance ``1 + v_el`` with a measured value.
    ``xi_hat`` may come out slightly negative on a finite block and is
    reported as-is.
    """
    if not 0 < eta <= 1:
        raise ParameterError("eta must be in (0, 1]")
    if v_el < 0:
        raise ParameterError("v_el must be >= 0")
    bx = np.asarray(bob_x, dtype=np.float64)
    bp = np.asarray(bob_p, dtype=np.float64)
    if bx.shape != bp.shape or bx.ndim != 1:
        raise ParameterError("bob quadratures must be equal-length 1-d arrays")
    n = bx.size
    if n != len(alice):
        raise ParameterError("alice and bob blocks must be aligned pairs")
    if n < min_block:
        raise ParameterError(
            f"block of {n} symbols below the minimum {min_block}")

    ax, ap = alice_quadratures(alice)
    g_x = float(np.dot(ax, bx) / np.dot(ax, ax))
    g_p = float(np.dot(ap, bp) / np.dot(ap, ap))
    num = np.dot(ax, bx) + np.dot(ap, bp)
    den = np.dot(ax, ax) + np.dot(ap, ap)
    g = float(num / den)
    t_hat = 2.0 * g * g / eta
    if t_hat <= 0:
        raise EstimationError(f"estimation failure: T_hat {t_hat!r}")
    if t_hat > 1.0:
        if t_hat > 1.05:
            raise EstimationError(
                f"estimation failure: unphysical T_hat {t_hat:.4g}")
        t_hat = 1.0  # statistical overshoot of a lossless channel

    resid = np.concatenate([bx - g * ax, bp - g * ap])
    var_r = float(resid.var())
    vac = float(var_vacuum) if var_vacuum is not None else 1.0 + v_el
    xi_hat = 2.0 * (var_r - vac) / (eta * t_hat)
    asym = abs(g_x - g_p) / abs(g) if g != 0 else float("inf")
    return NoiseEstimate(T_hat=t_hat, xi_hat=xi_hat, block_size=n,
                         block_id=block_id, g_hat=g, quad_asymmetry=asym)


def noise_timeseries(config, n_blocks: int, seed: int = 0):
    """Repeated simulate-estimate cycles with evolving channel state.

    Thin wrapper over :func:`cvqkdsim.pipeline.noise_timeseries`; see
    there for the run semantics.  Returns a list of NoiseEstimate.
    """
    from . import pipeline
    return pipeline.noise_timeseries(config, n_blocks, seed)


NOISE_CSV_FIELDS = ("block_id", "T_hat", "xi_hat", "skr_bps")


def write_noise_csv(path, estimates, skr_bps) -> None:
    """Emit per-block results as CSV (block_id, T_hat, xi_hat, skr_bps)."""
    rows = list(zip(estimates, skr_bps))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(NOISE_CSV_FIELDS)
        for est, skr in rows:
            w.writerow([est.block_id, f"{est.T_hat:.8g}",
                        f"{est.xi_hat:.8g}", f"{skr:.8g}"])
